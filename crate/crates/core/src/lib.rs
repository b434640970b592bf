//! widthlab — a numerical laboratory for Kolmogorov n-widths of products of
//! octahedra in weighted and mixed ℓ_q norms.
//!
//! The crate provides:
//! - mixed-norm geometry: weighted ℓ_q norms, block partitions, products of
//!   octahedra and their vertex sets ([`norms`], [`octahedron`]);
//! - approximation machinery: distance-to-subspace solvers, deviations,
//!   rigorous spectral lower-bound certificates, constructive upper-bound
//!   searches and the support-exact approximation procedure ([`approx`]);
//! - Monte-Carlo verification of the probabilistic steps behind the width
//!   lower bound: random subsets, regularity, Bernstein tails, correlation
//!   and conditional-expectation inequalities ([`theorem2`]);
//! - Daubechies wavelet analysis and the discretized Besov problems
//!   ([`wavelets`], [`scaling`]).

pub mod approx;
pub mod error;
pub mod linalg;
pub mod norms;
pub mod octahedron;
pub mod problem;
pub mod report;

pub mod rng;
pub mod scaling;

pub mod solver;
pub mod stats;
pub mod subspace;
pub mod theorem2;
pub mod wavelets;

pub use error::{Error, Result};
