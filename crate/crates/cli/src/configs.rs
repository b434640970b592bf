//! Config schemas for the subcommands. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use widthlab::norms::Exponent;
use widthlab::problem::ProblemSpec;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateWidthConfig {
    pub problem: ProblemSpec,
    pub n: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub solver_tol: Option<f64>,
    #[serde(default)]
    pub search: Option<SearchSpec>,
    #[serde(default = "default_starts")]
    pub brute_force_starts: usize,
    #[serde(default = "default_true")]
    pub timings: bool,
}

fn default_starts() -> usize {
    1000
}

pub fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize, Default, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Search,
    BruteForce,
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct SearchSpec {
    #[serde(default)]
    pub random_restarts: Option<usize>,
    #[serde(default)]
    pub refine_iters: Option<usize>,
    /// Vertex sample count; absent means exact enumeration.
    #[serde(default)]
    pub samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTheorem2Config {
    pub n_dim: usize,
    pub weights: WeightsSpec,
    pub blocks: BlocksSpec,
    pub n: usize,
    pub q: f64,
    #[serde(default = "default_c")]
    pub condition_c: f64,
    #[serde(default = "default_a")]
    pub window_a: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub kchain: Option<KChainSpec>,
    #[serde(default = "default_true")]
    pub timings: bool,
}

fn default_c() -> f64 {
    1.0
}

fn default_a() -> f64 {
    4.0
}

fn default_delta() -> f64 {
    1.0 / 3.0
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum WeightsSpec {
    Keyword(String),
    Explicit(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum BlocksSpec {
    Equal { equal: usize },
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KChainSpec {
    #[serde(default = "default_true")]
    pub enabled: bool,
    /// Per-block subspace dimension as a fraction of the block size.
    #[serde(default = "default_fraction")]
    pub block_dim_fraction: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_identity_vertices")]
    pub identity_vertices: usize,
    #[serde(default = "default_omega_draws")]
    pub omega_draws: usize,
    #[serde(default = "default_regular_subsets")]
    pub regular_subsets: usize,
}

fn default_fraction() -> f64 {
    0.5
}

fn default_h() -> f64 {
    1.0
}

fn default_identity_vertices() -> usize {
    48
}

fn default_omega_draws() -> usize {
    16
}

fn default_regular_subsets() -> usize {
    4
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BesovCheckConfig {
    #[serde(default = "default_r0")]
    pub r0: usize,
    #[serde(default = "default_j")]
    pub j: u32,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_vectors")]
    pub vectors: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_true")]
    pub timings: bool,
}

fn default_r0() -> usize {
    4
}

fn default_j() -> u32 {
    12
}

fn default_levels() -> usize {
    5
}

fn default_p() -> f64 {
    4.0
}

fn default_vectors() -> usize {
    50
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSweepConfig {
    pub thetas: Vec<Exponent>,
    pub q: f64,
    pub ns: Vec<usize>,
    #[serde(default)]
    pub m_rule: MRuleSpec,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub effort: Option<EffortSpec>,
    #[serde(default = "default_true")]
    pub timings: bool,
}

#[derive(Debug, Deserialize, Default, Clone, Copy)]
#[serde(rename_all = "snake_case")]
pub enum MRuleSpec {
    #[default]
    Default,
    #[serde(untagged)]
    Fixed {
        fixed: usize,
    },
}

#[derive(Debug, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct EffortSpec {
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub ascent_steps: Option<usize>,
    #[serde(default)]
    pub solver_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KashinTableConfig {
    pub n_dim: usize,
    pub q: f64,
    pub ns: Vec<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub search: Option<SearchSpec>,
    #[serde(default = "default_true")]
    pub timings: bool,
}

/// Summary emitted next to the sweep CSV.
#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub failures: usize,
    pub fits: Vec<ThetaFit>,
    pub ratio_fit: Option<RatioFit>,
}

#[derive(Debug, Serialize)]
pub struct ThetaFit {
    pub theta: Exponent,
    pub c: f64,
    pub alpha: f64,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct RatioFit {
    pub theta_hi: Exponent,
    pub theta_lo: Exponent,
    pub alpha: f64,
    pub residual: f64,
    pub ratios: Vec<(usize, f64)>,
}
