//! Daubechies wavelets, dyadic evaluation tables, sequence norms ℓ^σ_{p,θ},
//! the discrete Besov norm, and samplers for the balls b^σ_{p,θ}.
//!
//! Filters come from the standard construction: the low-pass symbol is
//! √2·((1+z)/2)^{r0}·R(z) where R collects the roots of the Daubechies
//! polynomial inside the unit disk (extremal phase). φ is evaluated exactly
//! at dyadic points by solving the refinement eigenproblem at the integers
//! and refining; ψ follows from the quadrature-mirror relation. Coefficients
//! are midpoint-rule quadratures on a grid aligned so that every wavelet
//! evaluation is a table lookup.

use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::abs_pow;
use crate::norms::Exponent;
use crate::rng::{derive_seed, rng_from};

/// Finite dyadic index set: levels k = 0..m−1, positions j = 1..2^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceIndex {
    levels: usize,
}

impl SequenceIndex {
    /// T_m: levels 0..m−1 (total size 2^m − 1).
    pub fn t_m(m: usize) -> Result<Self> {
        if m == 0 || m > 24 {
            return Err(Error::input("level count must lie in 1..=24"));
        }
        Ok(SequenceIndex { levels: m })
    }

    /// The full index truncated at level `k_max` (inclusive).
    pub fn truncated(k_max: usize) -> Result<Self> {
        Self::t_m(k_max + 1)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn level_size(&self, k: usize) -> usize {
        1usize << k
    }

    pub fn total_size(&self) -> usize {
        (1usize << self.levels) - 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.levels).flat_map(|k| (1..=(1usize << k)).map(move |j| (k, j)))
    }

    /// Flat offset of (k, j), j = 1..2^k.
    pub fn flat(&self, k: usize, j: usize) -> usize {
        (1usize << k) - 1 + (j - 1)
    }
}

/// Coefficients over a `SequenceIndex`, stored per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceVector {
    pub m: usize,
    pub levels: Vec<Vec<f64>>,
}

impl SequenceVector {
    pub fn zeros(index: SequenceIndex) -> Self {
        SequenceVector {
            m: index.levels(),
            levels: (0..index.levels()).map(|k| vec![0.0; 1 << k]).collect(),
        }
    }

    pub fn index(&self) -> SequenceIndex {
        SequenceIndex { levels: self.m }
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.levels[k][j - 1]
    }

    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        self.levels[k][j - 1] = v;
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.levels.iter().flatten().cloned().collect()
    }

    pub fn from_flat(index: SequenceIndex, flat: &[f64]) -> Result<Self> {
        if flat.len() != index.total_size() {
            return Err(Error::DimensionMismatch {
                expected: index.total_size(),
                got: flat.len(),
            });
        }
        let mut v = SequenceVector::zeros(index);
        let mut pos = 0;
        for k in 0..index.levels() {
            let sz = 1 << k;
            v.levels[k].copy_from_slice(&flat[pos..pos + sz]);
            pos += sz;
        }
        Ok(v)
    }
}

/// ℓ^σ_{p,θ} norm: (Σ_k (2^{kσ}‖x[k]‖_p)^θ)^{1/θ}, sup over k for θ = ∞.
pub fn sequence_norm(x: &SequenceVector, sigma: f64, p: Exponent, theta: Exponent) -> f64 {
    let level_norms: Vec<f64> = x
        .levels
        .iter()
        .enumerate()
        .map(|(k, row)| {
            let lp = match p {
                Exponent::Infinity => row.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
                Exponent::Finite(pv) => {
                    row.iter().map(|v| abs_pow(*v, pv)).sum::<f64>().powf(1.0 / pv)
                }
            };
            2.0_f64.powf(k as f64 * sigma) * lp
        })
        .collect();
    match theta {
        Exponent::Infinity => level_norms.into_iter().fold(0.0, f64::max),
        Exponent::Finite(t) => {
            level_norms.iter().map(|v| abs_pow(*v, t)).sum::<f64>().powf(1.0 / t)
        }
    }
}

/// Specification of a ball b^σ_{p,θ} over a finite index.
#[derive(Debug, Clone, Copy)]
pub struct BesovBallSpec {
    pub sigma: f64,
    pub p: Exponent,
    pub theta: Exponent,
    pub index: SequenceIndex,
}

impl BesovBallSpec {
    pub fn norm(&self, x: &SequenceVector) -> f64 {
        sequence_norm(x, self.sigma, self.p, self.theta)
    }
}

/// Boundary (norm = 1) or interior (norm ≤ 1) samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BallSampling {
    Boundary,
    Interior,
}

/// Random elements of the ball: Gaussian draws normalized to the sphere,
/// optionally shrunk to the interior.
pub fn sample_ball(
    spec: &BesovBallSpec,
    count: usize,
    seed: u64,
    mode: BallSampling,
) -> Vec<SequenceVector> {
    let mut rng = rng_from(derive_seed(seed, 0xBA11));
    (0..count)
        .map(|_| {
            let mut x = SequenceVector::zeros(spec.index);
            for row in &mut x.levels {
                for v in row.iter_mut() {
                    *v = rng.sample::<f64, _>(StandardNormal);
                }
            }
            let nrm = spec.norm(&x);
            let shrink = match mode {
                BallSampling::Boundary => 1.0,
                BallSampling::Interior => rng.gen::<f64>(),
            };
            if nrm > 0.0 {
                let s = shrink / nrm;
                for row in &mut x.levels {
                    row.iter_mut().for_each(|v| *v *= s);
                }
            }
            x
        })
        .collect()
}

/// Extreme points of b^0_{1,θ} for θ ∈ {1, ∞}: a single signed unit entry
/// (θ = 1), or one signed unit entry per level (θ = ∞) — the vertex set of
/// the corresponding product of octahedra over the levels.
pub fn sample_extreme_points(
    index: SequenceIndex,
    theta: Exponent,
    count: usize,
    seed: u64,
) -> Result<Vec<SequenceVector>> {
    let mut rng = rng_from(derive_seed(seed, 0xE87E));
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut x = SequenceVector::zeros(index);
        match theta {
            Exponent::Finite(t) if t == 1.0 => {
                let k = rng.gen_range(0..index.levels());
                let j = rng.gen_range(1..=(1usize << k));
                let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                x.set(k, j, sign);
            }
            Exponent::Infinity => {
                for k in 0..index.levels() {
                    let j = rng.gen_range(1..=(1usize << k));
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    x.set(k, j, sign);
                }
            }
            _ => {
                return Err(Error::input(
                    "extreme-point generator covers θ = 1 and θ = ∞ only",
                ))
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Values of a refinable function on the dyadic grid step 2^{−res} over
/// [0, support_len].
#[derive(Debug, Clone)]
struct DyadicTable {
    res: u32,
    values: Vec<f64>,
}

impl DyadicTable {
    /// Value at the dyadic rational `num / 2^res` (0 outside the support).
    #[inline]
    fn at_ticks(&self, num: i64) -> f64 {
        if num < 0 || num as usize >= self.values.len() {
            0.0
        } else {
            self.values[num as usize]
        }
    }
}

/// Daubechies system with `r0` vanishing moments and evaluation tables at
/// resolution 2^{−J}. Both φ and ψ are supported in [0, 2r0 − 1].
#[derive(Debug, Clone)]
pub struct WaveletSystem {
    r0: usize,
    j_res: u32,
    lowpass: Vec<f64>,
    phi: DyadicTable,
    psi: DyadicTable,
}

/// Midpoint-rule grid over [lo, hi] with step 2^{−J}; `lo`, `hi` integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicGrid {
    pub lo: i64,
    pub hi: i64,
    pub j_res: u32,
}

impl DyadicGrid {
    pub fn new(lo: i64, hi: i64, j_res: u32) -> Result<Self> {
        if hi <= lo || j_res > 24 {
            return Err(Error::input("bad grid parameters"));
        }
        Ok(DyadicGrid { lo, hi, j_res })
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) as usize) << self.j_res
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self) -> f64 {
        0.5_f64.powi(self.j_res as i32)
    }

    /// Midpoint of cell t.
    pub fn point(&self, t: usize) -> f64 {
        self.lo as f64 + (t as f64 + 0.5) * self.step()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|t| self.point(t)).collect()
    }
}

impl WaveletSystem {
    pub fn r0(&self) -> usize {
        self.r0
    }

    pub fn j_res(&self) -> u32 {
        self.j_res
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    /// Filter support length 2·r0.
    pub fn filter_len(&self) -> usize {
        2 * self.r0
    }

    /// Grid covering every ψ_{k,j} with k ≥ 0, j = 1..2^k: [0, 2·r0].
    pub fn natural_grid(&self) -> DyadicGrid {
        DyadicGrid { lo: 0, hi: 2 * self.r0 as i64, j_res: self.j_res }
    }

    /// ψ_{k,j}(x) = 2^{k/2} ψ(2^k x − j) at midpoint t of the grid.
    ///
    /// Grid midpoints have the form (ticks + 1/2)·2^{−J}; the argument
    /// 2^k·x − j then falls on the half-resolution table exactly, so the
    /// lookup is integer arithmetic with no rounding.
    pub fn psi_kj_at(&self, k: u32, j: i64, grid: &DyadicGrid, t: usize) -> f64 {
        debug_assert!(grid.j_res == self.j_res);
        // arg·2^{J+1} = 2^k·(lo·2^{J+1} + 2t + 1) − j·2^{J+1}
        let jp1 = self.j_res + 1;
        let base = (grid.lo << jp1) + 2 * t as i64 + 1;
        let num = (base << k) - (j << jp1);
        let amp = 2.0_f64.powi((k / 2) as i32)
            * if k % 2 == 1 { std::f64::consts::SQRT_2 } else { 1.0 };
        amp * self.psi.at_ticks(num)
    }

    /// φ_{0,j}(x) = φ(x − j) at midpoint t.
    pub fn phi_0j_at(&self, j: i64, grid: &DyadicGrid, t: usize) -> f64 {
        let jp1 = self.j_res + 1;
        let num = (grid.lo << jp1) + 2 * t as i64 + 1 - (j << jp1);
        self.phi.at_ticks(num)
    }

    /// Midpoint quadrature of f·ψ_{k,j} over the grid.
    pub fn psi_inner(&self, f: &[f64], grid: &DyadicGrid, k: u32, j: i64) -> f64 {
        // restrict to the support of ψ_{k,j}: [j/2^k, (j + 2r0 − 1)/2^k]
        let step = grid.step();
        let lo_x = j as f64 / (1u64 << k) as f64;
        let hi_x = (j as f64 + (2 * self.r0 - 1) as f64) / (1u64 << k) as f64;
        let t0 = (((lo_x - grid.lo as f64) / step).floor().max(0.0)) as usize;
        let t1 = ((((hi_x - grid.lo as f64) / step).ceil()) as usize).min(grid.len());
        let mut acc = 0.0;
        for t in t0..t1 {
            acc += f[t] * self.psi_kj_at(k, j, grid, t);
        }
        acc * step
    }

    pub fn phi_inner(&self, f: &[f64], grid: &DyadicGrid, j: i64) -> f64 {
        let step = grid.step();
        let mut acc = 0.0;
        for t in 0..grid.len() {
            let v = self.phi_0j_at(j, grid, t);
            if v != 0.0 {
                acc += f[t] * v;
            }
        }
        acc * step
    }
}

/// Build the Daubechies system with r0 vanishing moments and evaluation
/// tables at resolution 2^{−J}.
pub fn build_wavelet(r0: usize, j_res: u32) -> Result<WaveletSystem> {
    if !(1..=10).contains(&r0) {
        return Err(Error::input("vanishing moments r0 must lie in 1..=10"));
    }
    if !(8..=16).contains(&j_res) {
        return Err(Error::input("table resolution J must lie in 8..=16"));
    }
    let lowpass = daubechies_filter(r0)?;
    // orthonormality: Σ h_k h_{k+2l} = δ_{l0}
    for l in 0..r0 {
        let mut s = 0.0;
        for k in 0..lowpass.len() {
            if k + 2 * l < lowpass.len() {
                s += lowpass[k] * lowpass[k + 2 * l];
            }
        }
        let target = if l == 0 { 1.0 } else { 0.0 };
        if (s - target).abs() > 1e-12 {
            return Err(Error::Stagnation(format!(
                "filter orthonormality residual {:e} at shift {l}",
                (s - target).abs()
            )));
        }
    }
    let sum: f64 = lowpass.iter().sum();
    if (sum - std::f64::consts::SQRT_2).abs() > 1e-12 {
        return Err(Error::Stagnation("filter does not sum to √2".into()));
    }

    let phi = cascade_phi(&lowpass, j_res + 1)?;
    let psi = make_psi(&lowpass, &phi);
    Ok(WaveletSystem { r0, j_res, lowpass, phi, psi })
}

/// Daubechies low-pass filter of length 2·r0 (extremal phase) via spectral
/// factorization of the Daubechies polynomial.
fn daubechies_filter(r0: usize) -> Result<Vec<f64>> {
    if r0 == 1 {
        let v = std::f64::consts::FRAC_1_SQRT_2;
        return Ok(vec![v, v]);
    }
    // Roots of P(y) = Σ_{k<r0} C(r0−1+k, k) y^k (degree r0−1), then for each
    // y-root the factor pair in z solves z² − (2−4y)z + 1 = 0; keep the root
    // outside the unit disk from each reciprocal pair.
    let deg = r0 - 1;
    let p_coeffs: Vec<f64> = (0..=deg).map(|k| binomial(deg + k, k)).collect();
    let y_roots = durand_kerner(&p_coeffs)?;
    let mut chosen: Vec<Complex64> = Vec::with_capacity(deg);
    for y in y_roots {
        let b = Complex64::new(2.0, 0.0) - y * 4.0;
        let disc = (b * b - 4.0).sqrt();
        let z1 = (b + disc) * 0.5;
        let z2 = (b - disc) * 0.5;
        chosen.push(if z1.norm() > z2.norm() { z1 } else { z2 });
    }
    if chosen.iter().any(|z| z.norm() <= 1.0) {
        return Err(Error::Stagnation("reciprocal root pair degenerated on the circle".into()));
    }
    // H(z) = √2·((1+z)/2)^{r0}·Π (z − z_i), rescaled so H(1) = √2; the
    // outside-the-disk factor puts the filter in the standard extremal phase
    let mut coeffs: Vec<Complex64> = vec![Complex64::new(1.0, 0.0)];
    for z_i in &chosen {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] -= c * z_i;
            next[i + 1] += c;
        }
        coeffs = next;
    }
    for _ in 0..r0 {
        let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
        for (i, &c) in coeffs.iter().enumerate() {
            next[i] += c * 0.5;
            next[i + 1] += c * 0.5;
        }
        coeffs = next;
    }
    let norm_at_one: Complex64 = coeffs.iter().sum();
    let scale = std::f64::consts::SQRT_2 / norm_at_one.re;
    let h: Vec<f64> = coeffs
        .iter()
        .map(|c| {
            debug_assert!(c.im.abs() < 1e-9);
            c.re * scale
        })
        .collect();
    if h.len() != 2 * r0 {
        return Err(Error::Stagnation("unexpected filter length".into()));
    }
    Ok(h)
}

fn binomial(n: usize, k: usize) -> f64 {
    let mut out = 1.0;
    for i in 0..k {
        out = out * (n - i) as f64 / (k - i) as f64;
    }
    out
}

/// Durand–Kerner root finder for a real polynomial (ascending coefficients).
fn durand_kerner(poly: &[f64]) -> Result<Vec<Complex64>> {
    let deg = poly.len() - 1;
    let lead = poly[deg];
    let monic: Vec<Complex64> =
        poly.iter().map(|c| Complex64::new(c / lead, 0.0)).collect();
    let eval = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &c in monic.iter().rev() {
            acc = acc * z + c;
        }
        acc
    };
    let deriv = |z: Complex64| -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, &c) in monic.iter().enumerate().skip(1).rev() {
            acc = acc * z + c * k as f64;
        }
        acc
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|i| seed.powu(i as u32 + 1)).collect();
    let mut converged = false;
    for _ in 0..2000 {
        let mut shift = 0.0_f64;
        let snapshot = roots.clone();
        for i in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &rj) in snapshot.iter().enumerate() {
                if j != i {
                    denom *= snapshot[i] - rj;
                }
            }
            let delta = eval(snapshot[i]) / denom;
            roots[i] = snapshot[i] - delta;
            shift = shift.max(delta.norm() / (1.0 + snapshot[i].norm()));
        }
        if shift < 1e-13 {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Stagnation("polynomial root iteration did not converge".into()));
    }
    // Newton polish (roots are simple)
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let d = deriv(*r);
            if d.norm() < 1e-300 {
                break;
            }
            *r -= eval(*r) / d;
        }
    }
    Ok(roots)
}

/// Exact values of φ on the dyadic grid 2^{−res} over [0, L−1]: integer
/// values from the refinement eigenproblem, then dyadic refinement.
fn cascade_phi(h: &[f64], res: u32) -> Result<DyadicTable> {
    let len = h.len();
    let support = len - 1; // φ lives on [0, L−1]
    let sqrt2 = std::f64::consts::SQRT_2;

    // integer values φ(1..L−2) solve v = M v with M_{ab} = √2·h[2a−b]
    let interior = support.saturating_sub(1);
    let mut vals_int = vec![0.0; support + 1];
    if interior == 0 {
        // Haar: right-continuous convention φ(0) = 1
        vals_int[0] = 1.0;
    } else {
        let mut v = vec![1.0 / interior as f64; interior];
        for _ in 0..2000 {
            let mut nv = vec![0.0; interior];
            for (a, slot) in nv.iter_mut().enumerate() {
                let ia = a + 1;
                for (b, &vb) in v.iter().enumerate() {
                    let ib = b + 1;
                    let idx = 2 * ia as isize - ib as isize;
                    if idx >= 0 && (idx as usize) < len {
                        *slot += sqrt2 * h[idx as usize] * vb;
                    }
                }
            }
            let s: f64 = nv.iter().sum();
            if s.abs() < 1e-300 {
                return Err(Error::Stagnation("refinement eigenvector collapsed".into()));
            }
            nv.iter_mut().for_each(|x| *x /= s);
            let diff: f64 = nv.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = nv;
            if diff < 1e-15 {
                break;
            }
        }
        for (i, &x) in v.iter().enumerate() {
            vals_int[i + 1] = x;
        }
    }

    // refine: values at step 2^{−(l+1)} from step 2^{−l} via
    // φ(x) = √2 Σ h_k φ(2x − k)
    let mut cur = vals_int;
    for l in 0..res {
        let n_cur = cur.len();
        let n_next = support * (1usize << (l + 1)) + 1;
        let mut next = vec![0.0; n_next];
        for (t, slot) in next.iter_mut().enumerate() {
            if t % 2 == 0 {
                *slot = cur[t / 2];
                continue;
            }
            // x = t/2^{l+1}; 2x = t/2^l
            let mut acc = 0.0;
            for (k, &hk) in h.iter().enumerate() {
                let idx = t as isize - (k as isize) * (1isize << l);
                if idx >= 0 && (idx as usize) < n_cur {
                    acc += sqrt2 * hk * cur[idx as usize];
                }
            }
            *slot = acc;
        }
        cur = next;
    }
    Ok(DyadicTable { res, values: cur })
}

/// ψ(x) = √2 Σ_k g_k φ(2x − k), g_k = (−1)^k h_{L−1−k}; same support as φ.
fn make_psi(h: &[f64], phi: &DyadicTable) -> DyadicTable {
    let len = h.len();
    let sqrt2 = std::f64::consts::SQRT_2;
    let g: Vec<f64> = (0..len)
        .map(|k| if k % 2 == 0 { h[len - 1 - k] } else { -h[len - 1 - k] })
        .collect();
    let res = phi.res;
    let n = phi.values.len();
    let mut values = vec![0.0; n];
    for (t, slot) in values.iter_mut().enumerate() {
        // x = t/2^res; φ(2x − k) at ticks 2t − k·2^res
        let mut acc = 0.0;
        for (k, &gk) in g.iter().enumerate() {
            let idx = 2 * t as i64 - (k as i64) * (1i64 << res);
            acc += sqrt2 * gk * phi.at_ticks(idx);
        }
        *slot = acc;
    }
    DyadicTable { res, values }
}

/// Wavelet coefficients x_{k,j} = 2^{k/2}·⟨f, ψ_{k,j}⟩ over the index, by
/// midpoint quadrature on the grid. Levels up to k require J ≥ k + 4.
pub fn analyze(
    f: &[f64],
    grid: &DyadicGrid,
    ws: &WaveletSystem,
    index: SequenceIndex,
) -> Result<SequenceVector> {
    if f.len() != grid.len() {
        return Err(Error::DimensionMismatch { expected: grid.len(), got: f.len() });
    }
    let k_max = index.levels() - 1;
    if (k_max as u32) + 4 > ws.j_res {
        return Err(Error::input(format!(
            "grid resolution 2^-{} insufficient for level {k_max} (need J ≥ k+4)",
            ws.j_res
        )));
    }
    let mut out = SequenceVector::zeros(index);
    for k in 0..index.levels() {
        let scale = 2.0_f64.powf(k as f64 / 2.0);
        for j in 1..=(1usize << k) {
            let inner = ws.psi_inner(f, grid, k as u32, j as i64);
            out.set(k, j, scale * inner);
        }
    }
    Ok(out)
}

/// f = Σ x_{k,j}·2^{−k/2}·ψ_{k,j} on the grid (the inverse coordinate
/// change of `analyze`).
pub fn synthesize(x: &SequenceVector, ws: &WaveletSystem, grid: &DyadicGrid) -> Vec<f64> {
    let mut f = vec![0.0; grid.len()];
    for (k, row) in x.levels.iter().enumerate() {
        let scale = 2.0_f64.powf(-(k as f64) / 2.0);
        for (j0, &c) in row.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let j = (j0 + 1) as i64;
            let coeff = c * scale;
            let step = grid.step();
            let lo_x = j as f64 / (1u64 << k) as f64;
            let hi_x = (j as f64 + (2 * ws.r0 - 1) as f64) / (1u64 << k) as f64;
            let t0 = (((lo_x - grid.lo as f64) / step).floor().max(0.0)) as usize;
            let t1 = ((((hi_x - grid.lo as f64) / step).ceil()) as usize).min(grid.len());
            for (t, slot) in f.iter_mut().enumerate().take(t1).skip(t0) {
                *slot += coeff * ws.psi_kj_at(k as u32, j, grid, t);
            }
        }
    }
    f
}

/// L_p norm of grid samples by the midpoint rule; `normalized` divides the
/// measure by the interval length (probability normalization).
pub fn lp_norm(f: &[f64], grid: &DyadicGrid, p: f64, normalized: bool) -> f64 {
    let step = grid.step();
    let mass: f64 = f.iter().map(|v| abs_pow(*v, p)).sum::<f64>() * step;
    let mass = if normalized { mass / (grid.hi - grid.lo) as f64 } else { mass };
    mass.powf(1.0 / p)
}

/// Two-term discrete Besov norm
/// ‖(⟨f,φ_{0,j}⟩)‖_p + ‖(⟨f,ψ_{k,j}⟩)‖_{ℓ^σ_{p,θ}} with σ = r + 1/2 − 1/p;
/// requires r < r0.
pub fn discrete_besov_norm(
    f: &[f64],
    grid: &DyadicGrid,
    ws: &WaveletSystem,
    index: SequenceIndex,
    r: f64,
    p: Exponent,
    theta: Exponent,
) -> Result<f64> {
    if !(r > 0.0) || r >= ws.r0 as f64 {
        return Err(Error::input(format!(
            "smoothness r must lie in (0, r0) = (0, {})",
            ws.r0
        )));
    }
    let pv = match p {
        Exponent::Finite(v) => v,
        Exponent::Infinity => f64::INFINITY,
    };
    let sigma = r + 0.5 - 1.0 / pv;
    // φ-term over the translates meeting the grid
    let lo_j = grid.lo - (ws.filter_len() as i64 - 1);
    let hi_j = grid.hi;
    let phi_coeffs: Vec<f64> = (lo_j..=hi_j).map(|j| ws.phi_inner(f, grid, j)).collect();
    let phi_term = match p {
        Exponent::Infinity => phi_coeffs.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
        Exponent::Finite(pv) => {
            phi_coeffs.iter().map(|v| abs_pow(*v, pv)).sum::<f64>().powf(1.0 / pv)
        }
    };
    // ψ-term: raw coefficients λ_{k,j} = ⟨f, ψ_{k,j}⟩ in ℓ^σ_{p,θ}
    let x = analyze(f, grid, ws, index)?;
    let mut lambda = SequenceVector::zeros(index);
    for (k, row) in x.levels.iter().enumerate() {
        let unscale = 2.0_f64.powf(-(k as f64) / 2.0);
        for (j0, &v) in row.iter().enumerate() {
            lambda.levels[k][j0] = v * unscale;
        }
    }
    Ok(phi_term + sequence_norm(&lambda, sigma, p, theta))
}

/// Report of the two-sided sequence-vs-function comparison in L_p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSandwich {
    /// ‖x‖ in ℓ^{−1/p}_{p,p} (the lower route).
    pub left: f64,
    /// ‖f‖_p by quadrature.
    pub mid: f64,
    /// ‖x‖ in ℓ^{−1/p}_{p,2} (the upper route).
    pub right: f64,
    pub ratio_left_mid: f64,
    pub ratio_mid_right: f64,
}

/// For x on T_m and p ≥ 2: synthesize f, measure ‖f‖_p, and compare with the
/// sequence-side quantities in the x coordinates:
/// left = (Σ_k 2^{−k}‖x[k]‖_p^p)^{1/p}, right = (Σ_k (2^{−k/p}‖x[k]‖_p)²)^{1/2}.
pub fn lp_sandwich_check(
    x: &SequenceVector,
    ws: &WaveletSystem,
    p: f64,
    grid: Option<DyadicGrid>,
) -> Result<LpSandwich> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::input("requires p in [2, ∞)"));
    }
    let grid = grid.unwrap_or_else(|| ws.natural_grid());
    let k_max = x.m - 1;
    if (k_max as u32) + 4 > ws.j_res {
        return Err(Error::input("quadrature resolution insufficient for the top level"));
    }
    let f = synthesize(x, ws, &grid);
    let mid = lp_norm(&f, &grid, p, false);
    let left = sequence_norm(x, -1.0 / p, Exponent::Finite(p), Exponent::Finite(p));
    let right = sequence_norm(x, -1.0 / p, Exponent::Finite(p), Exponent::Finite(2.0));
    Ok(LpSandwich {
        left,
        mid,
        right,
        ratio_left_mid: left / mid,
        ratio_mid_right: mid / right,
    })
}

/// Max-entry deviation of the quadrature Gram matrix of {ψ_{k,j}} over the
/// index from the identity.
pub fn gram_identity_error(ws: &WaveletSystem, index: SequenceIndex) -> f64 {
    let grid = ws.natural_grid();
    let pairs: Vec<(usize, usize)> = index.iter().collect();
    let columns: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&(k, j)| {
            (0..grid.len()).map(|t| ws.psi_kj_at(k as u32, j as i64, &grid, t)).collect()
        })
        .collect();
    let step = grid.step();
    let mut err = 0.0_f64;
    for a in 0..columns.len() {
        for b in a..columns.len() {
            let g: f64 =
                columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum::<f64>() * step;
            let target = if a == b { 1.0 } else { 0.0 };
            err = err.max((g - target).abs());
        }
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    fn db4() -> WaveletSystem {
        build_wavelet(4, 12).unwrap()
    }

    #[test]
    fn db2_filter_matches_closed_form() {
        // independent oracle: the 4-tap filter solving Σh = √2,
        // Σ h_k h_{k+2} = 0 and the vanishing-moment equations, via √3
        let s3 = 3.0_f64.sqrt();
        let s2 = 2.0_f64.sqrt();
        let expect = [
            (1.0 + s3) / (4.0 * s2),
            (3.0 + s3) / (4.0 * s2),
            (3.0 - s3) / (4.0 * s2),
            (1.0 - s3) / (4.0 * s2),
        ];
        let h = daubechies_filter(2).unwrap();
        assert_eq!(h.len(), 4);
        for (a, b) in h.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn filters_orthonormal_up_to_r0_10() {
        for r0 in 1..=10 {
            let h = daubechies_filter(r0).unwrap();
            assert_eq!(h.len(), 2 * r0);
            let sum: f64 = h.iter().sum();
            assert!((sum - std::f64::consts::SQRT_2).abs() < 1e-10, "r0={r0}");
            for l in 1..r0 {
                let s: f64 = (0..h.len() - 2 * l).map(|k| h[k] * h[k + 2 * l]).sum();
                assert!(s.abs() < 1e-10, "r0={r0} shift {l}: {s}");
            }
        }
    }

    #[test]
    fn scaling_function_integrates_to_one() {
        for r0 in [2, 3, 4] {
            let ws = build_wavelet(r0, 12).unwrap();
            let sum: f64 =
                ws.phi.values.iter().sum::<f64>() * 0.5_f64.powi(ws.phi.res as i32);
            assert!((sum - 1.0).abs() < 1e-6, "r0={r0}: ∫φ = {sum}");
        }
    }

    #[test]
    fn wavelet_moments_vanish() {
        let ws = db4();
        let res = ws.psi.res;
        let step = 0.5_f64.powi(res as i32);
        for mom in 0..ws.r0() {
            let mut acc = 0.0;
            for (t, &v) in ws.psi.values.iter().enumerate() {
                let x = t as f64 * step;
                acc += v * x.powi(mom as i32);
            }
            acc *= step;
            assert!(acc.abs() < 1e-6, "moment {mom}: {acc}");
        }
    }

    #[test]
    fn analyze_recovers_one_hot() {
        let ws = db4();
        let grid = ws.natural_grid();
        let index = SequenceIndex::t_m(4).unwrap();
        let mut x = SequenceVector::zeros(index);
        x.set(2, 3, 1.0);
        let f = synthesize(&x, &ws, &grid);
        let back = analyze(&f, &grid, &ws, index).unwrap();
        for (k, j) in index.iter() {
            let expect = if (k, j) == (2, 3) { 1.0 } else { 0.0 };
            assert!(
                (back.get(k, j) - expect).abs() < 1e-4,
                "({k},{j}): {}",
                back.get(k, j)
            );
        }
    }

    #[test]
    fn analyze_kills_scaling_translates() {
        let ws = db4();
        let grid = ws.natural_grid();
        let index = SequenceIndex::t_m(3).unwrap();
        // f = φ(x): orthogonal to every ψ_{k,j}, k ≥ 0
        let f: Vec<f64> = (0..grid.len()).map(|t| ws.phi_0j_at(0, &grid, t)).collect();
        let x = analyze(&f, &grid, &ws, index).unwrap();
        for (k, j) in index.iter() {
            assert!(x.get(k, j).abs() < 1e-4, "({k},{j}): {}", x.get(k, j));
        }
    }

    #[test]
    fn parseval_on_synthesized_span() {
        let ws = db4();
        let grid = ws.natural_grid();
        let index = SequenceIndex::t_m(4).unwrap();
        let mut rng = rng_from(3);
        let mut lambda_sq = 0.0;
        let mut x = SequenceVector::zeros(index);
        for (k, j) in index.iter() {
            let v: f64 = rng.gen_range(-1.0..1.0);
            x.set(k, j, v);
            // raw coefficient is 2^{−k/2}·x
            lambda_sq += (v * 2.0_f64.powf(-(k as f64) / 2.0)).powi(2);
        }
        let f = synthesize(&x, &ws, &grid);
        let l2 = lp_norm(&f, &grid, 2.0, false);
        assert!(
            (l2 * l2 - lambda_sq).abs() < 1e-3 * lambda_sq,
            "{} vs {lambda_sq}",
            l2 * l2
        );
    }

    #[test]
    fn synthesize_zero_and_roundtrip() {
        let ws = db4();
        let grid = ws.natural_grid();
        let index = SequenceIndex::t_m(4).unwrap();
        let zero = synthesize(&SequenceVector::zeros(index), &ws, &grid);
        assert!(zero.iter().all(|v| *v == 0.0));
        let mut rng = rng_from(7);
        let mut x = SequenceVector::zeros(index);
        for (k, j) in index.iter() {
            x.set(k, j, rng.gen_range(-1.0..1.0));
        }
        let f = synthesize(&x, &ws, &grid);
        let back = analyze(&f, &grid, &ws, index).unwrap();
        for (k, j) in index.iter() {
            assert!((back.get(k, j) - x.get(k, j)).abs() < 1e-4);
        }
    }

    #[test]
    fn gram_is_identity_within_tolerance() {
        let ws = db4();
        let err = gram_identity_error(&ws, SequenceIndex::t_m(4).unwrap());
        assert!(err < 1e-3, "gram error {err}");
    }

    #[test]
    fn sequence_norm_examples() {
        let index = SequenceIndex::t_m(2).unwrap();
        let mut x = SequenceVector::zeros(index);
        x.set(0, 1, 1.0);
        x.set(1, 1, 1.0);
        assert_eq!(
            sequence_norm(&x, 0.0, Exponent::Finite(1.0), Exponent::Finite(1.0)),
            2.0
        );
        assert_eq!(
            sequence_norm(&x, 0.0, Exponent::Finite(1.0), Exponent::Infinity),
            1.0
        );
    }

    #[test]
    fn sequence_norm_theta_monotonicity() {
        let index = SequenceIndex::t_m(4).unwrap();
        let mut rng = rng_from(9);
        for _ in 0..50 {
            let mut x = SequenceVector::zeros(index);
            for (k, j) in index.iter() {
                x.set(k, j, rng.gen_range(-1.0..1.0));
            }
            let mut prev = f64::INFINITY;
            for theta in [1.0, 1.5, 2.0, 4.0] {
                let v =
                    sequence_norm(&x, 0.3, Exponent::Finite(1.0), Exponent::Finite(theta));
                assert!(v <= prev + 1e-12);
                prev = v;
            }
            let vinf = sequence_norm(&x, 0.3, Exponent::Finite(1.0), Exponent::Infinity);
            assert!(vinf <= prev + 1e-12);
        }
    }

    #[test]
    fn besov_norm_values() {
        let ws = db4();
        let grid = ws.natural_grid();
        let index = SequenceIndex::t_m(4).unwrap();
        let one = Exponent::Finite(1.0);
        let zero = vec![0.0; grid.len()];
        let v = discrete_besov_norm(&zero, &grid, &ws, index, 1.0, one, one).unwrap();
        assert_eq!(v, 0.0);
        // f = ψ_{0,1}: φ-term 0, ψ-term 1
        let mut x = SequenceVector::zeros(index);
        x.set(0, 1, 1.0);
        let f = synthesize(&x, &ws, &grid);
        let v = discrete_besov_norm(&f, &grid, &ws, index, 1.0, one, one).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        // f = ψ_{k,1} with raw coefficient 1 → 2^{kσ}, σ = r + 1/2 − 1/p = 1/2
        let mut x = SequenceVector::zeros(index);
        x.set(3, 1, 2.0_f64.powf(1.5));
        let f = synthesize(&x, &ws, &grid);
        let v = discrete_besov_norm(&f, &grid, &ws, index, 1.0, one, one).unwrap();
        let expect = 2.0_f64.powf(1.5);
        assert!((v - expect).abs() < 1e-2 * expect, "{v} vs {expect}");
        // r ≥ r0 rejected
        assert!(discrete_besov_norm(&f, &grid, &ws, index, 4.0, one, one).is_err());
    }

    #[test]
    fn sandwich_hilbert_case_collapses() {
        // p = 2: left = right = ℓ₂ coefficient norm = ‖f‖₂ (Parseval)
        let ws = db4();
        let index = SequenceIndex::t_m(4).unwrap();
        let mut rng = rng_from(4);
        let mut x = SequenceVector::zeros(index);
        for (k, j) in index.iter() {
            x.set(k, j, rng.gen_range(-1.0..1.0));
        }
        let r = lp_sandwich_check(&x, &ws, 2.0, None).unwrap();
        assert!((r.left - r.right).abs() < 1e-12);
        assert!((r.left - r.mid).abs() < 2e-3 * r.mid, "{} vs {}", r.left, r.mid);
    }

    #[test]
    fn sandwich_single_level_left_equals_right() {
        let ws = db4();
        let index = SequenceIndex::t_m(3).unwrap();
        let mut rng = rng_from(5);
        let mut x = SequenceVector::zeros(index);
        for j in 1..=4 {
            x.set(2, j, rng.gen_range(-1.0..1.0));
        }
        let r = lp_sandwich_check(&x, &ws, 4.0, None).unwrap();
        assert!((r.left - r.right).abs() < 1e-12);
        assert!(r.ratio_left_mid.is_finite() && r.ratio_mid_right.is_finite());
    }

    #[test]
    fn lq_dominates_l2_under_probability_measure() {
        let ws = db4();
        let grid = ws.natural_grid();
        let index = SequenceIndex::t_m(4).unwrap();
        let spec = BesovBallSpec {
            sigma: 0.0,
            p: Exponent::Finite(1.0),
            theta: Exponent::Finite(2.0),
            index,
        };
        for x in sample_ball(&spec, 10, 6, BallSampling::Boundary) {
            let f = synthesize(&x, &ws, &grid);
            let l4 = lp_norm(&f, &grid, 4.0, true);
            let l2 = lp_norm(&f, &grid, 2.0, true);
            assert!(l4 >= l2 * (1.0 - 1e-12));
        }
    }

    #[test]
    fn ball_samples_sit_on_the_boundary() {
        let index = SequenceIndex::t_m(4).unwrap();
        let spec = BesovBallSpec {
            sigma: 0.25,
            p: Exponent::Finite(1.5),
            theta: Exponent::Finite(3.0),
            index,
        };
        for x in sample_ball(&spec, 20, 8, BallSampling::Boundary) {
            assert!((spec.norm(&x) - 1.0).abs() < 1e-12);
        }
        for x in sample_ball(&spec, 20, 8, BallSampling::Interior) {
            assert!(spec.norm(&x) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn extreme_points_have_the_right_shape() {
        let index = SequenceIndex::t_m(4).unwrap();
        for x in sample_extreme_points(index, Exponent::Finite(1.0), 20, 3).unwrap() {
            let nz: Vec<f64> = x.flatten().into_iter().filter(|v| *v != 0.0).collect();
            assert_eq!(nz.len(), 1);
            assert_eq!(nz[0].abs(), 1.0);
        }
        for x in sample_extreme_points(index, Exponent::Infinity, 20, 3).unwrap() {
            for (k, row) in x.levels.iter().enumerate() {
                let nz: Vec<f64> = row.iter().cloned().filter(|v| *v != 0.0).collect();
                assert_eq!(nz.len(), 1, "level {k}");
                assert_eq!(nz[0].abs(), 1.0);
            }
        }
    }

    #[test]
    fn infinity_ball_embeds_with_m_power() {
        // extreme points of b^0_{1,∞}(T_m) have ℓ^0_{1,θ} norm m^{1/θ}
        let m = 4;
        let index = SequenceIndex::t_m(m).unwrap();
        for theta in [1.0, 2.0, 3.0] {
            for x in sample_extreme_points(index, Exponent::Infinity, 5, 9).unwrap() {
                let v =
                    sequence_norm(&x, 0.0, Exponent::Finite(1.0), Exponent::Finite(theta));
                let expect = (m as f64).powf(1.0 / theta);
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }
}
