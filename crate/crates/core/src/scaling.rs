//! Discretized Besov width problems on dyadic level structures, n-sweeps
//! with certificates and constructive upper bounds, and log-exponent fits.
//!
//! A problem lives on the flattened index T_m (levels k = 0..m−1 of sizes
//! 2^k), carries weights w_{k,j} = 2^{−k}, uses the intersection norm
//! ℓ^{−1/q}_{q,q} ∩ ℓ^{−1/2}_{2,2} (both are weighted norms with those
//! weights), and approximates the ball b^0_{1,θ}: a single octahedron for
//! θ = 1, the product of per-level octahedra for θ = ∞, and the sequence-norm
//! ball in between (handled through embeddings).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::approx::{
    block_budget_subspace, deviation, second_moment_certificate, BudgetRule, DeviationMode,
};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::norms::{Exponent, MixedNorm, NormComponent, WeightVector};
use crate::octahedron::{BlockPartition, OctahedronProduct};
use crate::rng::{derive_seed, rng_from};
use crate::solver::{DistanceSolver, SolverOptions};
use crate::subspace::Subspace;
use crate::wavelets::{sample_ball, BallSampling, BesovBallSpec, SequenceIndex};

/// Which ball b^0_{1,θ}(T_m) the problem approximates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BesovBody {
    /// θ = 1: one octahedron over all coordinates.
    Octahedron,
    /// θ = ∞: the product of per-level octahedra.
    LevelProduct,
    /// 1 < θ < ∞: handled via embeddings into the two cases above.
    Intermediate(f64),
}

/// A discretized width problem over T_m.
#[derive(Debug, Clone)]
pub struct DiscretizedProblem {
    pub theta: Exponent,
    pub q: f64,
    pub m: usize,
    pub weights: WeightVector,
    pub levels: BlockPartition,
    pub norm: MixedNorm,
    pub body: BesovBody,
}

impl DiscretizedProblem {
    pub fn dim(&self) -> usize {
        self.levels.dim()
    }

    pub fn index(&self) -> SequenceIndex {
        SequenceIndex::t_m(self.m).expect("level count validated at construction")
    }

    /// The octahedron-product body for θ ∈ {1, ∞}.
    pub fn octahedron_body(&self) -> Option<OctahedronProduct> {
        match self.body {
            BesovBody::Octahedron => {
                Some(OctahedronProduct::new(BlockPartition::single_block(self.dim())))
            }
            BesovBody::LevelProduct => Some(OctahedronProduct::new(self.levels.clone())),
            BesovBody::Intermediate(_) => None,
        }
    }
}

/// Build the problem for (θ, q, m): weights 2^{−k}, level blocks, and the
/// intersection norm with components (q, w) and (2, w).
pub fn build_problem(theta: Exponent, q: f64, m: usize) -> Result<DiscretizedProblem> {
    if !(q > 2.0) || !q.is_finite() {
        return Err(Error::input(format!("q must lie in (2, ∞), got {q}")));
    }
    if m == 0 || m > 14 {
        return Err(Error::input("level count m must lie in 1..=14 (size cap 16383)"));
    }
    match theta {
        Exponent::Finite(t) if t < 1.0 => return Err(Error::input("θ must be ≥ 1")),
        _ => {}
    }
    let levels = BlockPartition::dyadic_levels(m)?;
    let mut w = Vec::with_capacity(levels.dim());
    for k in 0..m {
        w.extend(std::iter::repeat(0.5_f64.powi(k as i32)).take(1 << k));
    }
    let weights = WeightVector::new(w)?;
    let norm = MixedNorm::new(vec![
        NormComponent::new(Exponent::Finite(q), weights.clone(), 1.0)?,
        NormComponent::new(Exponent::Finite(2.0), weights.clone(), 1.0)?,
    ])?;
    let body = match theta {
        Exponent::Finite(t) if t == 1.0 => BesovBody::Octahedron,
        Exponent::Infinity => BesovBody::LevelProduct,
        Exponent::Finite(t) => BesovBody::Intermediate(t),
    };
    Ok(DiscretizedProblem { theta, q, m, weights, levels, norm, body })
}

/// Tail bound for cutting the index at m levels: the discarded levels
/// contribute at most 2^{−m/q} to the norm (since ‖x[k]‖_1 ≤ 1 per level).
/// Independent of θ and n; they are accepted for context.
pub fn level_tail_bound(_theta: Exponent, q: f64, m: usize, _n: usize) -> f64 {
    2.0_f64.powf(-(m as f64) / q)
}

/// The block-budget subspace over the level partition: levels with
/// 2^k < n/4 included fully (at most n/2 in total), the remaining levels each
/// get a random subspace of dimension ⌊n/(2m)⌋.
pub fn level_budget_subspace(
    problem: &DiscretizedProblem,
    n: usize,
    seed: u64,
) -> Result<Subspace> {
    if n < 2 {
        return Err(Error::input("need n ≥ 2"));
    }
    block_budget_subspace(&problem.levels, n, BudgetRule::HalfSplit, seed)
}

/// Per-level local bases of a level-structured subspace: `None` marks a full
/// level; otherwise orthonormal rows in the level's local coordinates.
#[derive(Debug, Clone)]
pub struct LevelBases {
    pub pieces: Vec<Option<Mat>>,
}

impl LevelBases {
    pub fn dim(&self, levels: &BlockPartition) -> usize {
        self.pieces
            .iter()
            .zip(levels.blocks())
            .map(|(p, b)| p.as_ref().map_or(b.len(), |m| m.rows))
            .sum()
    }

    /// Assemble the global subspace.
    pub fn assemble(&self, levels: &BlockPartition) -> Result<Subspace> {
        let dim = levels.dim();
        let mut rows = Vec::new();
        for (piece, block) in self.pieces.iter().zip(levels.blocks()) {
            match piece {
                None => {
                    for &i in block {
                        let mut row = vec![0.0; dim];
                        row[i] = 1.0;
                        rows.push(row);
                    }
                }
                Some(local) => {
                    for r in local.iter_rows() {
                        let mut row = vec![0.0; dim];
                        for (&i, &v) in block.iter().zip(r) {
                            row[i] = v;
                        }
                        rows.push(row);
                    }
                }
            }
        }
        if rows.is_empty() {
            return Ok(Subspace::zero(dim));
        }
        Subspace::from_rows(rows, dim)
    }
}

/// Random orthonormal local rows for a level.
fn random_local(dim_local: usize, rows: usize, rng: &mut crate::rng::Rng) -> Mat {
    use rand::Rng as _;
    use rand_distr::StandardNormal;
    let raw: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..dim_local).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    crate::linalg::orthonormalize(&Mat::from_rows(raw), 1e-12).q
}

/// Level-wise dimension allocations for the sweep's candidate subspaces.
fn candidate_allocations(problem: &DiscretizedProblem, n: usize) -> Vec<(String, Vec<usize>)> {
    let m = problem.m;
    let sizes: Vec<usize> = (0..m).map(|k| 1usize << k).collect();
    let mut out = Vec::new();

    // the half-split budget: full small levels, ⌊n/(2m)⌋ elsewhere
    let mut full_dims = vec![0usize; m];
    let mut used = 0usize;
    for k in 0..m {
        if (sizes[k] as f64) < n as f64 / 4.0 && used + sizes[k] <= n / 2 {
            full_dims[k] = sizes[k];
            used += sizes[k];
        }
    }
    let rest: Vec<usize> = (0..m).filter(|&k| full_dims[k] < sizes[k]).collect();
    if rest.is_empty() {
        out.push(("full".into(), sizes.clone()));
        return out;
    }
    let per_half = n / (2 * m);
    if per_half >= 1 {
        let mut dims = full_dims.clone();
        for &k in &rest {
            dims[k] = per_half.min(sizes[k]);
        }
        out.push(("half_split".into(), dims));
    }
    // equal residual: spend everything that is left
    let residual = n - used;
    let per_eq = residual / rest.len();
    if per_eq >= 1 {
        let mut dims = full_dims.clone();
        for &k in &rest {
            dims[k] = per_eq.min(sizes[k]);
        }
        // any leftover goes to the deepest levels first (they carry the
        // widest octahedra)
        let mut leftover = n - dims.iter().sum::<usize>();
        for &k in rest.iter().rev() {
            if leftover == 0 {
                break;
            }
            let room = sizes[k] - dims[k];
            let add = room.min(leftover);
            dims[k] += add;
            leftover -= add;
        }
        out.push(("equal_residual".into(), dims));
    }
    out
}

/// Build the level-structured candidates for one (problem, n).
fn level_candidates(
    problem: &DiscretizedProblem,
    n: usize,
    seed: u64,
) -> Vec<(String, LevelBases)> {
    let sizes: Vec<usize> = (0..problem.m).map(|k| 1usize << k).collect();
    candidate_allocations(problem, n)
        .into_iter()
        .map(|(name, dims)| {
            let mut rng = rng_from(derive_seed(seed, fxhash(&name)));
            let pieces = dims
                .iter()
                .zip(&sizes)
                .map(|(&d, &sz)| {
                    if d >= sz {
                        None
                    } else {
                        Some(random_local(sz, d, &mut rng))
                    }
                })
                .collect();
            (name, LevelBases { pieces })
        })
        .collect()
}

fn fxhash(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

/// Exact deviation of the θ = 1 body from a level-structured subspace.
///
/// For a coordinate vertex e_{k,j} and a block-diagonal subspace the optimal
/// approximation is supported in level k (the norm is monotone), so the
/// distance reduces to a solve inside that level; full levels contribute 0.
fn theta1_exact_deviation(
    problem: &DiscretizedProblem,
    bases: &LevelBases,
    opts: &SolverOptions,
) -> Result<f64> {
    let mut best = 0.0_f64;
    for (k, piece) in bases.pieces.iter().enumerate() {
        let Some(local) = piece else { continue };
        let block = problem.levels.block(k);
        let local_norm = problem.norm.restrict(block)?;
        let local_sub = Subspace::from_rows(local.to_row_vecs(), block.len())?;
        let solver = DistanceSolver::new(&local_sub, &local_norm, opts.clone())?;
        // norm bound for this level's vertices: cannot beat the current max
        let mut probe = vec![0.0; block.len()];
        probe[0] = 1.0;
        if local_norm.eval(&probe) <= best {
            continue;
        }
        let dists: Vec<f64> = (0..block.len())
            .into_par_iter()
            .map(|j| {
                let mut e = vec![0.0; block.len()];
                e[j] = 1.0;
                solver.solve(&e).map(|d| d.value)
            })
            .collect::<Result<Vec<_>>>()?;
        for d in dists {
            best = best.max(d);
        }
    }
    Ok(best)
}

/// Effort knobs for the sweep's upper bounds.
#[derive(Debug, Clone)]
pub struct SweepEffort {
    /// Vertex samples for the θ = ∞ deviation estimates.
    pub samples: usize,
    pub ascent_steps: usize,
    pub solver: SolverOptions,
}

impl Default for SweepEffort {
    fn default() -> Self {
        SweepEffort { samples: 192, ascent_steps: 12, solver: SolverOptions::fast(1e-7) }
    }
}

/// Upper bound for θ ∈ {1, ∞}: min over the level-structured candidates.
fn upper_octahedron(
    problem: &DiscretizedProblem,
    n: usize,
    seed: u64,
    effort: &SweepEffort,
) -> Result<(f64, String)> {
    let dim = problem.dim();
    if n >= dim {
        return Ok((0.0, "full".into()));
    }
    let body = problem
        .octahedron_body()
        .ok_or_else(|| Error::input("octahedron upper bound needs θ ∈ {1, ∞}"))?;
    let candidates = level_candidates(problem, n, seed);
    if candidates.is_empty() {
        return Err(Error::input(format!("no feasible construction for n = {n}, m = {}", problem.m)));
    }
    let mut best: Option<(f64, String)> = None;
    for (name, bases) in candidates {
        let value = match problem.body {
            BesovBody::Octahedron => theta1_exact_deviation(problem, &bases, &effort.solver)?,
            BesovBody::LevelProduct => {
                let sub = bases.assemble(&problem.levels)?;
                let mode = DeviationMode::Sampled {
                    count: effort.samples,
                    seed: derive_seed(seed, fxhash(&name) ^ 0x5A),
                    ascent_steps: effort.ascent_steps,
                };
                deviation(&body, &sub, &problem.norm, mode, &effort.solver)?.value
            }
            BesovBody::Intermediate(_) => unreachable!(),
        };
        if best.as_ref().map_or(true, |(bv, _)| value < *bv) {
            best = Some((value, name));
        }
    }
    Ok(best.unwrap())
}

/// One sweep row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub theta: Exponent,
    pub q: f64,
    pub m: usize,
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub lower_provenance: String,
    pub upper_provenance: String,
    pub seed: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    pub theta: Exponent,
    pub n: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

impl SweepResult {
    pub fn rows_for(&self, theta: Exponent) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.theta == theta).collect()
    }
}

/// The m-rule for the sweep.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum MRule {
    /// m = ⌈log2 n⌉ + 2, capped at 14.
    Default,
    Fixed(usize),
}

impl MRule {
    pub fn m_for(&self, n: usize) -> usize {
        match self {
            MRule::Default => (((n.max(2) as f64).log2().ceil() as usize) + 2).min(14),
            MRule::Fixed(m) => *m,
        }
    }
}

/// Run the sweep: per (θ, n) in deterministic order, a lower certificate on
/// the ℓ^{−1/2}_{2,2} component and a constructive upper bound. Intermediate
/// θ values are produced through the embedding routes
/// lower(θ) = m^{−1/θ}·lower(θ=∞) and upper(θ) = min(upper(∞), m^{1−1/θ}·upper(1)).
/// Per-row failures are recorded and the sweep continues.
pub fn sweep(
    thetas: &[Exponent],
    q: f64,
    ns: &[usize],
    m_rule: MRule,
    seed: u64,
    effort: &SweepEffort,
    zero_timings: bool,
) -> SweepResult {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (ti, &theta) in thetas.iter().enumerate() {
        for (ni, &n) in ns.iter().enumerate() {
            let t0 = std::time::Instant::now();
            let m = m_rule.m_for(n);
            let row_seed = derive_seed(seed, (ti as u64) << 32 | ni as u64);
            match sweep_row(theta, q, n, m, row_seed, effort) {
                Ok((lower, upper, lp, up)) => rows.push(SweepRow {
                    theta,
                    q,
                    m,
                    n,
                    lower,
                    upper,
                    lower_provenance: lp,
                    upper_provenance: up,
                    seed: row_seed,
                    wall_time_s: if zero_timings { 0.0 } else { t0.elapsed().as_secs_f64() },
                }),
                Err(e) => failures.push(SweepFailure { theta, n, error: format!("{e}") }),
            }
        }
    }
    SweepResult { rows, failures }
}

fn sweep_row(
    theta: Exponent,
    q: f64,
    n: usize,
    m: usize,
    seed: u64,
    effort: &SweepEffort,
) -> Result<(f64, f64, String, String)> {
    let problem = build_problem(theta, q, m)?;
    let l2_comp = problem
        .norm
        .l2_component()
        .cloned()
        .expect("the intersection norm has an explicit ℓ₂ component");
    match problem.body {
        BesovBody::Octahedron | BesovBody::LevelProduct => {
            let body = problem.octahedron_body().unwrap();
            let lower = second_moment_certificate(&body, &l2_comp, n)?;
            let (upper, name) = upper_octahedron(&problem, n, seed, effort)?;
            Ok((lower, upper, "lemma2".into(), format!("constructed_subspace:{name}")))
        }
        BesovBody::Intermediate(t) => {
            let inf_problem = build_problem(Exponent::Infinity, q, m)?;
            let one_problem = build_problem(Exponent::Finite(1.0), q, m)?;
            let inf_body = inf_problem.octahedron_body().unwrap();
            let cert_inf = second_moment_certificate(&inf_body, &l2_comp, n)?;
            let lower = (m as f64).powf(-1.0 / t) * cert_inf;
            let (upper_inf, _) = upper_octahedron(&inf_problem, n, seed, effort)?;
            let (upper_one, _) = upper_octahedron(&one_problem, n, seed, effort)?;
            let upper = upper_inf.min((m as f64).powf(1.0 - 1.0 / t) * upper_one);
            Ok((lower, upper, "lemma2+embedding".into(), "embedding".into()))
        }
    }
}

/// Max distance of sampled boundary points of b^0_{1,θ}(T_m) from the
/// subspace: a sampled deviation for ball bodies (a lower estimate).
pub fn sampled_ball_deviation(
    problem: &DiscretizedProblem,
    subspace: &Subspace,
    theta: Exponent,
    count: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<f64> {
    let spec = BesovBallSpec {
        sigma: 0.0,
        p: Exponent::Finite(1.0),
        theta,
        index: problem.index(),
    };
    let solver = DistanceSolver::new(subspace, &problem.norm, opts.clone())?;
    let pts = sample_ball(&spec, count, seed, BallSampling::Boundary);
    let dists: Vec<f64> = pts
        .par_iter()
        .map(|x| solver.solve(&x.flatten()).map(|d| d.value))
        .collect::<Result<Vec<_>>>()?;
    Ok(dists.into_iter().fold(0.0, f64::max))
}

/// Fit of d(n) = c·n^{−1/2}·(log n)^α by least squares on
/// log d + (1/2)·log n against log log n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogFit {
    pub c: f64,
    pub alpha: f64,
    pub residual: f64,
}

/// Least-squares exponent fit. Needs ≥ 4 points with n spanning at least
/// three octaves.
pub fn fit_log_exponent(points: &[(f64, f64)]) -> Result<LogFit> {
    if points.len() < 4 {
        return Err(Error::input("need at least 4 points"));
    }
    let n_min = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let n_max = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if n_max < 8.0 * n_min {
        return Err(Error::input("n values must span at least three octaves"));
    }
    if points.iter().any(|&(n, d)| !(n > 1.0) || !(d > 0.0)) {
        return Err(Error::input("points must have n > 1 and d > 0"));
    }
    // y = log d + 0.5 log n = log c + α·t, t = log log n
    let xs: Vec<f64> = points.iter().map(|&(n, _)| n.ln().ln()).collect();
    let ys: Vec<f64> = points.iter().map(|&(n, d)| d.ln() + 0.5 * n.ln()).collect();
    let len = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let det = len * sxx - sx * sx;
    if det.abs() < 1e-12 {
        return Err(Error::input("degenerate spread of log log n"));
    }
    let alpha = (len * sxy - sx * sy) / det;
    let intercept = (sy - alpha * sx) / len;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - intercept - alpha * x;
            e * e
        })
        .sum::<f64>()
        / len)
        .sqrt();
    Ok(LogFit { c: intercept.exp(), alpha, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn build_problem_m3() {
        let p = build_problem(Exponent::Finite(1.0), 4.0, 3).unwrap();
        assert_eq!(p.dim(), 7);
        assert_eq!(
            p.weights.as_slice(),
            &[1.0, 0.5, 0.5, 0.25, 0.25, 0.25, 0.25]
        );
        // per-level weight sums all equal 1; total = m
        let nu = crate::norms::block_weight_ratios(&p.weights, &p.levels).unwrap();
        for v in &nu {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((p.weights.total() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn theta_infinity_vertex_count() {
        let p = build_problem(Exponent::Infinity, 4.0, 3).unwrap();
        let body = p.octahedron_body().unwrap();
        assert_eq!(body.vertex_count(), 2 * 4 * 8);
    }

    #[test]
    fn size_cap_enforced() {
        assert!(build_problem(Exponent::Finite(1.0), 4.0, 15).is_err());
    }

    #[test]
    fn budget_construction_example() {
        // n = 16, m = 6: levels 0,1 full (3 dims); 4 remaining levels get 1
        let p = build_problem(Exponent::Infinity, 4.0, 6).unwrap();
        let s = level_budget_subspace(&p, 16, 1).unwrap();
        assert_eq!(s.dim(), 7);
        // n at least the total dimension gives the full space
        let s = level_budget_subspace(&p, 63, 1).unwrap();
        assert_eq!(s.dim(), 63);
        // infeasible
        assert!(level_budget_subspace(&p, 8, 1).is_err());
    }

    #[test]
    fn tail_bound_values() {
        let th = Exponent::Finite(1.0);
        // m = q·log2(n²) → 2^{−m/q} = n^{−2} (n = 8 keeps m integral)
        let n = 8.0_f64;
        let q = 4.0;
        let m = (q * (n * n).log2()) as usize;
        assert_eq!(m, 24);
        let b = level_tail_bound(th, q, m, 8);
        assert!((b - n.powi(-2)).abs() < 1e-15);
        assert_eq!(level_tail_bound(th, 4.0, 0, 1), 1.0);
        // doubling m squares the bound
        let b1 = level_tail_bound(th, 3.0, 5, 1);
        let b2 = level_tail_bound(th, 3.0, 10, 1);
        assert!((b2 - b1 * b1).abs() < 1e-15);
    }

    #[test]
    fn construction_deviation_scales_like_sqrt_m_over_n() {
        // deviation of the budget subspace on b^0_{1,2}(T_m) across a
        // quadrupling of n: ratio should sit near (1/4)^{1/2} = 1/2
        let m = 6;
        let p = build_problem(Exponent::Finite(2.0), 4.0, m).unwrap();
        let opts = SolverOptions::fast(1e-6);
        let l16 = level_budget_subspace(&p, 16, 3).unwrap();
        let l64 = level_budget_subspace(&p, 48, 3).unwrap();
        let d16 =
            sampled_ball_deviation(&p, &l16, Exponent::Finite(2.0), 64, 5, &opts).unwrap();
        let d64 =
            sampled_ball_deviation(&p, &l64, Exponent::Finite(2.0), 64, 5, &opts).unwrap();
        let ratio = d64 / d16;
        assert!(ratio < 1.0, "deviation must drop with n: {d16} -> {d64}");
        assert!(ratio > 0.2, "drop implausibly steep: {ratio}");
    }

    #[test]
    fn smoke_sweep_row_sanity() {
        // θ = 1, small m, n = 0 is infeasible for the construction, so use
        // n = 2: lower ≤ upper must hold
        let r = sweep(
            &[Exponent::Finite(1.0)],
            4.0,
            &[4],
            MRule::Fixed(3),
            7,
            &SweepEffort::default(),
            true,
        );
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert!(row.lower <= row.upper + 1e-9, "{} vs {}", row.lower, row.upper);
        assert_eq!(row.wall_time_s, 0.0);
    }

    #[test]
    fn theta_ordering_of_uppers() {
        // ball inclusion: upper(θ=1) ≤ upper(θ=∞) at equal n
        let r = sweep(
            &[Exponent::Finite(1.0), Exponent::Infinity],
            4.0,
            &[8],
            MRule::Fixed(4),
            11,
            &SweepEffort::default(),
            true,
        );
        assert_eq!(r.rows.len(), 2);
        let u1 = r.rows[0].upper;
        let uinf = r.rows[1].upper;
        assert!(u1 <= uinf + 1e-7, "θ=1 upper {u1} vs θ=∞ upper {uinf}");
    }

    #[test]
    fn intermediate_theta_uses_embeddings() {
        let r = sweep(
            &[Exponent::Finite(2.0)],
            4.0,
            &[8],
            MRule::Fixed(4),
            13,
            &SweepEffort::default(),
            true,
        );
        assert_eq!(r.rows.len(), 1);
        let row = &r.rows[0];
        assert_eq!(row.lower_provenance, "lemma2+embedding");
        assert!(row.lower <= row.upper + 1e-9);
    }

    #[test]
    fn fit_recovers_synthetic_exponents() {
        let ns = [16.0, 32.0, 64.0, 128.0, 256.0];
        let mk = |alpha: f64| -> Vec<(f64, f64)> {
            ns.iter()
                .map(|&n: &f64| (n, n.powf(-0.5) * n.ln().powf(alpha)))
                .collect()
        };
        let f = fit_log_exponent(&mk(0.5)).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-6, "alpha {}", f.alpha);
        assert!(f.residual < 1e-9);
        let f0 = fit_log_exponent(&mk(0.0)).unwrap();
        assert!(f0.alpha.abs() < 1e-6);
        // degenerate spread
        assert!(fit_log_exponent(&[(16.0, 1.0), (20.0, 0.9), (24.0, 0.8), (30.0, 0.7)]).is_err());
    }

    #[test]
    fn m_rule_default_values() {
        assert_eq!(MRule::Default.m_for(16), 6);
        assert_eq!(MRule::Default.m_for(256), 10);
        assert_eq!(MRule::Default.m_for(1 << 20), 14);
    }
}
