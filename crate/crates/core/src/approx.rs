//! Width estimation machinery: deviation of a body from a subspace, spectral
//! lower-bound certificates, constructive upper-bound searches, the
//! support-exact approximation procedure, and a small brute-force oracle.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::norms::{Exponent, MixedNorm, NormComponent, WeightVector};
use crate::octahedron::{BlockPartition, OctahedronProduct, Vertex, DEFAULT_VERTEX_CAP};
use crate::rng::{derive_seed, rng_from};
use crate::solver::{DistanceSolver, SolverOptions};
use crate::subspace::{top_indices_by, SpectralProfile, Subspace};
use crate::theorem2;

/// How a deviation sup over the vertex set is evaluated.
#[derive(Debug, Clone, Copy)]
pub enum DeviationMode {
    /// Max over every vertex; fails when the count exceeds the cap.
    Exact { cap: u128 },
    /// Max over `count` sampled vertices plus hill-climbing refinement
    /// (coordinate swaps within a block, sign flips). A lower estimate.
    Sampled { count: usize, seed: u64, ascent_steps: usize },
}

impl DeviationMode {
    pub fn exact() -> Self {
        DeviationMode::Exact { cap: DEFAULT_VERTEX_CAP }
    }

    pub fn sampled(count: usize, seed: u64) -> Self {
        DeviationMode::Sampled { count, seed, ascent_steps: 24 }
    }
}

#[derive(Debug, Clone)]
pub struct Deviation {
    pub value: f64,
    pub witness: Vertex,
    /// True when the value came from sampling and is only a lower estimate
    /// of the true deviation.
    pub lower_estimate_only: bool,
}

/// sup_{x∈B} inf_{y∈L} ‖x−y‖. Since the distance is convex and B is a
/// polytope, the sup is attained at a vertex.
pub fn deviation(
    body: &OctahedronProduct,
    subspace: &Subspace,
    norm: &MixedNorm,
    mode: DeviationMode,
    opts: &SolverOptions,
) -> Result<Deviation> {
    if subspace.ambient() != body.dim() || norm.dim() != body.dim() {
        return Err(Error::DimensionMismatch { expected: body.dim(), got: subspace.ambient() });
    }
    if subspace.dim() == body.dim() {
        // full space: deviation 0 (any vertex witnesses it)
        let v = body.sample_vertices(1, 0).pop().unwrap();
        return Ok(Deviation { value: 0.0, witness: v, lower_estimate_only: false });
    }
    let solver = DistanceSolver::new(subspace, norm, opts.clone())?;
    match mode {
        DeviationMode::Exact { cap } => {
            let vertices: Vec<Vertex> = body.vertices(cap)?.collect();
            let dists = distances_over(&solver, body.dim(), &vertices)?;
            let (value, idx) = argmax(&dists);
            Ok(Deviation { value, witness: vertices[idx].clone(), lower_estimate_only: false })
        }
        DeviationMode::Sampled { count, seed, ascent_steps } => {
            let vertices = body.sample_vertices(count.max(1), seed);
            let dists = distances_over(&solver, body.dim(), &vertices)?;
            let (mut best_val, idx) = argmax(&dists);
            let mut best_vertex = vertices[idx].clone();
            // local ascent from the top samples
            let mut order: Vec<usize> = (0..vertices.len()).collect();
            order.sort_by(|&a, &b| dists[b].partial_cmp(&dists[a]).unwrap().then(a.cmp(&b)));
            let mut rng = rng_from(derive_seed(seed, 0xA5CE17));
            for s in order.into_iter().take(6) {
                let (v, val) = ascend_vertex(
                    body,
                    &solver,
                    vertices[s].clone(),
                    dists[s],
                    ascent_steps,
                    &mut rng,
                )?;
                if val > best_val {
                    best_val = val;
                    best_vertex = v;
                }
            }
            Ok(Deviation { value: best_val, witness: best_vertex, lower_estimate_only: true })
        }
    }
}

fn distances_over(
    solver: &DistanceSolver,
    dim: usize,
    vertices: &[Vertex],
) -> Result<Vec<f64>> {
    vertices
        .par_iter()
        .map(|v| solver.solve(&v.to_dense(dim)).map(|d| d.value))
        .collect()
}

fn argmax(vals: &[f64]) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, d) in vals.iter().enumerate() {
        if *d > best.0 {
            best = (*d, i);
        }
    }
    best
}

/// Hill-climb a vertex: per step, probe a bounded set of coordinate swaps and
/// sign flips, move to the best improving neighbor.
fn ascend_vertex(
    body: &OctahedronProduct,
    solver: &DistanceSolver,
    start: Vertex,
    start_value: f64,
    steps: usize,
    rng: &mut crate::rng::Rng,
) -> Result<(Vertex, f64)> {
    use rand::Rng as _;
    let dim = body.dim();
    let blocks = body.partition().blocks();
    let mut current = start;
    let mut value = start_value;
    for _ in 0..steps {
        let mut neighbors: Vec<Vertex> = Vec::new();
        for (s, b) in blocks.iter().enumerate() {
            let (cur_idx, cur_val) = current.picks()[s];
            neighbors.push(current.with_pick(s, cur_idx, -cur_val));
            // probe a few swap targets inside the block
            let probes = b.len().min(4);
            for _ in 0..probes {
                let j = b[rng.gen_range(0..b.len())];
                if j != cur_idx {
                    let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                    neighbors.push(current.with_pick(s, j, sign * body.radius()));
                }
            }
        }
        let vals = distances_over(solver, dim, &neighbors)?;
        let (best_val, best_idx) = argmax(&vals);
        if best_val > value {
            value = best_val;
            current = neighbors[best_idx].clone();
        } else {
            break;
        }
    }
    Ok((current, value))
}

/// Spectral (second-moment) lower-bound certificate.
///
/// For a uniform random vertex u of the body and the weighted-ℓ₂ component
/// with weights w' and scale s, the coordinate standard deviations are
/// σ_i² = s²·w'_i·E[u_i²] with E[u_i²] = radius²/N_s on block s. For any
/// n-dimensional subspace L, E ρ(u, L)² ≥ Σ_{k>n} (σ_k*)², so any norm
/// dominating the component deviates from L by at least sqrt of that tail.
pub fn second_moment_certificate(
    body: &OctahedronProduct,
    component: &NormComponent,
    n: usize,
) -> Result<f64> {
    match component.q() {
        Exponent::Finite(q) if q == 2.0 => {}
        _ => return Err(Error::input("certificate needs a weighted ℓ₂ component")),
    }
    if component.dim() != body.dim() {
        return Err(Error::DimensionMismatch { expected: body.dim(), got: component.dim() });
    }
    if n >= body.dim() {
        return Ok(0.0);
    }
    let s2 = component.scale() * component.scale();
    let moments = body.coordinate_second_moments();
    let sigma_sq: Vec<f64> = component
        .weights()
        .as_slice()
        .iter()
        .zip(&moments)
        .map(|(w, m)| s2 * w * m)
        .collect();
    let profile = SpectralProfile::from_squares(&sigma_sq);
    Ok(profile.tail_square_sum(n).sqrt())
}

/// Certificate against a whole mixed norm: uses its explicit ℓ₂ component if
/// present, otherwise a power-mean-dominated one. The domination is
/// spot-checked on random vectors.
pub fn certificate_for_norm(body: &OctahedronProduct, norm: &MixedNorm, n: usize) -> Result<f64> {
    let comp = norm.dominated_l2()?;
    if !norm.dominates(&comp, 128, 0x0D01) {
        return Err(Error::contract("mixed norm does not dominate the ℓ₂ component"));
    }
    second_moment_certificate(body, &comp, n)
}

/// Classical lower estimate for octahedra in ℓ_q:
/// (1/4)·min(N^{1/q}/√n, 1), valid for n < N/2 and q ∈ (2, ∞).
pub fn kashin_lower_formula(ambient: usize, n: usize, q: f64) -> Result<f64> {
    if !(q > 2.0) || !q.is_finite() {
        return Err(Error::input(format!("q must lie in (2, ∞), got {q}")));
    }
    if 2 * n >= ambient {
        return Err(Error::input(format!("requires n < N/2, got n = {n}, N = {ambient}")));
    }
    let ratio = (ambient as f64).powf(1.0 / q) / (n as f64).sqrt();
    Ok(0.25 * ratio.min(1.0))
}

/// Width lower bound for a product of octahedra in a norm dominating
/// max(‖·‖_{ℓ_{q,w}}, h‖·‖_∞):
///
/// min( c_q · (n·max_s ν_s)^{−1/2} · (Σ w_i)^{1/q} , h/2 ).
///
/// The two smallness conditions are checked first (with condition-2 constant
/// `cond_c`); the absolute constant c_q is supplied by the caller.
pub fn block_lower_formula(
    weights: &WeightVector,
    partition: &BlockPartition,
    n: usize,
    q: f64,
    h: f64,
    c_q: f64,
    cond_c: f64,
) -> Result<f64> {
    let report = theorem2::check_conditions(weights, partition, n, cond_c)?;
    if !report.all_pass() {
        return Err(Error::ConditionsFailed { failures: report.failures() });
    }
    let nu = crate::norms::block_weight_ratios(weights, partition)?;
    let nu_max = nu.iter().cloned().fold(0.0, f64::max);
    let total = weights.total();
    let main = c_q * (n as f64 * nu_max).powf(-0.5) * total.powf(1.0 / q);
    Ok(main.min(h / 2.0))
}

/// Provenance of the lower side of a width estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerProvenance {
    Lemma2,
    Formula,
    BruteForce,
}

/// Provenance of the upper side of a width estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperProvenance {
    ConstructedSubspace,
    Exhaustive,
}

/// A (lower certificate, upper estimate) pair with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub n: usize,
    pub lower: f64,
    pub upper: f64,
    pub lower_provenance: LowerProvenance,
    pub upper_provenance: UpperProvenance,
    pub seed: u64,
    pub solver_tol: f64,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub witness_subspace: Option<Subspace>,
}

impl WidthEstimate {
    pub fn sandwich_ok(&self, tol: f64) -> bool {
        self.lower <= self.upper + tol
    }
}

/// Budget rule for the per-block subspace construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetRule {
    /// Small blocks (N_s < n/4) taken whole (at most n/2 in total); every
    /// remaining block gets a random subspace of dimension ⌊n/(2m)⌋.
    HalfSplit,
    /// Small blocks taken whole; the residual budget divided equally among
    /// the remaining blocks.
    EqualResidual,
}

/// Block-budget construction: full coordinate spaces on small blocks, random
/// in-block subspaces on the rest. Total dimension never exceeds n.
pub fn block_budget_subspace(
    partition: &BlockPartition,
    n: usize,
    rule: BudgetRule,
    seed: u64,
) -> Result<Subspace> {
    let dim = partition.dim();
    if n >= dim {
        return Ok(Subspace::full(dim));
    }
    let m = partition.num_blocks();
    let sizes = partition.sizes();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by_key(|&s| (sizes[s], s));
    let mut full = vec![false; m];
    let mut used = 0usize;
    for &s in &order {
        if (sizes[s] as f64) < n as f64 / 4.0 && used + sizes[s] <= n / 2 {
            full[s] = true;
            used += sizes[s];
        }
    }
    let rest: Vec<usize> = (0..m).filter(|&s| !full[s]).collect();
    let mut dims = vec![0usize; m];
    for s in 0..m {
        if full[s] {
            dims[s] = sizes[s];
        }
    }
    if !rest.is_empty() {
        let per = match rule {
            BudgetRule::HalfSplit => n / (2 * m),
            BudgetRule::EqualResidual => (n - used) / rest.len(),
        };
        if per == 0 {
            return Err(Error::input(format!(
                "budget infeasible: n = {n} leaves no dimensions for {} blocks",
                rest.len()
            )));
        }
        for &s in &rest {
            dims[s] = per.min(sizes[s]);
        }
    }
    let total: usize = dims.iter().sum();
    assert!(total <= n, "construction exceeded the dimension budget");
    let mut rng = rng_from(derive_seed(seed, 0xB10C));
    Subspace::block_diagonal_random(partition, &dims, &mut rng)
}

/// Water-filling allocation: spend dimensions on the block whose residual
/// proxy (peak ℓ₂-component weight × uncovered fraction) is largest, then
/// span each block either by its top-weight coordinates (uneven in-block
/// weights) or a random in-block frame (roughly even weights).
pub fn waterfill_subspace(
    body: &OctahedronProduct,
    norm: &MixedNorm,
    n: usize,
    seed: u64,
) -> Result<Subspace> {
    let partition = body.partition();
    let dim = partition.dim();
    if n >= dim {
        return Ok(Subspace::full(dim));
    }
    let comp = norm
        .dominated_l2()
        .unwrap_or_else(|_| NormComponent::l2(WeightVector::unit(dim)));
    let w = comp.weights().as_slice();
    let m = partition.num_blocks();
    let sizes = partition.sizes();
    let block_peak: Vec<f64> = partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| w[i]).fold(0.0, f64::max))
        .collect();
    let mut dims = vec![0usize; m];
    for _ in 0..n {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for s in 0..m {
            if dims[s] >= sizes[s] {
                continue;
            }
            let res = block_peak[s] * (1.0 - dims[s] as f64 / sizes[s] as f64);
            if res > best.0 {
                best = (res, s);
            }
        }
        match best.1 {
            usize::MAX => break,
            s => dims[s] += 1,
        }
    }
    let mut rng = rng_from(derive_seed(seed, 0x5EA1));
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (s, b) in partition.blocks().iter().enumerate() {
        if dims[s] == 0 {
            continue;
        }
        let ws: Vec<f64> = b.iter().map(|&i| w[i]).collect();
        let wmax = ws.iter().cloned().fold(0.0, f64::max);
        let wmin = ws.iter().cloned().fold(f64::INFINITY, f64::min);
        if dims[s] == b.len() || wmax > 4.0 * wmin.max(1e-300) {
            for li in top_indices_by(&ws, dims[s]) {
                let mut row = vec![0.0; dim];
                row[b[li]] = 1.0;
                rows.push(row);
            }
        } else {
            use rand::Rng as _;
            use rand_distr::StandardNormal;
            let local: Vec<Vec<f64>> = (0..dims[s])
                .map(|_| (0..b.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
                .collect();
            let o = crate::linalg::orthonormalize(&Mat::from_rows(local), 1e-12);
            for r in o.q.iter_rows() {
                let mut row = vec![0.0; dim];
                for (&i, &v) in b.iter().zip(r) {
                    row[i] = v;
                }
                rows.push(row);
            }
        }
    }
    if rows.is_empty() {
        return Ok(Subspace::zero(dim));
    }
    Subspace::from_rows(rows, dim)
}

/// Search configuration for constructive upper bounds.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub random_restarts: usize,
    pub refine_iters: usize,
    pub eval_mode: DeviationMode,
    pub solver: SolverOptions,
    /// Witness from a previous (smaller-n) search, tried as one candidate.
    pub initial_witness: Option<Subspace>,
}

impl SearchConfig {
    pub fn fast(eval_mode: DeviationMode) -> Self {
        SearchConfig {
            random_restarts: 2,
            refine_iters: 0,
            eval_mode,
            solver: SolverOptions::fast(1e-7),
            initial_witness: None,
        }
    }

    pub fn thorough(eval_mode: DeviationMode) -> Self {
        SearchConfig {
            random_restarts: 8,
            refine_iters: 120,
            eval_mode,
            solver: SolverOptions::fast(1e-8),
            initial_witness: None,
        }
    }
}

/// Constructive upper bound: minimum deviation over a menu of candidate
/// subspaces (coordinate-greedy, block-budget, water-filling, random) with
/// optional smoothed-max gradient refinement of the best candidate. The
/// lower side of the returned estimate is the spectral certificate.
pub fn upper_search(
    body: &OctahedronProduct,
    norm: &MixedNorm,
    n: usize,
    cfg: &SearchConfig,
    seed: u64,
) -> Result<WidthEstimate> {
    let t0 = std::time::Instant::now();
    let dim = body.dim();
    let lower = certificate_for_norm(body, norm, n).unwrap_or(0.0);
    if n >= dim {
        return Ok(WidthEstimate {
            n,
            lower: 0.0,
            upper: 0.0,
            lower_provenance: LowerProvenance::Lemma2,
            upper_provenance: UpperProvenance::ConstructedSubspace,
            seed,
            solver_tol: cfg.solver.tol,
            wall_time_s: t0.elapsed().as_secs_f64(),
            witness_subspace: Some(Subspace::full(dim)),
        });
    }

    let mut candidates: Vec<Subspace> = Vec::new();
    if n == 0 {
        candidates.push(Subspace::zero(dim));
    } else {
        // (a) coordinate subspace, greedy by the norm of each coordinate vertex
        let scores: Vec<f64> = (0..dim)
            .map(|i| {
                let mut e = vec![0.0; dim];
                e[i] = body.radius();
                norm.eval(&e)
            })
            .collect();
        candidates.push(Subspace::coordinate(&top_indices_by(&scores, n), dim));
        // (b) block-budget constructions
        for rule in [BudgetRule::HalfSplit, BudgetRule::EqualResidual] {
            if let Ok(s) = block_budget_subspace(body.partition(), n, rule, seed) {
                candidates.push(s);
            }
        }
        // (b') water-filling allocation
        if let Ok(s) = waterfill_subspace(body, norm, n, seed) {
            candidates.push(s);
        }
        // (c) random subspaces
        for k in 0..cfg.random_restarts {
            let mut rng = rng_from(derive_seed(seed, 0xC0FFEE + k as u64));
            candidates.push(Subspace::random(n, dim, &mut rng));
        }
        if let Some(w) = &cfg.initial_witness {
            if w.ambient() == dim && w.dim() <= n {
                candidates.push(w.clone());
            }
        }
    }

    let evals: Vec<Result<Deviation>> = candidates
        .iter()
        .map(|s| deviation(body, s, norm, cfg.eval_mode, &cfg.solver))
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for (i, e) in evals.iter().enumerate() {
        if let Ok(d) = e {
            if best.map_or(true, |(bv, _)| d.value < bv) {
                best = Some((d.value, i));
            }
        }
    }
    let (mut best_val, best_idx) =
        best.ok_or_else(|| Error::input("no candidate subspace could be evaluated"))?;
    let mut best_sub = candidates[best_idx].clone();

    // (d) smoothed-max gradient refinement of the best candidate
    if cfg.refine_iters > 0 && n > 0 {
        let refined = refine_subspace(
            body,
            norm,
            &best_sub,
            cfg.refine_iters,
            cfg.eval_mode,
            &cfg.solver,
            derive_seed(seed, 0x4EF1),
        )?;
        let d = deviation(body, &refined, norm, cfg.eval_mode, &cfg.solver)?;
        if d.value < best_val {
            best_val = d.value;
            best_sub = refined;
        }
    }

    Ok(WidthEstimate {
        n,
        lower,
        upper: best_val,
        lower_provenance: LowerProvenance::Lemma2,
        upper_provenance: UpperProvenance::ConstructedSubspace,
        seed,
        solver_tol: cfg.solver.tol,
        wall_time_s: t0.elapsed().as_secs_f64(),
        witness_subspace: Some(best_sub),
    })
}

/// Gradient refinement of a subspace against the softmax-smoothed maximum of
/// vertex distances. The basis moves along the envelope gradient
/// Σ_v ω_v (−c*_v) ⊗ ∂‖r_v‖ and is re-orthonormalized; a step is kept only
/// when the hard maximum over the evaluation set decreases.
pub fn refine_subspace(
    body: &OctahedronProduct,
    norm: &MixedNorm,
    initial: &Subspace,
    iters: usize,
    eval_mode: DeviationMode,
    solver_opts: &SolverOptions,
    seed: u64,
) -> Result<Subspace> {
    let dim = body.dim();
    let n = initial.dim();
    if n == 0 || n >= dim {
        return Ok(initial.clone());
    }
    let eval_vertices: Vec<Vertex> = match eval_mode {
        DeviationMode::Exact { cap } => body.vertices(cap)?.collect(),
        DeviationMode::Sampled { count, .. } => body.sample_vertices(count.max(1), seed),
    };
    let dense: Vec<Vec<f64>> = eval_vertices.iter().map(|v| v.to_dense(dim)).collect();

    type SolveRows = (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>);
    let distances = |s: &Subspace, warm: &mut Vec<Option<Vec<f64>>>| -> Result<SolveRows> {
        let solver = DistanceSolver::new(s, norm, solver_opts.clone())?;
        let sols: Vec<(f64, Vec<f64>, Vec<f64>)> = dense
            .par_iter()
            .zip(warm.par_iter())
            .map(|(x, w0)| {
                let d = solver.solve_warm(x, w0.as_deref())?;
                let r: Vec<f64> = x.iter().zip(&d.minimizer).map(|(a, b)| a - b).collect();
                let g = solver.norm_subgradient(&r);
                Ok((d.value, d.coeffs, g))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut vals = Vec::with_capacity(sols.len());
        let mut coeffs = Vec::with_capacity(sols.len());
        let mut grads = Vec::with_capacity(sols.len());
        for (i, (v, c, g)) in sols.into_iter().enumerate() {
            warm[i] = Some(c.clone());
            vals.push(v);
            coeffs.push(c);
            grads.push(g);
        }
        Ok((vals, coeffs, grads))
    };

    let mut current = initial.orthonormalized();
    let mut warm: Vec<Option<Vec<f64>>> = vec![None; dense.len()];
    let (mut vals, mut coeffs, mut grads) = distances(&current, &mut warm)?;
    let mut hard_max = vals.iter().cloned().fold(0.0, f64::max);
    let mut eta = 0.05;

    for it in 0..iters {
        let frac = it as f64 / iters.max(1) as f64;
        let temp = hard_max.max(1e-12) * 0.2 * (0.02_f64 / 0.2).powf(frac);
        let mut weights: Vec<f64> =
            vals.iter().map(|v| ((v - hard_max) / temp).exp()).collect();
        let z: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= z);

        let mut g = Mat::zeros(n, dim);
        for ((w, c), gr) in weights.iter().zip(&coeffs).zip(&grads) {
            if *w < 1e-14 {
                continue;
            }
            for (k, ck) in c.iter().enumerate() {
                let row = g.row_mut(k);
                for (ri, gi) in row.iter_mut().zip(gr) {
                    *ri += w * (-ck) * gi;
                }
            }
        }
        let mut accepted = false;
        for _ in 0..8 {
            let mut rows = current.basis().to_row_vecs();
            for (k, row) in rows.iter_mut().enumerate() {
                for (x, gi) in row.iter_mut().zip(g.row(k)) {
                    *x -= eta * gi;
                }
            }
            let o = crate::linalg::orthonormalize(&Mat::from_rows(rows), 1e-12);
            if o.q.rows < n {
                eta *= 0.5;
                continue;
            }
            let trial = Subspace::from_rows(o.q.to_row_vecs(), dim)?;
            let mut trial_warm = warm.clone();
            let (tv, tc, tg) = distances(&trial, &mut trial_warm)?;
            let tmax = tv.iter().cloned().fold(0.0, f64::max);
            if tmax < hard_max {
                current = trial;
                warm = trial_warm;
                vals = tv;
                coeffs = tc;
                grads = tg;
                hard_max = tmax;
                eta *= 1.2;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted && eta < 1e-9 {
            break;
        }
    }
    Ok(current)
}

/// The support-exact approximation: given a vertex u and a subspace L whose
/// deviation from the body is d < h/2 (h the sup-component scale of the
/// norm), builds v ∈ L with v_i = u_i on supp u (within tol) and
/// ‖u − v‖ ≤ 2d + tol.
///
/// Geometric iteration: approximate the current in-support residual within
/// L, split the error into in-support and off-support parts, and recurse on
/// the in-support part, which shrinks by the factor d/h < 1/2 per round.
pub fn support_exact_approximation(
    u: &Vertex,
    subspace: &Subspace,
    norm: &MixedNorm,
    d: f64,
    tol: f64,
    solver_opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let dim = norm.dim();
    let h = norm
        .sup_component_scale()
        .ok_or_else(|| Error::contract("norm has no sup-norm component"))?;
    if !(d < h / 2.0) {
        return Err(Error::contract(format!(
            "support-exact approximation requires deviation < h/2 (d = {d}, h = {h})"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    let mut in_support = vec![false; dim];
    for &i in &u.support() {
        in_support[i] = true;
    }

    let mut round_opts = solver_opts.clone();
    round_opts.tol = round_opts.tol.min(tol * 1e-2).max(1e-13);
    let solver = DistanceSolver::new(subspace, norm, round_opts)?;

    let mut v_total = vec![0.0; dim];
    let mut target = u.to_dense(dim);
    let mut prev_sup = f64::INFINITY;
    let mut stagnant = 0usize;
    const MAX_ROUNDS: usize = 200;

    for _ in 0..MAX_ROUNDS {
        let sol = solver.solve(&target)?;
        for (vt, vk) in v_total.iter_mut().zip(&sol.minimizer) {
            *vt += vk;
        }
        // error = target − v_k; its in-support part is the next target
        let mut next = vec![0.0; dim];
        let mut sup_res = 0.0_f64;
        for i in 0..dim {
            if in_support[i] {
                let e = target[i] - sol.minimizer[i];
                next[i] = e;
                sup_res = sup_res.max(e.abs());
            }
        }
        target = next;
        if sup_res <= tol {
            return Ok(v_total);
        }
        if sup_res > prev_sup * 0.97 {
            stagnant += 1;
            if stagnant >= 4 {
                return Err(Error::Stagnation(format!(
                    "in-support residual stalled at {sup_res:e} (target {tol:e})"
                )));
            }
        } else {
            stagnant = 0;
        }
        prev_sup = sup_res;
    }
    Err(Error::Stagnation(format!(
        "in-support residual did not reach {tol:e} in {MAX_ROUNDS} rounds"
    )))
}

/// Brute-force width oracle for tiny bodies (N ≤ 6, ≤ 64 vertices): global
/// random multistart over n-dimensional subspaces with gradient refinement.
/// Returns the best deviation found as the upper side and the spectral
/// certificate as the lower side.
pub fn brute_force_width(
    body: &OctahedronProduct,
    norm: &MixedNorm,
    n: usize,
    starts: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    let t0 = std::time::Instant::now();
    let dim = body.dim();
    if dim > 6 {
        return Err(Error::input("brute force is capped at ambient dimension 6"));
    }
    if body.vertex_count() > 64 {
        return Err(Error::input("brute force is capped at 64 vertices"));
    }
    let lower = certificate_for_norm(body, norm, n)?;
    let solver_opts = SolverOptions::fast(1e-10);
    let mode = DeviationMode::exact();
    if n >= dim || n == 0 {
        let witness = if n >= dim { Subspace::full(dim) } else { Subspace::zero(dim) };
        let upper = if n >= dim {
            0.0
        } else {
            deviation(body, &witness, norm, mode, &solver_opts)?.value
        };
        return Ok(WidthEstimate {
            n,
            lower,
            upper,
            lower_provenance: LowerProvenance::BruteForce,
            upper_provenance: UpperProvenance::Exhaustive,
            seed,
            solver_tol: solver_opts.tol,
            wall_time_s: t0.elapsed().as_secs_f64(),
            witness_subspace: Some(witness),
        });
    }

    // multistart: short refinement everywhere, deep refinement on the best few
    let coarse: Vec<(f64, u64)> = (0..starts)
        .into_par_iter()
        .map(|k| {
            let s = derive_seed(seed, 0xB00F + k as u64);
            let mut rng = rng_from(s);
            let cand = Subspace::random(n, dim, &mut rng);
            let refined = refine_subspace(body, norm, &cand, 40, mode, &solver_opts, s)?;
            let d = deviation(body, &refined, norm, mode, &solver_opts)?;
            Ok((d.value, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut order: Vec<usize> = (0..coarse.len()).collect();
    order.sort_by(|&a, &b| coarse[a].0.partial_cmp(&coarse[b].0).unwrap().then(a.cmp(&b)));

    let mut best_val = f64::INFINITY;
    let mut best_sub = None;
    for &i in order.iter().take(4) {
        let s = coarse[i].1;
        let mut rng = rng_from(s);
        let cand = Subspace::random(n, dim, &mut rng);
        let refined = refine_subspace(body, norm, &cand, 400, mode, &solver_opts, s)?;
        let d = deviation(body, &refined, norm, mode, &solver_opts)?;
        if d.value < best_val {
            best_val = d.value;
            best_sub = Some(refined);
        }
    }

    Ok(WidthEstimate {
        n,
        lower,
        upper: best_val,
        lower_provenance: LowerProvenance::BruteForce,
        upper_provenance: UpperProvenance::Exhaustive,
        seed,
        solver_tol: solver_opts.tol,
        wall_time_s: t0.elapsed().as_secs_f64(),
        witness_subspace: best_sub,
    })
}
