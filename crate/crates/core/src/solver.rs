//! Distance from a point to a subspace in a mixed norm.
//!
//! The problem is min_c ‖x − Bᵀc‖ where B holds the basis rows and the norm
//! is a max of scaled weighted ℓ_q terms — convex but nonsmooth. The solver
//! minimizes a smoothed surrogate (log-sum-exp across components, softabs in
//! the coordinates, log-sum-exp inside sup-components) with an annealed
//! smoothing schedule and accelerated gradient descent; a Polyak-step
//! subgradient pass is the fallback when a stage makes no progress. Single
//! weighted-ℓ₂ norms bypass all of this via an exact projection.

use crate::error::{Error, Result};
use crate::linalg::{abs_pow, dot, orthonormalize, pow_qm2, Mat};
use crate::norms::{Exponent, MixedNorm};
use crate::subspace::Subspace;

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Target accuracy for the distance value.
    pub tol: f64,
    /// Gradient-iteration budget per smoothing stage.
    pub stage_iters: usize,
    /// Maximum number of smoothing stages.
    pub max_stages: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        // 1e-9 is adequate for ambient dimensions up to a few hundred
        SolverOptions { tol: 1e-9, stage_iters: 600, max_stages: 8 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }

    /// Cheaper settings for inner loops of searches and sweeps.
    pub fn fast(tol: f64) -> Self {
        SolverOptions { tol, stage_iters: 220, max_stages: 6 }
    }
}

/// Result of one distance solve.
#[derive(Debug, Clone)]
pub struct Distance {
    /// Achieved value of the true (unsmoothed) norm at the minimizer.
    pub value: f64,
    /// The nearest point found, an element of the subspace.
    pub minimizer: Vec<f64>,
    /// Coefficients of the minimizer in the solver's internal basis.
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Upper bound on value − inf (smoothing error + tail improvement).
    pub gap: f64,
}

/// Exact projector for a single weighted-ℓ₂ norm component.
struct ScaledProjector {
    /// Orthonormal rows in the √w-scaled coordinates.
    q: Mat,
    /// Rows expressing q in terms of the original basis: span map for the
    /// minimizer (q = a·scaled-basis ⇒ minimizer = (a·basis)ᵀ c).
    span: Mat,
    sqrt_w: Vec<f64>,
    scale: f64,
}

/// Reusable solver for many points against one (subspace, norm) pair.
pub struct DistanceSolver {
    basis: Mat,
    norm: MixedNorm,
    opts: SolverOptions,
    fast_l2: Option<ScaledProjector>,
    /// Orthonormal basis used for the generic path and for warm starts.
    ortho: Mat,
}

impl DistanceSolver {
    pub fn new(subspace: &Subspace, norm: &MixedNorm, opts: SolverOptions) -> Result<Self> {
        if subspace.ambient() != norm.dim() {
            return Err(Error::DimensionMismatch {
                expected: norm.dim(),
                got: subspace.ambient(),
            });
        }
        let ortho = subspace.orthonormalized().basis().clone();
        let fast_l2 = norm.single_l2().map(|comp| {
            let sqrt_w: Vec<f64> = comp.weights().as_slice().iter().map(|w| w.sqrt()).collect();
            let mut scaled = Mat::zeros(ortho.rows, ortho.cols);
            for r in 0..ortho.rows {
                for (dst, (src, sw)) in scaled
                    .row_mut(r)
                    .iter_mut()
                    .zip(ortho.row(r).iter().zip(&sqrt_w))
                {
                    *dst = src * sw;
                }
            }
            let o = orthonormalize(&scaled, 1e-12);
            // span rows = combinations of the *original* orthonormal basis
            let span_rows: Vec<Vec<f64>> =
                (0..o.q.rows).map(|r| ortho.combine_rows(o.a.row(r))).collect();
            let span = if span_rows.is_empty() {
                Mat::zeros(0, ortho.cols)
            } else {
                Mat::from_rows(span_rows)
            };
            ScaledProjector { q: o.q, span, sqrt_w, scale: comp.scale() }
        });
        Ok(DistanceSolver { basis: ortho.clone(), norm: norm.clone(), opts, fast_l2, ortho })
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    pub fn solve(&self, x: &[f64]) -> Result<Distance> {
        self.solve_warm(x, None)
    }

    /// Solve with an optional warm-start coefficient vector (length = the
    /// subspace dimension, coefficients of the orthonormalized basis).
    pub fn solve_warm(&self, x: &[f64], warm: Option<&[f64]>) -> Result<Distance> {
        if x.len() != self.norm.dim() {
            return Err(Error::DimensionMismatch { expected: self.norm.dim(), got: x.len() });
        }
        if self.basis.rows == 0 {
            return Ok(Distance {
                value: self.norm.eval(x),
                minimizer: vec![0.0; x.len()],
                coeffs: Vec::new(),
                iterations: 0,
                converged: true,
                gap: 0.0,
            });
        }
        if let Some(p) = &self.fast_l2 {
            return Ok(self.solve_projection(x, p));
        }
        self.solve_smoothed(x, warm)
    }

    fn solve_projection(&self, x: &[f64], p: &ScaledProjector) -> Distance {
        let xs: Vec<f64> = x.iter().zip(&p.sqrt_w).map(|(v, sw)| v * sw).collect();
        let c = p.q.matvec(&xs);
        let norm_sq = dot(&xs, &xs);
        let proj_sq = dot(&c, &c);
        let value = p.scale * (norm_sq - proj_sq).max(0.0).sqrt();
        let minimizer = p.span.combine_rows(&c);
        Distance { value, minimizer, coeffs: c, iterations: 0, converged: true, gap: 0.0 }
    }

    /// Subgradient of the mixed norm at r (an active-component subgradient).
    pub fn norm_subgradient(&self, r: &[f64]) -> Vec<f64> {
        let mut best = 0.0;
        let mut best_idx = 0usize;
        for (j, c) in self.norm.components().iter().enumerate() {
            let v = c.eval(r);
            if v > best {
                best = v;
                best_idx = j;
            }
        }
        let comp = &self.norm.components()[best_idx];
        let mut g = vec![0.0; r.len()];
        match comp.q() {
            Exponent::Infinity => {
                let mut arg = 0usize;
                let mut mx = 0.0;
                for (i, v) in r.iter().enumerate() {
                    if v.abs() > mx {
                        mx = v.abs();
                        arg = i;
                    }
                }
                if mx > 0.0 {
                    g[arg] = comp.scale() * r[arg].signum();
                }
            }
            Exponent::Finite(q) => {
                let s: f64 = comp
                    .weights()
                    .as_slice()
                    .iter()
                    .zip(r)
                    .map(|(w, v)| w * abs_pow(*v, q))
                    .sum();
                if s > 0.0 {
                    let outer = comp.scale() * s.powf(1.0 / q - 1.0);
                    for ((gi, w), v) in g.iter_mut().zip(comp.weights().as_slice()).zip(r) {
                        *gi = outer * w * pow_qm2(v.abs(), q) * *v;
                    }
                }
            }
        }
        g
    }

    /// Value and gradient (in coefficient space) of the smoothed objective.
    fn smoothed_value_grad(
        &self,
        x: &[f64],
        c: &[f64],
        sm: &Smoothing,
        grad: &mut [f64],
        r: &mut [f64],
    ) -> f64 {
        self.basis.combine_rows_into(c, r);
        for (ri, xi) in r.iter_mut().zip(x) {
            *ri = xi - *ri;
        }
        let comps = self.norm.components();
        let mut values = Vec::with_capacity(comps.len());
        for comp in comps {
            let v = match comp.q() {
                Exponent::Infinity => {
                    let a = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    let z: f64 = r
                        .iter()
                        .map(|v| {
                            ((v - a) / sm.sup_tau).exp() + ((-v - a) / sm.sup_tau).exp()
                        })
                        .sum();
                    comp.scale() * (a + sm.sup_tau * z.ln())
                }
                Exponent::Finite(q) => {
                    let s: f64 = comp
                        .weights()
                        .as_slice()
                        .iter()
                        .zip(r.iter())
                        .map(|(w, v)| w * (v * v + sm.mu * sm.mu).powf(q * 0.5))
                        .sum();
                    comp.scale() * s.powf(1.0 / q)
                }
            };
            values.push(v);
        }
        // outer log-sum-exp over components
        let vmax = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (fval, weights) = if comps.len() == 1 {
            (values[0], vec![1.0])
        } else {
            let exps: Vec<f64> = values.iter().map(|v| ((v - vmax) / sm.outer_tau).exp()).collect();
            let z: f64 = exps.iter().sum();
            (
                vmax + sm.outer_tau * z.ln(),
                exps.iter().map(|e| e / z).collect(),
            )
        };
        // accumulate dF/dr
        let mut gr = vec![0.0; r.len()];
        for ((comp, w_out), v) in comps.iter().zip(&weights).zip(&values) {
            if *w_out < 1e-300 {
                continue;
            }
            match comp.q() {
                Exponent::Infinity => {
                    let a = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                    let z: f64 = r
                        .iter()
                        .map(|v| {
                            ((v - a) / sm.sup_tau).exp() + ((-v - a) / sm.sup_tau).exp()
                        })
                        .sum();
                    for (gi, v) in gr.iter_mut().zip(r.iter()) {
                        let d = (((v - a) / sm.sup_tau).exp() - ((-v - a) / sm.sup_tau).exp()) / z;
                        *gi += w_out * comp.scale() * d;
                    }
                }
                Exponent::Finite(q) => {
                    // v = scale · S^{1/q}; dS/dr_i = q·w·ρ^{q−2}·r_i
                    let s_pow = (v / comp.scale()).max(1e-300);
                    let s_val = s_pow.powf(q); // recover S without re-summing
                    let outer = w_out * comp.scale() * s_val.powf(1.0 / q - 1.0);
                    for ((gi, w), v) in gr.iter_mut().zip(comp.weights().as_slice()).zip(r.iter())
                    {
                        let rho2 = v * v + sm.mu * sm.mu;
                        *gi += outer * w * pow_qm2(rho2.sqrt(), q) * *v;
                    }
                }
            }
        }
        // chain rule: grad_c = −B · gr
        for (gk, row) in grad.iter_mut().zip(self.basis.iter_rows()) {
            *gk = -dot(row, &gr);
        }
        fval
    }

    fn hard_value(&self, x: &[f64], c: &[f64]) -> f64 {
        let y = self.basis.combine_rows(c);
        let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        self.norm.eval(&r)
    }

    /// Accelerated descent on one smoothed stage. Returns the best iterate
    /// (by smoothed value) and the improvement seen over the final window.
    fn agd_stage(
        &self,
        x: &[f64],
        c0: Vec<f64>,
        sm: &Smoothing,
        iters: usize,
        window_tol: f64,
        total_iters: &mut usize,
    ) -> (Vec<f64>, f64) {
        let n = self.basis.rows;
        let dim = self.norm.dim();
        let mut grad = vec![0.0; n];
        let mut gscratch = vec![0.0; n];
        let mut rbuf = vec![0.0; dim];

        let mut c = c0;
        let mut f_c = self.smoothed_value_grad(x, &c, sm, &mut grad, &mut rbuf);
        let mut v = c.clone();
        let mut theta = 1.0_f64;
        let mut lip = 1.0_f64;
        let mut c_best = c.clone();
        let mut f_best = f_c;
        let mut window_start_best = f_best;
        let mut window_improve = f64::INFINITY;
        const WINDOW: usize = 20;

        for it in 0..iters {
            *total_iters += 1;
            let f_v = self.smoothed_value_grad(x, &v, sm, &mut grad, &mut rbuf);
            let g2 = dot(&grad, &grad);
            if g2.sqrt() <= 1e-15 * (1.0 + f_v) {
                if f_v < f_best {
                    c_best = v.clone();
                }
                window_improve = 0.0;
                break;
            }
            // backtracking line search from the momentum point
            let mut c_new = vec![0.0; n];
            let mut f_new;
            let mut bt = 0;
            loop {
                let step = 1.0 / lip;
                for ((cn, yv), g) in c_new.iter_mut().zip(&v).zip(&grad) {
                    *cn = yv - step * g;
                }
                f_new = self.smoothed_value_grad(x, &c_new, sm, &mut gscratch, &mut rbuf);
                if f_new <= f_v - 0.5 * step * g2 || bt >= 60 {
                    break;
                }
                lip *= 2.0;
                bt += 1;
            }
            let theta_new = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_new;
            if f_new > f_c {
                // non-monotone step: restart momentum at the new point
                v = c_new.clone();
                theta = 1.0;
            } else {
                for ((vv, cn), cp) in v.iter_mut().zip(&c_new).zip(&c) {
                    *vv = cn + beta * (cn - cp);
                }
                theta = theta_new;
            }
            c = c_new;
            f_c = f_new;
            if f_c < f_best {
                f_best = f_c;
                c_best = c.clone();
            }
            if bt == 0 {
                lip *= 0.7;
            }
            if (it + 1) % WINDOW == 0 {
                window_improve = window_start_best - f_best;
                if window_improve <= window_tol {
                    break;
                }
                window_start_best = f_best;
            }
        }
        (c_best, window_improve.max(0.0))
    }

    fn solve_smoothed(&self, x: &[f64], warm: Option<&[f64]>) -> Result<Distance> {
        let n = self.basis.rows;
        let dim = self.norm.dim();
        let comps = self.norm.components();
        let n_comps = comps.len();

        // warm start: provided coefficients, else plain ℓ₂ projection
        let mut c = match warm {
            Some(w) if w.len() == n => w.to_vec(),
            _ => self.ortho.matvec(x),
        };

        let f0 = self.hard_value(x, &c);
        if f0 <= self.opts.tol {
            let minimizer = self.basis.combine_rows(&c);
            return Ok(Distance {
                value: f0,
                minimizer,
                coeffs: c,
                iterations: 0,
                converged: true,
                gap: f0,
            });
        }

        // smoothing error budget per stage, annealed geometrically
        let delta0 = (0.05 * f0).max(self.opts.tol);
        let delta_min = (self.opts.tol * 0.25).max(1e-14);
        let n_stages = if delta0 <= delta_min {
            1
        } else {
            (((delta0 / delta_min).ln() / 4.0_f64.ln()).ceil() as usize + 1)
                .clamp(2, self.opts.max_stages)
        };

        let max_weight_root: f64 = comps
            .iter()
            .filter_map(|cp| match cp.q() {
                Exponent::Finite(q) => Some(cp.scale() * cp.weights().total().powf(1.0 / q)),
                Exponent::Infinity => None,
            })
            .fold(1e-12, f64::max);
        let sup_scale: f64 = self.norm.sup_component_scale().unwrap_or(0.0);

        let mut total_iters = 0usize;
        let mut final_window = f64::INFINITY;

        for stage in 0..n_stages {
            let delta = if n_stages == 1 {
                delta_min
            } else {
                delta0 * (delta_min / delta0).powf(stage as f64 / (n_stages - 1) as f64)
            };
            let sm = Smoothing {
                outer_tau: if n_comps > 1 {
                    delta / (3.0 * (n_comps as f64).ln().max(1.0))
                } else {
                    1.0
                },
                mu: delta / (3.0 * max_weight_root),
                sup_tau: if sup_scale > 0.0 {
                    delta / (3.0 * sup_scale * (2.0 * dim as f64).ln())
                } else {
                    1.0
                },
            };
            let window_tol = (delta * 2e-3).max(1e-16);
            let (c_next, window) =
                self.agd_stage(x, c, &sm, self.opts.stage_iters, window_tol, &mut total_iters);
            c = c_next;
            final_window = window;
        }

        // Polyak-step subgradient polish on the hard objective; keep the best
        let mut best_c = c.clone();
        let mut best_f = self.hard_value(x, &c);
        {
            let mut cur = c;
            for _ in 0..48 {
                let y = self.basis.combine_rows(&cur);
                let r: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let fh = self.norm.eval(&r);
                if fh < best_f {
                    best_f = fh;
                    best_c = cur.clone();
                }
                let gr = self.norm_subgradient(&r);
                let mut gc = vec![0.0; n];
                for (gk, row) in gc.iter_mut().zip(self.basis.iter_rows()) {
                    *gk = -dot(row, &gr);
                }
                let g2 = dot(&gc, &gc);
                if g2 < 1e-30 {
                    break;
                }
                let step = (fh - best_f * (1.0 - 1e-3)).max(fh * 1e-4) / g2;
                for (cv, g) in cur.iter_mut().zip(&gc) {
                    *cv -= step * g;
                }
            }
        }

        let minimizer = self.basis.combine_rows(&best_c);
        let r: Vec<f64> = x.iter().zip(&minimizer).map(|(a, b)| a - b).collect();
        let value = self.norm.eval(&r);
        let gap = delta_min * 4.0 + final_window.min(value);
        let converged = gap <= self.opts.tol * 10.0 + 1e-14;
        Ok(Distance {
            value,
            minimizer,
            coeffs: best_c,
            iterations: total_iters,
            converged,
            gap,
        })
    }
}

struct Smoothing {
    outer_tau: f64,
    mu: f64,
    sup_tau: f64,
}

/// One-shot distance computation, erroring on non-convergence.
pub fn distance_to_subspace(
    x: &[f64],
    subspace: &Subspace,
    norm: &MixedNorm,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    if !(tol > 0.0) {
        return Err(Error::input("tolerance must be positive"));
    }
    let solver = DistanceSolver::new(subspace, norm, SolverOptions::with_tol(tol))?;
    let d = solver.solve(x)?;
    if !d.converged {
        return Err(Error::NonConvergence {
            best: d.value,
            gap: d.gap,
            iterations: d.iterations,
        });
    }
    Ok((d.value, d.minimizer))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::{NormComponent, WeightVector};
    use crate::rng::rng_from;
    use rand::Rng as _;

    #[test]
    fn point_in_subspace_has_zero_distance() {
        let l = Subspace::from_rows(vec![vec![1.0, 2.0, 0.0], vec![0.0, 0.0, 1.0]], 3).unwrap();
        let norm = MixedNorm::lq(3, 2.0).unwrap();
        let (d, y) = distance_to_subspace(&[2.0, 4.0, -1.0], &l, &norm, 1e-10).unwrap();
        assert!(d < 1e-10);
        assert!((y[0] - 2.0).abs() < 1e-9 && (y[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn euclidean_projection_distance() {
        let inv = 1.0 / 2.0_f64.sqrt();
        let l = Subspace::from_rows(vec![vec![inv, inv]], 2).unwrap();
        let norm = MixedNorm::lq(2, 2.0).unwrap();
        let (d, _) = distance_to_subspace(&[1.0, 0.0], &l, &norm, 1e-12).unwrap();
        assert!((d - 2.0_f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_support_q4() {
        let l = Subspace::coordinate(&[1], 4);
        let norm = MixedNorm::lq(4, 4.0).unwrap();
        let (d, _) = distance_to_subspace(&[1.0, 0.0, 0.0, 0.0], &l, &norm, 1e-8).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "d = {d}");
    }

    #[test]
    fn weighted_l2_matches_general_path() {
        // same problem through the projector and through smoothing (by
        // disguising the single ℓ₂ component as a two-component max)
        let mut rng = rng_from(17);
        for _ in 0..5 {
            let l = Subspace::random(3, 7, &mut rng);
            let w = WeightVector::new((0..7).map(|_| rng.gen_range(0.1..2.0)).collect()).unwrap();
            let x: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let exact = MixedNorm::single(Exponent::Finite(2.0), w.clone(), 1.0).unwrap();
            let disguised = MixedNorm::new(vec![
                NormComponent::new(Exponent::Finite(2.0), w.clone(), 1.0).unwrap(),
                NormComponent::new(Exponent::Finite(2.0), w.clone(), 0.5).unwrap(),
            ])
            .unwrap();
            let (d1, _) = distance_to_subspace(&x, &l, &exact, 1e-12).unwrap();
            let (d2, _) = distance_to_subspace(&x, &l, &disguised, 1e-9).unwrap();
            assert!((d1 - d2).abs() < 1e-6, "{d1} vs {d2}");
        }
    }

    #[test]
    fn mixed_sup_norm_distance() {
        // L = span{(1,1)}, x = (1,0), norm = max(ℓ₂, 2‖·‖_∞).
        // residual at y = t(1,1): max(√((1−t)²+t²), 2·max(|1−t|,|t|));
        // the sup part dominates and is minimized at t = 1/2 with value 1.
        let l = Subspace::from_rows(vec![vec![1.0, 1.0]], 2).unwrap();
        let norm = MixedNorm::new(vec![
            NormComponent::new(Exponent::Finite(2.0), WeightVector::unit(2), 1.0).unwrap(),
            NormComponent::sup(2, 2.0).unwrap(),
        ])
        .unwrap();
        let (d, _) = distance_to_subspace(&[1.0, 0.0], &l, &norm, 1e-9).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "d = {d}");
    }

    #[test]
    fn distance_is_convex_along_segments() {
        let mut rng = rng_from(23);
        let l = Subspace::random(2, 6, &mut rng);
        let norm = MixedNorm::new(vec![
            NormComponent::new(Exponent::Finite(4.0), WeightVector::unit(6), 1.0).unwrap(),
            NormComponent::sup(6, 0.5).unwrap(),
        ])
        .unwrap();
        let solver = DistanceSolver::new(&l, &norm, SolverOptions::with_tol(1e-9)).unwrap();
        for _ in 0..20 {
            let a: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            let da = solver.solve(&a).unwrap().value;
            let db = solver.solve(&b).unwrap().value;
            let dm = solver.solve(&mid).unwrap().value;
            assert!(dm <= 0.5 * (da + db) + 1e-6, "{dm} vs {}", 0.5 * (da + db));
        }
    }

    #[test]
    fn zero_dimensional_subspace_returns_norm() {
        let l = Subspace::zero(3);
        let norm = MixedNorm::lq(3, 4.0).unwrap();
        let (d, y) = distance_to_subspace(&[1.0, 1.0, 1.0], &l, &norm, 1e-10).unwrap();
        assert!((d - 3.0_f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(y, vec![0.0, 0.0, 0.0]);
    }
}
