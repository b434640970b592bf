use std::time::Instant;
use widthlab::approx::*;
use widthlab::norms::*;
use widthlab::octahedron::*;
use widthlab::rng::*;
use widthlab::scaling::*;
use widthlab::solver::*;
use widthlab::subspace::*;
use widthlab::theorem2::*;

fn main() {
    // --- criterion 2 scale: upper_search N=64 q=4 n=16 exact ---
    let t = Instant::now();
    let body = OctahedronProduct::cross_polytope(64);
    let norm = MixedNorm::lq(64, 4.0).unwrap();
    let mut cfg = SearchConfig::thorough(DeviationMode::exact());
    cfg.random_restarts = 4;
    cfg.refine_iters = 40;
    let est = upper_search(&body, &norm, 16, &cfg, 1).unwrap();
    println!("kashin n=16: upper={:.4} lower_cert={:.4} t={:.1?}", est.upper, est.lower, t.elapsed());

    // --- criterion 4 scale: one support-exact call at N=1024 ---
    let dim = 1024;
    let part = BlockPartition::equal_blocks(4, dim).unwrap();
    let body = OctahedronProduct::new(part.clone());
    let w = WeightVector::uniform(dim, 1.0 / dim as f64);
    let plan = SamplingPlan::new(&w, 32).unwrap();
    let norm = MixedNorm::new(vec![
        NormComponent::new(Exponent::Finite(4.0), w.clone(), 1.0).unwrap(),
        NormComponent::sup(dim, 1.0).unwrap(),
    ]).unwrap();
    let mut rng = rng_from(5);
    let t = Instant::now();
    let l = Subspace::block_diagonal_random(&part, &[128, 128, 128, 128], &mut rng).unwrap();
    println!("subspace built t={:.1?}", t.elapsed());
    let t = Instant::now();
    let dev = deviation(&body, &l, &norm, DeviationMode::sampled(64, 3), &SolverOptions::fast(1e-7)).unwrap();
    println!("sampled deviation(64+ascent)={:.4} t={:.1?}", dev.value, t.elapsed());
    let t = Instant::now();
    let u = body.sample_vertices(1, 9).pop().unwrap();
    let v = support_exact_approximation(&u, &l, &norm, dev.value, 1e-9, &SolverOptions::fast(1e-9)).unwrap();
    let ud = u.to_dense(dim);
    let err: Vec<f64> = ud.iter().zip(&v).map(|(a,b)| a-b).collect();
    println!("support-exact: err_norm={:.4} t={:.1?}", norm.eval(&err), t.elapsed());

    // --- criterion 7 scale: one sweep row θ=inf n=256 ---
    let t = Instant::now();
    let r = sweep(&[Exponent::Infinity], 4.0, &[256], MRule::Default, 3, &SweepEffort::default(), true);
    println!("sweep inf n=256: rows={} lower={:.4} upper={:.4} t={:.1?}",
             r.rows.len(), r.rows[0].lower, r.rows[0].upper, t.elapsed());
    let t = Instant::now();
    let r1 = sweep(&[Exponent::Finite(1.0)], 4.0, &[256], MRule::Default, 3, &SweepEffort::default(), true);
    println!("sweep th1 n=256: lower={:.4} upper={:.4} t={:.1?}",
             r1.rows[0].lower, r1.rows[0].upper, t.elapsed());
}
