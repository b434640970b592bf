//! Weighted ℓ_q norms and mixed (max-of-components) norms.
//!
//! A `MixedNorm` is a finite maximum of scaled weighted ℓ_q seminorms,
//!
//! ‖x‖ = max_j  scale_j · (Σ_i w_{j,i} |x_i|^{q_j})^{1/q_j},
//!
//! with the sup-norm convention for q = ∞. This covers plain ℓ_{q,w},
//! intersections ℓ_{q1,w} ∩ ℓ_{q2,w}, and max(‖·‖_{ℓ_{q,w}}, h‖·‖_∞).

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::abs_pow;
use crate::octahedron::BlockPartition;

/// An exponent in [1, ∞].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_infinite() && q > 0.0 {
            Ok(Exponent::Infinity)
        } else if q.is_finite() && q >= 1.0 {
            Ok(Exponent::Finite(q))
        } else {
            Err(Error::input(format!("exponent must lie in [1, ∞], got {q}")))
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// The finite value; panics on ∞.
    pub fn finite(&self) -> f64 {
        match self {
            Exponent::Finite(q) => *q,
            Exponent::Infinity => panic!("exponent is infinite"),
        }
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            Exponent::Finite(q) => *q,
            Exponent::Infinity => f64::INFINITY,
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(q) => s.serialize_f64(*q),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        let raw = Raw::deserialize(d)?;
        let q = match raw {
            Raw::Num(q) => q,
            Raw::Str(s) => match s.trim().to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "∞" => f64::INFINITY,
                other => other
                    .parse::<f64>()
                    .map_err(|_| D::Error::custom(format!("bad exponent {other:?}")))?,
            },
        };
        Exponent::new(q).map_err(D::Error::custom)
    }
}

impl std::fmt::Display for Exponent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Exponent::Finite(q) => write!(f, "{q}"),
            Exponent::Infinity => write!(f, "inf"),
        }
    }
}

/// Nonnegative weights, at least one positive, length = ambient dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::input("weight vector is empty"));
        }
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        if !w.iter().any(|x| *x > 0.0) {
            return Err(Error::input("at least one weight must be positive"));
        }
        Ok(WeightVector(w))
    }

    pub fn uniform(dim: usize, value: f64) -> Self {
        WeightVector::new(vec![value; dim]).expect("uniform weights")
    }

    pub fn unit(dim: usize) -> Self {
        Self::uniform(dim, 1.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }

    /// Rescaled copy with Σ w_i = 1.
    pub fn normalized(&self) -> WeightVector {
        let t = self.total();
        WeightVector(self.0.iter().map(|w| w / t).collect())
    }

    pub fn scaled(&self, factor: f64) -> Result<WeightVector> {
        WeightVector::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// One term of a mixed norm: scale · ‖·‖_{ℓ_{q,w}}.
#[derive(Debug, Clone, PartialEq)]
pub struct NormComponent {
    q: Exponent,
    weights: WeightVector,
    scale: f64,
}

impl NormComponent {
    /// For q = ∞ the component is `scale · max_i |x_i|` and the weights must
    /// all be 1 (there is no weighted sup-norm in this crate).
    pub fn new(q: Exponent, weights: WeightVector, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale < 0.0 {
            return Err(Error::input("component scale must be finite and ≥ 0"));
        }
        if q.is_infinite() && weights.as_slice().iter().any(|w| *w != 1.0) {
            return Err(Error::input(
                "q = ∞ components use the plain sup-norm; weights must all be 1",
            ));
        }
        Ok(NormComponent { q, weights, scale })
    }

    pub fn l2(weights: WeightVector) -> Self {
        NormComponent { q: Exponent::Finite(2.0), weights, scale: 1.0 }
    }

    pub fn sup(dim: usize, scale: f64) -> Result<Self> {
        NormComponent::new(Exponent::Infinity, WeightVector::unit(dim), scale)
    }

    pub fn q(&self) -> Exponent {
        self.q
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.q {
            Exponent::Infinity => {
                self.scale * x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
            Exponent::Finite(q) => {
                let s: f64 = self
                    .weights
                    .as_slice()
                    .iter()
                    .zip(x)
                    .map(|(w, v)| w * abs_pow(*v, q))
                    .sum();
                self.scale * s.powf(1.0 / q)
            }
        }
    }

    /// A weighted-ℓ₂ component dominated by this one on all of ℝ^N.
    ///
    /// For finite q ≥ 2 the power-mean inequality gives
    /// ‖x‖_{q,w} ≥ (Σw)^{1/q−1/2} ‖x‖_{2,w}, so the returned component is
    /// (q=2, w, scale·(Σw)^{1/q−1/2}). For q = 2 it is the component itself.
    pub fn dominated_l2(&self) -> Result<NormComponent> {
        match self.q {
            Exponent::Finite(q) if q == 2.0 => Ok(self.clone()),
            Exponent::Finite(q) if q > 2.0 => {
                let total = self.weights.total();
                let factor = total.powf(1.0 / q - 0.5);
                NormComponent::new(
                    Exponent::Finite(2.0),
                    self.weights.clone(),
                    self.scale * factor,
                )
            }
            _ => Err(Error::input(
                "no dominated ℓ₂ component for q < 2 or q = ∞",
            )),
        }
    }
}

/// Maximum of scaled weighted ℓ_q components sharing one ambient dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedNorm {
    components: Vec<NormComponent>,
    dim: usize,
}

impl MixedNorm {
    pub fn new(components: Vec<NormComponent>) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::input("mixed norm needs at least one component"))?;
        let dim = first.dim();
        if components.iter().any(|c| c.dim() != dim) {
            return Err(Error::input("all components must share the ambient dimension"));
        }
        Ok(MixedNorm { components, dim })
    }

    /// Single weighted ℓ_q norm.
    pub fn single(q: Exponent, weights: WeightVector, scale: f64) -> Result<Self> {
        MixedNorm::new(vec![NormComponent::new(q, weights, scale)?])
    }

    /// Plain (unweighted) ℓ_q norm in dimension `dim`.
    pub fn lq(dim: usize, q: f64) -> Result<Self> {
        MixedNorm::single(Exponent::new(q)?, WeightVector::unit(dim), 1.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[NormComponent] {
        &self.components
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.components
            .iter()
            .map(|c| c.eval(x))
            .fold(0.0_f64, f64::max)
    }

    /// Like `eval` but with a dimension check, as the public entry point.
    pub fn eval_checked(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(self.eval(x))
    }

    /// The component list reduced to exactly one finite-q=2 component, when
    /// the norm is of that shape (used for closed-form projections).
    pub fn single_l2(&self) -> Option<&NormComponent> {
        match self.components.as_slice() {
            [c] if matches!(c.q(), Exponent::Finite(q) if q == 2.0) => Some(c),
            _ => None,
        }
    }

    /// First explicit q=2 component, if any.
    pub fn l2_component(&self) -> Option<&NormComponent> {
        self.components
            .iter()
            .find(|c| matches!(c.q(), Exponent::Finite(q) if q == 2.0))
    }

    /// Largest scale among sup-norm components (the `h` in max(‖·‖, h‖·‖_∞)).
    pub fn sup_component_scale(&self) -> Option<f64> {
        self.components
            .iter()
            .filter(|c| c.q().is_infinite())
            .map(|c| c.scale())
            .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.max(s))))
    }

    /// A weighted-ℓ₂ component dominated by the whole norm: an explicit q=2
    /// component if present, otherwise one derived from the first finite
    /// component with q > 2.
    pub fn dominated_l2(&self) -> Result<NormComponent> {
        if let Some(c) = self.l2_component() {
            return Ok(c.clone());
        }
        self.components
            .iter()
            .filter_map(|c| c.dominated_l2().ok())
            .next()
            .ok_or_else(|| Error::input("no component dominates a weighted ℓ₂ norm"))
    }

    /// Spot-check on random vectors that `self` dominates `comp` pointwise.
    pub fn dominates(&self, comp: &NormComponent, trials: usize, seed: u64) -> bool {
        use rand::Rng as _;
        if comp.dim() != self.dim {
            return false;
        }
        let mut rng = crate::rng::rng_from(seed);
        for _ in 0..trials {
            let x: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let full = self.eval(&x);
            let part = comp.eval(&x);
            if part > full * (1.0 + 1e-12) + 1e-300 {
                return false;
            }
        }
        true
    }

    /// Restriction of the norm to a coordinate subset (weights restricted,
    /// scales kept). Components whose restricted weights vanish are dropped;
    /// it is an error for all of them to vanish. Used when a minimization
    /// legitimately decouples over disjoint supports.
    pub fn restrict(&self, indices: &[usize]) -> Result<MixedNorm> {
        let mut comps = Vec::new();
        for c in &self.components {
            let w: Vec<f64> = indices.iter().map(|&i| c.weights().as_slice()[i]).collect();
            if w.iter().any(|x| *x > 0.0) {
                comps.push(NormComponent::new(c.q(), WeightVector::new(w)?, c.scale())?);
            }
        }
        if comps.is_empty() {
            return Err(Error::input("norm restricted to a zero-weight coordinate set"));
        }
        MixedNorm::new(comps)
    }
}

/// Per-block share of the total weight: ν_s = Σ_{i∈Δ_s} w_i / Σ_i w_i.
///
/// The shares sum to 1.
pub fn block_weight_ratios(weights: &WeightVector, partition: &BlockPartition) -> Result<Vec<f64>> {
    if weights.len() != partition.dim() {
        return Err(Error::DimensionMismatch { expected: partition.dim(), got: weights.len() });
    }
    let total = weights.total();
    if total <= 0.0 {
        return Err(Error::input("total weight must be positive"));
    }
    Ok(partition
        .blocks()
        .iter()
        .map(|b| b.iter().map(|&i| weights.as_slice()[i]).sum::<f64>() / total)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn l2_unit(dim: usize) -> MixedNorm {
        MixedNorm::lq(dim, 2.0).unwrap()
    }

    #[test]
    fn eval_euclidean() {
        let n = l2_unit(2);
        assert!((n.eval(&[3.0, 4.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn eval_max_picks_sup_component() {
        let n = MixedNorm::new(vec![
            NormComponent::new(Exponent::Finite(2.0), WeightVector::unit(2), 1.0).unwrap(),
            NormComponent::sup(2, 3.0).unwrap(),
        ])
        .unwrap();
        assert!((n.eval(&[1.0, 0.0]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eval_weighted_q4() {
        let n = MixedNorm::single(
            Exponent::Finite(4.0),
            WeightVector::uniform(4, 0.5),
            1.0,
        )
        .unwrap();
        let v = n.eval(&[1.0, 1.0, 1.0, 1.0]);
        assert!((v - 2.0_f64.powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let n = l2_unit(3);
        assert!(n.eval_checked(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn sup_component_requires_unit_weights() {
        let r = NormComponent::new(Exponent::Infinity, WeightVector::uniform(2, 0.5), 1.0);
        assert!(r.is_err());
    }

    #[test]
    fn ratios_uniform_two_blocks() {
        let w = WeightVector::unit(6);
        let p = BlockPartition::equal_blocks(2, 6).unwrap();
        let nu = block_weight_ratios(&w, &p).unwrap();
        assert!((nu[0] - 0.5).abs() < 1e-15 && (nu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratios_dyadic_levels_are_equal() {
        // level weights 2^{-k} over levels k = 0..m-1: every level sums to 1
        let m = 5;
        let p = BlockPartition::dyadic_levels(m).unwrap();
        let mut w = Vec::new();
        for k in 0..m {
            w.extend(std::iter::repeat(0.5_f64.powi(k as i32)).take(1 << k));
        }
        let nu = block_weight_ratios(&WeightVector::new(w).unwrap(), &p).unwrap();
        for v in &nu {
            assert!((v - 1.0 / m as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn ratios_simple_arithmetic() {
        let w = WeightVector::new(vec![1.0, 1.0, 2.0]).unwrap();
        let p = BlockPartition::new(vec![vec![0, 1], vec![2]], 3).unwrap();
        let nu = block_weight_ratios(&w, &p).unwrap();
        assert!((nu[0] - 0.5).abs() < 1e-15 && (nu[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ratios_sum_to_one() {
        let mut rng = crate::rng::rng_from(3);
        for _ in 0..20 {
            let dim = rng.gen_range(3..20);
            let w = WeightVector::new((0..dim).map(|_| rng.gen_range(0.0..2.0) + 1e-6).collect())
                .unwrap();
            let m = rng.gen_range(1..=dim.min(4));
            let p = BlockPartition::random(m, dim, &mut rng);
            let nu = block_weight_ratios(&w, &p).unwrap();
            assert!((nu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_axioms_hold_on_random_pairs() {
        let mut rng = crate::rng::rng_from(11);
        let configs: Vec<MixedNorm> = vec![
            l2_unit(6),
            MixedNorm::lq(6, 4.0).unwrap(),
            MixedNorm::new(vec![
                NormComponent::new(
                    Exponent::Finite(4.0),
                    WeightVector::new((0..6).map(|i| 0.5_f64.powi(i)).collect()).unwrap(),
                    1.0,
                )
                .unwrap(),
                NormComponent::sup(6, 0.7).unwrap(),
            ])
            .unwrap(),
        ];
        for norm in &configs {
            for _ in 0..1000 {
                let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let a: f64 = rng.gen_range(-3.0..3.0);
                let ax: Vec<f64> = x.iter().map(|v| a * v).collect();
                let xy: Vec<f64> = x.iter().zip(&y).map(|(u, v)| u + v).collect();
                let nx = norm.eval(&x);
                let ny = norm.eval(&y);
                let scale_ref = a.abs() * nx;
                assert!((norm.eval(&ax) - scale_ref).abs() <= 1e-12 * (1.0 + scale_ref));
                assert!(norm.eval(&xy) <= (nx + ny) * (1.0 + 1e-12));
                // the mixed norm dominates each component
                for c in norm.components() {
                    assert!(nx + 1e-15 >= c.eval(&x));
                }
            }
        }
    }

    #[test]
    fn dominated_l2_is_dominated() {
        let n = MixedNorm::lq(8, 4.0).unwrap();
        let c = n.dominated_l2().unwrap();
        assert!(n.dominates(&c, 200, 5));
    }

    #[test]
    fn exponent_serde_inf_roundtrip() {
        let e: Exponent = serde_json::from_str("\"inf\"").unwrap();
        assert!(e.is_infinite());
        let e: Exponent = serde_json::from_str("2.5").unwrap();
        assert_eq!(e.finite(), 2.5);
        assert_eq!(serde_json::to_string(&Exponent::Infinity).unwrap(), "\"inf\"");
    }
}
