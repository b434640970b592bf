//! JSON problem ingestion.
//!
//! A width problem arrives as a document of the form
//! `{"N": 4, "blocks": [[1,2],[3,4]], "weights": [...],
//!   "norm": {"components": [{"q": 2, "scale": 1.0, "weights": "shared"}]}}`.
//! Block indices are 1-based in the file and converted to 0-based
//! internally; a component's `"weights"` is either the literal `"shared"`
//! (the problem-level weights) or an explicit array. `q` is a number or
//! `"inf"`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{Exponent, MixedNorm, NormComponent, WeightVector};
use crate::octahedron::{BlockPartition, OctahedronProduct};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(rename = "N")]
    pub n_dim: usize,
    pub blocks: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub norm: NormSpec,
    /// Optional scalar multiple of the body (default 1).
    #[serde(default)]
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSpec {
    pub components: Vec<ComponentSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub q: Exponent,
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default)]
    pub weights: ComponentWeights,
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(untagged)]
pub enum ComponentWeights {
    #[default]
    #[serde(skip)]
    SharedDefault,
    Keyword(String),
    Explicit(Vec<f64>),
}

/// Everything a width computation needs, decoded and validated.
#[derive(Debug, Clone)]
pub struct Problem {
    pub body: OctahedronProduct,
    pub norm: MixedNorm,
    pub weights: WeightVector,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::input(format!("problem JSON: {e}")))
    }

    pub fn build(&self) -> Result<Problem> {
        let dim = self.n_dim;
        if dim == 0 {
            return Err(Error::input("N must be positive"));
        }
        // 1-based indices in the document
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let mut blk = Vec::with_capacity(b.len());
            for &i in b {
                if i == 0 || i > dim {
                    return Err(Error::input(format!(
                        "block index {i} out of range 1..={dim}"
                    )));
                }
                blk.push(i - 1);
            }
            blocks.push(blk);
        }
        let partition = BlockPartition::new(blocks, dim)?;
        let weights = WeightVector::new(self.weights.clone())?;
        if weights.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: weights.len() });
        }
        let mut comps = Vec::with_capacity(self.norm.components.len());
        for c in &self.norm.components {
            let w = match &c.weights {
                ComponentWeights::SharedDefault => weights.clone(),
                ComponentWeights::Keyword(k) if k == "shared" => weights.clone(),
                ComponentWeights::Keyword(k) => {
                    return Err(Error::input(format!(
                        "unknown weights keyword {k:?}; use \"shared\" or an array"
                    )))
                }
                ComponentWeights::Explicit(v) => {
                    if c.q.is_infinite() {
                        WeightVector::new(v.clone())?
                    } else {
                        let wv = WeightVector::new(v.clone())?;
                        if wv.len() != dim {
                            return Err(Error::DimensionMismatch {
                                expected: dim,
                                got: wv.len(),
                            });
                        }
                        wv
                    }
                }
            };
            // sup components always run on unit weights
            let w = if c.q.is_infinite() { WeightVector::unit(dim) } else { w };
            comps.push(NormComponent::new(c.q, w, c.scale)?);
        }
        let norm = MixedNorm::new(comps)?;
        let body = match self.radius {
            Some(r) => OctahedronProduct::with_radius(partition, r)?,
            None => OctahedronProduct::new(partition),
        };
        Ok(Problem { body, norm, weights })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_build_minimal() {
        let text = r#"{
            "N": 4,
            "blocks": [[1, 2], [3, 4]],
            "weights": [1.0, 1.0, 1.0, 1.0],
            "norm": {"components": [{"q": 2, "scale": 1.0, "weights": "shared"}]}
        }"#;
        let spec = ProblemSpec::from_json(text).unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.body.dim(), 4);
        assert_eq!(p.body.partition().num_blocks(), 2);
        assert!((p.norm.eval(&[3.0, 4.0, 0.0, 0.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_indices() {
        let bad_key = r#"{"N": 2, "blocks": [[1,2]], "weights": [1,1],
            "norm": {"components": []}, "bogus": 1}"#;
        assert!(ProblemSpec::from_json(bad_key).is_err());
        let bad_idx = r#"{"N": 2, "blocks": [[0,1]], "weights": [1,1],
            "norm": {"components": [{"q": 2}]}}"#;
        assert!(ProblemSpec::from_json(bad_idx).unwrap().build().is_err());
    }

    #[test]
    fn sup_component_via_inf_keyword() {
        let text = r#"{
            "N": 2,
            "blocks": [[1], [2]],
            "weights": [1.0, 1.0],
            "norm": {"components": [
                {"q": 2, "weights": "shared"},
                {"q": "inf", "scale": 3.0}
            ]}
        }"#;
        let p = ProblemSpec::from_json(text).unwrap().build().unwrap();
        assert!((p.norm.eval(&[1.0, 0.0]) - 3.0).abs() < 1e-12);
        assert_eq!(p.norm.sup_component_scale(), Some(3.0));
    }
}
