//! Dataset schema file: state dimension, named state slices, and the
//! predicate vocabulary with feature maps and normalization bounds.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use wstl_core::{DistanceTarget, Feature, PredicateSpec, PredicateTable, Trajectory};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureDecl {
    /// Raw coordinate read.
    Coord { index: usize },
    /// Euclidean distance between a named slice and another slice or a
    /// fixed point.
    Distance {
        a: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        b: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        point: Option<Vec<f64>>,
    },
    /// Negated distance, so proximity predicates fit the `f(s) >= c` form.
    NegDistance {
        a: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        b: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        point: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateDecl {
    pub id: String,
    pub feature: FeatureDecl,
    pub c: f64,
    /// Bounds of the feature over the state space; when omitted they are
    /// estimated from the dataset with a 5% margin.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inf: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub state_dim: usize,
    /// Named index ranges into the state vector, inclusive-exclusive.
    #[serde(default)]
    pub slices: BTreeMap<String, [usize; 2]>,
    pub predicates: Vec<PredicateDecl>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Schema> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let schema: Schema = serde_json::from_str(&text)
            .with_context(|| format!("parsing schema {}", path.display()))?;
        Ok(schema)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    fn slice_indices(&self, name: &str) -> Result<Vec<usize>> {
        let [start, end] = self
            .slices
            .get(name)
            .with_context(|| format!("unknown state slice '{name}'"))?;
        if start >= end || *end > self.state_dim {
            bail!("slice '{name}' range [{start}, {end}) invalid for state dimension {}", self.state_dim);
        }
        Ok((*start..*end).collect())
    }

    fn resolve_feature(&self, decl: &FeatureDecl) -> Result<Feature> {
        let build = |a: &String, b: &Option<String>, point: &Option<Vec<f64>>, negate: bool| {
            let a_idx = self.slice_indices(a)?;
            let target = match (b, point) {
                (Some(name), None) => DistanceTarget::Slice(self.slice_indices(name)?),
                (None, Some(p)) => DistanceTarget::Point(p.clone()),
                _ => bail!("distance feature needs exactly one of 'b' or 'point'"),
            };
            Ok(Feature::Distance {
                a: a_idx,
                b: target,
                negate,
            })
        };
        match decl {
            FeatureDecl::Coord { index } => {
                if *index >= self.state_dim {
                    bail!("coordinate index {index} out of range for state dimension {}", self.state_dim);
                }
                Ok(Feature::Coord { index: *index })
            }
            FeatureDecl::Distance { a, b, point } => build(a, b, point, false),
            FeatureDecl::NegDistance { a, b, point } => build(a, b, point, true),
        }
    }

    /// Resolves the declared predicates into a table. Predicates without
    /// declared bounds take min/max of the feature over `data` with a 5%
    /// margin; the returned flag list marks which ids were estimated.
    pub fn build_table(&self, data: &[Trajectory]) -> Result<(PredicateTable, Vec<String>)> {
        let mut specs = Vec::with_capacity(self.predicates.len());
        let mut estimated = Vec::new();
        for decl in &self.predicates {
            let feature = self.resolve_feature(&decl.feature)?;
            let (sup, inf) = match (decl.sup, decl.inf) {
                (Some(s), Some(i)) => (s, i),
                _ => {
                    if data.is_empty() {
                        bail!(
                            "predicate '{}' has no declared bounds and no data to estimate them",
                            decl.id
                        );
                    }
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for tau in data {
                        for s in tau.states() {
                            let v = feature
                                .eval(s)
                                .map_err(|e| anyhow::anyhow!("predicate '{}': {e}", decl.id))?;
                            lo = lo.min(v);
                            hi = hi.max(v);
                        }
                    }
                    let margin = 0.05 * (hi - lo).max(1e-9);
                    estimated.push(decl.id.clone());
                    (decl.sup.unwrap_or(hi + margin), decl.inf.unwrap_or(lo - margin))
                }
            };
            let spec = PredicateSpec::new(decl.id.clone(), feature, decl.c, sup, inf)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            specs.push(spec);
        }
        Ok((PredicateTable::new(specs), estimated))
    }
}
