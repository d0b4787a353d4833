//! Atomic predicates `f(s) >= c` over trajectory states, with normalized
//! robustness in `[-1, 1]`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Target of a distance feature: either another state slice or a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceTarget {
    Slice(Vec<usize>),
    Point(Vec<f64>),
}

/// State-to-scalar feature map. The library is deliberately small:
/// raw coordinate reads and Euclidean distances between named slices
/// (or a slice and a fixed point), optionally negated so that proximity
/// predicates ("within radius r of the goal") fit the `f(s) >= c` form.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Coord { index: usize },
    Distance {
        a: Vec<usize>,
        b: DistanceTarget,
        negate: bool,
    },
}

impl Feature {
    /// Evaluates the feature on a single state vector.
    pub fn eval(&self, state: &[f64]) -> Result<f64> {
        match self {
            Feature::Coord { index } => state.get(*index).copied().ok_or_else(|| {
                Error::Config(alloc::format!(
                    "coordinate index {index} out of range for state dimension {}",
                    state.len()
                ))
            }),
            Feature::Distance { a, b, negate } => {
                let mut sq = 0.0;
                match b {
                    DistanceTarget::Slice(bs) => {
                        if a.len() != bs.len() {
                            return Err(Error::Config(String::from(
                                "distance feature slices have different lengths",
                            )));
                        }
                        for (&ia, &ib) in a.iter().zip(bs.iter()) {
                            let (xa, xb) = match (state.get(ia), state.get(ib)) {
                                (Some(&xa), Some(&xb)) => (xa, xb),
                                _ => {
                                    return Err(Error::Config(String::from(
                                        "distance feature index out of range",
                                    )))
                                }
                            };
                            sq += (xa - xb) * (xa - xb);
                        }
                    }
                    DistanceTarget::Point(p) => {
                        if a.len() != p.len() {
                            return Err(Error::Config(String::from(
                                "distance feature slice and point have different lengths",
                            )));
                        }
                        for (&ia, &xp) in a.iter().zip(p.iter()) {
                            let xa = *state.get(ia).ok_or_else(|| {
                                Error::Config(String::from("distance feature index out of range"))
                            })?;
                            sq += (xa - xp) * (xa - xp);
                        }
                    }
                }
                let d = libm::sqrt(sq);
                Ok(if *negate { -d } else { d })
            }
        }
    }
}

/// Atomic predicate `f(s) >= c` with the bounds of `f` over the state space,
/// used to normalize robustness into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateSpec {
    pub id: String,
    pub feature: Feature,
    pub c: f64,
    pub sup_f: f64,
    pub inf_f: f64,
}

impl PredicateSpec {
    pub fn new(id: String, feature: Feature, c: f64, sup_f: f64, inf_f: f64) -> Result<Self> {
        if !(inf_f < c && c < sup_f) {
            return Err(Error::Config(alloc::format!(
                "predicate {id}: bounds must satisfy inf_f < c < sup_f (got inf={inf_f}, c={c}, sup={sup_f})"
            )));
        }
        Ok(PredicateSpec {
            id,
            feature,
            c,
            sup_f,
            inf_f,
        })
    }

    /// Normalized robustness of the predicate on one state. Values outside
    /// the declared bounds are clamped to +-1 with a warning.
    pub fn robustness(&self, state: &[f64], negated: bool) -> Result<f64> {
        let fv = self.feature.eval(state)?;
        // both denominators are the positive magnitudes of the bound gaps,
        // so violation yields negative robustness
        let raw = if fv - self.c >= 0.0 {
            (fv - self.c) / (self.sup_f - self.c)
        } else {
            (fv - self.c) / (self.c - self.inf_f)
        };
        let r = if raw > 1.0 {
            log::warn!(
                "predicate {}: feature value {fv} outside [{}, {}], clamping robustness",
                self.id,
                self.inf_f,
                self.sup_f
            );
            1.0
        } else if raw < -1.0 {
            log::warn!(
                "predicate {}: feature value {fv} outside [{}, {}], clamping robustness",
                self.id,
                self.inf_f,
                self.sup_f
            );
            -1.0
        } else {
            raw
        };
        Ok(if negated { -r } else { r })
    }
}

/// Ordered set of predicate specs; formulas reference predicates by index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredicateTable {
    specs: Vec<PredicateSpec>,
}

impl PredicateTable {
    pub fn new(specs: Vec<PredicateSpec>) -> Self {
        PredicateTable { specs }
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&PredicateSpec> {
        self.specs.get(index)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PredicateSpec> {
        self.specs.iter()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.specs.iter().position(|p| p.id == id)
    }
}
