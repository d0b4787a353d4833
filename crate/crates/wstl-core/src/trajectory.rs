//! Labeled trajectories, stratified splitting, and precomputed predicate
//! robustness signals.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::formula::Literal;
use crate::predicate::PredicateTable;

/// Discrete-time state sequence with a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    id: String,
    label: i8,
    states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(id: String, label: i8, states: Vec<Vec<f64>>) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::Input(alloc::format!(
                "trajectory {id}: label must be 1 or -1, got {label}"
            )));
        }
        if states.is_empty() {
            return Err(Error::Input(alloc::format!("trajectory {id}: no states")));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) {
            return Err(Error::Input(alloc::format!(
                "trajectory {id}: inconsistent state dimension"
            )));
        }
        Ok(Trajectory { id, label, states })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> i8 {
        self.label
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn state(&self, t: usize) -> &[f64] {
        &self.states[t]
    }

    /// Time horizon `H`; the trajectory has `H + 1` states.
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }
}

/// Train/test partition of a dataset, stratified by label.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<Trajectory>,
    pub test: Vec<Trajectory>,
    pub split_fraction: f64,
    pub seed: u64,
}

/// Per-label shuffled split; deterministic for a fixed seed.
pub fn stratified_split(data: &[Trajectory], fraction: f64, seed: u64) -> Result<DatasetSplit> {
    if data.is_empty() {
        return Err(Error::Input(String::from("cannot split an empty dataset")));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(alloc::format!(
            "split fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in [1i8, -1] {
        let mut class: Vec<&Trajectory> = data.iter().filter(|t| t.label() == label).collect();
        if class.is_empty() {
            log::warn!("stratified split: no trajectories with label {label}");
            continue;
        }
        class.shuffle(&mut rng);
        let n_train = libm::round(class.len() as f64 * fraction) as usize;
        let n_train = n_train.min(class.len());
        for (i, t) in class.into_iter().enumerate() {
            if i < n_train {
                train.push(t.clone());
            } else {
                test.push(t.clone());
            }
        }
    }
    Ok(DatasetSplit {
        train,
        test,
        split_fraction: fraction,
        seed,
    })
}

/// Dense robustness signals: `[trajectory][literal channel][timestep]`,
/// with `2 * N_AP` channels ordered positives first, then negations.
#[derive(Debug, Clone)]
pub struct RobustnessTensor {
    values: Vec<Vec<Vec<f64>>>,
    pub literals: Vec<Literal>,
}

impl RobustnessTensor {
    pub fn n_trajectories(&self) -> usize {
        self.values.len()
    }

    pub fn n_channels(&self) -> usize {
        self.literals.len()
    }

    /// Robustness signal of one literal channel along one trajectory.
    pub fn signal(&self, traj: usize, channel: usize) -> &[f64] {
        &self.values[traj][channel]
    }
}

/// Channel layout for a predicate subset: positives in `order`, then their
/// negations in the same order.
pub fn literal_channels(predicates: &[usize]) -> Vec<Literal> {
    predicates
        .iter()
        .map(|&p| Literal::pos(p))
        .chain(predicates.iter().map(|&p| Literal::neg(p)))
        .collect()
}

/// Evaluates every literal channel on every timestep of every trajectory.
pub fn precompute_robustness(
    data: &[Trajectory],
    table: &PredicateTable,
    literals: &[Literal],
) -> Result<RobustnessTensor> {
    let mut values = Vec::with_capacity(data.len());
    for tau in data {
        let mut per_lit = Vec::with_capacity(literals.len());
        for lit in literals {
            let spec = table.get(lit.predicate).ok_or_else(|| {
                Error::Config(alloc::format!("unknown predicate index {}", lit.predicate))
            })?;
            let signal = tau
                .states()
                .iter()
                .enumerate()
                .map(|(t, s)| {
                    spec.robustness(s, lit.negated).map_err(|e| {
                        Error::Input(alloc::format!(
                            "trajectory {} at t={t}: {e}",
                            tau.id()
                        ))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            per_lit.push(signal);
        }
        values.push(per_lit);
    }
    Ok(RobustnessTensor {
        values,
        literals: literals.to_vec(),
    })
}
