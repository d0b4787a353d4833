//! Explanation simplification: predicate filtering, the iterative pruning
//! loop, and a top-k truncation baseline.

use alloc::string::String;
use alloc::vec::Vec;

use crate::agg::AggregationConfig;
use crate::error::{Error, Result};
use crate::formula::{Formula, Literal};
use crate::predicate::PredicateTable;
use crate::template::{
    self, clause_cnf, optimize, total_loss, Clause, TemplateParams, TrainConfig, TrainData,
    ZERO_WEIGHT_EPS,
};
use crate::trajectory::{literal_channels, precompute_robustness, Trajectory};

/// Fractions of trajectories on which a literal is always / sometimes /
/// never satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustnessDistribution {
    pub always_sat: f64,
    pub sometimes_sat: f64,
    pub never_sat: f64,
}

impl RobustnessDistribution {
    pub fn as_array(&self) -> [f64; 3] {
        [self.always_sat, self.sometimes_sat, self.never_sat]
    }
}

/// Simplification hyperparameters: similarity threshold for the predicate
/// filter, pruning iteration budget, and weights removed per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifyConfig {
    pub s_threshold: f64,
    pub n_prune_iters: usize,
    pub n_weights_per_prune: usize,
}

impl Default for SimplifyConfig {
    fn default() -> Self {
        SimplifyConfig {
            s_threshold: 0.99,
            n_prune_iters: 20,
            n_weights_per_prune: 1,
        }
    }
}

impl SimplifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.s_threshold) {
            return Err(Error::Config(String::from(
                "similarity threshold must lie in [-1, 1]",
            )));
        }
        if self.n_weights_per_prune == 0 {
            return Err(Error::Config(String::from(
                "weights per prune must be positive",
            )));
        }
        Ok(())
    }
}

/// Partitions `data` by whether the literal is satisfied at every step, at
/// least one step, or no step. Boundary robustness 0 counts as satisfied.
pub fn robustness_distribution(
    data: &[Trajectory],
    table: &PredicateTable,
    literal: Literal,
) -> Result<RobustnessDistribution> {
    if data.is_empty() {
        return Err(Error::Input(String::from(
            "robustness distribution of an empty dataset",
        )));
    }
    let spec = table.get(literal.predicate).ok_or_else(|| {
        Error::Config(alloc::format!(
            "unknown predicate index {}",
            literal.predicate
        ))
    })?;
    let mut counts = [0usize; 3];
    for tau in data {
        let mut any_sat = false;
        let mut all_sat = true;
        for s in tau.states() {
            let r = spec.robustness(s, literal.negated)?;
            if r >= 0.0 {
                any_sat = true;
            } else {
                all_sat = false;
            }
        }
        if all_sat {
            counts[0] += 1;
        } else if any_sat {
            counts[1] += 1;
        } else {
            counts[2] += 1;
        }
    }
    let n = data.len() as f64;
    Ok(RobustnessDistribution {
        always_sat: counts[0] as f64 / n,
        sometimes_sat: counts[1] as f64 / n,
        never_sat: counts[2] as f64 / n,
    })
}

fn cosine_similarity(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum());
    // distribution components sum to 1, so the norms are never zero
    dot / (na * nb)
}

/// Per-predicate similarity between the positive-class and negative-class
/// robustness distributions.
#[derive(Debug, Clone)]
pub struct FilterEntry {
    pub predicate: usize,
    pub positive_dist: RobustnessDistribution,
    pub negative_dist: RobustnessDistribution,
    pub similarity: f64,
    pub retained: bool,
}

#[derive(Debug, Clone)]
pub struct FilterReport {
    pub entries: Vec<FilterEntry>,
    pub retained: Vec<usize>,
}

/// Removes predicates whose satisfaction-pattern distributions are nearly
/// identical across the positive and negative classes (`S >= S_th`), and
/// their negations with them.
pub fn filter_predicates(
    data: &[Trajectory],
    table: &PredicateTable,
    predicates: &[usize],
    cfg: &SimplifyConfig,
) -> Result<FilterReport> {
    cfg.validate()?;
    let positives: Vec<Trajectory> = data.iter().filter(|t| t.label() == 1).cloned().collect();
    let negatives: Vec<Trajectory> = data.iter().filter(|t| t.label() == -1).cloned().collect();
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::Input(String::from(
            "predicate filter needs at least one positive and one negative trajectory",
        )));
    }
    let mut entries = Vec::with_capacity(predicates.len());
    let mut retained = Vec::new();
    for &p in predicates {
        let lit = Literal::pos(p);
        let dp = robustness_distribution(&positives, table, lit)?;
        let dn = robustness_distribution(&negatives, table, lit)?;
        let s = cosine_similarity(dp.as_array(), dn.as_array());
        let keep = s < cfg.s_threshold;
        if keep {
            retained.push(p);
        }
        entries.push(FilterEntry {
            predicate: p,
            positive_dist: dp,
            negative_dist: dn,
            similarity: s,
            retained: keep,
        });
    }
    Ok(FilterReport { entries, retained })
}

/// Masks all effectively-zero entries, then the `N_w` smallest remaining
/// effective weights across the concatenated F and G matrices. Ties break
/// by lexicographic (matrix, row, column) order. A step that would empty a
/// matrix skips that removal.
pub fn prune_step(params: &TemplateParams, cfg: &SimplifyConfig) -> TemplateParams {
    let mut out = params.clone();
    for clause in [Clause::F, Clause::G] {
        let eff = out.effective(clause);
        let mask = out.mask_mut(clause);
        let mut remaining = mask.iter().filter(|&&m| m).count();
        for (k, &w) in eff.iter().enumerate() {
            if mask[k] && w < ZERO_WEIGHT_EPS && remaining > 1 {
                mask[k] = false;
                remaining -= 1;
            }
        }
    }
    // smallest survivors over F || G; (clause, index) order is the tie rule
    let mut candidates: Vec<(Clause, usize, f64)> = Vec::new();
    for clause in [Clause::F, Clause::G] {
        let eff = out.effective(clause);
        for (k, &m) in out.mask(clause).iter().enumerate() {
            if m {
                candidates.push((clause, k, eff[k]));
            }
        }
    }
    candidates.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut removed = 0;
    for (clause, k, _) in candidates {
        if removed == cfg.n_weights_per_prune {
            break;
        }
        if out.active_count(clause) > 1 {
            out.mask_mut(clause)[k] = false;
            removed += 1;
        }
    }
    out
}

/// Keeps only the `k` largest effective weights across both matrices; each
/// surviving matrix renormalizes implicitly. `k` at or above the active
/// count is the identity.
pub fn topk_truncate(params: &TemplateParams, k: usize) -> TemplateParams {
    let mut out = params.clone();
    let mut entries: Vec<(Clause, usize, f64)> = Vec::new();
    for clause in [Clause::F, Clause::G] {
        let eff = out.effective(clause);
        for (i, &m) in out.mask(clause).iter().enumerate() {
            if m {
                entries.push((clause, i, eff[i]));
            }
        }
    }
    // descending by weight, ties by (matrix, row, column)
    entries.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    for (clause, i, _) in entries.into_iter().skip(k) {
        out.mask_mut(clause)[i] = false;
    }
    out
}

/// Loss and accuracy snapshot after one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageRecord {
    pub stage: String,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub active_f: usize,
    pub active_g: usize,
    /// Stage wall-clock; `None` in `no_std` builds, which have no clock.
    pub wall_clock_seconds: Option<f64>,
}

/// Final output of the explanation pipeline.
#[derive(Debug, Clone)]
pub struct Explanation {
    pub formula: Formula,
    pub params: TemplateParams,
    pub filter: FilterReport,
    pub history: Vec<StageRecord>,
    /// True when a clause matrix lost all weight and the rendered formula
    /// is missing its F or G part.
    pub incomplete: bool,
}

fn training_accuracy(params: &TemplateParams, data: &TrainData, cfg: &TrainConfig) -> Result<f64> {
    let agg = cfg.agg();
    let mut correct = 0usize;
    for i in 0..data.len() {
        let channels: Vec<&[f64]> = (0..params.n_cols())
            .map(|j| data.tensor.signal(i, j))
            .collect();
        let r = template_forward_signals_checked(params, &channels, &agg)?;
        let predicted = if r >= 0.0 { 1 } else { -1 };
        if predicted == data.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

fn template_forward_signals_checked(
    params: &TemplateParams,
    channels: &[&[f64]],
    agg: &AggregationConfig,
) -> Result<f64> {
    template::template_forward_signals(params, channels, agg)
}

/// End-to-end explanation generation: filter predicates, train the
/// template, then alternately prune and re-train until the iteration budget
/// is spent or a clause is down to one weight.
pub fn run_pipeline(
    train: &[Trajectory],
    table: &PredicateTable,
    predicates: &[usize],
    train_cfg: &TrainConfig,
    simp_cfg: &SimplifyConfig,
) -> Result<Explanation> {
    train_cfg.validate()?;
    simp_cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Input(String::from("empty training set")));
    }
    let horizon = train.iter().map(Trajectory::horizon).min().unwrap_or(0);

    let filter = filter_predicates(train, table, predicates, simp_cfg)?;
    if filter.retained.is_empty() {
        return Err(Error::Input(String::from(
            "no discriminating predicates: every predicate was filtered out",
        )));
    }

    let lits = literal_channels(&filter.retained);
    let tensor = precompute_robustness(train, table, &lits)?;
    let labels: Vec<i8> = train.iter().map(Trajectory::label).collect();
    let data = TrainData::new(tensor, labels)?;

    let mut params = TemplateParams::init(filter.retained.clone(), train_cfg.seed)?;
    let mut history = Vec::new();
    let all: Vec<usize> = (0..data.len()).collect();
    #[cfg(any(test, feature = "std"))]
    let mut stage_started = std::time::Instant::now();
    // `mut` is only exercised when the std clock is compiled in
    #[allow(unused_mut)]
    let mut record = |stage: String, p: &TemplateParams, history: &mut Vec<StageRecord>| -> Result<()> {
        #[cfg(any(test, feature = "std"))]
        let wall = {
            let w = Some(stage_started.elapsed().as_secs_f64());
            stage_started = std::time::Instant::now();
            w
        };
        #[cfg(not(any(test, feature = "std")))]
        let wall = None;
        history.push(StageRecord {
            stage,
            train_loss: total_loss(p, &data, &all, train_cfg)?,
            train_accuracy: training_accuracy(p, &data, train_cfg)?,
            active_f: p.active_count(Clause::F),
            active_g: p.active_count(Clause::G),
            wall_clock_seconds: wall,
        });
        Ok(())
    };

    params = optimize(&params, &data, train_cfg)?;
    record(String::from("optimize"), &params, &mut history)?;

    for iter in 0..simp_cfg.n_prune_iters {
        params = prune_step(&params, simp_cfg);
        // termination condition is read after pruning, before re-training
        let done =
            params.active_count(Clause::F) <= 1 || params.active_count(Clause::G) <= 1;
        params = optimize(&params, &data, train_cfg)?;
        record(alloc::format!("prune_{}", iter + 1), &params, &mut history)?;
        if done {
            break;
        }
    }

    let f_present = clause_cnf(&params, Clause::F).is_some();
    let g_present = clause_cnf(&params, Clause::G).is_some();
    let formula = template::to_formula(&params, horizon)?;
    Ok(Explanation {
        formula,
        params,
        filter,
        history,
        incomplete: !(f_present && g_present),
    })
}
