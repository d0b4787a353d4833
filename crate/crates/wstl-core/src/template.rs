//! The two-clause explanation template `0.5 F[CNF] /\ 0.5 G[CNF]`, its
//! score-based weight parameterization, the regularized training loss, and
//! plain gradient descent on the unconstrained scores.
//!
//! Each temporal clause owns an `N_AP x 2N_AP` matrix of distributed CNF
//! weights over the literal columns (positive predicates first, then their
//! negations). Weights are stored as unconstrained scores and mapped through
//! exponentiation plus joint normalization over the active (unmasked)
//! entries, so every effective matrix always lies on the simplex.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agg::{agg_conj, agg_disj, agg_event, agg_glob, AggregationConfig};
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::formula::{Formula, Interval, Literal};
use crate::predicate::PredicateTable;
use crate::trajectory::{RobustnessTensor, Trajectory};

/// Effective weights below this are treated as exactly zero by pruning.
pub const ZERO_WEIGHT_EPS: f64 = 1e-12;

/// Which temporal clause a matrix entry belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Clause {
    F,
    G,
}

/// Unconstrained scores plus active-entry masks for both clause matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateParams {
    n_ap: usize,
    predicates: Vec<usize>,
    scores_f: Vec<f64>,
    scores_g: Vec<f64>,
    mask_f: Vec<bool>,
    mask_g: Vec<bool>,
}

impl TemplateParams {
    /// Fresh parameters over the given predicate table indices, with all
    /// entries active and scores initialized uniformly in [-0.1, 0.1].
    pub fn init(predicates: Vec<usize>, seed: u64) -> Result<Self> {
        if predicates.is_empty() {
            return Err(Error::Config(String::from(
                "template needs at least one predicate",
            )));
        }
        let n = predicates.len();
        let size = n * 2 * n;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut scores_f = Vec::with_capacity(size);
        let mut scores_g = Vec::with_capacity(size);
        for _ in 0..size {
            scores_f.push(rng.gen_range(-0.1..0.1));
        }
        for _ in 0..size {
            scores_g.push(rng.gen_range(-0.1..0.1));
        }
        Ok(TemplateParams {
            n_ap: n,
            predicates,
            scores_f,
            scores_g,
            mask_f: alloc::vec![true; size],
            mask_g: alloc::vec![true; size],
        })
    }

    pub fn from_parts(
        predicates: Vec<usize>,
        scores_f: Vec<f64>,
        scores_g: Vec<f64>,
        mask_f: Vec<bool>,
        mask_g: Vec<bool>,
    ) -> Result<Self> {
        let n = predicates.len();
        let size = n * 2 * n;
        if scores_f.len() != size
            || scores_g.len() != size
            || mask_f.len() != size
            || mask_g.len() != size
        {
            return Err(Error::Config(String::from(
                "score/mask shapes do not match predicate count",
            )));
        }
        if !mask_f.iter().any(|&m| m) || !mask_g.iter().any(|&m| m) {
            return Err(Error::Config(String::from(
                "each clause matrix needs at least one active entry",
            )));
        }
        Ok(TemplateParams {
            n_ap: n,
            predicates,
            scores_f,
            scores_g,
            mask_f,
            mask_g,
        })
    }

    pub fn n_ap(&self) -> usize {
        self.n_ap
    }

    /// Number of literal columns (`2 * N_AP`).
    pub fn n_cols(&self) -> usize {
        2 * self.n_ap
    }

    pub fn predicates(&self) -> &[usize] {
        &self.predicates
    }

    /// Literal for column `j`: positives first, then negations.
    pub fn column_literal(&self, j: usize) -> Literal {
        if j < self.n_ap {
            Literal::pos(self.predicates[j])
        } else {
            Literal::neg(self.predicates[j - self.n_ap])
        }
    }

    /// Column order as a literal list (the tensor channel layout).
    pub fn predicate_order(&self) -> Vec<Literal> {
        (0..self.n_cols()).map(|j| self.column_literal(j)).collect()
    }

    pub fn scores(&self, clause: Clause) -> &[f64] {
        match clause {
            Clause::F => &self.scores_f,
            Clause::G => &self.scores_g,
        }
    }

    pub fn scores_mut(&mut self, clause: Clause) -> &mut [f64] {
        match clause {
            Clause::F => &mut self.scores_f,
            Clause::G => &mut self.scores_g,
        }
    }

    pub fn mask(&self, clause: Clause) -> &[bool] {
        match clause {
            Clause::F => &self.mask_f,
            Clause::G => &self.mask_g,
        }
    }

    pub fn mask_mut(&mut self, clause: Clause) -> &mut [bool] {
        match clause {
            Clause::F => &mut self.mask_f,
            Clause::G => &mut self.mask_g,
        }
    }

    pub fn active_count(&self, clause: Clause) -> usize {
        self.mask(clause).iter().filter(|&&m| m).count()
    }

    /// Effective weights of one matrix: `exp(score)` on active entries,
    /// jointly normalized to sum 1; masked entries are exactly 0.
    pub fn effective(&self, clause: Clause) -> Vec<f64> {
        let scores = self.scores(clause);
        let mask = self.mask(clause);
        // shift by the max active score; identity on the normalized ratio
        let shift = scores
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = scores
            .iter()
            .zip(mask)
            .map(|(&s, &m)| if m { libm::exp(s - shift) } else { 0.0 })
            .collect();
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            for x in &mut w {
                *x /= total;
            }
        }
        w
    }
}

/// Gradient-descent hyperparameters. `sigma` and `zeta` shape the smooth
/// semantics and classification loss; the lambdas weight the regularizers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub sigma: f64,
    pub zeta: f64,
    pub lambda_rt: f64,
    pub lambda_rd: f64,
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            sigma: 0.5,
            zeta: 1.0,
            lambda_rt: 0.01,
            lambda_rd: 0.1,
            epochs: 100,
            step_size: 1.0,
            batch_size: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config(String::from("sigma must be > 0")));
        }
        if !(self.zeta > 0.0) {
            return Err(Error::Config(String::from("zeta must be > 0")));
        }
        if self.lambda_rt < 0.0 || self.lambda_rd < 0.0 {
            return Err(Error::Config(String::from("lambdas must be >= 0")));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::Config(String::from("step size must be > 0")));
        }
        if self.batch_size == 0 {
            return Err(Error::Config(String::from("batch size must be positive")));
        }
        Ok(())
    }

    pub fn agg(&self) -> AggregationConfig {
        AggregationConfig {
            sigma: self.sigma,
            mode: crate::agg::AggMode::Smooth,
        }
    }
}

/// Labeled robustness signals ready for training: tensor rows correspond
/// 1:1 to `labels`, channels follow the template column order.
#[derive(Debug, Clone)]
pub struct TrainData {
    pub tensor: RobustnessTensor,
    pub labels: Vec<i8>,
}

impl TrainData {
    pub fn new(tensor: RobustnessTensor, labels: Vec<i8>) -> Result<Self> {
        if tensor.n_trajectories() != labels.len() {
            return Err(Error::Input(String::from(
                "tensor row count does not match label count",
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l != 1 && l != -1) {
            return Err(Error::Input(alloc::format!(
                "label must be 1 or -1, got {l}"
            )));
        }
        Ok(TrainData { tensor, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Per-clause evaluation of the distributed CNF on one trajectory's
/// channel signals: conjunction over nonzero rows (row-sum weights) of
/// disjunctions over the row's raw weights, then the temporal aggregation
/// with uniform step weights.
fn clause_value_direct(
    weights: &[f64],
    n_ap: usize,
    channels: &[&[f64]],
    horizon: usize,
    cfg: &AggregationConfig,
    clause: Clause,
) -> Result<Option<f64>> {
    let n_cols = 2 * n_ap;
    let rows: Vec<usize> = (0..n_ap)
        .filter(|&i| weights[i * n_cols..(i + 1) * n_cols].iter().sum::<f64>() > 0.0)
        .collect();
    if rows.is_empty() {
        return Ok(None);
    }
    let row_sums: Vec<f64> = rows
        .iter()
        .map(|&i| weights[i * n_cols..(i + 1) * n_cols].iter().sum())
        .collect();
    let mut inner = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let values: Vec<f64> = (0..n_cols).map(|j| channels[j][t]).collect();
        let or_vals: Vec<f64> = rows
            .iter()
            .map(|&i| agg_disj(&weights[i * n_cols..(i + 1) * n_cols], &values, cfg))
            .collect::<Result<_>>()?;
        inner.push(agg_conj(&row_sums, &or_vals, cfg)?);
    }
    let uniform = alloc::vec![1.0 / (horizon + 1) as f64; horizon + 1];
    let v = match clause {
        Clause::F => agg_event(&uniform, &inner, cfg)?,
        Clause::G => agg_glob(&uniform, &inner, cfg)?,
    };
    Ok(Some(v))
}

/// Template robustness on precomputed channel signals (one per column).
pub fn template_forward_signals(
    params: &TemplateParams,
    channels: &[&[f64]],
    cfg: &AggregationConfig,
) -> Result<f64> {
    if channels.len() != params.n_cols() {
        return Err(Error::Input(alloc::format!(
            "expected {} channels, got {}",
            params.n_cols(),
            channels.len()
        )));
    }
    let horizon = channels
        .first()
        .map(|c| c.len().saturating_sub(1))
        .ok_or_else(|| Error::Input(String::from("empty trajectory")))?;
    if channels[0].is_empty() {
        return Err(Error::Input(String::from("empty trajectory")));
    }
    let wf = params.effective(Clause::F);
    let wg = params.effective(Clause::G);
    let f_val = clause_value_direct(&wf, params.n_ap, channels, horizon, cfg, Clause::F)?;
    let g_val = clause_value_direct(&wg, params.n_ap, channels, horizon, cfg, Clause::G)?;
    match (f_val, g_val) {
        (Some(f), Some(g)) => agg_conj(&[0.5, 0.5], &[f, g], cfg),
        (Some(v), None) | (None, Some(v)) => Ok(v),
        (None, None) => Err(Error::Domain(String::from(
            "both clause matrices have zero weight",
        ))),
    }
}

/// Template robustness evaluated directly on a trajectory.
pub fn template_forward(
    params: &TemplateParams,
    table: &PredicateTable,
    tau: &Trajectory,
    cfg: &AggregationConfig,
) -> Result<f64> {
    let lits = params.predicate_order();
    let channels: Vec<Vec<f64>> = lits
        .iter()
        .map(|lit| {
            let spec = table.get(lit.predicate).ok_or_else(|| {
                Error::Config(alloc::format!("unknown predicate index {}", lit.predicate))
            })?;
            tau.states()
                .iter()
                .map(|s| spec.robustness(s, lit.negated))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&[f64]> = channels.iter().map(|c| c.as_slice()).collect();
    template_forward_signals(params, &refs, cfg)
}

/// Temporal-clause regularizer: column-mass overlap between the F and G
/// matrices, folding each predicate's positive and negated columns by max.
pub fn regularizer_t(params: &TemplateParams) -> f64 {
    let wf = params.effective(Clause::F);
    let wg = params.effective(Clause::G);
    let n = params.n_ap;
    let n_cols = 2 * n;
    let col_sum = |w: &[f64], j: usize| -> f64 { (0..n).map(|i| w[i * n_cols + j]).sum() };
    (0..n)
        .map(|j| {
            let f = f64::max(col_sum(&wf, j), col_sum(&wf, j + n));
            let g = f64::max(col_sum(&wg, j), col_sum(&wg, j + n));
            f * g
        })
        .sum()
}

/// Disjunctive-clause regularizer for one matrix: shared-column mass across
/// distinct rows.
pub fn regularizer_d(weights: &[f64], n_ap: usize) -> f64 {
    let n_cols = 2 * n_ap;
    let mut total = 0.0;
    for i in 0..n_ap {
        for j in (i + 1)..n_ap {
            for k in 0..n_cols {
                total += weights[i * n_cols + k] * weights[j * n_cols + k];
            }
        }
    }
    total
}

fn check_labels(labels: &[i8]) -> Result<()> {
    if let Some(&l) = labels.iter().find(|&&l| l != 1 && l != -1) {
        return Err(Error::Input(alloc::format!("label must be 1 or -1, got {l}")));
    }
    Ok(())
}

/// Regularized loss: batch mean of `exp(-zeta * label * robustness)` plus
/// the weighted regularizers.
pub fn total_loss(
    params: &TemplateParams,
    data: &TrainData,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::Input(String::from("empty batch")));
    }
    check_labels(&data.labels)?;
    let agg = cfg.agg();
    let mut sum = 0.0;
    for &idx in indices {
        let channels: Vec<&[f64]> = (0..params.n_cols())
            .map(|j| data.tensor.signal(idx, j))
            .collect();
        let r = template_forward_signals(params, &channels, &agg)?;
        sum += libm::exp(-cfg.zeta * data.labels[idx] as f64 * r);
    }
    let mean = sum / indices.len() as f64;
    let wf = params.effective(Clause::F);
    let wg = params.effective(Clause::G);
    Ok(mean
        + cfg.lambda_rt * regularizer_t(params)
        + cfg.lambda_rd * (regularizer_d(&wf, params.n_ap) + regularizer_d(&wg, params.n_ap)))
}

// ---------------------------------------------------------------------------
// Tape construction

/// Positions of the tape inputs within the score matrices, F entries first.
#[derive(Debug, Clone)]
pub struct ActiveLayout {
    pub entries: Vec<(Clause, usize)>,
}

struct ClauseVars {
    /// weight variable per matrix entry; `None` where masked out
    weights: Vec<Option<Var>>,
    /// active rows with their row-sum weight variables
    rows: Vec<(usize, Var)>,
}

fn record_clause_weights(
    tape: &mut Tape,
    score_vars: &[Option<Var>],
    n_ap: usize,
) -> Result<Option<ClauseVars>> {
    let active: Vec<Var> = score_vars.iter().flatten().copied().collect();
    if active.is_empty() {
        return Ok(None);
    }
    // softmax over active entries, shifted by the running max for stability
    let shift = tape.max_of(&active)?;
    let exps: Vec<Option<Var>> = score_vars
        .iter()
        .map(|sv| {
            sv.map(|s| {
                let d = tape.sub(s, shift);
                tape.exp(d)
            })
        })
        .collect();
    let all: Vec<Var> = exps.iter().flatten().copied().collect();
    let total = tape.sum(&all);
    let weights: Vec<Option<Var>> = exps
        .iter()
        .map(|ev| ev.map(|e| tape.div(e, total).expect("positive softmax denominator")))
        .collect();
    let n_cols = 2 * n_ap;
    let mut rows = Vec::new();
    for i in 0..n_ap {
        let row: Vec<Var> = weights[i * n_cols..(i + 1) * n_cols]
            .iter()
            .flatten()
            .copied()
            .collect();
        if !row.is_empty() {
            let s = tape.sum(&row);
            rows.push((i, s));
        }
    }
    Ok(Some(ClauseVars { weights, rows }))
}

/// Smooth ratio aggregation over tape variables with variable weights.
fn smooth_agg_vars(
    tape: &mut Tape,
    weights: &[Var],
    values: &[Var],
    sigma: f64,
    sign: f64,
) -> Result<Var> {
    let signed: Vec<Var> = values.iter().map(|&v| tape.scale(v, sign)).collect();
    let shift = tape.max_of(&signed)?;
    let mut nums = Vec::with_capacity(values.len());
    let mut dens = Vec::with_capacity(values.len());
    for ((&w, &v), &s) in weights.iter().zip(values).zip(&signed) {
        let d = tape.sub(s, shift);
        let scaled = tape.scale(d, 1.0 / sigma);
        let e = tape.exp(scaled);
        let we = tape.mul(w, e);
        let wer = tape.mul(we, v);
        nums.push(wer);
        dens.push(we);
    }
    let num = tape.sum(&nums);
    let den = tape.sum(&dens);
    tape.div(num, den)
}

/// Same aggregation with uniform weights, which cancel in the ratio.
fn smooth_agg_uniform(tape: &mut Tape, values: &[Var], sigma: f64, sign: f64) -> Result<Var> {
    let signed: Vec<Var> = values.iter().map(|&v| tape.scale(v, sign)).collect();
    let shift = tape.max_of(&signed)?;
    let mut nums = Vec::with_capacity(values.len());
    let mut dens = Vec::with_capacity(values.len());
    for (&v, &s) in values.iter().zip(&signed) {
        let d = tape.sub(s, shift);
        let scaled = tape.scale(d, 1.0 / sigma);
        let e = tape.exp(scaled);
        let ev = tape.mul(e, v);
        nums.push(ev);
        dens.push(e);
    }
    let num = tape.sum(&nums);
    let den = tape.sum(&dens);
    tape.div(num, den)
}

fn clause_value_tape(
    tape: &mut Tape,
    vars: &ClauseVars,
    n_ap: usize,
    channels: &[&[f64]],
    horizon: usize,
    sigma: f64,
    clause: Clause,
) -> Result<Var> {
    let n_cols = 2 * n_ap;
    let mut inner = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let mut or_vals = Vec::with_capacity(vars.rows.len());
        for &(i, _) in &vars.rows {
            // disjunction over the raw row: values are constants here, so
            // the exponential factors fold into per-entry constants
            let shift = (0..n_cols)
                .filter(|&j| vars.weights[i * n_cols + j].is_some())
                .map(|j| channels[j][t])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut nums = Vec::new();
            let mut dens = Vec::new();
            for j in 0..n_cols {
                if let Some(w) = vars.weights[i * n_cols + j] {
                    let r = channels[j][t];
                    let e = libm::exp((r - shift) / sigma);
                    nums.push(tape.scale(w, r * e));
                    dens.push(tape.scale(w, e));
                }
            }
            let num = tape.sum(&nums);
            let den = tape.sum(&dens);
            or_vals.push(tape.div(num, den)?);
        }
        let row_weights: Vec<Var> = vars.rows.iter().map(|&(_, w)| w).collect();
        inner.push(smooth_agg_vars(tape, &row_weights, &or_vals, sigma, -1.0)?);
    }
    let sign = match clause {
        Clause::F => 1.0,
        Clause::G => -1.0,
    };
    smooth_agg_uniform(tape, &inner, sigma, sign)
}

/// Records the full regularized batch loss on a fresh tape. Returns the
/// tape, the loss variable, and the layout mapping gradient components back
/// to score-matrix entries.
pub fn loss_tape(
    params: &TemplateParams,
    data: &TrainData,
    indices: &[usize],
    cfg: &TrainConfig,
) -> Result<(Tape, Var, ActiveLayout)> {
    if indices.is_empty() {
        return Err(Error::Input(String::from("empty batch")));
    }
    check_labels(&data.labels)?;
    let mut tape = Tape::new();
    let n_cols = params.n_cols();
    let size = params.n_ap * n_cols;

    let mut layout = ActiveLayout {
        entries: Vec::new(),
    };
    let mut score_vars = [
        alloc::vec![None; size],
        alloc::vec![None; size],
    ];
    for (ci, clause) in [Clause::F, Clause::G].into_iter().enumerate() {
        let scores = params.scores(clause);
        let mask = params.mask(clause);
        for k in 0..size {
            if mask[k] {
                score_vars[ci][k] = Some(tape.input(scores[k]));
                layout.entries.push((clause, k));
            }
        }
    }

    let clause_f = record_clause_weights(&mut tape, &score_vars[0], params.n_ap)?;
    let clause_g = record_clause_weights(&mut tape, &score_vars[1], params.n_ap)?;

    let mut terms = Vec::with_capacity(indices.len());
    for &idx in indices {
        let channels: Vec<&[f64]> = (0..n_cols).map(|j| data.tensor.signal(idx, j)).collect();
        let horizon = channels[0].len() - 1;
        let f_val = clause_f
            .as_ref()
            .map(|cv| {
                clause_value_tape(
                    &mut tape,
                    cv,
                    params.n_ap,
                    &channels,
                    horizon,
                    cfg.sigma,
                    Clause::F,
                )
            })
            .transpose()?;
        let g_val = clause_g
            .as_ref()
            .map(|cv| {
                clause_value_tape(
                    &mut tape,
                    cv,
                    params.n_ap,
                    &channels,
                    horizon,
                    cfg.sigma,
                    Clause::G,
                )
            })
            .transpose()?;
        let r = match (f_val, g_val) {
            (Some(f), Some(g)) => {
                let half_f = tape.constant(0.5);
                let half_g = tape.constant(0.5);
                smooth_agg_vars(&mut tape, &[half_f, half_g], &[f, g], cfg.sigma, -1.0)?
            }
            (Some(v), None) | (None, Some(v)) => v,
            (None, None) => {
                return Err(Error::Domain(String::from(
                    "both clause matrices have zero weight",
                )))
            }
        };
        let scaled = tape.scale(r, -cfg.zeta * data.labels[idx] as f64);
        terms.push(tape.exp(scaled));
    }
    let total = tape.sum(&terms);
    let mut loss = tape.scale(total, 1.0 / indices.len() as f64);

    // R_T over effective weights of both matrices
    if cfg.lambda_rt > 0.0 {
        if let (Some(cf), Some(cg)) = (&clause_f, &clause_g) {
            let col_mass = |tape: &mut Tape, cv: &ClauseVars, j: usize| -> Var {
                let col: Vec<Var> = (0..params.n_ap)
                    .filter_map(|i| cv.weights[i * n_cols + j])
                    .collect();
                tape.sum(&col)
            };
            let mut rt_terms = Vec::with_capacity(params.n_ap);
            for j in 0..params.n_ap {
                let f_pos = col_mass(&mut tape, cf, j);
                let f_neg = col_mass(&mut tape, cf, j + params.n_ap);
                let g_pos = col_mass(&mut tape, cg, j);
                let g_neg = col_mass(&mut tape, cg, j + params.n_ap);
                let f_max = tape.max(f_pos, f_neg);
                let g_max = tape.max(g_pos, g_neg);
                rt_terms.push(tape.mul(f_max, g_max));
            }
            let rt = tape.sum(&rt_terms);
            let rt_scaled = tape.scale(rt, cfg.lambda_rt);
            loss = tape.add(loss, rt_scaled);
        }
    }

    // R_D per matrix
    if cfg.lambda_rd > 0.0 {
        for cv in [&clause_f, &clause_g].into_iter().flatten() {
            let mut rd_terms = Vec::new();
            for i in 0..params.n_ap {
                for j in (i + 1)..params.n_ap {
                    for k in 0..n_cols {
                        if let (Some(a), Some(b)) =
                            (cv.weights[i * n_cols + k], cv.weights[j * n_cols + k])
                        {
                            rd_terms.push(tape.mul(a, b));
                        }
                    }
                }
            }
            if !rd_terms.is_empty() {
                let rd = tape.sum(&rd_terms);
                let rd_scaled = tape.scale(rd, cfg.lambda_rd);
                loss = tape.add(loss, rd_scaled);
            }
        }
    }

    Ok((tape, loss, layout))
}

/// Plain gradient descent on the active scores. Shuffling and batching are
/// seeded and deterministic; the returned parameters are the best (lowest
/// full-training-loss) iterate seen, so the result never regresses below
/// the initial loss.
pub fn optimize(params: &TemplateParams, data: &TrainData, cfg: &TrainConfig) -> Result<TemplateParams> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Input(String::from("empty training set")));
    }
    let all: Vec<usize> = (0..data.len()).collect();
    let mut current = params.clone();
    let mut best = params.clone();
    let mut best_loss = total_loss(&current, data, &all, cfg)?;
    if !best_loss.is_finite() {
        return Err(Error::NonFinite { epoch: 0, batch: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = all.clone();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let (tape, loss, layout) = loss_tape(&current, data, chunk, cfg)?;
            if !tape.value(loss).is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            let grad = tape.gradient(loss);
            for (g, &(clause, k)) in grad.iter().zip(&layout.entries) {
                current.scores_mut(clause)[k] -= cfg.step_size * g;
            }
        }
        let full = total_loss(&current, data, &all, cfg)?;
        if !full.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                batch: usize::MAX,
            });
        }
        if full < best_loss {
            best_loss = full;
            best = current.clone();
        }
    }
    Ok(best)
}

/// Builds the nested two-clause formula described by the current effective
/// weights, dropping zero-weight literals and zero-sum rows. Returns `None`
/// for a clause whose matrix has no active weight.
pub fn to_formula(params: &TemplateParams, horizon: usize) -> Result<Formula> {
    let interval = Interval::new(0, horizon)?;
    let mut clauses = Vec::new();
    let mut weights = Vec::new();
    for clause in [Clause::F, Clause::G] {
        if let Some(cnf) = clause_cnf(params, clause) {
            let inner = cnf.to_formula()?;
            let node = match clause {
                Clause::F => Formula::eventually_uniform(interval, inner),
                Clause::G => Formula::globally_uniform(interval, inner),
            };
            clauses.push(node);
            weights.push(0.5);
        }
    }
    match clauses.len() {
        0 => Err(Error::Structure(String::from(
            "no active weights in either clause",
        ))),
        1 => Ok(clauses.pop().expect("one clause")),
        _ => Ok(Formula::And {
            weights,
            children: clauses,
        }),
    }
}

/// Distributed CNF view of one clause matrix (zero entries dropped), or
/// `None` if the matrix carries no weight.
pub fn clause_cnf(params: &TemplateParams, clause: Clause) -> Option<crate::formula::DistributedCnf> {
    let w = params.effective(clause);
    let n_cols = params.n_cols();
    let mut rows = Vec::new();
    for i in 0..params.n_ap {
        let row: Vec<(Literal, f64)> = (0..n_cols)
            .filter(|&j| w[i * n_cols + j] > ZERO_WEIGHT_EPS)
            .map(|j| (params.column_literal(j), w[i * n_cols + j]))
            .collect();
        if !row.is_empty() {
            rows.push(row);
        }
    }
    if rows.is_empty() {
        None
    } else {
        Some(crate::formula::DistributedCnf { rows })
    }
}
