//! Accuracy plus the three explainability scores: conciseness, consistency,
//! and strictness.
//!
//! Explanations are scored per "expected temporal clause" slot; here the
//! template expects one F (task) clause and one G (constraint) clause, so
//! `N = 2`. A missing clause contributes 0 to every metric.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::agg::AggregationConfig;
use crate::error::{Error, Result};
use crate::formula::{Formula, Literal};
use crate::predicate::PredicateTable;
use crate::trajectory::Trajectory;

/// Kind tag for an expected temporal clause slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClauseKind {
    F,
    G,
}

/// Weight-stripped view of one temporal clause: CNF as a set of sets of
/// signed literals. `present = false` encodes a missing slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseView {
    pub kind: ClauseKind,
    pub literal_clauses: BTreeSet<BTreeSet<Literal>>,
    pub present: bool,
}

impl ClauseView {
    pub fn absent(kind: ClauseKind) -> Self {
        ClauseView {
            kind,
            literal_clauses: BTreeSet::new(),
            present: false,
        }
    }

    /// Number of literal occurrences (`m_n`); duplicates across clauses
    /// count separately.
    pub fn literal_count(&self) -> usize {
        self.literal_clauses.iter().map(BTreeSet::len).sum()
    }

    /// Binary conjunction count `C_n`: k clauses contribute k - 1.
    pub fn conjunction_count(&self) -> usize {
        self.literal_clauses.len().saturating_sub(1)
    }

    /// Binary disjunction count `D_n`: a k-literal clause contributes k - 1.
    pub fn disjunction_count(&self) -> usize {
        self.literal_clauses
            .iter()
            .map(|c| c.len().saturating_sub(1))
            .sum()
    }
}

fn collect_literals(phi: &Formula, negated: bool, out: &mut BTreeSet<Literal>) -> Result<()> {
    match phi {
        Formula::Literal(l) => {
            let lit = if negated { l.negate() } else { *l };
            out.insert(lit);
            Ok(())
        }
        Formula::Not(c) => collect_literals(c, !negated, out),
        Formula::Or { children, weights } => {
            for (c, &w) in children.iter().zip(weights) {
                if w > 0.0 {
                    collect_literals(c, negated, out)?;
                }
            }
            Ok(())
        }
        _ => Err(Error::Structure(String::from(
            "temporal clause body must be a CNF over literals",
        ))),
    }
}

fn cnf_view(kind: ClauseKind, body: &Formula) -> Result<ClauseView> {
    let mut clauses = BTreeSet::new();
    match body {
        Formula::And { children, weights } => {
            for (c, &w) in children.iter().zip(weights) {
                if w > 0.0 {
                    let mut lits = BTreeSet::new();
                    collect_literals(c, false, &mut lits)?;
                    clauses.insert(lits);
                }
            }
        }
        other => {
            let mut lits = BTreeSet::new();
            collect_literals(other, false, &mut lits)?;
            clauses.insert(lits);
        }
    }
    Ok(ClauseView {
        kind,
        literal_clauses: clauses,
        present: true,
    })
}

/// Splits an explanation into its expected F and G clause slots, stripping
/// all weights (the STL counterpart). Zero-weight children are dropped;
/// missing slots come back absent.
pub fn stl_counterpart(phi: &Formula) -> Result<(ClauseView, ClauseView)> {
    let mut f_view = ClauseView::absent(ClauseKind::F);
    let mut g_view = ClauseView::absent(ClauseKind::G);
    let mut assign = |node: &Formula| -> Result<()> {
        match node {
            Formula::Eventually { child, .. } => {
                f_view = cnf_view(ClauseKind::F, child)?;
                Ok(())
            }
            Formula::Globally { child, .. } => {
                g_view = cnf_view(ClauseKind::G, child)?;
                Ok(())
            }
            _ => Err(Error::Structure(String::from(
                "expected a temporal clause at the top level",
            ))),
        }
    };
    match phi {
        Formula::And { children, weights } => {
            for (c, &w) in children.iter().zip(weights) {
                if w > 0.0 {
                    assign(c)?;
                }
            }
        }
        other => assign(other)?,
    }
    Ok((f_view, g_view))
}

/// Fraction of trajectories whose sign of robustness at `t = 0` matches the
/// label; robustness exactly 0 classifies as positive.
pub fn accuracy<R>(mut robustness_fn: R, test: &[Trajectory]) -> Result<f64>
where
    R: FnMut(&Trajectory) -> Result<f64>,
{
    if test.is_empty() {
        return Err(Error::Input(String::from("empty evaluation set")));
    }
    let mut correct = 0usize;
    for tau in test {
        let r = robustness_fn(tau)?;
        let predicted = if r >= 0.0 { 1 } else { -1 };
        if predicted == tau.label() {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Accuracy of a formula classifier evaluated at `t = 0`.
pub fn accuracy_formula(
    phi: &Formula,
    table: &PredicateTable,
    test: &[Trajectory],
    cfg: &AggregationConfig,
) -> Result<f64> {
    accuracy(
        |tau| crate::formula::robustness(phi, table, tau, 0, cfg),
        test,
    )
}

/// Mean inverse literal count over the expected clause slots.
pub fn conciseness(views: &[ClauseView]) -> f64 {
    if views.is_empty() {
        return 0.0;
    }
    let sum: f64 = views
        .iter()
        .map(|v| {
            let m = v.literal_count();
            if v.present && m > 0 {
                1.0 / m as f64
            } else {
                0.0
            }
        })
        .sum();
    sum / views.len() as f64
}

/// Structural agreement across `K` runs. For each slot the unique non-empty
/// weight-stripped clauses form the alphabet; the score is the modal count
/// over `K * |alphabet|`, averaged over slots.
pub fn consistency(runs: &[Vec<ClauseView>], expected_n: usize) -> f64 {
    if runs.is_empty() || expected_n == 0 {
        return 0.0;
    }
    let k = runs.len() as f64;
    let mut total = 0.0;
    for n in 0..expected_n {
        let counterparts: Vec<&ClauseView> = runs
            .iter()
            .filter_map(|r| r.get(n))
            .filter(|v| v.present)
            .collect();
        let mut alphabet: Vec<(&ClauseView, usize)> = Vec::new();
        for v in &counterparts {
            match alphabet
                .iter_mut()
                .find(|(u, _)| u.literal_clauses == v.literal_clauses)
            {
                Some((_, c)) => *c += 1,
                None => alphabet.push((v, 1)),
            }
        }
        if alphabet.is_empty() {
            continue;
        }
        let modal = alphabet.iter().map(|&(_, c)| c).max().unwrap_or(0) as f64;
        total += modal / (k * alphabet.len() as f64);
    }
    total / expected_n as f64
}

/// Mean of `1 / (P - C_n + D_n)` over present slots; `P` is the number of
/// potentially present predicates (post-filter `2 * N_AP` here).
pub fn strictness(views: &[ClauseView], p: usize) -> Result<f64> {
    if views.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for v in views {
        if !v.present {
            continue;
        }
        let c = v.conjunction_count();
        let d = v.disjunction_count();
        let denom = p as i64 - c as i64 + d as i64;
        if denom <= 0 {
            return Err(Error::Structure(alloc::format!(
                "strictness denominator P - C + D = {denom} is not positive"
            )));
        }
        sum += 1.0 / denom as f64;
    }
    Ok(sum / views.len() as f64)
}
