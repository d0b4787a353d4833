//! Weighted STL syntax trees and recursive robustness evaluation.
//!
//! Grammar: `True | literal | not phi | and^w | or^w | G_I^w | F_I^w`.
//! Every conjunction/disjunction carries one weight per child and every
//! temporal node one weight per interval step; each weight vector is
//! normalized to sum 1.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::agg::{agg_conj, agg_disj, agg_event, agg_glob, AggregationConfig};
use crate::error::{Error, Result};
use crate::predicate::PredicateTable;
use crate::trajectory::Trajectory;

pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Closed discrete-time interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    a: usize,
    b: usize,
}

impl Interval {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a > b {
            return Err(Error::Config(alloc::format!(
                "interval bounds must satisfy a <= b (got [{a}, {b}])"
            )));
        }
        Ok(Interval { a, b })
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Number of timesteps in the interval (always positive).
    pub fn len(&self) -> usize {
        self.b - self.a + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> impl Iterator<Item = usize> {
        self.a..=self.b
    }
}

/// Possibly negated reference to a predicate in a [`PredicateTable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Literal {
    pub predicate: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(predicate: usize) -> Self {
        Literal {
            predicate,
            negated: false,
        }
    }

    pub fn neg(predicate: usize) -> Self {
        Literal {
            predicate,
            negated: true,
        }
    }

    pub fn negate(self) -> Self {
        Literal {
            predicate: self.predicate,
            negated: !self.negated,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    Literal(Literal),
    Not(Box<Formula>),
    And {
        weights: Vec<f64>,
        children: Vec<Formula>,
    },
    Or {
        weights: Vec<f64>,
        children: Vec<Formula>,
    },
    Globally {
        interval: Interval,
        weights: Vec<f64>,
        child: Box<Formula>,
    },
    Eventually {
        interval: Interval,
        weights: Vec<f64>,
        child: Box<Formula>,
    },
}

fn check_weights(weights: &[f64], expected: usize, what: &str) -> Result<()> {
    if weights.len() != expected {
        return Err(Error::Structure(alloc::format!(
            "{what}: expected {expected} weights, got {}",
            weights.len()
        )));
    }
    let mut sum = 0.0;
    for &w in weights {
        if w < 0.0 || w > 1.0 + WEIGHT_SUM_TOL {
            return Err(Error::Structure(alloc::format!(
                "{what}: weight {w} outside [0, 1]"
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Structure(alloc::format!(
            "{what}: weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl Formula {
    /// Normalized conjunction; validates the weight vector.
    pub fn and(weights: Vec<f64>, children: Vec<Formula>) -> Result<Formula> {
        check_weights(&weights, children.len(), "conjunction")?;
        Ok(Formula::And { weights, children })
    }

    /// Normalized disjunction; validates the weight vector.
    pub fn or(weights: Vec<f64>, children: Vec<Formula>) -> Result<Formula> {
        check_weights(&weights, children.len(), "disjunction")?;
        Ok(Formula::Or { weights, children })
    }

    /// Globally over `interval` with uniform step weights.
    pub fn globally_uniform(interval: Interval, child: Formula) -> Formula {
        let n = interval.len();
        Formula::Globally {
            interval,
            weights: alloc::vec![1.0 / n as f64; n],
            child: Box::new(child),
        }
    }

    /// Eventually over `interval` with uniform step weights.
    pub fn eventually_uniform(interval: Interval, child: Formula) -> Formula {
        let n = interval.len();
        Formula::Eventually {
            interval,
            weights: alloc::vec![1.0 / n as f64; n],
            child: Box::new(child),
        }
    }

    /// Recursively validates weight normalization and vector lengths.
    pub fn validate(&self) -> Result<()> {
        match self {
            Formula::True | Formula::Literal(_) => Ok(()),
            Formula::Not(c) => c.validate(),
            Formula::And { weights, children } => {
                check_weights(weights, children.len(), "conjunction")?;
                children.iter().try_for_each(Formula::validate)
            }
            Formula::Or { weights, children } => {
                check_weights(weights, children.len(), "disjunction")?;
                children.iter().try_for_each(Formula::validate)
            }
            Formula::Globally {
                interval,
                weights,
                child,
            } => {
                check_weights(weights, interval.len(), "globally")?;
                child.validate()
            }
            Formula::Eventually {
                interval,
                weights,
                child,
            } => {
                check_weights(weights, interval.len(), "eventually")?;
                child.validate()
            }
        }
    }

    /// Largest time offset the formula can reach relative to its evaluation
    /// time; used to check trajectory horizons up front.
    pub fn max_extent(&self) -> usize {
        match self {
            Formula::True | Formula::Literal(_) => 0,
            Formula::Not(c) => c.max_extent(),
            Formula::And { children, .. } | Formula::Or { children, .. } => {
                children.iter().map(Formula::max_extent).max().unwrap_or(0)
            }
            Formula::Globally {
                interval, child, ..
            }
            | Formula::Eventually {
                interval, child, ..
            } => interval.b() + child.max_extent(),
        }
    }
}

/// Recursive quantitative robustness of `phi` on `tau` at timestep `t`.
pub fn robustness(
    phi: &Formula,
    table: &PredicateTable,
    tau: &Trajectory,
    t: usize,
    cfg: &AggregationConfig,
) -> Result<f64> {
    if t + phi.max_extent() > tau.horizon() {
        return Err(Error::Input(alloc::format!(
            "formula extent {} at t={t} exceeds trajectory horizon {}",
            phi.max_extent(),
            tau.horizon()
        )));
    }
    eval(phi, table, tau, t, cfg)
}

fn eval(
    phi: &Formula,
    table: &PredicateTable,
    tau: &Trajectory,
    t: usize,
    cfg: &AggregationConfig,
) -> Result<f64> {
    match phi {
        Formula::True => Ok(1.0),
        Formula::Literal(lit) => {
            let spec = table.get(lit.predicate).ok_or_else(|| {
                Error::Config(alloc::format!("unknown predicate index {}", lit.predicate))
            })?;
            spec.robustness(tau.state(t), lit.negated)
        }
        Formula::Not(c) => Ok(-eval(c, table, tau, t, cfg)?),
        Formula::And { weights, children } => {
            let vals = children
                .iter()
                .map(|c| eval(c, table, tau, t, cfg))
                .collect::<Result<Vec<_>>>()?;
            agg_conj(weights, &vals, cfg)
        }
        Formula::Or { weights, children } => {
            let vals = children
                .iter()
                .map(|c| eval(c, table, tau, t, cfg))
                .collect::<Result<Vec<_>>>()?;
            agg_disj(weights, &vals, cfg)
        }
        Formula::Globally {
            interval,
            weights,
            child,
        } => {
            let vals = interval
                .steps()
                .map(|k| eval(child, table, tau, t + k, cfg))
                .collect::<Result<Vec<_>>>()?;
            agg_glob(weights, &vals, cfg)
        }
        Formula::Eventually {
            interval,
            weights,
            child,
        } => {
            let vals = interval
                .steps()
                .map(|k| eval(child, table, tau, t + k, cfg))
                .collect::<Result<Vec<_>>>()?;
            agg_event(weights, &vals, cfg)
        }
    }
}

/// CNF with clause weights pushed into the literal weights
/// (`w_ij~ = w_i * w_ij`); the flattened weights sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributedCnf {
    /// One row per disjunctive clause: `(literal, distributed weight)`.
    pub rows: Vec<Vec<(Literal, f64)>>,
}

impl DistributedCnf {
    pub fn total_weight(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().map(|&(_, w)| w))
            .sum()
    }

    /// Rebuilds the nested CNF formula with clause weights equal to row sums
    /// and each disjunction normalized by its row sum. Rows with zero sum are
    /// dropped.
    pub fn to_formula(&self) -> Result<Formula> {
        let mut clause_weights = Vec::new();
        let mut clauses = Vec::new();
        for row in &self.rows {
            let row_sum: f64 = row.iter().map(|&(_, w)| w).sum();
            if row_sum == 0.0 {
                continue;
            }
            let (lits, ws): (Vec<_>, Vec<_>) = row
                .iter()
                .map(|&(l, w)| (Formula::Literal(l), w / row_sum))
                .unzip();
            clauses.push(Formula::Or {
                weights: ws,
                children: lits,
            });
            clause_weights.push(row_sum);
        }
        if clauses.is_empty() {
            return Err(Error::Structure(String::from(
                "distributed CNF has no nonzero rows",
            )));
        }
        Ok(Formula::And {
            weights: clause_weights,
            children: clauses,
        })
    }
}

/// Pushes normalized conjunction weights into the disjunction weights of a
/// nested CNF (a weighted conjunction of weighted disjunctions of literals).
pub fn distribute_weights(phi: &Formula) -> Result<DistributedCnf> {
    let (outer_weights, clauses) = match phi {
        Formula::And { weights, children } => (weights, children),
        _ => {
            return Err(Error::Structure(String::from(
                "weight distribution requires a conjunction of disjunctions",
            )))
        }
    };
    phi.validate()?;
    let mut rows = Vec::with_capacity(clauses.len());
    for (clause, &wi) in clauses.iter().zip(outer_weights) {
        let row = match clause {
            Formula::Or { weights, children } => children
                .iter()
                .zip(weights)
                .map(|(c, &wij)| match c {
                    Formula::Literal(l) => Ok((*l, wi * wij)),
                    _ => Err(Error::Structure(String::from(
                        "CNF clause children must be literals",
                    ))),
                })
                .collect::<Result<Vec<_>>>()?,
            Formula::Literal(l) => alloc::vec![(*l, wi)],
            _ => {
                return Err(Error::Structure(String::from(
                    "CNF clauses must be disjunctions of literals",
                )))
            }
        };
        rows.push(row);
    }
    Ok(DistributedCnf { rows })
}

/// Deterministic text rendering in the style `0.50F[1.00 psi_goal] /\ ...`.
///
/// Zero-weight children are omitted, weights are rounded to `decimals`
/// places, literals are sorted by predicate id within each clause, and
/// clauses sort lexicographically.
pub fn to_canonical_string(phi: &Formula, table: &PredicateTable, decimals: usize) -> String {
    render(phi, table, decimals)
}

fn fmt_weight(w: f64, decimals: usize) -> String {
    alloc::format!("{w:.decimals$}")
}

fn literal_name(lit: &Literal, table: &PredicateTable) -> String {
    let id = table
        .get(lit.predicate)
        .map(|p| p.id.as_str())
        .unwrap_or("?");
    if lit.negated {
        alloc::format!("¬ψ_{id}")
    } else {
        alloc::format!("ψ_{id}")
    }
}

fn render_weighted(
    weights: &[f64],
    children: &[Formula],
    sep: &str,
    table: &PredicateTable,
    decimals: usize,
) -> String {
    // literals sort by (predicate id, negation); other children by rendering
    let mut parts: Vec<(String, String)> = children
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(c, &w)| {
            let text =
                alloc::format!("{} {}", fmt_weight(w, decimals), render(c, table, decimals));
            let key = match c {
                Formula::Literal(l) => {
                    let id = table.get(l.predicate).map(|p| p.id.as_str()).unwrap_or("?");
                    alloc::format!("{id}|{}", l.negated as u8)
                }
                _ => text.clone(),
            };
            (key, text)
        })
        .collect();
    parts.sort();
    parts
        .into_iter()
        .map(|(_, t)| t)
        .collect::<Vec<_>>()
        .join(sep)
}

fn render(phi: &Formula, table: &PredicateTable, decimals: usize) -> String {
    match phi {
        Formula::True => String::from("⊤"),
        Formula::Literal(l) => literal_name(l, table),
        Formula::Not(c) => alloc::format!("¬({})", render(c, table, decimals)),
        Formula::And { weights, children } => {
            render_weighted(weights, children, " ∧ ", table, decimals)
        }
        Formula::Or { weights, children } => {
            alloc::format!("({})", render_weighted(weights, children, " ∨ ", table, decimals))
        }
        Formula::Globally { child, .. } => alloc::format!("G[{}]", render(child, table, decimals)),
        Formula::Eventually { child, .. } => alloc::format!("F[{}]", render(child, table, decimals)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::{Feature, PredicateSpec};
    use alloc::vec;
    use proptest::prelude::*;

    fn table() -> PredicateTable {
        PredicateTable::new(vec![
            PredicateSpec::new("a".into(), Feature::Coord { index: 0 }, 0.0, 1.0, -1.0).unwrap(),
            PredicateSpec::new("b".into(), Feature::Coord { index: 1 }, 0.0, 1.0, -1.0).unwrap(),
        ])
    }

    fn cfg() -> AggregationConfig {
        AggregationConfig::smooth(0.5).unwrap()
    }

    fn traj(states: Vec<Vec<f64>>) -> Trajectory {
        Trajectory::new("t".into(), 1, states).unwrap()
    }

    #[test]
    fn true_is_top() {
        let tau = traj(vec![vec![0.0, 0.0]]);
        assert_eq!(
            robustness(&Formula::True, &table(), &tau, 0, &cfg()).unwrap(),
            1.0
        );
    }

    #[test]
    fn globally_of_constant_signal() {
        let tau = traj(vec![vec![0.2, 0.0]; 4]);
        let phi = Formula::globally_uniform(
            Interval::new(0, 3).unwrap(),
            Formula::Literal(Literal::pos(0)),
        );
        let v = robustness(&phi, &table(), &tau, 0, &cfg()).unwrap();
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn horizon_overrun_is_error() {
        let tau = traj(vec![vec![0.0, 0.0]; 2]);
        let phi = Formula::eventually_uniform(
            Interval::new(0, 5).unwrap(),
            Formula::Literal(Literal::pos(0)),
        );
        assert!(matches!(
            robustness(&phi, &table(), &tau, 0, &cfg()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn negation_involution() {
        let tau = traj(vec![vec![0.3, -0.6]; 3]);
        let inner = Formula::and(
            vec![0.4, 0.6],
            vec![
                Formula::Literal(Literal::pos(0)),
                Formula::Literal(Literal::neg(1)),
            ],
        )
        .unwrap();
        let phi = Formula::Not(Box::new(Formula::Not(Box::new(inner.clone()))));
        let t = table();
        assert_eq!(
            robustness(&phi, &t, &tau, 0, &cfg()).unwrap(),
            robustness(&inner, &t, &tau, 0, &cfg()).unwrap()
        );
    }

    // independent recursive evaluator used as an oracle for the 3-step
    // mixed-template case; written against the ratio formulas directly
    fn oracle_soft(sign: f64, w: &[f64], r: &[f64], sigma: f64) -> f64 {
        let num: f64 = w
            .iter()
            .zip(r)
            .map(|(&w, &r)| w * r * libm::exp(sign * r / sigma))
            .sum();
        let den: f64 = w
            .iter()
            .zip(r)
            .map(|(&w, &r)| w * libm::exp(sign * r / sigma))
            .sum();
        num / den
    }

    #[test]
    fn mixed_template_matches_hand_evaluation() {
        let tau = traj(vec![vec![0.5, 0.0], vec![-0.25, 0.0], vec![0.75, 0.0]]);
        let psi = Formula::Literal(Literal::pos(0));
        let iv = Interval::new(0, 2).unwrap();
        let phi = Formula::and(
            vec![0.5, 0.5],
            vec![
                Formula::eventually_uniform(iv, psi.clone()),
                Formula::globally_uniform(iv, psi),
            ],
        )
        .unwrap();
        let sigma = 0.5;
        let r = [0.5, -0.25, 0.75];
        let w = [1.0 / 3.0; 3];
        let f_val = oracle_soft(1.0, &w, &r, sigma);
        let g_val = oracle_soft(-1.0, &w, &r, sigma);
        let expect = oracle_soft(-1.0, &[0.5, 0.5], &[f_val, g_val], sigma);
        let got = robustness(&phi, &table(), &tau, 0, &cfg()).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn distribute_identity_outer() {
        let phi = Formula::and(
            vec![1.0],
            vec![Formula::or(
                vec![0.3, 0.7],
                vec![
                    Formula::Literal(Literal::pos(0)),
                    Formula::Literal(Literal::neg(1)),
                ],
            )
            .unwrap()],
        )
        .unwrap();
        let d = distribute_weights(&phi).unwrap();
        assert_eq!(d.rows.len(), 1);
        assert!((d.rows[0][0].1 - 0.3).abs() < 1e-12);
        assert!((d.rows[0][1].1 - 0.7).abs() < 1e-12);
    }

    #[test]
    fn distribute_products() {
        let phi = Formula::and(
            vec![0.5, 0.5],
            vec![
                Formula::or(vec![1.0], vec![Formula::Literal(Literal::pos(0))]).unwrap(),
                Formula::or(
                    vec![0.4, 0.6],
                    vec![
                        Formula::Literal(Literal::pos(1)),
                        Formula::Literal(Literal::neg(0)),
                    ],
                )
                .unwrap(),
            ],
        )
        .unwrap();
        let d = distribute_weights(&phi).unwrap();
        assert!((d.rows[0][0].1 - 0.5).abs() < 1e-12);
        assert!((d.rows[1][0].1 - 0.2).abs() < 1e-12);
        assert!((d.rows[1][1].1 - 0.3).abs() < 1e-12);
        assert!((d.total_weight() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn distribute_rejects_non_cnf() {
        let phi = Formula::eventually_uniform(
            Interval::new(0, 1).unwrap(),
            Formula::Literal(Literal::pos(0)),
        );
        assert!(matches!(
            distribute_weights(&phi),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn canonical_rendering() {
        let iv = Interval::new(0, 2).unwrap();
        let f_clause = Formula::eventually_uniform(
            iv,
            Formula::or(vec![1.0], vec![Formula::Literal(Literal::pos(0))]).unwrap(),
        );
        let g_clause = Formula::globally_uniform(
            iv,
            Formula::or(
                vec![0.7, 0.3],
                vec![
                    Formula::Literal(Literal::neg(1)),
                    Formula::Literal(Literal::pos(0)),
                ],
            )
            .unwrap(),
        );
        let phi = Formula::and(vec![0.5, 0.5], vec![f_clause, g_clause]).unwrap();
        let s = to_canonical_string(&phi, &table(), 2);
        assert_eq!(s, "0.50 F[(1.00 ψ_a)] ∧ 0.50 G[(0.30 ψ_a ∨ 0.70 ¬ψ_b)]");
        // determinism: structural equality gives byte-identical renderings
        assert_eq!(s, to_canonical_string(&phi.clone(), &table(), 2));
    }

    #[test]
    fn canonical_omits_zero_weights() {
        let phi = Formula::or(
            vec![1.0, 0.0],
            vec![
                Formula::Literal(Literal::pos(0)),
                Formula::Literal(Literal::pos(1)),
            ],
        )
        .unwrap();
        let s = to_canonical_string(&phi, &table(), 2);
        assert!(!s.contains("ψ_b"), "{s}");
    }

    proptest! {
        #[test]
        fn distributed_weights_sum_to_one(
            rows in proptest::collection::vec(
                proptest::collection::vec(1e-3f64..1.0, 1..5), 1..5),
            outer_raw in proptest::collection::vec(1e-3f64..1.0, 5),
        ) {
            let n = rows.len();
            let outer_sum: f64 = outer_raw[..n].iter().sum();
            let outer: Vec<f64> = outer_raw[..n].iter().map(|w| w / outer_sum).collect();
            let clauses: Vec<Formula> = rows
                .iter()
                .map(|raw| {
                    let s: f64 = raw.iter().sum();
                    Formula::Or {
                        weights: raw.iter().map(|w| w / s).collect(),
                        children: raw
                            .iter()
                            .enumerate()
                            .map(|(j, _)| Formula::Literal(Literal::pos(j % 2)))
                            .collect(),
                    }
                })
                .collect();
            let phi = Formula::And { weights: outer, children: clauses };
            let d = distribute_weights(&phi).unwrap();
            prop_assert!((d.total_weight() - 1.0).abs() < 1e-9);
        }
    }
}
