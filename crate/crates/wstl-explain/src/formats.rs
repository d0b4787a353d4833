//! On-disk formats: formula JSON, training checkpoints, per-run manifests,
//! and the aggregate metrics report. Floating-point weights travel as
//! shortest round-trip decimal strings so re-serialization is bit-exact.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use wstl_core::{
    Clause, Explanation, FilterReport, Formula, Interval, Literal, PredicateTable, StageRecord,
    TemplateParams,
};

use crate::runner::RunConfig;

fn dec(x: f64) -> String {
    format!("{x}")
}

fn undec(s: &str) -> Result<f64> {
    s.parse::<f64>()
        .with_context(|| format!("invalid decimal number '{s}'"))
}

fn dec_vec(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| dec(x)).collect()
}

fn undec_vec(xs: &[String]) -> Result<Vec<f64>> {
    xs.iter().map(|s| undec(s)).collect()
}

/// Serializable formula tree; predicates are referenced by id.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FormulaJson {
    True,
    Literal {
        predicate: String,
        #[serde(default)]
        negated: bool,
    },
    Not {
        child: Box<FormulaJson>,
    },
    And {
        weights: Vec<String>,
        children: Vec<FormulaJson>,
    },
    Or {
        weights: Vec<String>,
        children: Vec<FormulaJson>,
    },
    Globally {
        interval: [usize; 2],
        weights: Vec<String>,
        child: Box<FormulaJson>,
    },
    Eventually {
        interval: [usize; 2],
        weights: Vec<String>,
        child: Box<FormulaJson>,
    },
}

pub fn formula_to_json(phi: &Formula, table: &PredicateTable) -> Result<FormulaJson> {
    Ok(match phi {
        Formula::True => FormulaJson::True,
        Formula::Literal(lit) => {
            let spec = table
                .get(lit.predicate)
                .with_context(|| format!("unknown predicate index {}", lit.predicate))?;
            FormulaJson::Literal {
                predicate: spec.id.clone(),
                negated: lit.negated,
            }
        }
        Formula::Not(c) => FormulaJson::Not {
            child: Box::new(formula_to_json(c, table)?),
        },
        Formula::And { weights, children } => FormulaJson::And {
            weights: dec_vec(weights),
            children: children
                .iter()
                .map(|c| formula_to_json(c, table))
                .collect::<Result<_>>()?,
        },
        Formula::Or { weights, children } => FormulaJson::Or {
            weights: dec_vec(weights),
            children: children
                .iter()
                .map(|c| formula_to_json(c, table))
                .collect::<Result<_>>()?,
        },
        Formula::Globally {
            interval,
            weights,
            child,
        } => FormulaJson::Globally {
            interval: [interval.a(), interval.b()],
            weights: dec_vec(weights),
            child: Box::new(formula_to_json(child, table)?),
        },
        Formula::Eventually {
            interval,
            weights,
            child,
        } => FormulaJson::Eventually {
            interval: [interval.a(), interval.b()],
            weights: dec_vec(weights),
            child: Box::new(formula_to_json(child, table)?),
        },
    })
}

pub fn formula_from_json(node: &FormulaJson, table: &PredicateTable) -> Result<Formula> {
    Ok(match node {
        FormulaJson::True => Formula::True,
        FormulaJson::Literal { predicate, negated } => {
            let idx = table
                .index_of(predicate)
                .with_context(|| format!("unknown predicate id '{predicate}'"))?;
            Formula::Literal(Literal {
                predicate: idx,
                negated: *negated,
            })
        }
        FormulaJson::Not { child } => {
            Formula::Not(Box::new(formula_from_json(child, table)?))
        }
        FormulaJson::And { weights, children } => Formula::And {
            weights: undec_vec(weights)?,
            children: children
                .iter()
                .map(|c| formula_from_json(c, table))
                .collect::<Result<_>>()?,
        },
        FormulaJson::Or { weights, children } => Formula::Or {
            weights: undec_vec(weights)?,
            children: children
                .iter()
                .map(|c| formula_from_json(c, table))
                .collect::<Result<_>>()?,
        },
        FormulaJson::Globally {
            interval,
            weights,
            child,
        } => Formula::Globally {
            interval: Interval::new(interval[0], interval[1]).map_err(|e| anyhow::anyhow!("{e}"))?,
            weights: undec_vec(weights)?,
            child: Box::new(formula_from_json(child, table)?),
        },
        FormulaJson::Eventually {
            interval,
            weights,
            child,
        } => Formula::Eventually {
            interval: Interval::new(interval[0], interval[1]).map_err(|e| anyhow::anyhow!("{e}"))?,
            weights: undec_vec(weights)?,
            child: Box::new(formula_from_json(child, table)?),
        },
    })
}

/// Full optimizer state for a trained template, sufficient to reproduce the
/// formula and to resume or audit a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    /// Retained predicate ids, in template column order.
    pub predicates: Vec<String>,
    pub scores_f: Vec<String>,
    pub scores_g: Vec<String>,
    pub mask_f: Vec<bool>,
    pub mask_g: Vec<bool>,
    pub config: RunConfig,
    pub seed: u64,
}

impl Checkpoint {
    pub fn from_params(
        params: &TemplateParams,
        table: &PredicateTable,
        config: &RunConfig,
        seed: u64,
    ) -> Result<Checkpoint> {
        let predicates = params
            .predicates()
            .iter()
            .map(|&p| {
                table
                    .get(p)
                    .map(|s| s.id.clone())
                    .with_context(|| format!("unknown predicate index {p}"))
            })
            .collect::<Result<_>>()?;
        Ok(Checkpoint {
            predicates,
            scores_f: dec_vec(params.scores(Clause::F)),
            scores_g: dec_vec(params.scores(Clause::G)),
            mask_f: params.mask(Clause::F).to_vec(),
            mask_g: params.mask(Clause::G).to_vec(),
            config: config.clone(),
            seed,
        })
    }

    pub fn to_params(&self, table: &PredicateTable) -> Result<TemplateParams> {
        let indices = self
            .predicates
            .iter()
            .map(|id| {
                table
                    .index_of(id)
                    .with_context(|| format!("unknown predicate id '{id}'"))
            })
            .collect::<Result<Vec<usize>>>()?;
        TemplateParams::from_parts(
            indices,
            undec_vec(&self.scores_f)?,
            undec_vec(&self.scores_g)?,
            self.mask_f.clone(),
            self.mask_g.clone(),
        )
        .map_err(|e| anyhow::anyhow!("{e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterEntryJson {
    pub predicate: String,
    pub similarity: f64,
    /// [always, sometimes, never] satisfaction fractions per class.
    pub positive_dist: [f64; 3],
    pub negative_dist: [f64; 3],
    pub retained: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageJson {
    pub stage: String,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub active_f: usize,
    pub active_g: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_clock_seconds: Option<f64>,
}

impl From<&StageRecord> for StageJson {
    fn from(r: &StageRecord) -> StageJson {
        StageJson {
            stage: r.stage.clone(),
            train_loss: r.train_loss,
            train_accuracy: r.train_accuracy,
            active_f: r.active_f,
            active_g: r.active_g,
            wall_clock_seconds: r.wall_clock_seconds,
        }
    }
}

fn filter_to_json(report: &FilterReport, table: &PredicateTable) -> Result<Vec<FilterEntryJson>> {
    report
        .entries
        .iter()
        .map(|e| {
            let id = table
                .get(e.predicate)
                .map(|s| s.id.clone())
                .with_context(|| format!("unknown predicate index {}", e.predicate))?;
            Ok(FilterEntryJson {
                predicate: id,
                similarity: e.similarity,
                positive_dist: e.positive_dist.as_array(),
                negative_dist: e.negative_dist.as_array(),
                retained: e.retained,
            })
        })
        .collect()
}

/// Everything recorded about one explanation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub config: RunConfig,
    pub train_size: usize,
    pub test_size: usize,
    /// Predicate ids whose normalization bounds were estimated from data.
    pub estimated_bounds: Vec<String>,
    pub filter: Vec<FilterEntryJson>,
    pub retained: Vec<String>,
    pub stages: Vec<StageJson>,
    pub formula: FormulaJson,
    pub formula_text: String,
    pub incomplete: bool,
    /// After a prune step, re-optimization continues from the current
    /// (renormalized) scores rather than reinitializing them.
    pub prune_reoptimization: String,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        seed: u64,
        config: &RunConfig,
        explanation: &Explanation,
        table: &PredicateTable,
        train_size: usize,
        test_size: usize,
        estimated_bounds: Vec<String>,
        wall_clock_seconds: f64,
    ) -> Result<RunManifest> {
        let retained = explanation
            .filter
            .retained
            .iter()
            .map(|&p| {
                table
                    .get(p)
                    .map(|s| s.id.clone())
                    .with_context(|| format!("unknown predicate index {p}"))
            })
            .collect::<Result<_>>()?;
        Ok(RunManifest {
            seed,
            config: config.clone(),
            train_size,
            test_size,
            estimated_bounds,
            filter: filter_to_json(&explanation.filter, table)?,
            retained,
            stages: explanation.history.iter().map(StageJson::from).collect(),
            formula: formula_to_json(&explanation.formula, table)?,
            formula_text: wstl_core::to_canonical_string(&explanation.formula, table, 2),
            incomplete: explanation.incomplete,
            prune_reoptimization: String::from("continue_current_scores"),
            wall_clock_seconds,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub seed: u64,
    pub test_accuracy: f64,
    pub conciseness: f64,
    pub strictness: f64,
    pub formula_text: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

fn stat(values: impl Iterator<Item = f64> + Clone) -> Stat {
    let n = values.clone().count().max(1) as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Stat {
        mean,
        std: var.sqrt(),
    }
}

/// Evaluation metrics over a batch of runs. Wall-clock is deliberately kept
/// out so reports from identical runs compare byte-for-byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_seed: Vec<SeedMetrics>,
    pub consistency: f64,
    /// Predicate budget `P` used by the strictness metric.
    pub p: usize,
    pub accuracy: Stat,
    pub conciseness: Stat,
    pub strictness: Stat,
}

impl MetricsReport {
    pub fn new(per_seed: Vec<SeedMetrics>, consistency: f64, p: usize) -> Result<MetricsReport> {
        if per_seed.is_empty() {
            bail!("metrics report over zero runs");
        }
        let acc = stat(per_seed.iter().map(|m| m.test_accuracy));
        let con = stat(per_seed.iter().map(|m| m.conciseness));
        let str_ = stat(per_seed.iter().map(|m| m.strictness));
        Ok(MetricsReport {
            per_seed,
            consistency,
            p,
            accuracy: acc,
            conciseness: con,
            strictness: str_,
        })
    }

    /// Fixed-width text table for terminal display.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>6}  {:>10}  {:>12}  {:>10}  formula\n",
            "seed", "accuracy", "conciseness", "strictness"
        ));
        for m in &self.per_seed {
            out.push_str(&format!(
                "{:>6}  {:>10.4}  {:>12.4}  {:>10.4}  {}\n",
                m.seed, m.test_accuracy, m.conciseness, m.strictness, m.formula_text
            ));
        }
        out.push_str(&format!(
            "{:>6}  {:>5.4} ± {:.2}  {:>7.4} ± {:.2}  {:>5.4} ± {:.2}\n",
            "mean",
            self.accuracy.mean,
            self.accuracy.std,
            self.conciseness.mean,
            self.conciseness.std,
            self.strictness.mean,
            self.strictness.std
        ));
        out.push_str(&format!(
            "consistency over {} runs: {:.4} (P = {})\n",
            self.per_seed.len(),
            self.consistency,
            self.p
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wstl_core::{Feature, PredicateSpec};

    fn table() -> PredicateTable {
        PredicateTable::new(
            (0..2)
                .map(|i| {
                    PredicateSpec::new(
                        format!("p{i}"),
                        Feature::Coord { index: i },
                        0.0,
                        1.0,
                        -1.0,
                    )
                    .unwrap()
                })
                .collect(),
        )
    }

    #[test]
    fn formula_roundtrip_is_bit_exact() {
        let table = table();
        let interval = Interval::new(0, 4).unwrap();
        let inner = Formula::or(
            vec![0.30000000000000004, 0.7],
            vec![
                Formula::Literal(Literal::pos(0)),
                Formula::Literal(Literal::neg(1)),
            ],
        )
        .unwrap();
        let phi = Formula::and(
            vec![0.5, 0.5],
            vec![
                Formula::eventually_uniform(interval, Formula::Literal(Literal::pos(0))),
                Formula::globally_uniform(interval, inner),
            ],
        )
        .unwrap();
        let json = formula_to_json(&phi, &table).unwrap();
        let text = serde_json::to_string(&json).unwrap();
        let parsed: FormulaJson = serde_json::from_str(&text).unwrap();
        let back = formula_from_json(&parsed, &table).unwrap();
        assert_eq!(back, phi);
        // serializing the parsed tree again is byte-identical
        assert_eq!(serde_json::to_string(&parsed).unwrap(), text);
    }

    #[test]
    fn checkpoint_roundtrip_restores_params() {
        let table = table();
        let params = TemplateParams::init(vec![0, 1], 9).unwrap();
        let cfg = RunConfig::default();
        let ckpt = Checkpoint::from_params(&params, &table, &cfg, 9).unwrap();
        let text = serde_json::to_string_pretty(&ckpt).unwrap();
        let parsed: Checkpoint = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed.to_params(&table).unwrap(), params);
    }

    #[test]
    fn unknown_predicate_id_is_error() {
        let table = table();
        let json = FormulaJson::Literal {
            predicate: "nope".into(),
            negated: false,
        };
        assert!(formula_from_json(&json, &table).is_err());
    }

    #[test]
    fn report_stats_match_hand_computation() {
        let per_seed = vec![
            SeedMetrics {
                seed: 0,
                test_accuracy: 1.0,
                conciseness: 0.5,
                strictness: 0.2,
                formula_text: "a".into(),
            },
            SeedMetrics {
                seed: 1,
                test_accuracy: 0.9,
                conciseness: 0.5,
                strictness: 0.4,
                formula_text: "a".into(),
            },
        ];
        let r = MetricsReport::new(per_seed, 1.0, 6).unwrap();
        assert!((r.accuracy.mean - 0.95).abs() < 1e-12);
        assert!((r.accuracy.std - 0.05).abs() < 1e-12);
        assert!((r.conciseness.std).abs() < 1e-12);
        assert!((r.strictness.mean - 0.3).abs() < 1e-12);
        assert!(r.table().contains("consistency over 2 runs"));
    }
}
