//! Run orchestration: hyperparameter bundle, multi-seed training, and
//! evaluation across runs.

use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use wstl_core::metrics::{self, ClauseView};
use wstl_core::simplify::run_pipeline;
use wstl_core::{
    stratified_split, Explanation, PredicateTable, SimplifyConfig, Trajectory, TrainConfig,
};

use crate::formats::{Checkpoint, MetricsReport, RunManifest, SeedMetrics};

/// All tunables for one explanation run; the train seed is supplied
/// separately so one config drives many seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub sigma: f64,
    pub zeta: f64,
    pub lambda_rt: f64,
    pub lambda_rd: f64,
    pub epochs: usize,
    pub step_size: f64,
    pub batch_size: usize,
    pub s_threshold: f64,
    pub n_prune_iters: usize,
    pub n_weights_per_prune: usize,
    pub split_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            sigma: 0.5,
            zeta: 1.0,
            lambda_rt: 0.01,
            lambda_rd: 0.1,
            epochs: 15,
            step_size: 2.0,
            batch_size: 64,
            s_threshold: 0.99,
            n_prune_iters: 20,
            n_weights_per_prune: 1,
            split_fraction: 0.8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            sigma: self.sigma,
            zeta: self.zeta,
            lambda_rt: self.lambda_rt,
            lambda_rd: self.lambda_rd,
            epochs: self.epochs,
            step_size: self.step_size,
            batch_size: self.batch_size,
            seed,
        }
    }

    pub fn simplify_config(&self) -> SimplifyConfig {
        SimplifyConfig {
            s_threshold: self.s_threshold,
            n_prune_iters: self.n_prune_iters,
            n_weights_per_prune: self.n_weights_per_prune,
        }
    }
}

/// One trained run with its manifest.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub explanation: Explanation,
    pub manifest: RunManifest,
}

fn run_one(
    data: &[Trajectory],
    table: &PredicateTable,
    estimated_bounds: &[String],
    cfg: &RunConfig,
    seed: u64,
) -> Result<RunOutput> {
    let started = Instant::now();
    let split = stratified_split(data, cfg.split_fraction, seed)?;
    let predicates: Vec<usize> = (0..table.len()).collect();
    let explanation = run_pipeline(
        &split.train,
        table,
        &predicates,
        &cfg.train_config(seed),
        &cfg.simplify_config(),
    )?;
    let manifest = RunManifest::build(
        seed,
        cfg,
        &explanation,
        table,
        split.train.len(),
        split.test.len(),
        estimated_bounds.to_vec(),
        started.elapsed().as_secs_f64(),
    )?;
    Ok(RunOutput {
        seed,
        explanation,
        manifest,
    })
}

fn write_run(out_dir: &Path, cfg: &RunConfig, table: &PredicateTable, run: &RunOutput) -> Result<()> {
    let dir = out_dir.join(format!("seed_{}", run.seed));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&run.manifest)?,
    )?;
    std::fs::write(
        dir.join("formula.json"),
        serde_json::to_string_pretty(&run.manifest.formula)?,
    )?;
    let ckpt = Checkpoint::from_params(&run.explanation.params, table, cfg, run.seed)?;
    std::fs::write(dir.join("checkpoint.json"), serde_json::to_string_pretty(&ckpt)?)?;
    Ok(())
}

/// Trains one explanation per seed, in parallel, and writes a manifest,
/// formula, and checkpoint under `out_dir/seed_<n>/` when `out_dir` is set.
/// `jobs = 0` uses one worker per CPU.
pub fn run_seeds(
    data: &[Trajectory],
    table: &PredicateTable,
    estimated_bounds: &[String],
    cfg: &RunConfig,
    seeds: &[u64],
    out_dir: Option<&Path>,
    jobs: usize,
) -> Result<Vec<RunOutput>> {
    if seeds.is_empty() {
        anyhow::bail!("no seeds given");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    let mut runs = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_one(data, table, estimated_bounds, cfg, seed))
            .collect::<Result<Vec<RunOutput>>>()
    })?;
    runs.sort_by_key(|r| r.seed);
    if let Some(dir) = out_dir {
        for run in &runs {
            write_run(dir, cfg, table, run)?;
        }
    }
    Ok(runs)
}

/// Scores each run on its held-out test split and aggregates consistency
/// across runs. The strictness budget `P` counts both polarities of every
/// retained predicate.
pub fn evaluate_runs(
    data: &[Trajectory],
    table: &PredicateTable,
    cfg: &RunConfig,
    runs: &[RunOutput],
) -> Result<MetricsReport> {
    let mut per_seed = Vec::with_capacity(runs.len());
    let mut all_views: Vec<Vec<ClauseView>> = Vec::with_capacity(runs.len());
    let mut p_report = 0usize;
    for run in runs {
        let split = stratified_split(data, cfg.split_fraction, run.seed)?;
        let agg = cfg.train_config(run.seed).agg();
        let accuracy =
            metrics::accuracy_formula(&run.explanation.formula, table, &split.test, &agg)?;
        let (f_view, g_view) = metrics::stl_counterpart(&run.explanation.formula)?;
        let views = vec![f_view, g_view];
        let p = 2 * run.explanation.filter.retained.len();
        p_report = p_report.max(p);
        per_seed.push(SeedMetrics {
            seed: run.seed,
            test_accuracy: accuracy,
            conciseness: metrics::conciseness(&views),
            strictness: metrics::strictness(&views, p)?,
            formula_text: run.manifest.formula_text.clone(),
        });
        all_views.push(views);
    }
    let consistency = metrics::consistency(&all_views, 2);
    MetricsReport::new(per_seed, consistency, p_report)
}
