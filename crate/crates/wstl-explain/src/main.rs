use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use wstl_explain::formats::{formula_from_json, Checkpoint, RunManifest};
use wstl_explain::generator::{generate_to_dir, GeneratorConfig};
use wstl_explain::jsonl;
use wstl_explain::runner::{evaluate_runs, run_seeds, RunConfig, RunOutput};
use wstl_explain::schema::Schema;

#[derive(Parser)]
#[command(name = "wstl-explain", version, about = "Infer weighted STL explanations from labeled trajectories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic reach-avoid dataset with its schema.
    Generate {
        /// Output directory for data.jsonl, schema.json, manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Generator config JSON; omitted fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        n_positive: Option<usize>,
        #[arg(long)]
        n_negative: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write data.csv, one row per timestep.
        #[arg(long)]
        csv: bool,
    },
    /// Train explanations over one or more seeds.
    Explain {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Seed list: "0,3,7" or a range "0..10".
        #[arg(long, default_value = "0..10")]
        seeds: String,
        /// Parallel workers; 0 means one per CPU.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Score previously trained runs on their held-out test splits.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Directory holding the seed_<n> run directories.
        #[arg(long)]
        runs: PathBuf,
    },
    /// Print per-predicate class-similarity scores without training.
    FilterReport {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        s_th: Option<f64>,
    },
}

#[derive(Args)]
struct ConfigOverrides {
    /// Run config JSON; flags below override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    lambda_rt: Option<f64>,
    #[arg(long)]
    lambda_rd: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    step_size: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    s_th: Option<f64>,
    #[arg(long)]
    n_pr: Option<usize>,
    #[arg(long)]
    n_w: Option<usize>,
    #[arg(long)]
    split_fraction: Option<f64>,
}

impl ConfigOverrides {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag { cfg.$field = v; })*
            };
        }
        apply!(
            sigma => sigma, zeta => zeta, lambda_rt => lambda_rt,
            lambda_rd => lambda_rd, epochs => epochs, step_size => step_size,
            batch_size => batch_size, s_th => s_threshold, n_pr => n_prune_iters,
            n_w => n_weights_per_prune, split_fraction => split_fraction
        );
        Ok(cfg)
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let spec = spec.trim();
    if let Some((a, b)) = spec.split_once("..") {
        let start: u64 = a.trim().parse().context("invalid seed range start")?;
        let (inclusive, b) = match b.strip_prefix('=') {
            Some(rest) => (true, rest),
            None => (false, b),
        };
        let end: u64 = b.trim().parse().context("invalid seed range end")?;
        let end = if inclusive { end + 1 } else { end };
        if start >= end {
            bail!("empty seed range '{spec}'");
        }
        return Ok((start..end).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse::<u64>().with_context(|| format!("invalid seed '{s}'")))
        .collect()
}

fn load_inputs(
    data: &PathBuf,
    schema: &PathBuf,
) -> Result<(Vec<wstl_core::Trajectory>, wstl_core::PredicateTable, Vec<String>)> {
    let data = jsonl::load_dataset(data)?;
    if data.is_empty() {
        bail!(wstl_core::Error::Input("dataset is empty".into()));
    }
    let schema = Schema::load(schema)?;
    let (table, estimated) = schema.build_table(&data)?;
    Ok((data, table, estimated))
}

fn load_runs(dir: &PathBuf, table: &wstl_core::PredicateTable) -> Result<(RunConfig, Vec<RunOutput>)> {
    let mut runs = Vec::new();
    let mut config: Option<RunConfig> = None;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("seed_"))
        })
        .collect();
    entries.sort();
    for run_dir in entries {
        let manifest_text = std::fs::read_to_string(run_dir.join("manifest.json"))
            .with_context(|| format!("reading {}", run_dir.join("manifest.json").display()))?;
        let manifest: RunManifest = serde_json::from_str(&manifest_text)
            .with_context(|| format!("parsing {}", run_dir.join("manifest.json").display()))?;
        let ckpt_text = std::fs::read_to_string(run_dir.join("checkpoint.json"))
            .with_context(|| format!("reading {}", run_dir.join("checkpoint.json").display()))?;
        let ckpt: Checkpoint = serde_json::from_str(&ckpt_text)?;
        let formula = formula_from_json(&manifest.formula, table)?;
        let params = ckpt.to_params(table)?;
        let retained = manifest
            .retained
            .iter()
            .map(|id| {
                table
                    .index_of(id)
                    .with_context(|| format!("unknown predicate id '{id}'"))
            })
            .collect::<Result<Vec<usize>>>()?;
        let explanation = wstl_core::Explanation {
            formula,
            params,
            filter: wstl_core::FilterReport {
                entries: Vec::new(),
                retained,
            },
            history: Vec::new(),
            incomplete: manifest.incomplete,
        };
        config.get_or_insert_with(|| manifest.config.clone());
        runs.push(RunOutput {
            seed: manifest.seed,
            explanation,
            manifest,
        });
    }
    if runs.is_empty() {
        bail!("no seed_<n> run directories found under {}", dir.display());
    }
    runs.sort_by_key(|r| r.seed);
    Ok((config.unwrap(), runs))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            out,
            config,
            n_positive,
            n_negative,
            seed,
            csv,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?;
                    serde_json::from_str::<GeneratorConfig>(&text)
                        .with_context(|| format!("parsing {}", path.display()))?
                }
                None => GeneratorConfig::default(),
            };
            if let Some(n) = n_positive {
                cfg.n_positive = n;
            }
            if let Some(n) = n_negative {
                cfg.n_negative = n;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let manifest = generate_to_dir(&cfg, &out)?;
            if csv {
                let data = jsonl::load_dataset(&out.join("data.jsonl"))?;
                jsonl::export_csv(&out.join("data.csv"), &data)?;
            }
            println!(
                "wrote {} trajectories to {} (negatives reaching goal: {:.1}%)",
                manifest.n_positive + manifest.n_negative,
                out.display(),
                100.0 * manifest.negative_goal_fraction
            );
        }
        Command::Explain {
            data,
            schema,
            out,
            seeds,
            jobs,
            overrides,
        } => {
            let cfg = overrides.resolve()?;
            let seeds = parse_seeds(&seeds)?;
            let (data, table, estimated) = load_inputs(&data, &schema)?;
            let runs = run_seeds(&data, &table, &estimated, &cfg, &seeds, Some(&out), jobs)?;
            for r in &runs {
                println!("seed {}: {}", r.seed, r.manifest.formula_text);
            }
            let report = evaluate_runs(&data, &table, &cfg, &runs)?;
            std::fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
            std::fs::write(out.join("report.txt"), report.table())?;
            print!("{}", report.table());
        }
        Command::Evaluate { data, schema, runs } => {
            let (data, table, _) = load_inputs(&data, &schema)?;
            let (cfg, runs) = load_runs(&runs, &table)?;
            let report = evaluate_runs(&data, &table, &cfg, &runs)?;
            print!("{}", report.table());
        }
        Command::FilterReport { data, schema, s_th } => {
            let (data, table, _) = load_inputs(&data, &schema)?;
            let mut cfg = wstl_core::SimplifyConfig::default();
            if let Some(t) = s_th {
                cfg.s_threshold = t;
            }
            let predicates: Vec<usize> = (0..table.len()).collect();
            let report =
                wstl_core::simplify::filter_predicates(&data, &table, &predicates, &cfg)?;
            println!(
                "{:>12}  {:>10}  {:>8}  pos [alw/some/nev]     neg [alw/some/nev]",
                "predicate", "similarity", "retained"
            );
            for e in &report.entries {
                let id = table.get(e.predicate).map(|s| s.id.as_str()).unwrap_or("?");
                let p = e.positive_dist.as_array();
                let n = e.negative_dist.as_array();
                println!(
                    "{:>12}  {:>10.6}  {:>8}  [{:.2} {:.2} {:.2}]     [{:.2} {:.2} {:.2}]",
                    id, e.similarity, e.retained, p[0], p[1], p[2], n[0], n[1], n[2]
                );
            }
        }
    }
    Ok(())
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<wstl_core::Error>() {
            return match core {
                wstl_core::Error::Config(_) => 2,
                wstl_core::Error::Input(_) | wstl_core::Error::Domain(_) => 3,
                wstl_core::Error::Structure(_) => 3,
                wstl_core::Error::NonFinite { .. } => 4,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("WSTL_EXPLAIN_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
