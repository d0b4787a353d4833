//! Synthetic reach-avoid dataset: positive trajectories steer to a goal
//! region while avoiding a hazard disc; negatives follow a clipped random
//! walk. Emits the dataset, its schema, and a generation manifest.

use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use wstl_core::Trajectory;

use crate::jsonl;
use crate::schema::{FeatureDecl, PredicateDecl, Schema};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Square arena spans `[-half_width, half_width]` on each axis.
    pub arena_half_width: f64,
    pub start: [f64; 2],
    pub start_jitter: f64,
    pub goal_center: [f64; 2],
    pub goal_radius: f64,
    pub hazard_center: [f64; 2],
    pub hazard_radius: f64,
    pub step_size: f64,
    pub horizon: usize,
    pub n_positive: usize,
    pub n_negative: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            arena_half_width: 1.0,
            start: [-0.8, 0.0],
            start_jitter: 0.05,
            goal_center: [0.7, 0.0],
            goal_radius: 0.1,
            hazard_center: [-0.35, 0.0],
            hazard_radius: 0.25,
            step_size: 0.08,
            horizon: 50,
            n_positive: 500,
            n_negative: 500,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.arena_half_width > 0.0) {
            bail!("arena half-width must be positive");
        }
        if !(self.goal_radius > 0.0 && self.hazard_radius > 0.0) {
            bail!("region radii must be positive");
        }
        if !(self.step_size > 0.0) || self.horizon == 0 {
            bail!("step size must be positive and horizon nonzero");
        }
        if self.n_positive == 0 || self.n_negative == 0 {
            bail!("both classes need at least one trajectory");
        }
        let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        if d(self.goal_center, self.hazard_center) <= self.goal_radius + self.hazard_radius {
            bail!("goal and hazard regions overlap; no avoiding path exists");
        }
        if d(self.start, self.hazard_center) <= self.hazard_radius + self.start_jitter {
            bail!("start region intersects the hazard");
        }
        let reach = self.step_size * self.horizon as f64;
        if d(self.start, self.goal_center) - self.start_jitter > reach {
            bail!("goal unreachable within the horizon at this step size");
        }
        Ok(())
    }
}

/// Summary statistics written next to the generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorManifest {
    pub config: GeneratorConfig,
    pub n_positive: usize,
    pub n_negative: usize,
    /// Fraction of negative trajectories that ever enter the goal region.
    pub negative_goal_fraction: f64,
    /// Fraction of negative trajectories that ever enter the hazard region.
    pub negative_hazard_fraction: f64,
    /// Rejection-sampling retries spent while generating positives.
    pub positive_retries: usize,
}

fn dist(p: &[f64], c: [f64; 2]) -> f64 {
    ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
}

fn clip(v: f64, half: f64) -> f64 {
    v.clamp(-half, half)
}

fn sample_start(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> [f64; 2] {
    [
        cfg.start[0] + rng.gen_range(-cfg.start_jitter..=cfg.start_jitter),
        cfg.start[1] + rng.gen_range(-cfg.start_jitter..=cfg.start_jitter),
    ]
}

/// Goal-seeking walk with hazard repulsion. Returns `None` when the walk
/// grazes the hazard or fails to end inside the goal.
fn positive_walk(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Option<Vec<Vec<f64>>> {
    let mut pos = sample_start(cfg, rng);
    let mut states = Vec::with_capacity(cfg.horizon + 1);
    states.push(pos.to_vec());
    let mut reached = false;
    for _ in 0..cfg.horizon {
        let mut dir = [0.0f64; 2];
        if reached {
            // settle inside the goal with mild re-centering
            dir[0] = cfg.goal_center[0] - pos[0];
            dir[1] = cfg.goal_center[1] - pos[1];
        } else {
            let dg = dist(&pos, cfg.goal_center).max(1e-9);
            dir[0] = (cfg.goal_center[0] - pos[0]) / dg;
            dir[1] = (cfg.goal_center[1] - pos[1]) / dg;
            // repulsion falls off quadratically past the hazard boundary
            let dh = dist(&pos, cfg.hazard_center).max(1e-9);
            let margin = cfg.hazard_radius + 3.0 * cfg.step_size;
            if dh < margin {
                let push = 2.5 * (1.0 - dh / margin).powi(2) * margin / dh;
                dir[0] += push * (pos[0] - cfg.hazard_center[0]) / dh;
                dir[1] += push * (pos[1] - cfg.hazard_center[1]) / dh;
            }
            // heading noise keeps the corpus from collapsing to one path
            dir[0] += rng.gen_range(-0.4..=0.4);
            dir[1] += rng.gen_range(-0.4..=0.4);
        }
        let norm = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt().max(1e-9);
        let scale = if reached {
            (cfg.step_size * 0.3).min(norm) / norm
        } else {
            cfg.step_size / norm
        };
        pos[0] = clip(pos[0] + scale * dir[0], cfg.arena_half_width);
        pos[1] = clip(pos[1] + scale * dir[1], cfg.arena_half_width);
        if dist(&pos, cfg.hazard_center) <= cfg.hazard_radius {
            return None;
        }
        if dist(&pos, cfg.goal_center) <= cfg.goal_radius * 0.8 {
            reached = true;
        }
        states.push(pos.to_vec());
    }
    if reached && dist(&pos, cfg.goal_center) <= cfg.goal_radius {
        Some(states)
    } else {
        None
    }
}

fn negative_walk(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pos = sample_start(cfg, rng);
    let mut states = Vec::with_capacity(cfg.horizon + 1);
    states.push(pos.to_vec());
    for _ in 0..cfg.horizon {
        let angle = rng.gen_range(0.0..core::f64::consts::TAU);
        pos[0] = clip(pos[0] + cfg.step_size * angle.cos(), cfg.arena_half_width);
        pos[1] = clip(pos[1] + cfg.step_size * angle.sin(), cfg.arena_half_width);
        states.push(pos.to_vec());
    }
    states
}

/// Schema for the generated corpus: proximity predicates for the goal and
/// hazard discs, plus a trivially-true coordinate bound that the predicate
/// filter is expected to discard.
pub fn reach_avoid_schema(cfg: &GeneratorConfig) -> Schema {
    let span = 2.0 * cfg.arena_half_width;
    let max_dist = 2.0 * span; // loose upper bound on any in-arena distance
    let mut slices = std::collections::BTreeMap::new();
    slices.insert("agent".to_string(), [0usize, 2usize]);
    Schema {
        state_dim: 2,
        slices,
        predicates: vec![
            PredicateDecl {
                id: "goal".to_string(),
                feature: FeatureDecl::NegDistance {
                    a: "agent".to_string(),
                    b: None,
                    point: Some(cfg.goal_center.to_vec()),
                },
                c: -cfg.goal_radius,
                sup: Some(0.0),
                inf: Some(-max_dist),
            },
            PredicateDecl {
                id: "hazard".to_string(),
                feature: FeatureDecl::NegDistance {
                    a: "agent".to_string(),
                    b: None,
                    point: Some(cfg.hazard_center.to_vec()),
                },
                c: -cfg.hazard_radius,
                sup: Some(0.0),
                inf: Some(-max_dist),
            },
            PredicateDecl {
                id: "in_arena_x".to_string(),
                feature: FeatureDecl::Coord { index: 0 },
                c: -1.5 * cfg.arena_half_width,
                sup: Some(2.0 * cfg.arena_half_width),
                inf: Some(-2.0 * cfg.arena_half_width),
            },
        ],
    }
}

pub fn generate_reach_avoid(
    cfg: &GeneratorConfig,
) -> Result<(Vec<Trajectory>, GeneratorManifest)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = Vec::with_capacity(cfg.n_positive + cfg.n_negative);

    let mut retries = 0usize;
    let retry_budget = 200 * cfg.n_positive;
    for i in 0..cfg.n_positive {
        let states = loop {
            match positive_walk(cfg, &mut rng) {
                Some(s) => break s,
                None => {
                    retries += 1;
                    if retries > retry_budget {
                        bail!(
                            "could not sample goal-reaching hazard-free trajectories; \
                             geometry is too tight for the horizon"
                        );
                    }
                }
            }
        };
        data.push(Trajectory::new(format!("pos_{i:04}"), 1, states).map_err(|e| anyhow::anyhow!("{e}"))?);
    }

    let mut neg_goal = 0usize;
    let mut neg_hazard = 0usize;
    for i in 0..cfg.n_negative {
        let states = negative_walk(cfg, &mut rng);
        if states.iter().any(|s| dist(s, cfg.goal_center) <= cfg.goal_radius) {
            neg_goal += 1;
        }
        if states.iter().any(|s| dist(s, cfg.hazard_center) <= cfg.hazard_radius) {
            neg_hazard += 1;
        }
        data.push(Trajectory::new(format!("neg_{i:04}"), -1, states).map_err(|e| anyhow::anyhow!("{e}"))?);
    }

    let manifest = GeneratorManifest {
        config: cfg.clone(),
        n_positive: cfg.n_positive,
        n_negative: cfg.n_negative,
        negative_goal_fraction: neg_goal as f64 / cfg.n_negative as f64,
        negative_hazard_fraction: neg_hazard as f64 / cfg.n_negative as f64,
        positive_retries: retries,
    };
    Ok((data, manifest))
}

/// Generates the corpus and writes `data.jsonl`, `schema.json`, and
/// `manifest.json` into `out_dir`.
pub fn generate_to_dir(cfg: &GeneratorConfig, out_dir: &Path) -> Result<GeneratorManifest> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let (data, manifest) = generate_reach_avoid(cfg)?;
    jsonl::save_dataset(&out_dir.join("data.jsonl"), &data)?;
    reach_avoid_schema(cfg).save(&out_dir.join("schema.json"))?;
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}
