//! TOML configuration schema shared by all subcommands.
//!
//! ```toml
//! [model]                 # the labelled block model
//! a = 5.0
//! b = 5.0
//! labels = ["+", "-"]     # listed once
//! mu = [0.75, 0.25]       # same-type label probabilities, parallel to labels
//! nu = [0.25, 0.75]       # cross-type label probabilities
//!
//! [bp]                    # optional; defaults shown
//! init_noise = 0.1
//! damping = 0.2
//! max_iters = 200
//! tol = 1e-6
//! clamp = 30.0
//!
//! [graph]                 # gen-graph
//! n = 5000
//!
//! [sweep]                 # sweep: the two-label family mu(+) = 1/2 + eps
//! pairs = [[2.0, 2.0], [5.0, 5.0]]
//! eps_grid = [0.05, 0.15, 0.25, 0.35, 0.45]
//! n = 5000
//! seeds = [1, 2, 3, 4, 5]
//!
//! [tree]                  # tree-delta / tree-chi
//! depth = 6
//! trees = 50
//! reps = 2000
//! depths = [2, 3, 4, 5, 6]   # optional; defaults to 1..=depth
//!
//! [rate]                  # rate-fn
//! x_min = -2.0
//! x_max = -0.05
//! points = 80
//! growth_x = -0.6         # optional empirical growth comparison
//! growth_d_max = 12
//! growth_trials = 300
//! ```
//!
//! Unknown keys are rejected so typos fail loudly.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use lsbm_core::bp::BpConfig;
use lsbm_core::model::{LabelDistribution, LabelSet, ModelParams};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Option<ModelSection>,
    pub bp: Option<BpSection>,
    pub graph: Option<GraphSection>,
    pub sweep: Option<SweepSection>,
    pub tree: Option<TreeSection>,
    pub rate: Option<RateSection>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn model(&self) -> Result<&ModelSection> {
        self.model
            .as_ref()
            .context("config is missing the [model] section")
    }

    pub fn graph(&self) -> Result<&GraphSection> {
        self.graph
            .as_ref()
            .context("config is missing the [graph] section")
    }

    pub fn sweep(&self) -> Result<&SweepSection> {
        self.sweep
            .as_ref()
            .context("config is missing the [sweep] section")
    }

    pub fn tree(&self) -> Result<&TreeSection> {
        self.tree
            .as_ref()
            .context("config is missing the [tree] section")
    }

    pub fn rate(&self) -> Result<&RateSection> {
        self.rate
            .as_ref()
            .context("config is missing the [rate] section")
    }

    /// BP settings, falling back to the documented defaults.
    pub fn bp_config(&self) -> Result<BpConfig> {
        let cfg = match &self.bp {
            Some(s) => s.to_bp_config(),
            None => BpConfig::default(),
        };
        cfg.validate().context("invalid [bp] section")?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub a: f64,
    pub b: f64,
    pub labels: Vec<String>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

impl ModelSection {
    pub fn to_params(&self) -> Result<ModelParams> {
        let labels = LabelSet::new(self.labels.clone()).context("invalid model.labels")?;
        let mu = LabelDistribution::new(self.mu.clone()).context("invalid model.mu")?;
        let nu = LabelDistribution::new(self.nu.clone()).context("invalid model.nu")?;
        ModelParams::new(self.a, self.b, labels, mu, nu).context("invalid [model] section")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BpSection {
    pub init_noise: Option<f64>,
    pub damping: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub clamp: Option<f64>,
}

impl BpSection {
    pub fn to_bp_config(&self) -> BpConfig {
        let d = BpConfig::default();
        BpConfig {
            init_noise: self.init_noise.unwrap_or(d.init_noise),
            damping: self.damping.unwrap_or(d.damping),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
            clamp: self.clamp.unwrap_or(d.clamp),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub pairs: Vec<[f64; 2]>,
    pub eps_grid: Vec<f64>,
    pub n: usize,
    pub seeds: Vec<u64>,
}

fn default_reps() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeSection {
    /// Depth the skeletons are grown to.
    pub depth: u32,
    /// Number of independent trees.
    pub trees: usize,
    /// Broadcast replications per (tree, depth) cell.
    #[serde(default = "default_reps")]
    pub reps: usize,
    /// Depths to evaluate; defaults to `1..=depth`.
    pub depths: Option<Vec<u32>>,
}

impl TreeSection {
    pub fn eval_depths(&self) -> Result<Vec<u32>> {
        let depths = match &self.depths {
            Some(d) => d.clone(),
            None => (1..=self.depth).collect(),
        };
        if depths.is_empty() || depths.iter().any(|&d| d > self.depth) {
            bail!("tree.depths must be non-empty and bounded by tree.depth");
        }
        Ok(depths)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSection {
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub growth_x: Option<f64>,
    pub growth_d_max: Option<u32>,
    pub growth_trials: Option<usize>,
}
