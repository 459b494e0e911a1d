//! Parameter sweeps over `(p, q, estimator)` grids.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiments::{min_coin_seed, realize};
use super::ingest::NetworkSpec;
use crate::diffusion::{check_probability, derive_seed, rng_from_seed};
use crate::error::{Error, Result};
use crate::estimators::{localize_graph, localize_tree, min_timestamp_estimator, DEFAULT_THETA};
use crate::graph::{Network, NodeId};

/// Header of the summary CSV.
pub const CSV_HEADER: &str = "p,q,estimator,trials,mean_dist,detect_rate,stderr";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    /// Infection-path estimator on trees.
    Tree,
    /// Infection-path estimator with time-labeled BFS trees.
    Graph,
    /// Earliest observer.
    Min,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Tree => "tree",
            EstimatorKind::Graph => "graph",
            EstimatorKind::Min => "min",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(EstimatorKind::Tree),
            "graph" => Ok(EstimatorKind::Graph),
            "min" => Ok(EstimatorKind::Min),
            other => Err(Error::input(format!("unknown estimator `{other}`"))),
        }
    }
}

fn default_theta() -> f64 {
    DEFAULT_THETA
}

/// A sweep read from TOML.
///
/// ```toml
/// network = "gen:rt:3:10"
/// p = [0.5]
/// q = [0.1, 0.5, 0.9]
/// trials = 500
/// seed = 7
/// estimators = ["tree", "min"]
/// output = "summary.csv"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub network: NetworkSpec,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Score tree candidates against every observer rather than those in the search region.
    #[serde(default)]
    pub full_sampled_set: bool,
    /// Fixed source; drawn per trial when absent.
    #[serde(default)]
    pub source: Option<NodeId>,
    /// Summary CSV destination.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Per-trial JSON-lines destination.
    #[serde(default)]
    pub records: Option<PathBuf>,
    /// Record per-trial wall time (makes record files run-dependent).
    #[serde(default)]
    pub timing: bool,
}

impl SweepConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text, path)?;
        // relative output paths follow the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for target in [&mut cfg.output, &mut cfg.records].into_iter().flatten() {
            if target.is_relative() {
                *target = base.join(&*target);
            }
        }
        if let NetworkSpec::File(file) = &mut cfg.network {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::input("trials must be at least 1"));
        }
        if self.p.is_empty() || self.q.is_empty() || self.estimators.is_empty() {
            return Err(Error::input("p, q and estimators must be non-empty"));
        }
        for &p in &self.p {
            check_probability("p", p)?;
        }
        for &q in &self.q {
            check_probability("q", q)?;
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::input(format!("theta must lie in (0, 1], got {}", self.theta)));
        }
        Ok(())
    }
}

/// One estimator's result on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub p: f64,
    pub q: f64,
    pub trial: usize,
    pub source: NodeId,
    pub estimator: EstimatorKind,
    pub estimate: NodeId,
    pub error_distance: u64,
    pub sampled: usize,
    /// Feasible candidates; absent for the minimum-timestamp estimator.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub feasible: Option<usize>,
    pub fallback: bool,
    /// Empty observations discarded before this trial's sample.
    pub resamples: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

/// Aggregate over the trials of one `(p, q, estimator)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub p: f64,
    pub q: f64,
    pub estimator: EstimatorKind,
    pub trials: usize,
    pub mean_dist: f64,
    pub detect_rate: f64,
    /// Standard error of `mean_dist`.
    pub stderr: f64,
    pub resamples: u64,
    pub fallbacks: usize,
}

impl SummaryRow {
    fn from_records(p: f64, q: f64, estimator: EstimatorKind, records: &[&TrialRecord]) -> Self {
        let n = records.len() as f64;
        let dists: Vec<f64> = records.iter().map(|r| r.error_distance as f64).collect();
        let mean = dists.iter().sum::<f64>() / n;
        let var = if records.len() > 1 {
            dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        SummaryRow {
            p,
            q,
            estimator,
            trials: records.len(),
            mean_dist: mean,
            detect_rate: records.iter().filter(|r| r.error_distance == 0).count() as f64 / n,
            stderr: (var / n).sqrt(),
            resamples: records.iter().map(|r| r.resamples).sum(),
            fallbacks: records.iter().filter(|r| r.fallback).count(),
        }
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6}",
            self.p, self.q, self.estimator, self.trials, self.mean_dist, self.detect_rate, self.stderr
        )
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub rows: Vec<SummaryRow>,
    pub records: Vec<TrialRecord>,
}

impl SweepOutcome {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn write_records<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Writes the CSV and record files named in `cfg`, if any.
    pub fn write_outputs(&self, cfg: &SweepConfig) -> Result<()> {
        if let Some(path) = &cfg.output {
            std::fs::write(path, self.csv()).map_err(|e| Error::io(path, e))?;
        }
        if let Some(path) = &cfg.records {
            let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            self.write_records(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }
}

/// Candidate sources: non-leaf nodes of generated regular trees, the largest
/// component otherwise.
fn source_pool(spec: &NetworkSpec, g: &Network) -> Vec<NodeId> {
    match spec {
        NetworkSpec::RegularTree { .. } => (0..g.node_count()).filter(|&u| g.degree(u) > 1).collect(),
        _ => g.largest_component(),
    }
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let g = cfg.network.build()?;
    if cfg.estimators.contains(&EstimatorKind::Tree) && !g.is_tree() {
        return Err(Error::input(format!("network {} is not a tree; use the graph estimator", cfg.network)));
    }
    if let Some(s) = cfg.source {
        g.check_node(s)?;
    }
    let pool = source_pool(&cfg.network, &g);

    let mut rows = Vec::new();
    let mut records = Vec::new();
    for (pi, &p) in cfg.p.iter().enumerate() {
        for (qi, &q) in cfg.q.iter().enumerate() {
            let cell_seed = derive_seed(cfg.seed, (pi * cfg.q.len() + qi) as u64);
            let cell: Vec<Vec<TrialRecord>> = (0..cfg.trials)
                .into_par_iter()
                .map(|i| run_trial(cfg, &g, &pool, p, q, i, derive_seed(cell_seed, i as u64)))
                .collect::<Result<_>>()?;
            let cell: Vec<TrialRecord> = cell.into_iter().flatten().collect();
            for &kind in &cfg.estimators {
                let mine: Vec<&TrialRecord> = cell.iter().filter(|r| r.estimator == kind).collect();
                rows.push(SummaryRow::from_records(p, q, kind, &mine));
            }
            records.extend(cell);
        }
    }
    Ok(SweepOutcome { rows, records })
}

fn run_trial(
    cfg: &SweepConfig,
    g: &Network,
    pool: &[NodeId],
    p: f64,
    q: f64,
    trial: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let source = match cfg.source {
        Some(s) => s,
        None => pool[rng_from_seed(derive_seed(seed, 0)).gen_range(0..pool.len())],
    };
    let r = realize(g, source, p, q, seed)?;
    let distances = g.hop_distances(source);
    cfg.estimators
        .iter()
        .map(|&kind| {
            let started = Instant::now();
            let (estimate, feasible, fallback) = match kind {
                EstimatorKind::Tree => {
                    let e = localize_tree(g, &r.observation, p, cfg.full_sampled_set)?;
                    (e.source, Some(e.feasible_set.len()), e.fallback)
                }
                EstimatorKind::Graph => {
                    let e = localize_graph(g, &r.observation, p, cfg.theta)?;
                    (e.source, Some(e.feasible_set.len()), e.fallback)
                }
                EstimatorKind::Min => (min_timestamp_estimator(&r.observation, min_coin_seed(seed))?, None, false),
            };
            let elapsed = started.elapsed().as_secs_f64() * 1e3;
            Ok(TrialRecord {
                p,
                q,
                trial,
                source,
                estimator: kind,
                estimate,
                error_distance: distances[estimate].expect("estimates lie in the source component") as u64,
                sampled: r.observation.len(),
                feasible,
                fallback,
                resamples: r.resamples,
                wall_time_ms: cfg.timing.then_some(elapsed),
            })
        })
        .collect()
}
