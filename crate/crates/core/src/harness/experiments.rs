//! Monte Carlo experiments binding simulations to the estimators.
//!
//! Every experiment is a pure function of its parameters and a master seed:
//! trial `i` draws everything from `derive_seed(seed, i)`, and trials run in
//! parallel with results collected in index order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::generators::{generate_line, generate_regular_tree};
use crate::diffusion::{derive_seed, rng_from_seed, sample_observers, simulate_si, Cascade, DiffusionConfig, Observation};
use crate::error::{Error, Result};
use crate::estimators::{localize_tree, min_timestamp_estimator, Estimate};
use crate::graph::{Network, NodeId};
use crate::lip::{build_cascading_tree, CascadingTree};
use crate::theory::{candidate_path, line_error_from_sigmas, LineRealization};

/// Observation attempts before giving up on a non-empty sample.
const MAX_RESAMPLES: u64 = 1_000_000;

/// Samples observers until at least one is drawn. Attempt `k` uses
/// `derive_seed(seed, k)`; the number of discarded empty samples is returned
/// alongside the observation.
pub fn observe_nonempty(cascade: &Cascade, q: f64, seed: u64) -> Result<(Observation, u64)> {
    for k in 0..MAX_RESAMPLES {
        let obs = sample_observers(cascade, q, derive_seed(seed, k))?;
        if !obs.is_empty() {
            return Ok((obs, k));
        }
    }
    Err(Error::input(format!("no observer drawn in {MAX_RESAMPLES} attempts at q = {q}")))
}

/// One realised diffusion with its observation.
#[derive(Debug, Clone)]
pub struct Realization {
    pub source: NodeId,
    pub cascade: Cascade,
    pub observation: Observation,
    pub resamples: u64,
}

/// Simulates from `source` and observes with rate `q`, using sub-streams of `seed`.
pub fn realize(g: &Network, source: NodeId, p: f64, q: f64, seed: u64) -> Result<Realization> {
    let cfg = DiffusionConfig { p, t0: 0, source };
    let cascade = simulate_si(g, &cfg, derive_seed(seed, 1))?;
    let (observation, resamples) = observe_nonempty(&cascade, q, derive_seed(seed, 2))?;
    Ok(Realization {
        source,
        cascade,
        observation,
        resamples,
    })
}

/// Seed for the minimum-timestamp estimator's tie coin within a trial.
pub fn min_coin_seed(trial_seed: u64) -> u64 {
    derive_seed(trial_seed, 3)
}

/// Outcome of one trial on a line.
#[derive(Debug, Clone)]
pub struct LineTrial {
    pub source: NodeId,
    pub estimate: NodeId,
    /// Every node tied with the estimate.
    pub ties: Vec<NodeId>,
    pub d_inf: u64,
    pub min_estimate: NodeId,
    pub d_min: u64,
    pub source_observed: bool,
    /// Flanking observers; `None` if one side of the line has none.
    pub realization: Option<LineRealization>,
}

impl LineTrial {
    /// Error distance predicted by the σ-gap formula, when it applies.
    pub fn predicted_distance(&self) -> Option<u64> {
        if self.source_observed {
            return None;
        }
        self.realization.as_ref().map(line_error_from_sigmas)
    }
}

/// Runs `trials` trials on a centred `n`-node line with both estimators.
pub fn run_line_trials(n: usize, p: f64, q: f64, trials: usize, seed: u64) -> Result<Vec<LineTrial>> {
    let g = generate_line(n)?;
    let source = n / 2;
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_seed(seed, i as u64);
            let r = realize(&g, source, p, q, trial_seed)?;
            let est = localize_tree(&g, &r.observation, p, true)?;
            let min_estimate = min_timestamp_estimator(&r.observation, min_coin_seed(trial_seed))?;
            Ok(LineTrial {
                source,
                estimate: est.source,
                ties: est.ties,
                d_inf: est.source.abs_diff(source) as u64,
                min_estimate,
                d_min: min_estimate.abs_diff(source) as u64,
                source_observed: r.observation.contains(source),
                realization: LineRealization::from_line(source, &r.observation),
            })
        })
        .collect()
}

/// Aggregates of a batch of line trials.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSummary {
    pub trials: usize,
    pub detection_rate: f64,
    pub mean_distance: f64,
    /// Share of trials where the source is among the estimator's ties.
    pub tie_inclusive_rate: f64,
    pub min_detection_rate: f64,
    pub min_mean_distance: f64,
    /// Trials with `d_inf ≤ d_min`.
    pub dominated: usize,
    /// Trials where the σ-gap formula applies.
    pub formula_applicable: usize,
    /// Of those, trials where it matches the observed distance.
    pub formula_matches: usize,
}

pub fn summarize_line(trials: &[LineTrial]) -> LineSummary {
    let n = trials.len() as f64;
    let mean = |f: &dyn Fn(&LineTrial) -> f64| trials.iter().map(f).sum::<f64>() / n;
    let applicable: Vec<(u64, u64)> = trials
        .iter()
        .filter_map(|t| t.predicted_distance().map(|d| (d, t.d_inf)))
        .collect();
    LineSummary {
        trials: trials.len(),
        detection_rate: mean(&|t| f64::from(u8::from(t.d_inf == 0))),
        mean_distance: mean(&|t| t.d_inf as f64),
        tie_inclusive_rate: mean(&|t| f64::from(u8::from(t.ties.contains(&t.source)))),
        min_detection_rate: mean(&|t| f64::from(u8::from(t.d_min == 0))),
        min_mean_distance: mean(&|t| t.d_min as f64),
        dominated: trials.iter().filter(|t| t.d_inf <= t.d_min).count(),
        formula_applicable: applicable.len(),
        formula_matches: applicable.iter().filter(|(a, b)| a == b).count(),
    }
}

/// Draws `count` values of `σ₁ − σ₂` from simulated diffusions on a centred
/// `n`-node line. Realizations lacking an observer on either side are redrawn.
pub fn line_sigma_differences(n: usize, p: f64, q: f64, count: usize, seed: u64) -> Result<Vec<i64>> {
    let g = generate_line(n)?;
    let source = n / 2;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_seed(seed, i as u64);
            for attempt in 0..MAX_RESAMPLES {
                let r = realize(&g, source, p, q, derive_seed(trial_seed, attempt))?;
                if let Some(lr) = LineRealization::from_line(source, &r.observation) {
                    return Ok(lr.sigma1() - lr.sigma2());
                }
            }
            Err(Error::input("line too short to flank the source with observers"))
        })
        .collect()
}

/// Outcome of one trial on a complete regular tree with the source at the root.
#[derive(Debug, Clone)]
pub struct TreeTrial {
    pub source: NodeId,
    pub estimate: Estimate,
    pub distance: u64,
    pub source_observed: bool,
    /// The candidate path of an unobserved source touches a depth-boundary leaf.
    pub boundary: bool,
}

pub fn run_regular_tree_trials(
    g_degree: usize,
    depth: u32,
    p: f64,
    q: f64,
    trials: usize,
    seed: u64,
) -> Result<Vec<TreeTrial>> {
    let g = generate_regular_tree(g_degree, depth)?;
    let source = 0;
    let depths = g.hop_distances(source);
    let leaf = |u: NodeId| depths[u] == Some(depth as usize);
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_seed(seed, i as u64);
            let r = realize(&g, source, p, q, trial_seed)?;
            let estimate = localize_tree(&g, &r.observation, p, true)?;
            let distance = depths[estimate.source].expect("tree is connected") as u64;
            let source_observed = r.observation.contains(source);
            let boundary = !source_observed
                && candidate_path(&g, source, &r.observation)?
                    .path_nodes
                    .iter()
                    .any(|&u| leaf(u));
            Ok(TreeTrial {
                source,
                distance,
                source_observed,
                boundary,
                estimate,
            })
        })
        .collect()
}

/// A uniformly labelled random recursive tree on `n` nodes.
pub fn random_tree(n: usize, seed: u64) -> Result<Network> {
    let mut rng = rng_from_seed(seed);
    let mut labels: Vec<NodeId> = (0..n).collect();
    labels.shuffle(&mut rng);
    Network::from_edges(n, (1..n).map(|i| (labels[i], labels[rng.gen_range(0..i)])))
}

/// A random tree, a uniformly placed source and a non-empty observation.
#[derive(Debug, Clone)]
pub struct RandomTreeTrial {
    pub network: Network,
    pub p: f64,
    pub q: f64,
    pub realization: Realization,
}

/// Draws a random-tree trial: `n` uniform in `[min_nodes, max_nodes]`,
/// `p` uniform in `[0.2, 0.9]`, `q` uniform in `[0.1, 0.5]`.
pub fn random_tree_trial(min_nodes: usize, max_nodes: usize, seed: u64) -> Result<RandomTreeTrial> {
    let mut rng = rng_from_seed(derive_seed(seed, 0));
    let n = rng.gen_range(min_nodes..=max_nodes);
    let p = rng.gen_range(0.2..=0.9);
    let q = rng.gen_range(0.1..=0.5);
    let network = random_tree(n, derive_seed(seed, 4))?;
    let source = rng.gen_range(0..n);
    let realization = realize(&network, source, p, q, seed)?;
    Ok(RandomTreeTrial {
        network,
        p,
        q,
        realization,
    })
}

/// A small cascading-tree instance for cross-checking the LIP solvers.
#[derive(Debug, Clone)]
pub struct LipInstance {
    pub tree: CascadingTree,
    pub observation: Observation,
}

/// Random cascading tree on at most `max_nodes` nodes with at least
/// `min_free` unsampled nodes and integer timestamps in `[0, 2·size]`.
/// Roughly half the instances are built from a consistent labelling (and
/// so are feasible); the rest get independent random timestamps.
pub fn random_lip_instance(max_nodes: usize, min_free: usize, seed: u64) -> Result<LipInstance> {
    let mut rng = rng_from_seed(seed);
    for attempt in 0..MAX_RESAMPLES {
        let n = rng.gen_range(min_free + 1..=max_nodes.max(min_free + 1));
        let g = random_tree(n, derive_seed(seed, attempt))?;
        let root = rng.gen_range(0..n);
        let sampled: Vec<NodeId> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if sampled.is_empty() {
            continue;
        }
        let ct = build_cascading_tree(&g, root, &sampled)?;
        let free = ct.tree().order().iter().filter(|&&u| !ct.is_sampled(u)).count();
        if free < min_free {
            continue;
        }
        let span = 2 * n as i64;
        let timestamps: BTreeMap<NodeId, i64> = if rng.gen_bool(0.5) {
            let mut label = vec![0i64; n];
            for &u in &ct.tree().order()[1..] {
                let parent = ct.tree().parent(u).expect("non-root");
                label[u] = label[parent] + rng.gen_range(1..=3);
            }
            ct.sampled_in_tree().iter().map(|&s| (s, label[s])).collect()
        } else {
            ct.sampled_in_tree()
                .iter()
                .map(|&s| (s, rng.gen_range(0..=span)))
                .collect()
        };
        return Ok(LipInstance {
            tree: ct,
            observation: Observation::new(timestamps),
        });
    }
    Err(Error::input("could not draw a LIP instance with the requested free nodes"))
}
