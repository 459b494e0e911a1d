//! Monte Carlo checks of simulated estimator behaviour against closed forms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use super::experiments::{
    random_lip_instance, random_tree_trial, run_line_trials, run_regular_tree_trials, summarize_line,
};
use crate::diffusion::derive_seed;
use crate::error::{Error, Result};
use crate::estimators::{localize_tree, score_tree_candidates};
use crate::lip::{brute_force_lip, message_passing};
use crate::theory::{candidate_path, line_detection_probability, line_expected_distance_bound, naive_line_stats, regular_tree_bound};

/// Nodes on the line used for line-graph experiments.
pub const LINE_NODES: usize = 2001;
/// Depth of the complete regular tree used for tree experiments.
pub const TREE_DEPTH: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidationKind {
    LineTheorem2,
    TreeTheorem3,
    Prop6,
    OracleLip,
    CandidatePath,
}

impl ValidationKind {
    pub const ALL: [ValidationKind; 5] = [
        ValidationKind::LineTheorem2,
        ValidationKind::TreeTheorem3,
        ValidationKind::Prop6,
        ValidationKind::OracleLip,
        ValidationKind::CandidatePath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ValidationKind::LineTheorem2 => "line-theorem2",
            ValidationKind::TreeTheorem3 => "tree-theorem3",
            ValidationKind::Prop6 => "prop6",
            ValidationKind::OracleLip => "oracle-lip",
            ValidationKind::CandidatePath => "candidate-path",
        }
    }
}

impl fmt::Display for ValidationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ValidationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::input(format!("unknown validation kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationParams {
    pub p: f64,
    pub q: f64,
    /// Tree degree for `tree-theorem3`.
    pub g: usize,
    /// Largest horizon `D` checked by `tree-theorem3`.
    pub depth_bound: u32,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ValidationParams {
    fn default() -> Self {
        ValidationParams {
            p: 0.5,
            q: 0.5,
            g: 3,
            depth_bound: 3,
            trials: 1000,
            seed: 0,
        }
    }
}

/// One comparison inside a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    /// `"abs"`, `"rel"`, `"min"` (observed ≥ expected − tolerance) or
    /// `"max"` (observed ≤ expected + tolerance).
    pub mode: &'static str,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn within(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            expected,
            mode: "abs",
            tolerance,
            passed: (observed - expected).abs() <= tolerance,
        }
    }

    fn relative(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            expected,
            mode: "rel",
            tolerance,
            passed: (observed - expected).abs() <= tolerance * expected.abs(),
        }
    }

    fn at_least(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            expected,
            mode: "min",
            tolerance,
            passed: observed >= expected - tolerance,
        }
    }

    fn at_most(name: impl Into<String>, observed: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            observed,
            expected,
            mode: "max",
            tolerance,
            passed: observed <= expected + tolerance,
        }
    }
}

/// Machine-readable verdict of a validation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kind: ValidationKind,
    pub passed: bool,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    /// Additional statistics that are reported but not judged.
    pub diagnostics: BTreeMap<String, f64>,
}

impl ValidationReport {
    fn new(kind: ValidationKind, params: &ValidationParams, checks: Vec<Check>, diagnostics: BTreeMap<String, f64>) -> Self {
        ValidationReport {
            kind,
            passed: checks.iter().all(|c| c.passed),
            trials: params.trials,
            seed: params.seed,
            checks,
            diagnostics,
        }
    }
}

pub fn run_validation(kind: ValidationKind, params: &ValidationParams) -> Result<ValidationReport> {
    if params.trials < 1 {
        return Err(Error::input("trials must be at least 1"));
    }
    match kind {
        ValidationKind::LineTheorem2 => line_theorem2(params),
        ValidationKind::TreeTheorem3 => tree_theorem3(params),
        ValidationKind::Prop6 => prop6(params),
        ValidationKind::OracleLip => oracle_lip(params),
        ValidationKind::CandidatePath => candidate_path_check(params),
    }
}

fn line_theorem2(params: &ValidationParams) -> Result<ValidationReport> {
    let trials = run_line_trials(LINE_NODES, params.p, params.q, params.trials, params.seed)?;
    let s = summarize_line(&trials);
    let mut checks = vec![Check::within(
        "detection_rate",
        s.detection_rate,
        line_detection_probability(params.p, params.q)?,
        0.02,
    )];
    if params.q < 1.0 {
        checks.push(Check::at_most(
            "mean_distance",
            s.mean_distance,
            line_expected_distance_bound(params.p, params.q)?,
            0.05,
        ));
    }
    let diagnostics = BTreeMap::from([
        ("tie_inclusive_rate".to_string(), s.tie_inclusive_rate),
        ("mean_distance".to_string(), s.mean_distance),
        (
            "formula_match_rate".to_string(),
            s.formula_matches as f64 / s.formula_applicable.max(1) as f64,
        ),
    ]);
    Ok(ValidationReport::new(ValidationKind::LineTheorem2, params, checks, diagnostics))
}

fn tree_theorem3(params: &ValidationParams) -> Result<ValidationReport> {
    let trials = run_regular_tree_trials(params.g, TREE_DEPTH, params.p, params.q, params.trials, params.seed)?;
    let n = trials.len() as f64;
    let mut checks = Vec::new();
    for d in 1..=params.depth_bound {
        let bound = regular_tree_bound(params.g as u32, params.p, params.q, d)?.bound;
        let hit = trials.iter().filter(|t| t.distance <= u64::from(d)).count() as f64 / n;
        checks.push(Check::at_least(format!("p_within_{d}"), hit, bound, 0.02));
    }
    let flagged = trials.iter().filter(|t| t.boundary).count() as f64 / n;
    checks.push(Check::at_most("boundary_share", flagged, 0.0, 0.01));
    let diagnostics = BTreeMap::from([(
        "mean_distance".to_string(),
        trials.iter().map(|t| t.distance as f64).sum::<f64>() / n,
    )]);
    Ok(ValidationReport::new(ValidationKind::TreeTheorem3, params, checks, diagnostics))
}

fn prop6(params: &ValidationParams) -> Result<ValidationReport> {
    let trials = run_line_trials(LINE_NODES, params.p, params.q, params.trials, params.seed)?;
    let s = summarize_line(&trials);
    let (rate, mean) = naive_line_stats(params.q)?;
    let mut checks = vec![Check::within("min_detection_rate", s.min_detection_rate, rate, 0.02)];
    if mean > 0.0 {
        checks.push(Check::relative("min_mean_distance", s.min_mean_distance, mean, 0.05));
    } else {
        checks.push(Check::within("min_mean_distance", s.min_mean_distance, 0.0, 0.0));
    }
    checks.push(Check::within("dominance_share", s.dominated as f64 / s.trials as f64, 1.0, 0.0));
    let diagnostics = BTreeMap::from([
        ("inf_mean_distance".to_string(), s.mean_distance),
        ("dominance_violations".to_string(), (s.trials - s.dominated) as f64),
    ]);
    Ok(ValidationReport::new(ValidationKind::Prop6, params, checks, diagnostics))
}

fn oracle_lip(params: &ValidationParams) -> Result<ValidationReport> {
    let outcomes: Vec<(bool, bool)> = (0..params.trials)
        .into_par_iter()
        .map(|i| {
            let inst = random_lip_instance(9, 2, derive_seed(params.seed, i as u64))?;
            let mp = message_passing(&inst.tree, &inst.observation)?.map(|m| m.aggregate_delay());
            let bf = brute_force_lip(&inst.tree, &inst.observation, 1)?;
            Ok((mp == bf, bf.is_some()))
        })
        .collect::<Result<_>>()?;
    let agree = outcomes.iter().filter(|o| o.0).count() as f64;
    let feasible = outcomes.iter().filter(|o| o.1).count() as f64;
    let checks = vec![Check::within("agreement", agree, params.trials as f64, 0.0)];
    let diagnostics = BTreeMap::from([("feasible_instances".to_string(), feasible)]);
    Ok(ValidationReport::new(ValidationKind::OracleLip, params, checks, diagnostics))
}

/// Per-trial outcome of the candidate-path checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CandidatePathOutcome {
    pub on_path: bool,
    pub interior_unobserved: bool,
    pub endpoint_rule: bool,
    pub virtual_times: bool,
    pub screening: bool,
}

/// Runs the candidate-path checks on a random-tree trial whose source is
/// unobserved; `None` when the source happens to be observed.
pub fn candidate_path_trial(seed: u64) -> Result<Option<CandidatePathOutcome>> {
    let trial = random_tree_trial(10, 200, seed)?;
    let (g, obs, v_star) = (&trial.network, &trial.realization.observation, trial.realization.source);
    if obs.contains(v_star) {
        return Ok(None);
    }
    let cp = candidate_path(g, v_star, obs)?;
    let est = localize_tree(g, obs, trial.p, true)?;
    let path = &cp.path_nodes;
    let m = path.len() - 1;

    let interior_unobserved = path[..m].iter().all(|&u| !obs.contains(u));
    let endpoint_rule = obs.contains(path[m]) == (cp.u_star.len() == 1);

    let all: Vec<_> = obs.nodes().collect();
    let ct = crate::lip::build_cascading_tree(g, path[0], &all)?;
    let depth_from = g.hop_distances(cp.anchor);
    let base = cp
        .u
        .iter()
        .map(|&s| obs.timestamps()[&s] - depth_from[s].expect("connected") as i64)
        .min()
        .expect("U is non-empty");
    let virtual_times = match message_passing(&ct, obs)? {
        Some(mp) => path
            .iter()
            .enumerate()
            .all(|(i, &u)| mp.virtual_timestamp(u) == Some(base + i as i64)),
        None => false,
    };

    let sampled = obs.sampled_set();
    let region = crate::estimators::reduced_search_space(g, obs)?;
    let scores = score_tree_candidates(g, obs, &region, &all)?;
    let mut screening = true;
    for (u, score) in scores {
        if g.sampled_distance(v_star, u, &sampled)? >= 2 && score.is_some() {
            screening = false;
        }
    }

    Ok(Some(CandidatePathOutcome {
        on_path: cp.contains(est.source),
        interior_unobserved,
        endpoint_rule,
        virtual_times,
        screening,
    }))
}

fn candidate_path_check(params: &ValidationParams) -> Result<ValidationReport> {
    let outcomes: Vec<CandidatePathOutcome> = (0..params.trials)
        .into_par_iter()
        .map(|i| {
            let base = derive_seed(params.seed, i as u64);
            let mut k = 0;
            loop {
                if let Some(o) = candidate_path_trial(derive_seed(base, k))? {
                    return Ok(o);
                }
                k += 1;
            }
        })
        .collect::<Result<_>>()?;
    let n = params.trials as f64;
    let share = |f: fn(&CandidatePathOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
    let checks = vec![
        Check::within("estimate_on_path", share(|o| o.on_path), 1.0, 0.0),
        Check::within("interior_unobserved", share(|o| o.interior_unobserved), 1.0, 0.0),
        Check::within("endpoint_rule", share(|o| o.endpoint_rule), 1.0, 0.0),
        Check::within("virtual_timestamps", share(|o| o.virtual_times), 1.0, 0.0),
        Check::within("infeasibility_screening", share(|o| o.screening), 1.0, 0.0),
    ];
    Ok(ValidationReport::new(ValidationKind::CandidatePath, params, checks, BTreeMap::new()))
}
