use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use infpath::diffusion::{sample_observers, simulate_si};
use infpath::estimators::{localize_graph, localize_tree, min_timestamp_estimator, DEFAULT_THETA};
use infpath::harness::{run_sweep, run_validation, NetworkSpec, SweepConfig, ValidationKind, ValidationParams};
use infpath::theory::{self, LineTheory};
use infpath::{Cascade, DiffusionConfig, Network, Observation};
use serde_json::json;

/// Source localization from partially observed SI cascades.
#[derive(Debug, Parser)]
#[command(name = "infpath", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one SI cascade and write first-infection times as JSON.
    Simulate {
        /// Edge-list file or generator spec (`gen:line:N`, `gen:rt:G:DEPTH`,
        /// `gen:er:N:M:SEED`, `gen:ba:N:M:SEED`).
        #[arg(long)]
        graph: NetworkSpec,
        #[arg(long)]
        source: usize,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample observers from a cascade file.
    Observe {
        #[arg(long)]
        cascade: PathBuf,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the source of an observation.
    Estimate {
        #[arg(long)]
        graph: NetworkSpec,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        p: f64,
        /// Coverage threshold of the general-graph estimator.
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long, value_enum, default_value_t = Method::Tree)]
        method: Method,
        /// Span every observer instead of only those inside the search region.
        #[arg(long)]
        full_sampled_set: bool,
        /// Tie-breaking seed of the minimum-timestamp method.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run a parameter sweep described by a TOML file and emit CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print closed-form guarantees.
    Theory {
        #[arg(long, value_enum)]
        kind: TheoryKind,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 3)]
        g: u32,
        #[arg(long, default_value_t = 3)]
        depth_bound: u32,
    },
    /// Compare Monte Carlo estimates with theory; exits non-zero on failure.
    Validate {
        /// One of line-theorem2, tree-theorem3, prop6, oracle-lip, candidate-path.
        #[arg(long)]
        kind: ValidationKind,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value_t = 0.5)]
        q: f64,
        #[arg(long, default_value_t = 3)]
        g: usize,
        #[arg(long, default_value_t = 3)]
        depth_bound: u32,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Method {
    Tree,
    Graph,
    Min,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TheoryKind {
    Line,
    Tree,
    Min,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn build(spec: &NetworkSpec) -> Result<Network> {
    spec.build().with_context(|| format!("building network `{spec}`"))
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate {
            graph,
            source,
            p,
            seed,
            out,
        } => {
            let g = build(&graph)?;
            let cfg = DiffusionConfig { p, t0: 0, source };
            let cascade = simulate_si(&g, &cfg, seed)?;
            emit(&pretty(&cascade)?, out.as_deref())?;
        }
        Command::Observe { cascade, q, seed, out } => {
            let cascade: Cascade = read_json(&cascade)?;
            let obs = sample_observers(&cascade, q, seed)?;
            emit(&pretty(&obs)?, out.as_deref())?;
        }
        Command::Estimate {
            graph,
            obs,
            p,
            theta,
            method,
            full_sampled_set,
            seed,
        } => {
            let g = build(&graph)?;
            let obs: Observation = read_json(&obs)?;
            let report = match method {
                Method::Min => json!({
                    "method": "min",
                    "source": min_timestamp_estimator(&obs, seed)?,
                }),
                Method::Tree | Method::Graph => {
                    let est = match method {
                        Method::Tree => localize_tree(&g, &obs, p, full_sampled_set)?,
                        _ => localize_graph(&g, &obs, p, theta)?,
                    };
                    json!({
                        "method": if matches!(method, Method::Tree) { "tree" } else { "graph" },
                        "source": est.source,
                        "score": est.score,
                        "log_likelihood": est.log_likelihood.is_finite().then_some(est.log_likelihood),
                        "ties": est.ties,
                        "search_region_size": est.search_region.len(),
                        "feasible_count": est.feasible_set.len(),
                        "fallback": est.fallback,
                    })
                }
            };
            emit(&pretty(&report)?, None)?;
        }
        Command::Sweep { config } => {
            let cfg = SweepConfig::load(&config)?;
            let outcome = run_sweep(&cfg)?;
            outcome.write_outputs(&cfg)?;
            if cfg.output.is_none() {
                emit(&outcome.csv(), None)?;
            }
        }
        Command::Theory {
            kind,
            p,
            q,
            g,
            depth_bound,
        } => {
            let report = match kind {
                TheoryKind::Line => {
                    let line = LineTheory::new(p, q)?;
                    json!({
                        "kind": "line",
                        "p": p,
                        "q": q,
                        "detection_probability": line.detection_probability(),
                        "expected_distance_bound": theory::line_expected_distance_bound(p, q)?,
                    })
                }
                TheoryKind::Tree => {
                    let mut bounds = Vec::new();
                    for d in 1..=depth_bound {
                        bounds.push(json!({ "depth": d, "bound": theory::regular_tree_bound(g, p, q, d)?.bound }));
                    }
                    let last = theory::regular_tree_bound(g, p, q, depth_bound)?;
                    json!({
                        "kind": "tree",
                        "g": g,
                        "p": p,
                        "q": q,
                        "bounds": bounds,
                        "x_star": last.x_star,
                    })
                }
                TheoryKind::Min => {
                    let (detection, mean) = theory::naive_line_stats(q)?;
                    json!({
                        "kind": "min",
                        "q": q,
                        "detection_probability": detection,
                        "mean_distance": mean,
                    })
                }
            };
            emit(&pretty(&report)?, None)?;
        }
        Command::Validate {
            kind,
            trials,
            seed,
            p,
            q,
            g,
            depth_bound,
        } => {
            if trials == 0 {
                bail!("--trials must be positive");
            }
            let params = ValidationParams {
                p,
                q,
                g,
                depth_bound,
                trials,
                seed,
            };
            let report = run_validation(kind, &params)?;
            emit(&pretty(&report)?, None)?;
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
