//! Experiment plumbing: network generators, edge-list ingestion, parameter
//! sweeps and Monte Carlo validation against the closed forms in
//! [`crate::theory`].

pub mod experiments;
pub mod generators;
pub mod ingest;
pub mod sweep;
pub mod validate;

pub use generators::{generate_ba, generate_er, generate_line, generate_regular_tree};
pub use ingest::{load_edge_list, parse_edge_list, LoadedNetwork, NetworkSpec};
pub use sweep::{run_sweep, EstimatorKind, SummaryRow, SweepConfig, SweepOutcome, TrialRecord};
pub use validate::{run_validation, ValidationKind, ValidationParams, ValidationReport};
