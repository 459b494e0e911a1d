//! Locating the source of an SI diffusion from a sample of first-infection
//! timestamps.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`]: adjacency-list networks, BFS trees, tree paths and Steiner subtrees.
//! * [`diffusion`]: the discrete-time SI simulator and observer sampling.
//! * [`lip`]: cascading trees and the message-passing solver for the
//!   minimum-aggregate-delay integer program, with a brute-force oracle.
//! * [`estimators`]: the infection-path estimator on trees and general graphs,
//!   plus the minimum-timestamp baseline.
//! * [`theory`]: closed-form localization guarantees and the candidate path.
//! * [`harness`]: generators, dataset ingestion, sweeps and Monte Carlo validation.

pub mod diffusion;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod harness;
pub mod lip;
pub mod theory;

pub use diffusion::{Cascade, DiffusionConfig, Observation};
pub use error::{Error, Result};
pub use estimators::Estimate;
pub use graph::{Network, NodeId, NodePath, RootedTree};
pub use lip::{CascadingTree, MessagePassingResult};
