//! Edge-list ingestion and the `gen:` generator syntax for networks.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::generators::{generate_ba, generate_er, generate_line, generate_regular_tree};
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId};

/// A network loaded from an edge list, restricted to its largest component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadedNetwork {
    pub network: Network,
    /// Original label of each node id.
    pub labels: Vec<String>,
}

/// Parses a whitespace-separated edge list.
///
/// Lines starting with `#` or `%` and blank lines are skipped; extra columns
/// (weights, timestamps) are ignored. Labels are numbered in order of first
/// appearance, self-loops and duplicate edges are dropped, and only the
/// largest connected component is kept (renumbered in ascending order of the
/// first-appearance ids).
pub fn parse_edge_list(text: &str, origin: &Path) -> Result<LoadedNetwork> {
    let mut ids: HashMap<&str, NodeId> = HashMap::new();
    let mut labels: Vec<&str> = Vec::new();
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let (Some(a), Some(b)) = (fields.next(), fields.next()) else {
            return Err(Error::parse(origin, format!("line {}: expected two node labels", lineno + 1)));
        };
        let mut intern = |label| {
            *ids.entry(label).or_insert_with(|| {
                labels.push(label);
                labels.len() - 1
            })
        };
        let (u, v) = (intern(a), intern(b));
        if u != v {
            edges.push((u, v));
        }
    }
    if labels.is_empty() {
        return Err(Error::parse(origin, "edge list contains no edges"));
    }
    let full = Network::from_edges(labels.len(), edges)?;
    let keep = full.largest_component();
    let (network, map) = full.induced(&keep)?;
    Ok(LoadedNetwork {
        network,
        labels: map.into_iter().map(|u| labels[u].to_string()).collect(),
    })
}

pub fn load_edge_list(path: &Path) -> Result<LoadedNetwork> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path)
}

/// Where a network comes from: a generator or an edge-list file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NetworkSpec {
    Line { n: usize },
    RegularTree { g: usize, depth: u32 },
    ErdosRenyi { n: usize, m: usize, seed: u64 },
    BarabasiAlbert { n: usize, m: usize, seed: u64 },
    File(PathBuf),
}

impl NetworkSpec {
    pub fn build(&self) -> Result<Network> {
        match self {
            NetworkSpec::Line { n } => generate_line(*n),
            NetworkSpec::RegularTree { g, depth } => generate_regular_tree(*g, *depth),
            NetworkSpec::ErdosRenyi { n, m, seed } => generate_er(*n, *m, *seed),
            NetworkSpec::BarabasiAlbert { n, m, seed } => generate_ba(*n, *m, *seed),
            NetworkSpec::File(path) => Ok(load_edge_list(path)?.network),
        }
    }
}

impl FromStr for NetworkSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some(rest) = s.strip_prefix("gen:") else {
            return Ok(NetworkSpec::File(PathBuf::from(s)));
        };
        let parts: Vec<&str> = rest.split(':').collect();
        let bad = || Error::input(format!("malformed generator spec `{s}`"));
        fn num<T: FromStr>(field: &str, bad: impl Fn() -> Error) -> Result<T> {
            field.parse().map_err(|_| bad())
        }
        match parts.as_slice() {
            ["line", n] => Ok(NetworkSpec::Line { n: num(n, bad)? }),
            ["rt", g, depth] => Ok(NetworkSpec::RegularTree {
                g: num(g, bad)?,
                depth: num(depth, bad)?,
            }),
            ["er", n, m, seed] => Ok(NetworkSpec::ErdosRenyi {
                n: num(n, bad)?,
                m: num(m, bad)?,
                seed: num(seed, bad)?,
            }),
            ["ba", n, m, seed] => Ok(NetworkSpec::BarabasiAlbert {
                n: num(n, bad)?,
                m: num(m, bad)?,
                seed: num(seed, bad)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for NetworkSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<NetworkSpec> for String {
    fn from(spec: NetworkSpec) -> String {
        spec.to_string()
    }
}

impl fmt::Display for NetworkSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkSpec::Line { n } => write!(f, "gen:line:{n}"),
            NetworkSpec::RegularTree { g, depth } => write!(f, "gen:rt:{g}:{depth}"),
            NetworkSpec::ErdosRenyi { n, m, seed } => write!(f, "gen:er:{n}:{m}:{seed}"),
            NetworkSpec::BarabasiAlbert { n, m, seed } => write!(f, "gen:ba:{n}:{m}:{seed}"),
            NetworkSpec::File(path) => write!(f, "{}", path.display()),
        }
    }
}
