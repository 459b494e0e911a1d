//! Discrete-time SI diffusion and uniform observer sampling.

use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Network, NodeId};

/// Parameters of one SI run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    /// Per-slot, per-edge infection success probability, in `(0, 1]`.
    pub p: f64,
    /// Slot in which the source is infected.
    pub t0: i64,
    pub source: NodeId,
}

/// Outcome of a simulated diffusion: who was infected when, and by whom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cascade {
    pub source: NodeId,
    /// First-infection slot per node; `None` outside the source's component.
    pub first_infection: Vec<Option<i64>>,
    /// The neighbor whose attempt infected each node (lowest id on same-slot ties).
    pub infection_parent: Vec<Option<NodeId>>,
}

impl Cascade {
    pub fn node_count(&self) -> usize {
        self.first_infection.len()
    }

    pub fn infected(&self) -> impl Iterator<Item = (NodeId, i64)> + '_ {
        self.first_infection
            .iter()
            .enumerate()
            .filter_map(|(u, t)| t.map(|t| (u, t)))
    }
}

/// Mixes a master seed and a stream index into an independent 64-bit seed
/// (two rounds of the SplitMix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(index))
}

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub(crate) fn check_probability(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must lie in (0, 1], got {value}")))
    }
}

/// Runs the SI process slot by slot until the source's component is fully
/// infected.
///
/// In every slot each susceptible node with infected neighbors draws one
/// Bernoulli(p) per infected neighbor, in ascending neighbor order; it becomes
/// infected if any draw succeeds, and its infection parent is the lowest-id
/// neighbor that succeeded. Frontier nodes are visited in ascending id order,
/// so the result is a pure function of `(g, cfg, seed)`.
pub fn simulate_si(g: &Network, cfg: &DiffusionConfig, seed: u64) -> Result<Cascade> {
    check_probability("p", cfg.p)?;
    g.check_node(cfg.source)?;
    let n = g.node_count();
    let coin = Bernoulli::new(cfg.p).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = rng_from_seed(seed);

    let mut first_infection = vec![None; n];
    let mut infection_parent = vec![None; n];
    first_infection[cfg.source] = Some(cfg.t0);

    let mut frontier: BTreeSet<NodeId> = g
        .neighbors(cfg.source)
        .iter()
        .copied()
        .collect();
    let mut slot = cfg.t0;
    let mut newly = Vec::new();
    while !frontier.is_empty() {
        slot += 1;
        newly.clear();
        for &u in &frontier {
            let mut parent = None;
            for &w in g.neighbors(u) {
                if first_infection[w].is_some() && coin.sample(&mut rng) && parent.is_none() {
                    parent = Some(w);
                }
            }
            if let Some(w) = parent {
                newly.push((u, w));
            }
        }
        for &(u, w) in &newly {
            first_infection[u] = Some(slot);
            infection_parent[u] = Some(w);
            frontier.remove(&u);
        }
        for &(u, _) in &newly {
            for &v in g.neighbors(u) {
                if first_infection[v].is_none() {
                    frontier.insert(v);
                }
            }
        }
    }

    Ok(Cascade {
        source: cfg.source,
        first_infection,
        infection_parent,
    })
}

/// Anything that can report the observed timestamp of a node.
pub trait Timestamps {
    fn timestamp(&self, u: NodeId) -> Option<i64>;
}

/// Observed first-infection timestamps of the sampled node set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ObservationDoc", into = "ObservationDoc")]
pub struct Observation {
    timestamps: BTreeMap<NodeId, i64>,
}

/// Wire form: `{"nodes": [...], "timestamps": {"id": t, ...}}`.
#[derive(Serialize, Deserialize)]
struct ObservationDoc {
    nodes: Vec<NodeId>,
    timestamps: BTreeMap<NodeId, i64>,
}

impl TryFrom<ObservationDoc> for Observation {
    type Error = Error;

    fn try_from(doc: ObservationDoc) -> Result<Self> {
        let nodes: BTreeSet<NodeId> = doc.nodes.iter().copied().collect();
        if nodes.len() != doc.nodes.len() {
            return Err(Error::input("observation lists a node twice"));
        }
        if !nodes.iter().eq(doc.timestamps.keys()) {
            return Err(Error::input(
                "observation timestamps must be defined exactly on the sampled nodes",
            ));
        }
        Ok(Observation {
            timestamps: doc.timestamps,
        })
    }
}

impl From<Observation> for ObservationDoc {
    fn from(obs: Observation) -> Self {
        ObservationDoc {
            nodes: obs.timestamps.keys().copied().collect(),
            timestamps: obs.timestamps,
        }
    }
}

impl Observation {
    pub fn new(timestamps: BTreeMap<NodeId, i64>) -> Self {
        Observation { timestamps }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.timestamps.contains_key(&u)
    }

    /// Sampled nodes in ascending order.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.timestamps.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeId, i64)> + '_ {
        self.timestamps.iter().map(|(&u, &t)| (u, t))
    }

    pub fn sampled_set(&self) -> BTreeSet<NodeId> {
        self.timestamps.keys().copied().collect()
    }

    pub fn timestamps(&self) -> &BTreeMap<NodeId, i64> {
        &self.timestamps
    }

    /// The earliest-observed sampled node, lowest id on ties.
    pub fn earliest(&self) -> Option<(NodeId, i64)> {
        self.iter().min_by_key(|&(u, t)| (t, u))
    }

    /// Sampled nodes satisfying `keep`, with their timestamps.
    pub fn restrict(&self, mut keep: impl FnMut(NodeId) -> bool) -> Observation {
        Observation::new(
            self.timestamps
                .iter()
                .filter(|(&u, _)| keep(u))
                .map(|(&u, &t)| (u, t))
                .collect(),
        )
    }

    /// Dense lookup table over `node_count` ids.
    pub fn table(&self, node_count: usize) -> Result<TimeTable> {
        let mut times = vec![None; node_count];
        for (u, t) in self.iter() {
            if u >= node_count {
                return Err(Error::NodeOutOfRange { node: u, node_count });
            }
            times[u] = Some(t);
        }
        Ok(TimeTable(times))
    }
}

impl Timestamps for Observation {
    fn timestamp(&self, u: NodeId) -> Option<i64> {
        self.timestamps.get(&u).copied()
    }
}

/// Observed timestamps indexed densely by node id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTable(Vec<Option<i64>>);

impl TimeTable {
    pub fn is_sampled(&self, u: NodeId) -> bool {
        self.0.get(u).is_some_and(Option::is_some)
    }
}

impl Timestamps for TimeTable {
    fn timestamp(&self, u: NodeId) -> Option<i64> {
        self.0.get(u).copied().flatten()
    }
}

/// Samples each infected node independently with probability `q`. The result
/// may be empty.
pub fn sample_observers(c: &Cascade, q: f64, seed: u64) -> Result<Observation> {
    check_probability("q", q)?;
    let coin = Bernoulli::new(q).map_err(|e| Error::input(e.to_string()))?;
    let mut rng = rng_from_seed(seed);
    let timestamps = c
        .infected()
        .filter(|_| coin.sample(&mut rng))
        .collect();
    Ok(Observation::new(timestamps))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Network {
        Network::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn binary_tree(depth: u32) -> Network {
        let n = (1usize << (depth + 1)) - 1;
        Network::from_edges(n, (1..n).map(|v| ((v - 1) / 2, v))).unwrap()
    }

    #[test]
    fn deterministic_delays_when_p_is_one() {
        let g = binary_tree(4);
        let cfg = DiffusionConfig { p: 1.0, t0: -3, source: 5 };
        let c = simulate_si(&g, &cfg, 7).unwrap();
        let depth = g.bfs_tree(5).unwrap();
        for u in 0..g.node_count() {
            assert_eq!(c.first_infection[u], Some(-3 + depth.depth(u).unwrap() as i64));
        }
    }

    #[test]
    fn single_node_graph() {
        let g = Network::from_edges(1, []).unwrap();
        let c = simulate_si(&g, &DiffusionConfig { p: 0.3, t0: 4, source: 0 }, 1).unwrap();
        assert_eq!(c.first_infection, vec![Some(4)]);
        assert_eq!(c.infection_parent, vec![None]);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let g = line(3);
        for p in [0.0, -0.1, 1.5, f64::NAN] {
            let cfg = DiffusionConfig { p, t0: 0, source: 0 };
            assert!(matches!(simulate_si(&g, &cfg, 0), Err(Error::Input(_))));
        }
        let c = simulate_si(&g, &DiffusionConfig { p: 0.5, t0: 0, source: 0 }, 0).unwrap();
        assert!(sample_observers(&c, 0.0, 0).is_err());
        assert!(sample_observers(&c, 1.01, 0).is_err());
    }

    #[test]
    fn parents_form_a_tree_with_unit_or_longer_gaps() {
        let g = Network::from_edges(
            8,
            [(0, 1), (1, 2), (2, 3), (3, 0), (1, 4), (4, 5), (5, 6), (6, 7), (7, 4), (2, 6)],
        )
        .unwrap();
        for seed in 0..50 {
            let c = simulate_si(&g, &DiffusionConfig { p: 0.4, t0: 0, source: 2 }, seed).unwrap();
            assert_eq!(c.infection_parent[2], None);
            for u in 0..8 {
                let tu = c.first_infection[u].unwrap();
                if let Some(w) = c.infection_parent[u] {
                    assert!(g.has_edge(u, w));
                    assert!(tu > c.first_infection[w].unwrap());
                } else {
                    assert_eq!(u, 2);
                }
                // walking parents reaches the source without cycles
                let mut cur = u;
                let mut steps = 0;
                while let Some(w) = c.infection_parent[cur] {
                    cur = w;
                    steps += 1;
                    assert!(steps <= 8);
                }
                assert_eq!(cur, 2);
            }
        }
    }

    #[test]
    fn reproducible_per_seed() {
        let g = binary_tree(6);
        let cfg = DiffusionConfig { p: 0.3, t0: 0, source: 0 };
        assert_eq!(simulate_si(&g, &cfg, 99).unwrap(), simulate_si(&g, &cfg, 99).unwrap());
        assert_ne!(simulate_si(&g, &cfg, 99).unwrap(), simulate_si(&g, &cfg, 100).unwrap());
    }

    #[test]
    fn mean_gap_on_a_line_matches_geometric_mean() {
        let g = line(3);
        let cfg = DiffusionConfig { p: 0.5, t0: 0, source: 1 };
        let runs = 10_000;
        let mut total = 0i64;
        let mut count = 0i64;
        for seed in 0..runs {
            let c = simulate_si(&g, &cfg, derive_seed(11, seed)).unwrap();
            for leaf in [0, 2] {
                total += c.first_infection[leaf].unwrap();
                count += 1;
            }
        }
        let mean = total as f64 / count as f64;
        assert!((mean - 2.0).abs() < 0.05, "mean gap {mean}");
    }

    #[test]
    fn gap_pmf_matches_geometric() {
        // marginal gap distribution along parent edges on a tree
        let g = binary_tree(5);
        let p = 0.35;
        let cfg = DiffusionConfig { p, t0: 0, source: 0 };
        let mut counts = [0usize; 4];
        let mut total = 0usize;
        for seed in 0..400 {
            let c = simulate_si(&g, &cfg, derive_seed(5, seed)).unwrap();
            for u in 1..g.node_count() {
                let w = c.infection_parent[u].unwrap();
                let gap = (c.first_infection[u].unwrap() - c.first_infection[w].unwrap()) as usize;
                assert!(gap >= 1);
                if gap <= 3 {
                    counts[gap] += 1;
                }
                total += 1;
            }
        }
        for k in 1..=3 {
            let expected = (1.0 - p).powi(k as i32 - 1) * p;
            let observed = counts[k] as f64 / total as f64;
            let se = (expected * (1.0 - expected) / total as f64).sqrt();
            assert!((observed - expected).abs() < 3.0 * se, "k={k}: {observed} vs {expected}");
        }
    }

    #[test]
    fn sampling_examples() {
        let g = line(1024);
        let c = simulate_si(&g, &DiffusionConfig { p: 0.5, t0: 0, source: 512 }, 3).unwrap();
        let all = sample_observers(&c, 1.0, 0).unwrap();
        assert_eq!(all.len(), 1024);
        assert_eq!(all.timestamp(512), Some(0));

        let small = simulate_si(&line(3), &DiffusionConfig { p: 1.0, t0: 0, source: 0 }, 0).unwrap();
        let empty = (0..100)
            .filter(|&s| sample_observers(&small, 1e-4, s).unwrap().is_empty())
            .count();
        assert!(empty >= 99);

        let seeds = 10_000u64;
        let total: usize = (0..seeds)
            .map(|s| sample_observers(&c, 0.5, derive_seed(1, s)).unwrap().len())
            .sum();
        let mean = total as f64 / seeds as f64;
        assert!((mean - 512.0).abs() < 5.0, "mean |S| = {mean}");
    }

    #[test]
    fn observation_wire_format() {
        let obs = Observation::new([(3, 7), (5, 4)].into_iter().collect());
        let text = serde_json::to_string(&obs).unwrap();
        assert_eq!(text, r#"{"nodes":[3,5],"timestamps":{"3":7,"5":4}}"#);
        let back: Observation = serde_json::from_str(&text).unwrap();
        assert_eq!(back, obs);

        let bad = r#"{"nodes":[3],"timestamps":{"3":7,"5":4}}"#;
        assert!(serde_json::from_str::<Observation>(bad).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: BTreeSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
