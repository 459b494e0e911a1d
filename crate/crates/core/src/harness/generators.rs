//! Synthetic network generators.

use rand::seq::index;
use rand::Rng;

use crate::diffusion::rng_from_seed;
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId};

/// The path `0 – 1 – … – (n−1)`.
pub fn generate_line(n: usize) -> Result<Network> {
    if n < 2 {
        return Err(Error::input(format!("a line needs at least 2 nodes, got {n}")));
    }
    Network::from_edges(n, (0..n - 1).map(|i| (i, i + 1)))
}

/// Node count of a complete `g`-regular tree of the given depth.
pub fn regular_tree_size(g: usize, depth: u32) -> usize {
    let mut total = 1;
    let mut level = 1;
    for d in 0..depth {
        level *= if d == 0 { g } else { g - 1 };
        total += level;
    }
    total
}

/// Complete tree whose root has `g` children and every other internal node
/// `g − 1`, so all internal degrees are `g`. Nodes are numbered level by
/// level, root first.
pub fn generate_regular_tree(g: usize, depth: u32) -> Result<Network> {
    if g < 3 {
        return Err(Error::input(format!("regular tree degree must be at least 3, got {g}")));
    }
    if depth < 1 {
        return Err(Error::input("regular tree depth must be at least 1"));
    }
    let n = regular_tree_size(g, depth);
    let mut edges = Vec::with_capacity(n - 1);
    let mut level: Vec<NodeId> = vec![0];
    let mut next_id = 1;
    for d in 0..depth {
        let fanout = if d == 0 { g } else { g - 1 };
        let mut next_level = Vec::with_capacity(level.len() * fanout);
        for &u in &level {
            for _ in 0..fanout {
                edges.push((u, next_id));
                next_level.push(next_id);
                next_id += 1;
            }
        }
        level = next_level;
    }
    Network::from_edges(n, edges)
}

/// Smallest depth at which a complete `g`-regular tree has at least
/// `min_internal` non-leaf nodes.
pub fn regular_tree_depth_for(g: usize, min_internal: usize) -> u32 {
    let mut depth = 1;
    while regular_tree_size(g, depth - 1) < min_internal {
        depth += 1;
    }
    depth
}

/// Erdős–Rényi `G(n, m)`: `m` distinct edges drawn uniformly without replacement.
pub fn generate_er(n: usize, m: usize, seed: u64) -> Result<Network> {
    let pairs = n * n.saturating_sub(1) / 2;
    if m > pairs {
        return Err(Error::input(format!("{m} edges exceed the {pairs} pairs of {n} nodes")));
    }
    // row_start[i] = index of pair (i, i + 1)
    let row_start: Vec<usize> = (0..n)
        .scan(0, |acc, i| {
            let start = *acc;
            *acc += n - 1 - i;
            Some(start)
        })
        .collect();
    let mut rng = rng_from_seed(seed);
    let mut chosen = index::sample(&mut rng, pairs, m).into_vec();
    chosen.sort_unstable();
    let edges = chosen.into_iter().map(|k| {
        let i = row_start.partition_point(|&s| s <= k) - 1;
        (i, i + 1 + (k - row_start[i]))
    });
    Network::from_edges(n, edges)
}

/// Barabási–Albert preferential attachment: starts from `m` isolated nodes;
/// every later node links to `m` distinct existing nodes drawn with
/// probability proportional to degree.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Network> {
    if m < 1 || m >= n {
        return Err(Error::input(format!("attachment count must lie in [1, n), got {m}")));
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity((n - m) * m);
    let mut repeated: Vec<NodeId> = Vec::with_capacity(2 * (n - m) * m);
    let mut targets: Vec<NodeId> = (0..m).collect();
    for source in m..n {
        for &t in &targets {
            edges.push((source, t));
        }
        repeated.extend_from_slice(&targets);
        repeated.extend(std::iter::repeat_n(source, m));

        targets.clear();
        while targets.len() < m {
            let pick = repeated[rng.gen_range(0..repeated.len())];
            if !targets.contains(&pick) {
                targets.push(pick);
            }
        }
    }
    Network::from_edges(n, edges)
}
