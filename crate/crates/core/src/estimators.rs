//! Source estimators.
//!
//! [`localize_tree`] searches the reduced region around the earliest observer
//! on tree networks. [`localize_graph`] handles arbitrary networks by scoring
//! every node on its time-labeled BFS tree. [`min_timestamp_estimator`] is the
//! naive baseline that simply reports the earliest observer.

use rand::Rng;
use rayon::prelude::*;

use crate::diffusion::{check_probability, rng_from_seed, Observation, TimeTable, Timestamps};
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId, RootedTree};
use crate::lip::{message_passing, path_log_likelihood, CascadingTree};

/// Default sampled-coverage threshold for [`localize_graph`].
pub const DEFAULT_THETA: f64 = 0.95;

/// Outcome of a localization run.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    /// The estimated source.
    pub source: NodeId,
    /// Minimum aggregate delay over the feasible candidates; `None` on fallback.
    pub score: Option<i64>,
    /// Log-likelihood of the winner's best labelled cascading tree.
    pub log_likelihood: f64,
    /// Candidates that were evaluated, ascending.
    pub search_region: Vec<NodeId>,
    /// Candidates with a feasible program, ascending.
    pub feasible_set: Vec<NodeId>,
    /// Every feasible candidate attaining `score`, ascending. `source` is the first.
    pub ties: Vec<NodeId>,
    /// Set when no candidate was feasible and `source` is the earliest observer.
    pub fallback: bool,
}

fn earliest(obs: &Observation) -> Result<(NodeId, i64)> {
    obs.earliest()
        .ok_or_else(|| Error::input("estimation needs at least one sampled node"))
}

/// Picks the lowest-score candidate, lowest id among equals.
fn select(
    search_region: Vec<NodeId>,
    scored: &[(NodeId, CandidateScore)],
    p: f64,
    s0: NodeId,
) -> Estimate {
    let feasible: Vec<(NodeId, i64, usize)> = scored
        .iter()
        .filter_map(|&(u, s)| s.map(|(score, edges)| (u, score, edges)))
        .collect();
    let best = feasible
        .iter()
        .min_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)))
        .copied();
    let mut feasible_set: Vec<NodeId> = feasible.iter().map(|f| f.0).collect();
    feasible_set.sort_unstable();
    match best {
        Some((source, score, edges)) => {
            let mut ties: Vec<NodeId> = feasible.iter().filter(|f| f.1 == score).map(|f| f.0).collect();
            ties.sort_unstable();
            Estimate {
                source,
                score: Some(score),
                log_likelihood: path_log_likelihood(score, edges, p),
                search_region,
                feasible_set,
                ties,
                fallback: false,
            }
        }
        None => Estimate {
            source: s0,
            score: None,
            log_likelihood: f64::NEG_INFINITY,
            search_region,
            feasible_set,
            ties: Vec::new(),
            fallback: true,
        },
    }
}

/// Nodes on the paths from the earliest observer `s₀` to the observers that
/// can be reached from it through unsampled nodes only (plus `s₀`'s own
/// sampled neighbours). Returned ascending.
pub fn reduced_search_space(g: &Network, obs: &Observation) -> Result<Vec<NodeId>> {
    if !g.is_tree() {
        return Err(Error::contract("reduced search space is defined on tree networks"));
    }
    let (s0, _) = earliest(obs)?;
    let n = g.node_count();
    let table = obs.table(n)?;

    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    let mut queue = vec![s0];
    let mut reached = Vec::new();
    seen[s0] = true;
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        if u != s0 && table.is_sampled(u) {
            reached.push(u);
            continue;
        }
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                parent[v] = Some(u);
                queue.push(v);
            }
        }
    }

    let mut keep = vec![false; n];
    keep[s0] = true;
    for s in reached {
        let mut u = s;
        while !keep[u] {
            keep[u] = true;
            u = parent[u].expect("BFS parent chain ends at s0");
        }
    }
    Ok((0..n).filter(|&u| keep[u]).collect())
}

/// Tree localization.
///
/// Every node of the reduced search space is tried as the root of a
/// cascading tree and scored by message passing. The observers used are
/// those inside the search space, or all of them when `full_sampled_set`
/// is set.
pub fn localize_tree(g: &Network, obs: &Observation, p: f64, full_sampled_set: bool) -> Result<Estimate> {
    check_probability("p", p)?;
    let (s0, _) = earliest(obs)?;
    let region = reduced_search_space(g, obs)?;
    let sampled: Vec<NodeId> = if full_sampled_set {
        obs.nodes().collect()
    } else {
        obs.nodes().filter(|u| region.binary_search(u).is_ok()).collect()
    };
    let scored = score_tree_candidates(g, obs, &region, &sampled)?;
    Ok(select(region, &scored, p, s0))
}

/// Scores each of `candidates` as the root of the cascading tree spanning
/// `sampled` on tree network `g`. Infeasible candidates score `None`.
///
/// All roots are scored together in linear time: message passing is run once
/// in each direction over the Steiner subtree of `sampled`, and a root outside
/// that subtree inherits the score of its attachment point plus one unit of
/// delay per edge of the connecting path.
pub fn score_tree_candidates(
    g: &Network,
    obs: &Observation,
    candidates: &[NodeId],
    sampled: &[NodeId],
) -> Result<Vec<(NodeId, CandidateScore)>> {
    if !g.is_tree() {
        return Err(Error::contract("tree localization requires a tree network"));
    }
    let n = g.node_count();
    let table = obs.table(n)?;
    let mut time = vec![None; n];
    for &s in sampled {
        g.check_node(s)?;
        time[s] = Some(table.timestamp(s).ok_or(Error::MissingTimestamp(s))?);
    }
    let &anchor = sampled
        .first()
        .ok_or_else(|| Error::input("cascading tree needs at least one sampled node"))?;

    let bfs = g.bfs_tree(anchor)?;
    let mut in_span = vec![false; n];
    in_span[anchor] = true;
    for &s in sampled {
        if !bfs.contains(s) {
            return Err(Error::input(format!("sampled node {s} is disconnected from {anchor}")));
        }
        let mut u = s;
        while !in_span[u] {
            in_span[u] = true;
            u = bfs.parent(u).expect("walk ends at the anchor");
        }
    }
    let order: Vec<NodeId> = bfs.order().iter().copied().filter(|&u| in_span[u]).collect();
    let span_edges = order.len() - 1;
    let in_span = &in_span;
    let span_neighbors = |u: NodeId| g.neighbors(u).iter().copied().filter(move |&v| in_span[v]);

    // up[y]: message from y's side towards its parent; down[y]: from the
    // parent's side towards y.
    let mut up: Vec<Message> = vec![None; n];
    let mut down: Vec<Message> = vec![None; n];
    let incoming = |up: &[Message], down: &[Message], x: NodeId, from: NodeId| {
        if bfs.parent(x) == Some(from) {
            down[x]
        } else {
            up[from]
        }
    };
    for &y in order[1..].iter().rev() {
        let parent = bfs.parent(y);
        let mut agg = Inbox::default();
        for c in span_neighbors(y).filter(|&c| Some(c) != parent) {
            agg.add(c, up[c]);
        }
        up[y] = agg.solve(time[y]);
    }
    let mut root_score: Vec<Message> = vec![None; n];
    for &x in &order {
        let mut agg = Inbox::default();
        for v in span_neighbors(x) {
            agg.add(v, incoming(&up, &down, x, v));
        }
        root_score[x] = agg.solve(time[x]);
        for c in span_neighbors(x).filter(|&c| bfs.parent(c) == Some(x)) {
            down[c] = agg.without(c, up[c]).solve(time[x]);
        }
    }

    // nearest subtree node and distance to it, for roots outside the subtree
    let mut attach: Vec<Option<(NodeId, usize)>> = vec![None; n];
    let mut queue = Vec::with_capacity(n);
    for &u in &order {
        attach[u] = Some((u, 0));
        queue.push(u);
    }
    let mut head = 0;
    while head < queue.len() {
        let u = queue[head];
        head += 1;
        let (w, d) = attach[u].expect("queued nodes are attached");
        for &v in g.neighbors(u) {
            if attach[v].is_none() {
                attach[v] = Some((w, d + 1));
                queue.push(v);
            }
        }
    }

    candidates
        .iter()
        .map(|&u| {
            g.check_node(u)?;
            let (w, d) = attach[u].ok_or_else(|| {
                Error::input(format!("sampled node {anchor} is not reachable from root {u}"))
            })?;
            let score = root_score[w].map(|(_, a)| (a + d as i64, span_edges + d));
            Ok((u, score))
        })
        .collect()
}

/// `(aggregate delay, edge count)` of a candidate's cascading tree, or `None`
/// when its program is infeasible.
pub type CandidateScore = Option<(i64, usize)>;

/// `(τ, a)` of a solved subtree, or `None` when it is infeasible.
type Message = Option<(i64, i64)>;

/// Running aggregate of the messages arriving at one node.
#[derive(Debug, Clone, Copy, Default)]
struct Inbox {
    count: usize,
    infeasible: usize,
    /// `Σ (a + τ)` over feasible messages.
    total: i64,
    /// Smallest and second-smallest `τ`, the first tagged with its sender.
    min1: Option<(i64, NodeId)>,
    min2: Option<i64>,
}

impl Inbox {
    fn add(&mut self, from: NodeId, m: Message) {
        self.count += 1;
        let Some((tau, a)) = m else {
            self.infeasible += 1;
            return;
        };
        self.total += a + tau;
        match self.min1 {
            Some((best, _)) if best <= tau => {
                if self.min2.is_none_or(|second| tau < second) {
                    self.min2 = Some(tau);
                }
            }
            _ => {
                self.min2 = self.min1.map(|(best, _)| best);
                self.min1 = Some((tau, from));
            }
        }
    }

    /// The aggregate with the message from `from` (equal to `m`) removed.
    fn without(&self, from: NodeId, m: Message) -> Inbox {
        let mut rest = *self;
        rest.count -= 1;
        match m {
            None => rest.infeasible -= 1,
            Some((tau, a)) => {
                rest.total -= a + tau;
                if matches!(self.min1, Some((_, sender)) if sender == from) {
                    rest.min1 = self.min2.map(|t| (t, NodeId::MAX));
                    rest.min2 = None;
                }
            }
        }
        rest
    }

    /// Message-passing update at a node observed at `observed` (if sampled).
    fn solve(&self, observed: Option<i64>) -> Message {
        if self.infeasible > 0 {
            return None;
        }
        let Some((earliest, _)) = self.min1 else {
            return Some((observed.expect("subtree leaves are sampled"), 0));
        };
        let mut tau = earliest - 1;
        if let Some(t) = observed {
            if tau < t {
                return None;
            }
            tau = t;
        }
        Some((tau, self.total - self.count as i64 * tau))
    }
}

/// Label on a time-labeled BFS tree: an observed-time lower bound, or `−∞`
/// before any observer has been passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sigma {
    NegInfinity,
    Finite(i64),
}

impl Sigma {
    fn successor(self) -> Sigma {
        match self {
            Sigma::NegInfinity => Sigma::NegInfinity,
            Sigma::Finite(t) => Sigma::Finite(t + 1),
        }
    }
}

/// BFS tree in which an observer joins only through a neighbour labelled
/// strictly earlier than its observed time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeLabeledBfsTree {
    tree: RootedTree,
    sigma: Vec<Option<Sigma>>,
    reached_sampled: Vec<NodeId>,
}

impl TimeLabeledBfsTree {
    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    /// Label of `u`, or `None` if `u` is not in the tree.
    pub fn sigma(&self, u: NodeId) -> Option<Sigma> {
        self.sigma.get(u).copied().flatten()
    }

    /// Observers admitted to the tree, ascending.
    pub fn reached_sampled(&self) -> &[NodeId] {
        &self.reached_sampled
    }

    /// The tree restricted to its root-to-observer paths.
    pub fn cascading_tree(&self) -> Result<CascadingTree> {
        CascadingTree::from_rooted_tree(&self.tree, self.reached_sampled.iter().copied())
    }
}

/// Builds the time-labeled BFS tree rooted at `root`.
pub fn time_labeled_bfs(g: &Network, root: NodeId, obs: &Observation) -> Result<TimeLabeledBfsTree> {
    g.check_node(root)?;
    let table = obs.table(g.node_count())?;
    Ok(time_labeled_bfs_with(g, root, &table, obs.len()))
}

fn time_labeled_bfs_with(g: &Network, root: NodeId, table: &TimeTable, sampled_count: usize) -> TimeLabeledBfsTree {
    let n = g.node_count();
    let mut sigma: Vec<Option<Sigma>> = vec![None; n];
    let mut parent = vec![None; n];
    let mut order = vec![root];
    let mut reached_sampled = Vec::new();
    sigma[root] = Some(match table.timestamp(root) {
        Some(t) => {
            reached_sampled.push(root);
            Sigma::Finite(t)
        }
        None => Sigma::NegInfinity,
    });

    let done = |reached: usize| sampled_count > 0 && reached == sampled_count;
    let mut head = 0;
    'explore: while head < order.len() && !done(reached_sampled.len()) {
        let w = order[head];
        head += 1;
        let sigma_w = sigma[w].expect("queued nodes are labelled");
        for &v in g.neighbors(w) {
            if sigma[v].is_some() {
                continue;
            }
            let label = match table.timestamp(v) {
                None => sigma_w.successor(),
                Some(t) if sigma_w < Sigma::Finite(t) => {
                    reached_sampled.push(v);
                    Sigma::Finite(t)
                }
                Some(_) => continue,
            };
            sigma[v] = Some(label);
            parent[v] = Some(w);
            order.push(v);
            if done(reached_sampled.len()) {
                break 'explore;
            }
        }
    }

    reached_sampled.sort_unstable();
    TimeLabeledBfsTree {
        tree: RootedTree::from_bfs_order(root, n, order, parent),
        sigma,
        reached_sampled,
    }
}

/// General-graph localization with sampled-coverage threshold `theta`.
///
/// A candidate is kept when its time-labeled BFS tree admits at least
/// `theta·|S|` observers and the program on the pruned tree is feasible.
/// When nothing survives, the threshold is halved once before falling back
/// to the earliest observer.
pub fn localize_graph(g: &Network, obs: &Observation, p: f64, theta: f64) -> Result<Estimate> {
    check_probability("p", p)?;
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::input(format!("theta must lie in (0, 1], got {theta}")));
    }
    let (s0, _) = earliest(obs)?;
    let n = g.node_count();
    let table = obs.table(n)?;
    let total = obs.len();

    let evaluated: Vec<(NodeId, usize, CandidateScore)> = (0..n)
        .into_par_iter()
        .map(|u| {
            let tl = time_labeled_bfs_with(g, u, &table, total);
            let reached = tl.reached_sampled.len();
            if reached == 0 {
                return Ok((u, 0, None));
            }
            let mp = message_passing(&tl.cascading_tree()?, &table)?;
            Ok((u, reached, mp.map(|m| (m.aggregate_delay(), m.edge_count()))))
        })
        .collect::<Result<_>>()?;

    let admit = |threshold: f64| -> Vec<(NodeId, Option<(i64, usize)>)> {
        evaluated
            .iter()
            .map(|&(u, reached, score)| {
                let covered = reached > 0 && reached as f64 >= threshold * total as f64;
                (u, score.filter(|_| covered))
            })
            .collect()
    };
    let region: Vec<NodeId> = (0..n).collect();
    let estimate = select(region.clone(), &admit(theta), p, s0);
    if estimate.fallback {
        return Ok(select(region, &admit(theta / 2.0), p, s0));
    }
    Ok(estimate)
}

/// The earliest observer; ties are settled by a fair draw seeded with `seed`.
pub fn min_timestamp_estimator(obs: &Observation, seed: u64) -> Result<NodeId> {
    let (_, t_min) = earliest(obs)?;
    let minimizers: Vec<NodeId> = obs.iter().filter(|&(_, t)| t == t_min).map(|(u, _)| u).collect();
    if minimizers.len() == 1 {
        return Ok(minimizers[0]);
    }
    let pick = rng_from_seed(seed).gen_range(0..minimizers.len());
    Ok(minimizers[pick])
}
