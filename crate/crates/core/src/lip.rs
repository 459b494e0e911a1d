//! Cascading trees and the minimum-aggregate-delay integer program.
//!
//! For a cascading tree rooted at `v` that spans the sampled nodes, the most
//! likely permitted labelling under geometric delays minimises the total
//! delay `Σ (t(child) − t(parent))` subject to `t(s) = t_s` on sampled nodes
//! and `t(child) ≥ t(parent) + 1` on every edge. [`message_passing`] solves
//! it exactly in one leaves-to-root sweep; [`brute_force_lip`] enumerates
//! small instances as an independent check.

use crate::diffusion::Timestamps;
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId, RootedTree};

/// A rooted tree spanning a sampled set whose leaves are all sampled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CascadingTree {
    tree: RootedTree,
    is_sampled: Vec<bool>,
    sampled_in_tree: Vec<NodeId>,
}

impl CascadingTree {
    /// Prunes `tree` to the union of its root-to-`sampled` paths.
    ///
    /// Every sampled node must belong to `tree`.
    pub fn from_rooted_tree<I>(tree: &RootedTree, sampled: I) -> Result<Self>
    where
        I: IntoIterator<Item = NodeId>,
    {
        let mut is_sampled = vec![false; tree.node_capacity()];
        let mut sampled_in_tree = Vec::new();
        for s in sampled {
            if s >= is_sampled.len() || !tree.contains(s) {
                return Err(Error::input(format!(
                    "sampled node {s} is not reachable from root {}",
                    tree.root()
                )));
            }
            if !is_sampled[s] {
                is_sampled[s] = true;
                sampled_in_tree.push(s);
            }
        }
        if sampled_in_tree.is_empty() {
            return Err(Error::input("cascading tree needs at least one sampled node"));
        }
        sampled_in_tree.sort_unstable();
        let tree = tree.prune_to(sampled_in_tree.iter().copied());
        Ok(CascadingTree {
            tree,
            is_sampled,
            sampled_in_tree,
        })
    }

    pub fn tree(&self) -> &RootedTree {
        &self.tree
    }

    pub fn root(&self) -> NodeId {
        self.tree.root()
    }

    /// Sampled nodes spanned by the tree, ascending.
    pub fn sampled_in_tree(&self) -> &[NodeId] {
        &self.sampled_in_tree
    }

    pub fn is_sampled(&self, u: NodeId) -> bool {
        self.is_sampled.get(u).copied().unwrap_or(false)
    }

    pub fn edge_count(&self) -> usize {
        self.tree.edge_count()
    }
}

/// The cascading tree rooted at `v` on a tree-shaped network: the BFS tree
/// from `v` pruned to the paths reaching `sampled`. It is unique on trees.
pub fn build_cascading_tree(g: &Network, v: NodeId, sampled: &[NodeId]) -> Result<CascadingTree> {
    if !g.is_tree() {
        return Err(Error::contract("cascading trees are unique only on tree networks"));
    }
    if sampled.is_empty() {
        return Err(Error::input("cascading tree of an empty sampled set"));
    }
    let bfs = g.bfs_tree(v)?;
    CascadingTree::from_rooted_tree(&bfs, sampled.iter().copied())
}

/// Optimal virtual timestamps and aggregate delays of a feasible cascading tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessagePassingResult {
    root: NodeId,
    edge_count: usize,
    virtual_timestamps: Vec<Option<i64>>,
    subtree_delays: Vec<Option<i64>>,
}

impl MessagePassingResult {
    pub fn root(&self) -> NodeId {
        self.root
    }

    /// The LIP optimum: minimum total delay over the whole tree.
    pub fn aggregate_delay(&self) -> i64 {
        self.subtree_delays[self.root].expect("root is always solved")
    }

    /// `τ_u`, the latest infection time of `u` consistent with its sampled descendants.
    pub fn virtual_timestamp(&self, u: NodeId) -> Option<i64> {
        self.virtual_timestamps.get(u).copied().flatten()
    }

    /// Total delay over the subtree hanging from `u`.
    pub fn subtree_delay(&self, u: NodeId) -> Option<i64> {
        self.subtree_delays.get(u).copied().flatten()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn log_likelihood(&self, p: f64) -> f64 {
        path_log_likelihood(self.aggregate_delay(), self.edge_count, p)
    }
}

/// Solves the delay-minimisation program on `ct` by passing `(τ, a)` messages
/// from the leaves up.
///
/// Leaves take `τ = t`, `a = 0`. An internal node takes one less than its
/// earliest child; a sampled internal node must not exceed its own timestamp
/// (otherwise the program is infeasible and `Ok(None)` is returned) and is
/// then pinned to it. `a_u = Σ_children (a_j + τ_j − τ_u)`.
pub fn message_passing<T: Timestamps>(
    ct: &CascadingTree,
    obs: &T,
) -> Result<Option<MessagePassingResult>> {
    let tree = ct.tree();
    let n = tree.node_capacity();
    let mut tau = vec![None; n];
    let mut delay = vec![None; n];

    for &u in tree.order().iter().rev() {
        let observed = if ct.is_sampled(u) {
            Some(obs.timestamp(u).ok_or(Error::MissingTimestamp(u))?)
        } else {
            None
        };
        let children = tree.children(u);
        let (tau_u, a_u) = if children.is_empty() {
            let t = observed.ok_or_else(|| {
                Error::contract(format!("leaf {u} of a cascading tree must be sampled"))
            })?;
            (t, 0)
        } else {
            let earliest = children
                .iter()
                .map(|&c| tau[c].expect("children solved first"))
                .min()
                .expect("non-empty");
            let mut tau_u = earliest - 1;
            if let Some(t) = observed {
                if tau_u < t {
                    return Ok(None);
                }
                tau_u = t;
            }
            let a_u = children
                .iter()
                .map(|&c| delay[c].expect("children solved first") + tau[c].expect("solved") - tau_u)
                .sum();
            (tau_u, a_u)
        };
        tau[u] = Some(tau_u);
        delay[u] = Some(a_u);
    }

    Ok(Some(MessagePassingResult {
        root: tree.root(),
        edge_count: tree.edge_count(),
        virtual_timestamps: tau,
        subtree_delays: delay,
    }))
}

/// Log-likelihood of the best labelling of a cascading tree with `edge_count`
/// edges and optimal aggregate delay `aggregate_delay`:
/// `(a − |E|)·ln(1 − p) + |E|·ln p`. At `p = 1` every delay is forced to 1,
/// so the value is `0` when `a = |E|` and `−∞` otherwise.
pub fn path_log_likelihood(aggregate_delay: i64, edge_count: usize, p: f64) -> f64 {
    let extra = aggregate_delay - edge_count as i64;
    if p >= 1.0 {
        return if extra == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let extra_term = if extra == 0 { 0.0 } else { extra as f64 * (1.0 - p).ln() };
    extra_term + edge_count as f64 * p.ln()
}

/// Most unsampled nodes [`brute_force_lip`] will enumerate.
pub const BRUTE_FORCE_MAX_FREE: usize = 10;
/// Largest raw assignment space (`domain^free`) [`brute_force_lip`] accepts.
pub const BRUTE_FORCE_MAX_SPACE: f64 = 1e12;

/// Exhaustive solver for the same program, used as an oracle on small trees.
///
/// Each unsampled node ranges over `[min_t − height − slack, max_t]`, which
/// contains every optimal labelling. Returns the minimum objective, or
/// `None` when no assignment satisfies the constraints.
pub fn brute_force_lip<T: Timestamps>(
    ct: &CascadingTree,
    obs: &T,
    slack: i64,
) -> Result<Option<i64>> {
    let tree = ct.tree();
    let order = tree.order();
    let mut fixed = vec![None; tree.node_capacity()];
    for &s in ct.sampled_in_tree() {
        fixed[s] = Some(obs.timestamp(s).ok_or(Error::MissingTimestamp(s))?);
    }
    let free: Vec<NodeId> = order.iter().copied().filter(|&u| !ct.is_sampled(u)).collect();
    if free.len() > BRUTE_FORCE_MAX_FREE {
        return Err(Error::contract(format!(
            "brute force supports at most {BRUTE_FORCE_MAX_FREE} free nodes, got {}",
            free.len()
        )));
    }
    let times = ct.sampled_in_tree().iter().map(|&s| fixed[s].unwrap());
    let lo_t = times.clone().min().expect("at least one sampled node");
    let hi_t = times.max().expect("at least one sampled node");
    let height = order.iter().filter_map(|&u| tree.depth(u)).max().unwrap_or(0) as i64;
    let lo = lo_t - height - slack.max(0);
    let hi = hi_t;
    let space = ((hi - lo + 1) as f64).powi(free.len() as i32);
    if space > BRUTE_FORCE_MAX_SPACE {
        return Err(Error::contract(format!(
            "brute force search space {space:.3e} exceeds cap {BRUTE_FORCE_MAX_SPACE:.0e}"
        )));
    }

    for &u in &order[1..] {
        let p = tree.parent(u).unwrap();
        if let (Some(tu), Some(tp)) = (fixed[u], fixed[p]) {
            if tu < tp + 1 {
                return Ok(None);
            }
        }
    }

    struct Search<'a> {
        tree: &'a RootedTree,
        free: &'a [NodeId],
        values: Vec<Option<i64>>,
        lo: i64,
        hi: i64,
        best: Option<i64>,
    }

    impl Search<'_> {
        fn run(&mut self, idx: usize) {
            if idx == self.free.len() {
                let total: i64 = self.tree.order()[1..]
                    .iter()
                    .map(|&u| {
                        let p = self.tree.parent(u).unwrap();
                        self.values[u].unwrap() - self.values[p].unwrap()
                    })
                    .sum();
                self.best = Some(self.best.map_or(total, |b| b.min(total)));
                return;
            }
            let u = self.free[idx];
            let mut lo = self.lo;
            if let Some(p) = self.tree.parent(u) {
                lo = lo.max(self.values[p].expect("parents precede children") + 1);
            }
            for value in lo..=self.hi {
                let fits_sampled_children = self.tree.children(u).iter().all(|&c| {
                    self.values[c].is_none_or(|tc| tc > value)
                });
                if !fits_sampled_children {
                    // larger values only violate more
                    break;
                }
                self.values[u] = Some(value);
                self.run(idx + 1);
                self.values[u] = None;
            }
        }
    }

    let mut search = Search {
        tree,
        free: &free,
        values: fixed,
        lo,
        hi,
        best: None,
    };
    search.run(0);
    Ok(search.best)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use proptest::prelude::*;

    use super::*;
    use crate::diffusion::Observation;

    fn line(n: usize) -> Network {
        Network::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn obs(pairs: &[(NodeId, i64)]) -> Observation {
        Observation::new(pairs.iter().copied().collect())
    }

    #[test]
    fn build_examples() {
        let g = line(5);
        let ct = build_cascading_tree(&g, 0, &[3]).unwrap();
        assert_eq!(ct.tree().order(), &[0, 1, 2, 3]);
        assert_eq!(ct.edge_count(), 3);

        let ct = build_cascading_tree(&g, 2, &[0, 4]).unwrap();
        assert_eq!(ct.tree().children(2), &[1, 3]);
        assert_eq!(ct.tree().children(1), &[0]);
        assert_eq!(ct.tree().children(3), &[4]);

        let star = Network::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let ct = build_cascading_tree(&star, 1, &[2, 3]).unwrap();
        assert_eq!(ct.tree().order(), &[1, 0, 2, 3]);
        assert_eq!(ct.tree().children(0), &[2, 3]);

        assert!(matches!(build_cascading_tree(&g, 0, &[]), Err(Error::Input(_))));
    }

    #[test]
    fn chain_example() {
        // v=0 → a=1 → s=2
        let g = line(3);
        let ct = build_cascading_tree(&g, 0, &[2]).unwrap();
        let o = obs(&[(2, 5)]);
        let mp = message_passing(&ct, &o).unwrap().unwrap();
        assert_eq!(mp.virtual_timestamp(2), Some(5));
        assert_eq!(mp.virtual_timestamp(1), Some(4));
        assert_eq!(mp.virtual_timestamp(0), Some(3));
        assert_eq!(mp.aggregate_delay(), 2);
        assert_eq!(brute_force_lip(&ct, &o, 2).unwrap(), Some(2));
    }

    #[test]
    fn two_children_example() {
        // root 0 with sampled children 1 (t=3) and 2 (t=5)
        let g = Network::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let ct = build_cascading_tree(&g, 0, &[1, 2]).unwrap();
        let o = obs(&[(1, 3), (2, 5)]);
        let mp = message_passing(&ct, &o).unwrap().unwrap();
        assert_eq!(mp.virtual_timestamp(0), Some(2));
        assert_eq!(mp.aggregate_delay(), 4);
        assert_eq!(brute_force_lip(&ct, &o, 2).unwrap(), Some(4));
    }

    #[test]
    fn infeasible_chain() {
        // v=0 → s1=1 → a=2 → s2=3 with t_s1=5, t_s2=4
        let g = line(4);
        let ct = build_cascading_tree(&g, 0, &[1, 3]).unwrap();
        let o = obs(&[(1, 5), (3, 4)]);
        assert_eq!(message_passing(&ct, &o).unwrap(), None);
        assert_eq!(brute_force_lip(&ct, &o, 2).unwrap(), None);
    }

    #[test]
    fn missing_timestamp_is_an_error() {
        let g = line(3);
        let ct = build_cascading_tree(&g, 0, &[1, 2]).unwrap();
        let o = obs(&[(2, 5)]);
        assert!(matches!(message_passing(&ct, &o), Err(Error::MissingTimestamp(1))));
    }

    #[test]
    fn log_likelihood_values() {
        assert!((path_log_likelihood(2, 2, 0.5) - (-1.386_294_361_1)).abs() < 1e-9);
        assert!((path_log_likelihood(4, 2, 0.5) - (-2.772_588_722_2)).abs() < 1e-9);
        assert_eq!(path_log_likelihood(3, 3, 1.0), 0.0);
        assert_eq!(path_log_likelihood(4, 3, 1.0), f64::NEG_INFINITY);
        // no underflow for large delays
        assert!(path_log_likelihood(100_000, 10, 0.5).is_finite());
    }

    #[test]
    fn brute_force_caps() {
        let g = line(13);
        let ct = build_cascading_tree(&g, 0, &[12]).unwrap();
        let o = obs(&[(12, 20)]);
        assert!(matches!(brute_force_lip(&ct, &o, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn deep_chain_does_not_recurse() {
        let n = 200_000;
        let g = line(n);
        let ct = build_cascading_tree(&g, 0, &[n - 1]).unwrap();
        let mp = message_passing(&ct, &obs(&[(n - 1, 0)])).unwrap().unwrap();
        assert_eq!(mp.aggregate_delay(), (n - 1) as i64);
        assert_eq!(mp.virtual_timestamp(0), Some(-((n - 1) as i64)));
    }

    /// Random labelled tree on `n` nodes from a parent sequence.
    fn tree_from_parents(parents: &[usize]) -> Network {
        let n = parents.len() + 1;
        Network::from_edges(n, parents.iter().enumerate().map(|(i, &p)| (i + 1, p % (i + 1)))).unwrap()
    }

    fn instance() -> impl Strategy<Value = (Network, NodeId, Vec<NodeId>, BTreeMap<NodeId, i64>)> {
        (2usize..=9)
            .prop_flat_map(|n| {
                (
                    proptest::collection::vec(0usize..64, n - 1),
                    0..n,
                    proptest::collection::vec(any::<bool>(), n),
                    proptest::collection::vec(0i64..9, n),
                )
            })
            .prop_map(|(parents, root, mask, times)| {
                let g = tree_from_parents(&parents);
                let mut sampled: Vec<NodeId> = (0..g.node_count()).filter(|&u| mask[u]).collect();
                if sampled.is_empty() {
                    sampled.push((root + 1) % g.node_count());
                }
                let ts = sampled.iter().map(|&s| (s, times[s])).collect();
                (g, root, sampled, ts)
            })
    }

    /// τ_u = min over sampled descendants s of (t_s − d(s, u)), computed from scratch.
    fn tau_by_definition(ct: &CascadingTree, obs: &Observation, u: NodeId) -> i64 {
        let tree = ct.tree();
        ct.sampled_in_tree()
            .iter()
            .filter_map(|&s| {
                let path = tree.path_from_root(s);
                path.iter()
                    .position(|&x| x == u)
                    .map(|pos| obs.timestamp(s).unwrap() - (path.len() - 1 - pos) as i64)
            })
            .min()
            .unwrap()
    }

    proptest! {
        #[test]
        fn message_passing_matches_brute_force((g, root, sampled, ts) in instance()) {
            let o = Observation::new(ts);
            let ct = build_cascading_tree(&g, root, &sampled).unwrap();
            let mp = message_passing(&ct, &o).unwrap();
            let bf = brute_force_lip(&ct, &o, 1).unwrap();
            prop_assert_eq!(mp.as_ref().map(MessagePassingResult::aggregate_delay), bf);
        }

        #[test]
        fn feasible_solutions_satisfy_structure((g, root, sampled, ts) in instance()) {
            let o = Observation::new(ts);
            let ct = build_cascading_tree(&g, root, &sampled).unwrap();
            let tree = ct.tree();
            // leaves are sampled
            for &u in tree.order() {
                if tree.children(u).is_empty() {
                    prop_assert!(ct.is_sampled(u));
                }
            }
            if let Some(mp) = message_passing(&ct, &o).unwrap() {
                let tau = |u| mp.virtual_timestamp(u).unwrap();
                let mut edge_sum = 0;
                for &u in &tree.order()[1..] {
                    let parent = tree.parent(u).unwrap();
                    prop_assert!(tau(u) > tau(parent));
                    edge_sum += tau(u) - tau(parent);
                }
                prop_assert_eq!(edge_sum, mp.aggregate_delay());
                // double counting: Σ_edges(τ_j − τ_i) = Σ_u τ_u (d_in − d_out)
                let degree_sum: i64 = tree.order().iter().map(|&u| {
                    let d_in = i64::from(u != tree.root());
                    tau(u) * (d_in - tree.children(u).len() as i64)
                }).sum();
                prop_assert_eq!(degree_sum, mp.aggregate_delay());
                for &s in ct.sampled_in_tree() {
                    prop_assert_eq!(tau(s), o.timestamp(s).unwrap());
                }
                for &u in tree.order() {
                    prop_assert_eq!(tau(u), tau_by_definition(&ct, &o, u));
                }
                prop_assert!(mp.aggregate_delay() >= ct.edge_count() as i64);
            }
        }

        #[test]
        fn raising_a_timestamp_moves_virtual_times_by_at_most_one(
            (g, root, sampled, ts) in instance(),
            pick in any::<proptest::sample::Index>(),
        ) {
            let ct = build_cascading_tree(&g, root, &sampled).unwrap();
            let before = Observation::new(ts.clone());
            let mut raised = ts;
            let target = sampled[pick.index(sampled.len())];
            *raised.get_mut(&target).unwrap() += 1;
            let after = Observation::new(raised);
            if let (Some(a), Some(b)) = (
                message_passing(&ct, &before).unwrap(),
                message_passing(&ct, &after).unwrap(),
            ) {
                for &u in ct.tree().order() {
                    let step = b.virtual_timestamp(u).unwrap() - a.virtual_timestamp(u).unwrap();
                    prop_assert!(step == 0 || step == 1);
                }
            }
        }

        #[test]
        fn shifting_all_timestamps_keeps_the_optimum(
            (g, root, sampled, ts) in instance(),
            shift in -50i64..50,
        ) {
            let ct = build_cascading_tree(&g, root, &sampled).unwrap();
            let base = message_passing(&ct, &Observation::new(ts.clone())).unwrap();
            let moved = Observation::new(ts.into_iter().map(|(s, t)| (s, t + shift)).collect());
            let moved = message_passing(&ct, &moved).unwrap();
            prop_assert_eq!(
                base.map(|m| m.aggregate_delay()),
                moved.map(|m| m.aggregate_delay())
            );
        }
    }

    #[test]
    fn raising_the_earliest_timestamp_can_lower_the_optimum() {
        let g = Network::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        let ct = build_cascading_tree(&g, 0, &[1, 2]).unwrap();
        let before = message_passing(&ct, &obs(&[(1, 3), (2, 5)])).unwrap().unwrap();
        let after = message_passing(&ct, &obs(&[(1, 4), (2, 5)])).unwrap().unwrap();
        assert_eq!(before.aggregate_delay(), 4);
        assert_eq!(after.aggregate_delay(), 3);
    }
}
