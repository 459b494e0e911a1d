//! Undirected simple networks over dense node ids, and the tree queries the
//! estimators are built on.

use std::collections::{BTreeSet, VecDeque};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// An undirected simple graph with node ids `0..node_count`.
///
/// Adjacency lists are sorted ascending so every traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    adjacency: Vec<Vec<NodeId>>,
    edge_count: usize,
    is_tree: bool,
}

impl Network {
    /// Builds a network from an edge list. Duplicate edges (in either
    /// orientation) are collapsed; self-loops and out-of-range endpoints are
    /// rejected.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut adjacency = vec![Vec::new(); node_count];
        for (u, v) in edges {
            for node in [u, v] {
                if node >= node_count {
                    return Err(Error::NodeOutOfRange { node, node_count });
                }
            }
            if u == v {
                return Err(Error::input(format!("self-loop on node {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut edge_count = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            edge_count += list.len();
        }
        edge_count /= 2;

        let mut g = Network {
            adjacency,
            edge_count,
            is_tree: false,
        };
        g.is_tree = node_count > 0 && edge_count + 1 == node_count && g.is_connected();
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// `true` when the network is connected and acyclic.
    pub fn is_tree(&self) -> bool {
        self.is_tree
    }

    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adjacency[u]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adjacency[u].len()
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency
            .get(u)
            .is_some_and(|list| list.binary_search(&v).is_ok())
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn check_node(&self, u: NodeId) -> Result<()> {
        if u < self.node_count() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                node: u,
                node_count: self.node_count(),
            })
        }
    }

    pub fn is_connected(&self) -> bool {
        match self.node_count() {
            0 => true,
            _ => self.hop_distances(0).iter().all(Option::is_some),
        }
    }

    /// Hop distance from `root` to every node; `None` for other components.
    pub fn hop_distances(&self, root: NodeId) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[root] = Some(0);
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or_default();
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Connected components, each sorted ascending, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.node_count()];
        let mut out = Vec::new();
        for start in 0..self.node_count() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                i += 1;
                for &v in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// The largest connected component (smallest member id breaks ties).
    pub fn largest_component(&self) -> Vec<NodeId> {
        self.components()
            .into_iter()
            .fold(Vec::new(), |best, c| if c.len() > best.len() { c } else { best })
    }

    /// The subgraph induced by `keep`, relabelled densely in the order given.
    /// Returns the new network and the new-id → old-id map.
    pub fn induced(&self, keep: &[NodeId]) -> Result<(Network, Vec<NodeId>)> {
        let mut new_id = vec![None; self.node_count()];
        for (i, &u) in keep.iter().enumerate() {
            self.check_node(u)?;
            new_id[u] = Some(i);
        }
        let edges = self
            .edges()
            .filter_map(|(u, v)| Some((new_id[u]?, new_id[v]?)));
        Ok((Network::from_edges(keep.len(), edges)?, keep.to_vec()))
    }

    /// Breadth-first tree from `root`, exploring neighbors in ascending id
    /// order. Nodes outside `root`'s component are absent from the tree.
    pub fn bfs_tree(&self, root: NodeId) -> Result<RootedTree> {
        self.check_node(root)?;
        let n = self.node_count();
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        seen[root] = true;
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some(u);
                    order.push(v);
                }
            }
        }
        Ok(RootedTree::from_bfs_order(root, n, order, parent))
    }

    fn require_tree(&self) -> Result<()> {
        if self.is_tree {
            Ok(())
        } else {
            Err(Error::contract("operation requires a tree-shaped network"))
        }
    }

    /// The unique simple path from `u` to `v` on a tree, endpoints included.
    pub fn tree_path(&self, u: NodeId, v: NodeId) -> Result<NodePath> {
        self.require_tree()?;
        self.check_node(v)?;
        let tree = self.bfs_tree(u)?;
        if !tree.contains(v) {
            return Err(Error::input(format!("nodes {u} and {v} are disconnected")));
        }
        Ok(NodePath(tree.path_from_root(v)))
    }

    /// Minimal subtree of a tree spanning `sampled`.
    pub fn steiner_tree(&self, sampled: &BTreeSet<NodeId>) -> Result<SteinerTree> {
        self.require_tree()?;
        let &anchor = sampled
            .first()
            .ok_or_else(|| Error::input("steiner tree of an empty node set"))?;
        let tree = self.bfs_tree(anchor)?;
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        nodes.insert(anchor);
        for &s in sampled {
            self.check_node(s)?;
            if !tree.contains(s) {
                return Err(Error::input(format!("node {s} is disconnected from {anchor}")));
            }
            let mut u = s;
            while nodes.insert(u) {
                match tree.parent(u) {
                    Some(p) => {
                        edges.insert((u.min(p), u.max(p)));
                        u = p;
                    }
                    None => break,
                }
            }
        }
        Ok(SteinerTree { nodes, edges })
    }

    /// Number of sampled nodes on the tree path from `u` to `v`, endpoints included.
    pub fn sampled_distance(&self, u: NodeId, v: NodeId, sampled: &BTreeSet<NodeId>) -> Result<usize> {
        Ok(self
            .tree_path(u, v)?
            .nodes()
            .iter()
            .filter(|n| sampled.contains(n))
            .count())
    }
}

/// Node and edge sets of a Steiner subtree. Edges are stored as `(min, max)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SteinerTree {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<(NodeId, NodeId)>,
}

/// A simple path, listed from its first to its last endpoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePath(pub Vec<NodeId>);

impl NodePath {
    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    /// Number of edges on the path.
    pub fn len(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A rooted, directed tree embedded in a network.
///
/// Per-node vectors are indexed by network node id; nodes outside the tree
/// have no parent, no depth and no children. `order` lists tree members in
/// breadth-first order, so every parent precedes its children and the
/// children of each node form one contiguous run of `order`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RootedTree {
    root: NodeId,
    parent: Vec<Option<NodeId>>,
    /// `(start, len)` of each node's children within `order`.
    child_span: Vec<(usize, usize)>,
    depth: Vec<Option<usize>>,
    order: Vec<NodeId>,
}

impl RootedTree {
    /// Assembles a tree from a parent-before-child `order` and parent links.
    pub(crate) fn from_bfs_order(
        root: NodeId,
        node_count: usize,
        order: Vec<NodeId>,
        parent: Vec<Option<NodeId>>,
    ) -> Self {
        let mut child_span = vec![(0, 0); node_count];
        let mut depth = vec![None; node_count];
        depth[root] = Some(0);
        for (i, &u) in order.iter().enumerate().skip(1) {
            let p = parent[u].expect("non-root tree node without parent");
            let span = &mut child_span[p];
            if span.1 == 0 {
                span.0 = i;
            }
            debug_assert_eq!(span.0 + span.1, i, "children of {p} are not contiguous");
            span.1 += 1;
            depth[u] = depth[p].map(|d| d + 1);
        }
        RootedTree {
            root,
            parent,
            child_span,
            depth,
            order,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn contains(&self, u: NodeId) -> bool {
        u == self.root || self.parent.get(u).is_some_and(Option::is_some)
    }

    pub fn parent(&self, u: NodeId) -> Option<NodeId> {
        self.parent.get(u).copied().flatten()
    }

    pub fn children(&self, u: NodeId) -> &[NodeId] {
        match self.child_span.get(u) {
            Some(&(start, len)) => &self.order[start..start + len],
            None => &[],
        }
    }

    pub fn depth(&self, u: NodeId) -> Option<usize> {
        self.depth.get(u).copied().flatten()
    }

    /// Tree members, parents before children.
    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    /// Number of nodes in the tree.
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.order.len() - 1
    }

    /// Size of the id space the per-node vectors cover.
    pub fn node_capacity(&self) -> usize {
        self.parent.len()
    }

    /// Nodes from the root down to `u` inclusive. `u` must be in the tree.
    pub fn path_from_root(&self, u: NodeId) -> Vec<NodeId> {
        let mut path = vec![u];
        let mut cur = u;
        while let Some(p) = self.parent(cur) {
            path.push(p);
            cur = p;
        }
        path.reverse();
        path
    }

    /// Restricts the tree to the union of root-to-target paths. Targets not in
    /// the tree are ignored. The root is always kept.
    pub fn prune_to<I>(&self, targets: I) -> RootedTree
    where
        I: IntoIterator<Item = NodeId>,
    {
        let n = self.node_capacity();
        let mut keep = vec![false; n];
        keep[self.root] = true;
        for t in targets {
            if !self.contains(t) {
                continue;
            }
            let mut u = t;
            while !keep[u] {
                keep[u] = true;
                u = self.parent[u].expect("walk from a tree member reaches the root");
            }
        }
        let order: Vec<NodeId> = self.order.iter().copied().filter(|&u| keep[u]).collect();
        let mut parent = vec![None; n];
        for &u in &order[1..] {
            parent[u] = self.parent[u];
        }
        RootedTree::from_bfs_order(self.root, n, order, parent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Network {
        Network::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn set(nodes: &[NodeId]) -> BTreeSet<NodeId> {
        nodes.iter().copied().collect()
    }

    #[test]
    fn from_edges_basics() {
        let g = Network::from_edges(2, [(0, 1)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.is_tree());

        let g = line(5);
        assert_eq!(g.edge_count(), 4);
        assert!(g.is_tree());

        let tri = Network::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(!tri.is_tree());
    }

    #[test]
    fn from_edges_dedups_and_validates() {
        let g = Network::from_edges(3, [(0, 1), (1, 0), (0, 1), (1, 2)]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
        assert!(g.is_tree());

        assert!(matches!(
            Network::from_edges(2, [(0, 2)]),
            Err(Error::NodeOutOfRange { node: 2, .. })
        ));
        assert!(matches!(Network::from_edges(2, [(1, 1)]), Err(Error::Input(_))));
        // a forest is not a tree
        assert!(!Network::from_edges(4, [(0, 1), (2, 3)]).unwrap().is_tree());
    }

    #[test]
    fn bfs_tree_examples() {
        let g = line(3);
        let t = g.bfs_tree(1).unwrap();
        assert_eq!(t.children(1), &[0, 2]);
        assert_eq!(t.depth(1), Some(0));
        assert_eq!(t.depth(0), Some(1));
        assert_eq!(t.depth(2), Some(1));

        let star = Network::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let t = star.bfs_tree(0).unwrap();
        assert!((1..4).all(|leaf| t.depth(leaf) == Some(1)));

        let g = Network::from_edges(4, [(0, 1), (1, 2)]).unwrap();
        let t = g.bfs_tree(0).unwrap();
        assert!(!t.contains(3));
        assert_eq!(t.parent(3), None);
        assert_eq!(t.depth(3), None);
        assert_eq!(t.len(), 3);
    }

    #[test]
    fn tree_path_examples() {
        let g = line(4);
        assert_eq!(g.tree_path(0, 3).unwrap().nodes(), &[0, 1, 2, 3]);
        assert_eq!(g.tree_path(2, 2).unwrap().nodes(), &[2]);
        let star = Network::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        assert_eq!(star.tree_path(1, 2).unwrap().nodes(), &[1, 0, 2]);

        let tri = Network::from_edges(3, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert!(matches!(tri.tree_path(0, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn steiner_examples() {
        let g = line(5);
        let st = g.steiner_tree(&set(&[1, 3])).unwrap();
        assert_eq!(st.nodes, set(&[1, 2, 3]));
        assert_eq!(st.edges, [(1, 2), (2, 3)].into_iter().collect());

        let st = g.steiner_tree(&set(&[2])).unwrap();
        assert_eq!(st.nodes, set(&[2]));
        assert!(st.edges.is_empty());

        let bin = Network::from_edges(3, [(0, 1), (0, 2)]).unwrap();
        assert_eq!(bin.steiner_tree(&set(&[1, 2])).unwrap().nodes, set(&[0, 1, 2]));

        assert!(matches!(g.steiner_tree(&BTreeSet::new()), Err(Error::Input(_))));
    }

    #[test]
    fn sampled_distance_examples() {
        let g = line(5);
        let s = set(&[1, 3]);
        assert_eq!(g.sampled_distance(0, 4, &s).unwrap(), 2);
        assert_eq!(g.sampled_distance(0, 2, &s).unwrap(), 1);
        assert_eq!(g.sampled_distance(2, 2, &s).unwrap(), 0);
    }

    #[test]
    fn prune_keeps_only_target_paths() {
        let g = Network::from_edges(6, [(0, 1), (0, 2), (1, 3), (1, 4), (2, 5)]).unwrap();
        let t = g.bfs_tree(0).unwrap().prune_to([4]);
        assert_eq!(t.order(), &[0, 1, 4]);
        assert_eq!(t.children(0), &[1]);
        assert_eq!(t.children(1), &[4]);
        assert!(!t.contains(3));
        assert_eq!(t.depth(4), Some(2));
    }

    #[test]
    fn largest_component_and_induced() {
        let g = Network::from_edges(6, [(0, 1), (2, 3), (3, 4), (4, 2)]).unwrap();
        let comp = g.largest_component();
        assert_eq!(comp, vec![2, 3, 4]);
        let (sub, map) = g.induced(&comp).unwrap();
        assert_eq!(sub.node_count(), 3);
        assert_eq!(sub.edge_count(), 3);
        assert_eq!(map, vec![2, 3, 4]);
    }
}
