//! Closed-form localization guarantees and the candidate-path construction.
//!
//! On the infinite line the estimator's error is governed by the difference
//! of two "shifted" observer times `σ₁ = t₁ − L₁` and `σ₂ = t₂ − L₂`. On
//! `g`-regular trees only a lower bound on `P(d ≤ D)` is available; it comes
//! from iterating `h(x) = (1 − p + p(1 − q)x)^{g−1}` backwards from 1.

use crate::diffusion::{check_probability, Observation};
use crate::error::{Error, Result};
use crate::graph::{Network, NodeId};

fn check_open(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::input(format!("{name} must lie in (0, 1), got {value}")))
    }
}

/// Line-graph constants for delay parameter `p` and sampling rate `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineTheory {
    pub p: f64,
    pub q: f64,
    /// `pq`
    pub a: f64,
    /// `1 − p + pq`
    pub b: f64,
    /// `1 − p`
    pub c: f64,
}

impl LineTheory {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        Ok(LineTheory {
            p,
            q,
            a: p * q,
            b: 1.0 - p + p * q,
            c: 1.0 - p,
        })
    }

    /// Exact-detection probability of the infection-path estimator.
    pub fn detection_probability(&self) -> f64 {
        let (p, q) = (self.p, self.q);
        let pq = p * q;
        q + (1.0 - q) * pq * (pq + 3.0 - 3.0 * p) / ((pq + 2.0 - 2.0 * p) * (pq + 1.0 - p))
    }

    /// Upper bound on the expected error distance.
    pub fn expected_distance_bound(&self) -> f64 {
        let (p, q) = (self.p, self.q);
        let pq = p * q;
        let tail = 2.0 * (1.0 - p + pq) * (1.0 - p).powi(2) / (pq * (2.0 - 2.0 * p + pq).powi(2));
        (1.0 - q) * (1.0 / q).min(tail)
    }

    /// `P(σ₁ − σ₂ = n) = a²/(b² − c²) · (c/b)^|n|`.
    pub fn sigma_diff_pmf(&self, n: i64) -> f64 {
        let scale = self.a * self.a / (self.b * self.b - self.c * self.c);
        if self.c == 0.0 {
            return if n == 0 { scale } else { 0.0 };
        }
        scale * (self.c / self.b).powf(n.unsigned_abs() as f64)
    }
}

pub fn line_detection_probability(p: f64, q: f64) -> Result<f64> {
    Ok(LineTheory::new(p, q)?.detection_probability())
}

pub fn line_expected_distance_bound(p: f64, q: f64) -> Result<f64> {
    check_open("p", p)?;
    check_open("q", q)?;
    Ok(LineTheory::new(p, q)?.expected_distance_bound())
}

pub fn sigma_diff_pmf(p: f64, q: f64, n: i64) -> Result<f64> {
    check_open("p", p)?;
    check_open("q", q)?;
    Ok(LineTheory::new(p, q)?.sigma_diff_pmf(n))
}

/// Detection probability and expected error of the minimum-timestamp
/// estimator on the line: `(q, (1 − q)/q)`.
pub fn naive_line_stats(q: f64) -> Result<(f64, f64)> {
    check_probability("q", q)?;
    Ok((q, (1.0 - q) / q))
}

/// Fixed-point tolerance for [`RegularTreeBound::x_star`].
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Iteration cap for the fixed point.
pub const FIXED_POINT_MAX_STEPS: usize = 1_000_000;

/// Lower bound on `P(d(v̂, v*) ≤ D)` for a `g`-regular tree.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularTreeBound {
    pub g: u32,
    pub p: f64,
    pub q: f64,
    pub depth_bound: u32,
    /// `x_D, x_{D−1}, …, x_1`.
    pub x_seq: Vec<f64>,
    /// Limit of the iteration as `D → ∞`.
    pub x_star: f64,
    pub bound: f64,
}

impl RegularTreeBound {
    pub fn x1(&self) -> f64 {
        *self.x_seq.last().expect("sequence holds at least x_D")
    }
}

/// `h(x) = (1 − p + p(1 − q)x)^{g−1}`.
pub fn h(g: u32, p: f64, q: f64, x: f64) -> f64 {
    (1.0 - p + p * (1.0 - q) * x).powi(g as i32 - 1)
}

pub fn regular_tree_bound(g: u32, p: f64, q: f64, depth_bound: u32) -> Result<RegularTreeBound> {
    if g < 3 {
        return Err(Error::input(format!("degree must be at least 3, got {g}")));
    }
    if depth_bound < 1 {
        return Err(Error::input("depth bound must be at least 1"));
    }
    check_open("p", p)?;
    check_open("q", q)?;

    let mut x_seq = vec![1.0];
    for _ in 1..depth_bound {
        let next = h(g, p, q, *x_seq.last().unwrap());
        x_seq.push(next);
    }
    let x1 = *x_seq.last().unwrap();
    let bound = 1.0 - (1.0 - q) * (1.0 - p + p * (1.0 - q) * x1).powi(g as i32);

    let mut x = 1.0;
    for _ in 0..FIXED_POINT_MAX_STEPS {
        let next = h(g, p, q, x);
        let done = (next - x).abs() < FIXED_POINT_TOLERANCE;
        x = next;
        if done {
            break;
        }
    }

    Ok(RegularTreeBound {
        g,
        p,
        q,
        depth_bound,
        x_seq,
        x_star: x,
        bound,
    })
}

/// The path from the anchor node along which the estimator must lie.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePath {
    /// `u*`: the farthest node from `v*` shared by all paths to `U`.
    pub anchor: NodeId,
    /// Observers with no other observer between them and `v*`, ascending.
    pub u: Vec<NodeId>,
    /// Members of `U` minimising `t_s − d(u*, s)`, ascending.
    pub u_star: Vec<NodeId>,
    /// `u₀ = u*, u₁, …, u_m`.
    pub path_nodes: Vec<NodeId>,
}

impl CandidatePath {
    /// Number of edges on the path.
    pub fn len(&self) -> usize {
        self.path_nodes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.path_nodes.len() <= 1
    }

    pub fn contains(&self, u: NodeId) -> bool {
        self.path_nodes.contains(&u)
    }
}

fn common_prefix_len(a: &[NodeId], b: &[NodeId]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// Builds the candidate path for true source `v_star` on a tree.
pub fn candidate_path(g: &Network, v_star: NodeId, obs: &Observation) -> Result<CandidatePath> {
    if !g.is_tree() {
        return Err(Error::contract("candidate path is defined on tree networks"));
    }
    if obs.contains(v_star) {
        return Err(Error::contract(format!("true source {v_star} is itself observed")));
    }
    let table = obs.table(g.node_count())?;
    let bfs = g.bfs_tree(v_star)?;

    // U: first observers met along each branch from v*
    let mut u = Vec::new();
    let mut stack = vec![v_star];
    while let Some(x) = stack.pop() {
        for &c in bfs.children(x) {
            if table.is_sampled(c) {
                u.push(c);
            } else {
                stack.push(c);
            }
        }
    }
    if u.is_empty() {
        return Err(Error::input(format!("no observer is reachable from {v_star}")));
    }
    u.sort_unstable();

    let paths: Vec<Vec<NodeId>> = u.iter().map(|&s| bfs.path_from_root(s)).collect();
    let shared = paths[1..]
        .iter()
        .fold(paths[0].len(), |len, p| len.min(common_prefix_len(&paths[0], p)));
    let anchor = paths[0][shared - 1];
    let anchor_depth = shared - 1;

    let offset = |i: usize| {
        let s = u[i];
        obs.timestamps()[&s] - (paths[i].len() - 1 - anchor_depth) as i64
    };
    let best = (0..u.len()).map(offset).min().unwrap();
    let chosen: Vec<usize> = (0..u.len()).filter(|&i| offset(i) == best).collect();
    let u_star: Vec<NodeId> = chosen.iter().map(|&i| u[i]).collect();

    let first = &paths[chosen[0]][anchor_depth..];
    let keep = chosen[1..]
        .iter()
        .fold(first.len(), |len, &i| len.min(common_prefix_len(first, &paths[i][anchor_depth..])));
    let path_nodes = first[..keep].to_vec();

    Ok(CandidatePath {
        anchor,
        u,
        u_star,
        path_nodes,
    })
}

/// The two observers flanking the source on a line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineRealization {
    /// Distance from the source to the nearest observer on the left.
    pub l1: u64,
    /// Distance from the source to the nearest observer on the right.
    pub l2: u64,
    pub t1: i64,
    pub t2: i64,
}

impl LineRealization {
    /// Reads the flanking observers of `source` on the line `0 – 1 – … – (n−1)`.
    /// Returns `None` when either side has no observer.
    pub fn from_line(source: NodeId, obs: &Observation) -> Option<Self> {
        let (&left, &t1) = obs.timestamps().range(..source).next_back()?;
        let (&right, &t2) = obs.timestamps().range(source + 1..).next()?;
        Some(LineRealization {
            l1: (source - left) as u64,
            l2: (right - source) as u64,
            t1,
            t2,
        })
    }

    pub fn sigma1(&self) -> i64 {
        self.t1 - self.l1 as i64
    }

    pub fn sigma2(&self) -> i64 {
        self.t2 - self.l2 as i64
    }

    /// Length of the candidate path.
    pub fn m_tilde(&self) -> u64 {
        match self.sigma1().cmp(&self.sigma2()) {
            std::cmp::Ordering::Less => self.l1,
            std::cmp::Ordering::Greater => self.l2,
            std::cmp::Ordering::Equal => 0,
        }
    }
}

/// `min{⌊|σ₁ − σ₂|/2⌋, m̃}`: the estimator's predicted distance from the source.
pub fn line_error_from_sigmas(r: &LineRealization) -> u64 {
    let half_gap = r.sigma1().abs_diff(r.sigma2()) / 2;
    half_gap.min(r.m_tilde())
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn line(n: usize) -> Network {
        Network::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn obs(pairs: &[(NodeId, i64)]) -> Observation {
        Observation::new(pairs.iter().copied().collect::<BTreeMap<_, _>>())
    }

    #[test]
    fn detection_probability_values() {
        assert!(close(line_detection_probability(0.5, 0.5).unwrap(), 11.0 / 15.0, 1e-12));
        assert!(close(line_detection_probability(0.5, 0.2).unwrap(), 13.0 / 33.0, 1e-12));
        assert!(close(line_detection_probability(0.3, 1.0).unwrap(), 1.0, 1e-12));
        assert!(line_detection_probability(0.0, 0.5).is_err());
    }

    #[test]
    fn small_q_ratio() {
        for p in [0.2, 0.5, 0.8] {
            let q = 1e-4;
            let ratio = line_detection_probability(p, q).unwrap() / q;
            let limit = 1.0 + 3.0 * p / (2.0 * (1.0 - p));
            assert!((ratio / limit - 1.0).abs() < 0.01, "p={p}: {ratio} vs {limit}");
        }
    }

    #[test]
    fn distance_bound_values() {
        assert!(close(line_expected_distance_bound(0.5, 0.5).unwrap(), 0.48, 1e-12));
        // the 1/q branch wins when p is large and q small
        let t = LineTheory::new(0.9, 0.1).unwrap();
        let tail = 2.0 * t.b * 0.01 / (0.09 * (0.2 + 0.09f64).powi(2));
        assert!(close(t.expected_distance_bound(), 0.9 * (10.0f64).min(tail), 1e-12));
        assert!(line_expected_distance_bound(0.5, 1.0).is_err());
        assert!(line_expected_distance_bound(0.5, 0.999_999).unwrap() < 1e-5);
    }

    #[test]
    fn pmf_properties() {
        assert!(close(sigma_diff_pmf(0.5, 0.5, 0).unwrap(), 0.2, 1e-12));
        for n in 0..20 {
            assert_eq!(sigma_diff_pmf(0.3, 0.6, n).unwrap(), sigma_diff_pmf(0.3, 0.6, -n).unwrap());
        }
        for (p, q) in [(0.5, 0.5), (0.2, 0.1), (0.9, 0.3)] {
            let total: f64 = (-2000..=2000).map(|n| sigma_diff_pmf(p, q, n).unwrap()).sum();
            assert!(close(total, 1.0, 1e-9), "p={p} q={q}: {total}");
        }
    }

    #[test]
    fn naive_stats() {
        assert_eq!(naive_line_stats(1.0).unwrap(), (1.0, 0.0));
        assert_eq!(naive_line_stats(0.5).unwrap(), (0.5, 1.0));
    }

    #[test]
    fn regular_tree_values() {
        let b1 = regular_tree_bound(3, 0.5, 0.5, 1).unwrap();
        assert_eq!(b1.x_seq, vec![1.0]);
        assert!(close(b1.bound, 0.789_062_5, 1e-12));
        let b2 = regular_tree_bound(3, 0.5, 0.5, 2).unwrap();
        assert!(close(b2.x1(), 0.5625, 1e-12));
        assert!(close(b2.bound, 1.0 - 0.5 * (0.5 + 0.25 * 0.5625f64).powi(3), 1e-12));
        let root = 6.0 - 32f64.sqrt(); // x = (1/2 + x/4)² on [0, 1]
        assert!(close(b1.x_star, root, 1e-9));
        assert!(close(b1.x_star, 0.343_15, 1e-5));
    }

    #[test]
    fn regular_tree_iteration_is_monotone() {
        for g in [3, 4, 5] {
            let mut prev = regular_tree_bound(g, 0.5, 0.5, 1).unwrap();
            for d in 2..30 {
                let next = regular_tree_bound(g, 0.5, 0.5, d).unwrap();
                assert!(next.x1() < prev.x1() || close(next.x1(), next.x_star, 1e-12));
                assert!(next.x1() >= next.x_star - 1e-12);
                assert!(next.bound >= prev.bound - 1e-15);
                prev = next;
            }
            assert!(close(prev.x1(), prev.x_star, 1e-6));
        }
        assert!(regular_tree_bound(2, 0.5, 0.5, 1).is_err());
        assert!(regular_tree_bound(3, 0.5, 0.5, 0).is_err());
    }

    #[test]
    fn h_is_increasing_and_convex() {
        for (g, p, q) in [(3, 0.5, 0.5), (4, 0.2, 0.7), (5, 0.9, 0.1)] {
            let step = 1e-3;
            let xs: Vec<f64> = (0..=1000).map(|i| i as f64 * step).collect();
            for w in xs.windows(3) {
                let (a, b, c) = (h(g, p, q, w[0]), h(g, p, q, w[1]), h(g, p, q, w[2]));
                assert!(b > a && c > b);
                assert!(a + c - 2.0 * b >= -1e-15);
            }
        }
    }

    #[test]
    fn candidate_path_on_line() {
        let g = line(7);
        let cp = candidate_path(&g, 3, &obs(&[(1, 2), (5, 4)])).unwrap();
        assert_eq!(cp.anchor, 3);
        assert_eq!(cp.u, vec![1, 5]);
        assert_eq!(cp.u_star, vec![1]);
        assert_eq!(cp.path_nodes, vec![3, 2, 1]);
        assert_eq!(cp.len(), 2);

        let cp = candidate_path(&g, 3, &obs(&[(1, 2), (5, 2)])).unwrap();
        assert_eq!(cp.u_star, vec![1, 5]);
        assert_eq!(cp.path_nodes, vec![3]);
        assert!(cp.is_empty());

        assert!(matches!(
            candidate_path(&g, 1, &obs(&[(1, 2)])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn candidate_path_anchor_moves_toward_a_single_branch() {
        // 0 - 1 - 2 - 3 with a fork 2 - 4; all observers lie beyond node 2
        let g = Network::from_edges(5, [(0, 1), (1, 2), (2, 3), (2, 4)]).unwrap();
        let cp = candidate_path(&g, 0, &obs(&[(3, 9), (4, 5)])).unwrap();
        assert_eq!(cp.anchor, 2);
        assert_eq!(cp.u_star, vec![4]);
        assert_eq!(cp.path_nodes, vec![2, 4]);
    }

    #[test]
    fn candidate_path_on_regular_tree_branches() {
        // root 0 with children 1, 2, 3
        let g = Network::from_edges(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let cp = candidate_path(&g, 0, &obs(&[(1, 4), (2, 4)])).unwrap();
        assert_eq!(cp.anchor, 0);
        assert_eq!(cp.path_nodes, vec![0]);
    }

    #[test]
    fn line_realization_examples() {
        let r = LineRealization::from_line(3, &obs(&[(0, 9), (1, 2), (5, 4), (6, 1)])).unwrap();
        assert_eq!((r.l1, r.l2, r.t1, r.t2), (2, 2, 2, 4));
        assert_eq!((r.sigma1(), r.sigma2(), r.m_tilde()), (0, 2, 2));
        assert_eq!(line_error_from_sigmas(&r), 1);

        let r = LineRealization { l1: 2, l2: 1, t1: 2, t2: 10 };
        assert_eq!(line_error_from_sigmas(&r), 2);
        let r = LineRealization { l1: 3, l2: 1, t1: 5, t2: 3 };
        assert_eq!(r.m_tilde(), 0);
        assert_eq!(line_error_from_sigmas(&r), 0);
        assert!(LineRealization::from_line(3, &obs(&[(5, 1)])).is_none());
    }
}
