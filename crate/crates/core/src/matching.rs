//! Bipartite graphs and left-saturating s-matchings.
//!
//! An s-matching lets left vertex `i` take up to `s_i` right vertices while
//! each right vertex is used at most once. We solve it by expanding every left
//! vertex into `s_i` copies that share its neighbor list and running
//! Hopcroft–Karp on the expanded graph. When the maximum matching leaves a
//! copy unmatched, the left vertices reachable by alternating paths from the
//! unmatched copies form a Hall-deficient set.

use std::collections::VecDeque;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::uniform01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchingError {
    #[error("left vertex {left} has neighbor {right} but the right side has {size} vertices")]
    NeighborOutOfRange { left: usize, right: usize, size: usize },
    #[error("adjacency has {actual} rows for {expected} left vertices")]
    AdjacencyLength { expected: usize, actual: usize },
    #[error("quota vector has {actual} entries for {expected} left vertices")]
    QuotaLength { expected: usize, actual: usize },
    #[error("quota of left vertex {0} must be at least 1")]
    ZeroQuota(usize),
    #[error("total quota {total} exceeds the {right} right vertices")]
    QuotaExceedsRight { total: usize, right: usize },
    #[error("edge probability {0} must lie in [0, 1]")]
    InvalidProbability(f64),
}

/// Bipartite graph with sorted, duplicate-free neighbor lists per left vertex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BipartiteGraph {
    left: usize,
    right: usize,
    adjacency: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    /// Neighbor lists are sorted and deduplicated on construction.
    pub fn new(right: usize, mut adjacency: Vec<Vec<usize>>) -> Result<Self, MatchingError> {
        for (left, row) in adjacency.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if let Some(&r) = row.last().filter(|&&r| r >= right) {
                return Err(MatchingError::NeighborOutOfRange { left, right: r, size: right });
            }
        }
        Ok(BipartiteGraph {
            left: adjacency.len(),
            right,
            adjacency,
        })
    }

    pub fn from_edges(
        left: usize,
        right: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, MatchingError> {
        let mut adjacency = vec![Vec::new(); left];
        for (i, j) in edges {
            let row = adjacency.get_mut(i).ok_or(MatchingError::AdjacencyLength {
                expected: left,
                actual: i + 1,
            })?;
            row.push(j);
        }
        BipartiteGraph::new(right, adjacency)
    }

    pub fn complete(left: usize, right: usize) -> Self {
        BipartiteGraph {
            left,
            right,
            adjacency: vec![(0..right).collect(); left],
        }
    }

    pub fn left_size(&self) -> usize {
        self.left
    }

    pub fn right_size(&self) -> usize {
        self.right
    }

    pub fn neighbors(&self, left: usize) -> &[usize] {
        &self.adjacency[left]
    }

    pub fn has_edge(&self, left: usize, right: usize) -> bool {
        self.adjacency
            .get(left)
            .is_some_and(|row| row.binary_search(&right).is_ok())
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// `N_G(Y)`, sorted.
    pub fn neighborhood(&self, set: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.right];
        for &i in set {
            for &j in &self.adjacency[i] {
                seen[j] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter_map(|(j, &s)| s.then_some(j))
            .collect()
    }
}

/// Per-left-vertex demands `s_i >= 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QuotaVector(Vec<usize>);

impl QuotaVector {
    pub fn new(quotas: Vec<usize>) -> Result<Self, MatchingError> {
        if let Some(i) = quotas.iter().position(|&s| s == 0) {
            return Err(MatchingError::ZeroQuota(i));
        }
        Ok(QuotaVector(quotas))
    }

    pub fn uniform(len: usize, quota: usize) -> Result<Self, MatchingError> {
        QuotaVector::new(vec![quota; len])
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    pub fn min(&self) -> usize {
        self.0.iter().copied().min().unwrap_or(0)
    }

    pub fn demand_of(&self, set: &[usize]) -> usize {
        set.iter().map(|&i| self.0[i]).sum()
    }
}

/// A set of `(left, right)` edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SMatching {
    pub edges: Vec<(usize, usize)>,
}

impl SMatching {
    /// `owner[j]` for every right vertex, `None` when unmatched. Assumes the
    /// matching is valid.
    pub fn owners(&self, right: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; right];
        for &(i, j) in &self.edges {
            owner[j] = Some(i);
        }
        owner
    }

    pub fn matched_to(&self, left: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .filter(move |&&(i, _)| i == left)
            .map(|&(_, j)| j)
    }
}

/// Left vertices whose joint neighborhood is smaller than their joint demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DeficientSet {
    pub agents: Vec<usize>,
    pub neighborhood: Vec<usize>,
    pub demand: usize,
}

impl DeficientSet {
    /// Re-derives `|N(Y)| < sum_{i in Y} s_i` from the graph.
    pub fn certifies(&self, graph: &BipartiteGraph, quotas: &QuotaVector) -> bool {
        !self.agents.is_empty()
            && graph.neighborhood(&self.agents).len() < quotas.demand_of(&self.agents)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SMatchingOutcome {
    Saturating(SMatching),
    Deficient(DeficientSet),
}

impl SMatchingOutcome {
    pub fn is_saturating(&self) -> bool {
        matches!(self, SMatchingOutcome::Saturating(_))
    }
}

const NONE: usize = usize::MAX;

/// Finds an s-matching in which every left vertex `i` is matched exactly
/// `s_i` times, or a Hall-deficient witness proving none exists.
pub fn find_left_saturating_s_matching(
    graph: &BipartiteGraph,
    quotas: &QuotaVector,
) -> Result<SMatchingOutcome, MatchingError> {
    if quotas.len() != graph.left_size() {
        return Err(MatchingError::QuotaLength {
            expected: graph.left_size(),
            actual: quotas.len(),
        });
    }
    if quotas.total() > graph.right_size() {
        return Err(MatchingError::QuotaExceedsRight {
            total: quotas.total(),
            right: graph.right_size(),
        });
    }
    let mut solver = CopySolver::new(graph, quotas);
    solver.greedy();
    solver.hopcroft_karp();
    let saturated = solver.unmatched_copies().next().is_none();
    Ok(if saturated {
        SMatchingOutcome::Saturating(solver.matching())
    } else {
        SMatchingOutcome::Deficient(solver.deficient_set(quotas))
    })
}

/// Hopcroft–Karp on the copy-expanded graph. Copies of a left vertex are
/// contiguous and share its neighbor list.
struct CopySolver<'g> {
    graph: &'g BipartiteGraph,
    owner: Vec<usize>,
    match_copy: Vec<usize>,
    match_right: Vec<usize>,
}

impl<'g> CopySolver<'g> {
    fn new(graph: &'g BipartiteGraph, quotas: &QuotaVector) -> Self {
        let owner: Vec<usize> = quotas
            .as_slice()
            .iter()
            .enumerate()
            .flat_map(|(i, &s)| std::iter::repeat_n(i, s))
            .collect();
        CopySolver {
            graph,
            match_copy: vec![NONE; owner.len()],
            match_right: vec![NONE; graph.right_size()],
            owner,
        }
    }

    fn adj(&self, copy: usize) -> &'g [usize] {
        self.graph.neighbors(self.owner[copy])
    }

    fn greedy(&mut self) {
        for c in 0..self.owner.len() {
            if let Some(&r) = self.adj(c).iter().find(|&&r| self.match_right[r] == NONE) {
                self.match_copy[c] = r;
                self.match_right[r] = c;
            }
        }
    }

    fn hopcroft_karp(&mut self) {
        let copies = self.owner.len();
        let mut dist = vec![usize::MAX; copies];
        let mut cursor = vec![0usize; copies];
        let mut queue = VecDeque::new();
        loop {
            queue.clear();
            for c in 0..copies {
                if self.match_copy[c] == NONE {
                    dist[c] = 0;
                    queue.push_back(c);
                } else {
                    dist[c] = usize::MAX;
                }
            }
            let mut reachable_free = false;
            while let Some(c) = queue.pop_front() {
                for &r in self.adj(c) {
                    let next = self.match_right[r];
                    if next == NONE {
                        reachable_free = true;
                    } else if dist[next] == usize::MAX {
                        dist[next] = dist[c] + 1;
                        queue.push_back(next);
                    }
                }
            }
            if !reachable_free {
                return;
            }
            cursor.iter_mut().for_each(|x| *x = 0);
            let mut augmented = false;
            for c in 0..copies {
                if self.match_copy[c] == NONE && self.augment(c, &mut dist, &mut cursor) {
                    augmented = true;
                }
            }
            if !augmented {
                return;
            }
        }
    }

    /// Iterative layered DFS from the free copy `start`.
    fn augment(&mut self, start: usize, dist: &mut [usize], cursor: &mut [usize]) -> bool {
        let mut stack = vec![start];
        let mut via: Vec<usize> = Vec::new();
        while let Some(&c) = stack.last() {
            let adj = self.adj(c);
            if cursor[c] == adj.len() {
                dist[c] = usize::MAX;
                stack.pop();
                via.pop();
                continue;
            }
            let r = adj[cursor[c]];
            cursor[c] += 1;
            let next = self.match_right[r];
            if next == NONE {
                via.push(r);
                for (&copy, &right) in stack.iter().zip(&via) {
                    self.match_copy[copy] = right;
                    self.match_right[right] = copy;
                }
                return true;
            }
            if dist[next] == dist[c].wrapping_add(1) {
                via.push(r);
                stack.push(next);
            }
        }
        false
    }

    fn unmatched_copies(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.owner.len()).filter(|&c| self.match_copy[c] == NONE)
    }

    fn matching(&self) -> SMatching {
        let mut edges: Vec<(usize, usize)> = self
            .match_copy
            .iter()
            .enumerate()
            .filter(|&(_, &r)| r != NONE)
            .map(|(c, &r)| (self.owner[c], r))
            .collect();
        edges.sort_unstable();
        SMatching { edges }
    }

    /// Left vertices reached by alternating paths from unmatched copies.
    /// Every right vertex reached is matched to a reached copy, and at least
    /// one reached copy is unmatched, so the reached set is deficient.
    fn deficient_set(&self, quotas: &QuotaVector) -> DeficientSet {
        let mut seen_copy = vec![false; self.owner.len()];
        let mut seen_right = vec![false; self.graph.right_size()];
        let mut queue: VecDeque<usize> = self.unmatched_copies().collect();
        for &c in &queue {
            seen_copy[c] = true;
        }
        while let Some(c) = queue.pop_front() {
            for &r in self.adj(c) {
                if std::mem::replace(&mut seen_right[r], true) {
                    continue;
                }
                let next = self.match_right[r];
                debug_assert_ne!(next, NONE, "maximum matching leaves no augmenting path");
                if !std::mem::replace(&mut seen_copy[next], true) {
                    queue.push_back(next);
                }
            }
        }
        let mut agents: Vec<usize> = (0..self.owner.len())
            .filter(|&c| seen_copy[c])
            .map(|c| self.owner[c])
            .collect();
        agents.dedup();
        let neighborhood = seen_right
            .iter()
            .enumerate()
            .filter_map(|(j, &s)| s.then_some(j))
            .collect();
        let demand = quotas.demand_of(&agents);
        DeficientSet {
            agents,
            neighborhood,
            demand,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchingViolation {
    #[error("quota vector does not match the graph")]
    Shape,
    #[error("({left}, {right}) is not an edge of the graph")]
    NotAnEdge { left: usize, right: usize },
    #[error("right vertex {0} is used more than once")]
    RightReused(usize),
    #[error("left vertex {left} is matched {load} times, quota {quota}")]
    QuotaMismatch { left: usize, load: usize, quota: usize },
}

/// Checks every s-matching invariant plus exact left saturation.
pub fn verify_s_matching(
    graph: &BipartiteGraph,
    quotas: &QuotaVector,
    matching: &SMatching,
) -> Result<(), MatchingViolation> {
    if quotas.len() != graph.left_size() {
        return Err(MatchingViolation::Shape);
    }
    let mut used = vec![false; graph.right_size()];
    let mut load = vec![0usize; graph.left_size()];
    for &(i, j) in &matching.edges {
        if !graph.has_edge(i, j) {
            return Err(MatchingViolation::NotAnEdge { left: i, right: j });
        }
        if std::mem::replace(&mut used[j], true) {
            return Err(MatchingViolation::RightReused(j));
        }
        load[i] += 1;
    }
    for (left, (&load, &quota)) in load.iter().zip(quotas.as_slice()).enumerate() {
        if load != quota {
            return Err(MatchingViolation::QuotaMismatch { left, load, quota });
        }
    }
    Ok(())
}

/// Erdős–Rényi bipartite graph: each of the `left * right` edges is present
/// independently with probability `p`. Edges are drawn row by row.
pub fn random_bipartite<R: RngCore + ?Sized>(
    left: usize,
    right: usize,
    p: f64,
    rng: &mut R,
) -> Result<BipartiteGraph, MatchingError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(MatchingError::InvalidProbability(p));
    }
    let adjacency = (0..left)
        .map(|_| (0..right).filter(|_| uniform01(rng) < p).collect())
        .collect();
    Ok(BipartiteGraph {
        left,
        right,
        adjacency,
    })
}
