//! Independent reference implementations used as test oracles.

#![allow(dead_code)]

use fairdiv::matching::BipartiteGraph;
use fairdiv::sampling::uniform01;
use fairdiv::{Allocation, Instance};
use rand::RngCore;

/// Exhaustive search: give each left vertex `i` a set of `quotas[i]`
/// distinct unused neighbours, trying every combination.
pub fn brute_force_saturating(graph: &BipartiteGraph, quotas: &[usize]) -> bool {
    fn place(graph: &BipartiteGraph, quotas: &[usize], used: &mut Vec<bool>, agent: usize, need: usize, from: usize) -> bool {
        if agent == quotas.len() {
            return true;
        }
        if need == 0 {
            let next = agent + 1;
            return place(graph, quotas, used, next, quotas.get(next).copied().unwrap_or(0), 0);
        }
        let nbrs = graph.neighbors(agent);
        for (k, &g) in nbrs.iter().enumerate().skip(from) {
            if !used[g] {
                used[g] = true;
                if place(graph, quotas, used, agent, need - 1, k + 1) {
                    return true;
                }
                used[g] = false;
            }
        }
        false
    }
    if quotas.iter().sum::<usize>() > graph.right_size() {
        return false;
    }
    let mut used = vec![false; graph.right_size()];
    place(graph, quotas, &mut used, 0, quotas.first().copied().unwrap_or(0), 0)
}

/// Hall's condition for s-matchings, checked over every subset of agents.
pub fn hall_condition(graph: &BipartiteGraph, quotas: &[usize]) -> bool {
    let n = quotas.len();
    (1u32..1 << n).all(|mask| {
        let set: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let demand: usize = set.iter().map(|&i| quotas[i]).sum();
        graph.neighborhood(&set).len() >= demand
    })
}

/// WEF straight from the definition, with bundle values recomputed from scratch.
pub fn naive_wef(inst: &Instance, alloc: &Allocation) -> bool {
    let n = inst.n();
    (0..n).all(|i| {
        let own: f64 = alloc.bundle(i).iter().map(|&g| inst.utility(i, g)).sum();
        (0..n).all(|j| {
            let other: f64 = alloc.bundle(j).iter().map(|&g| inst.utility(i, g)).sum();
            own / inst.weight(i) >= other / inst.weight(j)
        })
    })
}

pub fn naive_wprop(inst: &Instance, alloc: &Allocation) -> bool {
    let total_weight: f64 = inst.weights().iter().sum();
    (0..inst.n()).all(|i| {
        let own: f64 = alloc.bundle(i).iter().map(|&g| inst.utility(i, g)).sum();
        own >= inst.weight(i) / total_weight * inst.total_value(i)
    })
}

/// WEF1: for every envied bundle, some single item removes the envy.
pub fn naive_wef1(inst: &Instance, alloc: &Allocation) -> bool {
    let n = inst.n();
    (0..n).all(|i| {
        let own: f64 = alloc.bundle(i).iter().map(|&g| inst.utility(i, g)).sum();
        (0..n).all(|j| {
            let bundle = alloc.bundle(j);
            let full: f64 = bundle.iter().map(|&g| inst.utility(i, g)).sum();
            own / inst.weight(i) >= full / inst.weight(j)
                || bundle.iter().any(|&drop| {
                    let rest: f64 = bundle.iter().filter(|&&g| g != drop).map(|&g| inst.utility(i, g)).sum();
                    own / inst.weight(i) >= rest / inst.weight(j)
                })
        })
    })
}

pub fn uniform_in<R: RngCore + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

pub fn int_in<R: RngCore + ?Sized>(rng: &mut R, lo: usize, hi: usize) -> usize {
    lo + (uniform01(rng) * (hi - lo + 1) as f64) as usize
}

/// Random instance with uniform utilities and weights in `[w_lo, w_hi]`.
pub fn random_instance<R: RngCore + ?Sized>(rng: &mut R, n: usize, m: usize, w_lo: f64, w_hi: f64) -> Instance {
    let weights = (0..n).map(|_| uniform_in(rng, w_lo, w_hi)).collect();
    let utilities = (0..n).map(|_| (0..m).map(|_| uniform01(rng)).collect()).collect();
    Instance::new(weights, utilities).unwrap()
}

/// Maximum bipartite matching by simple augmenting paths (Kuhn), on a plain
/// left-to-right adjacency list. Returns the matching size.
pub fn kuhn_matching_size(adjacency: &[Vec<usize>], right: usize) -> usize {
    fn augment(u: usize, adjacency: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adjacency[u] {
            if !seen[v] {
                seen[v] = true;
                if owner[v].is_none_or(|w| augment(w, adjacency, seen, owner)) {
                    owner[v] = Some(u);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; right];
    (0..adjacency.len())
        .filter(|&u| augment(u, adjacency, &mut vec![false; right], &mut owner))
        .count()
}

/// The graph with `quotas[i]` copies of left vertex `i`, each sharing its neighbours.
pub fn copy_expand(graph: &BipartiteGraph, quotas: &[usize]) -> Vec<Vec<usize>> {
    quotas
        .iter()
        .enumerate()
        .flat_map(|(i, &s)| std::iter::repeat_n(graph.neighbors(i).to_vec(), s))
        .collect()
}

/// The same two-agent instance with the heavier agent second.
pub fn heavier_second(inst: &Instance) -> Instance {
    let w = inst.weights();
    if w[1] >= w[0] {
        return inst.clone();
    }
    let u = inst.utilities();
    Instance::new(vec![w[1], w[0]], vec![u[1].clone(), u[0].clone()]).unwrap()
}
