//! Allocation algorithms: the weighted picking sequence (with its trace),
//! round-robin, the threshold/matching algorithm for weighted
//! proportionality, and the two-agent threshold rule.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::instance::{Allocation, Instance};
use crate::matching::{
    find_left_saturating_s_matching, BipartiteGraph, DeficientSet, MatchingError, QuotaVector,
    SMatching, SMatchingOutcome,
};
use crate::sampling::{DistributionSpec, SamplingError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgorithmError {
    #[error("threshold tau = {tau} and slack delta = {delta} must both be positive; the instance is too small for the default constants (pass overrides)")]
    ThresholdInvalid { tau: f64, delta: f64 },
    #[error("no left-saturating s-matching: agents {:?} need {} items but see only {}", .0.agents, .0.demand, .0.neighborhood.len())]
    NoSaturatingMatching(DeficientSet),
    #[error(transparent)]
    Matching(#[from] MatchingError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("this algorithm needs exactly 2 agents, got {0}")]
    NotTwoAgents(usize),
    #[error("weight ratio r = w_2/w_1 = {0} must be at least 1 (put the heavier agent second)")]
    WeightOrder(f64),
}

/// Exact comparison of `a*b` with `c*d` for finite non-negative operands,
/// using the FMA error term of each product.
fn cmp_products(a: f64, b: f64, c: f64, d: f64) -> Ordering {
    let p1 = a * b;
    let p2 = c * d;
    let e1 = a.mul_add(b, -p1);
    let e2 = c.mul_add(d, -p2);
    p1.total_cmp(&p2).then(e1.total_cmp(&e2))
}

/// Exact comparison of `t_a / w_a` with `t_b / w_b`.
fn cmp_pick_ratios(t_a: usize, w_a: f64, t_b: usize, w_b: f64) -> Ordering {
    cmp_products(t_a as f64, w_b, t_b as f64, w_a)
}

/// Step-by-step record of a picking sequence. Steps are numbered from 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PickingTrace {
    /// Agent picking at each step.
    pub order: Vec<usize>,
    /// Item taken at each step.
    pub picked_item: Vec<usize>,
    #[serde(skip)]
    pick_steps: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceViolation {
    #[error("step {step}: |t_{i}/w_{i} - t_{j}/w_{j}| exceeds 1/min(w_{i}, w_{j})")]
    PairBalance { step: usize, i: usize, j: usize },
    #[error("step {step}: |t_{i} - (w_{i}/W) s| exceeds w_{i}/w_min")]
    ShareBalance { step: usize, i: usize },
    #[error("agent {i} toward {j}, k = {k}: cumulative picks by {j} exceed k w_{j}/w_{i}")]
    CumulativePicks { i: usize, j: usize, k: usize },
    #[error("trace bookkeeping is inconsistent at step {0}")]
    Bookkeeping(usize),
}

impl PickingTrace {
    fn new(n: usize, order: Vec<usize>, picked_item: Vec<usize>) -> Self {
        let mut pick_steps = vec![Vec::new(); n];
        for (s, &i) in order.iter().enumerate() {
            pick_steps[i].push(s + 1);
        }
        PickingTrace {
            order,
            picked_item,
            pick_steps,
        }
    }

    pub fn steps(&self) -> usize {
        self.order.len()
    }

    pub fn agents(&self) -> usize {
        self.pick_steps.len()
    }

    /// `t_i(s)`: picks by `agent` up to and including step `s`.
    pub fn picks_through(&self, agent: usize, step: usize) -> usize {
        self.pick_steps[agent].partition_point(|&x| x <= step)
    }

    /// `s^i(k)`, the step of the agent's `k`-th pick; `s^i(0) = 0`.
    pub fn pick_step(&self, agent: usize, k: usize) -> Option<usize> {
        match k {
            0 => Some(0),
            _ => self.pick_steps[agent].get(k - 1).copied(),
        }
    }

    /// Items picked by `agent`, in picking order (`g^i_1, g^i_2, ...`).
    pub fn items_of(&self, agent: usize) -> Vec<usize> {
        self.pick_steps[agent]
            .iter()
            .map(|&s| self.picked_item[s - 1])
            .collect()
    }

    /// Inter-pick counts `tau_1, ..., tau_T` of agent `j` relative to agent
    /// `i`, with `T = t_i(m)`.
    ///
    /// Agent `j`'s first pick `g^j_1` is set aside wherever it falls.
    /// `tau_1` counts the remaining picks of `j` before `s^i(2)`; for
    /// `2 <= k < T`, `tau_k` counts picks of `j` strictly between `s^i(k)`
    /// and `s^i(k+1)`; `tau_T` counts picks of `j` after `s^i(T)`. When
    /// `T = 1`, `tau_1` is every pick of `j` except the first. The counts
    /// always sum to `max(|A_j| - 1, 0)`.
    pub fn inter_pick_counts(&self, i: usize, j: usize) -> Vec<usize> {
        let own = &self.pick_steps[i];
        let other = &self.pick_steps[j];
        let total_steps = self.steps();
        let t = own.len();
        let before = |step: usize| other.partition_point(|&x| x < step);
        (1..=t)
            .map(|k| {
                let hi = if k < t { own[k] } else { total_steps + 1 };
                let lo_count = if k == 1 { 1.min(before(hi)) } else { before(own[k - 1]) };
                before(hi) - lo_count
            })
            .collect()
    }

    /// Checks both pick-balance bounds at every step, in exact arithmetic:
    /// `|t_i(s)/w_i - t_j(s)/w_j| <= 1/min(w_i, w_j)` for all pairs and
    /// `|t_i(s) - (w_i/W) s| <= w_i/w_min` for all agents.
    ///
    /// Only pairs involving the agent who picked at step `s` change at that
    /// step, so those are the pairs rechecked.
    pub fn verify_pick_balance(&self, weights: &[f64]) -> Result<(), TraceViolation> {
        let n = self.agents();
        if weights.len() != n {
            return Err(TraceViolation::Bookkeeping(0));
        }
        let w: Vec<BigRational> = weights.iter().map(|&x| exact(x)).collect();
        let total: BigRational = w.iter().sum();
        let w_min = w.iter().min().cloned().unwrap_or_else(BigRational::zero);
        let mut counts = vec![0usize; n];
        for (idx, &picker) in self.order.iter().enumerate() {
            let step = idx + 1;
            counts[picker] += 1;
            if counts[picker] != self.picks_through(picker, step) {
                return Err(TraceViolation::Bookkeeping(step));
            }
            let ratio = |i: usize| BigRational::from_integer(BigInt::from(counts[i])) / &w[i];
            let picker_ratio = ratio(picker);
            for j in (0..n).filter(|&j| j != picker) {
                let bound = BigRational::from_integer(BigInt::from(1)) / (&w[picker]).min(&w[j]);
                if (&picker_ratio - ratio(j)).abs() > bound {
                    return Err(TraceViolation::PairBalance { step, i: picker, j });
                }
            }
            let s = BigRational::from_integer(BigInt::from(step));
            for i in 0..n {
                let t = BigRational::from_integer(BigInt::from(counts[i]));
                let fair = &w[i] * &s / &total;
                if (t - fair).abs() > &w[i] / &w_min {
                    return Err(TraceViolation::ShareBalance { step, i });
                }
            }
        }
        Ok(())
    }

    /// Checks `(tau_1 + ... + tau_k) / w_j <= k / w_i` for every ordered pair
    /// and every `k`, in exact arithmetic.
    pub fn verify_cumulative_picks(&self, weights: &[f64]) -> Result<(), TraceViolation> {
        let n = self.agents();
        let w: Vec<BigRational> = weights.iter().map(|&x| exact(x)).collect();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let mut cumulative = 0usize;
                for (idx, tau) in self.inter_pick_counts(i, j).into_iter().enumerate() {
                    cumulative += tau;
                    let k = idx + 1;
                    let lhs = BigRational::from_integer(BigInt::from(cumulative)) * &w[i];
                    let rhs = BigRational::from_integer(BigInt::from(k)) * &w[j];
                    if lhs > rhs {
                        return Err(TraceViolation::CumulativePicks { i, j, k });
                    }
                }
            }
        }
        Ok(())
    }
}

fn exact(x: f64) -> BigRational {
    BigRational::from_float(x).expect("weights are finite")
}

/// Each agent's items sorted by decreasing utility, lowest index first on ties.
fn preference_lists(instance: &Instance) -> Vec<Vec<usize>> {
    instance
        .utilities()
        .iter()
        .map(|row| {
            let mut items: Vec<usize> = (0..row.len()).collect();
            items.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            items
        })
        .collect()
}

/// Weighted picking sequence: at each step the agent minimizing `t_i / w_i`
/// (lowest index on ties, compared exactly) takes her favorite remaining
/// item (lowest index on ties).
pub fn weighted_picking_sequence(instance: &Instance) -> (Allocation, PickingTrace) {
    let (n, m) = (instance.n(), instance.m());
    let weights = instance.weights();
    let prefs = preference_lists(instance);
    let mut cursor = vec![0usize; n];
    let mut taken = vec![false; m];
    let mut counts = vec![0usize; n];
    let mut order = Vec::with_capacity(m);
    let mut picked = Vec::with_capacity(m);
    let mut owner = vec![0usize; m];
    for _ in 0..m {
        let picker = (0..n)
            .min_by(|&a, &b| cmp_pick_ratios(counts[a], weights[a], counts[b], weights[b]))
            .expect("at least one agent");
        let list = &prefs[picker];
        while taken[list[cursor[picker]]] {
            cursor[picker] += 1;
        }
        let item = list[cursor[picker]];
        taken[item] = true;
        owner[item] = picker;
        counts[picker] += 1;
        order.push(picker);
        picked.push(item);
    }
    (
        Allocation::from_assignment(&owner, n),
        PickingTrace::new(n, order, picked),
    )
}

/// Round-robin: agents pick in cyclic index order, each taking her favorite
/// remaining item (lowest index on ties).
pub fn round_robin(instance: &Instance) -> Allocation {
    let (n, m) = (instance.n(), instance.m());
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for step in 0..m {
        let agent = step % n;
        let row = &instance.utilities()[agent];
        let mut best: Option<usize> = None;
        for g in (0..m).filter(|&g| owner[g].is_none()) {
            if best.is_none_or(|b| row[g] > row[b]) {
                best = Some(g);
            }
        }
        owner[best.expect("items remain")] = Some(agent);
    }
    let owner: Vec<usize> = owner.into_iter().map(|o| o.expect("all items assigned")).collect();
    Allocation::from_assignment(&owner, n)
}

/// Inputs of the threshold/matching algorithm. `alpha` and `mu` describe the
/// utility distribution and are supplied by the caller.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WpropParams {
    pub alpha: f64,
    pub mu: f64,
    pub epsilon: f64,
    /// Constant `C >= w_max / w_min` used in the threshold. Defaults to the
    /// realized ratio.
    pub weight_ratio_bound: Option<f64>,
    pub tau_override: Option<f64>,
    pub quota_override: Option<Vec<usize>>,
}

impl WpropParams {
    pub fn new(alpha: f64, mu: f64, epsilon: f64) -> Self {
        WpropParams {
            alpha,
            mu,
            epsilon,
            weight_ratio_bound: None,
            tau_override: None,
            quota_override: None,
        }
    }

    pub fn for_distribution(spec: &DistributionSpec, epsilon: f64) -> Self {
        WpropParams::new(spec.alpha(), spec.mean(), epsilon)
    }

    pub fn is_canonical(&self) -> bool {
        self.tau_override.is_none() && self.quota_override.is_none()
    }
}

/// Threshold `tau`, slack `delta` and per-agent quotas `s_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WpropThresholds {
    pub weight_ratio_bound: f64,
    pub tau: f64,
    pub delta: f64,
    pub quotas: Vec<usize>,
    pub canonical: bool,
}

/// `tau = 1 - 8 (C + 1) ln m / (alpha n)`,
/// `delta = (1 + eps/(1+eps) * (1-mu)/mu) tau - 1`,
/// `s_i = ceil((1 + delta) (w_i / W) (mu m / tau))`, subject to overrides.
pub fn wprop_thresholds(
    instance: &Instance,
    params: &WpropParams,
) -> Result<WpropThresholds, AlgorithmError> {
    let WpropParams { alpha, mu, epsilon, .. } = *params;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(AlgorithmError::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(AlgorithmError::InvalidParameter(format!("mu = {mu} must lie in (0, 1)")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(AlgorithmError::InvalidParameter(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let realized = instance.weight_ratio();
    let c = params.weight_ratio_bound.unwrap_or(realized);
    if !(c >= realized) {
        return Err(AlgorithmError::InvalidParameter(format!(
            "weight ratio bound C = {c} is below the realized ratio {realized}"
        )));
    }
    let (n, m) = (instance.n() as f64, instance.m() as f64);
    let tau = match params.tau_override {
        Some(t) if t > 0.0 && t <= 1.0 => t,
        Some(t) => {
            return Err(AlgorithmError::InvalidParameter(format!("tau override {t} must lie in (0, 1]")))
        }
        None => 1.0 - 8.0 * (c + 1.0) * m.ln() / (alpha * n),
    };
    let delta = (1.0 + epsilon / (1.0 + epsilon) * (1.0 - mu) / mu) * tau - 1.0;
    let quotas = match &params.quota_override {
        Some(q) => {
            if q.len() != instance.n() {
                return Err(MatchingError::QuotaLength {
                    expected: instance.n(),
                    actual: q.len(),
                }
                .into());
            }
            q.clone()
        }
        None => {
            // An overridden tau already bypasses the default constants.
            if params.tau_override.is_none() && !(tau > 0.0 && delta > 0.0) {
                return Err(AlgorithmError::ThresholdInvalid { tau, delta });
            }
            let total_weight = instance.total_weight();
            instance
                .weights()
                .iter()
                .map(|&w| ((1.0 + delta) * (w / total_weight) * (mu * m / tau)).ceil() as usize)
                .collect()
        }
    };
    Ok(WpropThresholds {
        weight_ratio_bound: c,
        tau,
        delta,
        quotas,
        canonical: params.is_canonical(),
    })
}

/// `G_{>= tau}`: agent `i` is adjacent to item `g` iff `u_i(g) >= tau`.
pub fn eligibility_graph(instance: &Instance, tau: f64) -> BipartiteGraph {
    let adjacency = instance
        .utilities()
        .iter()
        .map(|row| (0..row.len()).filter(|&g| row[g] >= tau).collect())
        .collect();
    BipartiteGraph::new(instance.m(), adjacency).expect("indices are in range")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchingAllocation {
    pub allocation: Allocation,
    pub thresholds: WpropThresholds,
    pub matching: SMatching,
    /// Items outside the matching; all of them go to agent 0.
    pub unmatched: Vec<usize>,
}

/// Threshold/matching algorithm for weighted proportionality: give every
/// agent `s_i` items she values at least `tau` via a left-saturating
/// s-matching of `G_{>= tau}`; unmatched items go to agent 0.
pub fn matching_based_wprop(
    instance: &Instance,
    params: &WpropParams,
) -> Result<MatchingAllocation, AlgorithmError> {
    let thresholds = wprop_thresholds(instance, params)?;
    let graph = eligibility_graph(instance, thresholds.tau);
    let quotas = QuotaVector::new(thresholds.quotas.clone())?;
    match find_left_saturating_s_matching(&graph, &quotas)? {
        SMatchingOutcome::Deficient(witness) => Err(AlgorithmError::NoSaturatingMatching(witness)),
        SMatchingOutcome::Saturating(matching) => {
            let owners = matching.owners(instance.m());
            let unmatched: Vec<usize> = (0..instance.m()).filter(|&g| owners[g].is_none()).collect();
            let assignment: Vec<usize> = owners.into_iter().map(|o| o.unwrap_or(0)).collect();
            Ok(MatchingAllocation {
                allocation: Allocation::from_assignment(&assignment, instance.n()),
                thresholds,
                matching,
                unmatched,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdAllocation {
    pub allocation: Allocation,
    pub ratio: f64,
    pub p: f64,
    pub tau: f64,
}

/// Two agents with `r = w_2/w_1 >= 1`: with `p = alpha mu / (2 sqrt(r + 1))`
/// and `tau` the `p`-quantile of the utility distribution, every item worth
/// less than `tau` to agent 2 goes to agent 1 and the rest to agent 2.
pub fn two_agent_threshold(
    instance: &Instance,
    spec: &DistributionSpec,
) -> Result<ThresholdAllocation, AlgorithmError> {
    let ratio = instance
        .two_agent_ratio()
        .ok_or(AlgorithmError::NotTwoAgents(instance.n()))?;
    if !(ratio >= 1.0) {
        return Err(AlgorithmError::WeightOrder(ratio));
    }
    let p = spec.alpha() * spec.mean() / (2.0 * (ratio + 1.0).sqrt());
    let tau = spec.quantile(p)?;
    let assignment: Vec<usize> = instance.utilities()[1]
        .iter()
        .map(|&u| usize::from(u >= tau))
        .collect();
    Ok(ThresholdAllocation {
        allocation: Allocation::from_assignment(&assignment, 2),
        ratio,
        p,
        tau,
    })
}
