//! Weighted fairness predicates: WEF, WEF1 and WPROP.
//!
//! All comparisons are `lhs >= rhs - tolerance`. With the default tolerance
//! of zero they are exact floating-point comparisons.

use serde::Serialize;

use crate::instance::{Allocation, AllocationError, Instance};

/// Default comparison slack.
pub const EXACT: f64 = 0.0;

/// Envy of `envier` toward `envied`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairEnvy {
    pub envier: usize,
    pub envied: usize,
    /// `u_i(A_i)/w_i - u_i(A_j)/w_j`; negative means weighted envy.
    pub weighted_value_gap: f64,
    /// Whether the pair satisfies the WEF inequality at the report's tolerance.
    pub wef: bool,
    /// An item whose removal from the envied bundle clears the envy. Present
    /// iff the envied bundle is nonempty and such an item exists.
    pub wef1_witness: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvyReport {
    pub tolerance: f64,
    /// All ordered pairs `(i, j)` with `i != j`, row-major.
    pub pairs: Vec<PairEnvy>,
    #[serde(skip)]
    envied_nonempty: Vec<bool>,
}

impl EnvyReport {
    pub fn is_wef(&self) -> bool {
        self.pairs.iter().all(|p| p.wef)
    }

    pub fn is_wef1(&self) -> bool {
        self.pairs
            .iter()
            .all(|p| !self.envied_nonempty[p.envied] || p.wef1_witness.is_some())
    }

    pub fn wef_violations(&self) -> impl Iterator<Item = &PairEnvy> {
        self.pairs.iter().filter(|p| !p.wef)
    }

    pub fn wef1_violations(&self) -> impl Iterator<Item = &PairEnvy> {
        self.pairs
            .iter()
            .filter(|p| self.envied_nonempty[p.envied] && p.wef1_witness.is_none())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WpropReport {
    pub tolerance: f64,
    /// `(w_i/W) u_i(M) - u_i(A_i)`; positive means agent `i` falls short.
    pub shortfalls: Vec<f64>,
    #[serde(skip)]
    holds: Vec<bool>,
}

impl WpropReport {
    pub fn is_wprop(&self) -> bool {
        self.holds.iter().all(|&h| h)
    }

    pub fn short_agents(&self) -> impl Iterator<Item = usize> + '_ {
        self.holds
            .iter()
            .enumerate()
            .filter(|(_, &h)| !h)
            .map(|(i, _)| i)
    }
}

/// Builds the full pairwise envy report.
pub fn envy_report(
    instance: &Instance,
    allocation: &Allocation,
    tolerance: f64,
) -> Result<EnvyReport, AllocationError> {
    allocation.validate_for(instance)?;
    let n = instance.n();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        let w_i = instance.weight(i);
        let own = instance.value(i, allocation.bundle(i)) / w_i;
        for j in (0..n).filter(|&j| j != i) {
            let w_j = instance.weight(j);
            let bundle = allocation.bundle(j);
            let other = instance.value(i, bundle) / w_j;
            let wef1_witness = best_item(instance, i, bundle).filter(|&g| {
                let rest: f64 = bundle
                    .iter()
                    .filter(|&&h| h != g)
                    .map(|&h| instance.utility(i, h))
                    .sum();
                wef_pair_holds(own, rest / w_j, tolerance)
            });
            pairs.push(PairEnvy {
                envier: i,
                envied: j,
                weighted_value_gap: own - other,
                wef: wef_pair_holds(own, other, tolerance),
                wef1_witness,
            });
        }
    }
    Ok(EnvyReport {
        tolerance,
        pairs,
        envied_nonempty: allocation.bundles().iter().map(|b| !b.is_empty()).collect(),
    })
}

pub fn is_wef(
    instance: &Instance,
    allocation: &Allocation,
    tolerance: f64,
) -> Result<(bool, EnvyReport), AllocationError> {
    let report = envy_report(instance, allocation, tolerance)?;
    Ok((report.is_wef(), report))
}

pub fn is_wef1(
    instance: &Instance,
    allocation: &Allocation,
    tolerance: f64,
) -> Result<(bool, EnvyReport), AllocationError> {
    let report = envy_report(instance, allocation, tolerance)?;
    Ok((report.is_wef1(), report))
}

pub fn is_wprop(
    instance: &Instance,
    allocation: &Allocation,
    tolerance: f64,
) -> Result<(bool, WpropReport), AllocationError> {
    allocation.validate_for(instance)?;
    let total_weight = instance.total_weight();
    let (shortfalls, holds) = (0..instance.n())
        .map(|i| {
            let share = proportional_share(instance.weight(i), total_weight, instance.total_value(i));
            let own = instance.value(i, allocation.bundle(i));
            (share - own, wprop_agent_holds(own, share, tolerance))
        })
        .unzip();
    let report = WpropReport {
        tolerance,
        shortfalls,
        holds,
    };
    Ok((report.is_wprop(), report))
}

/// `(w_i / W) * u_i(M)`, the weighted proportional share.
pub fn proportional_share(weight: f64, total_weight: f64, total_value: f64) -> f64 {
    weight / total_weight * total_value
}

#[inline]
pub(crate) fn wef_pair_holds(own_scaled: f64, other_scaled: f64, tolerance: f64) -> bool {
    own_scaled >= other_scaled - tolerance
}

#[inline]
pub(crate) fn wprop_agent_holds(own_value: f64, share: f64, tolerance: f64) -> bool {
    own_value >= share - tolerance
}

/// WEF over a precomputed value matrix, `values[i * n + j] = u_i(A_j)`.
/// Uses the same arithmetic as [`envy_report`] so verdicts agree bit for bit.
pub(crate) fn wef_holds_on_values(values: &[f64], weights: &[f64], tolerance: f64) -> bool {
    let n = weights.len();
    (0..n).all(|i| {
        let own = values[i * n + i] / weights[i];
        (0..n)
            .filter(|&j| j != i)
            .all(|j| wef_pair_holds(own, values[i * n + j] / weights[j], tolerance))
    })
}

/// Highest-utility item of `bundle` for `agent`, lowest index on ties.
fn best_item(instance: &Instance, agent: usize, bundle: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &g in bundle {
        match best {
            Some(b) if instance.utility(agent, g) <= instance.utility(agent, b) => {}
            _ => best = Some(g),
        }
    }
    best
}
