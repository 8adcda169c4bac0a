//! Ground truth for tiny instances by exhaustive search, plus sound
//! polynomial-time certificates that no fair allocation exists.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::fairness::{self, is_wef1, proportional_share, wef_holds_on_values, wprop_agent_holds};
use crate::instance::{Allocation, Instance};

/// Upper bound on `n^m` for exhaustive search.
pub const MAX_ENUMERATION: u64 = 10_000_000;

/// Relative margin by which the two-agent condition must hold before it is
/// reported as a certificate, so floating-point rounding cannot fake one.
const TWO_AGENT_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("exhaustive search over {n}^{m} allocations exceeds the limit of {MAX_ENUMERATION}")]
    InstanceTooLarge { n: usize, m: usize },
    #[error("certificate needs exactly 2 agents, got {0}")]
    NotTwoAgents(usize),
    #[error("certificate needs w_2 >= w_1 (put the heavier agent second)")]
    WeightOrder,
    #[error("unknown fairness notion `{0}` (expected wef, wprop or wef1)")]
    UnknownNotion(String),
    #[error("could not build a worker pool: {0}")]
    ThreadPool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Notion {
    Wef,
    Wprop,
    Wef1,
}

impl fmt::Display for Notion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Notion::Wef => "wef",
            Notion::Wprop => "wprop",
            Notion::Wef1 => "wef1",
        })
    }
}

impl FromStr for Notion {
    type Err = OracleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wef" => Ok(Notion::Wef),
            "wprop" => Ok(Notion::Wprop),
            "wef1" => Ok(Notion::Wef1),
            _ => Err(OracleError::UnknownNotion(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub tolerance: f64,
    pub threads: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            tolerance: fairness::EXACT,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Existence {
    pub notion: Notion,
    /// Lexicographically smallest satisfying allocation, comparing the
    /// item-to-agent assignment vectors.
    pub witness: Option<Allocation>,
    pub allocations: u64,
}

impl Existence {
    pub fn exists(&self) -> bool {
        self.witness.is_some()
    }
}

/// Enumerates all `n^m` allocations in lexicographic order of the
/// assignment vector (item 0 most significant) and returns the first one
/// satisfying `notion`. With `threads > 1` the range is split into
/// contiguous shards searched in parallel; the earliest shard with a hit
/// wins, so the result does not depend on the thread count.
pub fn exists_fair_allocation(
    instance: &Instance,
    notion: Notion,
    options: SearchOptions,
) -> Result<Existence, OracleError> {
    let (n, m) = (instance.n(), instance.m());
    let total = (n as u64)
        .checked_pow(m as u32)
        .filter(|&t| t <= MAX_ENUMERATION)
        .ok_or(OracleError::InstanceTooLarge { n, m })?;
    let search = Searcher::new(instance, notion, options.tolerance);
    let witness = if options.threads <= 1 {
        search.first_in(0, total)
    } else {
        let shards = (options.threads as u64 * 8).min(total);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(options.threads)
            .build()
            .map_err(|e| OracleError::ThreadPool(e.to_string()))?;
        pool.install(|| {
            (0..shards).into_par_iter().find_map_first(|k| {
                let lo = total * k / shards;
                let hi = total * (k + 1) / shards;
                search.first_in(lo, hi)
            })
        })
    };
    Ok(Existence {
        notion,
        witness: witness.map(|owner| Allocation::from_assignment(&owner, n)),
        allocations: total,
    })
}

struct Searcher<'a> {
    instance: &'a Instance,
    notion: Notion,
    tolerance: f64,
    shares: Vec<f64>,
}

impl<'a> Searcher<'a> {
    fn new(instance: &'a Instance, notion: Notion, tolerance: f64) -> Self {
        let total_weight = instance.total_weight();
        let shares = (0..instance.n())
            .map(|i| proportional_share(instance.weight(i), total_weight, instance.total_value(i)))
            .collect();
        Searcher {
            instance,
            notion,
            tolerance,
            shares,
        }
    }

    fn first_in(&self, lo: u64, hi: u64) -> Option<Vec<usize>> {
        let (n, m) = (self.instance.n(), self.instance.m());
        let mut owner = decode(lo, n, m);
        let mut values = vec![0.0; n * n];
        for _ in lo..hi {
            if self.satisfied(&owner, &mut values) {
                return Some(owner);
            }
            // Odometer increment, least significant digit last.
            for g in (0..m).rev() {
                owner[g] += 1;
                if owner[g] < n {
                    break;
                }
                owner[g] = 0;
            }
        }
        None
    }

    /// Bundle values are summed in ascending item order, exactly as the
    /// public predicates do, so both paths reach the same verdict.
    fn satisfied(&self, owner: &[usize], values: &mut [f64]) -> bool {
        let inst = self.instance;
        let n = inst.n();
        match self.notion {
            Notion::Wef => {
                values.iter_mut().for_each(|v| *v = 0.0);
                for (g, &j) in owner.iter().enumerate() {
                    for i in 0..n {
                        values[i * n + j] += inst.utility(i, g);
                    }
                }
                wef_holds_on_values(values, inst.weights(), self.tolerance)
            }
            Notion::Wprop => (0..n).all(|i| {
                let own: f64 = owner
                    .iter()
                    .enumerate()
                    .filter(|&(_, &j)| j == i)
                    .map(|(g, _)| inst.utility(i, g))
                    .sum();
                wprop_agent_holds(own, self.shares[i], self.tolerance)
            }),
            Notion::Wef1 => {
                let alloc = Allocation::from_assignment(owner, n);
                is_wef1(inst, &alloc, self.tolerance).is_ok_and(|(holds, _)| holds)
            }
        }
    }
}

fn decode(mut index: u64, n: usize, m: usize) -> Vec<usize> {
    let mut owner = vec![0usize; m];
    for g in (0..m).rev() {
        owner[g] = (index % n as u64) as usize;
        index /= n as u64;
    }
    owner
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedNonExistence,
    Inconclusive,
}

impl Verdict {
    fn from_fired(fired: bool) -> Self {
        if fired {
            Verdict::CertifiedNonExistence
        } else {
            Verdict::Inconclusive
        }
    }

    pub fn fired(&self) -> bool {
        *self == Verdict::CertifiedNonExistence
    }
}

/// Item-counting certificate against weighted proportionality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountingCertificate {
    /// Fewest items each agent must receive in any WPROP allocation.
    pub per_agent_minimum: Vec<u64>,
    /// Sum of the per-agent minima.
    pub required_items: u64,
    pub items: usize,
    pub verdict: Verdict,
}

/// Since every utility is at most 1, agent `i` needs at least
/// `ceil((w_i/W) u_i(M))` items, and at least one whenever that share is
/// positive. If these minima add up to more than `m`, no WPROP allocation
/// exists.
///
/// The share is computed exactly as in the WPROP predicate, and a float sum
/// of `k` utilities in `[0, 1]` never exceeds `k`, so the certificate is
/// sound for the predicate at zero tolerance.
pub fn wprop_counting_certificate(instance: &Instance) -> CountingCertificate {
    let total_weight = instance.total_weight();
    let per_agent_minimum: Vec<u64> = (0..instance.n())
        .map(|i| {
            let share = proportional_share(instance.weight(i), total_weight, instance.total_value(i));
            if share > 0.0 {
                (share.ceil() as u64).max(1)
            } else {
                0
            }
        })
        .collect();
    let required_items = per_agent_minimum.iter().sum();
    CountingCertificate {
        verdict: Verdict::from_fired(required_items > instance.m() as u64),
        per_agent_minimum,
        required_items,
        items: instance.m(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwoAgentCertificate {
    pub ratio: f64,
    /// `Y = min_g u_2(g)`.
    pub min_value: f64,
    /// `r Y > u_2(M) - Y`.
    pub tightened_condition: bool,
    /// `r Y > m`, equivalently `Y > m / r`.
    pub coarse_condition: bool,
    pub verdict: Verdict,
}

/// Two agents with `r = w_2/w_1 >= 1`. If agent 1 values the items at all,
/// any WEF allocation gives her at least one item, which is worth at least
/// `Y` to agent 2; agent 2 then keeps at most `u_2(M) - Y`. When
/// `r Y > u_2(M) - Y` agent 2 must envy, so no WEF (equivalently WPROP)
/// allocation exists. The looser `r Y > m` is reported alongside.
pub fn two_agent_nonexistence_certificate(
    instance: &Instance,
) -> Result<TwoAgentCertificate, OracleError> {
    let ratio = instance
        .two_agent_ratio()
        .ok_or(OracleError::NotTwoAgents(instance.n()))?;
    if !(ratio >= 1.0) {
        return Err(OracleError::WeightOrder);
    }
    let row = &instance.utilities()[1];
    let min_value = row.iter().copied().fold(f64::INFINITY, f64::min);
    let agent1_needs_item = instance.total_value(0) > 0.0;
    let rest = instance.total_value(1) - min_value;
    let tightened_condition = agent1_needs_item && ratio * min_value > rest * (1.0 + TWO_AGENT_MARGIN);
    let coarse_condition = agent1_needs_item && ratio * min_value > instance.m() as f64;
    Ok(TwoAgentCertificate {
        ratio,
        min_value,
        tightened_condition,
        coarse_condition,
        verdict: Verdict::from_fired(tightened_condition),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(weights: Vec<f64>, utilities: Vec<Vec<f64>>) -> Instance {
        Instance::new(weights, utilities).unwrap()
    }

    #[test]
    fn single_item_has_no_wef() {
        let inst = instance(vec![1.0, 1.0], vec![vec![0.4], vec![0.7]]);
        let out = exists_fair_allocation(&inst, Notion::Wef, SearchOptions::default()).unwrap();
        assert!(!out.exists());
        assert_eq!(out.allocations, 2);
    }

    #[test]
    fn two_by_two_wef_witness() {
        let inst = instance(vec![1.0, 1.0], vec![vec![0.6, 0.4], vec![0.3, 0.7]]);
        let out = exists_fair_allocation(&inst, Notion::Wef, SearchOptions::default()).unwrap();
        assert_eq!(out.witness.unwrap().bundles(), &[vec![0], vec![1]]);
    }

    #[test]
    fn witness_is_lexicographically_first() {
        // All 1s, m = 4, equal weights: first WEF assignment is 0,0,1,1.
        let inst = instance(vec![1.0, 1.0], vec![vec![1.0; 4]; 2]);
        for threads in [1, 3] {
            let opts = SearchOptions { threads, ..SearchOptions::default() };
            let out = exists_fair_allocation(&inst, Notion::Wef, opts).unwrap();
            assert_eq!(out.witness.unwrap().assignment(4), vec![0, 0, 1, 1]);
        }
    }

    #[test]
    fn decode_matches_odometer() {
        assert_eq!(decode(0, 3, 3), vec![0, 0, 0]);
        assert_eq!(decode(5, 3, 3), vec![0, 1, 2]);
        assert_eq!(decode(26, 3, 3), vec![2, 2, 2]);
    }

    #[test]
    fn size_guard() {
        let inst = instance(vec![1.0; 3], vec![vec![0.5; 15]; 3]);
        assert_eq!(
            exists_fair_allocation(&inst, Notion::Wprop, SearchOptions::default()).unwrap_err(),
            OracleError::InstanceTooLarge { n: 3, m: 15 }
        );
    }

    #[test]
    fn counting_certificate_examples() {
        let inst = instance(vec![1.0, 1.0], vec![vec![1.0; 2]; 2]);
        let cert = wprop_counting_certificate(&inst);
        assert_eq!(cert.required_items, 2);
        assert_eq!(cert.verdict, Verdict::Inconclusive);

        let inst = instance(vec![1.0, 9.0], vec![vec![1.0; 2]; 2]);
        let cert = wprop_counting_certificate(&inst);
        assert_eq!(cert.per_agent_minimum, vec![1, 2]);
        assert_eq!(cert.verdict, Verdict::CertifiedNonExistence);
        let exists = exists_fair_allocation(&inst, Notion::Wprop, SearchOptions::default()).unwrap();
        assert!(!exists.exists());
    }

    #[test]
    fn counting_certificate_ignores_indifferent_agents() {
        let inst = instance(vec![1.0, 1.0, 1.0], vec![vec![0.0; 2], vec![1.0; 2], vec![1.0; 2]]);
        let cert = wprop_counting_certificate(&inst);
        assert_eq!(cert.per_agent_minimum, vec![0, 1, 1]);
        assert!(!cert.verdict.fired());
    }

    #[test]
    fn two_agent_certificate_examples() {
        let inst = instance(vec![1.0, 1.0], vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let cert = two_agent_nonexistence_certificate(&inst).unwrap();
        assert_eq!(cert.min_value, 0.5);
        assert!(!cert.tightened_condition);
        assert_eq!(cert.verdict, Verdict::Inconclusive);

        let inst = instance(vec![1.0, 100.0], vec![vec![0.3, 0.6], vec![0.9, 0.8]]);
        let cert = two_agent_nonexistence_certificate(&inst).unwrap();
        assert!(cert.tightened_condition && cert.coarse_condition);
        assert!(cert.verdict.fired());
        let exists = exists_fair_allocation(&inst, Notion::Wef, SearchOptions::default()).unwrap();
        assert!(!exists.exists());
    }

    #[test]
    fn two_agent_certificate_guards() {
        let three = instance(vec![1.0; 3], vec![vec![0.5]; 3]);
        assert_eq!(two_agent_nonexistence_certificate(&three), Err(OracleError::NotTwoAgents(3)));
        let reversed = instance(vec![2.0, 1.0], vec![vec![0.5]; 2]);
        assert_eq!(two_agent_nonexistence_certificate(&reversed), Err(OracleError::WeightOrder));
        // Agent 1 indifferent: she can be left empty-handed, so nothing is certified.
        let indifferent = instance(vec![1.0, 100.0], vec![vec![0.0, 0.0], vec![0.9, 0.8]]);
        assert!(!two_agent_nonexistence_certificate(&indifferent).unwrap().verdict.fired());
    }

    #[test]
    fn notion_parsing() {
        assert_eq!("WEF1".parse::<Notion>().unwrap(), Notion::Wef1);
        assert!("ef".parse::<Notion>().is_err());
        assert_eq!(Notion::Wprop.to_string(), "wprop");
    }
}
