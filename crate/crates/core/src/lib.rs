//! Fair allocation of indivisible goods among agents with unequal
//! entitlements, under random utilities.
//!
//! The crate provides the fairness predicates (weighted envy-freeness,
//! WEF1, weighted proportionality), the weighted picking sequence, the
//! threshold/matching allocators, exhaustive and certificate-based oracles,
//! and a seeded Monte Carlo sweep engine.

pub mod algorithms;
pub mod experiments;
pub mod fairness;
pub mod instance;
pub mod matching;
pub mod oracle;
pub mod sampling;
pub mod stats;

pub use algorithms::{
    matching_based_wprop, round_robin, two_agent_threshold, weighted_picking_sequence,
    AlgorithmError, PickingTrace, WpropParams,
};
pub use experiments::{adversarial_weights, run_sweep, SweepConfig, SweepResult, WeightScheme};
pub use fairness::{envy_report, is_wef, is_wef1, is_wprop, EnvyReport, WpropReport};
pub use instance::{Allocation, AllocationError, Instance, InstanceError};
pub use matching::{
    find_left_saturating_s_matching, verify_s_matching, BipartiteGraph, QuotaVector, SMatchingOutcome,
};
pub use oracle::{exists_fair_allocation, Notion, OracleError, SearchOptions};
pub use sampling::{DistributionSpec, SeedStream};
