//! Instances (agents, items, utilities, entitlements) and allocations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InstanceError {
    #[error("instance needs at least one agent")]
    NoAgents,
    #[error("instance needs at least one item")]
    NoItems,
    #[error("declared {what} = {declared} but data has {actual}")]
    CountMismatch {
        what: &'static str,
        declared: usize,
        actual: usize,
    },
    #[error("agent {agent} has {actual} utilities, expected {expected}")]
    RaggedRow {
        agent: usize,
        expected: usize,
        actual: usize,
    },
    #[error("utility u[{agent}][{item}] = {value} is outside [0, 1]")]
    UtilityOutOfRange { agent: usize, item: usize, value: f64 },
    #[error("weight of agent {agent} must be finite and strictly positive, got {value}")]
    NonPositiveWeight { agent: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AllocationError {
    #[error("allocation has {actual} bundles but the instance has {expected} agents")]
    BundleCount { expected: usize, actual: usize },
    #[error("item {item} is out of range for {m} items")]
    UnknownItem { item: usize, m: usize },
    #[error("item {item} is assigned more than once")]
    DuplicateItem { item: usize },
    #[error("item {item} is not assigned to any agent")]
    MissingItem { item: usize },
}

/// `n` agents with additive utilities over `m` items and positive weights.
///
/// Utilities are stored row-major, one row per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    utilities: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// On-disk JSON form. Unknown keys (such as a provenance block) are ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    m: usize,
    weights: Vec<f64>,
    utilities: Vec<Vec<f64>>,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = InstanceError;

    fn try_from(file: InstanceFile) -> Result<Self, Self::Error> {
        if file.weights.len() != file.n {
            return Err(InstanceError::CountMismatch {
                what: "n",
                declared: file.n,
                actual: file.weights.len(),
            });
        }
        if file.utilities.len() != file.n {
            return Err(InstanceError::CountMismatch {
                what: "n",
                declared: file.n,
                actual: file.utilities.len(),
            });
        }
        if let Some(row) = file.utilities.first() {
            if row.len() != file.m {
                return Err(InstanceError::CountMismatch {
                    what: "m",
                    declared: file.m,
                    actual: row.len(),
                });
            }
        }
        Instance::new(file.weights, file.utilities)
    }
}

impl From<Instance> for InstanceFile {
    fn from(inst: Instance) -> Self {
        InstanceFile {
            n: inst.n(),
            m: inst.m(),
            weights: inst.weights,
            utilities: inst.utilities,
        }
    }
}

impl Instance {
    pub fn new(weights: Vec<f64>, utilities: Vec<Vec<f64>>) -> Result<Self, InstanceError> {
        let n = weights.len();
        if n == 0 {
            return Err(InstanceError::NoAgents);
        }
        if utilities.len() != n {
            return Err(InstanceError::CountMismatch {
                what: "n",
                declared: n,
                actual: utilities.len(),
            });
        }
        let m = utilities[0].len();
        if m == 0 {
            return Err(InstanceError::NoItems);
        }
        for (agent, row) in utilities.iter().enumerate() {
            if row.len() != m {
                return Err(InstanceError::RaggedRow {
                    agent,
                    expected: m,
                    actual: row.len(),
                });
            }
            for (item, &value) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(InstanceError::UtilityOutOfRange { agent, item, value });
                }
            }
        }
        for (agent, &value) in weights.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(InstanceError::NonPositiveWeight { agent, value });
            }
        }
        Ok(Instance { utilities, weights })
    }

    /// Same utilities, different weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self, InstanceError> {
        Instance::new(weights, self.utilities.clone())
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn m(&self) -> usize {
        self.utilities[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, agent: usize) -> f64 {
        self.weights[agent]
    }

    pub fn utilities(&self) -> &[Vec<f64>] {
        &self.utilities
    }

    pub fn utility(&self, agent: usize, item: usize) -> f64 {
        self.utilities[agent][item]
    }

    /// `W`, the sum of all weights.
    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MAX, f64::min)
    }

    /// `C = w_max / w_min`.
    pub fn weight_ratio(&self) -> f64 {
        self.max_weight() / self.min_weight()
    }

    /// `r = w_2 / w_1` for two-agent instances.
    pub fn two_agent_ratio(&self) -> Option<f64> {
        (self.n() == 2).then(|| self.weights[1] / self.weights[0])
    }

    /// Additive value of `bundle` to `agent`, summed in the order given.
    pub fn value(&self, agent: usize, bundle: &[usize]) -> f64 {
        let row = &self.utilities[agent];
        bundle.iter().map(|&g| row[g]).sum()
    }

    /// `u_i(M)`.
    pub fn total_value(&self, agent: usize) -> f64 {
        self.utilities[agent].iter().sum()
    }

    /// Rounds every utility to the nearest multiple of `2^-bits`. With
    /// `bits <= 30` all bundle sums of up to `2^22` items are exact.
    pub fn quantized(&self, bits: u32) -> Instance {
        let scale = (1u64 << bits) as f64;
        let utilities = self
            .utilities
            .iter()
            .map(|row| row.iter().map(|&u| (u * scale).round() / scale).collect())
            .collect();
        Instance {
            utilities,
            weights: self.weights.clone(),
        }
    }
}

/// A partition of the items into one bundle per agent.
///
/// Bundles are kept sorted so that bundle values are always summed in
/// ascending item order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "AllocationFile")]
pub struct Allocation {
    bundles: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct AllocationFile {
    bundles: Vec<Vec<usize>>,
}

impl From<AllocationFile> for Allocation {
    fn from(file: AllocationFile) -> Self {
        Allocation::new(file.bundles)
    }
}

impl Allocation {
    pub fn new(mut bundles: Vec<Vec<usize>>) -> Self {
        for bundle in &mut bundles {
            bundle.sort_unstable();
        }
        Allocation { bundles }
    }

    /// Builds an allocation from `owner[g]`, the agent receiving item `g`.
    pub fn from_assignment(owner: &[usize], n: usize) -> Self {
        let mut bundles = vec![Vec::new(); n];
        for (g, &i) in owner.iter().enumerate() {
            bundles[i].push(g);
        }
        Allocation { bundles }
    }

    pub fn bundles(&self) -> &[Vec<usize>] {
        &self.bundles
    }

    pub fn bundle(&self, agent: usize) -> &[usize] {
        &self.bundles[agent]
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    /// Inverse of [`Allocation::from_assignment`]. Assumes a valid partition of `m` items.
    pub fn assignment(&self, m: usize) -> Vec<usize> {
        let mut owner = vec![usize::MAX; m];
        for (i, bundle) in self.bundles.iter().enumerate() {
            for &g in bundle {
                owner[g] = i;
            }
        }
        owner
    }

    /// Checks that the bundles partition `[m]` among `n` agents.
    pub fn validate(&self, n: usize, m: usize) -> Result<(), AllocationError> {
        if self.bundles.len() != n {
            return Err(AllocationError::BundleCount {
                expected: n,
                actual: self.bundles.len(),
            });
        }
        let mut seen = vec![false; m];
        for &g in self.bundles.iter().flatten() {
            if g >= m {
                return Err(AllocationError::UnknownItem { item: g, m });
            }
            if std::mem::replace(&mut seen[g], true) {
                return Err(AllocationError::DuplicateItem { item: g });
            }
        }
        match seen.iter().position(|&s| !s) {
            Some(item) => Err(AllocationError::MissingItem { item }),
            None => Ok(()),
        }
    }

    pub fn validate_for(&self, instance: &Instance) -> Result<(), AllocationError> {
        self.validate(instance.n(), instance.m())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_instances() {
        assert_eq!(
            Instance::new(vec![], vec![]).unwrap_err(),
            InstanceError::NoAgents
        );
        assert!(matches!(
            Instance::new(vec![1.0], vec![vec![1.5]]),
            Err(InstanceError::UtilityOutOfRange { .. })
        ));
        assert!(matches!(
            Instance::new(vec![0.0], vec![vec![0.5]]),
            Err(InstanceError::NonPositiveWeight { .. })
        ));
        assert!(matches!(
            Instance::new(vec![1.0, 1.0], vec![vec![0.5], vec![0.5, 0.1]]),
            Err(InstanceError::RaggedRow { agent: 1, .. })
        ));
        assert!(matches!(
            Instance::new(vec![1.0], vec![vec![f64::NAN]]),
            Err(InstanceError::UtilityOutOfRange { .. })
        ));
    }

    #[test]
    fn derived_quantities() {
        let inst = Instance::new(vec![1.0, 3.0, 6.0], vec![vec![1.0; 4]; 3]).unwrap();
        assert_eq!(inst.total_weight(), 10.0);
        assert_eq!(inst.weight_ratio(), 6.0);
        assert_eq!(inst.two_agent_ratio(), None);
        assert_eq!(inst.total_value(0), 4.0);
        let two = Instance::new(vec![2.0, 6.0], vec![vec![0.5]; 2]).unwrap();
        assert_eq!(two.two_agent_ratio(), Some(3.0));
    }

    #[test]
    fn json_roundtrip_and_header_checks() {
        let text = r#"{"n": 2, "m": 3, "weights": [1.0, 2.5],
            "utilities": [[0.1, 0.2, 0.3], [1.0, 0.0, 0.5]],
            "provenance": {"seed": 7}}"#;
        let inst: Instance = serde_json::from_str(text).unwrap();
        assert_eq!(inst.n(), 2);
        assert_eq!(inst.m(), 3);
        let back: Instance = serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);

        let wrong_m = r#"{"n": 1, "m": 2, "weights": [1.0], "utilities": [[0.1, 0.2, 0.3]]}"#;
        assert!(serde_json::from_str::<Instance>(wrong_m).is_err());
    }

    #[test]
    fn allocation_validation() {
        let ok = Allocation::new(vec![vec![2, 0], vec![1]]);
        assert_eq!(ok.bundle(0), &[0, 2]);
        assert!(ok.validate(2, 3).is_ok());
        assert_eq!(ok.assignment(3), vec![0, 1, 0]);
        assert_eq!(Allocation::from_assignment(&[0, 1, 0], 2), ok);

        assert_eq!(
            ok.validate(3, 3),
            Err(AllocationError::BundleCount { expected: 3, actual: 2 })
        );
        assert_eq!(
            Allocation::new(vec![vec![0], vec![1]]).validate(2, 3),
            Err(AllocationError::MissingItem { item: 2 })
        );
        assert_eq!(
            Allocation::new(vec![vec![0, 1], vec![1, 2]]).validate(2, 3),
            Err(AllocationError::DuplicateItem { item: 1 })
        );
        assert_eq!(
            Allocation::new(vec![vec![0, 5], vec![1, 2]]).validate(2, 3),
            Err(AllocationError::UnknownItem { item: 5, m: 3 })
        );
    }

    #[test]
    fn quantization_rounds_to_grid() {
        let inst = Instance::new(vec![1.0], vec![vec![0.1, 1.0, 0.0]]).unwrap();
        let q = inst.quantized(30);
        let scale = (1u64 << 30) as f64;
        for &u in &q.utilities()[0] {
            assert_eq!((u * scale).fract(), 0.0);
        }
        assert!((q.utility(0, 0) - 0.1).abs() < 1e-9);
    }
}
