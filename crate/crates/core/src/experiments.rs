//! Seeded Monte Carlo sweeps over instance families, and the adversarial
//! two-type weight vector.
//!
//! Every trial is reproducible from `(root seed, cell index, trial index)`:
//! trial `t` of cell `c` draws from `SeedStream::new(seed, c).substream(t)`.
//! Trials may run on any number of threads; results are collected in trial
//! order before aggregation, so output never depends on scheduling.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algorithms::{matching_based_wprop, two_agent_threshold, weighted_picking_sequence, WpropParams};
use crate::fairness::{is_wef, is_wprop, EXACT};
use crate::instance::Instance;
use crate::oracle::{
    exists_fair_allocation, two_agent_nonexistence_certificate, wprop_counting_certificate, Notion,
    SearchOptions,
};
use crate::sampling::{sample_matrix, uniform01, DistributionSpec, SeedStream};
use crate::stats::Estimate;

/// Largest `m` for which two-agent non-existence is decided exhaustively.
pub const EXHAUSTIVE_TWO_AGENT_MAX_ITEMS: usize = 12;

/// Substream index reserved for fixed-weight draws within a cell.
const FIXED_WEIGHT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("trials must be at least 1")]
    ZeroTrials,
    #[error("sweep grid is empty (axis `{0}` has no values)")]
    EmptyGrid(&'static str),
    #[error("grid must set exactly one of `m` and `m_multiplier`")]
    ItemAxis,
    #[error("adversarial weights need floor(delta n) >= 2, got n = {n}, delta = {delta}")]
    TooFewAgents { n: usize, delta: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid weight scheme `{0}`")]
    InvalidScheme(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("could not build a worker pool: {0}")]
    ThreadPool(String),
}

/// Two-type weights: `ceil((1-delta) n)` light agents sharing total weight
/// `delta`, then `floor(delta n)` heavy agents sharing `1 - delta`, where
/// `delta = (1 - mu) epsilon`.
pub fn adversarial_weights(n: usize, mu: f64, epsilon: f64) -> Result<Vec<f64>, ExperimentError> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(ExperimentError::InvalidParameter(format!("epsilon = {epsilon} must lie in (0, 1/2)")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(ExperimentError::InvalidParameter(format!("mu = {mu} must lie in (0, 1)")));
    }
    let delta = (1.0 - mu) * epsilon;
    let heavy = (delta * n as f64).floor() as usize;
    if heavy < 2 {
        return Err(ExperimentError::TooFewAgents { n, delta });
    }
    let light = n - heavy;
    debug_assert_eq!(light, ((1.0 - delta) * n as f64).ceil() as usize);
    let light_weight = delta / light as f64;
    let heavy_weight = (1.0 - delta) / heavy as f64;
    let mut weights = vec![light_weight; light];
    weights.extend(std::iter::repeat_n(heavy_weight, heavy));

    let ratio = heavy_weight.max(light_weight) / heavy_weight.min(light_weight);
    let bound = 2.0 / ((1.0 - mu).powi(2) * epsilon * epsilon);
    assert!(ratio <= bound, "weight ratio {ratio} exceeds {bound}");
    let total: f64 = weights.iter().sum();
    assert!((total - 1.0).abs() <= 1e-12, "weights sum to {total}");
    Ok(weights)
}

/// How agent weights are produced for each trial.
///
/// Text forms: `equal`, `uniform:lo=1,hi=2` (append `,fixed` to draw once per
/// cell instead of once per trial), `ratio:r=100` (two agents, weights
/// `(1, r)`), `adversarial:eps=0.3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightScheme {
    Equal,
    Uniform { lo: f64, hi: f64, fixed: bool },
    Ratio { r: f64 },
    Adversarial { epsilon: f64 },
}

impl WeightScheme {
    /// Weights for `n` agents. `mu` is the mean of the utility distribution.
    pub fn weights<R: RngCore + ?Sized>(&self, n: usize, mu: f64, rng: &mut R) -> Result<Vec<f64>, ExperimentError> {
        match *self {
            WeightScheme::Equal => Ok(vec![1.0; n]),
            WeightScheme::Uniform { lo, hi, .. } => Ok((0..n).map(|_| lo + (hi - lo) * uniform01(rng)).collect()),
            WeightScheme::Ratio { r } => {
                if n != 2 {
                    return Err(ExperimentError::InvalidParameter(format!(
                        "weight scheme `ratio` needs 2 agents, got {n}"
                    )));
                }
                Ok(vec![1.0, r])
            }
            WeightScheme::Adversarial { epsilon } => adversarial_weights(n, mu, epsilon),
        }
    }

    pub fn is_fixed(&self) -> bool {
        !matches!(self, WeightScheme::Uniform { fixed: false, .. })
    }
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WeightScheme::Equal => f.write_str("equal"),
            WeightScheme::Uniform { lo, hi, fixed } => {
                write!(f, "uniform:lo={lo},hi={hi}")?;
                if fixed {
                    f.write_str(",fixed")?;
                }
                Ok(())
            }
            WeightScheme::Ratio { r } => write!(f, "ratio:r={r}"),
            WeightScheme::Adversarial { epsilon } => write!(f, "adversarial:eps={epsilon}"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ExperimentError::InvalidScheme(s.to_owned());
        let (kind, rest) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let mut fixed = false;
        let mut params = Vec::new();
        for part in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.split_once('=') {
                Some((key, value)) => params.push((key.trim(), value.trim().parse::<f64>().map_err(|_| bad())?)),
                None if part == "fixed" => fixed = true,
                None => return Err(bad()),
            }
        }
        let get = |name: &str| params.iter().find(|(k, _)| *k == name).map(|&(_, v)| v);
        let known = |names: &[&str]| params.iter().all(|(k, _)| names.contains(k));
        let scheme = match kind {
            "equal" if params.is_empty() && !fixed => WeightScheme::Equal,
            "uniform" if known(&["lo", "hi"]) => {
                let (lo, hi) = (get("lo").ok_or_else(bad)?, get("hi").ok_or_else(bad)?);
                if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                    return Err(bad());
                }
                WeightScheme::Uniform { lo, hi, fixed }
            }
            "ratio" if known(&["r"]) && !fixed => {
                let r = get("r").ok_or_else(bad)?;
                if !(r >= 1.0 && r.is_finite()) {
                    return Err(bad());
                }
                WeightScheme::Ratio { r }
            }
            "adversarial" if known(&["eps"]) && !fixed => WeightScheme::Adversarial {
                epsilon: get("eps").ok_or_else(bad)?,
            },
            _ => return Err(bad()),
        };
        Ok(scheme)
    }
}

impl TryFrom<String> for WeightScheme {
    type Error = ExperimentError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<WeightScheme> for String {
    fn from(scheme: WeightScheme) -> String {
        scheme.to_string()
    }
}

/// What a trial runs and what counts as success.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Experiment {
    /// The picking sequence's output is WEF.
    WefPicking,
    /// The matching algorithm returns an allocation and it is WPROP.
    WpropMatching,
    /// The item-counting certificate rules out WPROP.
    WpropCertificate,
    /// The two-agent threshold allocation is WPROP.
    TwoAgentThreshold,
    /// No WEF allocation: exhaustive search for small `m`, the two-agent
    /// certificate otherwise.
    TwoAgentNonexistence,
    /// Some WEF allocation exists (exhaustive).
    ExhaustiveWef,
    /// Some WPROP allocation exists (exhaustive).
    ExhaustiveWprop,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::WefPicking,
        Experiment::WpropMatching,
        Experiment::WpropCertificate,
        Experiment::TwoAgentThreshold,
        Experiment::TwoAgentNonexistence,
        Experiment::ExhaustiveWef,
        Experiment::ExhaustiveWprop,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::WefPicking => "wef-picking",
            Experiment::WpropMatching => "wprop-matching",
            Experiment::WpropCertificate => "wprop-certificate",
            Experiment::TwoAgentThreshold => "two-agent-threshold",
            Experiment::TwoAgentNonexistence => "two-agent-nonexistence",
            Experiment::ExhaustiveWef => "exhaustive-wef",
            Experiment::ExhaustiveWprop => "exhaustive-wprop",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ExperimentError::UnknownExperiment(s.to_owned()))
    }
}

impl TryFrom<String> for Experiment {
    type Error = ExperimentError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Experiment> for String {
    fn from(e: Experiment) -> String {
        e.name().to_owned()
    }
}

fn default_dist() -> Vec<DistributionSpec> {
    vec![DistributionSpec::Uniform]
}

fn default_weights() -> Vec<WeightScheme> {
    vec![WeightScheme::Equal]
}

fn default_epsilon() -> Vec<f64> {
    vec![0.3]
}

fn default_true() -> bool {
    true
}

fn default_threads() -> usize {
    1
}

/// Grid axes. Exactly one of `m` and `m_multiplier` must be given; a
/// multiplier `k` means `m = round(k n / (1 - mu))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub experiment: Vec<Experiment>,
    pub n: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_multiplier: Option<Vec<f64>>,
    #[serde(default = "default_dist")]
    pub dist: Vec<DistributionSpec>,
    #[serde(default = "default_weights")]
    pub weights: Vec<WeightScheme>,
    #[serde(default = "default_epsilon")]
    pub epsilon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub seed: u64,
    pub trials: u64,
    pub grid: Grid,
    /// Record per-trial wall time. When off, `mean_wall_ms` is written as 0
    /// so that output is byte-for-byte reproducible.
    #[serde(default = "default_true")]
    pub timing: bool,
    #[serde(default = "default_threads")]
    pub threads: usize,
    /// Passed to the matching algorithm as its constant `C`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_ratio_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_override: Option<f64>,
}

impl SweepConfig {
    /// Expands the grid; the last axis listed varies fastest.
    pub fn cells(&self) -> Result<Vec<Cell>, ExperimentError> {
        let g = &self.grid;
        for (name, len) in [
            ("experiment", g.experiment.len()),
            ("n", g.n.len()),
            ("dist", g.dist.len()),
            ("weights", g.weights.len()),
            ("epsilon", g.epsilon.len()),
        ] {
            if len == 0 {
                return Err(ExperimentError::EmptyGrid(name));
            }
        }
        let items = match (&g.m, &g.m_multiplier) {
            (Some(m), None) if m.is_empty() => return Err(ExperimentError::EmptyGrid("m")),
            (None, Some(k)) if k.is_empty() => return Err(ExperimentError::EmptyGrid("m_multiplier")),
            (Some(m), None) => ItemAxis::Count(m.clone()),
            (None, Some(k)) => ItemAxis::Multiplier(k.clone()),
            _ => return Err(ExperimentError::ItemAxis),
        };
        let mut cells = Vec::new();
        for &experiment in &g.experiment {
            for &dist in &g.dist {
                for &weights in &g.weights {
                    for &epsilon in &g.epsilon {
                        for &n in &g.n {
                            for m in items.resolve(n, dist.mean()) {
                                cells.push(Cell {
                                    experiment,
                                    n,
                                    m,
                                    dist,
                                    weights,
                                    epsilon,
                                });
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }

    fn wprop_params(&self, cell: &Cell) -> WpropParams {
        let mut params = WpropParams::for_distribution(&cell.dist, cell.epsilon);
        params.weight_ratio_bound = self.weight_ratio_bound;
        params.tau_override = self.tau_override;
        params
    }
}

enum ItemAxis {
    Count(Vec<usize>),
    Multiplier(Vec<f64>),
}

impl ItemAxis {
    fn resolve(&self, n: usize, mu: f64) -> Vec<usize> {
        match self {
            ItemAxis::Count(m) => m.clone(),
            ItemAxis::Multiplier(k) => k.iter().map(|k| (k * n as f64 / (1.0 - mu)).round() as usize).collect(),
        }
    }
}

/// One point of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub experiment: Experiment,
    pub n: usize,
    pub m: usize,
    pub dist: DistributionSpec,
    pub weights: WeightScheme,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub cell: usize,
    pub trial: u64,
    pub success: bool,
    /// For experiments that run an allocator: whether it produced an allocation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allocation_found: Option<bool>,
    /// Whether the checked fairness predicate held.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predicate: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_fired: Option<bool>,
    /// Instantiation or algorithm failure; the trial counts as unsuccessful.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_ms: f64,
}

impl TrialReport {
    fn new(cell: usize, trial: u64) -> Self {
        TrialReport {
            cell,
            trial,
            success: false,
            allocation_found: None,
            predicate: None,
            certificate_fired: None,
            error: None,
            wall_ms: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    #[serde(flatten)]
    pub estimate: Estimate,
    pub errors: u64,
    pub mean_wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub seed: u64,
    pub cells: Vec<CellResult>,
    #[serde(skip)]
    pub trials: Vec<TrialReport>,
}

impl SweepResult {
    pub const CSV_HEADER: [&'static str; 12] = [
        "experiment",
        "n",
        "m",
        "dist",
        "weights",
        "epsilon",
        "trials",
        "successes",
        "estimate",
        "ci_lo",
        "ci_hi",
        "mean_wall_ms",
    ];

    /// One row per cell. Floats use the shortest representation that
    /// round-trips.
    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(Self::CSV_HEADER).expect("in-memory write");
        for r in &self.cells {
            let c = &r.cell;
            let e = &r.estimate;
            writer
                .write_record([
                    c.experiment.to_string(),
                    c.n.to_string(),
                    c.m.to_string(),
                    c.dist.to_string(),
                    c.weights.to_string(),
                    c.epsilon.to_string(),
                    e.trials.to_string(),
                    e.successes.to_string(),
                    e.estimate.to_string(),
                    e.ci_lo.to_string(),
                    e.ci_hi.to_string(),
                    r.mean_wall_ms.to_string(),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

/// Runs every cell of the grid. `threads` overrides `config.threads` when given.
pub fn run_sweep(config: &SweepConfig, threads: Option<usize>) -> Result<SweepResult, ExperimentError> {
    if config.trials == 0 {
        return Err(ExperimentError::ZeroTrials);
    }
    let cells = config.cells()?;
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| (0..config.trials).map(move |t| (c, t)))
        .collect();
    let pool = pool(threads.unwrap_or(config.threads))?;
    let trials: Vec<TrialReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| {
                let stream = SeedStream::new(config.seed, c as u64);
                run_trial(config, c, &cells[c], stream, t)
            })
            .collect()
    });
    let results = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let reports = &trials[c * config.trials as usize..(c + 1) * config.trials as usize];
            aggregate(*cell, reports, config.timing)
        })
        .collect();
    Ok(SweepResult {
        seed: config.seed,
        cells: results,
        trials,
    })
}

/// Runs `trials` trials of one cell on the current thread, drawing trial `t`
/// from `stream.substream(t)`.
pub fn estimate_existence_probability(
    config: &SweepConfig,
    cell: &Cell,
    trials: u64,
    stream: SeedStream,
) -> Result<CellResult, ExperimentError> {
    if trials == 0 {
        return Err(ExperimentError::ZeroTrials);
    }
    let reports: Vec<TrialReport> = (0..trials).map(|t| run_trial(config, 0, cell, stream, t)).collect();
    Ok(aggregate(*cell, &reports, config.timing))
}

fn pool(threads: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| ExperimentError::ThreadPool(e.to_string()))
}

fn aggregate(cell: Cell, reports: &[TrialReport], timing: bool) -> CellResult {
    let successes = reports.iter().filter(|r| r.success).count() as u64;
    let errors = reports.iter().filter(|r| r.error.is_some()).count() as u64;
    let mean_wall_ms = if timing && !reports.is_empty() {
        reports.iter().map(|r| r.wall_ms).sum::<f64>() / reports.len() as f64
    } else {
        0.0
    };
    CellResult {
        cell,
        estimate: Estimate::from_counts(successes, reports.len() as u64),
        errors,
        mean_wall_ms,
    }
}

/// Builds the trial's instance: weights first, then the utility matrix.
pub fn trial_instance(cell: &Cell, stream: SeedStream, trial: u64) -> Result<Instance, ExperimentError> {
    let mut rng = stream.substream(trial).rng();
    let mu = cell.dist.mean();
    let weights = if cell.weights.is_fixed() {
        cell.weights.weights(cell.n, mu, &mut stream.substream(FIXED_WEIGHT_STREAM).rng())?
    } else {
        cell.weights.weights(cell.n, mu, &mut rng)?
    };
    let utilities = sample_matrix(&cell.dist, cell.n, cell.m, &mut rng)
        .map_err(|e| ExperimentError::InvalidParameter(e.to_string()))?;
    Instance::new(weights, utilities).map_err(|e| ExperimentError::InvalidParameter(e.to_string()))
}

fn run_trial(config: &SweepConfig, index: usize, cell: &Cell, stream: SeedStream, trial: u64) -> TrialReport {
    let start = config.timing.then(Instant::now);
    let mut report = TrialReport::new(index, trial);
    if let Err(e) = trial_instance(cell, stream, trial).and_then(|inst| evaluate(config, cell, &inst, &mut report)) {
        report.success = false;
        report.error = Some(e.to_string());
    }
    if let Some(start) = start {
        report.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    report
}

fn evaluate(config: &SweepConfig, cell: &Cell, inst: &Instance, report: &mut TrialReport) -> Result<(), ExperimentError> {
    let err = |e: &dyn std::error::Error| ExperimentError::InvalidParameter(e.to_string());
    match cell.experiment {
        Experiment::WefPicking => {
            let (alloc, _) = weighted_picking_sequence(inst);
            let (holds, _) = is_wef(inst, &alloc, EXACT).map_err(|e| err(&e))?;
            report.allocation_found = Some(true);
            report.predicate = Some(holds);
            report.success = holds;
        }
        Experiment::WpropMatching => match matching_based_wprop(inst, &config.wprop_params(cell)) {
            Ok(out) => {
                let (holds, _) = is_wprop(inst, &out.allocation, EXACT).map_err(|e| err(&e))?;
                report.allocation_found = Some(true);
                report.predicate = Some(holds);
                report.success = holds;
            }
            Err(crate::algorithms::AlgorithmError::NoSaturatingMatching(_)) => {
                report.allocation_found = Some(false);
            }
            Err(e) => return Err(err(&e)),
        },
        Experiment::WpropCertificate => {
            let fired = wprop_counting_certificate(inst).verdict.fired();
            report.certificate_fired = Some(fired);
            report.success = fired;
        }
        Experiment::TwoAgentThreshold => {
            let out = two_agent_threshold(inst, &cell.dist).map_err(|e| err(&e))?;
            let (holds, _) = is_wprop(inst, &out.allocation, EXACT).map_err(|e| err(&e))?;
            report.allocation_found = Some(true);
            report.predicate = Some(holds);
            report.success = holds;
        }
        Experiment::TwoAgentNonexistence => {
            let cert = two_agent_nonexistence_certificate(inst).map_err(|e| err(&e))?;
            report.certificate_fired = Some(cert.verdict.fired());
            report.success = if inst.m() <= EXHAUSTIVE_TWO_AGENT_MAX_ITEMS {
                let exists = exists_fair_allocation(inst, Notion::Wef, SearchOptions::default()).map_err(|e| err(&e))?;
                report.predicate = Some(exists.exists());
                !exists.exists()
            } else {
                cert.verdict.fired()
            };
        }
        Experiment::ExhaustiveWef | Experiment::ExhaustiveWprop => {
            let notion = if cell.experiment == Experiment::ExhaustiveWef { Notion::Wef } else { Notion::Wprop };
            let exists = exists_fair_allocation(inst, notion, SearchOptions::default()).map_err(|e| err(&e))?;
            report.predicate = Some(exists.exists());
            report.success = exists.exists();
        }
    }
    Ok(())
}
