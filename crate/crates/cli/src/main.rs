mod provenance;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use fairdiv::algorithms::{
    eligibility_graph, matching_based_wprop, round_robin, two_agent_threshold, weighted_picking_sequence,
    wprop_thresholds, AlgorithmError, WpropParams,
};
use fairdiv::experiments::{run_sweep, SweepConfig, WeightScheme};
use fairdiv::fairness::{is_wef, is_wef1, is_wprop};
use fairdiv::oracle::{
    exists_fair_allocation, two_agent_nonexistence_certificate, wprop_counting_certificate, Notion, OracleError,
    SearchOptions,
};
use fairdiv::sampling::{sample_matrix, DistributionSpec, SeedStream};
use fairdiv::{Allocation, Instance};

use provenance::Provenance;

const EXIT_HOLDS: u8 = 0;
const EXIT_FAILS: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_GUARD: u8 = 3;

#[derive(Parser)]
#[command(name = "fairdiv", about = "Weighted fair division of indivisible goods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random instance.
    Gen(GenArgs),
    /// Check an allocation against a fairness notion.
    Check(CheckArgs),
    /// Run an allocation algorithm.
    Allocate(AllocateArgs),
    /// Decide existence by exhaustive search, or run the non-existence certificates.
    Oracle(OracleArgs),
    /// Run a Monte Carlo sweep and write a CSV summary.
    Sweep(SweepArgs),
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value = "uniform")]
    dist: DistributionSpec,
    /// equal | uniform:lo=A,hi=B | ratio:r=R | adversarial:eps=E
    #[arg(long, default_value = "equal")]
    weights: WeightScheme,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CheckArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    allocation: PathBuf,
    #[arg(long, value_enum)]
    notion: NotionArg,
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum NotionArg {
    Wef,
    Wef1,
    Wprop,
}

impl From<NotionArg> for Notion {
    fn from(n: NotionArg) -> Notion {
        match n {
            NotionArg::Wef => Notion::Wef,
            NotionArg::Wef1 => Notion::Wef1,
            NotionArg::Wprop => Notion::Wprop,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Wps,
    Matching,
    TwoAgent,
    RoundRobin,
}

#[derive(clap::Args)]
struct AllocateArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    algo: Algo,
    /// Utility distribution the instance was drawn from (matching, two-agent).
    #[arg(long, default_value = "uniform")]
    dist: DistributionSpec,
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    #[arg(long)]
    tau_override: Option<f64>,
    #[arg(long)]
    weight_ratio_bound: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the eligibility graph and quotas here (matching only).
    #[arg(long)]
    dump_graph: Option<PathBuf>,
}

#[derive(clap::Args)]
struct OracleArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum)]
    notion: NotionArg,
    /// Only run the polynomial-time certificates.
    #[arg(long)]
    certify_only: bool,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
    /// Round utilities to multiples of 2^-BITS before searching.
    #[arg(long, value_name = "BITS")]
    quantize: Option<u32>,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Write 0 for mean_wall_ms so the output is reproducible byte for byte.
    #[arg(long)]
    no_timing: bool,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn input<E: Into<anyhow::Error>>(error: E) -> Failure {
    Failure {
        code: EXIT_INPUT,
        error: error.into(),
    }
}

type Outcome = Result<u8, Failure>;

fn main() -> ExitCode {
    let version: &'static str = Box::leak(provenance::version_line().into_boxed_str());
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(args),
        Command::Check(args) => cmd_check(args),
        Command::Allocate(args) => cmd_allocate(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(input)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("cannot write {}", path.display()))
            .map_err(input),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    text
}

/// Parses an instance file; also returns the seed recorded in its provenance, if any.
fn load_instance(bytes: &[u8], path: &Path) -> Result<(Instance, Option<u64>), Failure> {
    let instance: Instance = serde_json::from_slice(bytes)
        .with_context(|| format!("invalid instance {}", path.display()))
        .map_err(input)?;
    let seed = serde_json::from_slice::<Value>(bytes)
        .ok()
        .and_then(|v| v.pointer("/provenance/seed").and_then(Value::as_u64));
    Ok((instance, seed))
}

fn cmd_gen(args: GenArgs) -> Outcome {
    let canonical = format!(
        "n={} m={} dist={} weights={} seed={}",
        args.n, args.m, args.dist, args.weights, args.seed
    );
    let mut rng = SeedStream::new(args.seed, 0).rng();
    let weights = args.weights.weights(args.n, args.dist.mean(), &mut rng).map_err(input)?;
    let utilities = sample_matrix(&args.dist, args.n, args.m, &mut rng).map_err(input)?;
    let instance = Instance::new(weights, utilities).map_err(input)?;

    #[derive(Serialize)]
    struct Generated<'a> {
        provenance: Provenance,
        dist: DistributionSpec,
        weight_scheme: WeightScheme,
        #[serde(flatten)]
        instance: &'a Instance,
    }
    let doc = Generated {
        provenance: Provenance::new("gen", Some(args.seed), &[canonical.as_bytes()]),
        dist: args.dist,
        weight_scheme: args.weights,
        instance: &instance,
    };
    emit(args.out.as_deref(), &to_json(&doc))?;
    Ok(EXIT_HOLDS)
}

fn cmd_check(args: CheckArgs) -> Outcome {
    let inst_bytes = read(&args.instance)?;
    let alloc_bytes = read(&args.allocation)?;
    let (instance, seed) = load_instance(&inst_bytes, &args.instance)?;
    let allocation: Allocation = serde_json::from_slice(&alloc_bytes)
        .with_context(|| format!("invalid allocation {}", args.allocation.display()))
        .map_err(input)?;
    allocation
        .validate_for(&instance)
        .context("allocation is not a partition of the items")
        .map_err(input)?;
    let notion = Notion::from(args.notion);
    let params = format!("notion={notion} tolerance={}", args.tolerance);
    let provenance = Provenance::new("check", seed, &[&inst_bytes, &alloc_bytes, params.as_bytes()]);

    let (holds, report, violations) = match notion {
        Notion::Wef | Notion::Wef1 => {
            let (holds, report) = if notion == Notion::Wef {
                is_wef(&instance, &allocation, args.tolerance)
            } else {
                is_wef1(&instance, &allocation, args.tolerance)
            }
            .map_err(input)?;
            let pairs: Vec<Value> = if notion == Notion::Wef {
                report.wef_violations().map(|p| json!([p.envier, p.envied])).collect()
            } else {
                report.wef1_violations().map(|p| json!([p.envier, p.envied])).collect()
            };
            for pair in &pairs {
                eprintln!("violation: agent {} envies agent {}", pair[0], pair[1]);
            }
            (holds, serde_json::to_value(&report).expect("serializable"), pairs)
        }
        Notion::Wprop => {
            let (holds, report) = is_wprop(&instance, &allocation, args.tolerance).map_err(input)?;
            let agents: Vec<Value> = report.short_agents().map(|i| json!(i)).collect();
            for agent in &agents {
                eprintln!("violation: agent {agent} is below their proportional share");
            }
            (holds, serde_json::to_value(&report).expect("serializable"), agents)
        }
    };
    let doc = json!({
        "provenance": provenance,
        "notion": notion,
        "holds": holds,
        "violations": violations,
        "report": report,
    });
    emit(None, &to_json(&doc))?;
    Ok(if holds { EXIT_HOLDS } else { EXIT_FAILS })
}

fn cmd_allocate(args: AllocateArgs) -> Outcome {
    let inst_bytes = read(&args.instance)?;
    let (instance, seed) = load_instance(&inst_bytes, &args.instance)?;
    let algo = args.algo.to_possible_value().expect("named variant");
    let params = format!(
        "algo={} dist={} eps={} tau_override={:?} weight_ratio_bound={:?}",
        algo.get_name(),
        args.dist,
        args.eps,
        args.tau_override,
        args.weight_ratio_bound
    );
    let provenance = Provenance::new("allocate", seed, &[&inst_bytes, params.as_bytes()]);

    let mut code = EXIT_HOLDS;
    let (allocation, details): (Option<Allocation>, Value) = match args.algo {
        Algo::Wps => {
            let (allocation, trace) = weighted_picking_sequence(&instance);
            (Some(allocation), json!({ "trace": trace }))
        }
        Algo::RoundRobin => (Some(round_robin(&instance)), Value::Null),
        Algo::TwoAgent => {
            let out = two_agent_threshold(&instance, &args.dist).map_err(input)?;
            let details = json!({ "ratio": out.ratio, "p": out.p, "tau": out.tau });
            (Some(out.allocation), details)
        }
        Algo::Matching => {
            let mut wprop = WpropParams::for_distribution(&args.dist, args.eps);
            wprop.tau_override = args.tau_override;
            wprop.weight_ratio_bound = args.weight_ratio_bound;
            if let Some(path) = &args.dump_graph {
                let thresholds = wprop_thresholds(&instance, &wprop).map_err(input)?;
                let graph = eligibility_graph(&instance, thresholds.tau);
                let dump = json!({ "graph": graph, "quotas": thresholds.quotas, "tau": thresholds.tau });
                emit(Some(path), &to_json(&dump))?;
            }
            match matching_based_wprop(&instance, &wprop) {
                Ok(out) => {
                    let details = json!({
                        "thresholds": out.thresholds,
                        "matching": out.matching,
                        "unmatched": out.unmatched,
                    });
                    (Some(out.allocation), details)
                }
                Err(AlgorithmError::NoSaturatingMatching(witness)) => {
                    eprintln!(
                        "no left-saturating s-matching: agents {:?} have {} neighbours but demand {}",
                        witness.agents,
                        witness.neighborhood.len(),
                        witness.demand
                    );
                    code = EXIT_FAILS;
                    (None, json!({ "deficient_set": witness }))
                }
                Err(e) => return Err(input(e)),
            }
        }
    };
    let checks = allocation.as_ref().map(|a| {
        let wef = is_wef(&instance, a, 0.0).map(|r| r.0).ok();
        let wef1 = is_wef1(&instance, a, 0.0).map(|r| r.0).ok();
        let wprop = is_wprop(&instance, a, 0.0).map(|r| r.0).ok();
        json!({ "wef": wef, "wef1": wef1, "wprop": wprop })
    });
    let doc = json!({
        "provenance": provenance,
        "algorithm": algo.get_name(),
        "allocation": allocation,
        "checks": checks,
        "details": details,
    });
    emit(args.out.as_deref(), &to_json(&doc))?;
    Ok(code)
}

/// Swaps the two agents so the heavier one comes second.
fn heavier_second(instance: &Instance) -> Result<(Instance, bool), Failure> {
    let w = instance.weights();
    if w[1] >= w[0] {
        return Ok((instance.clone(), false));
    }
    let utilities = instance.utilities();
    let swapped = Instance::new(vec![w[1], w[0]], vec![utilities[1].clone(), utilities[0].clone()]).map_err(input)?;
    Ok((swapped, true))
}

fn cmd_oracle(args: OracleArgs) -> Outcome {
    let inst_bytes = read(&args.instance)?;
    let (mut instance, seed) = load_instance(&inst_bytes, &args.instance)?;
    if let Some(bits) = args.quantize {
        instance = instance.quantized(bits);
    }
    let notion = Notion::from(args.notion);
    let params = format!(
        "notion={notion} certify_only={} tolerance={} quantize={:?}",
        args.certify_only, args.tolerance, args.quantize
    );
    let provenance = Provenance::new("oracle", seed, &[&inst_bytes, params.as_bytes()]);

    // WEF implies WPROP, so ruling out WPROP also rules out WEF; with two
    // agents the notions coincide. Nothing rules out WEF1.
    let counting = (notion != Notion::Wef1).then(|| wprop_counting_certificate(&instance));
    let two_agent = if notion != Notion::Wef1 && instance.n() == 2 {
        let (ordered, swapped) = heavier_second(&instance)?;
        let cert = two_agent_nonexistence_certificate(&ordered).map_err(input)?;
        Some(json!({ "agents_swapped": swapped, "certificate": cert }))
    } else {
        None
    };
    let certified = counting.as_ref().is_some_and(|c| c.verdict.fired())
        || two_agent
            .as_ref()
            .is_some_and(|c| c["certificate"]["verdict"] == "certified-non-existence");

    let search = if args.certify_only {
        None
    } else {
        let options = SearchOptions {
            tolerance: args.tolerance,
            threads: args.threads,
        };
        match exists_fair_allocation(&instance, notion, options) {
            Ok(out) => Some(out),
            Err(e @ OracleError::InstanceTooLarge { .. }) => {
                return Err(Failure {
                    code: EXIT_GUARD,
                    error: anyhow!(e),
                })
            }
            Err(e) => return Err(input(e)),
        }
    };
    let (result, code) = match &search {
        Some(out) if out.exists() => ("exists", EXIT_HOLDS),
        Some(_) => ("not exists", EXIT_FAILS),
        None if certified => ("certified non-existence", EXIT_FAILS),
        None => ("inconclusive", EXIT_HOLDS),
    };
    let doc = json!({
        "provenance": provenance,
        "notion": notion,
        "result": result,
        "exists": search.as_ref().map(|s| s.exists()),
        "witness": search.as_ref().and_then(|s| s.witness.clone()),
        "allocations_searched": search.as_ref().map(|s| s.allocations),
        "certificates": { "wprop_counting": counting, "two_agent": two_agent },
    });
    emit(None, &to_json(&doc))?;
    Ok(code)
}

fn cmd_sweep(args: SweepArgs) -> Outcome {
    let bytes = read(&args.config)?;
    let mut config: SweepConfig = serde_json::from_slice(&bytes)
        .with_context(|| format!("invalid sweep config {}", args.config.display()))
        .map_err(input)?;
    if args.no_timing {
        config.timing = false;
    }
    let params = format!("timing={}", config.timing);
    let provenance = Provenance::new("sweep", Some(config.seed), &[&bytes, params.as_bytes()]);
    let result = run_sweep(&config, args.threads).map_err(input)?;
    let text = provenance.csv_comment() + &result.to_csv();
    emit(args.out.as_deref(), &text)?;
    Ok(EXIT_HOLDS)
}
