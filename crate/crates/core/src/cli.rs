//! File-driven experiment commands behind the `coevo` binary.
//!
//! Every run is described by one JSON config (all fields optional, flags
//! override) and writes its outputs plus the fully resolved config into an
//! output directory, so any result can be re-created from its own files.
//! All randomness flows from the single `seed` field through labelled
//! streams (see [`crate::rng`]).
//!
//! Exit codes: 0 success, 1 domain-negative verdict (failed validation,
//! infeasible instance, no admissible greedy prefix), 2 usage or input
//! errors. Output files are byte-identical across runs with the same
//! config and seed, except `timing.json`, which records wall time.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ActivationSchedule, ControlSets, ScheduleKind, SimOptions};
use crate::equilibrium::compute_equilibrium;
use crate::error::{Error, Result};
use crate::net::{EdgeListOptions, LayeredNetwork, ModelParams, ZeroRowPolicy};
use crate::rng::derive_seed;
use crate::search::{
    brute_force_minimum, greedy_centrality_baseline, minimize_control_set, sweep_complete,
    CentralityConfig, CentralityLayer, Scenario, SearchConfig, SearchOutcome, SearchResult,
};
use crate::NodeSet;

pub const SCHEMA_VERSION: u32 = 1;

/// How the network is obtained.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    /// Edge-list file (`src,dst,weight` per line, `#` comments).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// Separate edge list for the opinion layer (split mode).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opinion_file: Option<String>,
    /// Generator spec: `complete:N`, `ring:N`, `star:N`, or `random:N`
    /// (seeded from the run seed).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Symmetrize edge records (default true).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub undirected: Option<bool>,
    /// Restrict to the largest strongly connected component.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub largest_scc: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_row_policy: Option<ZeroRowPolicy>,
    /// Accept networks whose layers are not strongly connected.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub allow_reducible: Option<bool>,
}

/// One experiment description. Unused fields are ignored by commands that
/// do not need them.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    /// Scalar like `"0.5"` or `"@path"` to a per-node file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<String>,
    /// Node-set specs: `all`, `none`, or comma-separated indices.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cx: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vx: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vy: Option<String>,
    /// `synchronous`, `round-robin`, `random-single[:W]`,
    /// `random-subset:K[:W]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_decay: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chains: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Annotate minimize results with the subset-enumeration optimum.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<bool>,
    /// Sweep scenario: `all`, `opinion`, `action`, or `joint`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Complete-graph size for sweeps.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Grid specs `start:end:count` (or a single value).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<String>,
    /// Centrality layer for the greedy baseline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Where `validate` writes a network dump.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dump: Option<String>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let f = File::open(path)?;
        let cfg: RunConfig = serde_json::from_reader(BufReader::new(f))?;
        if let Some(v) = cfg.schema_version {
            if v != SCHEMA_VERSION {
                return Err(Error::InvalidInput(format!(
                    "config schema version {v} not supported (expected {SCHEMA_VERSION})"
                )));
            }
        }
        Ok(cfg)
    }

    /// Take every field the override supplies.
    pub fn merged_with(mut self, over: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            schema_version, network, lambda, beta, cx, cy, vx, vy, schedule, horizon, stride,
            epsilon, epsilon_decay, iters, chains, seed, out, jobs, oracle, scenario, n,
            lambda_grid, beta_grid, layer, alpha, dump
        );
        self
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}

/// Parse `all`, `none`/empty, or comma-separated node indices.
pub fn parse_node_set(spec: &str, n: usize, field: &str) -> Result<NodeSet> {
    let s = spec.trim();
    match s {
        "all" => Ok((0..n).collect()),
        "" | "none" => Ok(NodeSet::new()),
        _ => {
            let mut set = NodeSet::new();
            for tok in s.split(',') {
                let i: usize = tok.trim().parse().map_err(|_| {
                    config_err(format!("{field}: bad node index `{tok}`"))
                })?;
                if i >= n {
                    return Err(config_err(format!("{field}: node {i} >= n = {n}")));
                }
                set.insert(i);
            }
            Ok(set)
        }
    }
}

/// Parse a scalar or `@file` per-node parameter spec.
fn parse_param(spec: &str, n: usize, field: &str) -> Result<Vec<f64>> {
    let s = spec.trim();
    if let Some(path) = s.strip_prefix('@') {
        let text = fs::read_to_string(path)?;
        let vals: std::result::Result<Vec<f64>, _> =
            text.split_whitespace().map(str::parse).collect();
        let vals =
            vals.map_err(|e| config_err(format!("{field}: bad value in {path}: {e}")))?;
        if vals.len() != n {
            return Err(config_err(format!(
                "{field}: {path} has {} values for {n} nodes",
                vals.len()
            )));
        }
        Ok(vals)
    } else {
        let v: f64 =
            s.parse().map_err(|_| config_err(format!("{field}: bad value `{s}`")))?;
        Ok(vec![v; n])
    }
}

/// Parse `start:end:count` (inclusive linspace) or a single value.
pub fn parse_grid(spec: &str, field: &str) -> Result<Vec<f64>> {
    let s = spec.trim();
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [one] => {
            let v: f64 =
                one.parse().map_err(|_| config_err(format!("{field}: bad value `{one}`")))?;
            Ok(vec![v])
        }
        [a, b, k] => {
            let a: f64 = a.parse().map_err(|_| config_err(format!("{field}: bad start")))?;
            let b: f64 = b.parse().map_err(|_| config_err(format!("{field}: bad end")))?;
            let k: usize = k.parse().map_err(|_| config_err(format!("{field}: bad count")))?;
            if k == 0 {
                return Err(config_err(format!("{field}: count must be positive")));
            }
            if k == 1 {
                return Ok(vec![a]);
            }
            Ok((0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect())
        }
        _ => Err(config_err(format!("{field}: expected `value` or `start:end:count`"))),
    }
}

fn parse_schedule(spec: &str, seed: u64) -> Result<ActivationSchedule> {
    let parts: Vec<&str> = spec.trim().split(':').collect();
    let seed = derive_seed(seed, "schedule");
    let kind = match parts.as_slice() {
        ["synchronous"] => ScheduleKind::Synchronous,
        ["round-robin"] => ScheduleKind::RoundRobin,
        ["random-single"] => ScheduleKind::RandomSingle { window: None },
        ["random-single", w] => ScheduleKind::RandomSingle {
            window: Some(w.parse().map_err(|_| config_err("schedule: bad window"))?),
        },
        ["random-subset", k] => ScheduleKind::RandomSubset {
            k: k.parse().map_err(|_| config_err("schedule: bad subset size"))?,
            window: None,
        },
        ["random-subset", k, w] => ScheduleKind::RandomSubset {
            k: k.parse().map_err(|_| config_err("schedule: bad subset size"))?,
            window: Some(w.parse().map_err(|_| config_err("schedule: bad window"))?),
        },
        _ => return Err(config_err(format!("unknown schedule `{spec}`"))),
    };
    Ok(ActivationSchedule { kind, seed })
}

fn resolve_network(cfg: &RunConfig) -> Result<LayeredNetwork> {
    let spec = cfg
        .network
        .as_ref()
        .ok_or_else(|| config_err("network: missing (set `network.file` or `network.generator`)"))?;
    let seed = cfg.seed.unwrap_or(0);
    let net = match (&spec.file, &spec.generator) {
        (Some(_), Some(_)) => {
            return Err(config_err("network: `file` and `generator` are mutually exclusive"))
        }
        (None, None) => {
            return Err(config_err("network: set either `file` or `generator`"))
        }
        (Some(path), None) => {
            let opts = EdgeListOptions {
                undirected: spec.undirected.unwrap_or(true),
                zero_row_policy: spec.zero_row_policy.unwrap_or(ZeroRowPolicy::Reject),
                restrict_largest_scc: spec.largest_scc.unwrap_or(false),
            };
            let reader = BufReader::new(File::open(path)?);
            match &spec.opinion_file {
                Some(op) => {
                    let reader_w = BufReader::new(File::open(op)?);
                    LayeredNetwork::from_edge_lists(reader, reader_w, &opts)?
                }
                None => LayeredNetwork::from_edge_list(reader, &opts)?,
            }
        }
        (None, Some(gen)) => {
            let (kind, size) = gen
                .split_once(':')
                .ok_or_else(|| config_err(format!("generator: expected `kind:n`, got `{gen}`")))?;
            let n: usize = size
                .parse()
                .map_err(|_| config_err(format!("generator: bad node count `{size}`")))?;
            match kind {
                "complete" => LayeredNetwork::complete(n)?,
                "ring" => LayeredNetwork::ring(n)?,
                "star" => LayeredNetwork::star(n)?,
                "random" => {
                    LayeredNetwork::random_regularized(n, derive_seed(seed, "network-gen"))?
                }
                other => return Err(config_err(format!("generator: unknown kind `{other}`"))),
            }
        }
    };
    Ok(if spec.allow_reducible.unwrap_or(false) { net.allow_reducible() } else { net })
}

fn resolve_params(cfg: &RunConfig, n: usize) -> Result<ModelParams> {
    let lam = cfg.lambda.as_deref().ok_or_else(|| config_err("lambda: missing"))?;
    let beta = cfg.beta.as_deref().ok_or_else(|| config_err("beta: missing"))?;
    ModelParams::new(parse_param(lam, n, "lambda")?, parse_param(beta, n, "beta")?)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(cfg.out.as_deref().unwrap_or("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Which subcommand to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Validate,
    Simulate,
    Check,
    Minimize,
    Sweep,
    Greedy,
}

/// Execute a command; returns the process exit code.
pub fn run(kind: CommandKind, cfg: &RunConfig) -> Result<i32> {
    match kind {
        CommandKind::Validate => cmd_validate(cfg),
        CommandKind::Simulate => cmd_simulate(cfg),
        CommandKind::Check => cmd_check(cfg),
        CommandKind::Minimize => cmd_minimize(cfg),
        CommandKind::Sweep => cmd_sweep(cfg),
        CommandKind::Greedy => cmd_greedy(cfg),
    }
}

#[derive(Serialize)]
struct ValidateRecord<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    report: crate::net::ValidationReport,
}

fn cmd_validate(cfg: &RunConfig) -> Result<i32> {
    let net = resolve_network(cfg)?;
    let dir = out_dir(cfg)?;
    let report = net.validate();
    let passed = report.passed;
    write_json(
        &dir.join("validation.json"),
        &ValidateRecord { schema_version: SCHEMA_VERSION, config: cfg, report },
    )?;
    if let Some(dump) = &cfg.dump {
        let mut w = BufWriter::new(File::create(dump)?);
        net.write_dump(&mut w)?;
    }
    println!("validation: {}", if passed { "pass" } else { "fail" });
    Ok(if passed { 0 } else { 1 })
}

#[derive(Serialize)]
struct SimulateMetadata<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    schedule: &'a ActivationSchedule,
    window: usize,
    steps_run: usize,
    stop: crate::dynamics::StopReason,
    stride: usize,
}

fn cmd_simulate(cfg: &RunConfig) -> Result<i32> {
    let net = resolve_network(cfg)?;
    let n = net.n();
    let params = resolve_params(cfg, n)?;
    let control = ControlSets::pinned(
        parse_node_set(cfg.cx.as_deref().unwrap_or("none"), n, "cx")?,
        parse_node_set(cfg.cy.as_deref().unwrap_or("none"), n, "cy")?,
    );
    let seed = cfg.seed.unwrap_or(0);
    let schedule = parse_schedule(cfg.schedule.as_deref().unwrap_or("synchronous"), seed)?;
    let window = schedule.window(n);
    let horizon = cfg.horizon.unwrap_or(50 * window * n);
    let opts = SimOptions::new(horizon).with_stride(cfg.stride.unwrap_or(1));
    let traj = crate::dynamics::simulate(&net, &params, &control, &schedule, &opts)?;

    let dir = out_dir(cfg)?;
    let mut w = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    crate::dynamics::write_trajectory_csv(&traj, &mut w)?;
    write_json(
        &dir.join("metadata.json"),
        &SimulateMetadata {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            schedule: &schedule,
            window,
            steps_run: traj.steps_run,
            stop: traj.stop,
            stride: opts.stride,
        },
    )?;
    println!(
        "simulate: {} steps, {}",
        traj.steps_run,
        match traj.stop {
            crate::dynamics::StopReason::Converged { step } => format!("converged at step {step}"),
            crate::dynamics::StopReason::HorizonExhausted => "horizon exhausted".into(),
        }
    );
    Ok(0)
}

#[derive(Serialize)]
struct CheckRecord<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    report: crate::equilibrium::EquilibriumReport,
}

fn cmd_check(cfg: &RunConfig) -> Result<i32> {
    let net = resolve_network(cfg)?;
    let n = net.n();
    let params = resolve_params(cfg, n)?;
    let cx = parse_node_set(
        cfg.cx.as_deref().ok_or_else(|| config_err("cx: missing"))?,
        n,
        "cx",
    )?;
    let cy = parse_node_set(
        cfg.cy.as_deref().ok_or_else(|| config_err("cy: missing"))?,
        n,
        "cy",
    )?;
    let report = compute_equilibrium(&net, &params, &cx, &cy)?;
    let phi = report.phi;
    let dir = out_dir(cfg)?;
    write_json(
        &dir.join("equilibrium.json"),
        &CheckRecord { schema_version: SCHEMA_VERSION, config: cfg, report },
    )?;
    println!("phi={phi}");
    Ok(0)
}

#[derive(Serialize)]
struct ChainSummary {
    label: String,
    best_size: usize,
    best_first_hit: usize,
}

#[derive(Serialize)]
struct OracleSummary {
    min_size: usize,
    minima_count: usize,
    matches_best: bool,
}

#[derive(Serialize)]
struct MinimizeRecord<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    outcome: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    best: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_cx: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_cy: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fraction: Option<f64>,
    epsilon: f64,
    iters: usize,
    seed: u64,
    chains: Vec<ChainSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSummary>,
}

fn cmd_minimize(cfg: &RunConfig) -> Result<i32> {
    let started = Instant::now();
    let net = resolve_network(cfg)?;
    let n = net.n();
    let params = resolve_params(cfg, n)?;
    let vx = parse_node_set(
        cfg.vx.as_deref().ok_or_else(|| config_err("vx: missing"))?,
        n,
        "vx",
    )?;
    let vy = parse_node_set(
        cfg.vy.as_deref().ok_or_else(|| config_err("vy: missing"))?,
        n,
        "vy",
    )?;
    if vx.is_empty() && vy.is_empty() {
        return Err(config_err("vx and vy are both empty: nothing is controllable"));
    }
    let epsilon = cfg.epsilon.ok_or_else(|| config_err("epsilon: missing"))?;
    let iters = cfg.iters.ok_or_else(|| config_err("iters: missing"))?;
    let seed = cfg.seed.unwrap_or(0);
    let chains = cfg.chains.unwrap_or(1).max(1);
    let jobs = cfg.jobs.unwrap_or(1).max(1);

    let run_chain = |i: usize| -> Result<SearchOutcome> {
        let sc = SearchConfig {
            epsilon,
            max_iters: iters,
            seed: derive_seed(seed, &format!("chain-{i}")),
            epsilon_decay: cfg.epsilon_decay,
        };
        minimize_control_set(&net, &params, &vx, &vy, &sc)
    };
    let outcomes: Vec<Result<SearchOutcome>> = if jobs > 1 && chains > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..chains).into_par_iter().map(run_chain).collect()
        })
    } else {
        (0..chains).map(run_chain).collect()
    };

    let dir = out_dir(cfg)?;
    let mut results: Vec<SearchResult> = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            SearchOutcome::Infeasible => {
                write_json(
                    &dir.join("result.json"),
                    &MinimizeRecord {
                        schema_version: SCHEMA_VERSION,
                        config: cfg,
                        outcome: "infeasible",
                        best: None,
                        best_cx: None,
                        best_cy: None,
                        size: None,
                        fraction: None,
                        epsilon,
                        iters,
                        seed,
                        chains: Vec::new(),
                        oracle: None,
                    },
                )?;
                write_json(
                    &dir.join("timing.json"),
                    &serde_json::json!({ "wall_time_ms": started.elapsed().as_millis() as u64 }),
                )?;
                println!("minimize: infeasible (controlling everything is not enough)");
                return Ok(1);
            }
            SearchOutcome::Found(res) => {
                let name =
                    if chains == 1 { "trace.csv".to_string() } else { format!("trace_{i}.csv") };
                let mut w = BufWriter::new(File::create(dir.join(name))?);
                crate::search::write_trace_csv(&res.trace, &mut w)?;
                results.push(res);
            }
        }
    }
    // merge: smallest best set, ties by lexicographic node list
    let best = results
        .iter()
        .min_by(|a, b| {
            a.best
                .len()
                .cmp(&b.best.len())
                .then_with(|| a.best.iter().cmp(b.best.iter()))
        })
        .expect("at least one chain")
        .clone();

    let oracle = if cfg.oracle.unwrap_or(false) {
        let minima = brute_force_minimum(&net, &params, &vx, &vy, None)?;
        let min_size = minima.first().map(|c| c.len()).unwrap_or(0);
        Some(OracleSummary {
            min_size,
            minima_count: minima.len(),
            matches_best: min_size == best.best.len(),
        })
    } else {
        None
    };

    let record = MinimizeRecord {
        schema_version: SCHEMA_VERSION,
        config: cfg,
        outcome: "found",
        best: Some(best.best.iter().copied().collect()),
        best_cx: Some(best.best_cx.iter().copied().collect()),
        best_cy: Some(best.best_cy.iter().copied().collect()),
        size: Some(best.best.len()),
        fraction: Some(best.best.len() as f64 / n as f64),
        epsilon,
        iters,
        seed,
        chains: results
            .iter()
            .enumerate()
            .map(|(i, r)| ChainSummary {
                label: format!("chain-{i}"),
                best_size: r.best.len(),
                best_first_hit: r.trace.best_first_hit,
            })
            .collect(),
        oracle,
    };
    write_json(&dir.join("result.json"), &record)?;
    write_json(
        &dir.join("timing.json"),
        &serde_json::json!({ "wall_time_ms": started.elapsed().as_millis() as u64 }),
    )?;
    println!(
        "minimize: best size {} of {n} nodes ({:.1}%)",
        best.best.len(),
        100.0 * best.best.len() as f64 / n as f64
    );
    Ok(0)
}

#[derive(Serialize)]
struct SweepRecord<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    n: usize,
    scenarios: Vec<String>,
}

fn cmd_sweep(cfg: &RunConfig) -> Result<i32> {
    let n = cfg.n.unwrap_or(21);
    let lambda_grid = parse_grid(cfg.lambda_grid.as_deref().unwrap_or("0.1:0.9:9"), "lambda_grid")?;
    let beta_grid = parse_grid(cfg.beta_grid.as_deref().unwrap_or("0.1:0.9:9"), "beta_grid")?;
    let scenario = cfg.scenario.as_deref().unwrap_or("all");
    let scenarios: Vec<Scenario> = match scenario {
        "all" => vec![Scenario::Opinion, Scenario::Action, Scenario::Joint],
        s => vec![s.parse()?],
    };
    let dir = out_dir(cfg)?;
    let mut names = Vec::new();
    for sc in &scenarios {
        let cells = sweep_complete(&lambda_grid, &beta_grid, n, *sc)?;
        let name = format!("sweep_{sc}.csv");
        let mut w = BufWriter::new(File::create(dir.join(&name))?);
        crate::search::write_sweep_csv(&cells, &mut w)?;
        names.push(name);
    }
    write_json(
        &dir.join("result.json"),
        &SweepRecord { schema_version: SCHEMA_VERSION, config: cfg, n, scenarios: names.clone() },
    )?;
    println!("sweep: wrote {}", names.join(", "));
    Ok(0)
}

#[derive(Serialize)]
struct GreedyRecord<'a> {
    schema_version: u32,
    config: &'a RunConfig,
    ranking: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    prefix: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fraction: Option<f64>,
}

fn cmd_greedy(cfg: &RunConfig) -> Result<i32> {
    let net = resolve_network(cfg)?;
    let n = net.n();
    let params = resolve_params(cfg, n)?;
    let vx = parse_node_set(
        cfg.vx.as_deref().ok_or_else(|| config_err("vx: missing"))?,
        n,
        "vx",
    )?;
    let vy = parse_node_set(
        cfg.vy.as_deref().ok_or_else(|| config_err("vy: missing"))?,
        n,
        "vy",
    )?;
    let layer = match cfg.layer.as_deref().unwrap_or("action") {
        "action" => CentralityLayer::Action,
        "opinion" => CentralityLayer::Opinion,
        other => return Err(config_err(format!("layer: unknown `{other}`"))),
    };
    let ccfg = CentralityConfig { layer, alpha: cfg.alpha };
    let out = greedy_centrality_baseline(&net, &params, &vx, &vy, &ccfg)?;
    let dir = out_dir(cfg)?;
    let (code, msg) = match &out.prefix {
        Some(p) => (0, format!("greedy: admissible prefix of size {} of {n}", p.len())),
        None => (1, "greedy: no admissible prefix".to_string()),
    };
    write_json(
        &dir.join("greedy.json"),
        &GreedyRecord {
            schema_version: SCHEMA_VERSION,
            config: cfg,
            ranking: out.ranking.clone(),
            prefix: out.prefix.as_ref().map(|p| p.iter().copied().collect()),
            size: out.prefix.as_ref().map(NodeSet::len),
            fraction: out.prefix.as_ref().map(|p| p.len() as f64 / n as f64),
        },
    )?;
    println!("{msg}");
    Ok(code)
}
