use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coevo::cli::{self, CommandKind, RunConfig};

/// Coevolving action-opinion dynamics: simulate, decide consensus, and
/// search for minimal committed sets.
#[derive(Parser)]
#[command(name = "coevo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network's structural assumptions and write a report.
    Validate(CommonArgs),
    /// Run the controlled dynamics and export the trajectory.
    Simulate(CommonArgs),
    /// Decide whether pinned sets force the +1 consensus (prints phi=0|1).
    Check(CommonArgs),
    /// Search for a minimal control set with the admissible-set chain.
    Minimize(CommonArgs),
    /// Tabulate closed-form minimal control fractions on complete graphs.
    Sweep(CommonArgs),
    /// Rank nodes by centrality and grow the first admissible prefix.
    Greedy(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Edge-list file (`src,dst,weight` lines, `#` comments).
    #[arg(long)]
    network: Option<String>,
    /// Edge-list file for the opinion layer (split mode).
    #[arg(long)]
    opinion_network: Option<String>,
    /// Generator spec: complete:N, ring:N, star:N, random:N.
    #[arg(long, conflicts_with = "network")]
    generator: Option<String>,
    /// Symmetrize edge records (true/false).
    #[arg(long)]
    undirected: Option<bool>,
    /// Keep only the largest strongly connected component.
    #[arg(long)]
    largest_scc: Option<bool>,
    /// Zero-weight rows: reject or self-loop.
    #[arg(long)]
    zero_row_policy: Option<String>,
    /// Accept layers that are not strongly connected.
    #[arg(long)]
    allow_reducible: bool,

    /// Action weight: scalar or @file with one value per node.
    #[arg(long)]
    lambda: Option<String>,
    /// Opinion weight: scalar or @file.
    #[arg(long)]
    beta: Option<String>,

    /// Pinned-action nodes: all, none, or comma-separated indices.
    #[arg(long)]
    cx: Option<String>,
    /// Pinned-opinion nodes.
    #[arg(long)]
    cy: Option<String>,
    /// Nodes whose action may be controlled (search constraint).
    #[arg(long)]
    vx: Option<String>,
    /// Nodes whose opinion may be controlled.
    #[arg(long)]
    vy: Option<String>,

    /// synchronous | round-robin | random-single[:W] | random-subset:K[:W]
    #[arg(long)]
    schedule: Option<String>,
    /// Maximum simulation steps.
    #[arg(long)]
    horizon: Option<usize>,
    /// Snapshot every STRIDE steps.
    #[arg(long)]
    stride: Option<usize>,

    /// Re-insertion probability of the search chain.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Optional per-iteration geometric decay of epsilon.
    #[arg(long)]
    epsilon_decay: Option<f64>,
    /// Search iteration budget.
    #[arg(long)]
    iters: Option<usize>,
    /// Independent seeded chains to run and merge.
    #[arg(long)]
    chains: Option<usize>,

    /// Base seed; all randomness derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads for independent chains and sweep cells.
    #[arg(long)]
    jobs: Option<usize>,
    /// Annotate minimize results with the exhaustive optimum (small n).
    #[arg(long)]
    oracle: bool,

    /// Sweep scenario: all | opinion | action | joint.
    #[arg(long)]
    scenario: Option<String>,
    /// Complete-graph size for sweeps.
    #[arg(long)]
    n: Option<usize>,
    /// Lambda grid `start:end:count`.
    #[arg(long)]
    lambda_grid: Option<String>,
    /// Beta grid `start:end:count`.
    #[arg(long)]
    beta_grid: Option<String>,

    /// Centrality layer for greedy: action | opinion.
    #[arg(long)]
    layer: Option<String>,
    /// Centrality attenuation (default 0.85 / spectral radius).
    #[arg(long)]
    alpha: Option<f64>,

    /// Write a bit-reproducible network dump here (validate only).
    #[arg(long)]
    dump: Option<String>,
}

impl CommonArgs {
    fn into_config(self) -> Result<RunConfig, coevo::Error> {
        let base = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        let network = if self.network.is_some()
            || self.generator.is_some()
            || self.undirected.is_some()
            || self.largest_scc.is_some()
            || self.zero_row_policy.is_some()
            || self.allow_reducible
            || self.opinion_network.is_some()
        {
            let mut spec = base.network.clone().unwrap_or_default();
            if self.network.is_some() {
                spec.file = self.network;
                spec.generator = None;
            }
            if self.generator.is_some() {
                spec.generator = self.generator;
                spec.file = None;
            }
            if self.opinion_network.is_some() {
                spec.opinion_file = self.opinion_network;
            }
            if self.undirected.is_some() {
                spec.undirected = self.undirected;
            }
            if self.largest_scc.is_some() {
                spec.largest_scc = self.largest_scc;
            }
            if let Some(p) = &self.zero_row_policy {
                spec.zero_row_policy = Some(match p.as_str() {
                    "reject" => coevo::net::ZeroRowPolicy::Reject,
                    "self-loop" => coevo::net::ZeroRowPolicy::SelfLoop,
                    other => {
                        return Err(coevo::Error::InvalidInput(format!(
                            "zero-row-policy: unknown `{other}`"
                        )))
                    }
                });
            }
            if self.allow_reducible {
                spec.allow_reducible = Some(true);
            }
            Some(spec)
        } else {
            base.network.clone()
        };
        let overrides = RunConfig {
            schema_version: Some(cli::SCHEMA_VERSION),
            network,
            lambda: self.lambda,
            beta: self.beta,
            cx: self.cx,
            cy: self.cy,
            vx: self.vx,
            vy: self.vy,
            schedule: self.schedule,
            horizon: self.horizon,
            stride: self.stride,
            epsilon: self.epsilon,
            epsilon_decay: self.epsilon_decay,
            iters: self.iters,
            chains: self.chains,
            seed: self.seed,
            out: self.out,
            jobs: self.jobs,
            oracle: if self.oracle { Some(true) } else { None },
            scenario: self.scenario,
            n: self.n,
            lambda_grid: self.lambda_grid,
            beta_grid: self.beta_grid,
            layer: self.layer,
            alpha: self.alpha,
            dump: self.dump,
        };
        Ok(base.merged_with(overrides))
    }
}

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let (kind, args) = match parsed.command {
        Command::Validate(a) => (CommandKind::Validate, a),
        Command::Simulate(a) => (CommandKind::Simulate, a),
        Command::Check(a) => (CommandKind::Check, a),
        Command::Minimize(a) => (CommandKind::Minimize, a),
        Command::Sweep(a) => (CommandKind::Sweep, a),
        Command::Greedy(a) => (CommandKind::Greedy, a),
    };
    let cfg = match args.into_config() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match cli::run(kind, &cfg) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
