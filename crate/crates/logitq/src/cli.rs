//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when flags, configs or input documents are
//! invalid, 2 when the work itself fails.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use logitq_core::graph::{build_state_graph, check_projection_with_cap, recurrent_classes, transient_states};
use logitq_core::logit::{stationary_brute_force, stationary_closed_form, transition_matrix};
use logitq_core::solver::solve;
use logitq_core::{generate_random_game, linalg, rng, CoreError, GameGenConfig, JointActionSpace, MarkovGame};
use rand::Rng;
use serde_json::{json, Value};

use crate::experiment::{self, ExperimentConfig, ExperimentError, GameSource, GeneratorSpec, ModelMode, Scheme};
use crate::io::{self, IoError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Raised-graph size up to which `analyze` also runs the projection check.
const ANALYZE_PROJECTION_CAP: usize = 200_000;

#[derive(Debug, Parser)]
#[command(name = "logitq", version, about = "Logit-Q learning dynamics for identical-interest Markov games")]
pub struct Cli {
    /// Master seed for every stochastic output.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for multi-run experiments (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a game exactly by value iteration.
    Solve(SolveArgs),
    /// Run the learning dynamics once and write the per-round CSV.
    Simulate(SimulateArgs),
    /// Run a multi-run experiment described by a JSON config.
    Experiment(ExperimentArgs),
    /// List recurrent classes and transient states.
    Analyze(AnalyzeArgs),
    /// Compare closed-form and brute-force stationary distributions.
    VerifyStationary(VerifyArgs),
    /// Write a random game as JSON.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct GeneratorArgs {
    #[arg(long, default_value_t = 2)]
    pub states: usize,
    #[arg(long, default_value_t = 2)]
    pub agents: usize,
    #[arg(long, default_value_t = 2)]
    pub actions: usize,
    /// Discount (0.6 for generated games); overrides the discount of a loaded game.
    #[arg(long)]
    pub gamma: Option<f64>,
}

impl GeneratorArgs {
    fn discount(&self) -> f64 {
        self.gamma.unwrap_or(0.6)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub game: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,
    /// Temperature of the reported logit distribution of Q*.
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    /// Omit Q* when it has more entries than this.
    #[arg(long, default_value_t = 10_000)]
    pub elide_above: usize,
    /// Output path (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Game file; a random game is generated when absent.
    #[arg(long)]
    pub game: Option<PathBuf>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long, value_enum)]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 1e-3)]
    pub tau: f64,
    #[arg(long, default_value_t = 40)]
    pub rounds: usize,
    #[arg(long, default_value_t = 100)]
    pub base_length: u64,
    #[arg(long, value_enum, default_value_t = ModelMode::Known)]
    pub model: ModelMode,
    #[arg(long, default_value_t = 0)]
    pub explore_steps: u64,
    #[arg(long, default_value_t = 0.0)]
    pub reward_noise: f64,
    /// CSV path; the JSON summary goes next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Game file; a random game is generated when absent.
    #[arg(long)]
    pub game: Option<PathBuf>,
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 20)]
    pub count: usize,
    #[arg(long, default_value_t = 3)]
    pub max_agents: usize,
    #[arg(long, default_value_t = 3)]
    pub max_actions: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub generator: GeneratorArgs,
    #[arg(long)]
    pub out: PathBuf,
}

/// Failure classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::File { .. } => CliError::Runtime(e.to_string()),
            _ => CliError::Invalid(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => CliError::Invalid(e.to_string()),
            ExperimentError::Io(io) => io.into(),
            ExperimentError::Core(_) | ExperimentError::NoRounds => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn invalid(flag: &str, msg: &str) -> CliError {
    CliError::Invalid(format!("--{flag}: {msg}"))
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("threads", "must be at least 1"));
        }
        // a pool may already exist when called repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Solve(a) => cmd_solve(cli, a),
        Command::Simulate(a) => cmd_simulate(cli, a),
        Command::Experiment(a) => cmd_experiment(cli, a),
        Command::Analyze(a) => cmd_analyze(cli, a),
        Command::VerifyStationary(a) => cmd_verify(cli, a),
        Command::Generate(a) => cmd_generate(cli, a),
    }
}

fn say(cli: &Cli, msg: impl AsRef<str>) {
    if cli.verbose > 0 {
        eprintln!("{}", msg.as_ref());
    }
}

fn emit(out: Option<&PathBuf>, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    match out {
        Some(p) => Ok(io::write_text(p, &(text + "\n"))?),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn check_generator(g: &GeneratorArgs) -> Result<(), CliError> {
    if g.states == 0 {
        return Err(invalid("states", "must be at least 1"));
    }
    if g.agents == 0 {
        return Err(invalid("agents", "must be at least 1"));
    }
    if g.actions == 0 {
        return Err(invalid("actions", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&g.discount()) {
        return Err(invalid("gamma", "must lie in [0, 1)"));
    }
    Ok(())
}

fn generated_game(cli: &Cli, g: &GeneratorArgs) -> Result<MarkovGame, CliError> {
    check_generator(g)?;
    let cfg = GameGenConfig::uniform(g.states, g.agents, g.actions, g.discount(), cli.seed.unwrap_or(0));
    generate_random_game(&cfg).map_err(|e| CliError::Invalid(e.to_string()))
}

fn cmd_solve(cli: &Cli, a: &SolveArgs) -> Result<(), CliError> {
    if !(a.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    if !(a.tau > 0.0) || !a.tau.is_finite() {
        return Err(invalid("tau", "must be positive and finite"));
    }
    let game = io::load_game(&a.game)?;
    say(cli, format!("solving {} states x {} joint actions", game.n_states(), game.n_joint()));
    let sol = solve(&game, a.tol, a.max_iters, a.tau)?;
    let entries = game.n_states() * game.n_joint();
    let q_star = if entries > a.elide_above {
        Value::Null
    } else {
        json!((0..game.n_states()).map(|s| sol.q_star.row(s).to_vec()).collect::<Vec<_>>())
    };
    let doc = json!({
        "header": {
            "game": a.game,
            "tol": a.tol,
            "max_iters": a.max_iters,
            "tau": a.tau,
            "elide_above": a.elide_above,
            "discount": game.discount(),
        },
        "v_star": sol.v_star,
        "q_star": q_star,
        "q_star_elided": entries > a.elide_above,
        "residual": sol.residual,
        "iterations": sol.iterations,
    });
    emit(a.out.as_ref(), &doc)
}

fn cmd_simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CliError> {
    let seed = cli.seed.unwrap_or(0);
    let game = match &a.game {
        Some(p) => GameSource::Path(p.clone()),
        None => {
            check_generator(&a.generator)?;
            GameSource::Generate(GeneratorSpec {
                n_states: a.generator.states,
                action_counts: vec![a.generator.actions; a.generator.agents],
                discount: a.generator.discount(),
                transition_range: [0.2, 1.0],
                seed: Some(seed),
            })
        }
    };
    let cfg = ExperimentConfig {
        game,
        scheme: a.scheme,
        model: a.model,
        tau: a.tau,
        rounds: a.rounds,
        base_length: a.base_length,
        explore_steps: a.explore_steps,
        n_runs: 1,
        seed,
        output: a.out.clone(),
        summary: None,
        reward_noise: a.reward_noise,
        band_slack: 0.05,
        discount: a.game.as_ref().and(a.generator.gamma),
    };
    run_config(cli, &cfg)
}

fn cmd_experiment(cli: &Cli, a: &ExperimentArgs) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    run_config(cli, &cfg)
}

fn run_config(cli: &Cli, cfg: &ExperimentConfig) -> Result<(), CliError> {
    cfg.validate()?;
    say(
        cli,
        format!("{} run(s), {} rounds, seed {}", cfg.n_runs, cfg.rounds, cfg.seed),
    );
    let (_, summary) = experiment::run_experiment(cfg)?;
    say(
        cli,
        format!(
            "wrote {} and {}; {:.0}% of runs inside the band",
            cfg.output.display(),
            cfg.summary_path().display(),
            summary.fraction_in_band * 100.0
        ),
    );
    Ok(())
}

fn cmd_analyze(cli: &Cli, a: &AnalyzeArgs) -> Result<(), CliError> {
    let game = match &a.game {
        Some(p) => io::load_game(p)?,
        None => generated_game(cli, &a.generator)?,
    };
    let graph = build_state_graph(&game);
    let projection = match check_projection_with_cap(&game, ANALYZE_PROJECTION_CAP) {
        Ok(b) => Some(b),
        Err(CoreError::Size { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let doc = json!({
        "n_states": game.n_states(),
        "recurrent_classes": recurrent_classes(&graph),
        "transient_states": transient_states(&graph),
        "projection_check": projection,
    });
    emit(a.out.as_ref(), &doc)
}

fn cmd_verify(cli: &Cli, a: &VerifyArgs) -> Result<(), CliError> {
    if a.count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    if a.max_agents == 0 {
        return Err(invalid("max-agents", "must be at least 1"));
    }
    if a.max_actions == 0 {
        return Err(invalid("max-actions", "must be at least 1"));
    }
    let seed = cli.seed.unwrap_or(0);
    let mut rng = rng::seeded(seed);
    let mut cases = Vec::with_capacity(a.count);
    let mut max_gap: f64 = 0.0;
    for _ in 0..a.count {
        let n_agents = rng.random_range(1..=a.max_agents);
        let counts: Vec<usize> = (0..n_agents).map(|_| rng.random_range(1..=a.max_actions)).collect();
        let space = JointActionSpace::new(&counts)?;
        let tau = 10f64.powf(rng.random_range(-1.0..0.5));
        let row: Vec<f64> = (0..space.size()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let brute = stationary_brute_force(&transition_matrix(&row, &space, tau)?)?;
        let closed = stationary_closed_form(&row, tau)?;
        let gap = linalg::linf_distance(&brute, &closed);
        max_gap = max_gap.max(gap);
        cases.push(json!({ "action_counts": counts, "tau": tau, "linf_gap": gap }));
    }
    let doc = json!({
        "header": { "seed": seed, "count": a.count, "max_agents": a.max_agents, "max_actions": a.max_actions },
        "cases": cases,
        "max_linf_gap": max_gap,
    });
    emit(a.out.as_ref(), &doc)
}

fn cmd_generate(cli: &Cli, a: &GenerateArgs) -> Result<(), CliError> {
    let game = generated_game(cli, &a.generator)?;
    io::save_game(&game, &a.out)?;
    say(cli, format!("wrote {}", a.out.display()));
    Ok(())
}
