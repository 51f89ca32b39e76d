//! Multi-run experiments: one oracle solve, `n_runs` independently seeded
//! runs in parallel, long-format CSV plus a JSON summary.
//!
//! Run `r` draws from ChaCha8 seeded with the master seed on stream `r`
//! (see [`logitq_core::rng::split`]); results are joined in run order, so
//! outputs do not depend on the thread count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use logitq_core::diagnostics::{theorem1_band, Band};
use logitq_core::graph::{build_state_graph, recurrent_classes};
use logitq_core::model::{run_dynamics_model_free, ModelEstimates};
use logitq_core::rounds::{
    run_dynamics, RoundSchedule, RoundSnapshot, RoundSummary, RunConfig, UpdateScheme,
};
use logitq_core::solver::{solve, ExactSolution};
use logitq_core::{generate_random_game, rng, CoreError, GameGenConfig, MarkovGame, QTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::io::{self, IoError};

/// Value-iteration tolerance of the oracle solve.
pub const ORACLE_TOL: f64 = 1e-12;
pub const ORACLE_MAX_ITERS: usize = 1_000_000;

pub const CSV_HEADER: &str =
    "run,round,stage_count,state,v,delta_v,tracking_error,eta_tv_gap,band_lower,band_upper,v_star";

pub const SEED_RULE: &str =
    "run r uses ChaCha8 seeded with the master seed (seed_from_u64) on stream r; generated games use the generator seed, or the master seed when absent";

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("simulation failed: {0}")]
    Core(#[from] CoreError),
    #[error("no rounds")]
    NoRounds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Empirical average of stage payoffs.
    Ave,
    /// Payoff of the most frequent profile.
    Freq,
}

impl From<Scheme> for UpdateScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::Ave => UpdateScheme::Average,
            Scheme::Freq => UpdateScheme::MostFrequent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelMode {
    /// Payoffs and transitions are known to the agents.
    #[default]
    Known,
    /// Payoffs and transitions are estimated from observations.
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub n_states: usize,
    pub action_counts: Vec<usize>,
    pub discount: f64,
    #[serde(default = "default_range")]
    pub transition_range: [f64; 2],
    /// Defaults to the master seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn default_range() -> [f64; 2] {
    [0.2, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSource {
    Generate(GeneratorSpec),
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSource,
    pub scheme: Scheme,
    #[serde(default)]
    pub model: ModelMode,
    pub tau: f64,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    #[serde(default = "default_base_length")]
    pub base_length: u64,
    /// Length of a leading round played before the growth schedule; 0 for none.
    #[serde(default)]
    pub explore_steps: u64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    pub seed: u64,
    /// CSV path.
    pub output: PathBuf,
    /// JSON summary path; defaults to `output` with a `.json` extension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
    /// Half-width of the uniform noise added to realized rewards (learned model).
    #[serde(default)]
    pub reward_noise: f64,
    /// Tolerance around the band when counting runs inside it.
    #[serde(default = "default_slack")]
    pub band_slack: f64,
    /// Overrides the discount of a game loaded from a file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
}

fn default_rounds() -> usize {
    40
}
fn default_base_length() -> u64 {
    100
}
fn default_runs() -> usize {
    20
}
fn default_slack() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_json(&io::read_text(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Config(m.to_string()));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1");
        }
        if self.base_length == 0 {
            return bad("base_length must be positive");
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad("tau must be positive and finite");
        }
        if !(self.reward_noise >= 0.0) || !self.reward_noise.is_finite() {
            return bad("reward_noise must be finite and non-negative");
        }
        if !(self.band_slack >= 0.0) || !self.band_slack.is_finite() {
            return bad("band_slack must be finite and non-negative");
        }
        if self.reward_noise > 0.0 && self.model == ModelMode::Known {
            return bad("reward_noise requires model = learned");
        }
        if let Some(g) = self.discount {
            if !(0.0..1.0).contains(&g) {
                return bad("discount must lie in [0, 1)");
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> RoundSchedule {
        let s = RoundSchedule::quadratic(self.base_length, self.rounds);
        if self.explore_steps > 0 {
            s.with_initial_round(self.explore_steps)
        } else {
            s
        }
    }

    pub fn summary_path(&self) -> PathBuf {
        self.summary
            .clone()
            .unwrap_or_else(|| self.output.with_extension("json"))
    }

    pub fn build_game(&self) -> Result<MarkovGame, ExperimentError> {
        let game = match &self.game {
            GameSource::Generate(g) => generate_random_game(&GameGenConfig {
                n_states: g.n_states,
                action_counts: g.action_counts.clone(),
                discount: g.discount,
                transition_range: (g.transition_range[0], g.transition_range[1]),
                seed: g.seed.unwrap_or(self.seed),
            })
            .map_err(|e| ExperimentError::Config(format!("game generator: {e}")))?,
            GameSource::Path(p) => io::load_game(p)?,
        };
        match self.discount {
            Some(g) => Ok(game.with_discount(g)?),
            None => Ok(game),
        }
    }
}

/// One seeded run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub rounds: Vec<RoundSummary>,
    /// Q-function after the last update.
    pub final_q: QTable,
    /// Elapsed time at the end of each round.
    pub round_clock: Vec<Duration>,
    pub wall_clock: Duration,
    /// Model estimates (learned model only).
    pub model: Option<ModelEstimates>,
}

#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub config: ExperimentConfig,
    pub game: MarkovGame,
    pub exact: ExactSolution,
    pub recurrent_states: Vec<usize>,
    pub band: Band,
    pub runs: Vec<RunRecord>,
    pub runtime: Duration,
}

/// Solves the game once, then executes every run. Writes nothing.
pub fn simulate(cfg: &ExperimentConfig) -> Result<ExperimentBundle, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let game = cfg.build_game()?;
    simulate_game(cfg, game, start)
}

fn simulate_game(cfg: &ExperimentConfig, game: MarkovGame, start: Instant) -> Result<ExperimentBundle, ExperimentError> {
    let exact = solve(&game, ORACLE_TOL, ORACLE_MAX_ITERS, cfg.tau)?;
    let mut recurrent_states: Vec<usize> = recurrent_classes(&build_state_graph(&game))
        .into_iter()
        .flatten()
        .collect();
    recurrent_states.sort_unstable();
    let band = theorem1_band(cfg.tau, game.discount(), game.n_joint());
    let schedule = cfg.schedule();
    let run_cfg = RunConfig::new(cfg.scheme.into(), cfg.tau)?;

    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| run_one(&game, &schedule, &run_cfg, cfg, r))
        .collect::<Result<Vec<_>, CoreError>>()?;

    Ok(ExperimentBundle {
        config: cfg.clone(),
        game,
        exact,
        recurrent_states,
        band,
        runs,
        runtime: start.elapsed(),
    })
}

fn run_one(
    game: &MarkovGame,
    schedule: &RoundSchedule,
    run_cfg: &RunConfig,
    cfg: &ExperimentConfig,
    run: usize,
) -> Result<RunRecord, CoreError> {
    let mut rng = rng::split(cfg.seed, run as u64);
    let start = Instant::now();
    let mut round_clock = Vec::with_capacity(schedule.lengths().len());
    let mut hook = |_: &RoundSnapshot<'_>| round_clock.push(start.elapsed());
    let (outcome, model) = match cfg.model {
        ModelMode::Known => (run_dynamics(game, schedule, run_cfg, &mut rng, &mut hook)?, None),
        ModelMode::Learned => {
            let (o, m) = run_dynamics_model_free(game, schedule, run_cfg, cfg.reward_noise, &mut rng, &mut hook)?;
            (o, Some(m))
        }
    };
    Ok(RunRecord {
        run,
        rounds: outcome.rounds,
        final_q: outcome.final_q,
        round_clock,
        wall_clock: start.elapsed(),
        model,
    })
}

/// Writes the long-format CSV: one row per (run, round, state).
pub fn write_csv(bundle: &ExperimentBundle, out: &mut String) {
    out.push_str(CSV_HEADER);
    out.push('\n');
    let v_star = &bundle.exact.v_star;
    for rec in &bundle.runs {
        for round in &rec.rounds {
            for (s, &v) in round.v.iter().enumerate() {
                let eta = round.eta_tv_gap[s].map(|x| x.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    rec.run,
                    round.round_index,
                    round.stage_count,
                    s,
                    v,
                    v - v_star[s],
                    round.tracking_error[s],
                    eta,
                    v_star[s] + bundle.band.0,
                    v_star[s] + bundle.band.1,
                    v_star[s],
                );
            }
        }
    }
}

pub fn csv_string(bundle: &ExperimentBundle) -> String {
    let mut out = String::new();
    write_csv(bundle, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: ExperimentConfig,
    pub seed_rule: &'static str,
    pub n_states: usize,
    pub action_counts: Vec<usize>,
    pub joint_action_count: usize,
    pub discount: f64,
    pub oracle_tol: f64,
    pub oracle_residual: f64,
    pub oracle_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub round: usize,
    pub stage_count: u64,
    pub state: usize,
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub header: SummaryHeader,
    pub n_runs: usize,
    pub rounds: usize,
    /// Stages per run.
    pub total_stages: u64,
    pub runtime_secs: f64,
    pub recurrent_states: Vec<usize>,
    pub v_star: Vec<f64>,
    pub theorem1_band: Band,
    /// `max_s |v(s) - v*(s)|` over recurrent states after the last round, per run.
    pub final_sup_delta_v: Vec<f64>,
    pub runs_in_band: usize,
    /// Share of runs whose final `v(s)` lies in
    /// `[v*(s) + band_lower - slack, v*(s) + slack]` at every recurrent state.
    pub fraction_in_band: f64,
    pub aggregates: Vec<AggregateRow>,
}

pub fn summarize(bundle: &ExperimentBundle) -> Result<Summary, ExperimentError> {
    let n_rounds = bundle.runs.first().map_or(0, |r| r.rounds.len());
    if n_rounds == 0 || bundle.runs.iter().any(|r| r.rounds.len() != n_rounds) {
        return Err(ExperimentError::NoRounds);
    }
    let cfg = &bundle.config;
    let v_star = &bundle.exact.v_star;
    let slack = cfg.band_slack;

    let mut final_sup = Vec::with_capacity(bundle.runs.len());
    let mut in_band = 0;
    for rec in &bundle.runs {
        let v = &rec.rounds[n_rounds - 1].v;
        let sup = bundle
            .recurrent_states
            .iter()
            .map(|&s| (v[s] - v_star[s]).abs())
            .fold(0.0, f64::max);
        final_sup.push(sup);
        let inside = bundle.recurrent_states.iter().all(|&s| {
            let d = v[s] - v_star[s];
            d >= bundle.band.0 - slack && d <= bundle.band.1 + slack
        });
        in_band += usize::from(inside);
    }

    let n_states = bundle.game.n_states();
    let mut aggregates = Vec::with_capacity(n_rounds * n_states);
    for k in 0..n_rounds {
        for s in 0..n_states {
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for rec in &bundle.runs {
                let x = rec.rounds[k].v[s];
                lo = lo.min(x);
                hi = hi.max(x);
                sum += x;
            }
            // the mean of equal values can round outside [lo, hi]
            let mean = (sum / bundle.runs.len() as f64).clamp(lo, hi);
            aggregates.push(AggregateRow {
                round: bundle.runs[0].rounds[k].round_index,
                stage_count: bundle.runs[0].rounds[k].stage_count,
                state: s,
                min: lo,
                mean,
                max: hi,
            });
        }
    }

    Ok(Summary {
        header: SummaryHeader {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: cfg.clone(),
            seed_rule: SEED_RULE,
            n_states,
            action_counts: bundle.game.action_counts().to_vec(),
            joint_action_count: bundle.game.n_joint(),
            discount: bundle.game.discount(),
            oracle_tol: ORACLE_TOL,
            oracle_residual: bundle.exact.residual,
            oracle_iterations: bundle.exact.iterations,
        },
        n_runs: bundle.runs.len(),
        rounds: n_rounds,
        total_stages: bundle.runs[0].rounds[n_rounds - 1].stage_count,
        runtime_secs: bundle.runtime.as_secs_f64(),
        recurrent_states: bundle.recurrent_states.clone(),
        v_star: v_star.clone(),
        theorem1_band: bundle.band,
        final_sup_delta_v: final_sup,
        runs_in_band: in_band,
        fraction_in_band: in_band as f64 / bundle.runs.len() as f64,
        aggregates,
    })
}

/// Writes the CSV and the JSON summary to the configured paths.
pub fn write_outputs(bundle: &ExperimentBundle) -> Result<Summary, ExperimentError> {
    let summary = summarize(bundle)?;
    io::write_text(&bundle.config.output, &csv_string(bundle))?;
    let json = serde_json::to_string_pretty(&summary).expect("summaries always serialize");
    io::write_text(&bundle.config.summary_path(), &json)?;
    Ok(summary)
}

/// [`simulate`] followed by [`write_outputs`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<(ExperimentBundle, Summary), ExperimentError> {
    let bundle = simulate(cfg)?;
    let summary = write_outputs(&bundle)?;
    Ok((bundle, summary))
}

/// Like [`simulate`] for an already built game.
pub fn simulate_with_game(cfg: &ExperimentConfig, game: MarkovGame) -> Result<ExperimentBundle, ExperimentError> {
    cfg.validate()?;
    simulate_game(cfg, game, Instant::now())
}
