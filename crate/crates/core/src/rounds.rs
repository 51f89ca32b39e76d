//! Play-in-rounds engine.
//!
//! Within a round the Q-function is frozen and agents play the stage game of
//! every visited state with log-linear responses. At the end of the round
//! the value estimate is formed from the round's counts (empirical average
//! or most frequent profile) and the Q-function is rebuilt from it.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::game::{MarkovGame, QTable};
use crate::linalg;
use crate::logit::{self, DynamicsConfig, StagePlayState};
use crate::rng::SimRng;
use crate::solver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Growth {
    /// `base * n^2`
    #[default]
    Quadratic,
    /// `base * n`
    Linear,
    /// `base`
    Constant,
}

/// Round lengths. An optional leading round (e.g. a long exploration round)
/// precedes `total_rounds` rounds that follow the growth rule with indices
/// starting at 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundSchedule {
    pub base_length: u64,
    pub growth: Growth,
    pub initial_round: Option<u64>,
    pub total_rounds: usize,
}

impl RoundSchedule {
    pub fn quadratic(base_length: u64, total_rounds: usize) -> Self {
        Self {
            base_length,
            growth: Growth::Quadratic,
            initial_round: None,
            total_rounds,
        }
    }

    pub fn with_initial_round(mut self, length: u64) -> Self {
        self.initial_round = Some(length);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.base_length == 0 {
            return Err(CoreError::Config("base round length must be positive"));
        }
        if self.initial_round == Some(0) {
            return Err(CoreError::Config("initial round length must be positive"));
        }
        if self.total_rounds == 0 && self.initial_round.is_none() {
            return Err(CoreError::Config("schedule has no rounds"));
        }
        Ok(())
    }

    /// Length of the `n`-th growth round (1-based).
    pub fn growth_length(&self, n: u64) -> u64 {
        match self.growth {
            Growth::Quadratic => self.base_length * n * n,
            Growth::Linear => self.base_length * n,
            Growth::Constant => self.base_length,
        }
    }

    /// Every round length in play order, leading round first.
    pub fn lengths(&self) -> Vec<u64> {
        self.initial_round
            .into_iter()
            .chain((1..=self.total_rounds as u64).map(|n| self.growth_length(n)))
            .collect()
    }

    pub fn total_stages(&self) -> u64 {
        self.lengths().iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateScheme {
    /// Empirical average of the round's stage-game payoffs.
    #[default]
    Average,
    /// Payoff of the most frequently played profile, ties averaged.
    MostFrequent,
}

/// Estimates in force during one round plus the round's visit counters.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundEstimates {
    pub q: QTable,
    /// Value estimate produced by the most recent round (carried forward for
    /// states not visited).
    pub v: Vec<f64>,
    pub c_state: Vec<u64>,
    pub c_profile: Vec<u64>,
    pub round_index: usize,
}

impl RoundEstimates {
    pub fn new(q: QTable, v: Vec<f64>) -> Self {
        let n_states = q.n_states();
        let n_joint = q.n_joint();
        Self {
            q,
            v,
            c_state: vec![0; n_states],
            c_profile: vec![0; n_states * n_joint],
            round_index: 0,
        }
    }

    pub fn n_states(&self) -> usize {
        self.q.n_states()
    }

    pub fn n_joint(&self) -> usize {
        self.q.n_joint()
    }

    pub fn counts(&self, s: usize) -> &[u64] {
        let n = self.n_joint();
        &self.c_profile[s * n..(s + 1) * n]
    }

    pub fn reset_counts(&mut self) {
        self.c_state.iter_mut().for_each(|c| *c = 0);
        self.c_profile.iter_mut().for_each(|c| *c = 0);
    }

    #[inline]
    fn record(&mut self, s: usize, a: usize) {
        self.c_state[s] += 1;
        self.c_profile[s * self.q.n_joint() + a] += 1;
    }
}

/// Plays `length` stages from `s_init` with `estimates.q` held fixed,
/// counting every `(s, a)` and calling `on_stage(s, a, s')`. Returns the
/// state the round ends in.
#[allow(clippy::too_many_arguments)]
pub fn run_round<F>(
    game: &MarkovGame,
    estimates: &mut RoundEstimates,
    play: &mut StagePlayState,
    length: u64,
    s_init: usize,
    cfg: &DynamicsConfig,
    rng: &mut SimRng,
    mut on_stage: F,
) -> Result<usize>
where
    F: FnMut(usize, usize, usize, &mut SimRng),
{
    if length == 0 {
        return Err(CoreError::Config("round length must be at least 1"));
    }
    if s_init >= game.n_states() {
        return Err(CoreError::Index {
            what: "state",
            index: s_init,
            limit: game.n_states(),
        });
    }
    if estimates.q.n_states() != game.n_states() || estimates.q.n_joint() != game.n_joint() {
        return Err(CoreError::Shape {
            what: "round estimates",
            expected: game.n_states() * game.n_joint(),
            actual: estimates.q.n_states() * estimates.q.n_joint(),
        });
    }
    let mut buf = vec![0.0; game.action_counts().iter().copied().max().unwrap_or(1)];
    let mut s = s_init;
    for _ in 0..length {
        let a = logit::step_unchecked(estimates.q.row(s), s, play, cfg, rng, &mut buf);
        estimates.record(s, a);
        let next = game.sample_next_unchecked(s, a, rng);
        on_stage(s, a, next, rng);
        s = next;
    }
    Ok(s)
}

/// Empirical-average value estimate; unvisited states keep `previous`.
pub fn v_average(estimates: &RoundEstimates, previous: &[f64]) -> Vec<f64> {
    (0..estimates.n_states())
        .map(|s| {
            let visits = estimates.c_state[s];
            if visits == 0 {
                return previous[s];
            }
            let total: f64 = estimates
                .counts(s)
                .iter()
                .zip(estimates.q.row(s))
                .map(|(&c, &q)| c as f64 * q)
                .sum();
            total / visits as f64
        })
        .collect()
}

/// Most-frequent-profile value estimate (ties averaged); unvisited states
/// keep `previous`.
pub fn v_most_frequent(estimates: &RoundEstimates, previous: &[f64]) -> Vec<f64> {
    (0..estimates.n_states())
        .map(|s| {
            if estimates.c_state[s] == 0 {
                return previous[s];
            }
            let counts = estimates.counts(s);
            let top = counts.iter().copied().max().unwrap_or(0);
            let (sum, n) = counts
                .iter()
                .zip(estimates.q.row(s))
                .filter(|(&c, _)| c == top)
                .fold((0.0, 0usize), |(acc, n), (_, &q)| (acc + q, n + 1));
            sum / n as f64
        })
        .collect()
}

pub fn value_update(scheme: UpdateScheme, estimates: &RoundEstimates, previous: &[f64]) -> Vec<f64> {
    match scheme {
        UpdateScheme::Average => v_average(estimates, previous),
        UpdateScheme::MostFrequent => v_most_frequent(estimates, previous),
    }
}

/// `Q(s,a) = r(s,a) + gamma * sum_s' p(s'|s,a) v(s')`.
pub fn q_update(game: &MarkovGame, v: &[f64]) -> Result<QTable> {
    if v.len() != game.n_states() {
        return Err(CoreError::Shape {
            what: "value vector",
            expected: game.n_states(),
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Numeric("non-finite value estimate"));
    }
    Ok(solver::backup_from_values(game, v))
}

/// Per-state sampled profile frequencies; `None` for unvisited states.
pub fn sampled_frequency(estimates: &RoundEstimates) -> Vec<Option<Vec<f64>>> {
    (0..estimates.n_states())
        .map(|s| {
            let visits = estimates.c_state[s];
            (visits > 0).then(|| {
                estimates
                    .counts(s)
                    .iter()
                    .map(|&c| c as f64 / visits as f64)
                    .collect()
            })
        })
        .collect()
}

/// What hooks see at the end of each round, after the value update and
/// before the Q-function is rebuilt.
#[derive(Debug)]
pub struct RoundSnapshot<'a> {
    /// 1-based position in the schedule (a leading round counts as round 1).
    pub round_index: usize,
    pub length: u64,
    /// Stages played so far, this round included.
    pub stage_count: u64,
    pub tau: f64,
    /// Q-function, value estimate and counters of the round.
    pub estimates: &'a RoundEstimates,
    pub summary: &'a RoundSummary,
}

/// Receives per-round snapshots and, optionally, every stage.
pub trait RoundHook {
    fn on_round(&mut self, snapshot: &RoundSnapshot<'_>);

    #[inline]
    fn on_stage(&mut self, _s: usize, _a: usize, _next: usize) {}
}

impl<F: FnMut(&RoundSnapshot<'_>)> RoundHook for F {
    fn on_round(&mut self, snapshot: &RoundSnapshot<'_>) {
        self(snapshot)
    }
}

/// Hook that ignores everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoHook;

impl RoundHook for NoHook {
    fn on_round(&mut self, _snapshot: &RoundSnapshot<'_>) {}
}

/// Per-round record kept in a [`RunOutcome`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSummary {
    pub round_index: usize,
    pub length: u64,
    pub stage_count: u64,
    pub v: Vec<f64>,
    /// `v(s) - max_a Q(s,a)` for the round's Q-function.
    pub tracking_error: Vec<f64>,
    /// TV distance between sampled frequencies and `softmax(Q(s,.)/tau)`;
    /// `None` for states not visited in the round.
    pub eta_tv_gap: Vec<Option<f64>>,
    pub visits: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub rounds: Vec<RoundSummary>,
    /// Q-function after the last update (the one the next round would use).
    pub final_q: QTable,
    pub final_v: Vec<f64>,
    pub final_state: usize,
    pub total_stages: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub scheme: UpdateScheme,
    pub dynamics: DynamicsConfig,
    /// Starting state; drawn uniformly when `None`.
    pub initial_state: Option<usize>,
}

impl RunConfig {
    pub fn new(scheme: UpdateScheme, tau: f64) -> Result<Self> {
        Ok(Self {
            scheme,
            dynamics: DynamicsConfig::new(tau)?,
            initial_state: None,
        })
    }
}

/// Source of the Q-function between rounds and consumer of stage
/// observations.
pub(crate) trait QLearner {
    fn observe(&mut self, s: usize, a: usize, next: usize, rng: &mut SimRng);
    fn next_q(&mut self, v: &[f64]) -> Result<QTable>;
}

struct KnownModel<'g> {
    game: &'g MarkovGame,
}

impl QLearner for KnownModel<'_> {
    #[inline]
    fn observe(&mut self, _s: usize, _a: usize, _next: usize, _rng: &mut SimRng) {}

    fn next_q(&mut self, v: &[f64]) -> Result<QTable> {
        q_update(self.game, v)
    }
}

/// Known-model dynamics: `Q_1 = r`, then alternate rounds of play with
/// value and Q-function updates.
pub fn run_dynamics<H: RoundHook>(
    game: &MarkovGame,
    schedule: &RoundSchedule,
    cfg: &RunConfig,
    rng: &mut SimRng,
    hook: &mut H,
) -> Result<RunOutcome> {
    let q = game.reward_table();
    let v0 = q.row_max();
    drive(game, schedule, cfg, rng, hook, q, v0, &mut KnownModel { game })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn drive<H: RoundHook, L: QLearner>(
    game: &MarkovGame,
    schedule: &RoundSchedule,
    cfg: &RunConfig,
    rng: &mut SimRng,
    hook: &mut H,
    q1: QTable,
    v0: Vec<f64>,
    learner: &mut L,
) -> Result<RunOutcome> {
    schedule.validate()?;
    let tau = cfg.dynamics.tau;
    let mut state = match cfg.initial_state {
        Some(s) if s < game.n_states() => s,
        Some(s) => {
            return Err(CoreError::Index {
                what: "state",
                index: s,
                limit: game.n_states(),
            })
        }
        None => rng.random_range(0..game.n_states()),
    };
    let mut play = StagePlayState::new(game.n_states(), game.space().clone());
    let mut est = RoundEstimates::new(q1, v0);
    let mut rounds = Vec::new();
    let mut stage_count = 0u64;

    for (k, &length) in schedule.lengths().iter().enumerate() {
        est.round_index = k + 1;
        est.reset_counts();
        state = run_round(game, &mut est, &mut play, length, state, &cfg.dynamics, rng, |s, a, next, r| {
            learner.observe(s, a, next, r);
            hook.on_stage(s, a, next);
        })?;
        stage_count += length;

        let v = value_update(cfg.scheme, &est, &est.v);
        est.v = v;
        let summary = summarize_round(&est, length, stage_count, tau)?;
        hook.on_round(&RoundSnapshot {
            round_index: k + 1,
            length,
            stage_count,
            tau,
            estimates: &est,
            summary: &summary,
        });
        rounds.push(summary);
        est.q = learner.next_q(&est.v)?;
    }

    Ok(RunOutcome {
        rounds,
        final_q: est.q,
        final_v: est.v,
        final_state: state,
        total_stages: stage_count,
    })
}

fn summarize_round(est: &RoundEstimates, length: u64, stage_count: u64, tau: f64) -> Result<RoundSummary> {
    let row_max = est.q.row_max();
    let tracking_error = est.v.iter().zip(&row_max).map(|(v, m)| v - m).collect();
    let eta = sampled_frequency(est);
    let mut eta_tv_gap = Vec::with_capacity(est.n_states());
    for (s, freq) in eta.iter().enumerate() {
        eta_tv_gap.push(match freq {
            Some(f) => {
                let mu = solver::logit_distribution(est.q.row(s), tau)?;
                Some(linalg::tv_distance(f, &mu))
            }
            None => None,
        });
    }
    Ok(RoundSummary {
        round_index: est.round_index,
        length,
        stage_count,
        v: est.v.clone(),
        tracking_error,
        eta_tv_gap,
        visits: est.c_state.clone(),
    })
}
