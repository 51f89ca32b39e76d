//! Log-linear play of a stage game and the Markov chain it induces.
//!
//! At each visit of a state one agent, picked uniformly, soft-max responds
//! to the others' latest actions at that state while everyone else repeats
//! their latest action. With the Q-function held fixed the sequence of
//! profiles played at a state is a homogeneous chain whose stationary law is
//! `softmax(Q(s, .) / tau)` over joint actions.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::game::{sample_index, JointActionSpace, QTable};
use crate::linalg::{self, SquareMatrix};
use crate::rng::SimRng;
use crate::solver::logit_distribution;

/// Default cap on the number of joint actions for [`transition_matrix`].
pub const TRANSITION_MATRIX_CAP: usize = 4096;

/// How agents act the first time a state's stage game is played.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FirstVisit {
    /// Uniformly random joint profile.
    #[default]
    Uniform,
    /// A fixed joint profile (flat index).
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsConfig {
    pub tau: f64,
    pub first_visit: FirstVisit,
}

impl DynamicsConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(CoreError::Config("temperature must be positive and finite"));
        }
        Ok(Self {
            tau,
            first_visit: FirstVisit::Uniform,
        })
    }
}

/// Latest joint profile played at every state.
///
/// Persists across rounds; only the first visit of a state draws a fresh
/// profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePlayState {
    space: JointActionSpace,
    alpha: Vec<usize>,
    initialized: Vec<bool>,
}

impl StagePlayState {
    pub fn new(n_states: usize, space: JointActionSpace) -> Self {
        Self {
            space,
            alpha: vec![0; n_states],
            initialized: vec![false; n_states],
        }
    }

    pub fn space(&self) -> &JointActionSpace {
        &self.space
    }

    pub fn is_initialized(&self, s: usize) -> bool {
        self.initialized[s]
    }

    /// Latest profile at `s` as a flat joint-action index.
    pub fn profile(&self, s: usize) -> Option<usize> {
        self.initialized[s].then(|| self.alpha[s])
    }

    /// Latest per-agent actions at `s`.
    pub fn alpha(&self, s: usize) -> Option<Vec<usize>> {
        self.profile(s)
            .map(|flat| (0..self.space.n_agents()).map(|i| self.space.component(flat, i)).collect())
    }

    pub fn set_profile(&mut self, s: usize, flat: usize) -> Result<()> {
        if flat >= self.space.size() {
            return Err(CoreError::Index {
                what: "joint action",
                index: flat,
                limit: self.space.size(),
            });
        }
        self.alpha[s] = flat;
        self.initialized[s] = true;
        Ok(())
    }
}

/// Agent `agent`'s logit response at state `s` to the others' latest
/// actions: `pi(x) ~ exp(Q(s, x, alpha^-i(s)) / tau)`.
pub fn logit_response(
    q: &QTable,
    s: usize,
    agent: usize,
    play: &StagePlayState,
    tau: f64,
) -> Result<Vec<f64>> {
    let space = play.space();
    if agent >= space.n_agents() {
        return Err(CoreError::Index {
            what: "agent",
            index: agent,
            limit: space.n_agents(),
        });
    }
    let profile = play.profile(s).ok_or(CoreError::UninitializedState(s))?;
    let mut out = vec![0.0; space.counts()[agent]];
    response_into(q.row(s), space, profile, agent, tau, &mut out);
    Ok(out)
}

/// Logit response of `agent` to `profile` on one Q row, written to `out`.
#[inline]
pub(crate) fn response_into(
    row: &[f64],
    space: &JointActionSpace,
    profile: usize,
    agent: usize,
    tau: f64,
    out: &mut [f64],
) {
    let stride = space.stride(agent);
    let base = profile - space.component(profile, agent) * stride;
    for (x, o) in out.iter_mut().enumerate() {
        *o = row[base + x * stride];
    }
    linalg::softmax_in_place(out, tau);
}

/// One play of the stage game at `s`; returns the played joint profile.
pub fn step_stage_game(
    q: &QTable,
    s: usize,
    play: &mut StagePlayState,
    cfg: &DynamicsConfig,
    rng: &mut SimRng,
) -> Result<usize> {
    if s >= q.n_states() {
        return Err(CoreError::Index {
            what: "state",
            index: s,
            limit: q.n_states(),
        });
    }
    let mut buf = vec![0.0; play.space().counts().iter().copied().max().unwrap_or(1)];
    Ok(step_unchecked(q.row(s), s, play, cfg, rng, &mut buf))
}

/// Like [`step_stage_game`] but with the updating agent chosen by the caller.
/// On a first visit the agent choice is irrelevant.
pub fn step_stage_game_with_agent(
    q: &QTable,
    s: usize,
    play: &mut StagePlayState,
    agent: usize,
    cfg: &DynamicsConfig,
    rng: &mut SimRng,
) -> Result<usize> {
    if agent >= play.space().n_agents() {
        return Err(CoreError::Index {
            what: "agent",
            index: agent,
            limit: play.space().n_agents(),
        });
    }
    if !play.is_initialized(s) {
        return Ok(first_visit(s, play, cfg, rng));
    }
    let mut buf = vec![0.0; play.space().counts()[agent]];
    Ok(update_agent(q.row(s), s, play, agent, cfg.tau, rng, &mut buf))
}

#[inline]
pub(crate) fn step_unchecked(
    row: &[f64],
    s: usize,
    play: &mut StagePlayState,
    cfg: &DynamicsConfig,
    rng: &mut SimRng,
    buf: &mut [f64],
) -> usize {
    if !play.initialized[s] {
        return first_visit(s, play, cfg, rng);
    }
    let agent = rng.random_range(0..play.space.n_agents());
    update_agent(row, s, play, agent, cfg.tau, rng, buf)
}

fn first_visit(s: usize, play: &mut StagePlayState, cfg: &DynamicsConfig, rng: &mut SimRng) -> usize {
    let profile = match cfg.first_visit {
        FirstVisit::Uniform => rng.random_range(0..play.space.size()),
        FirstVisit::Fixed(p) => p.min(play.space.size() - 1),
    };
    play.alpha[s] = profile;
    play.initialized[s] = true;
    profile
}

#[inline]
fn update_agent(
    row: &[f64],
    s: usize,
    play: &mut StagePlayState,
    agent: usize,
    tau: f64,
    rng: &mut SimRng,
    buf: &mut [f64],
) -> usize {
    let n_actions = play.space.counts()[agent];
    let probs = &mut buf[..n_actions];
    let current = play.alpha[s];
    response_into(row, &play.space, current, agent, tau, probs);
    let u: f64 = rng.random();
    let choice = sample_index(probs, u);
    let next = play.space.with_component(current, agent, choice);
    play.alpha[s] = next;
    next
}

/// Transition matrix of the profile chain on one Q row:
/// `P(a -> b) = sum_i [b^-i = a^-i] (1/n) pi^i(b^i | a^-i)`.
pub fn transition_matrix(row: &[f64], space: &JointActionSpace, tau: f64) -> Result<SquareMatrix> {
    transition_matrix_with_cap(row, space, tau, TRANSITION_MATRIX_CAP)
}

pub fn transition_matrix_with_cap(
    row: &[f64],
    space: &JointActionSpace,
    tau: f64,
    cap: usize,
) -> Result<SquareMatrix> {
    let n = space.size();
    if n > cap {
        return Err(CoreError::Size {
            what: "profile transition matrix",
            size: n,
            cap,
        });
    }
    if row.len() != n {
        return Err(CoreError::Shape {
            what: "Q row",
            expected: n,
            actual: row.len(),
        });
    }
    if !(tau > 0.0) {
        return Err(CoreError::Config("temperature must be positive"));
    }
    let n_agents = space.n_agents();
    let weight = 1.0 / n_agents as f64;
    let mut p = SquareMatrix::zeros(n);
    let mut buf = vec![0.0; space.counts().iter().copied().max().unwrap_or(1)];
    for a in 0..n {
        for i in 0..n_agents {
            let probs = &mut buf[..space.counts()[i]];
            response_into(row, space, a, i, tau, probs);
            for (x, pr) in probs.iter().enumerate() {
                p.add_to(a, space.with_component(a, i, x), weight * pr);
            }
        }
    }
    Ok(p)
}

/// Closed-form stationary law of the profile chain: `softmax(row / tau)`.
pub fn stationary_closed_form(row: &[f64], tau: f64) -> Result<Vec<f64>> {
    logit_distribution(row, tau)
}

/// Stationary law of a row-stochastic matrix by direct linear solve.
pub fn stationary_brute_force(p: &SquareMatrix) -> Result<Vec<f64>> {
    linalg::stationary_distribution(p)
}
