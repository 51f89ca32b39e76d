//! Model-free variant: stage payoffs and transition probabilities are
//! estimated from every observation since the first stage and replace the
//! true model in the Q-function update.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};

use crate::error::{CoreError, Result};
use crate::game::{MarkovGame, QTable};
use crate::rng::SimRng;
use crate::rounds::{drive, QLearner, RoundHook, RoundSchedule, RunConfig, RunOutcome};

/// Running sums for `r^(s,a)` and `p^(s'|s,a)`. Never reset between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEstimates {
    n_states: usize,
    n_joint: usize,
    reward_sum: Vec<f64>,
    visit_count: Vec<u64>,
    transition_count: Vec<u64>,
}

impl ModelEstimates {
    pub fn new(n_states: usize, n_joint: usize) -> Self {
        Self {
            n_states,
            n_joint,
            reward_sum: vec![0.0; n_states * n_joint],
            visit_count: vec![0; n_states * n_joint],
            transition_count: vec![0; n_states * n_joint * n_states],
        }
    }

    pub fn for_game(game: &MarkovGame) -> Self {
        Self::new(game.n_states(), game.n_joint())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_joint(&self) -> usize {
        self.n_joint
    }

    pub fn observe(&mut self, s: usize, a: usize, reward: f64, next: usize) -> Result<()> {
        if !reward.is_finite() {
            return Err(CoreError::Numeric("non-finite realized reward"));
        }
        if s >= self.n_states || next >= self.n_states {
            return Err(CoreError::Index {
                what: "state",
                index: s.max(next),
                limit: self.n_states,
            });
        }
        if a >= self.n_joint {
            return Err(CoreError::Index {
                what: "joint action",
                index: a,
                limit: self.n_joint,
            });
        }
        self.record(s, a, reward, next);
        Ok(())
    }

    #[inline]
    fn record(&mut self, s: usize, a: usize, reward: f64, next: usize) {
        let pair = s * self.n_joint + a;
        self.visit_count[pair] += 1;
        self.reward_sum[pair] += reward;
        self.transition_count[pair * self.n_states + next] += 1;
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.visit_count[s * self.n_joint + a]
    }

    pub fn transition_counts(&self, s: usize, a: usize) -> &[u64] {
        let base = (s * self.n_joint + a) * self.n_states;
        &self.transition_count[base..base + self.n_states]
    }

    /// `r^(s,a)`, or `None` before the first visit.
    pub fn reward_estimate(&self, s: usize, a: usize) -> Option<f64> {
        let c = self.visits(s, a);
        (c > 0).then(|| self.reward_sum[s * self.n_joint + a] / c as f64)
    }

    /// `p^(.|s,a)`, or `None` before the first visit.
    pub fn transition_estimate(&self, s: usize, a: usize) -> Option<Vec<f64>> {
        let c = self.visits(s, a);
        (c > 0).then(|| {
            self.transition_counts(s, a)
                .iter()
                .map(|&k| k as f64 / c as f64)
                .collect()
        })
    }
}

/// `Q(s,a) = r^(s,a) + gamma * sum_s' p^(s'|s,a) v(s')`; unvisited pairs use
/// `r^ = 0` and a uniform `p^`.
pub fn estimated_q_update(est: &ModelEstimates, v: &[f64], gamma: f64) -> Result<QTable> {
    if v.len() != est.n_states {
        return Err(CoreError::Shape {
            what: "value vector",
            expected: est.n_states,
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Numeric("non-finite value estimate"));
    }
    let uniform_cont = v.iter().sum::<f64>() / est.n_states as f64;
    let mut q = QTable::zeros(est.n_states, est.n_joint);
    for s in 0..est.n_states {
        for a in 0..est.n_joint {
            let c = est.visits(s, a);
            let value = if c == 0 {
                gamma * uniform_cont
            } else {
                let cont: f64 = est
                    .transition_counts(s, a)
                    .iter()
                    .zip(v)
                    .map(|(&k, x)| k as f64 * x)
                    .sum::<f64>()
                    / c as f64;
                est.reward_sum[s * est.n_joint + a] / c as f64 + gamma * cont
            };
            q.set(s, a, value);
        }
    }
    Ok(q)
}

struct LearnedModel<'g> {
    game: &'g MarkovGame,
    est: ModelEstimates,
    reward_noise: f64,
    noise_rng: SimRng,
}

impl QLearner for LearnedModel<'_> {
    #[inline]
    fn observe(&mut self, s: usize, a: usize, next: usize, _rng: &mut SimRng) {
        let mut r = self.game.reward(s, a);
        if self.reward_noise > 0.0 {
            r += self.noise_rng.random_range(-self.reward_noise..=self.reward_noise);
        }
        self.est.record(s, a, r, next);
    }

    fn next_q(&mut self, v: &[f64]) -> Result<QTable> {
        estimated_q_update(&self.est, v, self.game.discount())
    }
}

/// Model-free dynamics. `Q_1 = 0`; every stage feeds `(s, a, r, s')` into
/// [`ModelEstimates`], whose estimates replace `r` and `p` in the Q-function
/// update. Realized rewards are `r(s,a)` plus uniform noise on
/// `[-reward_noise, reward_noise]`, drawn from a stream split off `rng`.
pub fn run_dynamics_model_free<H: RoundHook>(
    game: &MarkovGame,
    schedule: &RoundSchedule,
    cfg: &RunConfig,
    reward_noise: f64,
    rng: &mut SimRng,
    hook: &mut H,
) -> Result<(RunOutcome, ModelEstimates)> {
    if !(reward_noise >= 0.0) || !reward_noise.is_finite() {
        return Err(CoreError::Config("reward noise must be finite and non-negative"));
    }
    let noise_rng = SimRng::seed_from_u64(rng.random());
    let mut learner = LearnedModel {
        game,
        est: ModelEstimates::for_game(game),
        reward_noise,
        noise_rng,
    };
    let q1 = QTable::zeros(game.n_states(), game.n_joint());
    let v0 = vec![0.0; game.n_states()];
    let outcome = drive(game, schedule, cfg, rng, hook, q1, v0, &mut learner)?;
    Ok((outcome, learner.est))
}
