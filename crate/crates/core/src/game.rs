//! Finite identical-interest Markov games and the random instance generator.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng::{self, SimRng};

/// Tolerance on `sum_s' p(s'|s,a) = 1`.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Mixed-radix encoding of joint actions, agent 0 most significant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActionSpace {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActionSpace {
    pub fn new(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(CoreError::Config("at least one agent is required"));
        }
        if counts.contains(&0) {
            return Err(CoreError::Config("every agent needs at least one action"));
        }
        let mut strides = vec![1usize; counts.len()];
        let mut size = 1usize;
        for i in (0..counts.len()).rev() {
            strides[i] = size;
            size = size
                .checked_mul(counts[i])
                .ok_or(CoreError::Config("joint action space overflows usize"))?;
        }
        Ok(Self {
            counts: counts.to_vec(),
            strides,
            size,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.counts.len()
    }

    /// Number of joint actions, `prod_i |A^i|`.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn stride(&self, agent: usize) -> usize {
        self.strides[agent]
    }

    pub fn encode(&self, actions: &[usize]) -> Result<usize> {
        if actions.len() != self.counts.len() {
            return Err(CoreError::Shape {
                what: "joint action",
                expected: self.counts.len(),
                actual: actions.len(),
            });
        }
        let mut flat = 0;
        for (i, (&a, &c)) in actions.iter().zip(&self.counts).enumerate() {
            if a >= c {
                return Err(CoreError::Index {
                    what: "action",
                    index: a,
                    limit: c,
                });
            }
            flat += a * self.strides[i];
        }
        Ok(flat)
    }

    pub fn decode(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.size {
            return Err(CoreError::Index {
                what: "joint action",
                index: flat,
                limit: self.size,
            });
        }
        Ok((0..self.counts.len())
            .map(|i| self.component(flat, i))
            .collect())
    }

    /// Action of `agent` inside the flat profile `flat`.
    #[inline]
    pub fn component(&self, flat: usize, agent: usize) -> usize {
        (flat / self.strides[agent]) % self.counts[agent]
    }

    /// `flat` with `agent`'s action replaced by `action`.
    #[inline]
    pub fn with_component(&self, flat: usize, agent: usize, action: usize) -> usize {
        let old = self.component(flat, agent);
        flat - old * self.strides[agent] + action * self.strides[agent]
    }

    /// Number of agents whose actions differ between two profiles.
    pub fn hamming(&self, a: usize, b: usize) -> usize {
        (0..self.counts.len())
            .filter(|&i| self.component(a, i) != self.component(b, i))
            .count()
    }
}

/// A tensor over `(state, joint action)`, stored row-major by state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_joint: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_joint: usize) -> Self {
        Self {
            n_states,
            n_joint,
            values: vec![0.0; n_states * n_joint],
        }
    }

    pub fn from_vec(n_states: usize, n_joint: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_states * n_joint {
            return Err(CoreError::Shape {
                what: "Q-table",
                expected: n_states * n_joint,
                actual: values.len(),
            });
        }
        Ok(Self {
            n_states,
            n_joint,
            values,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_joint(&self) -> usize {
        self.n_joint
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_joint + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, value: f64) {
        self.values[s * self.n_joint + a] = value;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_joint..(s + 1) * self.n_joint]
    }

    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.values[s * self.n_joint..(s + 1) * self.n_joint]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Per-state maximum over joint actions.
    pub fn row_max(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|s| self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    pub fn sup_norm_diff(&self, other: &QTable) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| libm::fabs(a - b))
            .fold(0.0, f64::max))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|x| libm::fabs(*x)).fold(0.0, f64::max)
    }

    pub(crate) fn check_same_shape(&self, other: &QTable) -> Result<()> {
        if self.n_states != other.n_states || self.n_joint != other.n_joint {
            return Err(CoreError::Shape {
                what: "Q-table",
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        Ok(())
    }
}

/// One broken invariant of a [`MarkovGame`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Discount(f64),
    NonFiniteReward { state: usize, action: usize },
    TransitionEntry { state: usize, action: usize, next: usize, value: f64 },
    TransitionRowSum { state: usize, action: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Discount(g) => write!(f, "discount out of range: {g} not in [0, 1)"),
            Violation::NonFiniteReward { state, action } => {
                write!(f, "reward at (s={state}, a={action}) is not finite")
            }
            Violation::TransitionEntry {
                state,
                action,
                next,
                value,
            } => write!(
                f,
                "transition p({next}|s={state}, a={action}) = {value} outside [0, 1]"
            ),
            Violation::TransitionRowSum { state, action, sum } => {
                write!(f, "transition row (s={state}, a={action}) sums to {sum}")
            }
        }
    }
}

/// Finite identical-interest Markov game `<S, A, r, p>` with discount.
///
/// Rewards are shared by all agents. The transition kernel is stored as
/// `[(s * |A| + a) * |S| + s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    n_states: usize,
    space: JointActionSpace,
    reward: Vec<f64>,
    transition: Vec<f64>,
    discount: f64,
}

impl MarkovGame {
    /// Builds a game and rejects it unless every invariant holds.
    pub fn new(
        n_states: usize,
        action_counts: &[usize],
        reward: Vec<f64>,
        transition: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        let game = Self::from_parts(n_states, action_counts, reward, transition, discount)?;
        let violations = game.validate();
        if violations.is_empty() {
            Ok(game)
        } else {
            Err(CoreError::InvalidGame(violations.len()))
        }
    }

    /// Builds a game checking only tensor shapes. Use [`MarkovGame::validate`]
    /// to inspect the remaining invariants.
    pub fn from_parts(
        n_states: usize,
        action_counts: &[usize],
        reward: Vec<f64>,
        transition: Vec<f64>,
        discount: f64,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(CoreError::Config("a game needs at least one state"));
        }
        let space = JointActionSpace::new(action_counts)?;
        let n_joint = space.size();
        if reward.len() != n_states * n_joint {
            return Err(CoreError::Shape {
                what: "reward tensor",
                expected: n_states * n_joint,
                actual: reward.len(),
            });
        }
        if transition.len() != n_states * n_joint * n_states {
            return Err(CoreError::Shape {
                what: "transition tensor",
                expected: n_states * n_joint * n_states,
                actual: transition.len(),
            });
        }
        Ok(Self {
            n_states,
            space,
            reward,
            transition,
            discount,
        })
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(0.0..1.0).contains(&self.discount) {
            out.push(Violation::Discount(self.discount));
        }
        let n_joint = self.n_joint();
        for s in 0..self.n_states {
            for a in 0..n_joint {
                if !self.reward(s, a).is_finite() {
                    out.push(Violation::NonFiniteReward {
                        state: s,
                        action: a,
                    });
                }
                let row = self.transition_row(s, a);
                let mut entries_ok = true;
                for (next, &p) in row.iter().enumerate() {
                    if !(0.0..=1.0).contains(&p) {
                        entries_ok = false;
                        out.push(Violation::TransitionEntry {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if entries_ok && libm::fabs(sum - 1.0) > ROW_SUM_TOL {
                    out.push(Violation::TransitionRowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
        }
        out
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_agents(&self) -> usize {
        self.space.n_agents()
    }

    pub fn n_joint(&self) -> usize {
        self.space.size()
    }

    pub fn action_counts(&self) -> &[usize] {
        self.space.counts()
    }

    pub fn space(&self) -> &JointActionSpace {
        &self.space
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    /// Same game with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        let mut g = self.clone();
        g.discount = discount;
        if !(0.0..1.0).contains(&discount) {
            return Err(CoreError::InvalidGame(1));
        }
        Ok(g)
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_joint() + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn reward_table(&self) -> QTable {
        QTable::from_vec(self.n_states, self.n_joint(), self.reward.clone())
            .expect("reward tensor shape is checked on construction")
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_joint() + a) * self.n_states;
        &self.transition[base..base + self.n_states]
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transition
    }

    pub(crate) fn check_indices(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states {
            return Err(CoreError::Index {
                what: "state",
                index: s,
                limit: self.n_states,
            });
        }
        if a >= self.n_joint() {
            return Err(CoreError::Index {
                what: "joint action",
                index: a,
                limit: self.n_joint(),
            });
        }
        Ok(())
    }

    /// Draws `s' ~ p(.|s, a)` by inverting the row's CDF.
    pub fn sample_next_state(&self, s: usize, a: usize, rng: &mut SimRng) -> Result<usize> {
        self.check_indices(s, a)?;
        Ok(self.sample_next_unchecked(s, a, rng))
    }

    #[inline]
    pub(crate) fn sample_next_unchecked(&self, s: usize, a: usize, rng: &mut SimRng) -> usize {
        let row = self.transition_row(s, a);
        let u: f64 = rng.random();
        sample_index(row, u)
    }
}

/// Index `i` with `cdf(i-1) <= u < cdf(i)`; rounding slack goes to the last
/// positive entry.
#[inline]
pub(crate) fn sample_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Configuration of the random game generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GameGenConfig {
    pub n_states: usize,
    pub action_counts: Vec<usize>,
    pub discount: f64,
    /// Unnormalized transition entries are drawn uniformly from this range.
    pub transition_range: (f64, f64),
    pub seed: u64,
}

impl GameGenConfig {
    /// `n_agents` agents with `n_actions` actions each, transition entries
    /// drawn from `[0.2, 1]`.
    pub fn uniform(n_states: usize, n_agents: usize, n_actions: usize, discount: f64, seed: u64) -> Self {
        Self {
            n_states,
            action_counts: vec![n_actions; n_agents],
            discount,
            transition_range: (0.2, 1.0),
            seed,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.action_counts.len()
    }
}

/// Random game: `r(s,a) = u(s,a) * (s+1)^2` with `u ~ U[0,1)`, normalized by
/// the largest magnitude; transition rows drawn from the configured range and
/// normalized.
pub fn generate_random_game(cfg: &GameGenConfig) -> Result<MarkovGame> {
    if cfg.n_states == 0 {
        return Err(CoreError::Config("n_states must be positive"));
    }
    if cfg.action_counts.is_empty() {
        return Err(CoreError::Config("n_agents must be positive"));
    }
    let (lo, hi) = cfg.transition_range;
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(CoreError::Config(
            "transition range must satisfy 0 < lower <= upper < inf",
        ));
    }
    if !(0.0..1.0).contains(&cfg.discount) {
        return Err(CoreError::Config("discount must lie in [0, 1)"));
    }
    let space = JointActionSpace::new(&cfg.action_counts)?;
    let n_states = cfg.n_states;
    let n_joint = space.size();
    let mut rng = rng::seeded(cfg.seed);

    let mut reward = Vec::with_capacity(n_states * n_joint);
    for s in 0..n_states {
        let scale = ((s + 1) * (s + 1)) as f64;
        for _ in 0..n_joint {
            let u: f64 = rng.random();
            reward.push(u * scale);
        }
    }
    let max_abs = reward.iter().map(|x| libm::fabs(*x)).fold(0.0, f64::max);
    if max_abs > 0.0 {
        for r in &mut reward {
            *r /= max_abs;
        }
    }

    let mut transition = Vec::with_capacity(n_states * n_joint * n_states);
    let mut row = vec![0.0; n_states];
    for _ in 0..n_states * n_joint {
        for p in row.iter_mut() {
            *p = if lo == hi { lo } else { rng.random_range(lo..=hi) };
        }
        let total: f64 = row.iter().sum();
        transition.extend(row.iter().map(|p| p / total));
    }

    MarkovGame::new(n_states, &cfg.action_counts, reward, transition, cfg.discount)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_state_game(discount: f64) -> MarkovGame {
        MarkovGame::from_parts(1, &[1], vec![1.0], vec![1.0], discount).unwrap()
    }

    #[test]
    fn identity_game_is_valid() {
        assert!(one_state_game(0.5).validate().is_empty());
    }

    #[test]
    fn short_row_is_reported_with_its_index() {
        let g = MarkovGame::from_parts(
            2,
            &[1],
            vec![0.0, 0.0],
            vec![0.5, 0.4, 0.0, 1.0],
            0.5,
        )
        .unwrap();
        let v = g.validate();
        assert_eq!(v.len(), 1);
        match v[0] {
            Violation::TransitionRowSum { state, action, sum } => {
                assert_eq!((state, action), (0, 0));
                assert!((sum - 0.9).abs() < 1e-15);
            }
            ref other => panic!("unexpected violation {other:?}"),
        }
    }

    #[test]
    fn unit_discount_is_rejected() {
        let v = one_state_game(1.0).validate();
        assert_eq!(v, vec![Violation::Discount(1.0)]);
        assert!(alloc::format!("{}", v[0]).contains("discount out of range"));
    }

    #[test]
    fn negative_entry_and_nan_reward() {
        let g = MarkovGame::from_parts(
            2,
            &[1],
            vec![f64::NAN, 0.0],
            vec![1.5, -0.5, 0.0, 1.0],
            0.5,
        )
        .unwrap();
        let v = g.validate();
        assert!(v.contains(&Violation::NonFiniteReward { state: 0, action: 0 }));
        assert_eq!(
            v.iter()
                .filter(|x| matches!(x, Violation::TransitionEntry { .. }))
                .count(),
            2
        );
    }

    #[test]
    fn new_rejects_invalid_games() {
        assert_eq!(
            MarkovGame::new(1, &[1], vec![1.0], vec![1.0], 1.0),
            Err(CoreError::InvalidGame(1))
        );
        assert!(matches!(
            MarkovGame::from_parts(1, &[2], vec![1.0], vec![1.0, 1.0], 0.5),
            Err(CoreError::Shape { .. })
        ));
    }

    #[test]
    fn encode_decode_exhaustive() {
        for n_agents in 1..=3 {
            for n_actions in 1..=4 {
                let counts = vec![n_actions; n_agents];
                let space = JointActionSpace::new(&counts).unwrap();
                for flat in 0..space.size() {
                    let actions = space.decode(flat).unwrap();
                    assert_eq!(space.encode(&actions).unwrap(), flat);
                }
            }
        }
        let mixed = JointActionSpace::new(&[2, 3, 4]).unwrap();
        for flat in 0..mixed.size() {
            assert_eq!(mixed.encode(&mixed.decode(flat).unwrap()).unwrap(), flat);
        }
    }

    #[test]
    fn agent_zero_is_most_significant() {
        let space = JointActionSpace::new(&[2, 3]).unwrap();
        assert_eq!(space.encode(&[1, 0]).unwrap(), 3);
        assert_eq!(space.encode(&[0, 2]).unwrap(), 2);
        assert_eq!(space.with_component(0, 0, 1), 3);
        assert!(space.encode(&[2, 0]).is_err());
        assert!(space.decode(6).is_err());
    }

    #[test]
    fn deterministic_row_always_lands() {
        let g = MarkovGame::new(2, &[1], vec![0.0; 2], vec![0.0, 1.0, 0.0, 1.0], 0.5).unwrap();
        let mut rng = rng::seeded(3);
        for _ in 0..1000 {
            assert_eq!(g.sample_next_state(0, 0, &mut rng).unwrap(), 1);
        }
        assert!(g.sample_next_state(2, 0, &mut rng).is_err());
        assert!(g.sample_next_state(0, 1, &mut rng).is_err());
    }

    #[test]
    fn uniform_row_frequencies() {
        let g = MarkovGame::new(2, &[1], vec![0.0; 2], vec![0.5, 0.5, 0.5, 0.5], 0.5).unwrap();
        let mut rng = rng::seeded(11);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| g.sample_next_state(0, 0, &mut rng).unwrap() == 0)
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = generate_random_game(&GameGenConfig::uniform(4, 2, 2, 0.6, 1)).unwrap();
        let draw = |seed| {
            let mut rng = rng::seeded(seed);
            (0..50)
                .map(|_| g.sample_next_state(1, 2, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(5), draw(5));
    }

    #[test]
    fn generated_game_properties() {
        let cfg = GameGenConfig::uniform(5, 5, 5, 0.6, 42);
        let g = generate_random_game(&cfg).unwrap();
        assert_eq!(g.rewards().len(), 5 * 3125);
        assert_eq!(g.n_joint(), 3125);
        assert!(g.validate().is_empty());
        let max = g.rewards().iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert_eq!(max, 1.0);
        for s in 0..5 {
            for a in 0..g.n_joint() {
                let sum: f64 = g.transition_row(s, a).iter().sum();
                assert!((sum - 1.0).abs() <= ROW_SUM_TOL);
            }
        }
    }

    #[test]
    fn degenerate_generator_configs() {
        let mut cfg = GameGenConfig::uniform(0, 1, 2, 0.5, 0);
        assert!(matches!(generate_random_game(&cfg), Err(CoreError::Config(_))));
        cfg = GameGenConfig::uniform(2, 0, 2, 0.5, 0);
        assert!(matches!(generate_random_game(&cfg), Err(CoreError::Config(_))));
        cfg = GameGenConfig::uniform(2, 1, 2, 0.5, 0);
        cfg.transition_range = (0.0, 1.0);
        assert!(matches!(generate_random_game(&cfg), Err(CoreError::Config(_))));
    }
}
