//! Measurable consequences of the convergence analysis: deviations from the
//! optimum, tracking errors, the theoretical bands and the deviation
//! envelope for the Q-function estimates.
//!
//! `ln` is the natural log and `|A|` is the joint-action count.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::game::QTable;
use crate::solver::{self, ExactSolution};

/// Closed interval `(lower, upper)`.
pub type Band = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    /// `v_n(s) - v*(s)` per evaluated state.
    pub delta_v: Vec<f64>,
    /// `max |Q_n - Q*|` over all `(s, a)`.
    pub delta_q_sup: f64,
    /// `v_n(s) - max_a Q_n(s, a)` per evaluated state.
    pub tracking_error: Vec<f64>,
    /// States the per-state fields refer to, in order.
    pub states: Vec<usize>,
    /// `(-tau ln|A|, 0)`: range of the stationary-play bias.
    pub bias_band: Band,
    /// `(-tau ln|A| / (1 - gamma), 0)`: limit band of `delta_v` (Average).
    pub theorem1_band: Band,
    /// `(-tau ln|A| gamma / (1 - gamma), 0)`: limit band of `delta_Q` (Average).
    pub q_band: Band,
}

pub fn bias_band(tau: f64, joint_action_count: usize) -> Band {
    (-tau * libm::log(joint_action_count as f64), 0.0)
}

pub fn theorem1_band(tau: f64, gamma: f64, joint_action_count: usize) -> Band {
    (bias_band(tau, joint_action_count).0 / (1.0 - gamma), 0.0)
}

pub fn q_band(tau: f64, gamma: f64, joint_action_count: usize) -> Band {
    (theorem1_band(tau, gamma, joint_action_count).0 * gamma, 0.0)
}

/// `E_{a~mu}[Q(a)] - max_a Q(a)` for `mu = softmax(row / tau)`, summed as
/// `sum_a mu(a) (Q(a) - max Q)` so every term, and the total, is `<= 0` in
/// floating point too.
pub fn stationary_bias(row: &[f64], tau: f64) -> Result<f64> {
    let mu = solver::logit_distribution(row, tau)?;
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(mu.iter().zip(row).map(|(m, q)| m * (q - max)).sum())
}

/// Diagnostics of one round's `(Q_n, v_n)` against the exact solution,
/// restricted to `states` (all states when `None`).
pub fn compute_diagnostics(
    q: &QTable,
    v: &[f64],
    exact: &ExactSolution,
    tau: f64,
    gamma: f64,
    joint_action_count: usize,
    states: Option<&[usize]>,
) -> Result<DiagnosticsRecord> {
    exact.q_star.check_same_shape(q)?;
    if v.len() != exact.v_star.len() {
        return Err(CoreError::Shape {
            what: "value vector",
            expected: exact.v_star.len(),
            actual: v.len(),
        });
    }
    let states: Vec<usize> = match states {
        Some(s) => s.to_vec(),
        None => (0..v.len()).collect(),
    };
    if let Some(&bad) = states.iter().find(|&&s| s >= v.len()) {
        return Err(CoreError::Index {
            what: "state",
            index: bad,
            limit: v.len(),
        });
    }
    let row_max = q.row_max();
    Ok(DiagnosticsRecord {
        delta_v: states.iter().map(|&s| v[s] - exact.v_star[s]).collect(),
        delta_q_sup: q.sup_norm_diff(&exact.q_star)?,
        tracking_error: states.iter().map(|&s| v[s] - row_max[s]).collect(),
        states,
        bias_band: bias_band(tau, joint_action_count),
        theorem1_band: theorem1_band(tau, gamma, joint_action_count),
        q_band: q_band(tau, gamma, joint_action_count),
    })
}

/// Envelope on `Q_n - Q*` after `n` updates (0-based: `n = 0` is the
/// Q-function of the first round) from the tracking-error extremes of the
/// earlier rounds:
/// `-gamma^(n+1) q_bound + sum_{m<n} gamma^(n-m) e_min(m)` to
/// `gamma^(n+1) q_bound + sum_{m<n} gamma^(n-m) e_max(m)`.
///
/// `history[m] = (min_s e_m(s), max_s e_m(s))`; only the first `n` entries
/// are used.
pub fn lemma2_envelope(history: &[(f64, f64)], gamma: f64, q_bound: f64, n: usize) -> Result<Band> {
    if history.len() < n {
        return Err(CoreError::Shape {
            what: "tracking-error history",
            expected: n,
            actual: history.len(),
        });
    }
    let head = libm::pow(gamma, (n + 1) as f64) * q_bound;
    let (mut lo, mut hi) = (-head, head);
    for (m, &(e_min, e_max)) in history[..n].iter().enumerate() {
        let w = libm::pow(gamma, (n - m) as f64);
        lo += w * e_min;
        hi += w * e_max;
    }
    Ok((lo, hi))
}

/// Smallest and largest entry, for building envelope histories.
pub fn extremes(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
        (lo.min(x), hi.max(x))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_game, GameGenConfig};
    use crate::solver::solve;
    use alloc::vec;

    #[test]
    fn zero_deviation_at_optimum() {
        let g = generate_random_game(&GameGenConfig::uniform(3, 2, 2, 0.6, 2)).unwrap();
        let sol = solve(&g, 1e-12, 10_000, 0.1).unwrap();
        let d = compute_diagnostics(&sol.q_star, &sol.v_star, &sol, 0.1, 0.6, 4, None).unwrap();
        assert!(d.delta_v.iter().all(|x| *x == 0.0));
        assert_eq!(d.delta_q_sup, 0.0);
        assert!(d.tracking_error.iter().all(|x| *x == 0.0));
        assert!(compute_diagnostics(&sol.q_star, &[0.0], &sol, 0.1, 0.6, 4, None).is_err());
        assert!(compute_diagnostics(&QTable::zeros(3, 5), &sol.v_star, &sol, 0.1, 0.6, 4, None).is_err());
    }

    #[test]
    fn band_arithmetic() {
        // ln 3125 = 8.047189562170502
        let (lo, hi) = theorem1_band(1e-3, 0.6, 3125);
        assert!((lo - (-0.020117973905426256)).abs() < 1e-15);
        assert!((lo - (-0.020118)).abs() < 1e-6);
        assert_eq!(hi, 0.0);
        let (qlo, _) = q_band(1e-3, 0.6, 3125);
        assert!((qlo - (-0.012071)).abs() < 1e-6);
        let (blo, _) = bias_band(1e-3, 3125);
        assert!((blo - (-0.008047189562170502)).abs() < 1e-15);
    }

    #[test]
    fn envelope_without_errors_shrinks() {
        let hist = vec![(0.0, 0.0); 10];
        for n in 0..10 {
            let (lo, hi) = lemma2_envelope(&hist, 0.5, 3.0, n).unwrap();
            let head = 0.5f64.powi(n as i32 + 1) * 3.0;
            assert_eq!((lo, hi), (-head, head));
        }
        assert!(lemma2_envelope(&hist, 0.5, 3.0, 11).is_err());
    }

    #[test]
    fn envelope_first_round() {
        let (lo, hi) = lemma2_envelope(&[], 0.6, 2.0, 0).unwrap();
        assert!((lo + 1.2).abs() < 1e-15 && (hi - 1.2).abs() < 1e-15);
    }

    #[test]
    fn envelope_constant_error_limit() {
        let c = 0.3;
        let gamma = 0.6;
        let n = 200;
        let hist = vec![(0.0, c); n];
        let (_, hi) = lemma2_envelope(&hist, gamma, 1.0, n).unwrap();
        // sum_{m<n} gamma^(n-m) c = c gamma (1 - gamma^n) / (1 - gamma)
        assert!((hi - c * gamma / (1.0 - gamma)).abs() < 1e-12);
    }
}
