//! Ground truth for the dynamics: optimal `Q*`, `v*` by value iteration, and
//! the limiting logit distribution `mu*(s, .) = softmax(Q*(s, .) / tau)`.

use alloc::vec::Vec;

use crate::dd::Dd;
use crate::error::{CoreError, Result};
use crate::game::{MarkovGame, QTable};
use crate::linalg;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactSolution {
    pub v_star: Vec<f64>,
    pub q_star: QTable,
    /// Per-state logit distribution of `Q*` at the solve temperature.
    pub mu_star: Vec<Vec<f64>>,
    pub tau: f64,
    /// Sup-norm change of the last sweep.
    pub residual: f64,
    pub iterations: usize,
    /// Sup-norm change of every sweep, in order.
    pub sweep_changes: Vec<f64>,
}

impl ExactSolution {
    /// `max |Q*(s,a)|`.
    pub fn q_bound(&self) -> f64 {
        self.q_star.sup_norm()
    }
}

/// One application of the Bellman optimality operator on Q-tables:
/// `r(s,a) + gamma * sum_s' p(s'|s,a) * max_a' Q(s',a')`.
pub fn bellman_backup(game: &MarkovGame, q: &QTable) -> Result<QTable> {
    check_shape(game, q)?;
    let v = q.row_max();
    Ok(backup_from_values(game, &v))
}

/// `r(s,a) + gamma * sum_s' p(s'|s,a) * v(s')`.
pub(crate) fn backup_from_values(game: &MarkovGame, v: &[f64]) -> QTable {
    let n_joint = game.n_joint();
    let gamma = game.discount();
    let mut out = QTable::zeros(game.n_states(), n_joint);
    for s in 0..game.n_states() {
        for a in 0..n_joint {
            let cont: f64 = game
                .transition_row(s, a)
                .iter()
                .zip(v)
                .map(|(p, x)| p * x)
                .sum();
            out.set(s, a, game.reward(s, a) + gamma * cont);
        }
    }
    out
}

fn check_shape(game: &MarkovGame, q: &QTable) -> Result<()> {
    if q.n_states() != game.n_states() {
        return Err(CoreError::Shape {
            what: "Q-table states",
            expected: game.n_states(),
            actual: q.n_states(),
        });
    }
    if q.n_joint() != game.n_joint() {
        return Err(CoreError::Shape {
            what: "Q-table joint actions",
            expected: game.n_joint(),
            actual: q.n_joint(),
        });
    }
    Ok(())
}

/// Value iteration from `Q_0 = r` until the sweep change falls below
/// `tol * (1 - gamma) / gamma`, which puts the iterate within `tol` of `Q*`
/// in sup-norm.
///
/// Iterates are carried in double-double precision so that sweep changes
/// stay resolved down to the stopping threshold.
pub fn solve(game: &MarkovGame, tol: f64, max_iters: usize, tau: f64) -> Result<ExactSolution> {
    if !(tol > 0.0) {
        return Err(CoreError::Config("tolerance must be positive"));
    }
    if !(tau > 0.0) {
        return Err(CoreError::Config("temperature must be positive"));
    }
    let n_states = game.n_states();
    let n_joint = game.n_joint();
    let gamma = game.discount();

    let mut q: Vec<Dd> = game.rewards().iter().map(|&r| Dd::from_f64(r)).collect();
    let mut next = q.clone();
    let mut v = alloc::vec![Dd::ZERO; n_states];
    let mut changes = Vec::new();
    let mut converged = false;

    for _ in 0..max_iters {
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = q[s * n_joint..(s + 1) * n_joint]
                .iter()
                .copied()
                .reduce(|a, b| if b.cmp(a).is_gt() { b } else { a })
                .expect("non-empty joint action space");
        }
        let mut change = 0.0f64;
        for s in 0..n_states {
            for a in 0..n_joint {
                let mut cont = Dd::ZERO;
                for (p, vt) in game.transition_row(s, a).iter().zip(&v) {
                    if *p != 0.0 {
                        cont = cont.add(vt.mul_f64(*p));
                    }
                }
                let idx = s * n_joint + a;
                let updated = Dd::from_f64(game.reward(s, a)).add(cont.mul_f64(gamma));
                change = change.max(libm::fabs(updated.sub(q[idx]).to_f64()));
                next[idx] = updated;
            }
        }
        core::mem::swap(&mut q, &mut next);
        changes.push(change);
        if change * gamma <= tol * (1.0 - gamma) {
            converged = true;
            break;
        }
    }

    let residual = changes.last().copied().unwrap_or(f64::INFINITY);
    if !converged {
        return Err(CoreError::IterationLimit {
            iterations: changes.len(),
            residual,
        });
    }

    let q_star = QTable::from_vec(n_states, n_joint, q.iter().map(|x| x.to_f64()).collect())?;
    let v_star = q_star.row_max();
    let mu_star = (0..n_states)
        .map(|s| logit_distribution(q_star.row(s), tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactSolution {
        v_star,
        q_star,
        mu_star,
        tau,
        residual,
        iterations: changes.len(),
        sweep_changes: changes,
    })
}

/// `softmax(row / tau)`, computed after subtracting the row maximum.
pub fn logit_distribution(row: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(CoreError::Config("temperature must be positive and finite"));
    }
    if row.is_empty() {
        return Err(CoreError::Config("empty row"));
    }
    if row.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Numeric("non-finite entry in logit input"));
    }
    let mut out = row.to_vec();
    linalg::softmax_in_place(&mut out, tau);
    Ok(out)
}
