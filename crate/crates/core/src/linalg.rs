//! Small dense helpers: soft-max, total variation, row-stochastic matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};

/// `x <- softmax(x / tau)` with max-subtraction.
pub fn softmax_in_place(x: &mut [f64], tau: f64) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in x.iter_mut() {
        *v = libm::exp((*v - max) / tau);
        total += *v;
    }
    for v in x.iter_mut() {
        *v /= total;
    }
}

/// Total variation distance `0.5 * sum |p - q|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| libm::fabs(a - b)).sum::<f64>()
}

pub fn linf_distance(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(a, b)| libm::fabs(a - b))
        .fold(0.0, f64::max)
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(CoreError::Shape {
                    what: "matrix row",
                    expected: n,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, x: f64) {
        self.data[i * self.n + j] += x;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn mul(&self, other: &SquareMatrix) -> SquareMatrix {
        let n = self.n;
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// Row vector times matrix, `x P`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, xi) in x.iter().enumerate() {
            for (o, p) in out.iter_mut().zip(self.row(i)) {
                *o += xi * p;
            }
        }
        out
    }

    /// Period of the chain: gcd over edges `u -> v` of `level(u) + 1 - level(v)`
    /// from a BFS rooted at 0. Meaningful for irreducible chains.
    pub fn period(&self) -> usize {
        let n = self.n;
        if n == 0 {
            return 1;
        }
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = alloc::collections::VecDeque::from([0usize]);
        let mut g = 0usize;
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if self.get(u, v) <= 0.0 {
                    continue;
                }
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                } else {
                    let d = (level[u] + 1).abs_diff(level[v]);
                    g = gcd(g, d);
                }
            }
        }
        if g == 0 {
            1
        } else {
            g
        }
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Unique `mu` with `mu P = mu`, `sum mu = 1`, by Grassmann-Taksar-Heyman
/// state reduction. The reduction only adds and divides non-negative
/// numbers, so it stays accurate on nearly decomposable chains where plain
/// elimination on `(P^T - I)` loses digits. Fails for chains with more than
/// one closed class or with period above 1.
pub fn stationary_distribution(p: &SquareMatrix) -> Result<Vec<f64>> {
    let n = p.dim();
    if n == 0 {
        return Err(CoreError::Config("empty matrix"));
    }
    for i in 0..n {
        let row = p.row(i);
        if row.iter().any(|x| !(0.0..=1.0 + 1e-12).contains(x)) {
            return Err(CoreError::Numeric("matrix is not row-stochastic"));
        }
        let sum: f64 = row.iter().sum();
        if libm::fabs(sum - 1.0) > 1e-10 {
            return Err(CoreError::Numeric("matrix is not row-stochastic"));
        }
    }

    let mut a = p.data.clone();
    for k in (1..n).rev() {
        let exit: f64 = a[k * n..k * n + k].iter().sum();
        if !(exit > 0.0) {
            return Err(CoreError::Numeric("singular stationary system (reducible chain)"));
        }
        for i in 0..k {
            a[i * n + k] /= exit;
        }
        for i in 0..k {
            let f = a[i * n + k];
            if f != 0.0 {
                for j in 0..k {
                    a[i * n + j] += f * a[k * n + j];
                }
            }
        }
    }
    let mut mu = vec![0.0; n];
    mu[0] = 1.0;
    for j in 1..n {
        mu[j] = (0..j).map(|i| mu[i] * a[i * n + j]).sum();
    }
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|x| *x /= total);

    if mu.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Numeric("stationary solve produced a non-finite mass"));
    }
    if linf_distance(&p.left_mul(&mu), &mu) > 1e-12 {
        return Err(CoreError::Numeric("stationary residual above 1e-12"));
    }
    if p.period() != 1 {
        return Err(CoreError::Numeric("chain is periodic"));
    }
    Ok(mu)
}
