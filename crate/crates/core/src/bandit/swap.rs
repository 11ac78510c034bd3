use rand::Rng;

use super::exp3::{Estimator, Exp3, LearningRate};
use crate::error::{Error, Result};
use crate::policy::sample_index;

/// Residual `||pQ - p||_1` a stationary distribution must reach.
pub const STATIONARY_TOL: f64 = 1e-9;
/// Power-iteration cap per attempt.
pub const STATIONARY_ITERATIONS: usize = 10_000;

fn residual(q: &[f64], p: &[f64]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|a| {
            let pq: f64 = (0..n).map(|b| p[b] * q[b * n + a]).sum();
            (pq - p[a]).abs()
        })
        .sum()
}

fn lazy_power_iteration(q: &[f64], mut p: Vec<f64>) -> (Vec<f64>, f64) {
    let n = p.len();
    let mut next = vec![0.0; n];
    let mut res = residual(q, &p);
    for _ in 0..STATIONARY_ITERATIONS {
        if res <= STATIONARY_TOL {
            break;
        }
        for a in 0..n {
            next[a] = 0.5 * (p[a] + (0..n).map(|b| p[b] * q[b * n + a]).sum::<f64>());
        }
        let total: f64 = next.iter().sum();
        for (x, y) in p.iter_mut().zip(&next) {
            *x = y / total;
        }
        res = residual(q, &p);
    }
    (p, res)
}

/// Solves `p (Q - I) = 0` with `sum p = 1` by Gaussian elimination.
fn direct_solve(q: &[f64], n: usize) -> Option<Vec<f64>> {
    // Rows of the system are the equations for p[a]; the last one is replaced
    // by the normalization constraint.
    let mut m = vec![0.0; n * (n + 1)];
    for a in 0..n {
        for b in 0..n {
            m[a * (n + 1) + b] = q[b * n + a] - if a == b { 1.0 } else { 0.0 };
        }
    }
    for b in 0..n {
        m[(n - 1) * (n + 1) + b] = 1.0;
    }
    m[(n - 1) * (n + 1) + n] = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| {
            m[x * (n + 1) + col]
                .abs()
                .total_cmp(&m[y * (n + 1) + col].abs())
        })?;
        if m[pivot * (n + 1) + col].abs() < 1e-14 {
            return None;
        }
        for k in 0..=n {
            m.swap(col * (n + 1) + k, pivot * (n + 1) + k);
        }
        for row in 0..n {
            if row != col {
                let f = m[row * (n + 1) + col] / m[col * (n + 1) + col];
                for k in col..=n {
                    m[row * (n + 1) + k] -= f * m[col * (n + 1) + k];
                }
            }
        }
    }
    let mut p: Vec<f64> = (0..n).map(|a| m[a * (n + 1) + n] / m[a * (n + 1) + a]).collect();
    p.iter_mut().for_each(|x| *x = x.max(0.0));
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Some(p)
}

/// Stationary distribution of the row-stochastic `n x n` matrix `q`.
///
/// Runs power iteration on the lazy chain `(Q + I) / 2` from `warm` (or from
/// uniform), retries from uniform, and finally solves the linear system. When
/// `Q` is reducible and uniform is already stationary, uniform is returned.
pub fn stationary_distribution(q: &[f64], n: usize, warm: Option<&[f64]>) -> Result<Vec<f64>> {
    let uniform = vec![1.0 / n as f64; n];
    let start = warm.map_or_else(|| uniform.clone(), <[f64]>::to_vec);
    let (p, res) = lazy_power_iteration(q, start);
    if res <= STATIONARY_TOL {
        return Ok(p);
    }
    let mut best = (p, res);
    if warm.is_some() {
        let retry = lazy_power_iteration(q, uniform);
        if retry.1 <= STATIONARY_TOL {
            return Ok(retry.0);
        }
        if retry.1 < best.1 {
            best = retry;
        }
    }
    if let Some(p) = direct_solve(q, n) {
        let res = residual(q, &p);
        if res <= STATIONARY_TOL {
            return Ok(p);
        }
        if res < best.1 {
            best = (p, res);
        }
    }
    Err(Error::Stationary { residual: best.1 })
}

/// Blum–Mansour reduction from swap regret to external regret, one EXP3
/// instance per recommended arm.
#[derive(Debug, Clone)]
pub struct SwapLearner {
    inner: Vec<Exp3>,
    q: Vec<f64>,
    p: Vec<f64>,
}

impl SwapLearner {
    pub fn new(arms: usize, rounds: u64) -> Self {
        let inner = (0..arms)
            .map(|_| Exp3::new(arms, LearningRate::Horizon(rounds), 0.0, Estimator::Loss))
            .collect();
        Self {
            inner,
            q: vec![1.0 / arms as f64; arms * arms],
            p: vec![1.0 / arms as f64; arms],
        }
    }

    pub fn arms(&self) -> usize {
        self.p.len()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Row `b` is inner instance `b`'s distribution.
    pub fn matrix(&self) -> &[f64] {
        &self.q
    }

    pub fn residual(&self) -> f64 {
        residual(&self.q, &self.p)
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.p, rng)
    }

    /// Instance `b` is charged `p(b) * (1 - r) / p(a)` on the played arm.
    pub fn update(&mut self, arm: usize, reward: f64) -> Result<()> {
        let n = self.arms();
        if arm >= n {
            return Err(Error::ArmOutOfRange { arm, arms: n });
        }
        if !(0.0..=1.0).contains(&reward) {
            return Err(Error::RewardRange(reward));
        }
        let loss = (1.0 - reward) / self.p[arm];
        for (b, learner) in self.inner.iter_mut().enumerate() {
            learner.update_loss_estimate(arm, self.p[b] * loss)?;
            self.q[b * n..(b + 1) * n].copy_from_slice(learner.probabilities());
        }
        self.p = stationary_distribution(&self.q, n, Some(&self.p))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubly_stochastic_gives_uniform() {
        let l = SwapLearner::new(3, 100);
        assert_eq!(l.probabilities(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn identity_rows_keep_uniform() {
        let q = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        assert_eq!(stationary_distribution(&q, 3, None).unwrap(), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn two_state_chain_closed_form() {
        let q = [0.9, 0.1, 0.3, 0.7];
        let p = stationary_distribution(&q, 2, None).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-8 && (p[1] - 0.25).abs() < 1e-8);
    }

    #[test]
    fn direct_solve_handles_slow_mixing() {
        let e = 1e-6;
        let q = [1.0 - e, e, 2.0 * e, 1.0 - 2.0 * e];
        let p = stationary_distribution(&q, 2, Some(&[0.5, 0.5])).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-6);
        assert!(residual(&q, &p) <= STATIONARY_TOL);
    }

    #[test]
    fn updates_keep_the_residual_small() {
        let mut l = SwapLearner::new(3, 1000);
        for t in 0..500 {
            l.update(t % 3, if t % 5 == 0 { 1.0 } else { 0.0 }).unwrap();
            assert!(l.residual() <= STATIONARY_TOL);
            assert!((l.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
