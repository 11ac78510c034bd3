//! Finite-horizon tabular single-agent MDPs.

use rand::Rng;

use crate::error::{Error, Result};
use crate::policy::sample_index;

/// `P` is indexed `((h * S + s) * A + a) * S + s'`, `R` at `(h * S + s) * A + a`,
/// and the initial state is drawn from `initial`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    pub initial: Vec<f64>,
    pub transitions: Vec<f64>,
    pub rewards: Vec<f64>,
}

/// Greedy deterministic policy per `(h, s)` with its value.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    /// Indexed `h * S + s`.
    pub actions: Vec<usize>,
    /// `V_1(s)` for every state.
    pub values: Vec<f64>,
    /// Expected value under the initial distribution.
    pub value: f64,
}

impl TabularMdp {
    pub fn new(
        horizon: usize,
        states: usize,
        actions: usize,
        initial: Vec<f64>,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        let rows = horizon * states * actions;
        if initial.len() != states || transitions.len() != rows * states || rewards.len() != rows {
            return Err(Error::Structure("MDP table lengths do not match its dimensions".into()));
        }
        Ok(Self {
            horizon,
            states,
            actions,
            initial,
            transitions,
            rewards,
        })
    }

    pub fn transition(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let base = ((h * self.states + s) * self.actions + a) * self.states;
        &self.transitions[base..base + self.states]
    }

    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[(h * self.states + s) * self.actions + a]
    }

    /// Optimal values by backward induction; ties go to the lowest action.
    pub fn solve(&self) -> MdpSolution {
        let mut next = vec![0.0; self.states];
        let mut cur = vec![0.0; self.states];
        let mut actions = vec![0; self.horizon * self.states];
        for h in (0..self.horizon).rev() {
            for s in 0..self.states {
                let mut best = f64::NEG_INFINITY;
                for a in 0..self.actions {
                    let q = self.reward(h, s, a)
                        + self.transition(h, s, a).iter().zip(&next).map(|(p, v)| p * v).sum::<f64>();
                    if q > best {
                        best = q;
                        actions[h * self.states + s] = a;
                    }
                }
                cur[s] = best;
            }
            std::mem::swap(&mut next, &mut cur);
        }
        let value = self.initial.iter().zip(&next).map(|(p, v)| p * v).sum();
        MdpSolution {
            actions,
            values: next,
            value,
        }
    }

    /// Value of a deterministic policy indexed `h * S + s`.
    pub fn evaluate(&self, policy: &[usize]) -> f64 {
        let mut next = vec![0.0; self.states];
        for h in (0..self.horizon).rev() {
            let cur: Vec<f64> = (0..self.states)
                .map(|s| {
                    let a = policy[h * self.states + s];
                    self.reward(h, s, a)
                        + self.transition(h, s, a).iter().zip(&next).map(|(p, v)| p * v).sum::<f64>()
                })
                .collect();
            next = cur;
        }
        self.initial.iter().zip(&next).map(|(p, v)| p * v).sum()
    }

    /// Uniform rewards and normalized uniform transitions, initial state 0.
    pub fn random<R: Rng + ?Sized>(horizon: usize, states: usize, actions: usize, rng: &mut R) -> Self {
        let rows = horizon * states * actions;
        let mut transitions = Vec::with_capacity(rows * states);
        for _ in 0..rows {
            let row: Vec<f64> = (0..states).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = row.iter().sum();
            transitions.extend(row.iter().map(|p| p / total));
        }
        let rewards = (0..rows).map(|_| rng.random()).collect();
        let mut initial = vec![0.0; states];
        initial[0] = 1.0;
        Self {
            horizon,
            states,
            actions,
            initial,
            transitions,
            rewards,
        }
    }

    /// Multi-armed bandit with the given mean rewards.
    pub fn bandit(means: &[f64]) -> Self {
        Self {
            horizon: 1,
            states: 1,
            actions: means.len(),
            initial: vec![1.0],
            transitions: vec![1.0; means.len()],
            rewards: means.to_vec(),
        }
    }
}

/// What a single-agent learner does during one episode.
pub trait Agent {
    fn begin_episode(&mut self);
    fn act(&mut self, h: usize, obs: usize) -> usize;
    fn observe(&mut self, h: usize, obs: usize, action: usize, reward: f64, next: Option<usize>);
    fn end_episode(&mut self) {}

    /// The deterministic rule, indexed `h * O + obs`, this episode follows,
    /// when the agent has one.
    fn plan(&self) -> Option<&[usize]> {
        None
    }
}

/// Single-agent episodic environment with finite observations and actions.
pub trait SingleAgentEnv {
    fn horizon(&self) -> usize;
    fn observations(&self) -> usize;
    fn actions(&self) -> usize;
    fn run_episode(&mut self, agent: &mut dyn Agent) -> Result<()>;
}

/// Samples a [`TabularMdp`] with Bernoulli rewards.
#[derive(Debug, Clone)]
pub struct MdpEnv<R> {
    mdp: TabularMdp,
    rng: R,
    limit: Option<usize>,
    done: usize,
}

impl<R: Rng> MdpEnv<R> {
    pub fn new(mdp: TabularMdp, rng: R) -> Self {
        Self {
            mdp,
            rng,
            limit: None,
            done: 0,
        }
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn episodes_done(&self) -> usize {
        self.done
    }
}

impl<R: Rng> SingleAgentEnv for MdpEnv<R> {
    fn horizon(&self) -> usize {
        self.mdp.horizon
    }

    fn observations(&self) -> usize {
        self.mdp.states
    }

    fn actions(&self) -> usize {
        self.mdp.actions
    }

    fn run_episode(&mut self, agent: &mut dyn Agent) -> Result<()> {
        if self.limit.is_some_and(|l| self.done >= l) {
            return Err(Error::Exhausted);
        }
        self.done += 1;
        agent.begin_episode();
        let mut s = sample_index(&self.mdp.initial, &mut self.rng);
        for h in 0..self.mdp.horizon {
            let a = agent.act(h, s);
            if a >= self.mdp.actions {
                return Err(Error::ArmOutOfRange {
                    arm: a,
                    arms: self.mdp.actions,
                });
            }
            let r = if self.rng.random::<f64>() < self.mdp.reward(h, s, a) {
                1.0
            } else {
                0.0
            };
            let next = (h + 1 < self.mdp.horizon).then(|| sample_index(self.mdp.transition(h, s, a), &mut self.rng));
            agent.observe(h, s, a, r, next);
            if let Some(n) = next {
                s = n;
            }
        }
        agent.end_episode();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solve_matches_best_enumerated_policy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mdp = TabularMdp::random(2, 2, 3, &mut rng);
        let sol = mdp.solve();
        let mut best = f64::NEG_INFINITY;
        for code in 0..3usize.pow(4) {
            let policy: Vec<usize> = (0..4).map(|k| (code / 3usize.pow(k)) % 3).collect();
            best = best.max(mdp.evaluate(&policy));
        }
        assert!((best - sol.value).abs() < 1e-12);
        assert!((mdp.evaluate(&sol.actions) - sol.value).abs() < 1e-12);
    }
}
