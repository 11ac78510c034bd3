//! One episode of play under bandit feedback.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::{Game, RewardNoise};
use crate::policy::{JointPolicy, PolicyCursor};

/// Chooses every player's action during an episode and receives each
/// player's own realized reward. Controllers own their randomness; the
/// environment's rng only drives transitions and reward noise.
pub trait Controller {
    fn begin_episode(&mut self);

    /// Writes one action per player for step `h` in state `s`.
    fn act(&mut self, h: usize, s: usize, out: &mut [usize]);

    /// Feedback for step `h`: the joint action played and each player's reward.
    fn observe(&mut self, h: usize, s: usize, actions: &[usize], rewards: &[f64]);

    fn end_episode(&mut self) {}

    /// The Markov joint policy this episode is played with, valid after
    /// [`Controller::begin_episode`]. Used for regret accounting only.
    fn executed_policy(&self) -> Arc<JointPolicy>;
}

/// Flat per-step record: `states[h]`, `actions[h * m + i]`, `rewards[h * m + i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub players: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    /// Sum of player `i`'s realized rewards.
    pub fn return_of(&self, player: usize) -> f64 {
        self.rewards.iter().skip(player).step_by(self.players).sum()
    }
}

/// Plays one episode of `g` from its initial state.
pub fn sample_episode<R: Rng + ?Sized>(g: &Game, controller: &mut dyn Controller, rng: &mut R) -> Result<Trajectory> {
    let shape = g.shape();
    let (n_h, m) = (shape.horizon(), shape.players());
    let mut traj = Trajectory {
        players: m,
        states: Vec::with_capacity(n_h),
        actions: vec![0; n_h * m],
        rewards: vec![0.0; n_h * m],
    };
    controller.begin_episode();
    let mut s = g.initial_state();
    for h in 0..n_h {
        traj.states.push(s);
        let actions = &mut traj.actions[h * m..(h + 1) * m];
        controller.act(h, s, actions);
        for (i, &a) in actions.iter().enumerate() {
            if a >= shape.num_actions(i) {
                return Err(Error::ActionOutOfRange {
                    player: i,
                    step: h,
                    action: a,
                    available: shape.num_actions(i),
                });
            }
        }
        let joint = shape.encode(actions);
        let rewards = &mut traj.rewards[h * m..(h + 1) * m];
        for (r, &mean) in rewards.iter_mut().zip(g.rewards_at(h, s, joint)) {
            *r = match g.noise() {
                RewardNoise::Deterministic => mean,
                RewardNoise::Bernoulli => {
                    if rng.random::<f64>() < mean {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
        controller.observe(h, s, &traj.actions[h * m..(h + 1) * m], &traj.rewards[h * m..(h + 1) * m]);
        if h + 1 < n_h && shape.states() > 1 {
            s = crate::policy::sample_index(g.transition(h, s, joint), rng);
        }
    }
    controller.end_episode();
    Ok(traj)
}

/// Follows a fixed joint policy, with its own rng for action sampling.
#[derive(Debug, Clone)]
pub struct PolicyController<R> {
    policy: Arc<JointPolicy>,
    cursor: PolicyCursor,
    rng: R,
}

impl<R: Rng> PolicyController<R> {
    pub fn new(policy: Arc<JointPolicy>, rng: R) -> Self {
        Self {
            policy,
            cursor: PolicyCursor::default(),
            rng,
        }
    }

    pub fn policy(&self) -> &Arc<JointPolicy> {
        &self.policy
    }
}

impl<R: Rng> Controller for PolicyController<R> {
    fn begin_episode(&mut self) {
        self.cursor = PolicyCursor::begin(&self.policy, &mut self.rng);
    }

    fn act(&mut self, h: usize, s: usize, out: &mut [usize]) {
        self.cursor.sample(&self.policy, h, s, &mut self.rng, out);
    }

    fn observe(&mut self, _h: usize, _s: usize, _actions: &[usize], _rewards: &[f64]) {}

    fn executed_policy(&self) -> Arc<JointPolicy> {
        Arc::clone(&self.policy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::families;
    use crate::policy::ProductPolicy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic_noise_returns_the_mean() {
        let g = families::chicken().with_noise(RewardNoise::Deterministic);
        let pi = Arc::new(ProductPolicy::pure(g.shape(), &[1, 0]).into());
        let mut ctl = PolicyController::new(pi, ChaCha8Rng::seed_from_u64(1));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = sample_episode(&g, &mut ctl, &mut rng).unwrap();
        assert_eq!(t.rewards, vec![0.7, 0.3]);
        assert_eq!(t.actions, vec![1, 0]);
    }

    #[test]
    fn bernoulli_half_mean_concentrates() {
        let g = crate::game::Game::matrix(&[1], vec![0.5], RewardNoise::Bernoulli).unwrap();
        let pi = Arc::new(ProductPolicy::uniform(g.shape()).into());
        let mut ctl = PolicyController::new(pi, ChaCha8Rng::seed_from_u64(1));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 100_000;
        let total: f64 = (0..n)
            .map(|_| sample_episode(&g, &mut ctl, &mut rng).unwrap().rewards[0])
            .sum();
        assert!((total / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn same_seed_same_trajectory() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = families::random_markov(3, 3, &[2, 3], &mut rng);
        let pi: Arc<JointPolicy> = Arc::new(ProductPolicy::uniform(g.shape()).into());
        let run = || {
            let mut ctl = PolicyController::new(Arc::clone(&pi), ChaCha8Rng::seed_from_u64(7));
            let mut env_rng = ChaCha8Rng::seed_from_u64(8);
            (0..50)
                .map(|_| sample_episode(&g, &mut ctl, &mut env_rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    struct Bad;
    impl Controller for Bad {
        fn begin_episode(&mut self) {}
        fn act(&mut self, _h: usize, _s: usize, out: &mut [usize]) {
            out.fill(5);
        }
        fn observe(&mut self, _: usize, _: usize, _: &[usize], _: &[f64]) {}
        fn executed_policy(&self) -> Arc<JointPolicy> {
            unreachable!()
        }
    }

    #[test]
    fn out_of_range_actions_are_errors() {
        let g = families::matching_pennies();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_episode(&g, &mut Bad, &mut rng),
            Err(Error::ActionOutOfRange { player: 0, action: 5, .. })
        ));
    }
}
