use std::sync::Arc;

use rand::Rng;

use super::{OracleProfile, ProfileKind};
use crate::bandit::{Exp3, SwapLearner};
use crate::env::MultiAgentEnv;
use crate::episode::Controller;
use crate::error::{Error, Result};
use crate::game::Shape;
use crate::policy::{JointPolicy, MixturePolicy, ProductPolicy};

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub policy: Arc<JointPolicy>,
    pub episodes: u64,
    pub budget: u64,
    /// The stream ended before the budget was spent.
    pub truncated: bool,
}

enum Learners {
    External(Vec<Exp3>),
    Swap(Vec<SwapLearner>),
}

impl Learners {
    fn marginal(&self, i: usize) -> &[f64] {
        match self {
            Learners::External(v) => v[i].probabilities(),
            Learners::Swap(v) => v[i].probabilities(),
        }
    }
}

/// Independent per-player bandit learners on a matrix game.
struct SelfPlay<'r, R> {
    shape: Shape,
    learners: Learners,
    rng: &'r mut R,
    current: Arc<JointPolicy>,
    marginals: Vec<Vec<f64>>,
    error: Option<Error>,
}

impl<R: Rng> SelfPlay<'_, R> {
    fn snapshot(&self) -> Vec<Vec<f64>> {
        (0..self.shape.players())
            .map(|i| self.learners.marginal(i).to_vec())
            .collect()
    }
}

impl<R: Rng> Controller for SelfPlay<'_, R> {
    fn begin_episode(&mut self) {
        self.marginals = self.snapshot();
        let product = ProductPolicy::from_marginals(&self.shape, self.marginals.clone())
            .expect("learner distributions are normalized");
        self.current = Arc::new(product.into());
    }

    fn act(&mut self, _h: usize, _s: usize, out: &mut [usize]) {
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = match &self.learners {
                Learners::External(v) => v[i].select(self.rng),
                Learners::Swap(v) => v[i].select(self.rng),
            };
        }
    }

    fn observe(&mut self, _h: usize, _s: usize, actions: &[usize], rewards: &[f64]) {
        for (i, (&a, &r)) in actions.iter().zip(rewards).enumerate() {
            let res = match &mut self.learners {
                Learners::External(v) => v[i].update(a, r),
                Learners::Swap(v) => v[i].update(a, r),
            };
            if let Err(e) = res {
                self.error.get_or_insert(e);
            }
        }
    }

    fn executed_policy(&self) -> Arc<JointPolicy> {
        Arc::clone(&self.current)
    }
}

/// Runs the profile's self-play learners for `C_1(eps)` episodes and returns
/// the averaged policy: the product of average marginals for zero-sum NE,
/// the episode-level mixture of per-round products for CCE and CE.
pub fn learn_eq<R: Rng>(
    env: &mut dyn MultiAgentEnv,
    profile: &OracleProfile,
    eps: f64,
    rng: &mut R,
) -> Result<LearnOutcome> {
    let shape = env.shape().clone();
    if shape.horizon() != 1 || shape.states() != 1 {
        return Err(Error::Structure("built-in learners are for matrix games only".into()));
    }
    let budget = profile.learn_budget(eps);
    let m = shape.players();
    let learners = match profile.kind {
        ProfileKind::NeZeroSum | ProfileKind::Cce => {
            Learners::External((0..m).map(|i| Exp3::with_horizon(shape.num_actions(i), budget)).collect())
        }
        ProfileKind::Ce => {
            Learners::Swap((0..m).map(|i| SwapLearner::new(shape.num_actions(i), budget)).collect())
        }
    };
    let uniform = Arc::new(JointPolicy::Product(ProductPolicy::uniform(&shape)));
    let mut play = SelfPlay {
        shape: shape.clone(),
        learners,
        rng,
        current: uniform,
        marginals: Vec::new(),
        error: None,
    };
    let mut sums: Vec<Vec<f64>> = shape.actions().iter().map(|&a| vec![0.0; a]).collect();
    let mut rounds: Vec<ProductPolicy> = Vec::new();
    let mut episodes = 0;
    let mut truncated = false;
    while episodes < budget {
        match env.run_episode(&mut play) {
            Ok(_) => {}
            Err(e) if e.is_exhausted() => {
                truncated = true;
                break;
            }
            Err(e) => return Err(e),
        }
        if let Some(e) = play.error.take() {
            return Err(e);
        }
        episodes += 1;
        match profile.kind {
            ProfileKind::NeZeroSum => {
                for (acc, m) in sums.iter_mut().zip(&play.marginals) {
                    acc.iter_mut().zip(m).for_each(|(a, p)| *a += p);
                }
            }
            _ => match play.current.as_ref() {
                JointPolicy::Product(p) => rounds.push(p.clone()),
                _ => unreachable!("self-play always executes a product policy"),
            },
        }
    }
    let policy = if episodes == 0 {
        JointPolicy::Product(ProductPolicy::uniform(&shape))
    } else {
        match profile.kind {
            ProfileKind::NeZeroSum => {
                let marginals = sums
                    .into_iter()
                    .map(|s| {
                        let total: f64 = s.iter().sum();
                        s.into_iter().map(|x| x / total).collect()
                    })
                    .collect();
                ProductPolicy::from_marginals(&shape, marginals)?.into()
            }
            _ => MixturePolicy::uniform(rounds)?.into(),
        }
    };
    Ok(LearnOutcome {
        policy: Arc::new(policy),
        episodes,
        budget,
        truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{gap_value, EqKind};
    use crate::env::StationaryEnv;
    use crate::game::families;
    use crate::oracles::profile_for;
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn consumes_exactly_the_budget() {
        let g = families::matching_pennies();
        let p = profile_for(ProfileKind::NeZeroSum, g.shape(), 0.1).unwrap();
        let mut env = StationaryEnv::new(g, SimRng::seed_from_u64(1));
        let mut rng = SimRng::seed_from_u64(2);
        let out = learn_eq(&mut env, &p, 0.5, &mut rng).unwrap();
        assert_eq!(out.episodes, p.learn_budget(0.5));
        assert_eq!(env.episodes_done() as u64, out.episodes);
        assert!(!out.truncated);
    }

    #[test]
    fn truncation_is_flagged() {
        let g = families::chicken();
        let p = profile_for(ProfileKind::Cce, g.shape(), 0.1).unwrap();
        let mut env = StationaryEnv::new(g, SimRng::seed_from_u64(1)).with_limit(10);
        let out = learn_eq(&mut env, &p, 0.1, &mut SimRng::seed_from_u64(2)).unwrap();
        assert!(out.truncated);
        assert_eq!(out.episodes, 10);
    }

    #[test]
    fn dominant_actions_receive_most_mass() {
        // Both players prefer action 1 regardless of the other.
        let g = families::prisoners_dilemma();
        let p = profile_for(ProfileKind::Cce, g.shape(), 0.1).unwrap();
        let mut env = StationaryEnv::new(g.clone(), SimRng::seed_from_u64(3));
        let out = learn_eq(&mut env, &p, 0.1, &mut SimRng::seed_from_u64(4)).unwrap();
        let joint = out.policy.to_correlated();
        assert!(joint.dist(0, 0)[3] > 0.5);
        assert!(gap_value(&g, &out.policy, EqKind::Cce).unwrap() <= 0.1);
    }
}
