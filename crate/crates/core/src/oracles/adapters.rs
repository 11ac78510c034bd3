//! Single-agent views of a multi-agent stream in which everybody but one
//! player follows a fixed joint policy.

use std::sync::Arc;

use rand::RngCore;

use crate::env::MultiAgentEnv;
use crate::episode::Controller;
use crate::error::Result;
use crate::game::Game;
use crate::mdp::{Agent, SingleAgentEnv, TabularMdp};
use crate::policy::{JointPolicy, Observation, PolicyCursor, PolicyError, ResponseRule};

/// What the deviating player observes at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ObservationMode {
    /// Observation `s`: the induced MDP of a best response.
    State,
    /// Observation `s * A_i + b`, `b` the action the policy recommends to the
    /// player: the extended MDP of a strategy modification.
    Recommendation,
}

impl ObservationMode {
    pub fn observations(self, states: usize, actions: usize) -> usize {
        match self {
            ObservationMode::State => states,
            ObservationMode::Recommendation => states * actions,
        }
    }

    fn rule_observation(self) -> Observation {
        match self {
            ObservationMode::State => Observation::State,
            ObservationMode::Recommendation => Observation::StateRecommendation,
        }
    }
}

const EXEC_CACHE: usize = 16;

/// Remembers the executed joint policy for recently used plans so that a
/// repeated plan maps to the same policy object.
#[derive(Debug, Clone, Default)]
pub(crate) struct ExecutedCache {
    entries: Vec<(usize, Vec<usize>, Arc<JointPolicy>)>,
}

impl ExecutedCache {
    pub(crate) fn get(
        &mut self,
        policy: &JointPolicy,
        player: usize,
        mode: ObservationMode,
        plan: &[usize],
    ) -> Arc<JointPolicy> {
        if let Some(pos) = self.entries.iter().position(|(i, p, _)| *i == player && p == plan) {
            let entry = self.entries.remove(pos);
            let out = Arc::clone(&entry.2);
            self.entries.insert(0, entry);
            return out;
        }
        let shape = policy.shape();
        let rule = ResponseRule::deterministic(
            mode.rule_observation(),
            shape.horizon(),
            shape.states(),
            shape.num_actions(player),
            plan,
        );
        let exec = Arc::new(policy.deviate(player, &rule));
        self.entries.insert(0, (player, plan.to_vec(), Arc::clone(&exec)));
        self.entries.truncate(EXEC_CACHE);
        exec
    }
}

/// Controller for one episode in which `player` is driven by `agent` and the
/// others follow `policy`.
pub(crate) struct DeviationController<'a> {
    pub policy: &'a Arc<JointPolicy>,
    pub player: usize,
    pub mode: ObservationMode,
    pub agent: &'a mut dyn Agent,
    pub rng: &'a mut dyn RngCore,
    pub cache: &'a mut ExecutedCache,
    pub cursor: PolicyCursor,
    pub executed: Option<Arc<JointPolicy>>,
    /// `(h, obs, action, reward)` waiting for the next observation.
    pub pending: Option<(usize, usize, usize, f64)>,
}

impl<'a> DeviationController<'a> {
    pub fn new(
        policy: &'a Arc<JointPolicy>,
        player: usize,
        mode: ObservationMode,
        agent: &'a mut dyn Agent,
        rng: &'a mut dyn RngCore,
        cache: &'a mut ExecutedCache,
    ) -> Self {
        Self {
            policy,
            player,
            mode,
            agent,
            rng,
            cache,
            cursor: PolicyCursor::default(),
            executed: None,
            pending: None,
        }
    }
}

impl Controller for DeviationController<'_> {
    fn begin_episode(&mut self) {
        self.cursor = PolicyCursor::begin(self.policy, &mut *self.rng);
        self.agent.begin_episode();
        self.pending = None;
        // Agents without an explicit plan are accounted as following the policy.
        self.executed = Some(match self.agent.plan() {
            Some(plan) => self.cache.get(self.policy, self.player, self.mode, plan),
            None => Arc::clone(self.policy),
        });
    }

    fn act(&mut self, h: usize, s: usize, out: &mut [usize]) {
        self.cursor.sample(self.policy, h, s, &mut *self.rng, out);
        let n_a = self.policy.shape().num_actions(self.player);
        let obs = match self.mode {
            ObservationMode::State => s,
            ObservationMode::Recommendation => s * n_a + out[self.player],
        };
        if let Some((ph, po, pa, pr)) = self.pending.take() {
            self.agent.observe(ph, po, pa, pr, Some(obs));
        }
        let a = self.agent.act(h, obs);
        out[self.player] = a;
        self.pending = Some((h, obs, a, f64::NAN));
    }

    fn observe(&mut self, _h: usize, _s: usize, _actions: &[usize], rewards: &[f64]) {
        if let Some(p) = self.pending.as_mut() {
            p.3 = rewards[self.player];
        }
    }

    fn end_episode(&mut self) {
        if let Some((h, o, a, r)) = self.pending.take() {
            self.agent.observe(h, o, a, r, None);
        }
        self.agent.end_episode();
    }

    fn executed_policy(&self) -> Arc<JointPolicy> {
        Arc::clone(self.executed.as_ref().expect("episode begun"))
    }
}

/// A multi-agent stream seen by one deviating player.
pub struct DeviationAdapter<'e> {
    env: &'e mut dyn MultiAgentEnv,
    policy: Arc<JointPolicy>,
    player: usize,
    mode: ObservationMode,
    rng: Box<dyn RngCore + 'e>,
    cache: ExecutedCache,
    episodes: usize,
}

impl DeviationAdapter<'_> {
    /// Multi-agent episodes consumed so far; one per learner episode.
    pub fn episodes(&self) -> usize {
        self.episodes
    }
}

impl SingleAgentEnv for DeviationAdapter<'_> {
    fn horizon(&self) -> usize {
        self.env.shape().horizon()
    }

    fn observations(&self) -> usize {
        let shape = self.env.shape();
        self.mode.observations(shape.states(), shape.num_actions(self.player))
    }

    fn actions(&self) -> usize {
        self.env.shape().num_actions(self.player)
    }

    fn run_episode(&mut self, agent: &mut dyn Agent) -> Result<()> {
        let mut ctl = DeviationController::new(
            &self.policy,
            self.player,
            self.mode,
            agent,
            &mut *self.rng,
            &mut self.cache,
        );
        self.env.run_episode(&mut ctl)?;
        self.episodes += 1;
        Ok(())
    }
}

/// Player `player` observes `(h, s)` while the others follow `policy`.
pub fn best_response_env_adapter<'e, R: RngCore + 'e>(
    env: &'e mut dyn MultiAgentEnv,
    policy: Arc<JointPolicy>,
    player: usize,
    rng: R,
) -> DeviationAdapter<'e> {
    DeviationAdapter {
        env,
        policy,
        player,
        mode: ObservationMode::State,
        rng: Box::new(rng),
        cache: ExecutedCache::default(),
        episodes: 0,
    }
}

/// Player `player` observes `(h, s)` and its recommended action `b`; the
/// others follow the recommendation drawn jointly with `b`.
pub fn modification_env_adapter<'e, R: RngCore + 'e>(
    env: &'e mut dyn MultiAgentEnv,
    policy: Arc<JointPolicy>,
    player: usize,
    rng: R,
) -> DeviationAdapter<'e> {
    DeviationAdapter {
        env,
        policy,
        player,
        mode: ObservationMode::Recommendation,
        rng: Box::new(rng),
        cache: ExecutedCache::default(),
        episodes: 0,
    }
}

fn deviation_table(g: &Game, pi: &JointPolicy) -> std::result::Result<crate::policy::CorrelatedPolicy, PolicyError> {
    if pi.shape() != g.shape() {
        return Err(PolicyError::ShapeMismatch);
    }
    if matches!(pi, JointPolicy::Mixture(_)) && g.shape().horizon() > 1 {
        return Err(PolicyError::Unsupported(
            "deviations against an episode-level mixture need horizon one".into(),
        ));
    }
    Ok(pi.to_correlated())
}

/// The MDP player `player` faces when everybody else follows `pi`.
pub fn induced_mdp(g: &Game, pi: &JointPolicy, player: usize) -> std::result::Result<TabularMdp, PolicyError> {
    let table = deviation_table(g, pi)?;
    let shape = g.shape();
    let (n_h, n_s, n_j, n_a) = (shape.horizon(), shape.states(), shape.joint_actions(), shape.num_actions(player));
    let mut transitions = vec![0.0; n_h * n_s * n_a * n_s];
    let mut rewards = vec![0.0; n_h * n_s * n_a];
    for h in 0..n_h {
        for s in 0..n_s {
            let mut others = vec![0.0; n_j];
            for (j, &p) in table.dist(h, s).iter().enumerate() {
                others[shape.others_key(j, player)] += p;
            }
            for a in 0..n_a {
                let row = (h * n_s + s) * n_a + a;
                for (key, &mu) in others.iter().enumerate() {
                    if mu == 0.0 {
                        continue;
                    }
                    let j = shape.with_action(key, player, a);
                    rewards[row] += mu * g.reward(h, s, j, player);
                    for (t, p) in g.transition(h, s, j).iter().enumerate() {
                        transitions[row * n_s + t] += mu * p;
                    }
                }
            }
        }
    }
    let mut initial = vec![0.0; n_s];
    initial[g.initial_state()] = 1.0;
    Ok(TabularMdp {
        horizon: n_h,
        states: n_s,
        actions: n_a,
        initial,
        transitions,
        rewards,
    })
}

/// The extended MDP over `(s, b)`, state index `s * A_i + b`.
///
/// From `(s, b)` with action `a`, the others' actions are drawn from `pi`
/// conditioned on recommending `b` to the player, the game moves to `s'`,
/// and the next recommendation is drawn from `pi`'s marginal at `s'`.
/// Recommendations `pi` never makes lead nowhere: reward 0 and a uniform
/// next state.
pub fn extended_mdp(g: &Game, pi: &JointPolicy, player: usize) -> std::result::Result<TabularMdp, PolicyError> {
    let table = deviation_table(g, pi)?;
    let shape = g.shape();
    let (n_h, n_s, n_a) = (shape.horizon(), shape.states(), shape.num_actions(player));
    let n_x = n_s * n_a;
    let marginal = |h: usize, s: usize| -> Vec<f64> {
        let mut m = vec![0.0; n_a];
        for (j, &p) in table.dist(h, s).iter().enumerate() {
            m[shape.action_of(j, player)] += p;
        }
        m
    };
    let mut transitions = vec![0.0; n_h * n_x * n_a * n_x];
    let mut rewards = vec![0.0; n_h * n_x * n_a];
    for h in 0..n_h {
        let next_marginals: Vec<Vec<f64>> = if h + 1 < n_h {
            (0..n_s).map(|s| marginal(h + 1, s)).collect()
        } else {
            vec![vec![1.0 / n_a as f64; n_a]; n_s]
        };
        for s in 0..n_s {
            let rec = marginal(h, s);
            for b in 0..n_a {
                let x = s * n_a + b;
                for a in 0..n_a {
                    let row = (h * n_x + x) * n_a + a;
                    let mut next_state = vec![0.0; n_s];
                    if rec[b] > 0.0 {
                        for (j, &p) in table.dist(h, s).iter().enumerate() {
                            if p == 0.0 || shape.action_of(j, player) != b {
                                continue;
                            }
                            let w = p / rec[b];
                            let executed = shape.with_action(j, player, a);
                            rewards[row] += w * g.reward(h, s, executed, player);
                            for (t, q) in g.transition(h, s, executed).iter().enumerate() {
                                next_state[t] += w * q;
                            }
                        }
                    } else {
                        next_state.iter_mut().for_each(|v| *v = 1.0 / n_s as f64);
                    }
                    for (t, &q) in next_state.iter().enumerate() {
                        for (b2, &r2) in next_marginals[t].iter().enumerate() {
                            transitions[row * n_x + t * n_a + b2] += q * r2;
                        }
                    }
                }
            }
        }
    }
    let mut initial = vec![0.0; n_x];
    let s0 = g.initial_state();
    for (b, p) in marginal(0, s0).into_iter().enumerate() {
        initial[s0 * n_a + b] = p;
    }
    Ok(TabularMdp {
        horizon: n_h,
        states: n_x,
        actions: n_a,
        initial,
        transitions,
        rewards,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::learn_op;
    use crate::dp::exact_best_modification;
    use crate::env::StationaryEnv;
    use crate::game::families;
    use crate::policy::{MixturePolicy, ProductPolicy};
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn induced_arms_against_a_point_mass() {
        let g = families::chicken();
        let pi: JointPolicy = ProductPolicy::pure(g.shape(), &[0, 1]).into();
        let mdp = induced_mdp(&g, &pi, 0).unwrap();
        // column 1 of player 0's payoffs
        assert_eq!(mdp.rewards, vec![0.3, 0.0]);
    }

    #[test]
    fn induced_arms_against_uniform_are_row_averages() {
        let g = families::prisoners_dilemma();
        let pi: JointPolicy = ProductPolicy::uniform(g.shape()).into();
        let mdp = induced_mdp(&g, &pi, 0).unwrap();
        assert!((mdp.rewards[0] - 0.3).abs() < 1e-15);
        assert!((mdp.rewards[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn chicken_extended_mdp_value() {
        let g = families::chicken();
        let shape = g.shape();
        let pi: JointPolicy = MixturePolicy::uniform(vec![
            ProductPolicy::pure(shape, &[1, 0]),
            ProductPolicy::pure(shape, &[0, 1]),
        ])
        .unwrap()
        .into();
        for i in 0..2 {
            let v = extended_mdp(&g, &pi, i).unwrap().solve().value;
            assert!((v - 0.5).abs() < 1e-12);
            let bm = exact_best_modification(&g, &pi, i).unwrap().value;
            assert!((v - bm).abs() < 1e-12);
        }
    }

    #[test]
    fn adapter_spends_one_stream_episode_per_learner_episode() {
        let g = families::prisoners_dilemma();
        let pi: Arc<JointPolicy> = Arc::new(ProductPolicy::pure(g.shape(), &[0, 0]).into());
        let mut env = StationaryEnv::new(g, SimRng::seed_from_u64(1));
        let mut adapter = best_response_env_adapter(&mut env, pi, 0, SimRng::seed_from_u64(2));
        let out = learn_op(&mut adapter, 0.2, 0.1).unwrap();
        let used = adapter.episodes();
        drop(adapter);
        assert_eq!(out.action(0, 0), 1);
        assert_eq!(env.episodes_done(), used);
        assert_eq!(used as u64, crate::bandit::pac_budget(1, 1, 2, 0.2, 0.1));
    }
}
