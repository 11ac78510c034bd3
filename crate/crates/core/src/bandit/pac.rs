use crate::error::Result;
use crate::mdp::{Agent, SingleAgentEnv};

/// Episode budget `ceil(2 H^3 S A ln(2 S A H / delta) / eps^2)`.
///
/// For a bandit (`H = S = 1`) this is `ceil(2 A ln(2A / delta) / eps^2)`:
/// with `n / A` pulls per arm, Hoeffding plus a union bound over the `A`
/// arms puts every empirical mean within `eps / 2` with probability `1 - delta`.
pub fn pac_budget(horizon: usize, observations: usize, actions: usize, eps: f64, delta: f64) -> u64 {
    let (h, s, a) = (horizon as f64, observations as f64, actions as f64);
    let n = 2.0 * h.powi(3) * s * a * (2.0 * s * a * h / delta).ln() / (eps * eps);
    (n.ceil() as u64).max(1)
}

/// Additive drift sensitivity of [`learn_op`]'s output: `2H`.
pub fn pac_drift_constant(horizon: usize) -> f64 {
    2.0 * horizon as f64
}

/// A deterministic policy per `(h, obs)`, indexed `h * O + obs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearnedPolicy {
    pub observations: usize,
    pub actions: Vec<usize>,
}

impl LearnedPolicy {
    pub fn action(&self, h: usize, obs: usize) -> usize {
        self.actions[h * self.observations + obs]
    }
}

/// Resumable PAC learner.
///
/// With horizon one it explores arms in a global round-robin and returns the
/// per-observation empirical argmax. With longer horizons it runs optimistic
/// value iteration with Hoeffding bonuses and returns the greedy policy of
/// the empirical model. Ties go to the lowest action.
#[derive(Debug, Clone)]
pub struct PacLearner {
    horizon: usize,
    observations: usize,
    actions: usize,
    budget: u64,
    episodes: u64,
    log_term: f64,
    /// Visit counts and reward sums per `(h, obs, a)`.
    visits: Vec<u64>,
    reward_sums: Vec<f64>,
    /// Transition counts per `(h, obs, a, obs')`.
    next_counts: Vec<u64>,
    /// Policy for the current episode, indexed `h * O + obs`.
    plan: Vec<usize>,
}

impl PacLearner {
    pub fn new(horizon: usize, observations: usize, actions: usize, eps: f64, delta: f64) -> Self {
        let budget = pac_budget(horizon, observations, actions, eps, delta);
        let cells = horizon * observations * actions;
        let sah = (observations * actions * horizon) as f64;
        Self {
            horizon,
            observations,
            actions,
            budget,
            episodes: 0,
            log_term: (2.0 * sah * budget as f64 / delta).ln(),
            visits: vec![0; cells],
            reward_sums: vec![0.0; cells],
            next_counts: if horizon > 1 {
                vec![0; cells * observations]
            } else {
                Vec::new()
            },
            plan: vec![0; horizon * observations],
        }
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn is_done(&self) -> bool {
        self.episodes >= self.budget
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn num_actions(&self) -> usize {
        self.actions
    }

    /// The deterministic rule the learner follows this episode, indexed
    /// `h * O + obs`. Valid after `begin_episode`.
    pub fn current_plan(&self) -> &[usize] {
        &self.plan
    }

    fn cell(&self, h: usize, obs: usize, a: usize) -> usize {
        (h * self.observations + obs) * self.actions + a
    }

    /// Backward induction on the empirical model, with `bonus` scaling the
    /// Hoeffding term (0 for the plain greedy policy).
    fn plan_with(&self, bonus: f64) -> Vec<usize> {
        let (n_h, n_o, n_a) = (self.horizon, self.observations, self.actions);
        let mut plan = vec![0; n_h * n_o];
        let mut next = vec![0.0; n_o];
        let mut cur = vec![0.0; n_o];
        for h in (0..n_h).rev() {
            let span = (n_h - h) as f64;
            for o in 0..n_o {
                let mut best = f64::NEG_INFINITY;
                for a in 0..n_a {
                    let c = self.cell(h, o, a);
                    let n = self.visits[c];
                    let q = if n == 0 {
                        if bonus > 0.0 {
                            span
                        } else {
                            f64::NEG_INFINITY
                        }
                    } else {
                        let nf = n as f64;
                        let mut q = self.reward_sums[c] / nf;
                        if h + 1 < n_h {
                            let counts = &self.next_counts[c * n_o..(c + 1) * n_o];
                            q += counts.iter().zip(&next).map(|(&k, v)| k as f64 / nf * v).sum::<f64>();
                        }
                        if bonus > 0.0 {
                            (q + bonus * span * (self.log_term / (2.0 * nf)).sqrt()).min(span)
                        } else {
                            q
                        }
                    };
                    if q > best {
                        best = q;
                        plan[h * n_o + o] = a;
                    }
                }
                cur[o] = if best.is_finite() { best } else { 0.0 };
            }
            std::mem::swap(&mut next, &mut cur);
        }
        plan
    }

    /// Final policy: empirical argmax / greedy on the empirical model.
    pub fn output(&self) -> LearnedPolicy {
        LearnedPolicy {
            observations: self.observations,
            actions: self.plan_with(0.0),
        }
    }
}

impl Agent for PacLearner {
    fn begin_episode(&mut self) {
        if self.horizon == 1 {
            let a = (self.episodes % self.actions as u64) as usize;
            self.plan.iter_mut().for_each(|x| *x = a);
        } else {
            self.plan = self.plan_with(1.0);
        }
    }

    fn act(&mut self, h: usize, obs: usize) -> usize {
        self.plan[h * self.observations + obs]
    }

    fn observe(&mut self, h: usize, obs: usize, action: usize, reward: f64, next: Option<usize>) {
        let c = self.cell(h, obs, action);
        self.visits[c] += 1;
        self.reward_sums[c] += reward;
        if let Some(n) = next {
            self.next_counts[c * self.observations + n] += 1;
        }
    }

    fn end_episode(&mut self) {
        self.episodes += 1;
    }

    fn plan(&self) -> Option<&[usize]> {
        Some(&self.plan)
    }
}

/// Runs a fresh [`PacLearner`] on `env` for its full budget.
pub fn learn_op(env: &mut dyn SingleAgentEnv, eps: f64, delta: f64) -> Result<LearnedPolicy> {
    let mut learner = PacLearner::new(env.horizon(), env.observations(), env.actions(), eps, delta);
    while !learner.is_done() {
        env.run_episode(&mut learner)?;
    }
    Ok(learner.output())
}
