//! Exact dynamic-programming oracles: values, best responses, best strategy
//! modifications, and equilibrium gaps.

use crate::game::Game;
use crate::policy::{
    CorrelatedPolicy, JointPolicy, Observation, PolicyError, ProductPolicy, ResponseRule,
    StrategyModification,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EqKind {
    /// Nash equilibrium; only defined for product policies.
    Ne,
    Cce,
    Ce,
}

impl EqKind {
    pub fn name(self) -> &'static str {
        match self {
            EqKind::Ne => "ne",
            EqKind::Cce => "cce",
            EqKind::Ce => "ce",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ne" => Some(EqKind::Ne),
            "cce" => Some(EqKind::Cce),
            "ce" => Some(EqKind::Ce),
            _ => None,
        }
    }
}

fn check_shape(g: &Game, pi: &JointPolicy) -> Result<(), PolicyError> {
    if pi.shape() != g.shape() {
        return Err(PolicyError::ShapeMismatch);
    }
    Ok(())
}

/// `R_i(h, s, j) + sum_s' P_h(s' | s, j) next[s']`.
#[inline]
fn backup(g: &Game, h: usize, s: usize, j: usize, i: usize, next: &[f64]) -> f64 {
    let p = g.transition(h, s, j);
    g.reward(h, s, j, i) + p.iter().zip(next).map(|(a, b)| a * b).sum::<f64>()
}

/// Joint-distribution source for a stationary-in-episode policy.
enum Dist<'a> {
    Product(&'a ProductPolicy),
    Correlated(&'a CorrelatedPolicy),
}

impl Dist<'_> {
    fn fill(&self, h: usize, s: usize, out: &mut [f64]) {
        match self {
            Dist::Product(p) => p.joint_dist_into(h, s, out),
            Dist::Correlated(c) => out.copy_from_slice(c.dist(h, s)),
        }
    }
}

fn values_of(g: &Game, dist: Dist<'_>) -> Vec<f64> {
    let shape = g.shape();
    let (n_s, m, n_j) = (shape.states(), shape.players(), shape.joint_actions());
    let mut next = vec![0.0; n_s * m];
    let mut cur = vec![0.0; n_s * m];
    let mut buf = vec![0.0; n_j];
    for h in (0..shape.horizon()).rev() {
        for s in 0..n_s {
            dist.fill(h, s, &mut buf);
            let out = &mut cur[s * m..(s + 1) * m];
            out.iter_mut().for_each(|x| *x = 0.0);
            for (j, &pj) in buf.iter().enumerate() {
                if pj == 0.0 {
                    continue;
                }
                let p = g.transition(h, s, j);
                let r = g.rewards_at(h, s, j);
                for i in 0..m {
                    let cont: f64 = p.iter().enumerate().map(|(t, q)| q * next[t * m + i]).sum();
                    out[i] += pj * (r[i] + cont);
                }
            }
        }
        std::mem::swap(&mut next, &mut cur);
    }
    let s0 = g.initial_state();
    next[s0 * m..(s0 + 1) * m].to_vec()
}

/// Exact values `V_i(pi)` for every player. Mixtures are evaluated as the
/// weighted sum of their components' values.
pub fn exact_value(g: &Game, pi: &JointPolicy) -> Result<Vec<f64>, PolicyError> {
    check_shape(g, pi)?;
    Ok(match pi {
        JointPolicy::Product(p) => values_of(g, Dist::Product(p)),
        JointPolicy::Correlated(c) => values_of(g, Dist::Correlated(c)),
        JointPolicy::Mixture(mix) => {
            let mut total = vec![0.0; g.shape().players()];
            for (w, p) in mix.components() {
                for (t, v) in total.iter_mut().zip(values_of(g, Dist::Product(p))) {
                    *t += w * v;
                }
            }
            total
        }
    })
}

/// The per-step joint table the deviation oracles work on.
fn deviation_table(g: &Game, pi: &JointPolicy, what: &str) -> Result<CorrelatedPolicy, PolicyError> {
    if let JointPolicy::Mixture(_) = pi {
        if g.shape().horizon() > 1 {
            return Err(PolicyError::Unsupported(format!(
                "{what} against an episode-level mixture is only defined for horizon one"
            )));
        }
    }
    Ok(pi.to_correlated())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponse {
    /// Deterministic choice per `(h, s)`, indexed `h * S + s`.
    pub actions: Vec<usize>,
    pub value: f64,
}

impl BestResponse {
    pub fn to_rule(&self, g: &Game, player: usize) -> ResponseRule {
        let shape = g.shape();
        ResponseRule::deterministic(
            Observation::State,
            shape.horizon(),
            shape.states(),
            shape.num_actions(player),
            &self.actions,
        )
    }
}

/// Best response of `player` against the others following `pi`, by DP on the
/// induced MDP. Ties go to the lowest action index.
pub fn exact_best_response(g: &Game, pi: &JointPolicy, player: usize) -> Result<BestResponse, PolicyError> {
    check_shape(g, pi)?;
    let table = deviation_table(g, pi, "best response")?;
    Ok(best_response_on(g, &table, player))
}

fn best_response_on(g: &Game, pi: &CorrelatedPolicy, i: usize) -> BestResponse {
    let shape = g.shape();
    let (n_s, n_j, n_a) = (shape.states(), shape.joint_actions(), shape.num_actions(i));
    let mut actions = vec![0; shape.horizon() * n_s];
    let mut next = vec![0.0; n_s];
    let mut cur = vec![0.0; n_s];
    let mut others = vec![0.0; n_j];
    for h in (0..shape.horizon()).rev() {
        for s in 0..n_s {
            others.iter_mut().for_each(|x| *x = 0.0);
            for (j, &pj) in pi.dist(h, s).iter().enumerate() {
                others[shape.others_key(j, i)] += pj;
            }
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..n_a {
                let mut q = 0.0;
                for (key, &mu) in others.iter().enumerate() {
                    if mu != 0.0 {
                        q += mu * backup(g, h, s, shape.with_action(key, i, a), i, &next);
                    }
                }
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            cur[s] = best;
            actions[h * n_s + s] = best_a;
        }
        std::mem::swap(&mut next, &mut cur);
    }
    BestResponse {
        actions,
        value: next[g.initial_state()],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestModification {
    pub modification: StrategyModification,
    pub value: f64,
}

/// Best strategy modification of `player` under `pi`.
///
/// Solves `W_h(s, b) = max_a sum_{j : j_i = b} pi_h(j | s) [R_i(j[i <- a]) +
/// P_h(j[i <- a]) . U_{h+1}]` with `U_h(s) = sum_b W_h(s, b)`, which is the
/// extended-state MDP over `(s, b)` with values left unnormalized by the
/// recommendation probability. Ties go to the lowest action index.
pub fn exact_best_modification(
    g: &Game,
    pi: &JointPolicy,
    player: usize,
) -> Result<BestModification, PolicyError> {
    check_shape(g, pi)?;
    let table = deviation_table(g, pi, "strategy modification")?;
    Ok(best_modification_on(g, &table, player))
}

fn best_modification_on(g: &Game, pi: &CorrelatedPolicy, i: usize) -> BestModification {
    let shape = g.shape();
    let (n_s, n_a) = (shape.states(), shape.num_actions(i));
    let mut modification = StrategyModification::identity(shape, i);
    let mut next = vec![0.0; n_s];
    let mut cur = vec![0.0; n_s];
    let mut q = vec![0.0; n_a * n_a];
    for h in (0..shape.horizon()).rev() {
        for s in 0..n_s {
            // q[b * A + a]: recommendation b, executed a.
            q.iter_mut().for_each(|x| *x = 0.0);
            for (j, &pj) in pi.dist(h, s).iter().enumerate() {
                if pj == 0.0 {
                    continue;
                }
                let b = shape.action_of(j, i);
                for a in 0..n_a {
                    q[b * n_a + a] += pj * backup(g, h, s, shape.with_action(j, i, a), i, &next);
                }
            }
            let mut total = 0.0;
            for b in 0..n_a {
                let row = &q[b * n_a..(b + 1) * n_a];
                let mut best_a = 0;
                for a in 1..n_a {
                    if row[a] > row[best_a] {
                        best_a = a;
                    }
                }
                modification.map[(h * n_s + s) * n_a + b] = best_a;
                total += row[best_a];
            }
            cur[s] = total;
        }
        std::mem::swap(&mut next, &mut cur);
    }
    BestModification {
        modification,
        value: next[g.initial_state()],
    }
}

/// Exploitability of a policy under a game.
#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub values: Vec<f64>,
    pub best_response_values: Vec<f64>,
    pub best_modification_values: Vec<f64>,
    /// Present only for product policies, where it equals `cce_gap`.
    pub ne_gap: Option<f64>,
    pub cce_gap: f64,
    pub ce_gap: f64,
}

impl GapReport {
    pub fn gap(&self, kind: EqKind) -> Option<f64> {
        match kind {
            EqKind::Ne => self.ne_gap,
            EqKind::Cce => Some(self.cce_gap),
            EqKind::Ce => Some(self.ce_gap),
        }
    }
}

fn max_excess(dev: &[f64], base: &[f64]) -> f64 {
    dev.iter()
        .zip(base)
        .map(|(d, v)| d - v)
        .fold(0.0, f64::max)
}

/// Full gap report. Fails with [`PolicyError::NotProduct`] when `kind` is NE
/// and `pi` is not a product policy.
pub fn equilibrium_gap(g: &Game, pi: &JointPolicy, kind: EqKind) -> Result<GapReport, PolicyError> {
    if kind == EqKind::Ne && !pi.is_product() {
        return Err(PolicyError::NotProduct);
    }
    gap_report(g, pi)
}

/// Gap report without a kind restriction.
pub fn gap_report(g: &Game, pi: &JointPolicy) -> Result<GapReport, PolicyError> {
    let values = exact_value(g, pi)?;
    let table = deviation_table(g, pi, "gap")?;
    let m = g.shape().players();
    let best_response_values: Vec<f64> = (0..m).map(|i| best_response_on(g, &table, i).value).collect();
    let best_modification_values: Vec<f64> =
        (0..m).map(|i| best_modification_on(g, &table, i).value).collect();
    let cce_gap = max_excess(&best_response_values, &values);
    // A modification can always imitate a best response, so the CE gap is at
    // least the CCE gap; enforce it against rounding.
    let ce_gap = max_excess(&best_modification_values, &values).max(cce_gap);
    Ok(GapReport {
        ne_gap: pi.is_product().then_some(cce_gap),
        values,
        best_response_values,
        best_modification_values,
        cce_gap,
        ce_gap,
    })
}

/// Just the scalar gap of one kind; cheaper than a full report.
pub fn gap_value(g: &Game, pi: &JointPolicy, kind: EqKind) -> Result<f64, PolicyError> {
    if kind == EqKind::Ne && !pi.is_product() {
        return Err(PolicyError::NotProduct);
    }
    let values = exact_value(g, pi)?;
    let table = deviation_table(g, pi, "gap")?;
    let dev: Vec<f64> = (0..g.shape().players())
        .map(|i| match kind {
            EqKind::Ne | EqKind::Cce => best_response_on(g, &table, i).value,
            EqKind::Ce => best_modification_on(g, &table, i).value,
        })
        .collect();
    Ok(max_excess(&dev, &values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::families;
    use crate::policy::{MixturePolicy, ProductPolicy};

    #[test]
    fn matching_pennies_uniform_is_an_equilibrium() {
        let g = families::matching_pennies();
        let pi: JointPolicy = ProductPolicy::uniform(g.shape()).into();
        let v = exact_value(&g, &pi).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-15 && (v[1] - 0.5).abs() < 1e-15);
        let br = exact_best_response(&g, &pi, 0).unwrap();
        assert!((br.value - 0.5).abs() < 1e-15);
        let rep = equilibrium_gap(&g, &pi, EqKind::Ne).unwrap();
        assert!(rep.ne_gap.unwrap().abs() < 1e-15);
    }

    #[test]
    fn prisoners_dilemma_defection() {
        let g = families::prisoners_dilemma();
        let pi: JointPolicy = ProductPolicy::pure(g.shape(), &[0, 0]).into();
        let br = exact_best_response(&g, &pi, 0).unwrap();
        assert_eq!(br.actions, vec![1]);
        assert!((br.value - 1.0).abs() < 1e-15);
        let rep = equilibrium_gap(&g, &pi, EqKind::Cce).unwrap();
        assert!((rep.cce_gap - 0.4).abs() < 1e-12);
    }

    #[test]
    fn chicken_correlated_policy_is_a_ce() {
        let g = families::chicken();
        let shape = g.shape();
        let pi: JointPolicy = MixturePolicy::uniform(vec![
            ProductPolicy::pure(shape, &[1, 0]),
            ProductPolicy::pure(shape, &[0, 1]),
        ])
        .unwrap()
        .into();
        let rep = gap_report(&g, &pi).unwrap();
        for i in 0..2 {
            assert!((rep.values[i] - 0.5).abs() < 1e-12);
            assert!((rep.best_modification_values[i] - 0.5).abs() < 1e-12);
        }
        assert!(rep.ce_gap < 1e-12 && rep.cce_gap < 1e-12);
        assert_eq!(equilibrium_gap(&g, &pi, EqKind::Ne), Err(PolicyError::NotProduct));
    }

    #[test]
    fn point_mass_modification_equals_best_response() {
        let g = families::prisoners_dilemma();
        let pi: JointPolicy = ProductPolicy::pure(g.shape(), &[0, 1]).into();
        for i in 0..2 {
            let br = exact_best_response(&g, &pi, i).unwrap().value;
            let bm = exact_best_modification(&g, &pi, i).unwrap().value;
            assert!((br - bm).abs() < 1e-15);
        }
    }

    #[test]
    fn mixture_with_long_horizon_is_rejected_for_deviations() {
        let mut rng = rand::rng();
        let g = families::random_markov(2, 2, &[2, 2], &mut rng);
        let shape = g.shape();
        let pi: JointPolicy = MixturePolicy::uniform(vec![
            ProductPolicy::pure(shape, &[1, 0]),
            ProductPolicy::uniform(shape),
        ])
        .unwrap()
        .into();
        assert!(exact_value(&g, &pi).is_ok());
        assert!(matches!(exact_best_response(&g, &pi, 0), Err(PolicyError::Unsupported(_))));
    }
}
