//! Brute-force reference oracles.
//!
//! Everything here is deliberately naive: values by forward propagation of the
//! state distribution, deviations by enumerating deterministic rules. None of
//! it reuses the backward recursions in `neq_core::dp`.

use neq_core::game::Game;
use neq_core::policy::JointPolicy;

/// Per-`(h, s)` joint distribution table, indexed `(h * S + s) * J + j`,
/// built straight from the policy's raw tables. Mixtures are averaged, which
/// matches the episode-level semantics only for horizon one.
pub fn joint_table(g: &Game, pi: &JointPolicy) -> Vec<f64> {
    let shape = g.shape();
    let cells = shape.horizon() * shape.states();
    let n_j = shape.joint_actions();
    let product = |p: &neq_core::policy::ProductPolicy, out: &mut [f64], weight: f64| {
        for c in 0..cells {
            let (h, s) = (c / shape.states(), c % shape.states());
            for j in 0..n_j {
                let a = shape.decode(j);
                let mut prob = weight;
                for (i, &ai) in a.iter().enumerate() {
                    prob *= p.dist(i, h, s)[ai];
                }
                out[c * n_j + j] += prob;
            }
        }
    };
    let mut out = vec![0.0; cells * n_j];
    match pi {
        JointPolicy::Product(p) => product(p, &mut out, 1.0),
        JointPolicy::Correlated(c) => out.copy_from_slice(c.table()),
        JointPolicy::Mixture(m) => {
            for (w, p) in m.components() {
                product(p, &mut out, *w);
            }
        }
    }
    out
}

/// Player values when everybody follows `table`, except that `player`
/// replaces a recommended action `b` at `(h, s)` with `swap(h, s, b)`.
/// Computed by pushing the state distribution forward through time.
pub fn forward_value<F>(g: &Game, table: &[f64], player: usize, swap: F) -> Vec<f64>
where
    F: Fn(usize, usize, usize) -> usize,
{
    let shape = g.shape();
    let (n_s, n_j, m) = (shape.states(), shape.joint_actions(), shape.players());
    let mut occupancy = vec![0.0; n_s];
    occupancy[g.initial_state()] = 1.0;
    let mut values = vec![0.0; m];
    for h in 0..shape.horizon() {
        let mut next = vec![0.0; n_s];
        for s in 0..n_s {
            let mass = occupancy[s];
            if mass == 0.0 {
                continue;
            }
            for j in 0..n_j {
                let pj = table[(h * n_s + s) * n_j + j];
                if pj == 0.0 {
                    continue;
                }
                let mut a = shape.decode(j);
                a[player] = swap(h, s, a[player]);
                let executed = shape.encode(&a);
                let w = mass * pj;
                for (i, v) in values.iter_mut().enumerate() {
                    *v += w * g.reward(h, s, executed, i);
                }
                for (t, p) in g.transition(h, s, executed).iter().enumerate() {
                    next[t] += w * p;
                }
            }
        }
        occupancy = next;
    }
    values
}

/// Values of `pi` for every player, by forward propagation. Mixture
/// components are evaluated separately and averaged.
pub fn values(g: &Game, pi: &JointPolicy) -> Vec<f64> {
    match pi {
        JointPolicy::Mixture(mix) => {
            let mut total = vec![0.0; g.shape().players()];
            for (w, p) in mix.components() {
                let t = joint_table(g, &JointPolicy::Product(p.clone()));
                for (acc, v) in total.iter_mut().zip(forward_value(g, &t, 0, |_, _, b| b)) {
                    *acc += w * v;
                }
            }
            total
        }
        _ => forward_value(g, &joint_table(g, pi), 0, |_, _, b| b),
    }
}

/// Calls `f` with every assignment of `0..radix` to `len` slots.
fn for_each_assignment(len: usize, radix: usize, mut f: impl FnMut(&[usize])) {
    let mut digits = vec![0; len];
    loop {
        f(&digits);
        let mut k = 0;
        loop {
            if k == len {
                return;
            }
            digits[k] += 1;
            if digits[k] < radix {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Best value over all deterministic Markov policies of `player`.
pub fn brute_best_response(g: &Game, pi: &JointPolicy, player: usize) -> f64 {
    let shape = g.shape();
    let table = joint_table(g, pi);
    let n_s = shape.states();
    let mut best = f64::NEG_INFINITY;
    for_each_assignment(shape.horizon() * n_s, shape.num_actions(player), |choice| {
        let v = forward_value(g, &table, player, |h, s, _| choice[h * n_s + s])[player];
        best = best.max(v);
    });
    best
}

/// Visits every deterministic strategy modification of `player` (flat map
/// `(h * S + s) * A + b`) together with its value.
pub fn for_each_modification(g: &Game, pi: &JointPolicy, player: usize, mut f: impl FnMut(&[usize], f64)) {
    let shape = g.shape();
    let table = joint_table(g, pi);
    let (n_s, n_a) = (shape.states(), shape.num_actions(player));
    for_each_assignment(shape.horizon() * n_s * n_a, n_a, |map| {
        let v = forward_value(g, &table, player, |h, s, b| map[(h * n_s + s) * n_a + b])[player];
        f(map, v);
    });
}

/// Largest modification count enumerated in full by
/// [`brute_best_modification`].
pub const FULL_ENUMERATION_LIMIT: u64 = 1 << 17;

/// Best value over all deterministic strategy modifications of `player`.
///
/// When the full space exceeds [`FULL_ENUMERATION_LIMIT`], every step but the
/// last is still enumerated exhaustively; the last step's choice affects only
/// its own reward, so for each prefix it is settled entry by entry.
pub fn brute_best_modification(g: &Game, pi: &JointPolicy, player: usize) -> f64 {
    let shape = g.shape();
    let (n_h, n_s, n_a) = (shape.horizon(), shape.states(), shape.num_actions(player));
    let count = (n_a as u64).checked_pow((n_h * n_s * n_a) as u32);
    if count.is_some_and(|c| c <= FULL_ENUMERATION_LIMIT) {
        let mut best = f64::NEG_INFINITY;
        for_each_modification(g, pi, player, |_, v| best = best.max(v));
        return best;
    }
    let table = joint_table(g, pi);
    let prefix_len = (n_h - 1) * n_s * n_a;
    let mut best = f64::NEG_INFINITY;
    for_each_assignment(prefix_len, n_a, |prefix| {
        let v = prefix_then_greedy_last(g, &table, player, prefix);
        best = best.max(v);
    });
    best
}

fn prefix_then_greedy_last(g: &Game, table: &[f64], player: usize, prefix: &[usize]) -> f64 {
    let shape = g.shape();
    let (n_h, n_s, n_j, n_a) = (
        shape.horizon(),
        shape.states(),
        shape.joint_actions(),
        shape.num_actions(player),
    );
    let mut occupancy = vec![0.0; n_s];
    occupancy[g.initial_state()] = 1.0;
    let mut value = 0.0;
    for h in 0..n_h - 1 {
        let mut next = vec![0.0; n_s];
        for s in 0..n_s {
            for j in 0..n_j {
                let w = occupancy[s] * table[(h * n_s + s) * n_j + j];
                if w == 0.0 {
                    continue;
                }
                let mut a = shape.decode(j);
                a[player] = prefix[(h * n_s + s) * n_a + a[player]];
                let executed = shape.encode(&a);
                value += w * g.reward(h, s, executed, player);
                for (t, p) in g.transition(h, s, executed).iter().enumerate() {
                    next[t] += w * p;
                }
            }
        }
        occupancy = next;
    }
    let h = n_h - 1;
    for s in 0..n_s {
        for b in 0..n_a {
            let mut best = f64::NEG_INFINITY;
            for replacement in 0..n_a {
                let mut total = 0.0;
                for j in 0..n_j {
                    let mut a = shape.decode(j);
                    if a[player] != b {
                        continue;
                    }
                    let w = occupancy[s] * table[(h * n_s + s) * n_j + j];
                    a[player] = replacement;
                    total += w * g.reward(h, s, shape.encode(&a), player);
                }
                best = best.max(total);
            }
            value += best;
        }
    }
    value
}

/// Stationary distribution of a row-stochastic `n x n` matrix by 64 dense
/// power-iteration steps of the lazy chain `(Q + I) / 2`, from uniform.
pub fn power_iteration_stationary(q: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..64 {
        let mut next = vec![0.0; n];
        for (b, &pb) in p.iter().enumerate() {
            for a in 0..n {
                next[a] += pb * 0.5 * q[b * n + a];
            }
            next[b] += 0.5 * pb;
        }
        p = next;
    }
    p
}
