//! Markov joint policies, response rules, and strategy modifications.

use rand::Rng;
use thiserror::Error;

use crate::game::{Shape, PROB_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("policy table {table} has length {actual}, expected {expected}")]
    TableLength {
        table: String,
        expected: usize,
        actual: usize,
    },
    #[error("distribution at {location} sums to {sum}")]
    NotNormalized { location: String, sum: f64 },
    #[error("negative probability {value} at {location}")]
    Negative { location: String, value: f64 },
    #[error("mixture weights sum to {0}, expected 1")]
    MixtureWeights(f64),
    #[error("mixture is empty")]
    EmptyMixture,
    #[error("policy shape does not match the game")]
    ShapeMismatch,
    #[error("NE gap requires a product policy")]
    NotProduct,
    #[error("{0}")]
    Unsupported(String),
}

fn check_rows(table: &[f64], width: usize, label: &str) -> Result<(), PolicyError> {
    for (r, row) in table.chunks_exact(width).enumerate() {
        let mut sum = 0.0;
        for &p in row {
            if p < 0.0 || p.is_nan() {
                return Err(PolicyError::Negative {
                    location: format!("{label} row {r}"),
                    value: p,
                });
            }
            sum += p;
        }
        if !((sum - 1.0).abs() <= PROB_TOL) {
            return Err(PolicyError::NotNormalized {
                location: format!("{label} row {r}"),
                sum,
            });
        }
    }
    Ok(())
}

fn check_len(table: &[f64], expected: usize, label: &str) -> Result<(), PolicyError> {
    if table.len() != expected {
        return Err(PolicyError::TableLength {
            table: label.to_string(),
            expected,
            actual: table.len(),
        });
    }
    Ok(())
}

/// Draws an index from `probs` using one uniform variate.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = k;
            if u < acc {
                return k;
            }
        }
    }
    last
}

/// Independent per-player Markov policies; player `i`'s table is indexed
/// `(h * S + s) * A_i + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductPolicy {
    shape: Shape,
    tables: Vec<Vec<f64>>,
}

/// Random distribution over `n` outcomes; each entry is zeroed with
/// probability `sparsity`, keeping at least one.
fn random_row<R: Rng + ?Sized>(n: usize, sparsity: f64, rng: &mut R, out: &mut Vec<f64>) {
    let keep = rng.random_range(0..n);
    let row: Vec<f64> = (0..n)
        .map(|k| {
            if k != keep && rng.random::<f64>() < sparsity {
                0.0
            } else {
                rng.random::<f64>() + 1e-3
            }
        })
        .collect();
    let total: f64 = row.iter().sum();
    out.extend(row.iter().map(|p| p / total));
}

impl ProductPolicy {
    pub fn new(shape: Shape, tables: Vec<Vec<f64>>) -> Result<Self, PolicyError> {
        if tables.len() != shape.players() {
            return Err(PolicyError::ShapeMismatch);
        }
        let cells = shape.horizon() * shape.states();
        for (i, t) in tables.iter().enumerate() {
            let label = format!("player {i}");
            check_len(t, cells * shape.num_actions(i), &label)?;
            check_rows(t, shape.num_actions(i), &label)?;
        }
        Ok(Self { shape, tables })
    }

    pub fn uniform(shape: &Shape) -> Self {
        let cells = shape.horizon() * shape.states();
        let tables = shape
            .actions()
            .iter()
            .map(|&a| vec![1.0 / a as f64; cells * a])
            .collect();
        Self {
            shape: shape.clone(),
            tables,
        }
    }

    /// Random tables in which each probability is zero with chance `sparsity`.
    pub fn random<R: Rng + ?Sized>(shape: &Shape, sparsity: f64, rng: &mut R) -> Self {
        let cells = shape.horizon() * shape.states();
        let tables = shape
            .actions()
            .iter()
            .map(|&a| {
                let mut t = Vec::with_capacity(cells * a);
                for _ in 0..cells {
                    random_row(a, sparsity, rng, &mut t);
                }
                t
            })
            .collect();
        Self {
            shape: shape.clone(),
            tables,
        }
    }

    /// Every player plays `actions[i]` at every step and state.
    pub fn pure(shape: &Shape, actions: &[usize]) -> Self {
        let cells = shape.horizon() * shape.states();
        let tables = shape
            .actions()
            .iter()
            .zip(actions)
            .map(|(&n, &a)| {
                let mut t = vec![0.0; cells * n];
                for c in 0..cells {
                    t[c * n + a] = 1.0;
                }
                t
            })
            .collect();
        Self {
            shape: shape.clone(),
            tables,
        }
    }

    /// Matrix-game product policy from one distribution per player.
    pub fn from_marginals(shape: &Shape, marginals: Vec<Vec<f64>>) -> Result<Self, PolicyError> {
        let cells = shape.horizon() * shape.states();
        let tables = marginals
            .into_iter()
            .map(|m| m.repeat(cells))
            .collect();
        Self::new(shape.clone(), tables)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn table(&self, player: usize) -> &[f64] {
        &self.tables[player]
    }

    pub fn dist(&self, player: usize, h: usize, s: usize) -> &[f64] {
        let n = self.shape.num_actions(player);
        let base = (h * self.shape.states() + s) * n;
        &self.tables[player][base..base + n]
    }

    /// Probability of joint action `joint` at `(h, s)`.
    pub fn joint_prob(&self, h: usize, s: usize, joint: usize) -> f64 {
        (0..self.shape.players())
            .map(|i| self.dist(i, h, s)[self.shape.action_of(joint, i)])
            .product()
    }

    /// Writes the full joint distribution at `(h, s)` into `out`.
    pub fn joint_dist_into(&self, h: usize, s: usize, out: &mut [f64]) {
        out[0] = 1.0;
        let mut len = 1;
        for i in 0..self.shape.players() {
            let d = self.dist(i, h, s);
            let n = d.len();
            // Expand in place from the back so player 0 stays most significant.
            for k in (0..len).rev() {
                let base = out[k];
                for a in (0..n).rev() {
                    out[k * n + a] = base * d[a];
                }
            }
            len *= n;
        }
    }

    pub fn with_player(&self, player: usize, table: Vec<f64>) -> Self {
        let mut next = self.clone();
        next.tables[player] = table;
        next
    }

    pub fn to_correlated(&self) -> CorrelatedPolicy {
        let j_count = self.shape.joint_actions();
        let cells = self.shape.horizon() * self.shape.states();
        let mut table = vec![0.0; cells * j_count];
        for h in 0..self.shape.horizon() {
            for s in 0..self.shape.states() {
                let base = (h * self.shape.states() + s) * j_count;
                self.joint_dist_into(h, s, &mut table[base..base + j_count]);
            }
        }
        CorrelatedPolicy {
            shape: self.shape.clone(),
            table,
        }
    }
}

/// A general joint policy; the table is indexed `(h * S + s) * J + joint`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedPolicy {
    shape: Shape,
    table: Vec<f64>,
}

impl CorrelatedPolicy {
    pub fn new(shape: Shape, table: Vec<f64>) -> Result<Self, PolicyError> {
        let j = shape.joint_actions();
        check_len(&table, shape.horizon() * shape.states() * j, "joint")?;
        check_rows(&table, j, "joint")?;
        Ok(Self { shape, table })
    }

    pub fn random<R: Rng + ?Sized>(shape: &Shape, sparsity: f64, rng: &mut R) -> Self {
        let j = shape.joint_actions();
        let cells = shape.horizon() * shape.states();
        let mut table = Vec::with_capacity(cells * j);
        for _ in 0..cells {
            random_row(j, sparsity, rng, &mut table);
        }
        Self {
            shape: shape.clone(),
            table,
        }
    }

    /// Matrix-game correlated policy from one joint distribution.
    pub fn from_joint(shape: &Shape, dist: Vec<f64>) -> Result<Self, PolicyError> {
        let cells = shape.horizon() * shape.states();
        Self::new(shape.clone(), dist.repeat(cells))
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn dist(&self, h: usize, s: usize) -> &[f64] {
        let j = self.shape.joint_actions();
        let base = (h * self.shape.states() + s) * j;
        &self.table[base..base + j]
    }
}

/// Episode-level mixture of product policies: one component is drawn at the
/// start of each episode and followed throughout.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePolicy {
    shape: Shape,
    components: Vec<(f64, ProductPolicy)>,
}

impl MixturePolicy {
    pub fn new(components: Vec<(f64, ProductPolicy)>) -> Result<Self, PolicyError> {
        let shape = components
            .first()
            .ok_or(PolicyError::EmptyMixture)?
            .1
            .shape()
            .clone();
        let mut total = 0.0;
        for (w, p) in &components {
            if *w < 0.0 || w.is_nan() {
                return Err(PolicyError::Negative {
                    location: "mixture weight".into(),
                    value: *w,
                });
            }
            if p.shape() != &shape {
                return Err(PolicyError::ShapeMismatch);
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(PolicyError::MixtureWeights(total));
        }
        Ok(Self { shape, components })
    }

    /// Uniform weights over `components`.
    pub fn uniform(components: Vec<ProductPolicy>) -> Result<Self, PolicyError> {
        let w = 1.0 / components.len().max(1) as f64;
        Self::new(components.into_iter().map(|p| (w, p)).collect())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn components(&self) -> &[(f64, ProductPolicy)] {
        &self.components
    }

    /// Component-averaged joint distribution per `(h, s)`. Exact for
    /// horizon one; for longer horizons it is only the per-step marginal.
    pub fn flatten(&self) -> CorrelatedPolicy {
        let j = self.shape.joint_actions();
        let cells = self.shape.horizon() * self.shape.states();
        let mut table = vec![0.0; cells * j];
        let mut buf = vec![0.0; j];
        for (w, p) in &self.components {
            for c in 0..cells {
                let (h, s) = (c / self.shape.states(), c % self.shape.states());
                p.joint_dist_into(h, s, &mut buf);
                for (t, b) in table[c * j..(c + 1) * j].iter_mut().zip(&buf) {
                    *t += w * b;
                }
            }
        }
        // Renormalize away the rounding left by summing many weights.
        for row in table.chunks_exact_mut(j) {
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= sum);
        }
        CorrelatedPolicy {
            shape: self.shape.clone(),
            table,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum JointPolicy {
    Product(ProductPolicy),
    Correlated(CorrelatedPolicy),
    Mixture(MixturePolicy),
}

impl From<ProductPolicy> for JointPolicy {
    fn from(p: ProductPolicy) -> Self {
        JointPolicy::Product(p)
    }
}

impl From<CorrelatedPolicy> for JointPolicy {
    fn from(p: CorrelatedPolicy) -> Self {
        JointPolicy::Correlated(p)
    }
}

impl From<MixturePolicy> for JointPolicy {
    fn from(p: MixturePolicy) -> Self {
        JointPolicy::Mixture(p)
    }
}

impl JointPolicy {
    pub fn shape(&self) -> &Shape {
        match self {
            JointPolicy::Product(p) => p.shape(),
            JointPolicy::Correlated(p) => p.shape(),
            JointPolicy::Mixture(p) => p.shape(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            JointPolicy::Product(_) => "product",
            JointPolicy::Correlated(_) => "joint",
            JointPolicy::Mixture(_) => "mixture",
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, JointPolicy::Product(_))
    }

    /// Per-step joint distribution table. For mixtures this is the
    /// component average, which is exact only for horizon one.
    pub fn to_correlated(&self) -> CorrelatedPolicy {
        match self {
            JointPolicy::Product(p) => p.to_correlated(),
            JointPolicy::Correlated(p) => p.clone(),
            JointPolicy::Mixture(m) => m.flatten(),
        }
    }

    /// The policy executed when `player` follows `rule` and everybody else
    /// follows `self`. Under a recommendation rule, the player observes what
    /// `self` would have had it play.
    pub fn deviate(&self, player: usize, rule: &ResponseRule) -> JointPolicy {
        match self {
            JointPolicy::Product(p) => JointPolicy::Product(deviate_product(p, player, rule)),
            JointPolicy::Mixture(m) => JointPolicy::Mixture(MixturePolicy {
                shape: m.shape.clone(),
                components: m
                    .components
                    .iter()
                    .map(|(w, p)| (*w, deviate_product(p, player, rule)))
                    .collect(),
            }),
            JointPolicy::Correlated(c) => {
                let shape = &c.shape;
                let j_count = shape.joint_actions();
                let n = shape.num_actions(player);
                let mut table = vec![0.0; c.table.len()];
                for h in 0..shape.horizon() {
                    for s in 0..shape.states() {
                        let base = (h * shape.states() + s) * j_count;
                        let src = c.dist(h, s);
                        let dst = &mut table[base..base + j_count];
                        for (j, &pj) in src.iter().enumerate() {
                            if pj == 0.0 {
                                continue;
                            }
                            let b = shape.action_of(j, player);
                            let d = rule.dist(h, s, b);
                            for a in 0..n {
                                if d[a] > 0.0 {
                                    dst[shape.with_action(j, player, a)] += pj * d[a];
                                }
                            }
                        }
                    }
                }
                JointPolicy::Correlated(CorrelatedPolicy {
                    shape: shape.clone(),
                    table,
                })
            }
        }
    }
}

fn deviate_product(p: &ProductPolicy, player: usize, rule: &ResponseRule) -> ProductPolicy {
    let shape = p.shape();
    let n = shape.num_actions(player);
    let mut table = vec![0.0; shape.horizon() * shape.states() * n];
    for h in 0..shape.horizon() {
        for s in 0..shape.states() {
            let base = (h * shape.states() + s) * n;
            let rec = p.dist(player, h, s);
            for (b, &pb) in rec.iter().enumerate() {
                if pb == 0.0 {
                    continue;
                }
                let d = rule.dist(h, s, b);
                for a in 0..n {
                    table[base + a] += pb * d[a];
                }
            }
        }
    }
    p.with_player(player, table)
}

/// What a deviating player conditions on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observation {
    /// `(h, s)`: a best-response style deviation.
    State,
    /// `(h, s, b)` with `b` the action recommended to the player.
    StateRecommendation,
}

/// A single player's stochastic Markov rule over its own actions.
///
/// With [`Observation::State`] the table is indexed `(h * S + s) * A + a`,
/// with [`Observation::StateRecommendation`] it is `((h * S + s) * A + b) * A + a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseRule {
    observation: Observation,
    states: usize,
    actions: usize,
    table: Vec<f64>,
}

impl ResponseRule {
    pub fn new(
        observation: Observation,
        horizon: usize,
        states: usize,
        actions: usize,
        table: Vec<f64>,
    ) -> Result<Self, PolicyError> {
        let rows = horizon
            * states
            * match observation {
                Observation::State => 1,
                Observation::StateRecommendation => actions,
            };
        check_len(&table, rows * actions, "response rule")?;
        check_rows(&table, actions, "response rule")?;
        Ok(Self {
            observation,
            states,
            actions,
            table,
        })
    }

    /// Deterministic rule from one action per observation row.
    pub fn deterministic(
        observation: Observation,
        horizon: usize,
        states: usize,
        actions: usize,
        choice: &[usize],
    ) -> Self {
        let mut table = vec![0.0; choice.len() * actions];
        for (row, &a) in choice.iter().enumerate() {
            table[row * actions + a] = 1.0;
        }
        let rule = Self {
            observation,
            states,
            actions,
            table,
        };
        debug_assert_eq!(rule.rows(horizon), choice.len());
        rule
    }

    fn rows(&self, horizon: usize) -> usize {
        horizon
            * self.states
            * match self.observation {
                Observation::State => 1,
                Observation::StateRecommendation => self.actions,
            }
    }

    pub fn observation(&self) -> Observation {
        self.observation
    }

    pub fn dist(&self, h: usize, s: usize, recommended: usize) -> &[f64] {
        let row = match self.observation {
            Observation::State => h * self.states + s,
            Observation::StateRecommendation => (h * self.states + s) * self.actions + recommended,
        };
        &self.table[row * self.actions..(row + 1) * self.actions]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// A deterministic strategy modification `psi[h][s][b]` for one player,
/// stored flat at `(h * S + s) * A + b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyModification {
    pub player: usize,
    pub states: usize,
    pub actions: usize,
    pub map: Vec<usize>,
}

impl StrategyModification {
    pub fn identity(shape: &Shape, player: usize) -> Self {
        let a = shape.num_actions(player);
        let map = (0..shape.horizon() * shape.states())
            .flat_map(|_| 0..a)
            .collect();
        Self {
            player,
            states: shape.states(),
            actions: a,
            map,
        }
    }

    pub fn apply(&self, h: usize, s: usize, b: usize) -> usize {
        self.map[(h * self.states + s) * self.actions + b]
    }

    pub fn to_rule(&self, horizon: usize) -> ResponseRule {
        ResponseRule::deterministic(
            Observation::StateRecommendation,
            horizon,
            self.states,
            self.actions,
            &self.map,
        )
    }
}

/// Per-episode executor of a [`JointPolicy`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PolicyCursor {
    component: usize,
}

impl PolicyCursor {
    /// Starts an episode, drawing a mixture component if needed.
    pub fn begin<R: Rng + ?Sized>(policy: &JointPolicy, rng: &mut R) -> Self {
        let component = match policy {
            JointPolicy::Mixture(m) => {
                let weights: Vec<f64> = m.components.iter().map(|(w, _)| *w).collect();
                sample_index(&weights, rng)
            }
            _ => 0,
        };
        Self { component }
    }

    /// Samples every player's action at `(h, s)` into `out`.
    pub fn sample<R: Rng + ?Sized>(&self, policy: &JointPolicy, h: usize, s: usize, rng: &mut R, out: &mut [usize]) {
        match policy {
            JointPolicy::Product(p) => sample_product(p, h, s, rng, out),
            JointPolicy::Mixture(m) => sample_product(&m.components[self.component].1, h, s, rng, out),
            JointPolicy::Correlated(c) => {
                let j = sample_index(c.dist(h, s), rng);
                c.shape.decode_into(j, out);
            }
        }
    }
}

fn sample_product<R: Rng + ?Sized>(p: &ProductPolicy, h: usize, s: usize, rng: &mut R, out: &mut [usize]) {
    for (i, slot) in out.iter_mut().enumerate().take(p.shape.players()) {
        *slot = sample_index(p.dist(i, h, s), rng);
    }
}
