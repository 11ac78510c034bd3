//! Named games and random instance generators.

use rand::Rng;

use super::{Game, RewardNoise, Shape};

fn bimatrix(row: [[f64; 2]; 2], col: [[f64; 2]; 2]) -> Game {
    let row: Vec<Vec<f64>> = row.iter().map(|r| r.to_vec()).collect();
    let col: Vec<Vec<f64>> = col.iter().map(|r| r.to_vec()).collect();
    Game::bimatrix(&row, &col, RewardNoise::Bernoulli).expect("static game is valid")
}

/// `R_1 = [[1, 0], [0, 1]]`, `R_2 = 1 - R_1`.
pub fn matching_pennies() -> Game {
    bimatrix([[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [1.0, 0.0]])
}

/// Actions `[C, D]`: `(C,C)=(0.6,0.6)`, `(D,C)=(1,0)`, `(C,D)=(0,1)`, `(D,D)=(0.2,0.2)`.
pub fn prisoners_dilemma() -> Game {
    bimatrix([[0.6, 0.0], [1.0, 0.2]], [[0.6, 1.0], [0.0, 0.2]])
}

/// Actions `[Stop, Go]`: `(S,S)=(0.4,0.4)`, `(G,S)=(0.7,0.3)`, `(S,G)=(0.3,0.7)`, `(G,G)=(0,0)`.
pub fn chicken() -> Game {
    bimatrix([[0.4, 0.3], [0.7, 0.0]], [[0.4, 0.7], [0.3, 0.0]])
}

/// Pure coordination: both players get 1 on the diagonal, 0 elsewhere.
pub fn coordination() -> Game {
    bimatrix([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]])
}

/// Two zero-sum 2x2 games whose pure equilibria sit in opposite corners.
///
/// The first has its saddle point at `(0, 1)`, the second at `(1, 0)`; a
/// policy committed to either one has NE gap 0.5 in the other.
pub fn dominance_flip_pair() -> (Game, Game) {
    let first = bimatrix([[0.9, 0.6], [0.4, 0.1]], [[0.1, 0.4], [0.6, 0.9]]);
    let second = bimatrix([[0.1, 0.4], [0.6, 0.9]], [[0.9, 0.6], [0.4, 0.1]]);
    (first, second)
}

/// Matrix game with i.i.d. uniform mean rewards.
pub fn random_matrix<R: Rng + ?Sized>(actions: &[usize], rng: &mut R) -> Game {
    random_markov(1, 1, actions, rng)
}

/// Two-player rescaled zero-sum matrix game: `R_1` uniform, `R_2 = 1 - R_1`.
pub fn random_zero_sum<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Game {
    let mut rewards = Vec::with_capacity(2 * rows * cols);
    for _ in 0..rows * cols {
        let r: f64 = rng.random();
        rewards.push(r);
        rewards.push(1.0 - r);
    }
    Game::matrix(&[rows, cols], rewards, RewardNoise::Bernoulli).expect("valid by construction")
}

/// Tabular Markov game with uniform rewards and normalized uniform transition rows.
pub fn random_markov<R: Rng + ?Sized>(
    horizon: usize,
    states: usize,
    actions: &[usize],
    rng: &mut R,
) -> Game {
    let shape = Shape::new(horizon, states, actions.to_vec()).expect("positive dimensions");
    let rows = horizon * states * shape.joint_actions();
    let mut transitions = Vec::with_capacity(rows * states);
    let mut row = vec![0.0; states];
    for _ in 0..rows {
        for p in row.iter_mut() {
            *p = rng.random::<f64>() + 1e-3;
        }
        let total: f64 = row.iter().sum();
        transitions.extend(row.iter().map(|p| p / total));
    }
    let rewards = (0..rows * shape.players()).map(|_| rng.random()).collect();
    Game::new(shape, transitions, rewards, RewardNoise::Bernoulli).expect("valid by construction")
}
