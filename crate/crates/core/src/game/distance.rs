use super::{Game, GameError};

/// Total-variation distance between two games of identical shape.
///
/// Entrywise L1 over every transition entry `(h, s, a, s')` plus entrywise L1
/// over every mean-reward entry `(h, player, s, a)`. Rewards are summed over
/// players, so a single value change of `x` in one player's table costs `x`.
pub fn game_distance(a: &Game, b: &Game) -> Result<f64, GameError> {
    if a.shape() != b.shape() {
        return Err(GameError::ShapeMismatch);
    }
    let l1 = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum() };
    Ok(l1(a.transition_table(), b.transition_table()) + l1(a.reward_table(), b.reward_table()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{families, RewardNoise};

    #[test]
    fn identical_games_are_at_zero() {
        let g = families::chicken();
        assert_eq!(game_distance(&g, &g).unwrap(), 0.0);
    }

    #[test]
    fn single_reward_entry_difference() {
        let g = families::matching_pennies();
        let mut r = g.reward_table().to_vec();
        r[0] -= 0.3;
        let h = Game::matrix(&[2, 2], r, RewardNoise::Bernoulli).unwrap();
        assert!((game_distance(&g, &h).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = families::matching_pennies();
        let b = families::random_matrix(&[3, 2], &mut rand::rng());
        assert_eq!(game_distance(&a, &b), Err(GameError::ShapeMismatch));
    }
}
