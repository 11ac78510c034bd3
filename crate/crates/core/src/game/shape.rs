use super::GameError;

/// Dimensions of a game: horizon, states, and per-player action counts.
///
/// Joint actions use a mixed-radix index with player 0 most significant, so
/// for two players the joint index of `(row, col)` is `row * B + col`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    horizon: usize,
    states: usize,
    actions: Vec<usize>,
    strides: Vec<usize>,
    joint: usize,
}

impl Shape {
    pub fn new(horizon: usize, states: usize, actions: Vec<usize>) -> Result<Self, GameError> {
        if horizon == 0 || states == 0 {
            return Err(GameError::Shape("horizon and state count must be positive".into()));
        }
        if actions.is_empty() || actions.contains(&0) {
            return Err(GameError::Shape("every player needs at least one action".into()));
        }
        let mut strides = vec![1; actions.len()];
        for i in (0..actions.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * actions[i + 1];
        }
        let joint = strides[0] * actions[0];
        Ok(Self {
            horizon,
            states,
            actions,
            strides,
            joint,
        })
    }

    /// Single-state, horizon-one shape.
    pub fn matrix(actions: Vec<usize>) -> Result<Self, GameError> {
        Self::new(1, 1, actions)
    }

    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.actions[player]
    }

    pub fn max_actions(&self) -> usize {
        self.actions.iter().copied().max().unwrap_or(0)
    }

    pub fn joint_actions(&self) -> usize {
        self.joint
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, stride)| a * stride)
            .sum()
    }

    pub fn decode_into(&self, joint: usize, out: &mut [usize]) {
        for (i, slot) in out.iter_mut().enumerate().take(self.actions.len()) {
            *slot = self.action_of(joint, i);
        }
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        let mut out = vec![0; self.players()];
        self.decode_into(joint, &mut out);
        out
    }

    #[inline]
    pub fn action_of(&self, joint: usize, player: usize) -> usize {
        (joint / self.strides[player]) % self.actions[player]
    }

    /// The joint action obtained by replacing player `player`'s action.
    #[inline]
    pub fn with_action(&self, joint: usize, player: usize, action: usize) -> usize {
        let stride = self.strides[player];
        joint - self.action_of(joint, player) * stride + action * stride
    }

    /// The joint action with slot `player` zeroed, identifying `a_{-i}`.
    #[inline]
    pub fn others_key(&self, joint: usize, player: usize) -> usize {
        self.with_action(joint, player, 0)
    }

    pub fn same_dims(&self, other: &Shape) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn joint_index_round_trips() {
        let shape = Shape::new(2, 3, vec![2, 3, 2]).unwrap();
        assert_eq!(shape.joint_actions(), 12);
        for j in 0..12 {
            let a = shape.decode(j);
            assert_eq!(shape.encode(&a), j);
        }
        assert_eq!(shape.encode(&[1, 2, 1]), 11);
        assert_eq!(shape.with_action(0, 1, 2), 4);
        assert_eq!(shape.others_key(11, 0), 5);
    }

    #[test]
    fn rejects_empty_dimensions() {
        assert!(Shape::new(0, 1, vec![2]).is_err());
        assert!(Shape::new(1, 1, vec![]).is_err());
        assert!(Shape::new(1, 1, vec![2, 0]).is_err());
    }
}
