//! An n-player cooperation dilemma with private cooperation costs.
//!
//! Each player is `low` or `high` cost and chooses C or D. Payoff is
//! 0.4 + 0.6 * (share of others playing C) - cost * [own action is C], so defecting is
//! dominant, mutual defection yields 0.4 and payoffs lie in [0, 1] with maximum 1.

use crate::game::{BayesianGame, CorrelatedPolicy, GameError};

pub const COSTS: [f64; 2] = [0.2, 0.4];
pub const P_HIGH: f64 = 0.4;
/// Weight multiplier on profiles where all players share a type.
pub const CORRELATION: f64 = 1.5;

pub fn dilemma_game(n: usize) -> Result<BayesianGame, GameError> {
    if n == 0 {
        return Err(GameError::Invalid("need at least one player".into()));
    }
    let types = vec![vec!["low".to_string(), "high".to_string()]; n];
    let actions = vec![vec!["C".to_string(), "D".to_string()]; n];
    let mut prior = Vec::with_capacity(1 << n);
    for t in 0..1usize << n {
        let highs = t.count_ones() as i32;
        let w = P_HIGH.powi(highs) * (1.0 - P_HIGH).powi(n as i32 - highs);
        let uniform = t == 0 || t == (1 << n) - 1;
        prior.push(if uniform && n > 1 { w * CORRELATION } else { w });
    }
    let total: f64 = prior.iter().sum();
    prior.iter_mut().for_each(|p| *p /= total);
    BayesianGame::from_fn(types, actions, prior, |t, a, out| {
        let cooperators = a.iter().filter(|&&x| x == 0).count();
        for i in 0..n {
            let own = (a[i] == 0) as usize;
            let share = if n > 1 { (cooperators - own) as f64 / (n - 1) as f64 } else { 0.0 };
            out[i] = 0.4 + 0.6 * share - COSTS[t[i]] * own as f64;
        }
    })
}

/// Mutual cooperation at every type profile.
pub fn dilemma_target(game: &BayesianGame) -> Result<CorrelatedPolicy, GameError> {
    CorrelatedPolicy::deterministic(game, |t| vec![0; t.len()])
}

/// Everyone cooperates, except that an all-high profile flips a fair coin between
/// mutual cooperation and mutual defection.
pub fn dilemma_mixed_target(game: &BayesianGame) -> Result<CorrelatedPolicy, GameError> {
    let m = game.action_space().len();
    CorrelatedPolicy::full_from_fn(game, |t| {
        let mut row = vec![0.0; m];
        if t.iter().all(|&x| x == 1) && t.len() > 1 {
            row[0] = 0.5;
            row[m - 1] = 0.5;
        } else {
            row[0] = 1.0;
        }
        row
    })
}
