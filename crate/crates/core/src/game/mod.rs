//! Finite Bayesian games, correlated policies and their payoffs.

mod io;
mod policy;
mod radix;

pub use io::{policy_from_map, policy_to_map, GameFile, PayoffFile, PolicyMap, RawDisclosureSpaces};
pub use policy::{
    best_response, desugar_at, desugar_policy, deviation_payoff, ex_interim_payoff, ex_post_payoffs,
    induced_payoffs, inverse_cdf,
    reported_payoff, CorrelatedPolicy, Sampler, DeterministicProfile, PayoffVector, Scope,
};
pub use radix::Radix;

use thiserror::Error;

/// Tolerance on the total mass of the prior.
pub const PRIOR_TOL: f64 = 1e-12;
/// Tolerance on the total mass of each policy row.
pub const ROW_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error("prior sums to {0}, expected 1")]
    PriorMass(f64),
    #[error("utility table is not total: missing entry {0}")]
    Totality(String),
    #[error("type {type_index} of player {player} has zero marginal probability")]
    ZeroMarginal { player: usize, type_index: usize },
    #[error("policy scope mismatch: expected {expected}, found {found}")]
    Scope { expected: String, found: String },
    #[error("invalid policy: {0}")]
    Policy(String),
    #[error("malformed game file: {0}")]
    Schema(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A finite Bayesian game with a common prior over type profiles.
///
/// Type and action profiles are indexed lexicographically through [`Radix`].
#[derive(Clone, Debug)]
pub struct BayesianGame {
    type_names: Vec<Vec<String>>,
    action_names: Vec<Vec<String>>,
    types: Radix,
    actions: Radix,
    prior: Vec<f64>,
    utility: Vec<f64>,
    marginals: Vec<Vec<f64>>,
    u_bar: f64,
}

impl BayesianGame {
    /// Builds a game from a utility callback `f(t, a, out)` that writes one payoff per player.
    pub fn from_fn<F>(
        type_names: Vec<Vec<String>>,
        action_names: Vec<Vec<String>>,
        prior: Vec<f64>,
        mut f: F,
    ) -> Result<Self, GameError>
    where
        F: FnMut(&[usize], &[usize], &mut [f64]),
    {
        let n = type_names.len();
        let types = Radix::new(type_names.iter().map(Vec::len).collect());
        let actions = Radix::new(action_names.iter().map(Vec::len).collect());
        let mut utility = vec![0.0; types.len() * actions.len() * n];
        let mut t = vec![0; n];
        let mut a = vec![0; n];
        for ti in 0..types.len() {
            types.decode_into(ti, &mut t);
            for ai in 0..actions.len() {
                actions.decode_into(ai, &mut a);
                let base = (ti * actions.len() + ai) * n;
                f(&t, &a, &mut utility[base..base + n]);
            }
        }
        Self::from_table(type_names, action_names, prior, utility)
    }

    /// Builds a game from a dense utility table laid out as `[t][a][player]`.
    pub fn from_table(
        type_names: Vec<Vec<String>>,
        action_names: Vec<Vec<String>>,
        prior: Vec<f64>,
        utility: Vec<f64>,
    ) -> Result<Self, GameError> {
        let n = type_names.len();
        if n == 0 {
            return Err(GameError::Invalid("a game needs at least one player".into()));
        }
        if action_names.len() != n {
            return Err(GameError::Invalid(format!(
                "{} type lists but {} action lists",
                n,
                action_names.len()
            )));
        }
        for (i, names) in type_names.iter().chain(action_names.iter()).enumerate() {
            if names.is_empty() {
                return Err(GameError::Invalid(format!("empty type or action list (list {i})")));
            }
            let mut seen = std::collections::HashSet::new();
            for name in names {
                if name.contains('|') || name.contains("::") {
                    return Err(GameError::Invalid(format!("name {name:?} contains a reserved separator")));
                }
                if !seen.insert(name) {
                    return Err(GameError::Invalid(format!("duplicate name {name:?}")));
                }
            }
        }
        let types = Radix::new(type_names.iter().map(Vec::len).collect());
        let actions = Radix::new(action_names.iter().map(Vec::len).collect());
        if prior.len() != types.len() {
            return Err(GameError::Invalid(format!(
                "prior has {} entries, expected {}",
                prior.len(),
                types.len()
            )));
        }
        if prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(GameError::Invalid("prior entries must be finite and nonnegative".into()));
        }
        let mass: f64 = prior.iter().sum();
        if (mass - 1.0).abs() > PRIOR_TOL {
            return Err(GameError::PriorMass(mass));
        }
        if utility.len() != types.len() * actions.len() * n {
            return Err(GameError::Totality(format!(
                "table has {} entries, expected {}",
                utility.len(),
                types.len() * actions.len() * n
            )));
        }
        if utility.iter().any(|u| !u.is_finite()) {
            return Err(GameError::Invalid("utilities must be finite".into()));
        }
        let u_bar = utility.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        let mut marginals: Vec<Vec<f64>> = type_names.iter().map(|ts| vec![0.0; ts.len()]).collect();
        let mut t = vec![0; n];
        for (ti, &p) in prior.iter().enumerate() {
            types.decode_into(ti, &mut t);
            for (i, &ti_i) in t.iter().enumerate() {
                marginals[i][ti_i] += p;
            }
        }
        Ok(BayesianGame { type_names, action_names, types, actions, prior, utility, marginals, u_bar })
    }

    pub fn n_players(&self) -> usize {
        self.type_names.len()
    }

    pub fn n_types(&self, i: usize) -> usize {
        self.type_names[i].len()
    }

    pub fn n_actions(&self, i: usize) -> usize {
        self.action_names[i].len()
    }

    pub fn type_space(&self) -> &Radix {
        &self.types
    }

    pub fn action_space(&self) -> &Radix {
        &self.actions
    }

    pub fn type_names(&self, i: usize) -> &[String] {
        &self.type_names[i]
    }

    pub fn action_names(&self, i: usize) -> &[String] {
        &self.action_names[i]
    }

    pub fn prior(&self, t: usize) -> f64 {
        self.prior[t]
    }

    pub fn prior_table(&self) -> &[f64] {
        &self.prior
    }

    pub fn marginal(&self, i: usize, t_i: usize) -> f64 {
        self.marginals[i][t_i]
    }

    /// Largest absolute utility in the table.
    pub fn u_bar(&self) -> f64 {
        self.u_bar
    }

    /// Payoff of player `i` at type profile `t` and joint action `a` (both as indices).
    pub fn u(&self, t: usize, a: usize, i: usize) -> f64 {
        self.utility[(t * self.actions.len() + a) * self.n_players() + i]
    }

    /// Payoffs of all players at `(t, a)`.
    pub fn payoffs(&self, t: usize, a: usize) -> &[f64] {
        let n = self.n_players();
        let base = (t * self.actions.len() + a) * n;
        &self.utility[base..base + n]
    }

    /// Conditional probability q(t_{-j} | t_j) for the full profile index `t`.
    pub fn conditional(&self, j: usize, t: usize) -> Result<f64, GameError> {
        let t_j = self.types.digit(t, j);
        let m = self.marginals[j][t_j];
        if m <= 0.0 {
            return Err(GameError::ZeroMarginal { player: j, type_index: t_j });
        }
        Ok(self.prior[t] / m)
    }

    pub fn type_key(&self, t: usize) -> String {
        let digits = self.types.decode(t);
        digits.iter().enumerate().map(|(i, &d)| self.type_names[i][d].as_str()).collect::<Vec<_>>().join("|")
    }

    pub fn action_key(&self, a: usize) -> String {
        let digits = self.actions.decode(a);
        digits.iter().enumerate().map(|(i, &d)| self.action_names[i][d].as_str()).collect::<Vec<_>>().join("|")
    }

    /// Restricts each player's type set to `subsets[i]` and renormalizes the prior.
    pub fn restrict(&self, subsets: &[Vec<usize>]) -> Result<BayesianGame, GameError> {
        let n = self.n_players();
        if subsets.len() != n || subsets.iter().any(Vec::is_empty) {
            return Err(GameError::Invalid("restriction needs a nonempty type subset per player".into()));
        }
        let type_names: Vec<Vec<String>> =
            subsets.iter().enumerate().map(|(i, s)| s.iter().map(|&k| self.type_names[i][k].clone()).collect()).collect();
        let sub = Radix::new(subsets.iter().map(Vec::len).collect());
        let mut prior = Vec::with_capacity(sub.len());
        let mut full_index = Vec::with_capacity(sub.len());
        let mut digits = vec![0; n];
        for si in 0..sub.len() {
            sub.decode_into(si, &mut digits);
            let full: Vec<usize> = digits.iter().enumerate().map(|(i, &d)| subsets[i][d]).collect();
            let ti = self.types.encode(&full);
            prior.push(self.prior[ti]);
            full_index.push(ti);
        }
        let mass: f64 = prior.iter().sum();
        if mass <= 0.0 {
            return Err(GameError::Invalid("restricted type set has zero prior mass".into()));
        }
        prior.iter_mut().for_each(|p| *p /= mass);
        let na = self.actions.len();
        let mut utility = Vec::with_capacity(sub.len() * na * n);
        for &ti in &full_index {
            utility.extend_from_slice(&self.utility[ti * na * n..(ti + 1) * na * n]);
        }
        // Renormalization can leave the mass a few ulps away from 1.
        let drift: f64 = 1.0 - prior.iter().sum::<f64>();
        if let Some(p) = prior.iter_mut().find(|p| **p > 0.0) {
            *p += drift;
        }
        BayesianGame::from_table(type_names, self.action_names.clone(), prior, utility)
    }
}
