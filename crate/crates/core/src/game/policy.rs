use serde::{Deserialize, Serialize};

use super::{BayesianGame, GameError, Radix, ROW_TOL};
use crate::signal::SignalSource;

/// What a correlated policy conditions on and which players' actions it covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    /// Conditions on the full type profile, covers all players.
    FullProfile,
    /// Conditions on t_{-j}, covers the players other than j.
    MinusPlayer(usize),
    /// A full-profile policy whose j-th coordinate is read as j's report.
    ReportedType(usize),
}

impl std::fmt::Display for Scope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scope::FullProfile => write!(f, "full-profile"),
            Scope::MinusPlayer(j) => write!(f, "minus-player({j})"),
            Scope::ReportedType(j) => write!(f, "reported-type({j})"),
        }
    }
}

/// A family of distributions over joint actions, one row per conditioning type profile.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorrelatedPolicy {
    scope: Scope,
    condition: Radix,
    outcome: Radix,
    rows: Vec<Vec<f64>>,
}

impl CorrelatedPolicy {
    pub fn new(scope: Scope, condition: Radix, outcome: Radix, rows: Vec<Vec<f64>>) -> Result<Self, GameError> {
        if rows.len() != condition.len() {
            return Err(GameError::Policy(format!("{} rows, expected {}", rows.len(), condition.len())));
        }
        for (k, row) in rows.iter().enumerate() {
            if row.len() != outcome.len() {
                return Err(GameError::Policy(format!("row {k} has {} entries, expected {}", row.len(), outcome.len())));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(GameError::Policy(format!("row {k} has a negative or non-finite entry")));
            }
            let mass: f64 = row.iter().sum();
            if (mass - 1.0).abs() > ROW_TOL {
                return Err(GameError::Policy(format!("row {k} sums to {mass}")));
            }
        }
        Ok(CorrelatedPolicy { scope, condition, outcome, rows })
    }

    pub fn full(game: &BayesianGame, rows: Vec<Vec<f64>>) -> Result<Self, GameError> {
        Self::new(Scope::FullProfile, game.type_space().clone(), game.action_space().clone(), rows)
    }

    pub fn full_from_fn<F>(game: &BayesianGame, mut f: F) -> Result<Self, GameError>
    where
        F: FnMut(&[usize]) -> Vec<f64>,
    {
        let ts = game.type_space();
        let rows = (0..ts.len()).map(|t| f(&ts.decode(t))).collect();
        Self::full(game, rows)
    }

    /// A full-profile policy that plays the joint action `f(t)` with certainty.
    pub fn deterministic<F>(game: &BayesianGame, mut f: F) -> Result<Self, GameError>
    where
        F: FnMut(&[usize]) -> Vec<usize>,
    {
        let ts = game.type_space();
        let acts = game.action_space();
        let rows = (0..ts.len())
            .map(|t| {
                let mut row = vec![0.0; acts.len()];
                row[acts.encode(&f(&ts.decode(t)))] = 1.0;
                row
            })
            .collect();
        Self::full(game, rows)
    }

    pub fn minus(game: &BayesianGame, j: usize, rows: Vec<Vec<f64>>) -> Result<Self, GameError> {
        Self::new(Scope::MinusPlayer(j), game.type_space().without(j), game.action_space().without(j), rows)
    }

    /// A punishment against `j` that plays `f(t_{-j})` (others' action digits) with certainty.
    pub fn minus_deterministic<F>(game: &BayesianGame, j: usize, mut f: F) -> Result<Self, GameError>
    where
        F: FnMut(&[usize]) -> Vec<usize>,
    {
        let cond = game.type_space().without(j);
        let out = game.action_space().without(j);
        let rows = (0..cond.len())
            .map(|t| {
                let mut row = vec![0.0; out.len()];
                row[out.encode(&f(&cond.decode(t)))] = 1.0;
                row
            })
            .collect();
        Self::minus(game, j, rows)
    }

    /// Reinterprets a full-profile policy as conditioned on player j's report.
    pub fn as_reported(&self, j: usize) -> Result<Self, GameError> {
        if self.scope != Scope::FullProfile {
            return Err(GameError::Scope { expected: "full-profile".into(), found: self.scope.to_string() });
        }
        let mut out = self.clone();
        out.scope = Scope::ReportedType(j);
        Ok(out)
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn condition(&self) -> &Radix {
        &self.condition
    }

    pub fn outcome(&self) -> &Radix {
        &self.outcome
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, cond: usize) -> &[f64] {
        &self.rows[cond]
    }

    /// Inverse-CDF draw from row `cond` using the shared uniform `c`.
    pub fn sample(&self, cond: usize, c: f64) -> usize {
        inverse_cdf(&self.rows[cond], c)
    }

    /// Cumulative masses strictly inside (0, 1) where some row's draw changes.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for row in &self.rows {
            let mut acc = 0.0;
            for &p in row {
                if p > 0.0 {
                    acc += p;
                    if acc > 0.0 && acc < 1.0 {
                        out.push(acc);
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    fn require(&self, ok: bool, expected: &str) -> Result<(), GameError> {
        if ok {
            Ok(())
        } else {
            Err(GameError::Scope { expected: expected.into(), found: self.scope.to_string() })
        }
    }
}

/// Precomputed inverse-CDF tables over the support of each row of a policy.
///
/// Draws agree with [`CorrelatedPolicy::sample`] but cost O(log support).
#[derive(Clone, Debug)]
pub struct Sampler {
    rows: Vec<Vec<(f64, usize)>>,
}

impl Sampler {
    pub fn new(policy: &CorrelatedPolicy) -> Self {
        let rows = policy
            .rows
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                row.iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(k, p)| {
                        acc += p;
                        (acc, k)
                    })
                    .collect()
            })
            .collect();
        Sampler { rows }
    }

    pub fn sample(&self, cond: usize, c: f64) -> usize {
        let row = &self.rows[cond];
        let pos = row.partition_point(|(cum, _)| *cum <= c);
        row.get(pos).or(row.last()).map_or(0, |e| e.1)
    }
}

/// Smallest outcome whose cumulative mass exceeds `c`; zero-mass outcomes are never drawn.
pub fn inverse_cdf(dist: &[f64], c: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in dist.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = k;
        acc += p;
        if c < acc {
            return k;
        }
    }
    last
}

/// Ex interim payoffs indexed as `values[player][type]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PayoffVector {
    pub values: Vec<Vec<f64>>,
}

impl PayoffVector {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        PayoffVector { values }
    }

    pub fn get(&self, j: usize, t_j: usize) -> f64 {
        self.values[j][t_j]
    }

    pub fn max_abs_diff(&self, other: &PayoffVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// A joint action for every type profile, produced by fixing the shared uniform.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicProfile {
    pub actions: Vec<usize>,
}

impl DeterministicProfile {
    pub fn action(&self, t: usize) -> usize {
        self.actions[t]
    }
}

/// Expected payoff of player j of type t_j when everyone follows the full-profile policy.
pub fn ex_interim_payoff(game: &BayesianGame, mu: &CorrelatedPolicy, j: usize, t_j: usize) -> Result<f64, GameError> {
    match mu.scope {
        Scope::FullProfile => reported_inner(game, mu, j, t_j, t_j),
        Scope::ReportedType(k) if k == j => reported_inner(game, mu, j, t_j, t_j),
        _ => Err(GameError::Scope { expected: "full-profile".into(), found: mu.scope.to_string() }),
    }
}

/// Expected payoff of player j of true type t_j who reports s_j to the policy.
pub fn reported_payoff(
    game: &BayesianGame,
    mu: &CorrelatedPolicy,
    j: usize,
    t_j: usize,
    s_j: usize,
) -> Result<f64, GameError> {
    mu.require(matches!(mu.scope, Scope::FullProfile) || mu.scope == Scope::ReportedType(j), "full-profile")?;
    reported_inner(game, mu, j, t_j, s_j)
}

fn reported_inner(game: &BayesianGame, mu: &CorrelatedPolicy, j: usize, t_j: usize, s_j: usize) -> Result<f64, GameError> {
    let m = game.marginal(j, t_j);
    if m <= 0.0 {
        return Err(GameError::ZeroMarginal { player: j, type_index: t_j });
    }
    let ts = game.type_space();
    let rest = ts.without(j);
    let mut total = 0.0;
    for r in 0..rest.len() {
        let t = ts.join(j, t_j, r);
        let q = game.prior(t);
        if q == 0.0 {
            continue;
        }
        let row = mu.row(ts.join(j, s_j, r));
        let mut v = 0.0;
        for (a, &p) in row.iter().enumerate() {
            if p != 0.0 {
                v += p * game.u(t, a, j);
            }
        }
        total += q / m * v;
    }
    Ok(total)
}

/// Ex interim payoffs of every (player, type); zero-marginal types are reported as 0.
pub fn induced_payoffs(game: &BayesianGame, mu: &CorrelatedPolicy) -> Result<PayoffVector, GameError> {
    let mut values = Vec::with_capacity(game.n_players());
    for j in 0..game.n_players() {
        let mut vj = Vec::with_capacity(game.n_types(j));
        for t_j in 0..game.n_types(j) {
            vj.push(if game.marginal(j, t_j) > 0.0 { ex_interim_payoff(game, mu, j, t_j)? } else { 0.0 });
        }
        values.push(vj);
    }
    Ok(PayoffVector::new(values))
}

/// Expected payoff of j of type t_j playing a_j while the others follow punishment `tau` (scope MinusPlayer(j)).
pub fn deviation_payoff(
    game: &BayesianGame,
    tau: &CorrelatedPolicy,
    j: usize,
    t_j: usize,
    a_j: usize,
) -> Result<f64, GameError> {
    tau.require(tau.scope == Scope::MinusPlayer(j), &format!("minus-player({j})"))?;
    let m = game.marginal(j, t_j);
    if m <= 0.0 {
        return Err(GameError::ZeroMarginal { player: j, type_index: t_j });
    }
    let ts = game.type_space();
    let acts = game.action_space();
    let mut total = 0.0;
    for r in 0..tau.condition.len() {
        let t = ts.join(j, t_j, r);
        let q = game.prior(t);
        if q == 0.0 {
            continue;
        }
        let mut v = 0.0;
        for (b, &p) in tau.row(r).iter().enumerate() {
            if p != 0.0 {
                v += p * game.u(t, acts.join(j, a_j, b), j);
            }
        }
        total += q / m * v;
    }
    Ok(total)
}

/// Best-response value and the lowest maximizing action of j of type t_j against `tau`.
pub fn best_response(game: &BayesianGame, tau: &CorrelatedPolicy, j: usize, t_j: usize) -> Result<(f64, usize), GameError> {
    let mut best = (f64::NEG_INFINITY, 0);
    for a_j in 0..game.n_actions(j) {
        let v = deviation_payoff(game, tau, j, t_j, a_j)?;
        if v > best.0 {
            best = (v, a_j);
        }
    }
    Ok(best)
}

/// Fixes the shared uniform at `c` and returns the joint action drawn for every type profile.
pub fn desugar_at(mu: &CorrelatedPolicy, c: f64) -> Result<DeterministicProfile, GameError> {
    mu.require(mu.scope == Scope::FullProfile, "full-profile")?;
    Ok(DeterministicProfile { actions: (0..mu.condition.len()).map(|t| mu.sample(t, c)).collect() })
}

/// Desugars the policy with the shared uniform of `trial`.
pub fn desugar_policy(mu: &CorrelatedPolicy, signal: &dyn SignalSource, trial: u64) -> Result<DeterministicProfile, GameError> {
    desugar_at(mu, signal.c(trial))
}

/// Payoffs of all players at type profile `t` under a deterministic profile.
pub fn ex_post_payoffs(game: &BayesianGame, profile: &DeterministicProfile, t: usize) -> Vec<f64> {
    game.payoffs(t, profile.action(t)).to_vec()
}


#[cfg(test)]
mod sampler_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn sampler_agrees_with_inverse_cdf(raw in prop::collection::vec(0.0f64..1.0, 1..8), zeros in prop::collection::vec(any::<bool>(), 8), c in 0.0f64..1.0) {
            let mut row: Vec<f64> = raw.iter().zip(&zeros).map(|(p, z)| if *z { 0.0 } else { *p }).collect();
            if row.iter().sum::<f64>() == 0.0 { row[0] = 1.0; }
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
            let pol = CorrelatedPolicy::new(Scope::FullProfile, Radix::new(vec![1]), Radix::new(vec![row.len()]), vec![row.clone()]);
            prop_assume!(pol.is_ok());
            let pol = pol.unwrap();
            prop_assert_eq!(Sampler::new(&pol).sample(0, c), inverse_cdf(&row, c));
        }
    }
}
