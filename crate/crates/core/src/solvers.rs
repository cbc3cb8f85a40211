//! Feasibility, interim individual rationality, incentive compatibility and efficiency checks.

use serde::Serialize;
use thiserror::Error;

use crate::game::{induced_payoffs, reported_payoff, BayesianGame, CorrelatedPolicy, GameError, PayoffVector};
use crate::lp::{lp_solve, LinearProgram, LpError, LpStatus, Relation, Sense};

pub const DEFAULT_TOL: f64 = 1e-9;
/// Largest allowed gap between a claimed payoff vector and the one a policy induces.
pub const CONSISTENCY_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("payoff vector is not induced by the policy (max gap {0:e})")]
    Consistency(f64),
    #[error("payoff vector shape does not match the game: {0}")]
    Shape(String),
    #[error("linear program ended with status {0:?}")]
    Status(LpStatus),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub player: Option<usize>,
    pub type_index: Option<usize>,
    /// Misreported type for incentive violations.
    pub reported: Option<usize>,
    pub gain: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Witness {
    Policy(CorrelatedPolicy),
    Punishments(Vec<CorrelatedPolicy>),
    Distribution(Vec<f64>),
}

#[derive(Clone, Debug, Serialize)]
pub struct SolverReport {
    pub verdict: bool,
    pub witness: Option<Witness>,
    pub violations: Vec<Violation>,
    pub tol: f64,
    /// Phase-1 optimum when a linear program was found infeasible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<f64>,
}

fn check_shape(game: &BayesianGame, x: &PayoffVector) -> Result<(), SolverError> {
    if x.values.len() != game.n_players() {
        return Err(SolverError::Shape(format!("{} players, expected {}", x.values.len(), game.n_players())));
    }
    for (j, v) in x.values.iter().enumerate() {
        if v.len() != game.n_types(j) {
            return Err(SolverError::Shape(format!("player {j} has {} entries, expected {}", v.len(), game.n_types(j))));
        }
    }
    Ok(())
}

/// Is there a correlated policy whose ex interim payoffs are within `tol` of `x`?
pub fn check_feasible(game: &BayesianGame, x: &PayoffVector, tol: f64) -> Result<SolverReport, SolverError> {
    check_shape(game, x)?;
    let ts = game.type_space();
    let na = game.action_space().len();
    let support: Vec<usize> = (0..ts.len()).filter(|&t| game.prior(t) > 0.0).collect();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let first = lp.add_vars(support.len() * na);
    let var = |s: usize, a: usize| first + s * na + a;
    for s in 0..support.len() {
        lp.add_constraint((0..na).map(|a| (var(s, a), 1.0)).collect(), Relation::Eq, 1.0);
    }
    for j in 0..game.n_players() {
        for t_j in 0..game.n_types(j) {
            let m = game.marginal(j, t_j);
            if m <= 0.0 {
                continue;
            }
            let mut coeffs = Vec::new();
            for (s, &t) in support.iter().enumerate() {
                if ts.digit(t, j) == t_j {
                    let w = game.prior(t) / m;
                    for a in 0..na {
                        let u = game.u(t, a, j);
                        if u != 0.0 {
                            coeffs.push((var(s, a), w * u));
                        }
                    }
                }
            }
            lp.add_constraint(coeffs.clone(), Relation::Le, x.get(j, t_j) + tol);
            lp.add_constraint(coeffs, Relation::Ge, x.get(j, t_j) - tol);
        }
    }
    let sol = lp_solve(&lp)?;
    match sol.status {
        LpStatus::Infeasible => Ok(SolverReport {
            verdict: false,
            witness: None,
            violations: Vec::new(),
            tol,
            certificate: Some(sol.infeasibility),
        }),
        LpStatus::Optimal => {
            let mut rows = vec![point_mass(na, 0); ts.len()];
            for (s, &t) in support.iter().enumerate() {
                rows[t] = normalized((0..na).map(|a| sol.x[var(s, a)]).collect());
            }
            let mu = CorrelatedPolicy::full(game, rows)?;
            Ok(SolverReport { verdict: true, witness: Some(Witness::Policy(mu)), violations: Vec::new(), tol, certificate: None })
        }
        other => Err(SolverError::Status(other)),
    }
}

/// Punishment against `j` minimizing the largest best-response excess over `x_j`, and that excess.
pub fn minimax_policy(game: &BayesianGame, j: usize, x: &PayoffVector) -> Result<(CorrelatedPolicy, f64), SolverError> {
    check_shape(game, x)?;
    let ts = game.type_space();
    let acts = game.action_space();
    let cond = ts.without(j);
    let out = acts.without(j);
    let nb = out.len();
    // Only conditioning profiles that carry mass for some type of j get variables.
    let live: Vec<usize> =
        (0..cond.len()).filter(|&r| (0..game.n_types(j)).any(|t_j| game.prior(ts.join(j, t_j, r)) > 0.0)).collect();
    let mut lp = LinearProgram::new(Sense::Minimize);
    let v = lp.add_var(f64::NEG_INFINITY, f64::INFINITY, 1.0);
    let first = lp.add_vars(live.len() * nb);
    let var = |l: usize, b: usize| first + l * nb + b;
    for l in 0..live.len() {
        lp.add_constraint((0..nb).map(|b| (var(l, b), 1.0)).collect(), Relation::Eq, 1.0);
    }
    for t_j in 0..game.n_types(j) {
        let m = game.marginal(j, t_j);
        if m <= 0.0 {
            continue;
        }
        for a_j in 0..game.n_actions(j) {
            let mut coeffs = vec![(v, -1.0)];
            for (l, &r) in live.iter().enumerate() {
                let t = ts.join(j, t_j, r);
                let q = game.prior(t) / m;
                if q == 0.0 {
                    continue;
                }
                for b in 0..nb {
                    let u = game.u(t, acts.join(j, a_j, b), j);
                    if u != 0.0 {
                        coeffs.push((var(l, b), q * u));
                    }
                }
            }
            lp.add_constraint(coeffs, Relation::Le, x.get(j, t_j));
        }
    }
    let sol = lp_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(SolverError::Status(sol.status));
    }
    let mut rows = vec![point_mass(nb, 0); cond.len()];
    for (l, &r) in live.iter().enumerate() {
        rows[r] = normalized((0..nb).map(|b| sol.x[var(l, b)]).collect());
    }
    let tau = CorrelatedPolicy::minus(game, j, rows)?;
    Ok((tau, sol.x[v]))
}

/// Can every player be held to `x` by some punishment of the others, type by type?
pub fn check_intir(game: &BayesianGame, x: &PayoffVector, tol: f64) -> Result<SolverReport, SolverError> {
    check_shape(game, x)?;
    let mut punishments = Vec::with_capacity(game.n_players());
    let mut violations = Vec::new();
    for j in 0..game.n_players() {
        let (tau, value) = minimax_policy(game, j, x)?;
        if value > tol {
            for t_j in 0..game.n_types(j) {
                if game.marginal(j, t_j) <= 0.0 {
                    continue;
                }
                let (br, _) = crate::game::best_response(game, &tau, j, t_j)?;
                let gain = br - x.get(j, t_j);
                if gain > tol {
                    violations.push(Violation { player: Some(j), type_index: Some(t_j), reported: None, gain });
                }
            }
        }
        punishments.push(tau);
    }
    let verdict = violations.is_empty();
    Ok(SolverReport {
        verdict,
        witness: if verdict { Some(Witness::Punishments(punishments)) } else { None },
        violations,
        tol,
        certificate: None,
    })
}

/// Does any type gain more than `tol` by misreporting to `mu`?
pub fn check_ic(game: &BayesianGame, mu: &CorrelatedPolicy, x: &PayoffVector, tol: f64) -> Result<SolverReport, SolverError> {
    check_shape(game, x)?;
    let induced = induced_payoffs(game, mu)?;
    let mut gap = 0.0f64;
    for j in 0..game.n_players() {
        for t_j in 0..game.n_types(j) {
            if game.marginal(j, t_j) > 0.0 {
                gap = gap.max((induced.get(j, t_j) - x.get(j, t_j)).abs());
            }
        }
    }
    if gap > CONSISTENCY_TOL {
        return Err(SolverError::Consistency(gap));
    }
    let mut violations = Vec::new();
    for j in 0..game.n_players() {
        for t_j in 0..game.n_types(j) {
            if game.marginal(j, t_j) <= 0.0 {
                continue;
            }
            for s_j in 0..game.n_types(j) {
                if s_j == t_j {
                    continue;
                }
                let gain = reported_payoff(game, mu, j, t_j, s_j)? - x.get(j, t_j);
                if gain > tol {
                    violations.push(Violation { player: Some(j), type_index: Some(t_j), reported: Some(s_j), gain });
                }
            }
        }
    }
    Ok(SolverReport { verdict: violations.is_empty(), witness: None, violations, tol, certificate: None })
}

/// Is the payoff profile `x_t` at type profile `t` undominated by any distribution over joint actions?
pub fn check_efficient(game: &BayesianGame, t: usize, x_t: &[f64], tol: f64) -> Result<SolverReport, SolverError> {
    let n = game.n_players();
    if x_t.len() != n {
        return Err(SolverError::Shape(format!("{} payoffs, expected {n}", x_t.len())));
    }
    let na = game.action_space().len();
    let mut lp = LinearProgram::new(Sense::Maximize);
    let first = lp.add_vars(na);
    let slack: Vec<usize> = (0..n).map(|_| lp.add_var(0.0, f64::INFINITY, 1.0)).collect();
    lp.add_constraint((0..na).map(|a| (first + a, 1.0)).collect(), Relation::Eq, 1.0);
    for i in 0..n {
        let mut coeffs: Vec<(usize, f64)> =
            (0..na).filter_map(|a| Some((first + a, game.u(t, a, i))).filter(|e| e.1 != 0.0)).collect();
        coeffs.push((slack[i], -1.0));
        lp.add_constraint(coeffs, Relation::Ge, x_t[i]);
    }
    let sol = lp_solve(&lp)?;
    match sol.status {
        // Nothing weakly dominates x_t, so it cannot be improved upon.
        LpStatus::Infeasible => {
            Ok(SolverReport { verdict: true, witness: None, violations: Vec::new(), tol, certificate: Some(sol.infeasibility) })
        }
        LpStatus::Optimal => {
            let total = sol.objective;
            if total <= tol {
                Ok(SolverReport { verdict: true, witness: None, violations: Vec::new(), tol, certificate: None })
            } else {
                let dist = normalized((0..na).map(|a| sol.x[first + a]).collect());
                Ok(SolverReport {
                    verdict: false,
                    witness: Some(Witness::Distribution(dist)),
                    violations: vec![Violation { player: None, type_index: None, reported: None, gain: total }],
                    tol,
                    certificate: None,
                })
            }
        }
        other => Err(SolverError::Status(other)),
    }
}

fn point_mass(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Clips LP round-off and rescales to a probability vector.
fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|p| {
        if *p < 1e-15 {
            *p = 0.0
        }
    });
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        v.iter_mut().for_each(|p| *p /= s);
    } else {
        v[0] = 1.0;
    }
    v
}
