//! Two-bidder all-pay auction with uniform private valuations.
//!
//! Payoff of bidder i is s_i (1[x_i >= x_-i] - 1/2 1[x_i = x_-i]) - x_i. The symmetric
//! equilibrium bids s^2/2 and earns s^2/2 in the interim. The capped policy lets only the
//! higher valuation bid, paying min(eps_bid, s^3/2).

use serde::{Deserialize, Serialize};

use crate::game::{induced_payoffs, BayesianGame, CorrelatedPolicy, GameError};
use crate::solvers::{check_feasible, check_ic, check_intir, SolverError};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuctionParams {
    /// Number of valuation grid points on [0, 1].
    pub grid: usize,
    pub eps_bid: f64,
    /// Number of uniform candidate bids on [0, 1/2] used for best responses.
    pub bid_grid: usize,
    /// Valuation grid points in the small game sent through the general solvers.
    pub small_grid: usize,
}

impl Default for AuctionParams {
    fn default() -> Self {
        AuctionParams { grid: 101, eps_bid: 0.1, bid_grid: 2001, small_grid: 4 }
    }
}

impl AuctionParams {
    pub fn validate(&self) -> Result<(), GameError> {
        if self.grid < 2 || self.bid_grid < 2 || self.small_grid < 2 {
            return Err(GameError::Invalid("auction grids need at least two points".into()));
        }
        if !(self.eps_bid > 0.0 && self.eps_bid.is_finite()) {
            return Err(GameError::Invalid("eps_bid must be positive".into()));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        1.0 / (self.grid - 1) as f64
    }

    pub fn valuations(&self) -> Vec<f64> {
        (0..self.grid).map(|k| k as f64 * self.step()).collect()
    }
}

pub fn equilibrium_bid(s: f64) -> f64 {
    s * s / 2.0
}

/// Bid of the higher valuation under the capped policy.
pub fn policy_bid(s: f64, eps_bid: f64) -> f64 {
    eps_bid.min(s.powi(3) / 2.0)
}

/// s^2 - s min(eps_bid, s^3/2)
pub fn policy_payoff_closed_form(s: f64, eps_bid: f64) -> f64 {
    s * s - s * policy_bid(s, eps_bid)
}

/// Ex post payoff of a bidder with valuation s bidding x against bid y.
pub fn ex_post(s: f64, x: f64, y: f64) -> f64 {
    let win = if x > y {
        1.0
    } else if x == y {
        0.5
    } else {
        0.0
    };
    s * win - x
}

#[derive(Clone, Debug, Serialize)]
pub struct AuctionRow {
    pub s: f64,
    pub equilibrium_bid: f64,
    /// Best-response gain over the equilibrium bid on the discretized game.
    pub eta: f64,
    pub best_bid: f64,
    pub equilibrium_payoff: f64,
    pub equilibrium_closed_form: f64,
    pub policy_payoff: f64,
    pub policy_closed_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IcWitness {
    pub true_s: f64,
    pub reported_s: f64,
    pub gain: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmallGameCheck {
    pub valuations: Vec<f64>,
    pub feasible: bool,
    pub intir: bool,
    pub ic: bool,
    pub ic_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AuctionReport {
    pub params: AuctionParams,
    pub tol: f64,
    pub max_eta: f64,
    pub best_response_ok: bool,
    pub max_equilibrium_error: f64,
    pub equilibrium_payoff_ok: bool,
    pub max_policy_error: f64,
    pub policy_dominates: bool,
    pub policy_payoff_ok: bool,
    pub ic_witness: Option<IcWitness>,
    pub max_welfare_gap: f64,
    pub welfare_ok: bool,
    pub small_game: SmallGameCheck,
    pub verdict: bool,
    pub rows: Vec<AuctionRow>,
}

/// Exact interim payoff of the capped policy against a uniform opponent, by integrating
/// the piecewise-constant ex post payoff over the opponent's valuation.
fn policy_interim(s: f64, eps_bid: f64) -> f64 {
    // Opponent below s: we win and pay; above s: we bid nothing and lose.
    let segments = [(0.0, s, s - policy_bid(s, eps_bid)), (s, 1.0, 0.0)];
    segments.iter().map(|&(lo, hi, v)| (hi - lo) * v).sum()
}

/// Interim payoff of bidding x against the discretized equilibrium.
fn discrete_interim(s: f64, x: f64, opponent_bids: &[f64]) -> f64 {
    opponent_bids.iter().map(|&y| ex_post(s, x, y)).sum::<f64>() / opponent_bids.len() as f64
}

pub fn auction_checks(params: &AuctionParams) -> Result<AuctionReport, SolverError> {
    params.validate()?;
    let tol = 2.0 * params.step();
    let eps = params.eps_bid;
    let vals = params.valuations();
    let opp: Vec<f64> = vals.iter().map(|&s| equilibrium_bid(s)).collect();
    let mut candidates: Vec<f64> = (0..params.bid_grid).map(|k| 0.5 * k as f64 / (params.bid_grid - 1) as f64).collect();
    for &b in &opp {
        candidates.push(b);
        candidates.push(b + 1e-9);
    }
    let rows: Vec<AuctionRow> = vals
        .iter()
        .map(|&s| {
            let eq = discrete_interim(s, equilibrium_bid(s), &opp);
            let (best_bid, best) = candidates
                .iter()
                .map(|&x| (x, discrete_interim(s, x, &opp)))
                .fold((0.0, f64::NEG_INFINITY), |acc, (x, v)| if v > acc.1 { (x, v) } else { acc });
            AuctionRow {
                s,
                equilibrium_bid: equilibrium_bid(s),
                eta: (best - eq).max(0.0),
                best_bid,
                equilibrium_payoff: eq,
                equilibrium_closed_form: s * s / 2.0,
                policy_payoff: policy_interim(s, eps),
                policy_closed_form: policy_payoff_closed_form(s, eps),
            }
        })
        .collect();
    let max_eta = rows.iter().map(|r| r.eta).fold(0.0, f64::max);
    let max_equilibrium_error =
        rows.iter().map(|r| (r.equilibrium_payoff - r.equilibrium_closed_form).abs()).fold(0.0, f64::max);
    let max_policy_error = rows.iter().map(|r| (r.policy_payoff - r.policy_closed_form).abs()).fold(0.0, f64::max);
    let policy_dominates = rows.iter().all(|r| {
        let margin = r.policy_closed_form - r.equilibrium_closed_form;
        if r.s == 0.0 {
            margin.abs() <= 1e-15
        } else {
            margin > 0.0
        }
    });

    let mut ic_witness: Option<IcWitness> = None;
    for &s in &vals {
        for &r in vals.iter().filter(|&&r| r > s) {
            let gain = policy_interim_report(s, r, eps) - policy_interim(s, eps);
            if gain > ic_witness.as_ref().map_or(1e-12, |w| w.gain) {
                ic_witness = Some(IcWitness { true_s: s, reported_s: r, gain });
            }
        }
    }

    let mut max_welfare_gap: f64 = 0.0;
    for &s1 in &vals {
        for &s2 in vals.iter().filter(|&&s2| s2 < s1) {
            let welfare = ex_post(s1, policy_bid(s1, eps), 0.0) + ex_post(s2, 0.0, policy_bid(s1, eps));
            max_welfare_gap = max_welfare_gap.max(s1 - welfare);
        }
    }

    let small_game = small_game_check(params)?;
    let best_response_ok = max_eta <= tol;
    let equilibrium_payoff_ok = max_equilibrium_error <= tol;
    let policy_payoff_ok = max_policy_error <= 1e-12 && policy_dominates;
    let welfare_ok = max_welfare_gap <= eps + 1e-12;
    let verdict = best_response_ok
        && equilibrium_payoff_ok
        && policy_payoff_ok
        && ic_witness.is_some()
        && welfare_ok
        && small_game.feasible
        && !small_game.ic;
    Ok(AuctionReport {
        params: params.clone(),
        tol,
        max_eta,
        best_response_ok,
        max_equilibrium_error,
        equilibrium_payoff_ok,
        max_policy_error,
        policy_dominates,
        policy_payoff_ok,
        ic_witness,
        max_welfare_gap,
        welfare_ok,
        small_game,
        verdict,
        rows,
    })
}

/// Interim payoff of valuation s when the policy treats it as valuation r.
fn policy_interim_report(s: f64, r: f64, eps_bid: f64) -> f64 {
    r * (s - policy_bid(r, eps_bid))
}

/// The discretized auction as a finite Bayesian game with bids restricted to the
/// equilibrium and policy bids of the grid.
pub fn small_auction_game(valuations: &[f64], eps_bid: f64) -> Result<(BayesianGame, Vec<f64>), GameError> {
    let mut bids: Vec<f64> = vec![0.0];
    for &s in valuations {
        bids.push(equilibrium_bid(s));
        bids.push(policy_bid(s, eps_bid));
    }
    bids.sort_by(f64::total_cmp);
    bids.dedup();
    let names = |xs: &[f64], p: &str| xs.iter().map(|x| format!("{p}{x:.6}")).collect::<Vec<_>>();
    let k = valuations.len();
    let prior = vec![1.0 / (k * k) as f64; k * k];
    let game = BayesianGame::from_fn(
        vec![names(valuations, "s="); 2],
        vec![names(&bids, "x="); 2],
        prior,
        |t, a, out| {
            out[0] = ex_post(valuations[t[0]], bids[a[0]], bids[a[1]]);
            out[1] = ex_post(valuations[t[1]], bids[a[1]], bids[a[0]]);
        },
    )?;
    Ok((game, bids))
}

fn small_game_check(params: &AuctionParams) -> Result<SmallGameCheck, SolverError> {
    let n = params.small_grid;
    let valuations: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let (game, bids) = small_auction_game(&valuations, params.eps_bid)?;
    let index = |x: f64| bids.iter().position(|&b| b == x).expect("policy bid on the grid");
    let mu = CorrelatedPolicy::deterministic(&game, |t| {
        let (s1, s2) = (valuations[t[0]], valuations[t[1]]);
        if s1 > s2 {
            vec![index(policy_bid(s1, params.eps_bid)), 0]
        } else if s2 > s1 {
            vec![0, index(policy_bid(s2, params.eps_bid))]
        } else {
            vec![0, 0]
        }
    })?;
    let x = induced_payoffs(&game, &mu)?;
    let tol = crate::solvers::DEFAULT_TOL;
    let feasible = check_feasible(&game, &x, tol)?.verdict;
    let intir = check_intir(&game, &x, tol)?.verdict;
    let ic_report = check_ic(&game, &mu, &x, tol)?;
    let ic_gap = ic_report.violations.iter().map(|v| v.gain).fold(0.0, f64::max);
    Ok(SmallGameCheck { valuations, feasible, intir, ic: ic_report.verdict, ic_gap })
}
