//! Bargaining over a divisible prize under threat of war, with an optional weak point.
//!
//! Country 1 offers country 2 a share y of the prize and may attack one of two weak
//! points. Country 2 knows its strength (weak or strong) and, in the weak-point variant,
//! which point is vulnerable; it accepts or rejects the offer. War gives country 2 its
//! strength-dependent win probability minus costs.

use serde::{Deserialize, Serialize};

use crate::disclosure::{solve_disclosure_game, DisclosureError, DisclosureOptions, DisclosureSpace, Unraveling};
use crate::game::{BayesianGame, CorrelatedPolicy, GameError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarParams {
    pub p_w: f64,
    pub p_s: f64,
    pub c_1: f64,
    pub c_2: f64,
    pub z: f64,
    pub c_a1: f64,
    pub c_a2: f64,
    pub q_strong: f64,
    pub grid: usize,
}

impl Default for WarParams {
    fn default() -> Self {
        WarParams { p_w: 0.2, p_s: 0.6, c_1: 0.1, c_2: 0.1, z: 0.2, c_a1: 0.3, c_a2: 0.15, q_strong: 0.3, grid: 101 }
    }
}

impl WarParams {
    /// Prior probability of strength above which country 1 prefers the high offer.
    pub fn q_threshold(&self) -> f64 {
        (self.p_s - self.p_w) / (self.p_s - self.p_w + self.c_1 + self.c_2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strength {
    Weak,
    Strong,
}

/// The flattened war game and the meaning of its action indices.
#[derive(Clone, Debug)]
pub struct WarGame {
    pub game: BayesianGame,
    pub params: WarParams,
    pub weak_point: bool,
    /// Offer shares to country 2, ascending.
    pub shares: Vec<f64>,
    /// Country 2 types as (strength, vulnerable point).
    pub types: Vec<(Strength, usize)>,
}

const ATTACKS: [&str; 3] = ["none", "w1", "w2"];

impl WarGame {
    pub fn n_attacks(&self) -> usize {
        if self.weak_point {
            3
        } else {
            1
        }
    }

    /// Country 1 action index for (share index, attack); attack 0 is no attack, k attacks point k.
    pub fn offer_action(&self, share: usize, attack: usize) -> usize {
        share * self.n_attacks() + attack
    }

    pub fn decode_offer(&self, a: usize) -> (f64, usize) {
        (self.shares[a / self.n_attacks()], a % self.n_attacks())
    }

    /// Country 2 action that accepts exactly the shares at or above `shares[k]`.
    pub fn threshold_action(&self, k: usize) -> usize {
        k
    }

    pub fn reject_action(&self) -> usize {
        self.shares.len()
    }

    pub fn share_index(&self, y: f64) -> Option<usize> {
        self.shares.iter().position(|s| (s - y).abs() <= 1e-12)
    }

    pub fn win_prob(&self, s: Strength) -> f64 {
        match s {
            Strength::Weak => self.params.p_w,
            Strength::Strong => self.params.p_s,
        }
    }

    /// Target policy: country 1 offers country 2 its win probability, which is accepted, and nobody attacks.
    pub fn target_policy(&self) -> Result<CorrelatedPolicy, GameError> {
        CorrelatedPolicy::deterministic(&self.game, |t| {
            let (s, _) = self.types[t[1]];
            let k = self.share_index(self.win_prob(s)).expect("win probabilities are on the grid");
            vec![self.offer_action(k, 0), self.threshold_action(k)]
        })
    }
}

/// Offer grid: multiples of 1/(grid-1) plus the landmark shares, deduplicated.
pub fn offer_grid(params: &WarParams) -> Vec<f64> {
    let g = params.grid.max(2);
    let mut shares: Vec<f64> = (0..g).map(|k| k as f64 / (g - 1) as f64).collect();
    for y in [params.p_w - params.c_2, params.p_s - params.c_2, params.p_w, params.p_s] {
        if (0.0..=1.0).contains(&y) {
            shares.push(y);
        }
    }
    shares.sort_by(f64::total_cmp);
    shares.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    shares
}

pub fn build_war_game(params: &WarParams, weak_point: bool) -> Result<WarGame, GameError> {
    let shares = offer_grid(params);
    let types: Vec<(Strength, usize)> = if weak_point {
        vec![(Strength::Weak, 1), (Strength::Weak, 2), (Strength::Strong, 1), (Strength::Strong, 2)]
    } else {
        vec![(Strength::Weak, 0), (Strength::Strong, 0)]
    };
    let type_names: Vec<String> = types
        .iter()
        .map(|(s, v)| {
            let base = if *s == Strength::Weak { "weak" } else { "strong" };
            if weak_point {
                format!("{base}-w{v}")
            } else {
                base.to_string()
            }
        })
        .collect();
    let prior: Vec<f64> = types
        .iter()
        .map(|(s, _)| {
            let p = if *s == Strength::Strong { params.q_strong } else { 1.0 - params.q_strong };
            if weak_point {
                p / 2.0
            } else {
                p
            }
        })
        .collect();
    let n_att = if weak_point { 3 } else { 1 };
    let mut c1_actions = Vec::new();
    for y in &shares {
        for att in ATTACKS.iter().take(n_att) {
            c1_actions.push(format!("offer={y}/attack={att}"));
        }
    }
    let mut c2_actions: Vec<String> = shares.iter().map(|y| format!("accept>={y}")).collect();
    c2_actions.push("reject".into());
    let p = params.clone();
    let sh = shares.clone();
    let ty = types.clone();
    let game = BayesianGame::from_fn(vec![vec!["c1".into()], type_names], vec![c1_actions, c2_actions], prior, |t, a, out| {
        let (strength, point) = ty[t[1]];
        let y = sh[a[0] / n_att];
        let attack = a[0] % n_att;
        let accepted = a[1] < sh.len() && y >= sh[a[1]] - 1e-12;
        let win = if strength == Strength::Weak { p.p_w } else { p.p_s };
        let (mut u1, mut u2) = if accepted { (1.0 - y, y) } else { (1.0 - win - p.c_1, win - p.c_2) };
        if attack != 0 {
            if attack == point {
                u1 += p.z;
                u2 -= p.c_a2;
            } else {
                u1 -= p.c_a1;
            }
        }
        out[0] = u1;
        out[1] = u2;
    })?;
    Ok(WarGame { game, params: params.clone(), weak_point, shares, types })
}

/// Equilibrium of the disclosure game followed by bargaining.
#[derive(Clone, Debug, Serialize)]
pub struct WarPbe {
    pub q_strong: f64,
    pub weak_point: bool,
    pub classification: Unraveling,
    /// Share offered to an undisclosed country 2 (None when every type discloses).
    pub pooled_offer: Option<f64>,
    pub payoff_weak: f64,
    pub payoff_strong: f64,
    /// Strong type's payoff from revealing itself unconditionally.
    pub strong_disclosure_payoff: f64,
    pub strong_disclosure_gap: f64,
    pub payoff_country1: f64,
}

/// Solves the voluntary-disclosure equilibrium of the war game numerically.
pub fn war_pbe(params: &WarParams, weak_point: bool) -> Result<WarPbe, DisclosureError> {
    let war = build_war_game(params, weak_point)?;
    let g = &war.game;
    let out = solve_disclosure_game(g, &DisclosureSpace::all_or_nothing(g), &DisclosureOptions::default())?;
    let mut pooled_offer = None;
    let mut weak = (0.0, 0.0);
    let mut strong = (0.0, 0.0);
    let mut strong_dev = (0.0, 0.0);
    for (k, (s, _)) in war.types.iter().enumerate() {
        let w = g.marginal(1, k);
        if out.messages[1][k][0].len() > 1 {
            pooled_offer = Some(war.decode_offer(g.action_space().digit(out.actions[k], 0)).0);
        }
        let acc = if *s == Strength::Weak { &mut weak } else { &mut strong };
        acc.0 += w * out.type_payoffs[1][k];
        acc.1 += w;
        if *s == Strength::Strong {
            strong_dev.0 += w * out.full_disclosure_payoffs[1][k];
            strong_dev.1 += w;
        }
    }
    let payoff_strong = strong.0 / strong.1;
    let strong_disclosure_payoff = strong_dev.0 / strong_dev.1;
    Ok(WarPbe {
        q_strong: params.q_strong,
        weak_point,
        classification: out.classification,
        pooled_offer,
        payoff_weak: weak.0 / weak.1,
        payoff_strong,
        strong_disclosure_payoff,
        strong_disclosure_gap: payoff_strong - strong_disclosure_payoff,
        payoff_country1: out.type_payoffs[0][0],
    })
}

/// Closed-form pooling outcome with a weak point: (offer, weak payoff, strong payoff, strong disclosure payoff).
pub fn war_pbe_closed_form(params: &WarParams) -> (f64, f64, f64, f64) {
    let low = params.p_w - params.c_2;
    let high = params.p_s - params.c_2;
    let offer = if params.q_strong <= params.q_threshold() { low } else { high };
    let weak = offer.max(params.p_w - params.c_2);
    let strong = if offer >= high { offer } else { params.p_s - params.c_2 };
    (offer, weak, strong, high - params.c_a2)
}
