//! Voluntary verifiable disclosure followed by play of the base game.
//!
//! Each player sends every other player a verifiable set of types containing its own.
//! Receivers update by Bayes' rule on path; an off-path message is met with skepticism
//! (belief on the consistent type that fares worst when believed). The action stage is
//! solved by iterated removal of weakly dominated actions followed by best-response
//! dynamics, and disclosure strategies are searched in a fixed canonical order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{BayesianGame, CorrelatedPolicy, GameError, RawDisclosureSpaces};
use crate::solvers::{check_feasible, check_ic, check_intir, SolverError};

const EQ_TOL: f64 = 1e-12;
const MAX_CANDIDATES: usize = 1 << 16;
const MAX_BR_ROUNDS: usize = 100;
const MAX_BELIEF_ROUNDS: usize = 10;

#[derive(Debug, Error)]
pub enum DisclosureError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid disclosure space: {0}")]
    Space(String),
    #[error("{0} candidate disclosure strategies exceed the search limit")]
    TooManyCandidates(usize),
    #[error("no pure equilibrium found among {0} disclosure strategies")]
    NoPureEquilibrium(usize),
}

/// Admissible disclosure sets: `sets[i][t_i]` lists sorted type sets of player i, each containing t_i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisclosureSpace {
    pub sets: Vec<Vec<Vec<Vec<usize>>>>,
}

impl DisclosureSpace {
    /// Each type may reveal itself exactly or reveal nothing.
    pub fn all_or_nothing(game: &BayesianGame) -> Self {
        let sets = (0..game.n_players())
            .map(|i| {
                let k = game.n_types(i);
                (0..k).map(|t| if k == 1 { vec![vec![0]] } else { vec![vec![t], (0..k).collect()] }).collect()
            })
            .collect();
        DisclosureSpace { sets }
    }

    /// Every set containing the true type (players with at most 12 types).
    pub fn unrestricted(game: &BayesianGame) -> Result<Self, DisclosureError> {
        let mut sets = Vec::new();
        for i in 0..game.n_players() {
            let k = game.n_types(i);
            if k > 12 {
                return Err(DisclosureError::Space(format!("player {i} has {k} types")));
            }
            let mut per_type = Vec::new();
            for t in 0..k {
                let mut opts: Vec<Vec<usize>> = (0u32..1 << k)
                    .filter(|m| m & (1 << t) != 0)
                    .map(|m| (0..k).filter(|b| m & (1 << b) != 0).collect())
                    .collect();
                opts.sort_by_key(|s: &Vec<usize>| (s.len(), s.clone()));
                per_type.push(opts);
            }
            sets.push(per_type);
        }
        Ok(DisclosureSpace { sets })
    }

    pub fn from_raw(game: &BayesianGame, raw: &RawDisclosureSpaces) -> Result<Self, DisclosureError> {
        if raw.len() != game.n_players() {
            return Err(DisclosureError::Space(format!("{} players listed, expected {}", raw.len(), game.n_players())));
        }
        let mut sets = Vec::new();
        for (i, per_player) in raw.iter().enumerate() {
            let lookup = |name: &str| {
                game.type_names(i)
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| DisclosureError::Space(format!("unknown type {name:?} of player {i}")))
            };
            let mut per_type = vec![Vec::new(); game.n_types(i)];
            for (tname, options) in per_player {
                let t = lookup(tname)?;
                for opt in options {
                    let mut s = opt.iter().map(|n| lookup(n)).collect::<Result<Vec<_>, _>>()?;
                    s.sort_unstable();
                    s.dedup();
                    per_type[t].push(s);
                }
            }
            for opts in per_type.iter_mut().filter(|o| o.is_empty()) {
                opts.push((0..game.n_types(i)).collect());
            }
            sets.push(per_type);
        }
        let space = DisclosureSpace { sets };
        space.validate(game)?;
        Ok(space)
    }

    pub fn validate(&self, game: &BayesianGame) -> Result<(), DisclosureError> {
        if self.sets.len() != game.n_players() {
            return Err(DisclosureError::Space("wrong number of players".into()));
        }
        for (i, per_type) in self.sets.iter().enumerate() {
            if per_type.len() != game.n_types(i) {
                return Err(DisclosureError::Space(format!("player {i}: wrong number of types")));
            }
            for (t, opts) in per_type.iter().enumerate() {
                if opts.is_empty() {
                    return Err(DisclosureError::Space(format!("player {i} type {t} has no admissible set")));
                }
                for s in opts {
                    if !s.contains(&t) || s.iter().any(|&k| k >= game.n_types(i)) || !s.windows(2).all(|w| w[0] < w[1]) {
                        return Err(DisclosureError::Space(format!("player {i} type {t}: invalid set {s:?}")));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Sets disclosed along each ordered pair: `sets[i][j]` is what i reveals to j (None on the diagonal).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DisclosureProfile {
    pub sets: Vec<Vec<Option<Vec<usize>>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unraveling {
    None,
    Partial,
    Full,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OffPathBelief {
    pub receiver: usize,
    pub sender: usize,
    pub message: Vec<usize>,
    pub believed_type: usize,
}

/// A pure perfect Bayesian equilibrium of the disclosure game.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UnravelingOutcome {
    /// `messages[i][t_i][j]`: set type t_i of player i discloses to j (empty when j == i).
    pub messages: Vec<Vec<Vec<Vec<usize>>>>,
    pub classification: Unraveling,
    /// Equilibrium ex interim payoff of every type (0 for zero-marginal types).
    pub type_payoffs: Vec<Vec<f64>>,
    /// Payoff of a type that instead reveals itself exactly to everyone.
    pub full_disclosure_payoffs: Vec<Vec<f64>>,
    /// On-path joint action at every type profile.
    pub actions: Vec<usize>,
    pub off_path_beliefs: Vec<OffPathBelief>,
    pub candidates_examined: usize,
}

impl UnravelingOutcome {
    /// The disclosure matrix realized at type profile `t`.
    pub fn profile_at(&self, game: &BayesianGame, t: usize) -> DisclosureProfile {
        let digits = game.type_space().decode(t);
        let n = game.n_players();
        let sets = (0..n)
            .map(|i| (0..n).map(|j| if i == j { None } else { Some(self.messages[i][digits[i]][j].clone()) }).collect())
            .collect();
        DisclosureProfile { sets }
    }
}

/// Removes weakly dominated and payoff-equivalent actions, type by type, until nothing changes.
pub fn surviving_actions(game: &BayesianGame) -> Vec<Vec<Vec<usize>>> {
    let n = game.n_players();
    let ts = game.type_space();
    let acts = game.action_space();
    let mut surv: Vec<Vec<Vec<usize>>> =
        (0..n).map(|i| (0..game.n_types(i)).map(|_| (0..game.n_actions(i)).collect()).collect()).collect();
    loop {
        let mut next = surv.clone();
        let mut changed = false;
        for i in 0..n {
            let stride = acts.join(i, 1, 0) - acts.join(i, 0, 0);
            for t_i in 0..game.n_types(i) {
                if game.marginal(i, t_i) <= 0.0 {
                    continue;
                }
                // Cells (t, joint action with a_i = 0) over the support and others' survivors.
                let mut cells: Vec<(usize, usize)> = Vec::new();
                for r in 0..ts.without(i).len() {
                    let t = ts.join(i, t_i, r);
                    if game.prior(t) <= 0.0 {
                        continue;
                    }
                    let digits = ts.decode(t);
                    let mut combos = vec![vec![0usize; n]];
                    for k in (0..n).filter(|&k| k != i) {
                        combos = combos
                            .into_iter()
                            .flat_map(|c| {
                                surv[k][digits[k]].iter().map(move |&a| {
                                    let mut c2 = c.clone();
                                    c2[k] = a;
                                    c2
                                })
                            })
                            .collect();
                    }
                    cells.extend(combos.iter().map(|c| (t, acts.encode(c))));
                }
                let cand = &surv[i][t_i];
                let values: Vec<Vec<f64>> =
                    cand.iter().map(|&a| cells.iter().map(|&(t, b)| game.u(t, b + a * stride, i)).collect()).collect();
                let removed: Vec<bool> = (0..cand.len())
                    .map(|x| {
                        (0..cand.len()).any(|y| {
                            if y == x {
                                return false;
                            }
                            let (vx, vy) = (&values[x], &values[y]);
                            let weakly = vx.iter().zip(vy).all(|(a, b)| *b >= *a - EQ_TOL);
                            let strict = vx.iter().zip(vy).any(|(a, b)| *b > *a + EQ_TOL);
                            weakly && (strict || y < x)
                        })
                    })
                    .collect();
                if removed.iter().any(|r| *r) {
                    changed = true;
                    next[i][t_i] = cand.iter().zip(&removed).filter(|(_, r)| !**r).map(|(a, _)| *a).collect();
                }
            }
        }
        surv = next;
        if !changed {
            return surv;
        }
    }
}

/// Options for [`solve_disclosure_game`].
#[derive(Clone, Debug)]
pub struct DisclosureOptions {
    pub tol: f64,
}

impl Default for DisclosureOptions {
    fn default() -> Self {
        DisclosureOptions { tol: 1e-9 }
    }
}

type Messages = Vec<Vec<usize>>; // per sender (own slot empty)

struct Solver<'a> {
    game: &'a BayesianGame,
    space: &'a DisclosureSpace,
    surv: Vec<Vec<Vec<usize>>>,
    /// Messages any type of sender i can send.
    vocab: Vec<Vec<Vec<usize>>>,
    tol: f64,
}

/// Action stage state for one candidate disclosure strategy.
struct Stage {
    sigma: Vec<Vec<Vec<usize>>>, // [i][t_i][j] -> option index
    info: Vec<BTreeMap<(usize, Messages), usize>>,
    keys: Vec<Vec<(usize, Messages)>>,
    action: Vec<Vec<usize>>,
    skeptic: BTreeMap<(usize, usize, Vec<usize>), usize>, // (receiver, sender, message) -> believed type
}

impl<'a> Solver<'a> {
    fn message(&self, st: &Stage, i: usize, t_i: usize, j: usize) -> &[usize] {
        &self.space.sets[i][t_i][st.sigma[i][t_i][j]]
    }

    /// Messages received by k at type profile `digits` when everyone follows sigma,
    /// except that `dev` = (sender, message vector) replaces one sender's messages.
    fn received(&self, st: &Stage, k: usize, digits: &[usize], dev: Option<(usize, &[Vec<usize>])>) -> Messages {
        (0..self.game.n_players())
            .map(|i| {
                if i == k {
                    Vec::new()
                } else if let Some((_, m)) = dev.filter(|(d, _)| *d == i) {
                    m[k].clone()
                } else {
                    self.message(st, i, digits[i], k).to_vec()
                }
            })
            .collect()
    }

    fn is_on_path(&self, st: &Stage, i: usize, j: usize, msg: &[usize]) -> bool {
        (0..self.game.n_types(i)).any(|t| self.game.marginal(i, t) > 0.0 && self.message(st, i, t, j) == msg)
    }

    /// Posterior over full type profiles at receiver j's information set.
    fn belief(&self, st: &Stage, j: usize, t_j: usize, msgs: &Messages) -> Vec<(usize, f64)> {
        let g = self.game;
        let ts = g.type_space();
        let n = g.n_players();
        let fixed: Vec<Option<usize>> = (0..n)
            .map(|i| {
                if i == j || self.is_on_path(st, i, j, &msgs[i]) {
                    None
                } else {
                    st.skeptic.get(&(j, i, msgs[i].clone())).copied().or(Some(msgs[i][0]))
                }
            })
            .collect();
        let mut out = Vec::new();
        let mut mass = 0.0;
        let mut digits = vec![0; n];
        for t in 0..ts.len() {
            ts.decode_into(t, &mut digits);
            if digits[j] != t_j {
                continue;
            }
            let consistent = (0..n).all(|i| {
                i == j
                    || match fixed[i] {
                        Some(f) => digits[i] == f,
                        None => self.message(st, i, digits[i], j) == msgs[i].as_slice(),
                    }
            });
            if consistent && g.prior(t) > 0.0 {
                out.push((t, g.prior(t)));
                mass += g.prior(t);
            }
        }
        if mass <= 0.0 {
            // Correlation can empty the on-path posterior; fall back to the verifiable content.
            for t in 0..ts.len() {
                ts.decode_into(t, &mut digits);
                let ok = digits[j] == t_j
                    && (0..n).all(|i| i == j || fixed[i].map_or(msgs[i].contains(&digits[i]), |f| digits[i] == f));
                if ok {
                    out.push((t, 1.0));
                    mass += 1.0;
                }
            }
        }
        out.iter_mut().for_each(|e| e.1 /= mass);
        out
    }

    fn action_at(&self, st: &Stage, k: usize, t_k: usize, msgs: &Messages) -> usize {
        match st.info[k].get(&(t_k, msgs.clone())) {
            Some(&idx) => st.action[k][idx],
            None => self.surv[k][t_k][0],
        }
    }

    /// Expected payoff of j at an information set for each of j's candidate actions.
    fn values(&self, st: &Stage, j: usize, t_j: usize, msgs: &Messages, cands: &[usize]) -> Vec<f64> {
        let g = self.game;
        let ts = g.type_space();
        let acts = g.action_space();
        let n = g.n_players();
        let belief = self.belief(st, j, t_j, msgs);
        let mut out = vec![0.0; cands.len()];
        for (t, p) in belief {
            let digits = ts.decode(t);
            let mut a = vec![0; n];
            for k in (0..n).filter(|&k| k != j) {
                a[k] = self.action_at(st, k, digits[k], &self.received(st, k, &digits, None));
            }
            for (c, &aj) in cands.iter().enumerate() {
                a[j] = aj;
                out[c] += p * g.u(t, acts.encode(&a), j);
            }
        }
        out
    }

    fn solve_actions(&self, st: &mut Stage) -> bool {
        for _ in 0..MAX_BR_ROUNDS {
            let mut changed = false;
            for j in 0..self.game.n_players() {
                for idx in 0..st.keys[j].len() {
                    let (t_j, msgs) = st.keys[j][idx].clone();
                    let cands = &self.surv[j][t_j];
                    let vals = self.values(st, j, t_j, &msgs, cands);
                    let cur = cands.iter().position(|&a| a == st.action[j][idx]).unwrap_or(0);
                    let (best, _) =
                        vals.iter().enumerate().fold((cur, vals[cur]), |acc, (c, &v)| if v > acc.1 + EQ_TOL { (c, v) } else { acc });
                    if best != cur {
                        st.action[j][idx] = cands[best];
                        changed = true;
                    }
                }
            }
            if !changed {
                return true;
            }
        }
        false
    }

    /// Ex interim payoff of (i, t_i) sending `dev` instead of its equilibrium messages, re-optimizing its action.
    fn sender_payoff(&self, st: &Stage, i: usize, t_i: usize, dev: &[Vec<usize>]) -> f64 {
        let g = self.game;
        let ts = g.type_space();
        let acts = g.action_space();
        let n = g.n_players();
        let m = g.marginal(i, t_i);
        let mut vals = vec![0.0; g.n_actions(i)];
        for r in 0..ts.without(i).len() {
            let t = ts.join(i, t_i, r);
            let q = g.prior(t);
            if q <= 0.0 {
                continue;
            }
            let digits = ts.decode(t);
            let mut a = vec![0; n];
            for k in (0..n).filter(|&k| k != i) {
                a[k] = self.action_at(st, k, digits[k], &self.received(st, k, &digits, Some((i, dev))));
            }
            for (ai, v) in vals.iter_mut().enumerate() {
                a[i] = ai;
                *v += q / m * g.u(t, acts.encode(&a), i);
            }
        }
        vals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Payoff of (i, t_i) when everyone, including i, follows sigma and the action strategy.
    fn on_path_payoff(&self, st: &Stage, i: usize, t_i: usize) -> f64 {
        let g = self.game;
        let ts = g.type_space();
        let acts = g.action_space();
        let n = g.n_players();
        let m = g.marginal(i, t_i);
        let mut total = 0.0;
        for r in 0..ts.without(i).len() {
            let t = ts.join(i, t_i, r);
            let q = g.prior(t);
            if q <= 0.0 {
                continue;
            }
            let digits = ts.decode(t);
            let a: Vec<usize> =
                (0..n).map(|k| self.action_at(st, k, digits[k], &self.received(st, k, &digits, None))).collect();
            total += q / m * g.u(t, acts.encode(&a), i);
        }
        total
    }

    fn build_stage(&self, sigma: Vec<Vec<Vec<usize>>>) -> Stage {
        let g = self.game;
        let n = g.n_players();
        let mut info = Vec::with_capacity(n);
        let mut keys = Vec::with_capacity(n);
        let mut action = Vec::with_capacity(n);
        for j in 0..n {
            let mut combos: Vec<Messages> = vec![vec![Vec::new(); n]];
            for i in (0..n).filter(|&i| i != j) {
                combos = combos
                    .into_iter()
                    .flat_map(|c| {
                        self.vocab[i].iter().map(move |m| {
                            let mut c2 = c.clone();
                            c2[i] = m.clone();
                            c2
                        })
                    })
                    .collect();
            }
            let mut map = BTreeMap::new();
            let mut ks = Vec::new();
            let mut acts = Vec::new();
            for t_j in 0..g.n_types(j) {
                if g.marginal(j, t_j) <= 0.0 {
                    continue;
                }
                for c in &combos {
                    map.insert((t_j, c.clone()), ks.len());
                    ks.push((t_j, c.clone()));
                    acts.push(self.surv[j][t_j][0]);
                }
            }
            info.push(map);
            keys.push(ks);
            action.push(acts);
        }
        Stage { sigma, info, keys, action, skeptic: BTreeMap::new() }
    }

    /// Recomputes skeptical beliefs; returns true when they changed.
    fn update_skeptic(&self, st: &mut Stage) -> bool {
        let g = self.game;
        let n = g.n_players();
        let mut next = BTreeMap::new();
        for j in 0..n {
            for i in (0..n).filter(|&i| i != j) {
                for msg in &self.vocab[i] {
                    if self.is_on_path(st, i, j, msg) {
                        continue;
                    }
                    let mut best: Option<(f64, usize)> = None;
                    for &cand in msg {
                        if g.marginal(i, cand) <= 0.0 {
                            continue;
                        }
                        let v = self.believed_payoff(st, i, j, msg, cand);
                        if best.is_none_or(|(bv, _)| v < bv - EQ_TOL) {
                            best = Some((v, cand));
                        }
                    }
                    if let Some((_, cand)) = best {
                        next.insert((j, i, msg.clone()), cand);
                    }
                }
            }
        }
        let changed = next != st.skeptic;
        st.skeptic = next;
        changed
    }

    /// Payoff of sender i of type `cand` who sends `msg` to j while j believes `cand`.
    fn believed_payoff(&self, st: &Stage, i: usize, j: usize, msg: &[usize], cand: usize) -> f64 {
        let mut trial = Stage {
            sigma: st.sigma.clone(),
            info: st.info.clone(),
            keys: st.keys.clone(),
            action: st.action.clone(),
            skeptic: st.skeptic.clone(),
        };
        trial.skeptic.insert((j, i, msg.to_vec()), cand);
        // Receivers best-respond at the affected information sets.
        for idx in 0..trial.keys[j].len() {
            let (t_j, msgs) = trial.keys[j][idx].clone();
            if msgs[i] != msg {
                continue;
            }
            let cands = &self.surv[j][t_j];
            let vals = self.values(&trial, j, t_j, &msgs, cands);
            let best = vals.iter().enumerate().fold(0, |b, (c, &v)| if v > vals[b] + EQ_TOL { c } else { b });
            trial.action[j][idx] = cands[best];
        }
        let mut dev: Vec<Vec<usize>> = (0..self.game.n_players())
            .map(|k| if k == i { Vec::new() } else { self.message(st, i, cand, k).to_vec() })
            .collect();
        dev[j] = msg.to_vec();
        self.sender_payoff(&trial, i, cand, &dev)
    }

    /// Checks that no type gains by changing its messages, and that no indifferent type withholds.
    fn disclosure_stable(&self, st: &Stage) -> bool {
        let g = self.game;
        let n = g.n_players();
        for i in 0..n {
            for t_i in 0..g.n_types(i) {
                if g.marginal(i, t_i) <= 0.0 {
                    continue;
                }
                let current = self.on_path_payoff(st, i, t_i);
                let cur_info = self.revealed(st, i, t_i, None);
                let opts = &self.space.sets[i][t_i];
                let receivers: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                let mut choice = vec![0usize; receivers.len()];
                loop {
                    let mut dev = vec![Vec::new(); n];
                    for (c, &j) in choice.iter().zip(&receivers) {
                        dev[j] = opts[*c].clone();
                    }
                    let same = receivers.iter().all(|&j| dev[j] == self.message(st, i, t_i, j));
                    if !same {
                        let v = self.sender_payoff(st, i, t_i, &dev);
                        if v > current + self.tol {
                            return false;
                        }
                        if v >= current - self.tol && self.revealed(st, i, t_i, Some(&dev)) > cur_info {
                            return false;
                        }
                    }
                    let mut k = 0;
                    loop {
                        if k == choice.len() {
                            break;
                        }
                        choice[k] += 1;
                        if choice[k] < opts.len() {
                            break;
                        }
                        choice[k] = 0;
                        k += 1;
                    }
                    if k == choice.len() {
                        break;
                    }
                }
            }
        }
        true
    }

    /// Amount of information revealed: excluded types summed over receivers.
    fn revealed(&self, st: &Stage, i: usize, t_i: usize, dev: Option<&[Vec<usize>]>) -> usize {
        let k = self.game.n_types(i);
        (0..self.game.n_players())
            .filter(|&j| j != i)
            .map(|j| k - dev.map_or_else(|| self.message(st, i, t_i, j).len(), |d| d[j].len()))
            .sum()
    }
}

/// Finds the first pure equilibrium of the disclosure game in canonical order.
pub fn solve_disclosure_game(
    game: &BayesianGame,
    space: &DisclosureSpace,
    opts: &DisclosureOptions,
) -> Result<UnravelingOutcome, DisclosureError> {
    space.validate(game)?;
    let n = game.n_players();
    let mut vocab: Vec<Vec<Vec<usize>>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut v: Vec<Vec<usize>> = space.sets[i].iter().flatten().cloned().collect();
        v.sort();
        v.dedup();
        vocab.push(v);
    }
    let solver = Solver { game, space, surv: surviving_actions(game), vocab, tol: opts.tol };

    // Decision slots (i, t_i, j) and their option counts.
    let mut slots = Vec::new();
    for i in 0..n {
        for t_i in 0..game.n_types(i) {
            for j in (0..n).filter(|&j| j != i) {
                slots.push((i, t_i, j, space.sets[i][t_i].len()));
            }
        }
    }
    let total: usize = slots.iter().map(|s| s.3).try_fold(1usize, |acc, k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    if total > MAX_CANDIDATES {
        return Err(DisclosureError::TooManyCandidates(total));
    }
    let reveal = |i: usize, t_i: usize, o: usize| game.n_types(i) - space.sets[i][t_i][o].len();
    let mut candidates: Vec<(usize, Vec<usize>)> = (0..total)
        .map(|mut code| {
            let choice: Vec<usize> = slots
                .iter()
                .map(|s| {
                    let c = code % s.3;
                    code /= s.3;
                    c
                })
                .collect();
            let info = slots.iter().zip(&choice).map(|(s, &c)| reveal(s.0, s.1, c)).sum();
            (info, choice)
        })
        .collect();
    candidates.sort();

    for (examined, (_, choice)) in candidates.iter().enumerate() {
        let mut sigma: Vec<Vec<Vec<usize>>> =
            (0..n).map(|i| (0..game.n_types(i)).map(|_| vec![0; n]).collect()).collect();
        for (s, &c) in slots.iter().zip(choice) {
            sigma[s.0][s.1][s.2] = c;
        }
        let mut st = solver.build_stage(sigma);
        let mut settled = false;
        for _ in 0..MAX_BELIEF_ROUNDS {
            if !solver.solve_actions(&mut st) {
                break;
            }
            if !solver.update_skeptic(&mut st) {
                settled = true;
                break;
            }
        }
        if !settled || !solver.disclosure_stable(&st) {
            continue;
        }
        return Ok(finish(&solver, &st, examined + 1));
    }
    Err(DisclosureError::NoPureEquilibrium(total))
}

fn finish(solver: &Solver<'_>, st: &Stage, examined: usize) -> UnravelingOutcome {
    let g = solver.game;
    let n = g.n_players();
    let ts = g.type_space();
    let messages: Vec<Vec<Vec<Vec<usize>>>> = (0..n)
        .map(|i| {
            (0..g.n_types(i))
                .map(|t_i| (0..n).map(|j| if i == j { Vec::new() } else { solver.message(st, i, t_i, j).to_vec() }).collect())
                .collect()
        })
        .collect();
    let mut full = true;
    let mut any = false;
    for i in 0..n {
        for t_i in 0..g.n_types(i) {
            if g.marginal(i, t_i) <= 0.0 {
                continue;
            }
            for j in (0..n).filter(|&j| j != i) {
                let len = messages[i][t_i][j].len();
                full &= len == 1;
                any |= len < g.n_types(i);
            }
        }
    }
    let classification = if full {
        Unraveling::Full
    } else if any {
        Unraveling::Partial
    } else {
        Unraveling::None
    };
    let type_payoffs = (0..n)
        .map(|i| {
            (0..g.n_types(i)).map(|t| if g.marginal(i, t) > 0.0 { solver.on_path_payoff(st, i, t) } else { 0.0 }).collect()
        })
        .collect();
    let full_disclosure_payoffs = (0..n)
        .map(|i| {
            (0..g.n_types(i))
                .map(|t| {
                    if g.marginal(i, t) <= 0.0 {
                        return 0.0;
                    }
                    let dev: Vec<Vec<usize>> = (0..n).map(|j| if j == i { Vec::new() } else { vec![t] }).collect();
                    if n == 1 {
                        solver.on_path_payoff(st, i, t)
                    } else {
                        solver.sender_payoff(st, i, t, &dev)
                    }
                })
                .collect()
        })
        .collect();
    let actions = (0..ts.len())
        .map(|t| {
            let digits = ts.decode(t);
            let a: Vec<usize> =
                (0..n).map(|k| solver.action_at(st, k, digits[k], &solver.received(st, k, &digits, None))).collect();
            g.action_space().encode(&a)
        })
        .collect();
    let off_path_beliefs = st
        .skeptic
        .iter()
        .map(|((receiver, sender, message), &believed_type)| OffPathBelief {
            receiver: *receiver,
            sender: *sender,
            message: message.clone(),
            believed_type,
        })
        .collect();
    UnravelingOutcome {
        messages,
        classification,
        type_payoffs,
        full_disclosure_payoffs,
        actions,
        off_path_beliefs,
        candidates_examined: examined,
    }
}

/// The game played within one on-path message profile.
#[derive(Clone, Debug)]
pub struct MessageCell {
    pub probability: f64,
    pub messages: DisclosureProfile,
    /// Original type indices kept for each player.
    pub types: Vec<Vec<usize>>,
    pub game: BayesianGame,
}

/// Splits the game by on-path message profile, restricting types and renormalizing the prior.
pub fn post_unraveling_game(game: &BayesianGame, outcome: &UnravelingOutcome) -> Result<Vec<MessageCell>, DisclosureError> {
    let ts = game.type_space();
    let n = game.n_players();
    let mut cells: BTreeMap<DisclosureProfile, f64> = BTreeMap::new();
    for t in 0..ts.len() {
        if game.prior(t) > 0.0 {
            *cells.entry(outcome.profile_at(game, t)).or_insert(0.0) += game.prior(t);
        }
    }
    let mut out = Vec::new();
    for (profile, probability) in cells {
        let types: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                (0..game.n_types(i))
                    .filter(|&t_i| (0..n).filter(|&j| j != i).all(|j| profile.sets[i][j].as_deref() == Some(&outcome.messages[i][t_i][j][..])))
                    .collect()
            })
            .collect();
        let sub = game.restrict(&types)?;
        out.push(MessageCell { probability, messages: profile, types, game: sub });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct CellVerdict {
    pub probability: f64,
    pub types: Vec<Vec<usize>>,
    pub feasible: bool,
    pub intir: bool,
    pub ic: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop2Report {
    pub classification: Unraveling,
    pub cells: Vec<CellVerdict>,
    /// The target is implementable by devices that never disclose.
    pub verdict: bool,
}

/// Solves the disclosure game, then checks the target policy inside every message cell.
pub fn prop2_pipeline(
    game: &BayesianGame,
    space: &DisclosureSpace,
    mu: &CorrelatedPolicy,
    tol: f64,
) -> Result<Prop2Report, DisclosureError> {
    let outcome = solve_disclosure_game(game, space, &DisclosureOptions { tol })?;
    let cells = post_unraveling_game(game, &outcome)?;
    let ts = game.type_space();
    let mut verdicts = Vec::new();
    for cell in &cells {
        let sub_ts = cell.game.type_space();
        let rows: Vec<Vec<f64>> = (0..sub_ts.len())
            .map(|s| {
                let digits: Vec<usize> = sub_ts.decode(s).iter().enumerate().map(|(i, &d)| cell.types[i][d]).collect();
                mu.row(ts.encode(&digits)).to_vec()
            })
            .collect();
        let mu_cell = CorrelatedPolicy::full(&cell.game, rows)?;
        let x = crate::game::induced_payoffs(&cell.game, &mu_cell)?;
        let feasible = check_feasible(&cell.game, &x, tol)?.verdict;
        let intir = check_intir(&cell.game, &x, tol)?.verdict;
        let ic = check_ic(&cell.game, &mu_cell, &x, tol)?.verdict;
        verdicts.push(CellVerdict { probability: cell.probability, types: cell.types.clone(), feasible, intir, ic });
    }
    let verdict = verdicts.iter().all(|c| c.feasible && c.intir && c.ic);
    Ok(Prop2Report { classification: outcome.classification, cells: verdicts, verdict })
}
