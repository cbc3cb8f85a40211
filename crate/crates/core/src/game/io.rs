use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BayesianGame, CorrelatedPolicy, GameError, PayoffVector, Radix, Scope};

/// Per player, a map from type name to the admissible disclosure sets (lists of type names).
pub type RawDisclosureSpaces = Vec<BTreeMap<String, Vec<Vec<String>>>>;

/// On-disk game description.
///
/// Prior keys join type names with `|`; utility keys are `"<type key>::<action key>"`
/// with action names joined the same way. Missing prior entries have zero mass;
/// every utility entry must be present.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub players: usize,
    pub types: Vec<Vec<String>>,
    pub prior: BTreeMap<String, f64>,
    pub actions: Vec<Vec<String>>,
    pub utility: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disclosure_spaces: Option<RawDisclosureSpaces>,
}

impl GameFile {
    pub fn from_json(text: &str) -> Result<Self, GameError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String, GameError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_game(game: &BayesianGame) -> Self {
        let n = game.n_players();
        let mut prior = BTreeMap::new();
        let mut utility = BTreeMap::new();
        for t in 0..game.type_space().len() {
            let tk = game.type_key(t);
            prior.insert(tk.clone(), game.prior(t));
            for a in 0..game.action_space().len() {
                utility.insert(format!("{tk}::{}", game.action_key(a)), game.payoffs(t, a).to_vec());
            }
        }
        GameFile {
            players: n,
            types: (0..n).map(|i| game.type_names(i).to_vec()).collect(),
            prior,
            actions: (0..n).map(|i| game.action_names(i).to_vec()).collect(),
            utility,
            disclosure_spaces: None,
        }
    }

    pub fn to_game(&self) -> Result<BayesianGame, GameError> {
        let n = self.players;
        if self.types.len() != n || self.actions.len() != n {
            return Err(GameError::Schema(format!(
                "players = {n} but {} type lists and {} action lists",
                self.types.len(),
                self.actions.len()
            )));
        }
        let type_idx = index_maps(&self.types);
        let action_idx = index_maps(&self.actions);
        let ts = super::Radix::new(self.types.iter().map(Vec::len).collect());
        let acts = super::Radix::new(self.actions.iter().map(Vec::len).collect());
        let mut prior = vec![0.0; ts.len()];
        for (key, &p) in &self.prior {
            let t = parse_profile(key, &type_idx, "type")?;
            prior[ts.encode(&t)] = p;
        }
        let mut utility = vec![f64::NAN; ts.len() * acts.len() * n];
        for (key, payoff) in &self.utility {
            let (tk, ak) = key
                .split_once("::")
                .ok_or_else(|| GameError::Schema(format!("utility key {key:?} lacks '::'")))?;
            let t = ts.encode(&parse_profile(tk, &type_idx, "type")?);
            let a = acts.encode(&parse_profile(ak, &action_idx, "action")?);
            if payoff.len() != n {
                return Err(GameError::Schema(format!("utility {key:?} has {} entries, expected {n}", payoff.len())));
            }
            let base = (t * acts.len() + a) * n;
            utility[base..base + n].copy_from_slice(payoff);
        }
        if let Some(pos) = utility.iter().position(|u| u.is_nan()) {
            let cell = pos / n;
            let (t, a) = (cell / acts.len(), cell % acts.len());
            let names = |r: &super::Radix, idx: usize, lists: &[Vec<String>]| {
                r.decode(idx).iter().enumerate().map(|(i, &d)| lists[i][d].clone()).collect::<Vec<_>>().join("|")
            };
            return Err(GameError::Totality(format!(
                "{}::{}",
                names(&ts, t, &self.types),
                names(&acts, a, &self.actions)
            )));
        }
        BayesianGame::from_table(self.types.clone(), self.actions.clone(), prior, utility)
    }
}

/// A policy on disk: condition key -> (outcome key -> probability). Keys join names with `|`;
/// a minus-player policy omits that player from both keys. Missing outcomes have zero mass.
pub type PolicyMap = BTreeMap<String, BTreeMap<String, f64>>;

fn scope_players(game: &BayesianGame, scope: Scope) -> Result<Vec<usize>, GameError> {
    let n = game.n_players();
    match scope {
        Scope::FullProfile => Ok((0..n).collect()),
        Scope::MinusPlayer(j) if j < n => Ok((0..n).filter(|&k| k != j).collect()),
        other => Err(GameError::Schema(format!("policies on disk cannot have scope {other}"))),
    }
}

pub fn policy_from_map(game: &BayesianGame, scope: Scope, map: &PolicyMap) -> Result<CorrelatedPolicy, GameError> {
    let players = scope_players(game, scope)?;
    let type_lists: Vec<Vec<String>> = players.iter().map(|&i| game.type_names(i).to_vec()).collect();
    let action_lists: Vec<Vec<String>> = players.iter().map(|&i| game.action_names(i).to_vec()).collect();
    let cond = Radix::new(type_lists.iter().map(Vec::len).collect());
    let out = Radix::new(action_lists.iter().map(Vec::len).collect());
    let (type_idx, action_idx) = (index_maps(&type_lists), index_maps(&action_lists));
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; cond.len()];
    for (tk, dist) in map {
        let t = cond.encode(&parse_profile(tk, &type_idx, "type")?);
        let mut row = vec![0.0; out.len()];
        for (ak, &p) in dist {
            row[out.encode(&parse_profile(ak, &action_idx, "action")?)] = p;
        }
        rows[t] = Some(row);
    }
    let mut full = Vec::with_capacity(rows.len());
    for (t, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => full.push(r),
            None => {
                let key: Vec<&str> = cond.decode(t).iter().enumerate().map(|(k, &d)| type_lists[k][d].as_str()).collect();
                return Err(GameError::Totality(format!("policy row {}", key.join("|"))));
            }
        }
    }
    CorrelatedPolicy::new(scope, cond, out, full)
}

pub fn policy_to_map(game: &BayesianGame, policy: &CorrelatedPolicy) -> Result<PolicyMap, GameError> {
    let players = scope_players(game, policy.scope())?;
    let key = |r: &Radix, idx: usize, lists: &dyn Fn(usize) -> Vec<String>| {
        r.decode(idx).iter().zip(&players).map(|(&d, &i)| lists(i)[d].clone()).collect::<Vec<_>>().join("|")
    };
    let mut map = PolicyMap::new();
    for (t, row) in policy.rows().iter().enumerate() {
        let tk = key(policy.condition(), t, &|i| game.type_names(i).to_vec());
        let dist = row
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(a, &p)| (key(policy.outcome(), a, &|i| game.action_names(i).to_vec()), p))
            .collect();
        map.insert(tk, dist);
    }
    Ok(map)
}

/// Payoff input: an interim payoff per player and type name, a full-profile policy, or both.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PayoffFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoffs: Option<Vec<BTreeMap<String, f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyMap>,
}

impl PayoffFile {
    pub fn payoff_vector(&self, game: &BayesianGame) -> Result<Option<PayoffVector>, GameError> {
        let Some(raw) = &self.payoffs else { return Ok(None) };
        if raw.len() != game.n_players() {
            return Err(GameError::Schema(format!("payoffs list {} players, expected {}", raw.len(), game.n_players())));
        }
        let mut values = Vec::with_capacity(raw.len());
        for (i, m) in raw.iter().enumerate() {
            let names = game.type_names(i);
            if let Some(k) = m.keys().find(|k| !names.contains(k)) {
                return Err(GameError::Schema(format!("unknown type {k:?} for player {i}")));
            }
            let row = names
                .iter()
                .map(|n| m.get(n).copied().ok_or_else(|| GameError::Totality(format!("payoff of player {i} type {n}"))))
                .collect::<Result<Vec<_>, _>>()?;
            values.push(row);
        }
        Ok(Some(PayoffVector::new(values)))
    }

    pub fn policy(&self, game: &BayesianGame) -> Result<Option<CorrelatedPolicy>, GameError> {
        self.policy.as_ref().map(|m| policy_from_map(game, Scope::FullProfile, m)).transpose()
    }

    pub fn from_payoffs(game: &BayesianGame, x: &PayoffVector) -> Self {
        let payoffs = (0..game.n_players())
            .map(|i| game.type_names(i).iter().enumerate().map(|(t, n)| (n.clone(), x.get(i, t))).collect())
            .collect();
        PayoffFile { payoffs: Some(payoffs), policy: None }
    }
}

fn index_maps(lists: &[Vec<String>]) -> Vec<BTreeMap<&str, usize>> {
    lists.iter().map(|l| l.iter().enumerate().map(|(k, s)| (s.as_str(), k)).collect()).collect()
}

fn parse_profile(key: &str, maps: &[BTreeMap<&str, usize>], what: &str) -> Result<Vec<usize>, GameError> {
    let parts: Vec<&str> = key.split('|').collect();
    if parts.len() != maps.len() {
        return Err(GameError::Schema(format!("{what} key {key:?} has {} parts, expected {}", parts.len(), maps.len())));
    }
    parts
        .iter()
        .zip(maps)
        .enumerate()
        .map(|(i, (p, m))| {
            m.get(p).copied().ok_or_else(|| GameError::Schema(format!("unknown {what} {p:?} for player {i}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "players": 2,
        "types": [["lo", "hi"], ["x"]],
        "prior": {"lo|x": 0.25, "hi|x": 0.75},
        "actions": [["a"], ["b", "c"]],
        "utility": {
            "lo|x::a|b": [1, 2], "lo|x::a|c": [3, 4],
            "hi|x::a|b": [5, 6], "hi|x::a|c": [7, 8]
        }
    }"#;

    #[test]
    fn policy_maps_roundtrip() {
        let g = GameFile::from_json(SMALL).unwrap().to_game().unwrap();
        let mu = CorrelatedPolicy::full(&g, vec![vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        let map = policy_to_map(&g, &mu).unwrap();
        assert_eq!(map["lo|x"]["a|c"], 0.75);
        assert!(!map["hi|x"].contains_key("a|c"));
        assert_eq!(policy_from_map(&g, Scope::FullProfile, &map).unwrap().rows(), mu.rows());
        let tau = CorrelatedPolicy::minus(&g, 1, vec![vec![1.0], vec![1.0]]).unwrap();
        let map = policy_to_map(&g, &tau).unwrap();
        assert_eq!(map["hi"]["a"], 1.0);
        let back = policy_from_map(&g, Scope::MinusPlayer(1), &map).unwrap();
        assert_eq!((back.scope(), back.rows()), (tau.scope(), tau.rows()));
        let mut partial = PolicyMap::new();
        partial.insert("lo|x".into(), BTreeMap::from([("a|b".to_string(), 1.0)]));
        assert!(matches!(policy_from_map(&g, Scope::FullProfile, &partial), Err(GameError::Totality(_))));
    }

    #[test]
    fn payoff_file_requires_every_type() {
        let g = GameFile::from_json(SMALL).unwrap().to_game().unwrap();
        let f: PayoffFile = serde_json::from_str(r#"{"payoffs": [{"lo": 1, "hi": 2}, {"x": 3}]}"#).unwrap();
        let x = f.payoff_vector(&g).unwrap().unwrap();
        assert_eq!((x.get(0, 1), x.get(1, 0)), (2.0, 3.0));
        let f: PayoffFile = serde_json::from_str(r#"{"payoffs": [{"lo": 1}, {"x": 3}]}"#).unwrap();
        assert!(f.payoff_vector(&g).is_err());
        assert!(serde_json::from_str::<PayoffFile>(r#"{"payof": []}"#).is_err());
        let round = PayoffFile::from_payoffs(&g, &x);
        assert_eq!(round.payoff_vector(&g).unwrap().unwrap(), x);
    }

    #[test]
    fn parse_and_roundtrip() {
        let g = GameFile::from_json(SMALL).unwrap().to_game().unwrap();
        assert_eq!(g.u(1, 1, 1), 8.0);
        assert_eq!(g.prior(0), 0.25);
        let again = GameFile::from_game(&g).to_game().unwrap();
        assert_eq!(again.payoffs(1, 0), g.payoffs(1, 0));
    }

    #[test]
    fn missing_utility_is_rejected() {
        let text = SMALL.replace(r#""hi|x::a|c": [7, 8]"#, r#""hi|x::a|b": [5, 6]"#);
        let err = GameFile::from_json(&text).unwrap().to_game();
        assert!(matches!(err, Err(GameError::Totality(ref k)) if k == "hi|x::a|c"), "{err:?}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = SMALL.replacen("\"players\"", "\"extra\": 1, \"players\"", 1);
        assert!(GameFile::from_json(&text).is_err());
    }
}
