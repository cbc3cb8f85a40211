use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use condis_core::canonical::war::{build_war_game, WarParams};
use condis_core::canonical::{dilemma_game, dilemma_target};
use condis_core::disclosure::DisclosureSpace;
use condis_core::game::{BayesianGame, CorrelatedPolicy, GameFile, PayoffFile, PayoffVector};

use crate::ConfigError;

pub const BUILTINS: [&str; 4] = ["builtin:war", "builtin:war-open", "builtin:dilemma2", "builtin:dilemma3"];

/// A game with its default target policy and disclosure space, if any.
pub struct LoadedGame {
    pub source: String,
    pub game: BayesianGame,
    pub default_policy: Option<CorrelatedPolicy>,
    pub space: Option<DisclosureSpace>,
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::new(format!("reading {what} {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError::new(format!("invalid {what} {}: {e}", path.display())).into())
}

pub fn load_game(source: &str) -> Result<LoadedGame> {
    let config = |e: &dyn std::fmt::Display| ConfigError::new(format!("game {source}: {e}"));
    if let Some(name) = source.strip_prefix("builtin:") {
        let (game, policy) = match name {
            "war" | "war-open" => {
                let war = build_war_game(&WarParams::default(), name == "war").map_err(|e| config(&e))?;
                let mu = war.target_policy().context("war target")?;
                (war.game, mu)
            }
            "dilemma2" | "dilemma3" => {
                let n = if name == "dilemma2" { 2 } else { 3 };
                let g = dilemma_game(n).context("dilemma game")?;
                let mu = dilemma_target(&g).context("dilemma target")?;
                (g, mu)
            }
            _ => return Err(config(&format!("unknown builtin; expected one of {}", BUILTINS.join(", "))).into()),
        };
        return Ok(LoadedGame { source: source.into(), game, default_policy: Some(policy), space: None });
    }
    let file: GameFile = read_json(Path::new(source), "game file")?;
    let game = file.to_game().map_err(|e| config(&e))?;
    let space = match &file.disclosure_spaces {
        Some(raw) => Some(DisclosureSpace::from_raw(&game, raw).map_err(|e| config(&e))?),
        None => None,
    };
    Ok(LoadedGame { source: source.into(), game, default_policy: None, space })
}

/// Payoff vector and policy from `--payoff`, falling back to the game's default policy.
pub fn load_payoff(loaded: &LoadedGame, path: Option<&Path>) -> Result<(Option<PayoffVector>, Option<CorrelatedPolicy>)> {
    let game = &loaded.game;
    let Some(path) = path else {
        return Ok((None, loaded.default_policy.clone()));
    };
    let file: PayoffFile = read_json(path, "payoff file")?;
    if file.payoffs.is_none() && file.policy.is_none() {
        return Err(ConfigError::new("payoff file needs `payoffs`, `policy` or both").into());
    }
    let x = file.payoff_vector(game).map_err(|e| ConfigError::new(format!("payoffs: {e}")))?;
    let mu = file.policy(game).map_err(|e| ConfigError::new(format!("policy: {e}")))?;
    Ok((x, mu))
}
