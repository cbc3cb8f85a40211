use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use condis_core::disclosure::{prop2_pipeline, solve_disclosure_game, DisclosureError, DisclosureOptions, DisclosureSpace};
use serde_json::json;

use crate::load::{load_game, load_payoff};
use crate::output::{b, fmt_f, RunDir};
use crate::{Common, ConfigError};

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SpaceKind {
    /// The game file's disclosure spaces, else all-or-nothing.
    File,
    AllOrNothing,
    /// Every set containing the true type.
    Unrestricted,
}

#[derive(Args, Debug)]
pub struct UnravelArgs {
    /// Game JSON file or builtin:<name>.
    #[arg(long)]
    pub game: String,
    /// Payoff JSON whose `policy` is checked inside every message cell.
    #[arg(long)]
    pub payoff: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SpaceKind::File)]
    pub space: SpaceKind,
}

fn config_err(e: DisclosureError) -> anyhow::Error {
    match e {
        DisclosureError::Space(msg) => ConfigError::new(format!("disclosure space: {msg}")).into(),
        DisclosureError::TooManyCandidates(k) => ConfigError::new(format!("{k} disclosure strategies exceed the search limit")).into(),
        e => e.into(),
    }
}

pub fn run(common: &Common, args: &UnravelArgs) -> Result<(bool, PathBuf)> {
    let loaded = load_game(&args.game)?;
    let game = &loaded.game;
    let (_, mu) = load_payoff(&loaded, args.payoff.as_deref())?;
    let space = match args.space {
        SpaceKind::File => loaded.space.clone().unwrap_or_else(|| DisclosureSpace::all_or_nothing(game)),
        SpaceKind::AllOrNothing => DisclosureSpace::all_or_nothing(game),
        SpaceKind::Unrestricted => DisclosureSpace::unrestricted(game).map_err(config_err)?,
    };
    let tol = common.tol;
    let config = json!({"game": args.game, "payoff": args.payoff, "space": format!("{:?}", args.space), "tol": tol});
    let outcome = match solve_disclosure_game(game, &space, &DisclosureOptions { tol }) {
        Ok(o) => o,
        Err(DisclosureError::NoPureEquilibrium(k)) => {
            let mut run = RunDir::create(&common.out, "unravel", common.label.as_deref())?;
            run.verdict("equilibrium", false);
            run.write_json("unravel.json", &json!({"game": loaded.source, "candidates_examined": k}))?;
            return run.finish("unravel", config, common.seed);
        }
        Err(e) => return Err(config_err(e)),
    };
    let prop2 = match &mu {
        Some(mu) => Some(prop2_pipeline(game, &space, mu, tol).map_err(config_err)?),
        None => None,
    };

    let mut run = RunDir::create(&common.out, "unravel", common.label.as_deref())?;
    run.verdict("equilibrium", true);
    if let Some(p) = &prop2 {
        run.verdict("prop2", p.verdict);
    }
    let n = game.n_players();
    let mut rows = Vec::new();
    for i in 0..n {
        for t_i in 0..game.n_types(i) {
            for j in (0..n).filter(|&j| j != i) {
                let names: Vec<&str> = outcome.messages[i][t_i][j].iter().map(|&k| game.type_names(i)[k].as_str()).collect();
                rows.push(vec![
                    i.to_string(),
                    game.type_names(i)[t_i].clone(),
                    j.to_string(),
                    names.join(" "),
                    fmt_f(outcome.type_payoffs[i][t_i]),
                    fmt_f(outcome.full_disclosure_payoffs[i][t_i]),
                ]);
            }
        }
    }
    let header = ["sender", "type", "receiver", "message", "payoff", "full_disclosure_payoff"];
    run.write_csv("messages.csv", &header, rows)?;
    let actions = (0..game.type_space().len()).map(|t| vec![game.type_key(t), game.action_key(outcome.actions[t])]);
    run.write_csv("actions.csv", &["types", "actions"], actions.collect::<Vec<_>>())?;
    if let Some(p) = &prop2 {
        let cells = p.cells.iter().map(|c| {
            let types: Vec<String> = c
                .types
                .iter()
                .enumerate()
                .map(|(i, ts)| ts.iter().map(|&k| game.type_names(i)[k].as_str()).collect::<Vec<_>>().join(" "))
                .collect();
            vec![fmt_f(c.probability), types.join("|"), b(c.feasible), b(c.intir), b(c.ic)]
        });
        run.write_csv("cells.csv", &["probability", "types", "feasible", "intir", "ic"], cells.collect::<Vec<_>>())?;
    }
    run.write_json("unravel.json", &json!({"game": loaded.source, "outcome": outcome, "prop2": prop2}))?;
    run.finish("unravel", config, common.seed)
}
