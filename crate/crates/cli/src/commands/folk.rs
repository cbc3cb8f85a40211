use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use condis_core::devices::{build_folk_devices, deviation_library, verify_bne, verify_prop1, DeviceError, Integration};
use serde_json::json;

use crate::load::{load_game, load_payoff};
use crate::output::{b, fmt_f, RunDir};
use crate::{Common, ConfigError};

#[derive(Args, Debug)]
pub struct FolkArgs {
    /// Game JSON file or builtin:<name>.
    #[arg(long)]
    pub game: String,
    /// Payoff JSON whose `policy` is the target; defaults to the builtin target.
    #[arg(long)]
    pub payoff: Option<PathBuf>,
}

pub fn run(common: &Common, args: &FolkArgs) -> Result<(bool, PathBuf)> {
    let loaded = load_game(&args.game)?;
    let game = &loaded.game;
    let (_, mu) = load_payoff(&loaded, args.payoff.as_deref())?;
    let Some(mu) = mu else {
        return Err(ConfigError::new("folk needs a target policy in --payoff").into());
    };
    let tol = common.tol;
    let config = json!({"game": args.game, "payoff": args.payoff, "tol": tol});
    let profile = match build_folk_devices(game, &mu, tol) {
        Ok(p) => p,
        Err(DeviceError::NotIndividuallyRational(violations)) => {
            // No punishment can hold the target; report the failure instead of erroring out.
            let mut run = RunDir::create(&common.out, "folk", common.label.as_deref())?;
            run.verdict("intir", false);
            run.write_json("folk.json", &json!({"game": loaded.source, "intir_violations": violations}))?;
            return run.finish("folk", config, common.seed);
        }
        Err(e) => return Err(e.into()),
    };
    let library: Vec<_> = (0..game.n_players()).map(|j| deviation_library(&profile.plan, j)).collect();
    let bne = verify_bne(game, &profile.devices, &library, Integration::Exact, tol)?;
    let prop1 = verify_prop1(game, &profile.devices, Integration::Exact, tol)?;

    let mut run = RunDir::create(&common.out, "folk", common.label.as_deref())?;
    run.verdict("bne", bne.verdict);
    run.verdict("feasible", prop1.feasible);
    run.verdict("intir", prop1.intir);
    let rows = bne.rows.iter().map(|r| {
        vec![
            r.player.to_string(),
            game.type_names(r.player)[r.type_index].clone(),
            r.best_deviation.clone(),
            fmt_f(r.gain),
            b(r.gain <= tol),
        ]
    });
    run.write_csv("bne.csv", &["player", "type", "best_deviation", "gain", "ok"], rows.collect::<Vec<_>>())?;
    let payoff_rows = (0..game.n_players())
        .flat_map(|i| (0..game.n_types(i)).map(move |t| (i, t)))
        .map(|(i, t)| vec![i.to_string(), game.type_names(i)[t].clone(), fmt_f(prop1.payoffs.get(i, t))]);
    run.write_csv("payoffs.csv", &["player", "type", "payoff"], payoff_rows.collect::<Vec<_>>())?;
    let fingerprints: Vec<String> = profile.devices.iter().map(|d| d.fingerprint().hex()).collect();
    run.write_json("folk.json", &json!({"game": loaded.source, "bne": bne, "prop1": prop1, "devices": fingerprints}))?;
    run.finish("folk", config, common.seed)
}
