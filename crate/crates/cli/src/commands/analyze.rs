use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use condis_core::game::induced_payoffs;
use condis_core::solvers::{check_efficient, check_feasible, check_ic, check_intir, SolverError};
use serde_json::json;

use crate::load::{load_game, load_payoff};
use crate::output::{b, fmt_f, RunDir};
use crate::{Common, ConfigError};

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Game JSON file or builtin:<name>.
    #[arg(long)]
    pub game: String,
    /// Payoff JSON with `payoffs` and/or `policy`; defaults to the builtin target.
    #[arg(long)]
    pub payoff: Option<PathBuf>,
}

pub fn run(common: &Common, args: &AnalyzeArgs) -> Result<(bool, PathBuf)> {
    let loaded = load_game(&args.game)?;
    let game = &loaded.game;
    let (x, mu) = load_payoff(&loaded, args.payoff.as_deref())?;
    let x = match (x, &mu) {
        (Some(x), _) => x,
        (None, Some(mu)) => induced_payoffs(game, mu)?,
        (None, None) => return Err(ConfigError::new("no payoff: pass --payoff for file games").into()),
    };
    let tol = common.tol;
    let mut run = RunDir::create(&common.out, "analyze", common.label.as_deref())?;
    let feasible = check_feasible(game, &x, tol)?;
    let intir = check_intir(game, &x, tol)?;
    let ic = match &mu {
        Some(mu) => match check_ic(game, mu, &x, tol) {
            Ok(r) => Some(r),
            Err(SolverError::Consistency(gap)) => {
                return Err(ConfigError::new(format!("policy does not induce the payoffs (gap {gap:e})")).into())
            }
            Err(e) => return Err(e.into()),
        },
        None => None,
    };
    // Ex post efficiency of the policy's expected payoff at every type profile in the support.
    let mut efficient = Vec::new();
    if let Some(mu) = &mu {
        let ts = game.type_space();
        let n = game.n_players();
        for t in (0..ts.len()).filter(|&t| game.prior(t) > 0.0) {
            let mut x_t = vec![0.0; n];
            for (a, &p) in mu.row(t).iter().enumerate() {
                for (i, v) in x_t.iter_mut().enumerate() {
                    *v += p * game.u(t, a, i);
                }
            }
            let r = check_efficient(game, t, &x_t, tol)?;
            efficient.push((t, x_t, r));
        }
    }

    run.verdict("feasible", feasible.verdict);
    run.verdict("intir", intir.verdict);
    if let Some(r) = &ic {
        run.verdict("ic", r.verdict);
    }
    if mu.is_some() {
        run.verdict("efficient", efficient.iter().all(|(_, _, r)| r.verdict));
    }
    let rows = [("feasible", Some(&feasible)), ("intir", Some(&intir)), ("ic", ic.as_ref())]
        .into_iter()
        .filter_map(|(name, r)| r.map(|r| (name, r)))
        .map(|(name, r)| {
            let worst = r.violations.iter().map(|v| v.gain).fold(0.0, f64::max);
            vec![name.to_string(), b(r.verdict), r.violations.len().to_string(), fmt_f(worst)]
        })
        .collect::<Vec<_>>();
    run.write_csv("verdicts.csv", &["check", "verdict", "violations", "max_violation"], rows)?;
    let payoff_rows = (0..game.n_players())
        .flat_map(|i| (0..game.n_types(i)).map(move |t| (i, t)))
        .map(|(i, t)| vec![i.to_string(), game.type_names(i)[t].clone(), fmt_f(x.get(i, t))]);
    run.write_csv("payoffs.csv", &["player", "type", "payoff"], payoff_rows.collect::<Vec<_>>())?;
    if !efficient.is_empty() {
        let rows = efficient.iter().map(|(t, x_t, r)| {
            let x_s: Vec<String> = x_t.iter().map(|&v| fmt_f(v)).collect();
            vec![game.type_key(*t), x_s.join(" "), b(r.verdict)]
        });
        run.write_csv("efficiency.csv", &["types", "payoffs", "efficient"], rows.collect::<Vec<_>>())?;
    }
    let eff_json: Vec<_> = efficient.iter().map(|(t, x_t, r)| json!({"types": game.type_key(*t), "payoffs": x_t, "report": r})).collect();
    run.write_json(
        "analyze.json",
        &json!({"game": loaded.source, "payoffs": x, "feasible": feasible, "intir": intir, "ic": ic, "efficient": eff_json}),
    )?;
    let config = json!({"game": args.game, "payoff": args.payoff, "tol": tol});
    run.finish("analyze", config, common.seed)
}
