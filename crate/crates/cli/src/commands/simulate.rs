use std::path::PathBuf;
use std::sync::Arc;

use anyhow::Result;
use clap::Args;
use condis_core::devices::{build_folk_devices, FolkPlan};
use condis_core::engine::{
    deviator_library, exploitability_batch, termination_profile, EngineOptions, ExploitabilityReport, SirBotConfig,
    DEFAULT_DEPTH_CAP, DEVIATOR_NAMES,
};
use condis_core::game::{policy_from_map, PolicyMap, Scope};
use condis_core::signal::RandomizationSignal;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::load::{load_game, load_payoff, read_json};
use crate::output::{b, fmt_f, RunDir};
use crate::{Common, ConfigError};

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario JSON; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Game JSON file or builtin:<name>.
    #[arg(long)]
    pub game: Option<String>,
    /// Payoff JSON whose `policy` is the target.
    #[arg(long)]
    pub payoff: Option<PathBuf>,
    /// Grounding probability of the SIR bots.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Deviator name, a name prefix, or `all` for the whole library.
    #[arg(long)]
    pub deviator: Option<String>,
    /// Index of the deviating player.
    #[arg(long)]
    pub player: Option<usize>,
    #[arg(long)]
    pub depth_cap: Option<u32>,
    /// Largest K of the termination tail table.
    #[arg(long)]
    pub max_k: Option<u32>,
}

/// Scenario file for `simulate`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub game: Option<String>,
    pub payoff: Option<PathBuf>,
    pub epsilon: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub deviator: Option<String>,
    pub player: Option<usize>,
    pub depth_cap: Option<u32>,
    pub max_k: Option<u32>,
    /// Target policy keyed by type profile; overrides the payoff file.
    pub target_policy: Option<PolicyMap>,
    /// One punishment per player, keyed by the other players' types.
    pub punishments: Option<Vec<PolicyMap>>,
}

impl SimConfig {
    fn merge(mut self, args: &SimulateArgs, common: &Common) -> Self {
        fn pick<T: Clone>(flag: &Option<T>, file: &mut Option<T>) {
            if flag.is_some() {
                *file = flag.clone();
            }
        }
        pick(&args.game, &mut self.game);
        pick(&args.payoff, &mut self.payoff);
        pick(&args.epsilon, &mut self.epsilon);
        pick(&args.trials, &mut self.trials);
        pick(&common.seed, &mut self.seed);
        pick(&args.deviator, &mut self.deviator);
        pick(&args.player, &mut self.player);
        pick(&args.depth_cap, &mut self.depth_cap);
        pick(&args.max_k, &mut self.max_k);
        self
    }
}

pub fn run(common: &Common, args: &SimulateArgs) -> Result<(bool, PathBuf)> {
    let file = match &args.config {
        Some(p) => read_json::<SimConfig>(p, "simulate config")?,
        None => SimConfig::default(),
    };
    let cfg = file.merge(args, common);
    let Some(source) = cfg.game.clone() else {
        return Err(ConfigError::new("simulate needs --game or `game` in the config").into());
    };
    let eps = cfg.epsilon.unwrap_or(0.05);
    let trials = cfg.trials.unwrap_or(10_000);
    let seed = cfg.seed.unwrap_or(0);
    let player = cfg.player.unwrap_or(0);
    let max_k = cfg.max_k.unwrap_or(200);
    let opts = EngineOptions { depth_cap: cfg.depth_cap.unwrap_or(DEFAULT_DEPTH_CAP), ..EngineOptions::default() };
    if trials == 0 {
        return Err(ConfigError::new("trials must be positive").into());
    }

    let loaded = load_game(&source)?;
    let game = &loaded.game;
    if player >= game.n_players() {
        return Err(ConfigError::new(format!("player {player} out of range")).into());
    }
    let (_, file_mu) = load_payoff(&loaded, cfg.payoff.as_deref())?;
    let target = match &cfg.target_policy {
        Some(map) => policy_from_map(game, Scope::FullProfile, map).map_err(|e| ConfigError::new(format!("target_policy: {e}")))?,
        None => file_mu.ok_or_else(|| ConfigError::new("simulate needs a target policy"))?,
    };
    let plan = match &cfg.punishments {
        Some(maps) => {
            if maps.len() != game.n_players() {
                return Err(ConfigError::new("need one punishment per player").into());
            }
            let punishments = maps
                .iter()
                .enumerate()
                .map(|(j, m)| policy_from_map(game, Scope::MinusPlayer(j), m))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| ConfigError::new(format!("punishments: {e}")))?;
            let defaults = vec![0; game.n_players()];
            Arc::new(FolkPlan::new(game, target, punishments, defaults).map_err(|e| ConfigError::new(e.to_string()))?)
        }
        None => build_folk_devices(game, &target, common.tol)?.plan,
    };
    let sir = SirBotConfig::new(plan.clone(), eps).map_err(|e| ConfigError::new(e.to_string()))?;
    let signal = RandomizationSignal::new(seed);
    let mut run = RunDir::create(&common.out, "simulate", common.label.as_deref())?;

    match &cfg.deviator {
        None => {
            let report = termination_profile(&sir, trials, &signal, &opts, max_k, common.jobs)?;
            run.verdict("on_target", report.all_on_target);
            run.verdict("terminated", report.depth_exceeded == 0);
            run.verdict("termination_tail", report.verdict);
            let tail = report.tail.iter().map(|r| vec![r.k.to_string(), fmt_f(r.empirical), fmt_f(r.se), fmt_f(r.bound), b(r.ok)]);
            run.write_csv("termination.csv", &["k", "empirical", "se", "bound", "ok"], tail.collect::<Vec<_>>())?;
            let hist = report.histogram.iter().map(|(d, c)| vec![d.to_string(), c.to_string()]);
            run.write_csv("histogram.csv", &["depth", "count"], hist.collect::<Vec<_>>())?;
            run.write_json("termination.json", &report)?;
        }
        Some(which) => {
            let library = deviator_library(&sir, player, seed)?;
            let chosen: Vec<_> = library.into_iter().filter(|(name, _)| which == "all" || name.starts_with(which.as_str())).collect();
            if chosen.is_empty() {
                return Err(ConfigError::new(format!("unknown deviator {which:?}; known: all, {}", DEVIATOR_NAMES.join(", "))).into());
            }
            let reports = exploitability_batch(&sir, player, &chosen, trials, &signal, &opts, common.jobs)?;
            // The punishment guarantee is stated against a deterministic target.
            let pure = plan.target().rows().iter().all(|r| r.iter().any(|&p| p == 1.0));
            let mut rows = Vec::new();
            for r in &reports {
                run.verdict(&format!("within_bound:{}", r.deviator), r.within_bound);
                if pure && r.deviator == DEVIATOR_NAMES[1] {
                    let floor = (1.0 - eps).powi(2) - 3.0 * r.punished_se;
                    run.verdict(&format!("punished:{}", r.deviator), r.punished_fraction >= floor);
                }
                rows.extend(trial_rows(game, r));
            }
            let header = ["trial", "deviator", "types", "actions", "depth", "punished", "payoffs", "gain"];
            run.write_csv("trials.csv", &header, rows)?;
            let summary = reports.iter().map(|r| {
                vec![
                    r.deviator.clone(),
                    r.completed.to_string(),
                    r.depth_exceeded.to_string(),
                    fmt_f(r.mean_gain),
                    fmt_f(r.se),
                    fmt_f(r.delta_slack),
                    fmt_f(r.punished_fraction),
                    b(r.within_bound),
                ]
            });
            let header = ["deviator", "completed", "depth_exceeded", "mean_gain", "se", "delta", "punished_fraction", "within_bound"];
            run.write_csv("exploitability.csv", &header, summary.collect::<Vec<_>>())?;
            run.write_json("exploitability.json", &reports)?;
        }
    }
    let config = json!({
        "game": source, "payoff": cfg.payoff, "epsilon": eps, "trials": trials, "deviator": cfg.deviator,
        "player": player, "depth_cap": opts.depth_cap, "max_k": max_k, "tol": common.tol, "jobs": common.jobs,
        "target_policy": cfg.target_policy, "punishments": cfg.punishments,
    });
    run.finish("simulate", config, Some(seed))
}

fn trial_rows<'a>(
    game: &'a condis_core::game::BayesianGame,
    r: &'a ExploitabilityReport,
) -> impl Iterator<Item = Vec<String>> + 'a {
    r.records.iter().map(move |t| {
        let payoffs: Vec<String> = t.payoffs.iter().map(|&x| fmt_f(x)).collect();
        vec![
            t.trial.to_string(),
            r.deviator.clone(),
            game.type_key(t.t),
            game.action_key(t.actions),
            t.depth.to_string(),
            b(t.punished),
            payoffs.join(" "),
            fmt_f(t.gain(r.player)),
        ]
    })
}
