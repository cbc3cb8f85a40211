use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, ValueEnum};
use condis_core::canonical::mountain::{MountainError, RegionReport};
use condis_core::canonical::war::war_pbe_closed_form;
use condis_core::canonical::{auction_checks, prop3_verify, region_check, war_pbe, AuctionParams, MountainParams, WarParams};
use condis_core::disclosure::Unraveling;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::load::read_json;
use crate::output::{b, fmt_f, RunDir};
use crate::{Common, ConfigError};

/// Largest allowed gap between a solved war outcome and its closed form.
const WAR_TOL: f64 = 1e-9;
/// Offers at which the mountain region moments are sampled.
const LEMMA3_OFFERS: [f64; 2] = [1.0, 0.3];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Which {
    War,
    Auction,
    Mountain,
    All,
}

#[derive(Args, Debug)]
pub struct ExamplesArgs {
    #[arg(value_enum, default_value_t = Which::All)]
    pub which: Which,
    /// JSON with optional `war`, `auction` and `mountain` parameter blocks.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExamplesConfig {
    pub war: WarParams,
    pub auction: AuctionParams,
    pub mountain: MountainParams,
}

pub fn run(common: &Common, args: &ExamplesArgs) -> Result<(bool, PathBuf)> {
    let mut cfg = match &args.config {
        Some(p) => read_json::<ExamplesConfig>(p, "examples config")?,
        None => ExamplesConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.mountain.seed = seed;
    }
    let runs = |w: Which| args.which == Which::All || args.which == w;
    let mut run = RunDir::create(&common.out, "examples", common.label.as_deref())?;
    let mut summary = serde_json::Map::new();

    if runs(Which::War) {
        let p = &cfg.war;
        let with = war_pbe(p, true).map_err(|e| ConfigError::new(format!("war: {e}")))?;
        let open = war_pbe(p, false).map_err(|e| ConfigError::new(format!("war: {e}")))?;
        let (offer, weak, strong, disclose) = war_pbe_closed_form(p);
        let close = |a: f64, b: f64| (a - b).abs() <= WAR_TOL;
        let weak_ok = with.pooled_offer.is_some_and(|o| close(o, offer))
            && close(with.payoff_weak, weak)
            && close(with.payoff_strong, strong)
            && close(with.strong_disclosure_payoff, disclose);
        run.verdict("war:weak_point", weak_ok);
        run.verdict("war:open_full_unraveling", open.classification == Unraveling::Full);
        let row = |name: &str, r: &condis_core::canonical::WarPbe| {
            vec![
                name.to_string(),
                format!("{:?}", r.classification).to_lowercase(),
                r.pooled_offer.map(fmt_f).unwrap_or_default(),
                fmt_f(r.payoff_weak),
                fmt_f(r.payoff_strong),
                fmt_f(r.strong_disclosure_payoff),
                fmt_f(r.strong_disclosure_gap),
                fmt_f(r.payoff_country1),
            ]
        };
        let header = ["variant", "unraveling", "pooled_offer", "payoff_weak", "payoff_strong", "strong_disclosure_payoff", "strong_disclosure_gap", "payoff_country1"];
        run.write_csv("war_pbe.csv", &header, vec![row("weak_point", &with), row("open", &open)])?;
        summary.insert(
            "war".into(),
            json!({"weak_point": with, "open": open, "closed_form": {"offer": offer, "payoff_weak": weak, "payoff_strong": strong, "strong_disclosure_payoff": disclose}}),
        );
    }

    if runs(Which::Auction) {
        let report = auction_checks(&cfg.auction).map_err(|e| ConfigError::new(format!("auction: {e}")))?;
        run.verdict("auction:best_response", report.best_response_ok);
        run.verdict("auction:equilibrium_payoff", report.equilibrium_payoff_ok);
        run.verdict("auction:policy_payoff", report.policy_payoff_ok);
        run.verdict("auction:policy_dominates", report.policy_dominates);
        run.verdict("auction:ic_witness", report.ic_witness.is_some());
        run.verdict("auction:welfare", report.welfare_ok);
        let rows = report.rows.iter().map(|r| {
            vec![
                fmt_f(r.s),
                fmt_f(r.equilibrium_bid),
                fmt_f(r.eta),
                fmt_f(r.best_bid),
                fmt_f(r.equilibrium_payoff),
                fmt_f(r.equilibrium_closed_form),
                fmt_f(r.policy_payoff),
                fmt_f(r.policy_closed_form),
            ]
        });
        let header = ["s", "bid", "eta", "best_bid", "payoff", "payoff_closed_form", "policy_payoff", "policy_closed_form"];
        run.write_csv("auction_checks.csv", &header, rows.collect::<Vec<_>>())?;
        summary.insert("auction".into(), serde_json::to_value(&report)?);
    }

    if runs(Which::Mountain) {
        let p = &cfg.mountain;
        let report = prop3_verify(p).map_err(|e| ConfigError::new(format!("mountain: {e}")))?;
        for c in &report.clauses {
            run.verdict(&format!("mountain:{}", c.clause), c.ok);
        }
        let forms = p.forms();
        let mut lemma3: Vec<RegionReport> = Vec::new();
        let mut empty = Vec::new();
        for s in LEMMA3_OFFERS {
            match region_check(&forms, s, p.samples, p.seed) {
                Ok(r) => {
                    run.verdict(&format!("mountain:lemma3@{s}"), r.verdict);
                    lemma3.push(r);
                }
                Err(MountainError::EmptyRegion { .. }) => empty.push(s),
                Err(e) => return Err(ConfigError::new(format!("mountain: {e}")).into()),
            }
        }
        let rows = lemma3.iter().flat_map(|r| {
            r.checks.iter().map(move |c| {
                vec![fmt_f(r.s), c.stat.clone(), fmt_f(c.monte_carlo), fmt_f(c.closed_form), fmt_f(c.se), fmt_f(c.tol), b(c.ok)]
            })
        });
        run.write_csv("mountain_lemma3.csv", &["s", "stat", "monte_carlo", "closed_form", "se", "tol", "ok"], rows.collect::<Vec<_>>())?;
        let rows = report.clauses.iter().map(|c| vec![c.clause.clone(), fmt_f(c.value), fmt_f(c.expected), b(c.ok), c.detail.clone()]);
        run.write_csv("mountain_prop3.csv", &["clause", "value", "expected", "ok", "detail"], rows.collect::<Vec<_>>())?;
        let rows = report.s_star.curve.iter().map(|&(s, v)| vec![fmt_f(s), fmt_f(v)]);
        run.write_csv("mountain_objective.csv", &["s", "objective"], rows.collect::<Vec<_>>())?;
        summary.insert("mountain".into(), json!({"prop3": report, "lemma3": lemma3, "empty_regions": empty}));
    }

    run.write_json("summary.json", &summary)?;
    let seed = runs(Which::Mountain).then_some(cfg.mountain.seed);
    run.finish("examples", json!({"which": format!("{:?}", args.which).to_lowercase(), "params": cfg}), seed)
}
