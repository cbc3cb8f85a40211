use std::sync::Arc;

use serde::Serialize;

use super::{run_base_calls, sirbot, BaseCallResult, EngineError, EngineOptions, Program, SirBotConfig};
use crate::game::{inverse_cdf, BayesianGame};
use crate::signal::RandomizationSignal;

/// Type profile of a trial, drawn from the prior with the trial's type uniform.
pub fn sample_types(game: &BayesianGame, signal: &RandomizationSignal, trial: u64) -> Vec<usize> {
    let idx = inverse_cdf(game.prior_table(), signal.type_uniform(trial));
    game.type_space().decode(idx)
}

/// Maps trials 0..n over `jobs` threads, preserving order.
fn par_map<T: Send>(n: u64, jobs: usize, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    let jobs = jobs.max(1).min(n.max(1) as usize);
    if jobs == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(jobs as u64);
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs as u64)
            .map(|w| {
                let f = &f;
                s.spawn(move || (w * chunk..((w + 1) * chunk).min(n)).map(f).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    if n == 0.0 {
        return (0.0, 0.0);
    }
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    /// Type profile index.
    pub t: usize,
    /// Joint action index.
    pub actions: usize,
    pub depth: u32,
    pub punished: bool,
    pub payoffs: Vec<f64>,
    /// Deviator's payoff when every player runs the SIR bot.
    pub baseline_payoff: f64,
}

impl TrialRecord {
    pub fn gain(&self, j: usize) -> f64 {
        self.payoffs[j] - self.baseline_payoff
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TypeBucket {
    pub type_index: usize,
    pub type_name: String,
    pub trials: u64,
    pub mean_gain: f64,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExploitabilityReport {
    pub deviator: String,
    pub player: usize,
    pub trials: u64,
    pub completed: u64,
    pub depth_exceeded: u64,
    pub mean_gain: f64,
    pub se: f64,
    pub ci95_half_width: f64,
    pub eps_ground: f64,
    pub u_bar: f64,
    pub delta_slack: f64,
    pub punished_fraction: f64,
    pub punished_se: f64,
    /// mean gain - 3 SE <= delta_slack
    pub within_bound: bool,
    pub per_type: Vec<TypeBucket>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl ExploitabilityReport {
    /// delta = u_bar ((1 - eps)^-2 - 1)
    pub fn delta(u_bar: f64, eps_ground: f64) -> f64 {
        u_bar * ((1.0 - eps_ground).powi(-2) - 1.0)
    }

    /// Mean gain and its standard error recomputed from the stored records.
    pub fn recompute(&self) -> (f64, f64) {
        mean_se(self.records.iter().map(|r| r.gain(self.player)))
    }

    fn from_records(
        game: &BayesianGame,
        deviator: String,
        j: usize,
        eps_ground: f64,
        trials: u64,
        depth_exceeded: u64,
        records: Vec<TrialRecord>,
    ) -> Self {
        let (mean_gain, se) = mean_se(records.iter().map(|r| r.gain(j)));
        let (punished_fraction, punished_se) = mean_se(records.iter().map(|r| r.punished as u8 as f64));
        let u_bar = game.u_bar();
        let delta_slack = Self::delta(u_bar, eps_ground);
        let ts = game.type_space();
        let per_type = (0..game.n_types(j))
            .map(|t_j| {
                let bucket = records.iter().filter(|r| ts.digit(r.t, j) == t_j);
                let (mean_gain, se) = mean_se(bucket.clone().map(|r| r.gain(j)));
                TypeBucket {
                    type_index: t_j,
                    type_name: game.type_names(j)[t_j].clone(),
                    trials: bucket.count() as u64,
                    mean_gain,
                    se,
                }
            })
            .collect();
        ExploitabilityReport {
            deviator,
            player: j,
            trials,
            completed: records.len() as u64,
            depth_exceeded,
            mean_gain,
            se,
            ci95_half_width: 1.96 * se,
            eps_ground,
            u_bar,
            delta_slack,
            punished_fraction,
            punished_se,
            within_bound: mean_gain - 3.0 * se <= delta_slack,
            per_type,
            records,
        }
    }
}

fn run_or_cap(
    game: &BayesianGame,
    programs: &[Arc<dyn Program>],
    t: &[usize],
    signal: &RandomizationSignal,
    trial: u64,
    opts: &EngineOptions,
) -> Result<Option<BaseCallResult>, EngineError> {
    match run_base_calls(game, programs, t, signal, trial, opts) {
        Ok(r) => Ok(Some(r)),
        Err(EngineError::DepthExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Paired Monte Carlo estimate of each deviator's gain over the all-SIR-bot profile.
/// Trials where either run hits the depth cap are counted and excluded.
pub fn exploitability_batch(
    config: &SirBotConfig,
    j: usize,
    deviators: &[(String, Arc<dyn Program>)],
    trials: u64,
    signal: &RandomizationSignal,
    opts: &EngineOptions,
    jobs: usize,
) -> Result<Vec<ExploitabilityReport>, EngineError> {
    let game = config.plan.game();
    let n = game.n_players();
    if j >= n {
        return Err(EngineError::Config(format!("deviator index {j} out of range")));
    }
    let base: Vec<Arc<dyn Program>> = (0..n).map(|_| sirbot(config.clone())).collect();
    let profiles: Vec<Vec<Arc<dyn Program>>> = deviators
        .iter()
        .map(|(_, p)| {
            let mut ps = base.clone();
            ps[j] = p.clone();
            ps
        })
        .collect();
    let per_trial = par_map(trials, jobs, |trial| -> Result<Vec<Option<TrialRecord>>, EngineError> {
        let t = sample_types(game, signal, trial);
        let t_idx = game.type_space().encode(&t);
        let Some(b) = run_or_cap(game, &base, &t, signal, trial, opts)? else {
            return Ok(vec![None; profiles.len()]);
        };
        let baseline_payoff = game.u(t_idx, game.action_space().encode(&b.actions), j);
        profiles
            .iter()
            .map(|ps| {
                Ok(run_or_cap(game, ps, &t, signal, trial, opts)?.map(|r| {
                    let a_idx = game.action_space().encode(&r.actions);
                    TrialRecord {
                        trial,
                        t: t_idx,
                        actions: a_idx,
                        depth: r.stats.max_depth,
                        punished: (0..n).any(|k| k != j && r.stats.punished[k]),
                        payoffs: game.payoffs(t_idx, a_idx).to_vec(),
                        baseline_payoff,
                    }
                }))
            })
            .collect()
    });
    let mut columns: Vec<Vec<TrialRecord>> = vec![Vec::with_capacity(trials as usize); deviators.len()];
    let mut exceeded = vec![0u64; deviators.len()];
    for row in per_trial {
        for (d, rec) in row?.into_iter().enumerate() {
            match rec {
                Some(r) => columns[d].push(r),
                None => exceeded[d] += 1,
            }
        }
    }
    let reports: Vec<_> = columns
        .into_iter()
        .zip(exceeded)
        .zip(deviators)
        .map(|((records, ex), (name, _))| {
            if ex > 0 {
                log::warn!("{name}: {ex} of {trials} trials hit the depth cap and were excluded");
            }
            ExploitabilityReport::from_records(game, name.clone(), j, config.eps_ground, trials, ex, records)
        })
        .collect();
    Ok(reports)
}

pub fn estimate_exploitability(
    config: &SirBotConfig,
    j: usize,
    deviator: (String, Arc<dyn Program>),
    trials: u64,
    signal: &RandomizationSignal,
    opts: &EngineOptions,
) -> Result<ExploitabilityReport, EngineError> {
    let mut reports = exploitability_batch(config, j, &[deviator], trials, signal, opts, 1)?;
    Ok(reports.remove(0))
}

#[derive(Clone, Debug, Serialize)]
pub struct TailRow {
    pub k: u32,
    /// Empirical P(max depth > 2k).
    pub empirical: f64,
    pub se: f64,
    /// (1 - eps^2)^k
    pub bound: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TerminationReport {
    pub eps_ground: f64,
    pub trials: u64,
    pub depth_exceeded: u64,
    pub max_depth: u32,
    pub mean_depth: f64,
    pub mean_calls: f64,
    /// (depth, count), ascending depth.
    pub histogram: Vec<(u32, u64)>,
    pub tail: Vec<TailRow>,
    pub verdict: bool,
    /// Whether every trial's base actions matched the target profile.
    pub all_on_target: bool,
}

impl TerminationReport {
    pub fn fraction_at_most(&self, depth: u32) -> f64 {
        let hit: u64 = self.histogram.iter().filter(|(d, _)| *d <= depth).map(|(_, c)| c).sum();
        hit as f64 / self.trials as f64
    }
}

/// Depth distribution of all-SIR-bot runs against the geometric tail bound.
pub fn termination_profile(
    config: &SirBotConfig,
    trials: u64,
    signal: &RandomizationSignal,
    opts: &EngineOptions,
    max_k: u32,
    jobs: usize,
) -> Result<TerminationReport, EngineError> {
    let game = config.plan.game();
    let n = game.n_players();
    let programs: Vec<Arc<dyn Program>> = (0..n).map(|_| sirbot(config.clone())).collect();
    let rows = par_map(trials, jobs, |trial| -> Result<Option<(u32, u64, bool)>, EngineError> {
        let t = sample_types(game, signal, trial);
        Ok(run_or_cap(game, &programs, &t, signal, trial, opts)?.map(|r| {
            let c = signal_c(signal, trial);
            let on_target = (0..n).all(|i| r.actions[i] == config.plan.target_action(&t, c, i));
            (r.stats.max_depth, r.stats.total_calls, on_target)
        }))
    });
    let mut depths = Vec::with_capacity(trials as usize);
    let mut calls = 0u64;
    let mut exceeded = 0u64;
    let mut all_on_target = true;
    for row in rows {
        match row? {
            Some((d, c, ok)) => {
                depths.push(d);
                calls += c;
                all_on_target &= ok;
            }
            None => {
                exceeded += 1;
                all_on_target = false;
            }
        }
    }
    let total = trials as f64;
    let mut histogram: Vec<(u32, u64)> = Vec::new();
    let mut sorted = depths.clone();
    sorted.sort_unstable();
    for d in sorted {
        match histogram.last_mut() {
            Some((last, c)) if *last == d => *c += 1,
            _ => histogram.push((d, 1)),
        }
    }
    let eps = config.eps_ground;
    let tail: Vec<TailRow> = (1..=max_k)
        .map(|k| {
            // Capped trials count as exceeding every depth.
            let over = depths.iter().filter(|&&d| d > 2 * k).count() as u64 + exceeded;
            let empirical = over as f64 / total;
            let bound = (1.0 - eps * eps).powi(k as i32);
            let se = (empirical * (1.0 - empirical) / total).sqrt().max((bound * (1.0 - bound) / total).sqrt());
            TailRow { k, empirical, se, bound, ok: empirical <= bound + 3.0 * se }
        })
        .collect();
    Ok(TerminationReport {
        eps_ground: eps,
        trials,
        depth_exceeded: exceeded,
        max_depth: depths.iter().copied().max().unwrap_or(0),
        mean_depth: depths.iter().map(|&d| d as f64).sum::<f64>() / depths.len().max(1) as f64,
        mean_calls: calls as f64 / depths.len().max(1) as f64,
        histogram,
        verdict: tail.iter().all(|r| r.ok),
        tail,
        all_on_target,
    })
}

fn signal_c(signal: &RandomizationSignal, trial: u64) -> f64 {
    crate::signal::SignalSource::c(signal, trial)
}
