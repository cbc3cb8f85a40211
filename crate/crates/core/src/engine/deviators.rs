use std::sync::Arc;

use super::{sirbot, CallContext, CallKind, DisclosureVector, EngineError, Output, Program, SirBotConfig};
use crate::devices::FolkPlan;
use crate::game::{best_response, BayesianGame};

pub const DEVIATOR_NAMES: [&str; 5] =
    ["never-disclose", "disclose-then-defect", "constant-action", "fresh-identity-sirbot", "randomized-noise"];

/// Withholds its type from everyone and best-responds to the punishment.
pub struct NeverDisclose {
    pub actions_by_type: Vec<usize>,
}

impl NeverDisclose {
    pub fn best_response(plan: &FolkPlan, j: usize) -> Result<Self, EngineError> {
        let game = plan.game();
        let actions_by_type = (0..game.n_types(j))
            .map(|t_j| best_response(game, &plan.punishments()[j], j, t_j).map(|(_, a)| a))
            .collect::<Result<_, _>>()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        Ok(NeverDisclose { actions_by_type })
    }
}

impl Program for NeverDisclose {
    fn name(&self) -> String {
        DEVIATOR_NAMES[0].into()
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        Ok(match kind {
            CallKind::Disclosure => Output::Disclosure(DisclosureVector::zeros(ctx.player(), ctx.n_players())),
            CallKind::Action => Output::Action(self.actions_by_type[ctx.own_type()]),
        })
    }
}

/// Discloses to everyone, then plays a best response to the others following the target.
pub struct DiscloseThenDefect {
    pub actions_by_type: Vec<usize>,
}

impl DiscloseThenDefect {
    pub fn best_response(plan: &FolkPlan, j: usize) -> Self {
        let game = plan.game();
        let target = plan.target();
        let actions_by_type = (0..game.n_types(j)).map(|t_j| greedy_response(game, target.rows(), j, t_j)).collect();
        DiscloseThenDefect { actions_by_type }
    }
}

/// Argmax over a_j of the interim payoff when everyone else follows the target; lowest index on ties.
fn greedy_response(game: &BayesianGame, rows: &[Vec<f64>], j: usize, t_j: usize) -> usize {
    let ts = game.type_space();
    let asp = game.action_space();
    let mut value = vec![0.0; game.n_actions(j)];
    for t in 0..ts.len() {
        let q = game.prior(t);
        if q <= 0.0 || ts.digit(t, j) != t_j {
            continue;
        }
        for (a, &p) in rows[t].iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let (_, rest) = asp.split(a, j);
            for (d, v) in value.iter_mut().enumerate() {
                *v += q * p * game.u(t, asp.join(j, d, rest), j);
            }
        }
    }
    let mut best = 0;
    for (d, &v) in value.iter().enumerate() {
        if v > value[best] + 1e-12 {
            best = d;
        }
    }
    best
}

/// Discloses to everyone and always plays one action.
pub struct ConstantAction {
    pub action: usize,
}

impl Program for ConstantAction {
    fn name(&self) -> String {
        format!("{}({})", DEVIATOR_NAMES[2], self.action)
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        Ok(match kind {
            CallKind::Disclosure => Output::Disclosure(DisclosureVector::all_ones(ctx.player(), ctx.n_players())),
            CallKind::Action => Output::Action(self.action),
        })
    }
}

impl Program for DiscloseThenDefect {
    fn name(&self) -> String {
        DEVIATOR_NAMES[1].into()
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        Ok(match kind {
            CallKind::Disclosure => Output::Disclosure(DisclosureVector::all_ones(ctx.player(), ctx.n_players())),
            CallKind::Action => Output::Action(self.actions_by_type[ctx.own_type()]),
        })
    }
}

/// Outputs a pseudo-random function of what it can observe; never calls anyone.
pub struct RandomizedNoise {
    pub seed: u64,
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Program for RandomizedNoise {
    fn name(&self) -> String {
        format!("{}({})", DEVIATOR_NAMES[4], self.seed)
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        let mut h = mix(self.seed);
        for x in [ctx.c().to_bits(), ctx.u_here().to_bits(), ctx.u_next().to_bits(), ctx.own_type() as u64, kind as u64] {
            h = mix(h ^ x);
        }
        let (me, n) = (ctx.player(), ctx.n_players());
        Ok(match kind {
            CallKind::Disclosure => Output::Disclosure(DisclosureVector::from_fn(me, n, |k| h >> k & 1 == 1)),
            CallKind::Action => Output::Action((h % ctx.game().n_actions(me) as u64) as usize),
        })
    }
}

/// The deviations tried against player j's SIR bot, with display names.
pub fn deviator_library(config: &SirBotConfig, j: usize, noise_seed: u64) -> Result<Vec<(String, Arc<dyn Program>)>, EngineError> {
    let plan = &config.plan;
    let game = plan.game();
    let mut lib: Vec<(String, Arc<dyn Program>)> = vec![
        (DEVIATOR_NAMES[0].into(), Arc::new(NeverDisclose::best_response(plan, j)?)),
        (DEVIATOR_NAMES[1].into(), Arc::new(DiscloseThenDefect::best_response(plan, j))),
    ];
    for a in 0..game.n_actions(j) {
        lib.push((format!("{}({})", DEVIATOR_NAMES[2], game.action_names(j)[a]), Arc::new(ConstantAction { action: a })));
    }
    lib.push((DEVIATOR_NAMES[3].into(), sirbot(config.clone().with_identity("sirbot-fresh"))));
    lib.push((format!("{}({noise_seed})", DEVIATOR_NAMES[4]), Arc::new(RandomizedNoise { seed: noise_seed })));
    Ok(lib)
}
