use std::sync::Arc;

use serde::Serialize;

use super::{CallContext, CallKind, DisclosureVector, EngineError, Output, Program};
use crate::devices::FolkPlan;

#[derive(Clone)]
pub struct SirBotConfig {
    pub plan: Arc<FolkPlan>,
    /// Grounding probability: each level is grounded with this probability.
    pub eps_ground: f64,
    /// Distinguishes otherwise identical copies; has no effect on behavior.
    pub identity: String,
}

impl SirBotConfig {
    pub fn new(plan: Arc<FolkPlan>, eps_ground: f64) -> Result<Self, EngineError> {
        if !(eps_ground > 0.0 && eps_ground < 1.0) {
            return Err(EngineError::Config(format!("eps_ground must lie in (0, 1), got {eps_ground}")));
        }
        Ok(SirBotConfig { plan, eps_ground, identity: "sirbot".into() })
    }

    pub fn with_identity(mut self, identity: impl Into<String>) -> Self {
        self.identity = identity.into();
        self
    }
}

/// The epsilon-grounded fair SIR bot.
pub struct SirBot {
    config: SirBotConfig,
}

#[derive(Serialize)]
struct Descriptor<'a> {
    identity: &'a str,
    eps_ground: f64,
}

pub fn sirbot(config: SirBotConfig) -> Arc<dyn Program> {
    Arc::new(SirBot { config })
}

impl SirBot {
    pub fn config(&self) -> &SirBotConfig {
        &self.config
    }

    fn eps(&self) -> f64 {
        self.config.eps_ground
    }

    fn full_types(ctx: &CallContext<'_, '_>) -> Result<Vec<usize>, EngineError> {
        (0..ctx.n_players()).map(|k| if k == ctx.player() { Ok(ctx.own_type()) } else { ctx.type_of(k) }).collect()
    }

    fn target(&self, ctx: &CallContext<'_, '_>, k: usize) -> Result<usize, EngineError> {
        let t = Self::full_types(ctx)?;
        Ok(self.config.plan.target_action(&t, ctx.c(), k))
    }

    /// The counterpart held responsible: withholding from us first, then any missing
    /// disclosure, then an action mismatch; lowest index within a tier.
    fn deviator(ctx: &CallContext<'_, '_>, ys: &[Option<Output>], mismatched: &[bool]) -> Option<usize> {
        let me = ctx.player();
        let others = || (0..ctx.n_players()).filter(move |&k| k != me);
        let withholds = |k: usize| !matches!(ys[k], Some(Output::Disclosure(v)) if v.toward(me));
        others()
            .find(|&k| withholds(k))
            .or_else(|| others().find(|&k| !ys[k].is_some_and(|y| y.is_all_ones())))
            .or_else(|| others().find(|&k| mismatched[k]))
    }

    /// Player k's component of the punishment against j, or k's default when some
    /// type of t_{-j} is unknown here.
    fn punish_component(&self, ctx: &CallContext<'_, '_>, j: Option<usize>, k: usize) -> usize {
        let plan = &self.config.plan;
        let Some(j) = j else { return plan.default_action(k) };
        let n = ctx.n_players();
        let mut t_minus = Vec::with_capacity(n - 1);
        for m in (0..n).filter(|&m| m != j) {
            let t = if m == ctx.player() { Ok(ctx.own_type()) } else { ctx.type_of(m) };
            match t {
                Ok(t) => t_minus.push(t),
                Err(_) => return plan.default_action(k),
            }
        }
        plan.punish_action(j, &t_minus, ctx.c(), k)
    }

    fn punish(
        &self,
        ctx: &mut CallContext<'_, '_>,
        ys: &[Option<Output>],
        mismatched: &[bool],
    ) -> Result<Output, EngineError> {
        let j = Self::deviator(ctx, ys, mismatched);
        ctx.note_punish();
        Ok(Output::Action(self.punish_component(ctx, j, ctx.player())))
    }

    fn cooperate(&self, ctx: &CallContext<'_, '_>) -> Result<Output, EngineError> {
        Ok(Output::Action(self.target(ctx, ctx.player())?))
    }

    fn action(&self, ctx: &mut CallContext<'_, '_>) -> Result<Output, EngineError> {
        let me = ctx.player();
        let n = ctx.n_players();
        let mut ys = vec![None; n];
        let mut mismatched = vec![false; n];
        if ctx.u_next() >= self.eps() {
            for k in (0..n).filter(|&k| k != me) {
                ys[k] = Some(ctx.call(k, CallKind::Disclosure)?);
            }
            if ys.iter().flatten().all(Output::is_all_ones) {
                if ctx.u_here() < self.eps() {
                    return self.cooperate(ctx);
                }
                let mut actions = vec![None; n];
                for k in (0..n).filter(|&k| k != me) {
                    actions[k] = ctx.call(k, CallKind::Action)?.action();
                }
                for k in (0..n).filter(|&k| k != me) {
                    mismatched[k] = actions[k] != Some(self.target(ctx, k)?);
                }
                if !mismatched.iter().any(|&m| m) {
                    return self.cooperate(ctx);
                }
            }
            return self.punish(ctx, &ys, &mismatched);
        }
        for k in (0..n).filter(|&k| k != me) {
            ys[k] = Some(ctx.call_truncated(k, CallKind::Disclosure)?);
        }
        if ys.iter().flatten().all(Output::is_all_ones) {
            return self.cooperate(ctx);
        }
        self.punish(ctx, &ys, &mismatched)
    }

    fn disclosure(&self, ctx: &mut CallContext<'_, '_>) -> Result<Output, EngineError> {
        let me = ctx.player();
        let n = ctx.n_players();
        let mut out = DisclosureVector::zeros(me, n);
        if ctx.u_here() < self.eps() {
            return Ok(Output::Disclosure(DisclosureVector::all_ones(me, n)));
        }
        let mut ys = vec![None; n];
        let mut actions = vec![None; n];
        for k in (0..n).filter(|&k| k != me) {
            ys[k] = Some(ctx.call(k, CallKind::Disclosure)?);
            actions[k] = ctx.call(k, CallKind::Action)?.action();
        }
        let mut mismatched = vec![false; n];
        if ys.iter().flatten().all(Output::is_all_ones) {
            for k in (0..n).filter(|&k| k != me) {
                mismatched[k] = actions[k] != Some(self.target(ctx, k)?);
            }
            if !mismatched.iter().any(|&m| m) {
                return Ok(Output::Disclosure(DisclosureVector::all_ones(me, n)));
            }
        }
        let j = Self::deviator(ctx, &ys, &mismatched);
        let grounded_next = ctx.u_next() < self.eps();
        for k in (0..n).filter(|&k| k != me) {
            let discloses = matches!(ys[k], Some(Output::Disclosure(v)) if v.toward(me));
            if !discloses {
                continue;
            }
            let punishing = j != Some(k) && actions[k] == Some(self.punish_component(ctx, j, k));
            if punishing || grounded_next {
                out.set(k, true);
            }
        }
        Ok(Output::Disclosure(out))
    }
}

impl Program for SirBot {
    fn name(&self) -> String {
        serde_json::to_string(&Descriptor { identity: &self.config.identity, eps_ground: self.config.eps_ground })
            .unwrap_or_else(|_| self.config.identity.clone())
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        match kind {
            CallKind::Action => self.action(ctx),
            CallKind::Disclosure => self.disclosure(ctx),
        }
    }
}
