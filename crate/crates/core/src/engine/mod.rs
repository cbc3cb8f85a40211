//! Recursive program games with depth-indexed shared randomness.
//!
//! A program is called with a flag asking for either a disclosure vector or an action.
//! Calls made by a body running at level L run at level L + 1; base calls run at level 1.
//! A body sees the shared uniform c and the grounding uniforms U_L and U_{L+1} of its
//! own level, never L itself. Types of other players are readable only after a completed
//! disclosure call to that player returned a vector with the reader's bit set.

mod analysis;
mod deviators;
mod sirbot;

pub use analysis::{
    estimate_exploitability, exploitability_batch, sample_types, termination_profile, ExploitabilityReport,
    TailRow, TerminationReport, TrialRecord, TypeBucket,
};
pub use deviators::{
    deviator_library, ConstantAction, DiscloseThenDefect, NeverDisclose, RandomizedNoise, DEVIATOR_NAMES,
};
pub use sirbot::{sirbot, SirBot, SirBotConfig};

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::game::BayesianGame;
use crate::signal::SignalSource;

pub const DEFAULT_DEPTH_CAP: u32 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    Disclosure,
    Action,
}

/// Disclosure bits of one player toward every other player (at most 64 players).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DisclosureVector {
    owner: u8,
    n: u8,
    bits: u64,
}

impl DisclosureVector {
    pub fn zeros(owner: usize, n: usize) -> Self {
        DisclosureVector { owner: owner as u8, n: n as u8, bits: 0 }
    }

    pub fn all_ones(owner: usize, n: usize) -> Self {
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        DisclosureVector { owner: owner as u8, n: n as u8, bits: mask & !(1u64 << owner) }
    }

    pub fn from_fn(owner: usize, n: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut v = Self::zeros(owner, n);
        for k in (0..n).filter(|&k| k != owner) {
            v.set(k, f(k));
        }
        v
    }

    pub fn toward(&self, k: usize) -> bool {
        k != self.owner as usize && self.bits & (1 << k) != 0
    }

    pub fn set(&mut self, k: usize, on: bool) {
        if k != self.owner as usize {
            if on {
                self.bits |= 1 << k;
            } else {
                self.bits &= !(1 << k);
            }
        }
    }

    pub fn is_all_ones(&self) -> bool {
        *self == Self::all_ones(self.owner as usize, self.n as usize)
    }

    pub fn len(&self) -> usize {
        self.n as usize
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn owner(&self) -> usize {
        self.owner as usize
    }
}

impl Serialize for DisclosureVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let text: String =
            (0..self.len()).map(|k| if k == self.owner() { '-' } else if self.toward(k) { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Action(usize),
    Disclosure(DisclosureVector),
    /// Returned by a truncated program that attempted a child call.
    NoOutput,
}

impl Output {
    /// True only for a disclosure vector with every bit set.
    pub fn is_all_ones(&self) -> bool {
        matches!(self, Output::Disclosure(v) if v.is_all_ones())
    }

    pub fn action(&self) -> Option<usize> {
        match self {
            Output::Action(a) => Some(*a),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum EngineError {
    #[error("recursion depth exceeded the cap of {cap}")]
    DepthExceeded { cap: u32, partial: Box<TraceStats> },
    /// Control flow of a truncated program; never escapes the truncation boundary.
    #[error("truncated program attempted a call")]
    Truncated,
    #[error("player {reader} read the type of player {player} without disclosure")]
    InformationViolation { reader: usize, player: usize },
    #[error("program {program} of player {player} returned {output:?} for a {kind:?} call")]
    InvalidOutput { program: String, player: usize, kind: CallKind, output: Output },
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

pub trait Program: Send + Sync {
    fn name(&self) -> String;
    /// Pure programs return the same output for the same (c, U window, flag, own type).
    fn is_pure(&self) -> bool {
        true
    }
    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError>;
}

#[derive(Clone, Debug)]
pub struct EngineOptions {
    pub depth_cap: u32,
    pub memoize: bool,
    /// Level assigned to base calls.
    pub base_level: u64,
    pub record_trace: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { depth_cap: DEFAULT_DEPTH_CAP, memoize: true, base_level: 1, record_trace: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEvent {
    pub caller: usize,
    pub callee: usize,
    pub kind: CallKind,
    /// Depth relative to the base calls (base = 1).
    pub depth: u32,
    pub truncated: bool,
    pub output: Output,
    pub memo_hit: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TraceStats {
    pub max_depth: u32,
    pub total_calls: u64,
    pub memo_hits: u64,
    pub terminated: bool,
    pub base_disclosures: Vec<Option<DisclosureVector>>,
    pub base_actions: Vec<Option<usize>>,
    /// Whether the base action call of each player took a punishment branch.
    pub punished: Vec<bool>,
    /// Whether any evaluation context learned each player's type from that player.
    pub revealed: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct BaseCallResult {
    pub disclosures: Vec<DisclosureVector>,
    pub actions: Vec<usize>,
    pub stats: TraceStats,
    pub trace: Option<Vec<TraceEvent>>,
}

type MemoKey = (u32, u8);

struct Evaluator<'g> {
    game: &'g BayesianGame,
    programs: &'g [Arc<dyn Program>],
    types: &'g [usize],
    signal: &'g dyn SignalSource,
    trial: u64,
    opts: &'g EngineOptions,
    c: f64,
    u_cache: Vec<f64>,
    memo: HashMap<MemoKey, Output>,
    stats: TraceStats,
    trace: Option<Vec<TraceEvent>>,
}

impl Evaluator<'_> {
    fn u(&mut self, level: u64) -> f64 {
        let idx = (level - self.opts.base_level) as usize;
        while self.u_cache.len() <= idx {
            let l = self.opts.base_level + self.u_cache.len() as u64;
            self.u_cache.push(self.signal.u_level(self.trial, l));
        }
        self.u_cache[idx]
    }
}

/// What a program body can see and do during one call.
pub struct CallContext<'e, 'g> {
    ev: &'e mut Evaluator<'g>,
    player: usize,
    level: u64,
    truncated: bool,
    known: u64,
}

impl CallContext<'_, '_> {
    pub fn player(&self) -> usize {
        self.player
    }

    pub fn n_players(&self) -> usize {
        self.ev.game.n_players()
    }

    pub fn game(&self) -> &BayesianGame {
        self.ev.game
    }

    pub fn own_type(&self) -> usize {
        self.ev.types[self.player]
    }

    /// The shared correlation uniform.
    pub fn c(&self) -> f64 {
        self.ev.c
    }

    /// U_L for the level this body runs at.
    pub fn u_here(&mut self) -> f64 {
        let l = self.level;
        self.ev.u(l)
    }

    /// U_{L+1} for the level this body runs at.
    pub fn u_next(&mut self) -> f64 {
        let l = self.level + 1;
        self.ev.u(l)
    }

    pub fn knows_type(&self, k: usize) -> bool {
        self.known & (1 << k) != 0
    }

    /// Type of player k, if this context has learned it.
    pub fn type_of(&self, k: usize) -> Result<usize, EngineError> {
        if self.knows_type(k) {
            Ok(self.ev.types[k])
        } else {
            Err(EngineError::InformationViolation { reader: self.player, player: k })
        }
    }

    /// Marks the current base action call as punishing.
    pub fn note_punish(&mut self) {
        if self.level == self.ev.opts.base_level {
            self.ev.stats.punished[self.player] = true;
        }
    }

    /// Calls player k's program one level down.
    pub fn call(&mut self, k: usize, kind: CallKind) -> Result<Output, EngineError> {
        self.call_inner(k, kind, false)
    }

    /// Calls the truncated version of player k's program: NoOutput if it attempts any call.
    pub fn call_truncated(&mut self, k: usize, kind: CallKind) -> Result<Output, EngineError> {
        self.call_inner(k, kind, true)
    }

    fn call_inner(&mut self, k: usize, kind: CallKind, truncated: bool) -> Result<Output, EngineError> {
        if self.truncated {
            return Err(EngineError::Truncated);
        }
        let n = self.n_players();
        if k >= n {
            return Err(EngineError::Config(format!("call to player {k} in a {n}-player game")));
        }
        let level = self.level + 1;
        let depth = (level - self.ev.opts.base_level + 1) as u32;
        if depth > self.ev.opts.depth_cap {
            let mut partial = self.ev.stats.clone();
            partial.terminated = false;
            return Err(EngineError::DepthExceeded { cap: self.ev.opts.depth_cap, partial: Box::new(partial) });
        }
        self.ev.stats.total_calls += 1;
        self.ev.stats.max_depth = self.ev.stats.max_depth.max(depth);
        let program = self.ev.programs[k].clone();
        let slot = (k as u8) << 2 | (kind == CallKind::Action) as u8 | (truncated as u8) << 1;
        let key = (depth, slot);
        let memo_ok = self.ev.opts.memoize && program.is_pure();
        let cached = if memo_ok { self.ev.memo.get(&key).copied() } else { None };
        let (out, hit) = match cached {
            Some(o) => {
                self.ev.stats.memo_hits += 1;
                (o, true)
            }
            None => {
                let mut child =
                    CallContext { ev: &mut *self.ev, player: k, level, truncated, known: 1u64 << k };
                let res = stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || program.run(&mut child, kind));
                let o = match res {
                    Err(EngineError::Truncated) if truncated => Output::NoOutput,
                    Err(e) => return Err(e),
                    Ok(o) => o,
                };
                if memo_ok {
                    self.ev.memo.insert(key, o);
                }
                (o, false)
            }
        };
        if let Some(trace) = self.ev.trace.as_mut() {
            trace.push(TraceEvent { caller: self.player, callee: k, kind, depth, truncated, output: out, memo_hit: hit });
        }
        if let Output::Disclosure(v) = out {
            if k != self.player && v.toward(self.player) {
                self.known |= 1 << k;
                self.ev.stats.revealed[k] = true;
            }
        }
        Ok(out)
    }
}

/// Runs every player's base disclosure call, then every base action call.
pub fn run_base_calls(
    game: &BayesianGame,
    programs: &[Arc<dyn Program>],
    t: &[usize],
    signal: &dyn SignalSource,
    trial: u64,
    opts: &EngineOptions,
) -> Result<BaseCallResult, EngineError> {
    let n = game.n_players();
    if programs.len() != n || t.len() != n {
        return Err(EngineError::Config(format!("expected {n} programs and types")));
    }
    if n > 64 {
        return Err(EngineError::Config("at most 64 players are supported".into()));
    }
    if opts.depth_cap < 2 {
        return Err(EngineError::Config("depth cap must be at least 2".into()));
    }
    let mut ev = Evaluator {
        game,
        programs,
        types: t,
        signal,
        trial,
        opts,
        c: signal.c(trial),
        u_cache: Vec::new(),
        memo: HashMap::new(),
        stats: TraceStats {
            max_depth: 1,
            base_disclosures: vec![None; n],
            base_actions: vec![None; n],
            punished: vec![false; n],
            revealed: vec![false; n],
            ..Default::default()
        },
        trace: if opts.record_trace { Some(Vec::new()) } else { None },
    };
    let mut disclosures = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for kind in [CallKind::Disclosure, CallKind::Action] {
        for i in 0..n {
            let program = programs[i].clone();
            let mut ctx = CallContext { ev: &mut ev, player: i, level: opts.base_level, truncated: false, known: 1u64 << i };
            ctx.ev.stats.total_calls += 1;
            let out = stacker::maybe_grow(256 * 1024, 4 * 1024 * 1024, || program.run(&mut ctx, kind))?;
            let invalid = || EngineError::InvalidOutput { program: program.name(), player: i, kind, output: out };
            match (kind, out) {
                (CallKind::Disclosure, Output::Disclosure(v)) if v.len() == n && v.owner() == i => {
                    ev.stats.base_disclosures[i] = Some(v);
                    disclosures.push(v);
                }
                (CallKind::Action, Output::Action(a)) if a < game.n_actions(i) => {
                    ev.stats.base_actions[i] = Some(a);
                    actions.push(a);
                }
                _ => return Err(invalid()),
            }
        }
    }
    ev.stats.terminated = true;
    Ok(BaseCallResult { disclosures, actions, stats: ev.stats, trace: ev.trace })
}

/// A program that returns a fixed output without calling anyone.
pub struct Constant {
    pub label: String,
    pub disclose_all: bool,
    pub action: usize,
}

impl Program for Constant {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        Ok(match kind {
            CallKind::Disclosure if self.disclose_all => Output::Disclosure(DisclosureVector::all_ones(ctx.player(), ctx.n_players())),
            CallKind::Disclosure => Output::Disclosure(DisclosureVector::zeros(ctx.player(), ctx.n_players())),
            CallKind::Action => Output::Action(self.action),
        })
    }
}

/// Wraps a program so that it aborts with NoOutput at its first attempted call.
pub struct Truncated {
    pub inner: Arc<dyn Program>,
}

pub fn truncate(inner: Arc<dyn Program>) -> Arc<dyn Program> {
    Arc::new(Truncated { inner })
}

impl Program for Truncated {
    fn name(&self) -> String {
        format!("[{}]", self.inner.name())
    }

    fn is_pure(&self) -> bool {
        self.inner.is_pure()
    }

    fn run(&self, ctx: &mut CallContext<'_, '_>, kind: CallKind) -> Result<Output, EngineError> {
        let was = ctx.truncated;
        ctx.truncated = true;
        let res = self.inner.run(ctx, kind);
        ctx.truncated = was;
        match res {
            Err(EngineError::Truncated) => Ok(Output::NoOutput),
            other => other,
        }
    }
}
