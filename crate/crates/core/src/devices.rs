//! Commitment devices that condition disclosure and play on each other's fingerprints.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::game::{induced_payoffs, BayesianGame, CorrelatedPolicy, GameError, PayoffVector, Sampler, Scope};
use crate::solvers::{check_feasible, check_intir, SolverError, Violation, Witness};

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("player {reader} read the undisclosed type of player {player}")]
    InformationViolation { reader: usize, player: usize },
    #[error("target payoffs are not interim individually rational: {0:?}")]
    NotIndividuallyRational(Vec<Violation>),
    #[error("invalid device profile: {0}")]
    Invalid(String),
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Content hash identifying a device's behavior.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn of(descriptor: &serde_json::Value) -> Self {
        let mut h = Sha256::new();
        h.update(descriptor.to_string().as_bytes());
        Fingerprint(h.finalize().into())
    }

    pub fn hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl Serialize for Fingerprint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.hex())
    }
}

/// Types a device has learned: its own plus those disclosed to it.
#[derive(Clone, Debug)]
pub struct TypeLedger {
    reader: usize,
    known: Vec<Option<usize>>,
}

impl TypeLedger {
    pub fn get(&self, k: usize) -> Result<usize, DeviceError> {
        self.known[k].ok_or(DeviceError::InformationViolation { reader: self.reader, player: k })
    }

    pub fn knows(&self, k: usize) -> bool {
        self.known[k].is_some()
    }
}

pub trait Device: Send + Sync {
    fn name(&self) -> String;
    fn fingerprint(&self) -> Fingerprint;
    /// Whether to reveal `own_type` to each player, given all devices' fingerprints.
    fn disclose(&self, me: usize, own_type: usize, fingerprints: &[Fingerprint]) -> Vec<bool>;
    /// Action given the fingerprints, the learned types and the shared uniform.
    fn respond(&self, me: usize, fingerprints: &[Fingerprint], ledger: &TypeLedger, c: f64) -> Result<usize, DeviceError>;
    /// Values of c at which the response may change.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Target policy and punishments shared by the folk devices of all players.
pub struct FolkPlan {
    game: BayesianGame,
    target: CorrelatedPolicy,
    target_sampler: Sampler,
    punishments: Vec<CorrelatedPolicy>,
    punishment_samplers: Vec<Sampler>,
    default_actions: Vec<usize>,
    hash: Fingerprint,
}

impl FolkPlan {
    pub fn new(
        game: &BayesianGame,
        target: CorrelatedPolicy,
        punishments: Vec<CorrelatedPolicy>,
        default_actions: Vec<usize>,
    ) -> Result<Self, DeviceError> {
        let n = game.n_players();
        if target.scope() != Scope::FullProfile || target.condition() != game.type_space() {
            return Err(DeviceError::Invalid("target must be a full-profile policy of the game".into()));
        }
        if punishments.len() != n || punishments.iter().enumerate().any(|(j, p)| p.scope() != Scope::MinusPlayer(j)) {
            return Err(DeviceError::Invalid("need one minus-player punishment per player".into()));
        }
        if default_actions.len() != n || default_actions.iter().enumerate().any(|(i, &a)| a >= game.n_actions(i)) {
            return Err(DeviceError::Invalid("need one valid default action per player".into()));
        }
        let hash = Fingerprint::of(&serde_json::json!({
            "target": target,
            "punishments": punishments,
            "default": default_actions,
        }));
        Ok(FolkPlan {
            game: game.clone(),
            target_sampler: Sampler::new(&target),
            punishment_samplers: punishments.iter().map(Sampler::new).collect(),
            target,
            punishments,
            default_actions,
            hash,
        })
    }

    pub fn target(&self) -> &CorrelatedPolicy {
        &self.target
    }

    pub fn punishments(&self) -> &[CorrelatedPolicy] {
        &self.punishments
    }

    pub fn game(&self) -> &BayesianGame {
        &self.game
    }

    /// Player i's component of the target joint action at type profile `t`.
    pub fn target_action(&self, t: &[usize], c: f64, i: usize) -> usize {
        let a = self.target_sampler.sample(self.game.type_space().encode(t), c);
        self.game.action_space().digit(a, i)
    }

    /// Player i's component of the punishment against j, given t_{-j}.
    pub fn punish_action(&self, j: usize, t_minus: &[usize], c: f64, i: usize) -> usize {
        let p = &self.punishments[j];
        let b = self.punishment_samplers[j].sample(p.condition().encode(t_minus), c);
        p.outcome().digit(b, if i < j { i } else { i - 1 })
    }

    pub fn default_action(&self, i: usize) -> usize {
        self.default_actions[i]
    }

    fn folk_fingerprint(&self, player: usize, salt: Option<&str>) -> Fingerprint {
        Fingerprint::of(&serde_json::json!({ "kind": "folk", "player": player, "plan": self.hash.hex(), "salt": salt }))
    }
}

/// The folk-theorem device: disclose to matching devices, play the target when all match,
/// punish a single mismatching device.
pub struct FolkDevice {
    plan: Arc<FolkPlan>,
    player: usize,
    salt: Option<String>,
    fingerprint: Fingerprint,
    expected: Vec<Fingerprint>,
}

impl FolkDevice {
    pub fn new(plan: Arc<FolkPlan>, player: usize) -> Self {
        Self::with_salt(plan, player, None)
    }

    /// A behaviorally identical copy whose fingerprint differs from the genuine device.
    pub fn mimic(plan: Arc<FolkPlan>, player: usize) -> Self {
        Self::with_salt(plan, player, Some("mimic".into()))
    }

    fn with_salt(plan: Arc<FolkPlan>, player: usize, salt: Option<String>) -> Self {
        let fingerprint = plan.folk_fingerprint(player, salt.as_deref());
        let expected = (0..plan.game.n_players()).map(|k| plan.folk_fingerprint(k, None)).collect();
        FolkDevice { plan, player, salt, fingerprint, expected }
    }
}

impl Device for FolkDevice {
    fn name(&self) -> String {
        match &self.salt {
            None => format!("folk[{}]", self.player),
            Some(s) => format!("folk-{s}[{}]", self.player),
        }
    }

    fn fingerprint(&self) -> Fingerprint {
        self.fingerprint
    }

    fn disclose(&self, me: usize, _own_type: usize, fingerprints: &[Fingerprint]) -> Vec<bool> {
        (0..fingerprints.len()).map(|k| k != me && fingerprints[k] == self.expected[k]).collect()
    }

    fn respond(&self, me: usize, fingerprints: &[Fingerprint], ledger: &TypeLedger, c: f64) -> Result<usize, DeviceError> {
        let n = fingerprints.len();
        let deviator = (0..n).find(|&k| k != me && fingerprints[k] != self.expected[k]);
        match deviator {
            None => {
                if self.salt.is_some() && (0..n).any(|k| !ledger.knows(k)) {
                    return Ok(self.plan.default_action(me));
                }
                let t: Vec<usize> = (0..n).map(|k| ledger.get(k)).collect::<Result<_, _>>()?;
                Ok(self.plan.target_action(&t, c, me))
            }
            Some(j) => {
                let others: Vec<usize> = (0..n).filter(|&k| k != j).collect();
                if others.iter().any(|&k| !ledger.knows(k)) {
                    return Ok(self.plan.default_action(me));
                }
                let t_minus: Vec<usize> = others.iter().map(|&k| ledger.get(k)).collect::<Result<_, _>>()?;
                Ok(self.plan.punish_action(j, &t_minus, c, me))
            }
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.plan.target.breakpoints();
        for p in &self.plan.punishments {
            b.extend(p.breakpoints());
        }
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

/// A device that plays a type-dependent action and discloses to everyone or to no one.
pub struct FixedDevice {
    pub label: String,
    pub actions_by_type: Vec<usize>,
    pub disclose_all: bool,
}

impl Device for FixedDevice {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of(&serde_json::json!({
            "kind": "fixed",
            "actions": self.actions_by_type,
            "disclose_all": self.disclose_all,
        }))
    }

    fn disclose(&self, me: usize, _own_type: usize, fingerprints: &[Fingerprint]) -> Vec<bool> {
        (0..fingerprints.len()).map(|k| k != me && self.disclose_all).collect()
    }

    fn respond(&self, me: usize, _f: &[Fingerprint], ledger: &TypeLedger, _c: f64) -> Result<usize, DeviceError> {
        Ok(self.actions_by_type[ledger.get(me)?])
    }
}

pub struct FolkProfile {
    pub plan: Arc<FolkPlan>,
    pub devices: Vec<Arc<dyn Device>>,
}

/// Builds folk devices for `target`, with minimax punishments holding every type to its target payoff.
pub fn build_folk_devices(game: &BayesianGame, target: &CorrelatedPolicy, tol: f64) -> Result<FolkProfile, DeviceError> {
    let x = induced_payoffs(game, target)?;
    let report = check_intir(game, &x, tol)?;
    let punishments = match report.witness {
        Some(Witness::Punishments(p)) if report.verdict => p,
        _ => return Err(DeviceError::NotIndividuallyRational(report.violations)),
    };
    let plan = Arc::new(FolkPlan::new(game, target.clone(), punishments, vec![0; game.n_players()])?);
    Ok(folk_profile(plan))
}

pub fn folk_profile(plan: Arc<FolkPlan>) -> FolkProfile {
    let devices = (0..plan.game.n_players()).map(|i| Arc::new(FolkDevice::new(plan.clone(), i)) as Arc<dyn Device>).collect();
    FolkProfile { plan, devices }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommitmentOutcome {
    /// `disclosed[i][k]`: whether i revealed its type to k.
    pub disclosed: Vec<Vec<bool>>,
    pub actions: Vec<usize>,
    pub payoffs: Vec<f64>,
}

/// Plays one realization of the commitment game.
pub fn evaluate_commitment_game(
    game: &BayesianGame,
    devices: &[Arc<dyn Device>],
    t: &[usize],
    c: f64,
) -> Result<CommitmentOutcome, DeviceError> {
    let order: Vec<usize> = (0..devices.len()).collect();
    evaluate_in_order(game, devices, t, c, &order)
}

/// As [`evaluate_commitment_game`], querying devices in the given order.
pub fn evaluate_in_order(
    game: &BayesianGame,
    devices: &[Arc<dyn Device>],
    t: &[usize],
    c: f64,
    order: &[usize],
) -> Result<CommitmentOutcome, DeviceError> {
    let n = game.n_players();
    if devices.len() != n || t.len() != n || order.len() != n {
        return Err(DeviceError::Invalid(format!("expected {n} devices, types and order entries")));
    }
    let fps: Vec<Fingerprint> = devices.iter().map(|d| d.fingerprint()).collect();
    let mut disclosed = vec![Vec::new(); n];
    for &i in order {
        disclosed[i] = devices[i].disclose(i, t[i], &fps);
    }
    let mut actions = vec![0; n];
    for &i in order {
        let known = (0..n).map(|k| if k == i || disclosed[k][i] { Some(t[k]) } else { None }).collect();
        let ledger = TypeLedger { reader: i, known };
        actions[i] = devices[i].respond(i, &fps, &ledger, c)?;
        if actions[i] >= game.n_actions(i) {
            return Err(DeviceError::Invalid(format!("device {} chose action {}", devices[i].name(), actions[i])));
        }
    }
    let a = game.action_space().encode(&actions);
    let payoffs = game.payoffs(game.type_space().encode(t), a).to_vec();
    Ok(CommitmentOutcome { disclosed, actions, payoffs })
}

/// How expectations over the shared uniform are computed.
#[derive(Clone, Copy, Debug)]
pub enum Integration {
    /// Exact: piecewise-constant integration between breakpoints.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

/// (point, weight) pairs for integrating over c.
fn c_nodes(devices: &[Arc<dyn Device>], mode: Integration) -> Vec<(f64, f64)> {
    match mode {
        Integration::Exact => {
            let mut b: Vec<f64> = devices.iter().flat_map(|d| d.breakpoints()).collect();
            b.push(0.0);
            b.push(1.0);
            b.sort_by(f64::total_cmp);
            b.dedup();
            b.windows(2).filter(|w| w[1] > w[0]).map(|w| ((w[0] + w[1]) / 2.0, w[1] - w[0])).collect()
        }
        Integration::MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..samples).map(|_| (rng.random::<f64>(), 1.0 / samples as f64)).collect()
        }
    }
}

/// Ex interim payoffs of every type under a device profile.
pub fn device_payoffs(game: &BayesianGame, devices: &[Arc<dyn Device>], mode: Integration) -> Result<PayoffVector, DeviceError> {
    let nodes = c_nodes(devices, mode);
    let ts = game.type_space();
    let n = game.n_players();
    let mut values: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; game.n_types(i)]).collect();
    for t in 0..ts.len() {
        let q = game.prior(t);
        if q <= 0.0 {
            continue;
        }
        let digits = ts.decode(t);
        for &(c, w) in &nodes {
            let out = evaluate_commitment_game(game, devices, &digits, c)?;
            for i in 0..n {
                values[i][digits[i]] += q / game.marginal(i, digits[i]) * w * out.payoffs[i];
            }
        }
    }
    Ok(PayoffVector::new(values))
}

#[derive(Clone, Debug, Serialize)]
pub struct BneRow {
    pub player: usize,
    pub type_index: usize,
    pub best_deviation: String,
    pub gain: f64,
    /// Standard error of the gain (0 for exact integration).
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct BneReport {
    pub rows: Vec<BneRow>,
    pub max_gain: f64,
    pub verdict: bool,
    pub tol: f64,
}

/// Largest gain of any library device over the profile, per (player, type).
pub fn verify_bne(
    game: &BayesianGame,
    devices: &[Arc<dyn Device>],
    library: &[Vec<Arc<dyn Device>>],
    mode: Integration,
    tol: f64,
) -> Result<BneReport, DeviceError> {
    let n = game.n_players();
    if library.len() != n {
        return Err(DeviceError::Invalid("need one deviation library per player".into()));
    }
    let all: Vec<Arc<dyn Device>> = devices.iter().chain(library.iter().flatten()).cloned().collect();
    let nodes = c_nodes(&all, mode);
    let ts = game.type_space();
    let mut rows = Vec::new();
    for j in 0..n {
        for t_j in 0..game.n_types(j) {
            let m = game.marginal(j, t_j);
            if m <= 0.0 {
                continue;
            }
            // Per node gains, accumulated over t_{-j}, for every deviation.
            let mut best = BneRow { player: j, type_index: t_j, best_deviation: "none".into(), gain: 0.0, se: 0.0 };
            let mut best_gain = f64::NEG_INFINITY;
            for dev in &library[j] {
                let mut profile = devices.to_vec();
                profile[j] = dev.clone();
                let mut per_node = vec![0.0; nodes.len()];
                for r in 0..ts.without(j).len() {
                    let t = ts.join(j, t_j, r);
                    let q = game.prior(t) / m;
                    if q <= 0.0 {
                        continue;
                    }
                    let digits = ts.decode(t);
                    for (k, &(c, _)) in nodes.iter().enumerate() {
                        let base = evaluate_commitment_game(game, devices, &digits, c)?.payoffs[j];
                        let alt = evaluate_commitment_game(game, &profile, &digits, c)?.payoffs[j];
                        per_node[k] += q * (alt - base);
                    }
                }
                let gain: f64 = per_node.iter().zip(&nodes).map(|(g, (_, w))| g * w).sum();
                let se = match mode {
                    Integration::Exact => 0.0,
                    Integration::MonteCarlo { samples, .. } => {
                        let var = per_node.iter().map(|g| (g - gain).powi(2)).sum::<f64>() / (samples.max(2) - 1) as f64;
                        (var / samples as f64).sqrt()
                    }
                };
                if gain > best_gain {
                    best_gain = gain;
                    best = BneRow { player: j, type_index: t_j, best_deviation: dev.name(), gain, se };
                }
            }
            rows.push(best);
        }
    }
    let max_gain = rows.iter().map(|r| r.gain).fold(f64::NEG_INFINITY, f64::max);
    let verdict = rows.iter().all(|r| r.gain <= tol + 3.0 * r.se);
    Ok(BneReport { rows, max_gain, verdict, tol })
}

/// Deviations considered for player j: every constant action with and without disclosure, and a mimic.
pub fn deviation_library(plan: &Arc<FolkPlan>, j: usize) -> Vec<Arc<dyn Device>> {
    let game = &plan.game;
    let nt = game.n_types(j);
    let mut lib: Vec<Arc<dyn Device>> = Vec::new();
    for a in 0..game.n_actions(j) {
        let name = &game.action_names(j)[a];
        for disclose_all in [false, true] {
            let label = if disclose_all { format!("disclose+{name}") } else { format!("silent+{name}") };
            lib.push(Arc::new(FixedDevice { label, actions_by_type: vec![a; nt], disclose_all }));
        }
    }
    lib.push(Arc::new(FolkDevice::mimic(plan.clone(), j)));
    lib
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop1Report {
    pub payoffs: PayoffVector,
    pub feasible: bool,
    pub intir: bool,
}

/// Payoffs of a device profile and whether they are feasible and interim individually rational.
pub fn verify_prop1(
    game: &BayesianGame,
    devices: &[Arc<dyn Device>],
    mode: Integration,
    tol: f64,
) -> Result<Prop1Report, DeviceError> {
    let payoffs = device_payoffs(game, devices, mode)?;
    // Integration error bounds the distance to the exact payoff; widen the band accordingly.
    let band = match mode {
        Integration::Exact => tol.max(1e-9),
        Integration::MonteCarlo { samples, .. } => tol.max(5.0 * game.u_bar() / (samples as f64).sqrt()),
    };
    let feasible = check_feasible(game, &payoffs, band)?.verdict;
    let intir = check_intir(game, &payoffs, band)?.verdict;
    Ok(Prop1Report { payoffs, feasible, intir })
}
