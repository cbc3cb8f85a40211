mod support;

use std::sync::Arc;

use condis_core::canonical::war::{build_war_game, WarParams};
use condis_core::devices::{
    build_folk_devices, deviation_library, device_payoffs, evaluate_commitment_game, evaluate_in_order, verify_bne,
    verify_prop1, Device, DeviceError, Fingerprint, FixedDevice, FolkDevice, Integration, TypeLedger,
};
use condis_core::game::{induced_payoffs, BayesianGame, CorrelatedPolicy};
use condis_core::solvers::check_intir;
use support::{names, random_game, random_policy, rng};

fn pd() -> BayesianGame {
    let u = [[(3.0, 3.0), (0.0, 4.0)], [(4.0, 0.0), (1.0, 1.0)]];
    BayesianGame::from_fn(vec![names("t", 1), names("s", 1)], vec![names("a", 2), names("b", 2)], vec![1.0], |_, a, o| {
        o[0] = u[a[0]][a[1]].0;
        o[1] = u[a[0]][a[1]].1;
    })
    .unwrap()
}

#[test]
fn folk_devices_cooperate_in_the_dilemma() {
    let g = pd();
    let mu = CorrelatedPolicy::deterministic(&g, |_| vec![0, 0]).unwrap();
    let prof = build_folk_devices(&g, &mu, 1e-9).unwrap();
    let out = evaluate_commitment_game(&g, &prof.devices, &[0, 0], 0.3).unwrap();
    assert_eq!(out.actions, vec![0, 0]);
    assert_eq!(out.disclosed, vec![vec![false, true], vec![true, false]]);
    let lib: Vec<_> = (0..2).map(|j| deviation_library(&prof.plan, j)).collect();
    let rep = verify_bne(&g, &prof.devices, &lib, Integration::Exact, 1e-9).unwrap();
    assert!(rep.verdict && rep.max_gain <= 1e-9, "{rep:?}");
    // Defecting against folk devices meets punishment.
    let mut dev = prof.devices.clone();
    dev[0] = Arc::new(FixedDevice { label: "defect".into(), actions_by_type: vec![1], disclose_all: true });
    assert_eq!(evaluate_commitment_game(&g, &dev, &[0, 0], 0.3).unwrap().actions, vec![1, 1]);
}

#[test]
fn folk_theorem_on_random_games() {
    let mut checked = 0;
    let mut seed = 0;
    while checked < 25 {
        seed += 1;
        let mut r = rng(seed);
        let g = random_game(&mut r, [2, 2], [2, 3]);
        let mu = random_policy(&mut r, &g);
        let x = induced_payoffs(&g, &mu).unwrap();
        if !check_intir(&g, &x, 1e-9).unwrap().verdict {
            continue;
        }
        checked += 1;
        let prof = build_folk_devices(&g, &mu, 1e-9).unwrap();
        let lib: Vec<_> = (0..2).map(|j| deviation_library(&prof.plan, j)).collect();
        let rep = verify_bne(&g, &prof.devices, &lib, Integration::Exact, 1e-9).unwrap();
        assert!(rep.verdict, "seed {seed}: {rep:?}");
        let p1 = verify_prop1(&g, &prof.devices, Integration::Exact, 1e-9).unwrap();
        assert!(p1.feasible && p1.intir);
        assert!(p1.payoffs.max_abs_diff(&x) < 1e-12);
    }
}

#[test]
fn punishers_play_inside_the_punishment_support() {
    let (g, prof) = (77..)
        .find_map(|seed| {
            let mut r = rng(seed);
            let g = random_game(&mut r, [2, 2], [3, 3]);
            let mu = CorrelatedPolicy::full_from_fn(&g, |_| vec![1.0 / 9.0; 9]).unwrap();
            build_folk_devices(&g, &mu, 1e-9).ok().map(|p| (g, p))
        })
        .unwrap();
    for j in 0..2 {
        let tau = &prof.plan.punishments()[j];
        for a in 0..3 {
            let mut dev = prof.devices.clone();
            dev[j] = Arc::new(FixedDevice { label: "x".into(), actions_by_type: vec![a, a], disclose_all: a % 2 == 0 });
            for t in 0..4 {
                let digits = g.type_space().decode(t);
                for k in 0..20 {
                    let c = k as f64 / 20.0 + 0.01;
                    let out = evaluate_commitment_game(&g, &dev, &digits, c).unwrap();
                    let other = 1 - j;
                    let row = tau.row(digits[other]);
                    assert!(row[out.actions[other]] > 0.0);
                }
            }
        }
    }
}

#[test]
fn evaluation_order_does_not_matter() {
    let (g, prof) = (5..)
        .find_map(|seed| {
            let mut r = rng(seed);
            let g = random_game(&mut r, [2, 3], [2, 2]);
            let mu = random_policy(&mut r, &g);
            build_folk_devices(&g, &mu, 1e-9).ok().map(|p| (g, p))
        })
        .unwrap();
    for t in 0..6 {
        let d = g.type_space().decode(t);
        let a = evaluate_in_order(&g, &prof.devices, &d, 0.41, &[0, 1]).unwrap();
        let b = evaluate_in_order(&g, &prof.devices, &d, 0.41, &[1, 0]).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn fingerprints_identify_behavior() {
    let g = pd();
    let mu = CorrelatedPolicy::deterministic(&g, |_| vec![0, 0]).unwrap();
    let prof = build_folk_devices(&g, &mu, 1e-9).unwrap();
    let again = build_folk_devices(&g, &mu, 1e-9).unwrap();
    assert_eq!(prof.devices[0].fingerprint(), again.devices[0].fingerprint());
    assert_ne!(prof.devices[0].fingerprint(), prof.devices[1].fingerprint());
    assert_ne!(prof.devices[0].fingerprint(), FolkDevice::mimic(prof.plan.clone(), 0).fingerprint());
    assert_eq!(prof.devices[0].fingerprint().hex().len(), 64);
}

struct Snoop;

impl Device for Snoop {
    fn name(&self) -> String {
        "snoop".into()
    }
    fn fingerprint(&self) -> Fingerprint {
        Fingerprint::of(&serde_json::json!("snoop"))
    }
    fn disclose(&self, _me: usize, _t: usize, f: &[Fingerprint]) -> Vec<bool> {
        vec![false; f.len()]
    }
    fn respond(&self, me: usize, _f: &[Fingerprint], ledger: &TypeLedger, _c: f64) -> Result<usize, DeviceError> {
        ledger.get(1 - me)
    }
}

#[test]
fn reading_an_undisclosed_type_is_an_error() {
    let g = pd();
    let dev: Vec<Arc<dyn Device>> = vec![Arc::new(Snoop), Arc::new(Snoop)];
    let err = evaluate_commitment_game(&g, &dev, &[0, 0], 0.5);
    assert!(matches!(err, Err(DeviceError::InformationViolation { reader: 0, player: 1 })));
}

#[test]
fn single_player_plays_the_target() {
    let g = BayesianGame::from_fn(vec![names("t", 2)], vec![names("a", 3)], vec![0.4, 0.6], |t, a, o| {
        o[0] = if a[0] == t[0] { 1.0 } else { 0.0 };
    })
    .unwrap();
    let mu = CorrelatedPolicy::deterministic(&g, |t| vec![t[0]]).unwrap();
    let prof = build_folk_devices(&g, &mu, 1e-9).unwrap();
    for t in 0..2 {
        assert_eq!(evaluate_commitment_game(&g, &prof.devices, &[t], 0.9).unwrap().actions, vec![t]);
    }
}

#[test]
fn war_target_is_supported_by_folk_devices() {
    let war = build_war_game(&WarParams::default(), true).unwrap();
    let g = &war.game;
    let mu = war.target_policy().unwrap();
    let prof = build_folk_devices(g, &mu, 1e-9).unwrap();
    let lib: Vec<_> = (0..2).map(|j| deviation_library(&prof.plan, j)).collect();
    let rep = verify_bne(g, &prof.devices, &lib, Integration::Exact, 1e-9).unwrap();
    assert!(rep.verdict && rep.max_gain <= 1e-9, "{:?}", rep.max_gain);
    let pay = device_payoffs(g, &prof.devices, Integration::Exact).unwrap();
    assert!((pay.get(0, 0) - 0.68).abs() < 1e-12);
}
