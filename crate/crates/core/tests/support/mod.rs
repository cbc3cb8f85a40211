//! Independent oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use condis_core::game::{BayesianGame, CorrelatedPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn names(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i}")).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability vector with every entry at least `floor / n`.
pub fn simplex_point(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|p| *p = floor / n as f64 + (1.0 - floor) * *p / s);
    let drift = 1.0 - v.iter().sum::<f64>();
    v[0] += drift;
    v
}

/// Random 2-player game with payoffs in [0, 1] and a full-support prior.
pub fn random_game(rng: &mut ChaCha8Rng, types: [usize; 2], actions: [usize; 2]) -> BayesianGame {
    let prior = simplex_point(rng, types[0] * types[1], 0.2);
    let n = types[0] * types[1] * actions[0] * actions[1] * 2;
    let table: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    BayesianGame::from_table(
        vec![names("t", types[0]), names("s", types[1])],
        vec![names("a", actions[0]), names("b", actions[1])],
        prior,
        table,
    )
    .unwrap()
}

pub fn random_policy(rng: &mut ChaCha8Rng, game: &BayesianGame) -> CorrelatedPolicy {
    let na = game.action_space().len();
    let rows = (0..game.type_space().len()).map(|_| simplex_point(rng, na, 0.0)).collect();
    CorrelatedPolicy::full(game, rows).unwrap()
}

/// Direct two-player computation of the interim payoff of (j, t_j) reporting s_j.
pub fn oracle_interim(game: &BayesianGame, mu: &CorrelatedPolicy, j: usize, t_j: usize, s_j: usize) -> f64 {
    let k = [game.n_types(0), game.n_types(1)];
    let na = game.action_space().len();
    let idx = |t0: usize, t1: usize| t0 * k[1] + t1;
    let mut num = 0.0;
    let mut den = 0.0;
    for o in 0..k[1 - j] {
        let (t, s) = if j == 0 { (idx(t_j, o), idx(s_j, o)) } else { (idx(o, t_j), idx(o, s_j)) };
        let q = game.prior(t);
        den += q;
        let mut v = 0.0;
        for a in 0..na {
            v += mu.row(s)[a] * game.u(t, a, j);
        }
        num += q * v;
    }
    num / den
}

pub fn oracle_payoffs(game: &BayesianGame, mu: &CorrelatedPolicy) -> Vec<Vec<f64>> {
    (0..2).map(|j| (0..game.n_types(j)).map(|t| oracle_interim(game, mu, j, t, t)).collect()).collect()
}

/// Feasibility verdict from Frank-Wolfe projection onto the set of achievable payoff vectors.
///
/// Returns Some(false) with an exact separating direction, Some(true) when the projection
/// distance falls below 1e-7, and None when neither is reached.
pub fn oracle_feasible(game: &BayesianGame, x: &[Vec<f64>]) -> Option<bool> {
    let k = [game.n_types(0), game.n_types(1)];
    let d = k[0] + k[1];
    let coord = |j: usize, t_j: usize| if j == 0 { t_j } else { k[0] + t_j };
    let na = game.action_space().len();
    let nt = k[0] * k[1];
    // vertex[t][a] in R^d, prior weights folded in.
    let mut vertex = vec![vec![vec![0.0; d]; na]; nt];
    for t in 0..nt {
        let tt = [t / k[1], t % k[1]];
        for a in 0..na {
            for j in 0..2 {
                let m: f64 = (0..nt).filter(|&s| [s / k[1], s % k[1]][j] == tt[j]).map(|s| game.prior(s)).sum();
                vertex[t][a][coord(j, tt[j])] = game.prior(t) / m * game.u(t, a, j);
            }
        }
    }
    let target: Vec<f64> = (0..d).map(|c| if c < k[0] { x[0][c] } else { x[1][c - k[0]] }).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let support = |lam: &[f64]| -> (f64, Vec<f64>) {
        let mut val = 0.0;
        let mut pt = vec![0.0; d];
        for vt in &vertex {
            let best = vt.iter().max_by(|a, b| dot(lam, a).total_cmp(&dot(lam, b))).unwrap();
            val += dot(lam, best);
            pt.iter_mut().zip(best).for_each(|(p, b)| *p += b);
        }
        (val, pt)
    };
    let mut y = vec![0.0; d];
    for vt in &vertex {
        y.iter_mut().zip(&vt[0]).for_each(|(p, b)| *p += b);
    }
    for _ in 0..200_000 {
        let lam: Vec<f64> = target.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dist = dot(&lam, &lam).sqrt();
        if dist < 1e-7 {
            return Some(true);
        }
        let (h, s) = support(&lam);
        if dot(&lam, &target) - h > 1e-6 * dist {
            return Some(false);
        }
        let dir: Vec<f64> = s.iter().zip(&y).map(|(a, b)| a - b).collect();
        let dd = dot(&dir, &dir);
        if dd == 0.0 {
            return None;
        }
        let gamma = (dot(&lam, &dir) / dd).clamp(0.0, 1.0);
        y.iter_mut().zip(&dir).for_each(|(p, v)| *p += gamma * v);
    }
    None
}

fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for c in col..n {
                        m[row][c] -= f * m[col][c];
                    }
                    r[row] -= f * r[col];
                }
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Exact minimax excess min_tau max_{t_j, a_j} (payoff - x_j(t_j)) by vertex enumeration.
pub fn oracle_minimax(game: &BayesianGame, j: usize, x: &[f64]) -> f64 {
    let o = 1 - j;
    let (kt, kb) = (game.n_types(o), game.n_actions(o));
    let nvar = kt * kb + 1; // tau(b | r) then v
    let k = [game.n_types(0), game.n_types(1)];
    let tidx = |tj: usize, r: usize| if j == 0 { tj * k[1] + r } else { r * k[1] + tj };
    let na1 = game.n_actions(1);
    let aidx = |aj: usize, b: usize| if j == 0 { aj * na1 + b } else { b * na1 + aj };
    // Inequalities g·z <= h.
    let mut ineq: Vec<(Vec<f64>, f64)> = Vec::new();
    for c in 0..kt * kb {
        let mut g = vec![0.0; nvar];
        g[c] = -1.0;
        ineq.push((g, 0.0));
    }
    for tj in 0..game.n_types(j) {
        let m: f64 = (0..kt).map(|r| game.prior(tidx(tj, r))).sum();
        for aj in 0..game.n_actions(j) {
            let mut g = vec![0.0; nvar];
            for r in 0..kt {
                let t = tidx(tj, r);
                for b in 0..kb {
                    g[r * kb + b] = game.prior(t) / m * game.u(t, aidx(aj, b), j);
                }
            }
            g[nvar - 1] = -1.0;
            ineq.push((g, x[tj]));
        }
    }
    let eqs: Vec<(Vec<f64>, f64)> = (0..kt)
        .map(|r| {
            let mut g = vec![0.0; nvar];
            (0..kb).for_each(|b| g[r * kb + b] = 1.0);
            (g, 1.0)
        })
        .collect();
    let mut best = f64::INFINITY;
    for_each_combination(ineq.len(), nvar - kt, |combo| {
        let mut m: Vec<Vec<f64>> = eqs.iter().map(|e| e.0.clone()).collect();
        let mut r: Vec<f64> = eqs.iter().map(|e| e.1).collect();
        for &c in combo {
            m.push(ineq[c].0.clone());
            r.push(ineq[c].1);
        }
        if let Some(z) = solve_square(m, r) {
            let ok = ineq.iter().all(|(g, h)| g.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() <= h + 1e-9);
            if ok {
                best = best.min(z[nvar - 1]);
            }
        }
    });
    best
}

/// Grid upper bound on the minimax excess: punishments restricted to multiples of 1/steps.
pub fn grid_minimax(game: &BayesianGame, j: usize, x: &[f64], steps: usize) -> f64 {
    let o = 1 - j;
    let (kt, kb) = (game.n_types(o), game.n_actions(o));
    let k = [game.n_types(0), game.n_types(1)];
    let tidx = |tj: usize, r: usize| if j == 0 { tj * k[1] + r } else { r * k[1] + tj };
    let na1 = game.n_actions(1);
    let aidx = |aj: usize, b: usize| if j == 0 { aj * na1 + b } else { b * na1 + aj };
    let mut points: Vec<Vec<f64>> = Vec::new();
    compositions(steps, kb, &mut vec![], &mut points);
    let rows = game.n_types(j) * game.n_actions(j);
    // contrib[r][p][row]
    let contrib: Vec<Vec<Vec<f64>>> = (0..kt)
        .map(|r| {
            points
                .iter()
                .map(|p| {
                    let mut v = Vec::with_capacity(rows);
                    for tj in 0..game.n_types(j) {
                        let m: f64 = (0..kt).map(|s| game.prior(tidx(tj, s))).sum();
                        let t = tidx(tj, r);
                        for aj in 0..game.n_actions(j) {
                            let e: f64 = (0..kb).map(|b| p[b] * game.u(t, aidx(aj, b), j)).sum();
                            v.push(game.prior(t) / m * e);
                        }
                    }
                    v
                })
                .collect()
        })
        .collect();
    let offsets: Vec<f64> =
        (0..game.n_types(j)).flat_map(|tj| std::iter::repeat(x[tj]).take(game.n_actions(j))).collect();
    let mut best = f64::INFINITY;
    let mut choice = vec![0usize; kt];
    loop {
        let mut worst = f64::NEG_INFINITY;
        for row in 0..rows {
            let s: f64 = (0..kt).map(|r| contrib[r][choice[r]][row]).sum::<f64>() - offsets[row];
            worst = worst.max(s);
        }
        best = best.min(worst);
        let mut i = 0;
        loop {
            if i == kt {
                return best;
            }
            choice[i] += 1;
            if choice[i] < points.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
        }
    }
}

fn compositions(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
    if parts == 1 {
        let mut p: Vec<f64> = prefix.iter().map(|&v| v as f64 / (prefix.iter().sum::<usize>() + total) as f64).collect();
        let n = (prefix.iter().sum::<usize>() + total) as f64;
        p.push(total as f64 / n);
        out.push(p);
        return;
    }
    for k in 0..=total {
        prefix.push(k);
        compositions(total - k, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Exact efficiency verdict for two players from the convex hull of pure payoff points.
pub fn oracle_efficient(points: &[(f64, f64)], x: (f64, f64), tol: f64) -> bool {
    let max_first = |pts: &[(f64, f64)], c: f64| -> f64 {
        let mut best = f64::NEG_INFINITY;
        for &p in pts {
            if p.1 >= c {
                best = best.max(p.0);
            }
        }
        for (i, &p) in pts.iter().enumerate() {
            for &q in &pts[i + 1..] {
                if (p.1 - c) * (q.1 - c) < 0.0 {
                    let s = (c - p.1) / (q.1 - p.1);
                    best = best.max(p.0 + s * (q.0 - p.0));
                }
            }
        }
        best
    };
    let swapped: Vec<(f64, f64)> = points.iter().map(|&(a, b)| (b, a)).collect();
    let dominated = max_first(points, x.1) > x.0 + tol || max_first(&swapped, x.0) > x.1 + tol;
    !dominated
}

/// Grid search over distributions on joint actions for a dominating point.
pub fn grid_dominates(points: &[(f64, f64)], x: (f64, f64), steps: usize, margin: f64) -> bool {
    let mut dists = Vec::new();
    compositions(steps, points.len(), &mut vec![], &mut dists);
    dists.iter().any(|d| {
        let y0: f64 = d.iter().zip(points).map(|(p, q)| p * q.0).sum();
        let y1: f64 = d.iter().zip(points).map(|(p, q)| p * q.1).sum();
        y0 >= x.0 && y1 >= x.1 && (y0 - x.0) + (y1 - x.1) > margin
    })
}

/// Outcome of one randomized solver-versus-oracle case.
#[derive(Debug, Default, Clone)]
pub struct OracleCase {
    pub feasible: bool,
    pub intir: bool,
    pub ic: bool,
    pub efficient: bool,
    /// Oracle verdicts (feasible, intir, ic, efficient).
    pub expected: [bool; 4],
    pub detail: String,
}

impl OracleCase {
    pub fn all(&self) -> bool {
        self.feasible && self.intir && self.ic && self.efficient
    }
}

/// Builds a random game and compares the four solver verdicts against the oracles.
///
/// Instances whose oracle verdict is not certified (boundary cases) are redrawn.
pub fn solver_oracle_case(seed: u64) -> OracleCase {
    use condis_core::game::PayoffVector;
    use condis_core::solvers::{check_efficient, check_feasible, check_ic, check_intir, DEFAULT_TOL};

    let mut r = rng(seed);
    let types = [r.random_range(1..=3), r.random_range(1..=3)];
    let actions = [r.random_range(1..=3), r.random_range(1..=3)];
    let game = random_game(&mut r, types, actions);
    let mut case = OracleCase::default();
    let pv = |v: &Vec<Vec<f64>>| PayoffVector::new(v.clone());

    // Feasibility.
    loop {
        let mu = random_policy(&mut r, &game);
        let mut x = oracle_payoffs(&game, &mu);
        if r.random_bool(0.5) {
            x.iter_mut().flatten().for_each(|v| *v += r.random_range(-0.1..0.1));
        }
        let Some(expected) = oracle_feasible(&game, &x) else { continue };
        let got = check_feasible(&game, &pv(&x), DEFAULT_TOL).unwrap().verdict;
        case.expected[0] = expected;
        case.feasible = got == expected;
        if !case.feasible {
            case.detail += &format!("feasible: solver {got} oracle {expected}; ");
        }
        break;
    }

    // Interim individual rationality.
    loop {
        let mu = random_policy(&mut r, &game);
        let mut x = oracle_payoffs(&game, &mu);
        x.iter_mut().flatten().for_each(|v| *v += r.random_range(-0.15..0.15));
        let values: Vec<f64> = (0..2).map(|j| oracle_minimax(&game, j, &x[j])).collect();
        if values.iter().any(|v| v.abs() < 1e-7) {
            continue;
        }
        let grid_ok = (0..2).all(|j| grid_minimax(&game, j, &x[j], 12) >= values[j] - 1e-9);
        let expected = values.iter().all(|v| *v <= DEFAULT_TOL);
        let got = check_intir(&game, &pv(&x), DEFAULT_TOL).unwrap().verdict;
        case.expected[1] = expected;
        case.intir = got == expected && grid_ok;
        if !case.intir {
            case.detail += &format!("intir: solver {got} oracle {expected} values {values:?} grid_ok {grid_ok}; ");
        }
        break;
    }

    // Incentive compatibility.
    {
        let mu = if r.random_bool(0.5) {
            random_policy(&mut r, &game)
        } else {
            let row = simplex_point(&mut r, game.action_space().len(), 0.0);
            condis_core::game::CorrelatedPolicy::full(&game, vec![row; game.type_space().len()]).unwrap()
        };
        let x = oracle_payoffs(&game, &mu);
        let mut expected = true;
        for j in 0..2 {
            for t in 0..game.n_types(j) {
                for s in 0..game.n_types(j) {
                    if s != t && oracle_interim(&game, &mu, j, t, s) - x[j][t] > DEFAULT_TOL {
                        expected = false;
                    }
                }
            }
        }
        let got = check_ic(&game, &mu, &pv(&x), DEFAULT_TOL).unwrap().verdict;
        case.expected[2] = expected;
        case.ic = got == expected;
        if !case.ic {
            case.detail += &format!("ic: solver {got} oracle {expected}; ");
        }
    }

    // Efficiency at a random type profile.
    {
        let t = r.random_range(0..game.type_space().len());
        let na = game.action_space().len();
        let points: Vec<(f64, f64)> = (0..na).map(|a| (game.u(t, a, 0), game.u(t, a, 1))).collect();
        let x = match r.random_range(0..3) {
            0 => points[r.random_range(0..na)],
            1 => {
                let d = simplex_point(&mut r, na, 0.0);
                (d.iter().zip(&points).map(|(p, q)| p * q.0).sum(), d.iter().zip(&points).map(|(p, q)| p * q.1).sum())
            }
            _ => {
                let w: f64 = r.random_range(0.05..0.95);
                *points.iter().max_by(|a, b| (w * a.0 + (1.0 - w) * a.1).total_cmp(&(w * b.0 + (1.0 - w) * b.1))).unwrap()
            }
        };
        let expected = oracle_efficient(&points, x, DEFAULT_TOL);
        let got = check_efficient(&game, t, &[x.0, x.1], DEFAULT_TOL).unwrap().verdict;
        let mut ok = got == expected;
        if na == 4 && !expected && grid_dominates(&points, x, 100, 0.05) {
            // A clear dominator must also be visible on the 0.01 grid.
            ok &= !got;
        }
        case.expected[3] = expected;
        case.efficient = ok;
        if !ok {
            case.detail += &format!("efficient: solver {got} oracle {expected}; ");
        }
    }
    case
}
