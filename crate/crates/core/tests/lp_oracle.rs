//! Simplex results against brute-force vertex enumeration on small bounded programs.

use condis_core::lp::{lp_solve, LinearProgram, LpStatus, Relation, Sense};
use proptest::prelude::*;

const BOX: f64 = 10.0;

/// Halfspaces a·x <= b describing the program, box bounds included.
fn halfspaces(a: &[Vec<f64>], rel: &[bool], b: &[f64], n: usize) -> Vec<(Vec<f64>, f64)> {
    let mut hs = Vec::new();
    for ((row, &le), &rhs) in a.iter().zip(rel).zip(b) {
        if le {
            hs.push((row.clone(), rhs));
        } else {
            hs.push((row.iter().map(|v| -v).collect(), -rhs));
        }
    }
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = -1.0;
        hs.push((e.clone(), 0.0));
        e[i] = 1.0;
        hs.push((e, BOX));
    }
    hs
}

fn solve_square(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-9 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for k in col..n {
                    m[row][k] -= f * m[col][k];
                }
                r[row] -= f * r[col];
            }
        }
    }
    Some((0..n).map(|i| r[i] / m[i][i]).collect())
}

fn combinations(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 && idx[0] == n - k {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Best objective over all feasible vertices, or None when there is none.
fn vertex_oracle(c: &[f64], hs: &[(Vec<f64>, f64)], n: usize) -> Option<f64> {
    let mut best: Option<f64> = None;
    for combo in combinations(n, hs.len()) {
        let m: Vec<Vec<f64>> = combo.iter().map(|&i| hs[i].0.clone()).collect();
        let r: Vec<f64> = combo.iter().map(|&i| hs[i].1).collect();
        if let Some(x) = solve_square(m, r) {
            let feasible = hs.iter().all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7);
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                best = Some(best.map_or(v, |bv: f64| bv.max(v)));
            }
        }
    }
    best
}

fn program() -> impl Strategy<Value = (usize, Vec<f64>, Vec<Vec<f64>>, Vec<bool>, Vec<f64>)> {
    (1usize..=5, 1usize..=5).prop_flat_map(|(n, m)| {
        (
            Just(n),
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(prop::collection::vec(-4.0f64..4.0, n), m),
            prop::collection::vec(prop::bool::weighted(0.7), m),
            prop::collection::vec(-3.0f64..8.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_vertex_enumeration((n, c, a, rel, b) in program()) {
        let mut lp = LinearProgram::new(Sense::Maximize);
        for &ci in &c {
            lp.add_var(0.0, BOX, ci);
        }
        for ((row, &le), &rhs) in a.iter().zip(&rel).zip(&b) {
            let coeffs = row.iter().enumerate().map(|(k, &v)| (k, v)).collect();
            lp.add_constraint(coeffs, if le { Relation::Le } else { Relation::Ge }, rhs);
        }
        let sol = lp_solve(&lp).unwrap();
        let oracle = vertex_oracle(&c, &halfspaces(&a, &rel, &b, n), n);
        match oracle {
            None => prop_assert_eq!(sol.status, LpStatus::Infeasible),
            Some(v) => {
                prop_assert_eq!(sol.status, LpStatus::Optimal);
                prop_assert!((sol.objective - v).abs() < 1e-6, "simplex {} oracle {}", sol.objective, v);
                prop_assert!(lp.max_violation(&sol.x) < 1e-7);
            }
        }
    }
}

#[test]
fn combination_count() {
    assert_eq!(combinations(2, 4).len(), 6);
    assert_eq!(combinations(3, 3).len(), 1);
}
