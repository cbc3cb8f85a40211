//! The mountain game: player 2's warriors sit at (θx, θy) ~ Unif[0,1]^2 and only player 2
//! knows where. Player 1 offers a split s; if player 2 rejects, player 1 drops paratroopers
//! at (tx, ty) with
//!   u1 = 1 - 2 min(θ) - (tx - θx)^2 - (ty - θy)^2 - c1,
//!   u2 = min(tx, ty) + min(θ) - c2.
//! Types with min(θ) above a threshold disclose; the rest are pooled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MountainError {
    #[error("invalid mountain parameters: {0}")]
    Invalid(String),
    #[error("pooled rejection region is empty at s = {s} (r+ = {r_plus}, t* = {t_star})")]
    EmptyRegion { s: f64, r_plus: f64, t_star: f64 },
}

/// (3 - √5) / 2, the fixed point of g = (g - 1)^2.
pub fn golden_gap() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MountainParams {
    pub c1: f64,
    pub c2: f64,
    /// Points of the offer grid on [0, 1].
    pub s_grid: usize,
    /// Accepted Monte Carlo samples per region check.
    pub samples: usize,
    pub seed: u64,
    /// Points per axis of the type grid used for the disclosure and Pareto clauses.
    pub type_grid: usize,
}

impl Default for MountainParams {
    fn default() -> Self {
        MountainParams { c1: 0.1, c2: 0.1, s_grid: 201, samples: 1_000_000, seed: 2024, type_grid: 201 }
    }
}

impl MountainParams {
    pub fn validate(&self) -> Result<(), MountainError> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(MountainError::Invalid("costs must be positive".into()));
        }
        if self.s_grid < 101 || self.type_grid < 101 {
            return Err(MountainError::Invalid("grids need at least 101 points".into()));
        }
        if self.samples < 2 {
            return Err(MountainError::Invalid("need at least two samples".into()));
        }
        Ok(())
    }

    pub fn forms(&self) -> MountainForms {
        MountainForms { c1: self.c1, c2: self.c2 }
    }
}

/// Closed-form evaluators for the pooled-type analysis.
#[derive(Clone, Copy, Debug)]
pub struct MountainForms {
    pub c1: f64,
    pub c2: f64,
}

impl MountainForms {
    /// Offer above which the paratrooper point sits at the golden gap.
    pub fn switch_point(&self) -> f64 {
        self.c2 - golden_gap() + 1.0
    }

    pub fn t_star(&self, s: f64) -> f64 {
        if s > self.switch_point() {
            golden_gap()
        } else {
            self.t_star_lower(s)
        }
    }

    /// The second branch of t*, also evaluated past the switch point for continuity checks.
    pub fn t_star_lower(&self, s: f64) -> f64 {
        (3.0 - 5f64.sqrt()) * (self.c2 - s - 1.0) / 2.0 + 1.0
    }

    /// Largest min(θ) that accepts s.
    pub fn r(&self, s: f64) -> f64 {
        1.0 - s - self.t_star(s) + self.c2
    }

    pub fn r_plus(&self, s: f64) -> f64 {
        self.r(s).max(0.0)
    }

    /// Mass of {min(θ) in (a, b]} under the uniform prior.
    pub fn band_mass(a: f64, b: f64) -> f64 {
        (b - a) * (2.0 - b - a)
    }

    /// Probability that a pooled type accepts s.
    pub fn p(&self, s: f64) -> f64 {
        let (r, t) = (self.r(s), self.t_star(s));
        if r >= t {
            return 1.0;
        }
        let rp = r.max(0.0);
        rp * (2.0 - rp) / (t * (2.0 - t))
    }

    /// E[θx^2] over the pooled rejecting region.
    pub fn m1(&self, s: f64) -> f64 {
        let (rp, t) = (self.r_plus(s), self.t_star(s));
        let f = |x: f64| x.powi(4) - x.powi(3) - x;
        (f(rp) - f(t)) / (3.0 * Self::band_mass(rp, t))
    }

    /// E[min(θ)] over the pooled rejecting region.
    pub fn m2(&self, s: f64) -> f64 {
        let (rp, t) = (self.r_plus(s), self.t_star(s));
        (t * t - rp * rp - 2.0 / 3.0 * (t.powi(3) - rp.powi(3))) / Self::band_mass(rp, t)
    }

    /// Posterior mean of θx (and θy) over the pooled rejecting region.
    pub fn posterior_mean(&self, s: f64) -> f64 {
        let (rp, t) = (self.r_plus(s), self.t_star(s));
        ((1.0 - rp) * (t + rp) + 1.0 - t * t) / (2.0 * (2.0 - t - rp))
    }

    /// Player 1's expected payoff from offering s to the pooled types.
    pub fn objective(&self, s: f64) -> f64 {
        let p = self.p(s);
        if p >= 1.0 {
            return s;
        }
        let t = self.t_star(s);
        s * p + (1.0 - 2.0 * self.m2(s) - 2.0 * (self.m1(s) - t * t) - self.c1) * (1.0 - p)
    }

    /// Offer made to a type that disclosed min(θ) = m.
    pub fn s_disclosed(&self, m: f64) -> f64 {
        1.0 - 2.0 * m + self.c2
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SStar {
    pub s_star: f64,
    pub value: f64,
    /// Smallest grid offer whose objective ties the maximum to 1e-12.
    pub plateau_start: f64,
    /// (s, objective) over the grid.
    pub curve: Vec<(f64, f64)>,
}

/// Grid argmax of the pooled objective; ties go to the largest offer.
pub fn s_star(forms: &MountainForms, grid: usize) -> SStar {
    let curve: Vec<(f64, f64)> =
        (0..grid).map(|k| k as f64 / (grid - 1) as f64).map(|s| (s, forms.objective(s))).collect();
    let (s_star, value) = curve.iter().copied().fold((0.0, f64::NEG_INFINITY), |b, (s, v)| if v >= b.1 { (s, v) } else { b });
    let plateau_start = curve.iter().find(|(_, v)| (v - value).abs() <= 1e-12).map_or(s_star, |c| c.0);
    SStar { s_star, value, plateau_start, curve }
}

#[derive(Clone, Debug, Serialize)]
pub struct StatCheck {
    pub stat: String,
    pub monte_carlo: f64,
    pub closed_form: f64,
    pub se: f64,
    pub tol: f64,
    pub ok: bool,
}

impl StatCheck {
    fn new(stat: &str, monte_carlo: f64, closed_form: f64, se: f64, floor: f64) -> Self {
        let tol = (3.0 * se).max(floor);
        StatCheck { stat: stat.into(), monte_carlo, closed_form, se, tol, ok: (monte_carlo - closed_form).abs() <= tol }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionReport {
    pub s: f64,
    pub r_plus: f64,
    pub t_star: f64,
    pub samples: usize,
    pub checks: Vec<StatCheck>,
    pub verdict: bool,
}

fn mean_var(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (mean, var, m4)
}

/// Rejection-samples the pooled rejecting region {min(θ) in (a, b]} and compares its
/// moments with the closed forms for offer s.
pub fn region_check(forms: &MountainForms, s: f64, samples: usize, seed: u64) -> Result<RegionReport, MountainError> {
    let (rp, t) = (forms.r_plus(s), forms.t_star(s));
    band_check(s, rp, t, forms.m2(s), forms.m1(s) - t * t, samples, seed)
}

/// Moment checks on an explicit band (a, b]: E[min], E[θx], E[θy], Var θx, Var θy.
pub fn band_check(
    s: f64,
    a: f64,
    b: f64,
    mean_min: f64,
    var_closed: f64,
    samples: usize,
    seed: u64,
) -> Result<RegionReport, MountainError> {
    if !(a < b) || samples < 2 {
        return Err(MountainError::EmptyRegion { s, r_plus: a, t_star: b });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mins, mut xs, mut ys) = (Vec::with_capacity(samples), Vec::with_capacity(samples), Vec::with_capacity(samples));
    while mins.len() < samples {
        let (x, y): (f64, f64) = (rng.random(), rng.random());
        let m = x.min(y);
        if m > a && m <= b {
            mins.push(m);
            xs.push(x);
            ys.push(y);
        }
    }
    let n = samples as f64;
    let (e_min, v_min, _) = mean_var(&mins);
    let (e_x, v_x, m4_x) = mean_var(&xs);
    let (e_y, v_y, m4_y) = mean_var(&ys);
    let var_se = |v: f64, m4: f64| ((m4 - v * v).max(0.0) / n).sqrt();
    let pooled_mean = ((1.0 - a) * (b + a) + 1.0 - b * b) / (2.0 * (2.0 - b - a));
    let checks = vec![
        StatCheck::new("E[min]", e_min, mean_min, (v_min / n).sqrt(), 1e-3),
        StatCheck::new("E[theta_x]", e_x, pooled_mean, (v_x / n).sqrt(), 1e-3),
        StatCheck::new("E[theta_y]", e_y, pooled_mean, (v_y / n).sqrt(), 1e-3),
        StatCheck::new("Var[theta_x]", v_x, var_closed, var_se(v_x, m4_x), 1e-3),
        StatCheck::new("Var[theta_y]", v_y, var_closed, var_se(v_y, m4_y), 1e-3),
    ];
    let verdict = checks.iter().all(|c| c.ok);
    Ok(RegionReport { s, r_plus: a, t_star: b, samples, checks, verdict })
}

/// Monte Carlo probability that a pooled type accepts s, against p(s).
pub fn acceptance_check(forms: &MountainForms, s: f64, samples: usize, seed: u64) -> StatCheck {
    let (rp, t) = (forms.r_plus(s), forms.t_star(s));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pooled, mut accepted) = (0usize, 0usize);
    while pooled < samples {
        let m = rng.random::<f64>().min(rng.random::<f64>());
        if m <= t {
            pooled += 1;
            accepted += (m <= rp) as usize;
        }
    }
    let freq = accepted as f64 / samples as f64;
    let p = forms.p(s);
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    let tol = 3.0 * se + 1.0 / samples as f64;
    StatCheck { stat: "P(accept)".into(), monte_carlo: freq, closed_form: p, se, tol, ok: (freq - p).abs() <= tol }
}

#[derive(Clone, Debug, Serialize)]
pub struct Clause {
    pub clause: String,
    pub value: f64,
    pub expected: f64,
    pub ok: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Prop3Report {
    pub params: MountainParams,
    pub golden_gap: f64,
    pub s_star: SStar,
    pub clauses: Vec<Clause>,
    pub region: RegionReport,
    pub verdict: bool,
}

/// Whether a type with min(θ) = m discloses, by comparing its two payoffs.
pub fn discloses(forms: &MountainForms, s_star: f64, m: f64) -> bool {
    let disclose = 2.0 * m - forms.c2;
    let pool = forms.t_star(s_star) + m - forms.c2;
    disclose > pool
}

/// Numerical verification of the pooled equilibrium and the improving non-IC payoff.
pub fn prop3_verify(params: &MountainParams) -> Result<Prop3Report, MountainError> {
    params.validate()?;
    let f = params.forms();
    let g = golden_gap();
    let star = s_star(&f, params.s_grid);
    let step = 1.0 / (params.s_grid - 1) as f64;
    let s = star.s_star;
    let t = f.t_star(s);
    let mut clauses = Vec::new();
    let mut push = |clause: &str, value: f64, expected: f64, ok: bool, detail: String| {
        clauses.push(Clause { clause: clause.into(), value, expected, ok, detail })
    };

    push(
        "i:s_star",
        s,
        1.0,
        (s - 1.0).abs() <= step + 1e-12,
        format!("objective {:.12} flat from s = {:.4}", star.value, star.plateau_start),
    );
    push("ii:r_negative", f.r(s), 0.0, f.r(s) < 0.0 && t > f.c2, format!("t*(s*) = {t:.12} > c2 = {}", f.c2));

    let region = region_check(&f, s, params.samples, params.seed)?;
    let mean_gap = (f.posterior_mean(s) - t).abs();
    let mc_ok = region.checks[1].ok && region.checks[2].ok;
    push("iii:posterior_mean", f.posterior_mean(s), t, mean_gap <= 1e-12 && mc_ok, format!("monte carlo {:.6}", region.checks[1].monte_carlo));

    let n = params.type_grid;
    let axis: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect();
    let mut mismatches = 0usize;
    for &x in &axis {
        for &y in &axis {
            let m = x.min(y);
            if discloses(&f, s, m) != (m > t) {
                mismatches += 1;
            }
        }
    }
    let examples = discloses(&f, s, 0.9) && !discloses(&f, s, 0.2);
    push("iv:threshold", mismatches as f64, 0.0, mismatches == 0 && examples, "disclose iff min > t*(s*)".into());

    // Pooled types in (t* - c1 - c2, t*]: player 2 is indifferent, player 1 must gain.
    let lo = t - f.c1 - f.c2;
    let mut worst = f64::INFINITY;
    let mut in_region = 0usize;
    for &x in &axis {
        for &y in &axis {
            let m = x.min(y);
            if m <= lo || m > t {
                continue;
            }
            in_region += 1;
            let proposed = (1.0 - t - m + f.c2, t + m - f.c2);
            let equilibrium = (1.0 - 2.0 * m - (t - x).powi(2) - (t - y).powi(2) - f.c1, t + m - f.c2);
            let gain1 = proposed.0 - equilibrium.0;
            let gain2 = proposed.1 - equilibrium.1;
            if gain2 < -1e-12 {
                worst = worst.min(gain2);
            }
            worst = worst.min(gain1);
        }
    }
    push(
        "v:pareto",
        worst,
        0.0,
        in_region > 0 && worst > 0.0,
        format!("smallest gain over {in_region} grid types with min in ({lo:.6}, {t:.6}]"),
    );
    let (m, m_report) = (0.2, 0.3);
    let ic_gain = (t + m_report - f.c2) - (t + m - f.c2);
    push("v:not_ic", ic_gain, m_report - m, ic_gain > 0.0, format!("type with min {m} reporting min {m_report}"));
    push("branch_continuity", f.t_star_lower(f.switch_point()), g, (f.t_star_lower(f.switch_point()) - g).abs() <= 1e-12, "g^2 - 3g + 1 = 0".into());

    let verdict = clauses.iter().all(|c| c.ok) && region.verdict;
    Ok(Prop3Report { params: params.clone(), golden_gap: g, s_star: star, clauses, region, verdict })
}
