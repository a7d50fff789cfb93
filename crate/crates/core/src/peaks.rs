//! Infinite-squeezing model of the protocol output.
//!
//! In this limit the output is a comb of `2^N` position eigenstates at odd
//! multiples of `√π` with real weights `c_m`, mirror-symmetric about the
//! origin. The weights are normalised to `Σ c_m² = 2`, so a single round
//! gives `c = [1, 1]`.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::NelderMead;
use crate::quadrature::gauss_legendre;

/// Largest round count with closed-form weights.
pub const MAX_EXPLICIT_ROUNDS: usize = 4;
/// Largest round count accepted at all (the recursive evaluator).
pub const MAX_ROUNDS: usize = 6;

const PERROR_NODES: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Minimise the shift-error probability.
    ShiftError,
    /// Maximise the effective squeezing `Δ_P`.
    DeltaP,
}

impl Objective {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ShiftError => "shift_error",
            Self::DeltaP => "delta_p",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakDistribution {
    pub n_rounds: usize,
    pub u: Vec<f64>,
    /// All `2^N` weights, most negative position first.
    pub coeffs: Vec<f64>,
    /// Set when the weights came from the recursive evaluator (`N > 4`).
    pub extended: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakFom {
    pub delta_p: f64,
    pub delta_p_db: f64,
    pub p_error: f64,
}

fn check_rounds(n: usize, u: &[f64]) -> Result<()> {
    if n == 0 || n > MAX_ROUNDS {
        return Err(Error::RoundsOutOfRange(n));
    }
    if u.len() != n {
        return Err(Error::StrengthCount {
            expected: n,
            got: u.len(),
        });
    }
    Ok(())
}

fn mirrored(half: Vec<f64>) -> Vec<f64> {
    let mut full = half.clone();
    full.extend(half.into_iter().rev());
    full
}

/// Weights `c_m` for preparation strengths `u` (`u[0]` has no effect).
pub fn coefficients(n: usize, u: &[f64]) -> Result<PeakDistribution> {
    check_rounds(n, u)?;
    let sp = PI.sqrt();
    let t = |k: f64, uk: f64| FRAC_PI_4 + k * sp * uk;
    let half = match n {
        1 => vec![1.0],
        2 => {
            let a = t(2.0, u[1]);
            vec![a.cos(), a.sin()]
        }
        3 => {
            let a = t(4.0, u[1]);
            let b = t(6.0, u[2]);
            let c = t(2.0, u[2]);
            vec![
                a.cos() * b.cos(),
                a.cos() * b.sin(),
                a.sin() * c.cos(),
                a.sin() * c.sin(),
            ]
        }
        4 => {
            let a = t(8.0, u[1]);
            let (b1, b2) = (t(12.0, u[2]), t(4.0, u[2]));
            let d: Vec<f64> = [14.0, 10.0, 6.0, 2.0].iter().map(|&k| t(k, u[3])).collect();
            vec![
                a.cos() * b1.cos() * d[0].cos(),
                a.cos() * b1.cos() * d[0].sin(),
                a.cos() * b1.sin() * d[1].cos(),
                a.cos() * b1.sin() * d[1].sin(),
                a.sin() * b2.cos() * d[2].cos(),
                a.sin() * b2.cos() * d[2].sin(),
                a.sin() * b2.sin() * d[3].cos(),
                a.sin() * b2.sin() * d[3].sin(),
            ]
        }
        _ => {
            return Ok(PeakDistribution {
                n_rounds: n,
                u: u.to_vec(),
                coeffs: coefficients_recursive(n, u)?,
                extended: true,
            })
        }
    };
    Ok(PeakDistribution {
        n_rounds: n,
        u: u.to_vec(),
        coeffs: mirrored(half),
        extended: false,
    })
}

/// Weights from the peak-splitting tree, valid for any `N`.
///
/// Round `k ≥ 2` splits a peak at distance `|x|` from the origin into an
/// outer child weighted by `cos(π/4 + u_k |x|)` and an inner child weighted
/// by `sin(π/4 + u_k |x|)`; the children sit `2^{N-k} √π` to either side.
pub fn coefficients_recursive(n: usize, u: &[f64]) -> Result<Vec<f64>> {
    check_rounds(n, u)?;
    let sp = PI.sqrt();
    // (distance from origin in units of √π, weight), left half, outermost first
    let mut peaks = vec![(2f64.powi(n as i32 - 1), 1.0)];
    for k in 2..=n {
        let step = 2f64.powi((n - k) as i32);
        let mut next = Vec::with_capacity(2 * peaks.len());
        for &(x, w) in &peaks {
            let theta = FRAC_PI_4 + u[k - 1] * x * sp;
            next.push((x + step, w * theta.cos()));
            next.push((x - step, w * theta.sin()));
        }
        peaks = next;
    }
    Ok(mirrored(peaks.into_iter().map(|(_, w)| w).collect()))
}

fn check_coeffs(c: &[f64]) -> Result<()> {
    if c.len() < 2 || !c.len().is_power_of_two() {
        return Err(Error::ModelDomain(format!(
            "expected 2^N weights, got {}",
            c.len()
        )));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::ModelDomain("non-finite weight".into()));
    }
    Ok(())
}

/// `⟨D(√(2π))⟩ = ½ Σ_s c_s c_{s+1}` for weights normalised to `Σ c² = 2`.
pub fn stabilizer_expectation(c: &[f64]) -> Result<f64> {
    check_coeffs(c)?;
    let norm: f64 = c.iter().map(|v| v * v).sum();
    Ok(c.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / norm)
}

/// Linear `Δ_P` of a peak comb.
pub fn delta_p_from_coeffs(c: &[f64]) -> Result<f64> {
    let d = stabilizer_expectation(c)?;
    if d <= 0.0 || d > 1.0 + 1e-12 {
        return Err(Error::ModelDomain(format!(
            "stabilizer expectation {d} outside (0, 1]"
        )));
    }
    Ok(((1.0 / (d * d)).ln() / (2.0 * PI)).max(0.0).sqrt())
}

pub fn to_db(delta: f64) -> f64 {
    -10.0 * (delta * delta).log10()
}

/// Probability that a shift-error measurement finds `|v| > √π/6`.
///
/// For a mirror-symmetric comb the Zak-transform density is
/// `ρ(v) = 2π^{-1/2} |Σ_{s=1}^{M} c_{s+M} cos((2s-1)√π v)|²` with `M = 2^{N-1}`.
/// The cosines are orthogonal over the cell `|v| ≤ √π/2`, where `ρ`
/// integrates to one, so the error is integrated over `√π/6 < |v| ≤ √π/2`
/// directly rather than as a difference from one.
pub fn perror_from_coeffs(c: &[f64]) -> Result<f64> {
    check_coeffs(c)?;
    let m = c.len() / 2;
    let sp = PI.sqrt();
    let norm: f64 = c.iter().map(|v| v * v).sum::<f64>() / 2.0;
    let (nodes, weights) = gauss_legendre(PERROR_NODES, sp / 6.0, sp / 2.0);
    let outside: f64 = nodes
        .iter()
        .zip(&weights)
        .map(|(&v, &w)| {
            let s: f64 = (1..=m)
                .map(|s| c[s + m - 1] * ((2 * s - 1) as f64 * sp * v).cos())
                .sum();
            // both signs of v
            2.0 * w * 2.0 / sp * s * s / norm
        })
        .sum();
    if !(-1e-9..=1.0 + 1e-12).contains(&outside) {
        return Err(Error::ModelDomain(format!(
            "shift error {outside} outside [0, 1]"
        )));
    }
    Ok(outside.clamp(0.0, 1.0))
}

pub fn fom(c: &[f64]) -> Result<PeakFom> {
    let delta_p = delta_p_from_coeffs(c)?;
    Ok(PeakFom {
        delta_p,
        delta_p_db: to_db(delta_p),
        p_error: perror_from_coeffs(c)?,
    })
}

/// Strengths printed alongside the optimisations, used as seeds.
pub fn tabulated_u(n: usize, objective: Objective) -> Option<Vec<f64>> {
    let v: &[f64] = match (objective, n) {
        (_, 1) => &[0.0],
        (Objective::ShiftError, 2) => &[0.0, 0.045],
        (Objective::ShiftError, 3) => &[0.0, 0.053, 0.033],
        (Objective::ShiftError, 4) => &[0.0, 0.038, 0.027, 0.015],
        (Objective::DeltaP, 2) => &[0.0, 0.093],
        (Objective::DeltaP, 3) => &[0.0, 0.040, 0.026],
        (Objective::DeltaP, 4) => &[0.0, 0.024, 0.015, 0.008],
        _ => return None,
    };
    Some(v.to_vec())
}

fn score(objective: Objective, c: &[f64]) -> f64 {
    match objective {
        Objective::ShiftError => match perror_from_coeffs(c) {
            Ok(p) => p.max(1e-300).ln(),
            Err(_) => f64::INFINITY,
        },
        Objective::DeltaP => match delta_p_from_coeffs(c) {
            Ok(d) => -to_db(d),
            Err(_) => f64::INFINITY,
        },
    }
}

/// Optimises `u_2..u_N` for the chosen figure of merit (`u_1 = 0`).
pub fn optimize_u(n: usize, objective: Objective) -> Result<(Vec<f64>, PeakFom)> {
    if n == 0 || n > MAX_ROUNDS {
        return Err(Error::RoundsOutOfRange(n));
    }
    if n == 1 {
        let c = coefficients(1, &[0.0])?.coeffs;
        return Ok((vec![0.0], fom(&c)?));
    }
    let f = |x: &[f64]| {
        let mut u = vec![0.0];
        u.extend_from_slice(x);
        coefficients(n, &u).map_or(f64::INFINITY, |d| score(objective, &d.coeffs))
    };
    let mut starts = vec![vec![0.0; n - 1]];
    for obj in [Objective::ShiftError, Objective::DeltaP] {
        if let Some(t) = tabulated_u(n, obj) {
            starts.push(t[1..].to_vec());
        }
    }
    if n > MAX_EXPLICIT_ROUNDS {
        // halve the strengths round by round, like the tabulated optima
        starts.push((1..n).map(|k| 0.04 / 2f64.powi(k as i32 - 1) * 4.0 / n as f64).collect());
    }
    let best = NelderMead::default().minimize_multistart(f, &starts)?;
    let mut u = vec![0.0];
    u.extend(best.point);
    let c = coefficients(n, &u)?.coeffs;
    Ok((u, fom(&c)?))
}

fn from_angles(theta: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(theta.len() + 1);
    let mut s = 1.0;
    for t in theta {
        h.push(s * t.cos());
        s *= t.sin();
    }
    h.push(s);
    h
}

fn to_angles(h: &[f64]) -> Vec<f64> {
    (0..h.len() - 1)
        .map(|k| {
            let rest: f64 = h[k + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            rest.atan2(h[k])
        })
        .collect()
}

/// Optimises the comb weights directly (mirror-symmetric, `Σ c² = 2`).
pub fn optimal_distribution(n: usize, objective: Objective) -> Result<(Vec<f64>, PeakFom)> {
    if n == 0 || n > MAX_ROUNDS {
        return Err(Error::RoundsOutOfRange(n));
    }
    let m = 1usize << (n - 1);
    if m == 1 {
        let c = vec![1.0, 1.0];
        return Ok((c.clone(), fom(&c)?));
    }
    let f = |x: &[f64]| score(objective, &mirrored(from_angles(x)));
    let mut starts = vec![to_angles(&vec![1.0; m])];
    for obj in [Objective::ShiftError, Objective::DeltaP] {
        if let Ok((u, _)) = optimize_u(n, obj) {
            let c = coefficients(n, &u)?.coeffs;
            starts.push(to_angles(&c[..m]));
        }
    }
    let gauss: Vec<f64> = (0..m)
        .map(|i| {
            let x = (m - i) as f64 - 0.5;
            (-(x * x) / (0.4 * (m * m) as f64)).exp()
        })
        .collect();
    starts.push(to_angles(&gauss));
    let nm = NelderMead {
        max_evals: 4000,
        ..Default::default()
    };
    let best = nm.minimize_multistart(f, &starts)?;
    let h = from_angles(&best.point);
    let c = mirrored(h);
    Ok((c.clone(), fom(&c)?))
}
