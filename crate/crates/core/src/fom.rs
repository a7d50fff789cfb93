//! Figures of merit for approximate grid states.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::BosonDensity;
use crate::error::{Error, Result};
use crate::hilbert::{displace, squeezed_vacuum, FockSpace, ZERO};
use crate::optimize::NelderMead;
use crate::protocol::{LatticeKind, LatticeSpec};
use crate::quadrature::{gauss_legendre, hermite_functions};

/// Largest `|⟨D⟩|` accepted as rounding noise above 1.
const UNIT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSqueezing {
    pub delta_x: f64,
    pub delta_p: f64,
    pub delta_x_db: f64,
    pub delta_p_db: f64,
    /// `⟨D⟩` vanished along that direction; the linear `Δ` is then reported
    /// as 0 and the dB value as 0 rather than an infinity.
    pub x_degenerate: bool,
    pub p_degenerate: bool,
}

pub fn delta_to_db(delta: f64) -> f64 {
    -10.0 * (delta * delta).log10()
}

/// `Δ` from a stabiliser expectation `⟨D(γ)⟩` with `|γ| = length`:
/// `Δ² = ln(1/|⟨D⟩|²) / |γ|²`, so that `S(r)|0⟩` gives `Δ = e^{-r}` along `X`.
///
/// Returns `(Δ, degenerate)`.
pub fn stabilizer_delta(expectation: C64, length: f64) -> Result<(f64, bool)> {
    let m = expectation.norm();
    if !m.is_finite() || m > 1.0 + UNIT_SLACK {
        return Err(Error::Unphysical(m));
    }
    if m == 0.0 {
        return Ok((0.0, true));
    }
    let m = m.min(1.0 - f64::EPSILON);
    Ok((((1.0 / (m * m)).ln() / (length * length)).sqrt(), false))
}

fn db_or_zero(delta: f64, degenerate: bool) -> f64 {
    if degenerate {
        0.0
    } else {
        delta_to_db(delta)
    }
}

/// `Δ_X` from `⟨D(α)⟩` and `Δ_P` from `⟨D(β)⟩`.
pub fn effective_squeezing(rho: &BosonDensity, lattice: &LatticeSpec) -> Result<EffectiveSqueezing> {
    let t = rho.trace();
    let ex = rho.expect_with(|v| displace(v, lattice.alpha)) / t;
    let ep = rho.expect_with(|v| displace(v, lattice.beta)) / t;
    let (dx, xd) = stabilizer_delta(ex, lattice.alpha.norm())?;
    let (dp, pd) = stabilizer_delta(ep, lattice.beta.norm())?;
    Ok(EffectiveSqueezing {
        delta_x: dx,
        delta_p: dp,
        delta_x_db: db_or_zero(dx, xd),
        delta_p_db: db_or_zero(dp, pd),
        x_degenerate: xd,
        p_degenerate: pd,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Logical {
    Zero,
    One,
}

/// Finite-energy code state: squeezed peaks `D((n + μ/2) β) S(r)|0⟩`
/// weighted by a Gaussian envelope `exp(-κ² x_n² / 2)` in the peak position.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxGkpParams {
    pub r: f64,
    pub kappa: f64,
    pub logical: Logical,
    pub lattice: LatticeSpec,
    /// Peaks with `|n + μ/2| ≤ envelope_cut` are kept.
    pub envelope_cut: usize,
}

impl ApproxGkpParams {
    /// Chooses the cut where the envelope falls below `1e-8`.
    pub fn new(r: f64, kappa: f64, logical: Logical, lattice: LatticeSpec) -> Self {
        let step = 2f64.sqrt() * lattice.beta.re;
        let reach = if kappa > 0.0 {
            (2.0 * (1e8f64).ln()).sqrt() / kappa / step
        } else {
            f64::INFINITY
        };
        Self {
            r,
            kappa,
            logical,
            lattice,
            envelope_cut: (reach.ceil().min(1e4) as usize).max(1),
        }
    }
}

/// Normalised finite-energy logical state in `space`.
pub fn approx_gkp_state(params: &ApproxGkpParams, space: FockSpace) -> Result<Vec<C64>> {
    if params.envelope_cut == 0 {
        return Err(Error::Degenerate("envelope_cut must be at least 1".into()));
    }
    if !(params.kappa.is_finite() && params.kappa >= 0.0) {
        return Err(Error::Degenerate(format!("kappa = {}", params.kappa)));
    }
    params.lattice.validate()?;
    let beta = params.lattice.beta;
    let step = 2f64.sqrt() * beta.re;
    let weight = |m: f64| (-0.5 * (params.kappa * step * m).powi(2)).exp();
    // Stop before peaks leave the region the truncated space can hold.
    let reach = (2.0 * space.dim() as f64).sqrt();
    let base = squeezed_vacuum(space, params.r);
    let mut acc = vec![ZERO; space.dim()];
    let mut add = |v: &[C64], w: f64| {
        for (a, b) in acc.iter_mut().zip(v) {
            *a += b * w;
        }
    };
    let cut = params.envelope_cut as f64;
    let (first, stride) = match params.logical {
        Logical::Zero => {
            add(&base, 1.0);
            (1.0, 1.0)
        }
        Logical::One => (0.5, 1.0),
    };
    let first_shift = beta * first;
    let mut up = displace(&base, first_shift);
    let mut down = displace(&base, -first_shift);
    let mut m = first;
    while m <= cut + 1e-12 && step * m <= reach {
        add(&up, weight(m));
        add(&down, weight(-m));
        m += stride;
        up = displace(&up, beta);
        down = displace(&down, -beta);
    }
    let n: f64 = acc.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::Degenerate("empty superposition".into()));
    }
    Ok(acc.into_iter().map(|x| x / n).collect())
}

/// Normalised `c0|0̃⟩ + c1|1̃⟩` with a common `(r, κ)`.
pub fn approx_gkp_superposition(
    c0: C64,
    c1: C64,
    r: f64,
    kappa: f64,
    lattice: &LatticeSpec,
    space: FockSpace,
) -> Result<Vec<C64>> {
    let z = approx_gkp_state(&ApproxGkpParams::new(r, kappa, Logical::Zero, *lattice), space)?;
    let o = approx_gkp_state(&ApproxGkpParams::new(r, kappa, Logical::One, *lattice), space)?;
    let v: Vec<C64> = z.iter().zip(&o).map(|(a, b)| c0 * a + c1 * b).collect();
    let n: f64 = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if n == 0.0 {
        return Err(Error::Degenerate("target superposition vanishes".into()));
    }
    Ok(v.into_iter().map(|x| x / n).collect())
}

/// `⟨t|ρ|t⟩`, clamped to `[0, 1]`.
pub fn fidelity(rho: &BosonDensity, target: &[C64]) -> Result<f64> {
    if rho.dim() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            got: target.len(),
        });
    }
    Ok((rho.overlap(target) / rho.trace()).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    /// `values[(i, j)] = W(xs[i], ps[j])`.
    pub values: DMatrix<f64>,
}

fn components(rho: &BosonDensity) -> Vec<DVector<C64>> {
    let t = rho.trace();
    match rho.to_ensemble(1e-12) {
        BosonDensity::Ensemble(c) => c.into_iter().map(|v| v / C64::new(t.sqrt(), 0.0)).collect(),
        BosonDensity::Dense(_) => unreachable!(),
    }
}

/// Wigner function by displaced parity, `W(x, p) = π^{-1} tr(ρ D(γ) Π D(γ)†)`
/// with `γ = (x + ip)/√2`.
///
/// Each `x` row is displaced once and then stepped along `p` with small
/// momentum kicks, so the cost per grid point is a short exponential action.
pub fn wigner(rho: &BosonDensity, xs: &[f64], ps: &[f64]) -> WignerGrid {
    let comps = components(rho);
    let mut values = DMatrix::zeros(xs.len(), ps.len());
    for (i, &x) in xs.iter().enumerate() {
        for c in &comps {
            let mut row = displace(c.as_slice(), C64::new(-x * FRAC_1_SQRT_2, 0.0));
            let mut p_prev = 0.0;
            for (j, &p) in ps.iter().enumerate() {
                row = displace(&row, C64::new(0.0, -(p - p_prev) * FRAC_1_SQRT_2));
                p_prev = p;
                let parity: f64 = row
                    .iter()
                    .enumerate()
                    .map(|(n, a)| if n % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
                    .sum();
                values[(i, j)] += parity / PI;
            }
        }
    }
    WignerGrid {
        xs: xs.to_vec(),
        ps: ps.to_vec(),
        values,
    }
}

/// `⟨x|ρ|x⟩` on a set of points.
pub fn position_density(rho: &BosonDensity, xs: &[f64]) -> Vec<f64> {
    let comps = components(rho);
    let d = rho.dim();
    xs.iter()
        .map(|&x| {
            let h = hermite_functions(x, d);
            comps
                .iter()
                .map(|c| c.iter().zip(&h).map(|(a, b)| a * *b).sum::<C64>().norm_sqr())
                .sum()
        })
        .collect()
}

/// Quadrature over the central square of the square-lattice Zak cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ZakGrid {
    pub u_nodes: Vec<f64>,
    pub u_weights: Vec<f64>,
    pub v_nodes: Vec<f64>,
    pub v_weights: Vec<f64>,
    /// Position range covered by the comb sums.
    pub x_extent: f64,
}

impl ZakGrid {
    pub fn new(x_extent: f64, nodes: usize) -> Self {
        let h = PI.sqrt() / 6.0;
        let (u_nodes, u_weights) = gauss_legendre(nodes, -h, h);
        let (v_nodes, v_weights) = gauss_legendre(nodes, -h, h);
        Self {
            u_nodes,
            u_weights,
            v_nodes,
            v_weights,
            x_extent,
        }
    }

    /// Covers the classically allowed region of the truncated space.
    pub fn covering(space: FockSpace) -> Self {
        Self::new((2.0 * space.dim() as f64 + 1.0).sqrt() + 4.0, 24)
    }
}

/// Probability that a shift-error measurement on square-lattice logical
/// zero lands outside `|u|, |v| ≤ √π/6`.
///
/// Uses `⟨u,v|ψ⟩ = π^{-1/4} Σ_s e^{2i s √π v} ψ(2 s √π + u)`.
pub fn shift_error(rho: &BosonDensity, grid: &ZakGrid) -> Result<f64> {
    let comps = components(rho);
    let d = rho.dim();
    let sp = PI.sqrt();
    let s_max = (grid.x_extent / (2.0 * sp)).ceil() as i64 + 1;
    let mut inside = 0.0;
    for (&u, &wu) in grid.u_nodes.iter().zip(&grid.u_weights) {
        // ψ_j(2 s √π + u) for every component and tooth
        let teeth: Vec<(f64, Vec<C64>)> = (-s_max..=s_max)
            .map(|s| {
                let x = 2.0 * s as f64 * sp + u;
                let h = hermite_functions(x, d);
                let vals = comps
                    .iter()
                    .map(|c| c.iter().zip(&h).map(|(a, b)| a * *b).sum::<C64>())
                    .collect();
                (2.0 * s as f64 * sp, vals)
            })
            .collect();
        for (&v, &wv) in grid.v_nodes.iter().zip(&grid.v_weights) {
            let mut dens = 0.0;
            for j in 0..comps.len() {
                let amp: C64 = teeth
                    .iter()
                    .map(|(xs, vals)| vals[j] * C64::from_polar(1.0, xs * v))
                    .sum();
                dens += amp.norm_sqr();
            }
            inside += wu * wv * dens / sp;
        }
    }
    if !(-1e-9..=1.0 + 1e-6).contains(&inside) {
        return Err(Error::Numerical(format!(
            "central shift probability {inside} outside [0, 1]"
        )));
    }
    Ok((1.0 - inside).clamp(0.0, 1.0))
}

/// Applies the logical `X = D(β/2)`, e.g. to turn a `|1⟩` output into `|0⟩`.
pub fn apply_logical_x(rho: &BosonDensity, lattice: &LatticeSpec) -> BosonDensity {
    rho.conjugate_by(|v| displace(v, lattice.beta * 0.5))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogicalPauli {
    pub value: f64,
    pub c0: C64,
    pub c1: C64,
    /// `⟨Z_L⟩ = ⟨D(α/2)⟩`, `⟨X_L⟩ = ⟨D(β/2)⟩`, `⟨Y_L⟩ = ⟨D((α+β)/2)⟩`.
    pub z: C64,
    pub x: C64,
    pub y: C64,
}

/// Maximises `|⟨U_L⟩|` with
/// `U_L = (|c0|²−|c1|²) Z_L + 2 Re(c0* c1) X_L + 2 Im(c0* c1) Y_L`
/// over the Bloch angles of `(c0, c1)`.
pub fn logical_pauli_max(rho: &BosonDensity, lattice: &LatticeSpec) -> Result<LogicalPauli> {
    lattice.validate()?;
    let t = rho.trace();
    let z = rho.expect_with(|v| displace(v, lattice.alpha * 0.5)) / t;
    let x = rho.expect_with(|v| displace(v, lattice.beta * 0.5)) / t;
    let y = rho.expect_with(|v| displace(v, (lattice.alpha + lattice.beta) * 0.5)) / t;
    for e in [z, x, y] {
        if e.norm() > 1.0 + UNIT_SLACK {
            return Err(Error::Unphysical(e.norm()));
        }
    }
    let value = |a: &[f64]| {
        let (th, ph) = (a[0], a[1]);
        (z * th.cos() + x * (th.sin() * ph.cos()) + y * (th.sin() * ph.sin())).norm()
    };
    let mut starts = Vec::new();
    for th in [0.0, 0.25 * PI, 0.5 * PI, 0.75 * PI] {
        for ph in [0.0, 0.5 * PI, PI, 1.5 * PI] {
            starts.push(vec![th + 0.01, ph]);
        }
    }
    let nm = NelderMead {
        x_tol: 1e-7,
        f_tol: 1e-12,
        max_evals: 2000,
        initial_step: 0.1,
    };
    let best = nm.minimize_multistart(|a| -value(a), &starts)?;
    let (mut th, mut ph) = (best.point[0], best.point[1]);
    // (θ, φ) and its antipode give the same |⟨U_L⟩|; report the one with ⟨U_L⟩ > 0
    let signed = z * th.cos() + x * (th.sin() * ph.cos()) + y * (th.sin() * ph.sin());
    if signed.re < 0.0 {
        th = PI - th;
        ph += PI;
    }
    Ok(LogicalPauli {
        value: -best.value,
        c0: C64::new((th / 2.0).cos(), 0.0),
        c1: C64::from_polar((th / 2.0).sin(), ph),
        z,
        x,
        y,
    })
}

/// Whether [`shift_error`] applies to this lattice.
pub fn supports_shift_error(lattice: &LatticeSpec) -> bool {
    lattice.kind == LatticeKind::Square
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{db_to_r, vacuum};

    fn db_to_linear(db: f64) -> f64 {
        10f64.powf(-db / 20.0)
    }

    #[test]
    fn vacuum_is_the_zero_db_reference() {
        let space = FockSpace::new(60).unwrap();
        let e = effective_squeezing(&BosonDensity::pure(&vacuum(space)), &LatticeSpec::square()).unwrap();
        assert!((e.delta_x - 1.0).abs() < 1e-12 && (e.delta_p - 1.0).abs() < 1e-12);
        assert!(e.delta_x_db.abs() < 1e-10 && e.delta_p_db.abs() < 1e-10);
    }

    #[test]
    fn squeezed_vacuum_reproduces_r() {
        let r = 0.8;
        let space = FockSpace::new(250).unwrap();
        let e = effective_squeezing(&BosonDensity::pure(&squeezed_vacuum(space, r)), &LatticeSpec::square()).unwrap();
        assert!((e.delta_x - (-r).exp()).abs() < 1e-6, "{}", e.delta_x);
        assert!((e.delta_p - r.exp()).abs() < 1e-6, "{}", e.delta_p);
    }

    #[test]
    fn hexagonal_extension_keeps_the_squeezed_vacuum_identity() {
        let r = 0.6;
        let space = FockSpace::new(250).unwrap();
        let hex = LatticeSpec::hexagonal();
        let e = effective_squeezing(&BosonDensity::pure(&squeezed_vacuum(space, r)), &hex).unwrap();
        // along α = i|α| the state is squeezed exactly like X
        assert!((e.delta_x - (-r).exp()).abs() < 1e-6, "{}", e.delta_x);
        assert!(e.delta_p > 1.0);
    }

    #[test]
    fn code_state_parameters_are_recovered() {
        let space = FockSpace::new(400).unwrap();
        let p = ApproxGkpParams::new(db_to_r(12.0), db_to_linear(12.0), Logical::Zero, LatticeSpec::square());
        let psi = approx_gkp_state(&p, space).unwrap();
        let e = effective_squeezing(&BosonDensity::pure(&psi), &LatticeSpec::square()).unwrap();
        assert!((e.delta_x_db - 12.0).abs() < 0.01, "{}", e.delta_x_db);
        assert!((e.delta_p_db - 12.0).abs() < 0.05, "{}", e.delta_p_db);
    }

    #[test]
    fn wide_envelope_limit_is_a_single_peak() {
        let space = FockSpace::new(150).unwrap();
        let r = db_to_r(10.0);
        let p = ApproxGkpParams::new(r, 40.0, Logical::Zero, LatticeSpec::square());
        let psi = approx_gkp_state(&p, space).unwrap();
        let f = fidelity(&BosonDensity::pure(&psi), &squeezed_vacuum(space, r)).unwrap();
        assert!(f > 1.0 - 1e-6, "{f}");
        let mut bad = p;
        bad.envelope_cut = 0;
        assert!(approx_gkp_state(&bad, space).is_err());
    }

    #[test]
    fn stabilizer_sentinels() {
        assert!(matches!(stabilizer_delta(C64::new(1.1, 0.0), 1.0), Err(Error::Unphysical(_))));
        assert_eq!(stabilizer_delta(ZERO, 1.0).unwrap(), (0.0, true));
        let (d, deg) = stabilizer_delta(C64::new(0.0, (-PI).exp()), (2.0 * PI).sqrt()).unwrap();
        assert!((d - 1.0).abs() < 1e-14 && !deg);
        assert!((delta_to_db(10f64.powf(-0.5)) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_of_a_pure_state_with_itself() {
        let space = FockSpace::new(30).unwrap();
        let psi = displace(&vacuum(space), C64::new(0.7, 0.2));
        let rho = BosonDensity::pure(&psi);
        assert!((fidelity(&rho, &psi).unwrap() - 1.0).abs() < 1e-9);
        let f = fidelity(&rho, &vacuum(space)).unwrap();
        assert!((f - (-(0.49f64 + 0.04)).exp()).abs() < 1e-9);
        assert!(fidelity(&rho, &vacuum(FockSpace::new(20).unwrap())).is_err());
    }

    #[test]
    fn wigner_of_vacuum() {
        let space = FockSpace::new(40).unwrap();
        let rho = BosonDensity::pure(&vacuum(space));
        let w = wigner(&rho, &[0.0], &[0.0]);
        assert!((w.values[(0, 0)] - 1.0 / PI).abs() < 1e-8);
        let (x, wx) = gauss_legendre(48, -6.0, 6.0);
        let grid = wigner(&rho, &x, &x);
        let mut total = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                total += wx[i] * wx[j] * grid.values[(i, j)];
            }
        }
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn wigner_marginal_is_the_position_density() {
        let space = FockSpace::new(150).unwrap();
        let a = squeezed_vacuum(space, 0.4);
        let b = displace(&vacuum(space), C64::new(1.0, -0.5));
        let ma = DMatrix::from_fn(150, 150, |i, j| 0.7 * a[i] * a[j].conj() + 0.3 * b[i] * b[j].conj());
        let rho = BosonDensity::Dense(ma);
        let xs = [-1.3, 0.0, 0.4, 1.9];
        let (ps, wp) = gauss_legendre(64, -7.0, 7.0);
        let grid = wigner(&rho, &xs, &ps);
        let dens = position_density(&rho, &xs);
        for i in 0..xs.len() {
            let m: f64 = (0..ps.len()).map(|j| wp[j] * grid.values[(i, j)]).sum();
            assert!((m - dens[i]).abs() < 1e-4, "x={}: {m} vs {}", xs[i], dens[i]);
        }
    }

    #[test]
    fn stabilizer_shifts_leave_squeezing_unchanged() {
        let space = FockSpace::new(400).unwrap();
        let lat = LatticeSpec::square();
        let p = ApproxGkpParams::new(db_to_r(10.0), db_to_linear(10.0), Logical::Zero, lat);
        let rho = BosonDensity::pure(&approx_gkp_state(&p, space).unwrap());
        let e0 = effective_squeezing(&rho, &lat).unwrap();
        for g in [lat.alpha, lat.beta] {
            let moved = rho.conjugate_by(|v| displace(v, g));
            let e1 = effective_squeezing(&moved, &lat).unwrap();
            assert!((e1.delta_x - e0.delta_x).abs() < 1e-9);
            assert!((e1.delta_p - e0.delta_p).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_error_falls_with_code_quality() {
        let space = FockSpace::new(300).unwrap();
        let grid = ZakGrid::covering(space);
        let mut last = 1.0;
        for db in [6.0, 8.0, 10.0, 12.0] {
            let p = ApproxGkpParams::new(db_to_r(db), db_to_linear(db), Logical::Zero, LatticeSpec::square());
            let rho = BosonDensity::pure(&approx_gkp_state(&p, space).unwrap());
            let e = shift_error(&rho, &grid).unwrap();
            assert!(e < last, "{db} dB: {e}");
            last = e;
        }
        let w: f64 = grid.u_weights.iter().sum();
        assert!((w - PI.sqrt() / 3.0).abs() < 1e-12);
    }

    #[test]
    fn logical_pauli_bounds() {
        let space = FockSpace::new(300).unwrap();
        let lat = LatticeSpec::square();
        let (r, k) = (db_to_r(12.0), db_to_linear(12.0));
        let zero = approx_gkp_state(&ApproxGkpParams::new(r, k, Logical::Zero, lat), space).unwrap();
        let one = approx_gkp_state(&ApproxGkpParams::new(r, k, Logical::One, lat), space).unwrap();
        let pz = logical_pauli_max(&BosonDensity::pure(&zero), &lat).unwrap();
        assert!(pz.value > 0.9 && pz.value <= 1.0 + 1e-6);
        assert!(pz.c0.norm() > 0.99, "{:?}", pz);
        let po = logical_pauli_max(&BosonDensity::pure(&one), &lat).unwrap();
        assert!(po.value > 0.9 && po.c1.norm() > 0.99, "{:?}", po);
        let mix = DMatrix::from_fn(300, 300, |i, j| 0.5 * (zero[i] * zero[j].conj() + one[i] * one[j].conj()));
        let pm = logical_pauli_max(&BosonDensity::Dense(mix), &lat).unwrap();
        assert!(pm.value < 0.05, "{}", pm.value);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn code_states_are_normalised(db in 6.0f64..13.0, kdb in 6.0f64..13.0, one in any::<bool>()) {
                let logical = if one { Logical::One } else { Logical::Zero };
                let p = ApproxGkpParams::new(db_to_r(db), db_to_linear(kdb), logical, LatticeSpec::square());
                let psi = approx_gkp_state(&p, FockSpace::new(300).unwrap()).unwrap();
                let n: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
                prop_assert!((n - 1.0).abs() < 1e-10);
            }

            #[test]
            fn fidelity_is_a_probability(a in -1.5f64..1.5, b in -1.5f64..1.5, r in 0.0f64..0.8) {
                let space = FockSpace::new(60).unwrap();
                let rho = BosonDensity::pure(&squeezed_vacuum(space, r));
                let f = fidelity(&rho, &displace(&vacuum(space), C64::new(a, b))).unwrap();
                prop_assert!((0.0..=1.0).contains(&f));
            }
        }
    }
}
