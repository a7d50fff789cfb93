//! Truncated oscillator ⊗ qubit state space.
//!
//! Hybrid vectors use the index `2n + q` for Fock level `n` and qubit level
//! `q`, so the qubit index varies fastest.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::BosonDensity;
use crate::error::{Error, Result};
use crate::linalg::{check_leakage, expm_action, expm_dense, Banded};

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Tolerance on state normalisation accepted by constructors.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FockSpace {
    dim: usize,
}

impl FockSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hybrid_dim(&self) -> usize {
        2 * self.dim
    }

    /// Default truncation for an `n_rounds` protocol on an input squeezed by `r`.
    ///
    /// The squeezed input needs roughly `e^{2r}` levels; every round adds
    /// a displacement of order `2^N √π`, hence the second term.
    pub fn for_protocol(n_rounds: usize, r: f64) -> Self {
        let d = 8.0 * (2.0 * r).exp() + 40.0 * 2f64.powi(n_rounds as i32);
        Self {
            dim: (d.ceil() as usize).max(140),
        }
    }
}

/// Converts squeezing in dB (`-10 log10 Δ²` with `Δ = e^{-r}`) to `r`.
pub fn db_to_r(db: f64) -> f64 {
    db * std::f64::consts::LN_10 / 20.0
}

pub fn r_to_db(r: f64) -> f64 {
    20.0 * r / std::f64::consts::LN_10
}

/// Dense oscillator operator.
#[derive(Clone, Debug, PartialEq)]
pub struct BosonOperator {
    pub matrix: DMatrix<C64>,
}

impl BosonOperator {
    pub fn identity(space: FockSpace) -> Self {
        Self {
            matrix: DMatrix::identity(space.dim, space.dim),
        }
    }
    pub fn annihilation(space: FockSpace) -> Self {
        Self {
            matrix: Banded::lowering(space.dim).to_dense(),
        }
    }
    pub fn creation(space: FockSpace) -> Self {
        Self {
            matrix: Banded::raising(space.dim).to_dense(),
        }
    }
    pub fn number(space: FockSpace) -> Self {
        Self {
            matrix: Banded::number(space.dim).to_dense(),
        }
    }
    pub fn position(space: FockSpace) -> Self {
        Self {
            matrix: Banded::position(space.dim).to_dense(),
        }
    }
    pub fn momentum(space: FockSpace) -> Self {
        Self {
            matrix: Banded::momentum(space.dim).to_dense(),
        }
    }
    pub fn parity(space: FockSpace) -> Self {
        Self {
            matrix: DMatrix::from_fn(space.dim, space.dim, |i, j| {
                if i != j {
                    ZERO
                } else if i % 2 == 0 {
                    ONE
                } else {
                    -ONE
                }
            }),
        }
    }

    /// `exp(iθ a†a)`.
    pub fn rotation(space: FockSpace, theta: f64) -> Self {
        Self {
            matrix: DMatrix::from_fn(space.dim, space.dim, |i, j| {
                if i == j {
                    C64::from_polar(1.0, theta * i as f64)
                } else {
                    ZERO
                }
            }),
        }
    }

    /// `D(γ) = exp(γ a† - γ* a)` exponentiated in the truncated space.
    pub fn displacement(space: FockSpace, gamma: C64) -> Self {
        let m = expm_dense(&Banded::displacement_generator(space.dim, gamma).to_dense());
        check_leakage(m.column(0).as_slice(), "displacement");
        Self { matrix: m }
    }

    /// `S(r) = exp((r/2)(a² - a†²))`, squeezing `X` for `r > 0`.
    pub fn squeeze(space: FockSpace, r: f64) -> Self {
        let m = expm_dense(&Banded::squeeze_generator(space.dim, r).to_dense());
        check_leakage(m.column(0).as_slice(), "squeeze");
        Self { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }
}

/// Two-level operator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QubitOperator {
    pub matrix: Matrix2<C64>,
}

impl QubitOperator {
    pub fn identity() -> Self {
        Self {
            matrix: Matrix2::identity(),
        }
    }
    pub fn sigma_x() -> Self {
        Self {
            matrix: Matrix2::new(ZERO, ONE, ONE, ZERO),
        }
    }
    pub fn sigma_y() -> Self {
        let i = C64::new(0.0, 1.0);
        Self {
            matrix: Matrix2::new(ZERO, -i, i, ZERO),
        }
    }
    pub fn sigma_z() -> Self {
        Self {
            matrix: Matrix2::new(ONE, ZERO, ZERO, -ONE),
        }
    }
    /// `cos φ σx + sin φ σy`.
    pub fn sigma_phi(phi: f64) -> Self {
        Self {
            matrix: Matrix2::new(
                ZERO,
                C64::from_polar(1.0, -phi),
                C64::from_polar(1.0, phi),
                ZERO,
            ),
        }
    }
    /// `|0⟩⟨1|`, decaying the excited level `|1⟩` into `|0⟩`.
    pub fn sigma_minus() -> Self {
        Self {
            matrix: Matrix2::new(ZERO, ONE, ZERO, ZERO),
        }
    }
    pub fn projector(state: [C64; 2]) -> Self {
        let v = nalgebra::Vector2::new(state[0], state[1]);
        Self {
            matrix: &v * v.adjoint(),
        }
    }
}

/// Common qubit states.
pub mod qubit {
    use super::*;
    pub const fn zero() -> [C64; 2] {
        [ONE, ZERO]
    }
    pub const fn one() -> [C64; 2] {
        [ZERO, ONE]
    }
    pub fn plus() -> [C64; 2] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [s, s]
    }
    pub fn minus() -> [C64; 2] {
        let s = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        [s, -s]
    }
}

/// Dense operator on the hybrid space.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridOperator {
    pub matrix: DMatrix<C64>,
}

/// `B ⊗ Q` in the `2n + q` ordering.
pub fn embed(boson: &BosonOperator, qubit: &QubitOperator) -> HybridOperator {
    let d = boson.dim();
    let m = DMatrix::from_fn(2 * d, 2 * d, |i, j| {
        boson.matrix[(i / 2, j / 2)] * qubit.matrix[(i % 2, j % 2)]
    });
    HybridOperator { matrix: m }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HybridState {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

impl HybridState {
    /// `|boson⟩ ⊗ |qubit⟩`; both factors are normalised first.
    pub fn product(boson: &[C64], qubit: [C64; 2]) -> Result<Self> {
        let nb: f64 = boson.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let nq = (qubit[0].norm_sqr() + qubit[1].norm_sqr()).sqrt();
        if nb == 0.0 || nq == 0.0 {
            return Err(Error::NotNormalized(0.0));
        }
        let d = boson.len();
        let v = DVector::from_fn(2 * d, |i, _| boson[i / 2] * qubit[i % 2] / (nb * nq));
        Ok(Self::Pure(v))
    }

    /// Builds a pure state from its two qubit components `ψ_0, ψ_1`.
    pub fn from_components(c0: &[C64], c1: &[C64]) -> Result<Self> {
        if c0.len() != c1.len() {
            return Err(Error::DimensionMismatch {
                expected: c0.len(),
                got: c1.len(),
            });
        }
        let v = DVector::from_fn(2 * c0.len(), |i, _| if i % 2 == 0 { c0[i / 2] } else { c1[i / 2] });
        let st = Self::Pure(v);
        st.validate()?;
        Ok(st)
    }

    pub fn from_density(rho: DMatrix<C64>) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: rho.nrows() + rho.nrows() % 2,
                got: rho.ncols(),
            });
        }
        let st = Self::Mixed(rho);
        st.validate()?;
        Ok(st)
    }

    pub fn fock_dim(&self) -> usize {
        match self {
            Self::Pure(v) => v.len() / 2,
            Self::Mixed(m) => m.nrows() / 2,
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Pure(v) => v.norm_squared(),
            Self::Mixed(m) => m.diagonal().iter().map(|x| x.re).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.trace();
        if (t - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized(t));
        }
        Ok(())
    }

    /// Qubit components `(ψ_0, ψ_1)` of a pure state.
    pub fn components(&self) -> Option<(Vec<C64>, Vec<C64>)> {
        match self {
            Self::Pure(v) => Some((
                v.iter().step_by(2).copied().collect(),
                v.iter().skip(1).step_by(2).copied().collect(),
            )),
            Self::Mixed(_) => None,
        }
    }

    pub fn to_density(&self) -> DMatrix<C64> {
        match self {
            Self::Pure(v) => v * v.adjoint(),
            Self::Mixed(m) => m.clone(),
        }
    }

    /// Reduced qubit density matrix.
    pub fn reduced_qubit(&self) -> Matrix2<C64> {
        match self {
            Self::Pure(v) => {
                let mut m = Matrix2::zeros();
                for n in 0..v.len() / 2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            m[(a, b)] += v[2 * n + a] * v[2 * n + b].conj();
                        }
                    }
                }
                m
            }
            Self::Mixed(rho) => {
                let mut m = Matrix2::zeros();
                for n in 0..rho.nrows() / 2 {
                    for a in 0..2 {
                        for b in 0..2 {
                            m[(a, b)] += rho[(2 * n + a, 2 * n + b)];
                        }
                    }
                }
                m
            }
        }
    }

    pub fn expect(&self, op: &HybridOperator) -> Result<C64> {
        let n = 2 * self.fock_dim();
        if op.matrix.nrows() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: op.matrix.nrows(),
            });
        }
        Ok(match self {
            Self::Pure(v) => v.dotc(&(&op.matrix * v)),
            Self::Mixed(rho) => (&op.matrix * rho).trace(),
        })
    }
}

/// Traces out the qubit.
pub fn partial_trace_qubit(state: &HybridState) -> BosonDensity {
    match state {
        HybridState::Pure(_) => {
            let (c0, c1) = state.components().expect("pure state");
            BosonDensity::Ensemble(vec![DVector::from_vec(c0), DVector::from_vec(c1)])
        }
        HybridState::Mixed(rho) => {
            let d = rho.nrows() / 2;
            BosonDensity::Dense(DMatrix::from_fn(d, d, |i, j| {
                rho[(2 * i, 2 * j)] + rho[(2 * i + 1, 2 * j + 1)]
            }))
        }
    }
}

pub fn vacuum(space: FockSpace) -> Vec<C64> {
    let mut v = vec![ZERO; space.dim];
    v[0] = ONE;
    v
}

/// `S(r)|0⟩`, computed by exponential action.
pub fn squeezed_vacuum(space: FockSpace, r: f64) -> Vec<C64> {
    let v = expm_action(&Banded::squeeze_generator(space.dim, r), &vacuum(space));
    check_leakage(&v, "squeezed vacuum");
    v
}

/// `D(γ) v`.
pub fn displace(v: &[C64], gamma: C64) -> Vec<C64> {
    if gamma == ZERO {
        return v.to_vec();
    }
    expm_action(&Banded::displacement_generator(v.len(), gamma), v)
}

pub fn coherent(space: FockSpace, alpha: C64) -> Vec<C64> {
    displace(&vacuum(space), alpha)
}

/// `exp(iθ a†a) v`.
pub fn rotate(v: &[C64], theta: f64) -> Vec<C64> {
    v.iter()
        .enumerate()
        .map(|(n, x)| x * C64::from_polar(1.0, theta * n as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(d: usize) -> FockSpace {
        FockSpace::new(d).unwrap()
    }

    #[test]
    fn rejects_tiny_space() {
        assert_eq!(FockSpace::new(1), Err(Error::InvalidDimension(1)));
        assert_eq!(FockSpace::for_protocol(1, 0.0).dim(), 140);
    }

    #[test]
    fn vacuum_displacement_is_coherent_state() {
        let s = space(60);
        let alpha = C64::new(1.2, -0.4);
        let d = BosonOperator::displacement(s, alpha);
        let mut k_fact = 1.0;
        for k in 0..20 {
            if k > 0 {
                k_fact *= k as f64;
            }
            let exact = (-alpha.norm_sqr() / 2.0).exp() * alpha.powu(k as u32) / k_fact.sqrt();
            assert!((d.matrix[(k, 0)] - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn squeeze_matches_closed_form() {
        let s = space(120);
        let r = 0.8;
        let v = squeezed_vacuum(s, r);
        let dense = BosonOperator::squeeze(s, r);
        let t = r.tanh();
        let mut ratio = 1.0 / r.cosh().sqrt();
        for n in 0..25 {
            // c_{2n} = (-tanh r)^n √((2n)!) / (2^n n! √cosh r)
            if n > 0 {
                let nn = n as f64;
                ratio *= -t * ((2.0 * nn - 1.0) * 2.0 * nn).sqrt() / (2.0 * nn);
            }
            assert!((v[2 * n].re - ratio).abs() < 1e-12, "n={n}");
            assert!(v[2 * n + 1].norm() < 1e-14);
            assert!((dense.matrix[(2 * n, 0)].re - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn embed_puts_qubit_fastest() {
        let s = space(3);
        let h = embed(&BosonOperator::annihilation(s), &QubitOperator::sigma_x());
        assert_eq!(h.matrix[(0, 3)], ONE);
        assert!((h.matrix[(2, 5)].re - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(h.matrix[(0, 2)], ZERO);
    }

    #[test]
    fn partial_trace_of_product() {
        let s = space(5);
        let b = coherent(s, C64::new(0.3, 0.0));
        let st = HybridState::product(&b, qubit::plus()).unwrap();
        let rho = partial_trace_qubit(&st).to_dense();
        let mixed = partial_trace_qubit(&HybridState::Mixed(st.to_density())).to_dense();
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert!((&rho - &mixed).norm() < 1e-13);
    }

    #[test]
    fn sigma_phi_reduces_to_paulis() {
        let x = QubitOperator::sigma_phi(0.0).matrix;
        let y = QubitOperator::sigma_phi(std::f64::consts::FRAC_PI_2).matrix;
        assert!((x - QubitOperator::sigma_x().matrix).norm() < 1e-15);
        assert!((y - QubitOperator::sigma_y().matrix).norm() < 1e-15);
    }
}
