use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::hilbert::{BosonOperator, ZERO};

/// Oscillator density matrix.
///
/// Noiseless runs keep the (few) unnormalised components `ψ_j` with
/// `ρ = Σ_j ψ_j ψ_j†`, which avoids forming `d × d` matrices at large `d`.
#[derive(Clone, Debug, PartialEq)]
pub enum BosonDensity {
    Ensemble(Vec<DVector<C64>>),
    Dense(DMatrix<C64>),
}

impl BosonDensity {
    pub fn pure(v: &[C64]) -> Self {
        Self::Ensemble(vec![DVector::from_column_slice(v)])
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ensemble(c) => c.first().map_or(0, |v| v.len()),
            Self::Dense(m) => m.nrows(),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Self::Ensemble(c) => c.iter().map(|v| v.norm_squared()).sum(),
            Self::Dense(m) => m.diagonal().iter().map(|x| x.re).sum(),
        }
    }

    pub fn normalized(&self) -> Self {
        let t = self.trace();
        match self {
            Self::Ensemble(c) => Self::Ensemble(c.iter().map(|v| v / C64::new(t.sqrt(), 0.0)).collect()),
            Self::Dense(m) => Self::Dense(m / C64::new(t, 0.0)),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match self {
            Self::Ensemble(c) => {
                let d = self.dim();
                let mut m = DMatrix::zeros(d, d);
                for v in c {
                    m.gerc(C64::new(1.0, 0.0), v, v, C64::new(1.0, 0.0));
                }
                m
            }
            Self::Dense(m) => m.clone(),
        }
    }

    /// `tr(ρ A)` where `apply` computes `A v`.
    pub fn expect_with(&self, apply: impl Fn(&[C64]) -> Vec<C64>) -> C64 {
        match self {
            Self::Ensemble(c) => c
                .iter()
                .map(|v| {
                    let w = apply(v.as_slice());
                    v.iter().zip(&w).map(|(a, b)| a.conj() * b).sum::<C64>()
                })
                .sum(),
            Self::Dense(m) => {
                // tr(A ρ) = Σ_j (A ρ_{:,j})_j
                let mut acc = ZERO;
                for j in 0..m.ncols() {
                    let col = apply(m.column(j).as_slice());
                    acc += col[j];
                }
                acc
            }
        }
    }

    pub fn expect(&self, op: &BosonOperator) -> C64 {
        match self {
            Self::Ensemble(c) => c.iter().map(|v| v.dotc(&(&op.matrix * v))).sum(),
            Self::Dense(m) => (&op.matrix * m).trace(),
        }
    }

    /// `U ρ U†` where `apply` computes `U v`.
    pub fn conjugate_by(&self, apply: impl Fn(&[C64]) -> Vec<C64>) -> Self {
        match self {
            Self::Ensemble(c) => Self::Ensemble(
                c.iter()
                    .map(|v| DVector::from_vec(apply(v.as_slice())))
                    .collect(),
            ),
            Self::Dense(m) => {
                let half = map_columns(m, &apply);
                // U (U ρ)† = U ρ U† for Hermitian ρ.
                let full = map_columns(&half.adjoint(), &apply);
                Self::Dense(hermitian_part(&full))
            }
        }
    }

    /// `⟨t|ρ|t⟩` for a normalised `t`.
    pub fn overlap(&self, t: &[C64]) -> f64 {
        let tv = DVector::from_column_slice(t);
        match self {
            Self::Ensemble(c) => c.iter().map(|v| tv.dotc(v).norm_sqr()).sum(),
            Self::Dense(m) => tv.dotc(&(m * &tv)).re,
        }
    }

    pub fn purity(&self) -> f64 {
        match self {
            Self::Ensemble(c) => {
                let mut s = 0.0;
                for a in c {
                    for b in c {
                        s += a.dotc(b).norm_sqr();
                    }
                }
                s
            }
            Self::Dense(m) => m.iter().map(|x| x.norm_sqr()).sum(),
        }
    }

    /// Eigen-decomposes a dense density into weighted components, dropping
    /// eigenvalues below `rel_cut` times the largest.
    pub fn to_ensemble(&self, rel_cut: f64) -> Self {
        match self {
            Self::Ensemble(_) => self.clone(),
            Self::Dense(m) => {
                let eig = nalgebra::SymmetricEigen::new(hermitian_part(m));
                let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
                let comps = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .filter(|(_, &l)| l > rel_cut * top)
                    .map(|(k, &l)| eig.eigenvectors.column(k) * C64::new(l.sqrt(), 0.0))
                    .collect();
                Self::Ensemble(comps)
            }
        }
    }

    /// Smallest eigenvalue of the density.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = hermitian_part(&self.to_dense());
        nalgebra::SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

fn map_columns(m: &DMatrix<C64>, apply: &impl Fn(&[C64]) -> Vec<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for j in 0..m.ncols() {
        let col = apply(m.column(j).as_slice());
        out.column_mut(j).copy_from_slice(&col);
    }
    out
}

pub(crate) fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}
