//! Banded oscillator operators, the action of their exponential on vectors,
//! and a dense scaling-and-squaring exponential.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Norm budget per Taylor sub-step in [`expm_action`].
const TAYLOR_STEP_NORM: f64 = 4.0;
const TAYLOR_MAX_TERMS: usize = 80;

/// Square operator stored as a few diagonals.
///
/// Band `(k, vals)` contributes `y[i] += vals[i] * x[i + k]` whenever
/// `i + k` is a valid index.
#[derive(Clone, Debug, PartialEq)]
pub struct Banded {
    dim: usize,
    bands: Vec<(isize, Vec<C64>)>,
}

impl Banded {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, bands: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bands(&self) -> &[(isize, Vec<C64>)] {
        &self.bands
    }

    /// Adds the band `offset`, merging with an existing band of the same offset.
    pub fn with_band(mut self, offset: isize, f: impl Fn(usize) -> C64) -> Self {
        let mut vals: Vec<C64> = (0..self.dim)
            .map(|i| {
                let j = i as isize + offset;
                if j < 0 || j >= self.dim as isize {
                    C64::new(0.0, 0.0)
                } else {
                    f(i)
                }
            })
            .collect();
        if let Some((_, existing)) = self.bands.iter_mut().find(|(k, _)| *k == offset) {
            for (e, v) in existing.iter_mut().zip(vals.drain(..)) {
                *e += v;
            }
        } else {
            self.bands.push((offset, vals));
        }
        self
    }

    /// Annihilation operator `a`.
    pub fn lowering(dim: usize) -> Self {
        Self::zeros(dim).with_band(1, |i| C64::new(((i + 1) as f64).sqrt(), 0.0))
    }

    /// Creation operator `a†`.
    pub fn raising(dim: usize) -> Self {
        Self::zeros(dim).with_band(-1, |i| C64::new((i as f64).sqrt(), 0.0))
    }

    pub fn number(dim: usize) -> Self {
        Self::zeros(dim).with_band(0, |i| C64::new(i as f64, 0.0))
    }

    /// `X = (a + a†)/√2`.
    pub fn position(dim: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::zeros(dim)
            .with_band(1, |i| C64::new(s * ((i + 1) as f64).sqrt(), 0.0))
            .with_band(-1, |i| C64::new(s * (i as f64).sqrt(), 0.0))
    }

    /// `P = (a - a†)/(i√2)`.
    pub fn momentum(dim: usize) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::zeros(dim)
            .with_band(1, |i| C64::new(0.0, -s * ((i + 1) as f64).sqrt()))
            .with_band(-1, |i| C64::new(0.0, s * (i as f64).sqrt()))
    }

    /// Generator `γ a† - γ* a` of the displacement `D(γ)`.
    pub fn displacement_generator(dim: usize, gamma: C64) -> Self {
        Self::zeros(dim)
            .with_band(-1, |i| gamma * (i as f64).sqrt())
            .with_band(1, |i| -gamma.conj() * ((i + 1) as f64).sqrt())
    }

    /// Generator `(r/2)(a² - a†²)`; its exponential squeezes `X` by `e^{-r}`.
    pub fn squeeze_generator(dim: usize, r: f64) -> Self {
        Self::zeros(dim)
            .with_band(2, |i| C64::new(0.5 * r * (((i + 1) * (i + 2)) as f64).sqrt(), 0.0))
            .with_band(-2, |i| {
                C64::new(-0.5 * r * ((i * i.saturating_sub(1)) as f64).sqrt(), 0.0)
            })
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            dim: self.dim,
            bands: self
                .bands
                .iter()
                .map(|(k, v)| (*k, v.iter().map(|x| x * c).collect()))
                .collect(),
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        y.iter_mut().for_each(|e| *e = C64::new(0.0, 0.0));
        let n = self.dim as isize;
        for (k, vals) in &self.bands {
            let lo = (-k).max(0) as usize;
            let hi = (n - k).min(n).max(0) as usize;
            for i in lo..hi {
                y[i] += vals[i] * x[(i as isize + k) as usize];
            }
        }
    }

    pub fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut y);
        y
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn one_norm(&self) -> f64 {
        let mut col = vec![0.0; self.dim];
        for (k, vals) in &self.bands {
            for (i, v) in vals.iter().enumerate() {
                let j = i as isize + k;
                if j >= 0 && (j as usize) < self.dim {
                    col[j as usize] += v.norm();
                }
            }
        }
        col.into_iter().fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (k, vals) in &self.bands {
            for (i, v) in vals.iter().enumerate() {
                let j = i as isize + k;
                if j >= 0 && (j as usize) < self.dim {
                    m[(i, j as usize)] += *v;
                }
            }
        }
        m
    }
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.norm()))
}

/// `exp(A) v` by a truncated Taylor series over enough sub-steps that each
/// step has norm at most a few units.
pub fn expm_action(op: &Banded, v: &[C64]) -> Vec<C64> {
    let norm = op.one_norm();
    let steps = ((norm / TAYLOR_STEP_NORM).ceil() as usize).max(1);
    let h = 1.0 / steps as f64;
    let mut acc = v.to_vec();
    let mut term = vec![C64::new(0.0, 0.0); v.len()];
    let mut next = term.clone();
    for _ in 0..steps {
        term.copy_from_slice(&acc);
        let mut small = 0;
        for k in 1..=TAYLOR_MAX_TERMS {
            op.apply(&term, &mut next);
            let f = h / k as f64;
            next.iter_mut().for_each(|e| *e *= f);
            std::mem::swap(&mut term, &mut next);
            for (a, t) in acc.iter_mut().zip(&term) {
                *a += t;
            }
            if max_abs(&term) <= f64::EPSILON * max_abs(&acc) {
                small += 1;
                if small == 2 {
                    break;
                }
            } else {
                small = 0;
            }
        }
    }
    acc
}

/// Probability weight of `v` on Fock levels at or above `frac * dim`.
pub fn tail_weight(v: &[C64], frac: f64) -> f64 {
    let start = ((v.len() as f64) * frac).floor() as usize;
    v[start.min(v.len())..].iter().map(|x| x.norm_sqr()).sum()
}

/// Logs a warning when `v` has noticeable weight near the truncation edge.
pub fn check_leakage(v: &[C64], what: &str) -> f64 {
    let norm: f64 = v.iter().map(|x| x.norm_sqr()).sum();
    let tail = tail_weight(v, 0.9) / norm.max(f64::MIN_POSITIVE);
    if tail > 1e-6 {
        log::warn!(
            "{what}: weight {tail:.2e} above 0.9*dim (dim {}); consider a larger Fock space",
            v.len()
        );
    }
    tail
}

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn dense_one_norm(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix exponential, degree-13 Padé with scaling and squaring.
pub fn expm_dense(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm of a non-square matrix");
    let norm = dense_one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / C64::new(2f64.powi(s), 0.0);
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9))
        + &a6 * b(7)
        + &a4 * b(5)
        + &a2 * b(3)
        + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8))
        + &a6 * b(6)
        + &a4 * b(4)
        + &a2 * b(2)
        + &id * b(0);
    let num = &v + &u;
    let den = &v - &u;
    let mut r = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is singular for a scaled argument");
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn banded_matches_dense() {
        let x = Banded::position(7);
        let d = x.to_dense();
        let v: Vec<C64> = (0..7).map(|i| C64::new(i as f64, 1.0 - i as f64)).collect();
        let y = x.apply_vec(&v);
        let yd = &d * nalgebra::DVector::from_vec(v);
        for i in 0..7 {
            assert!((y[i] - yd[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn commutator_is_i_away_from_edge() {
        let n = 12;
        let x = Banded::position(n).to_dense();
        let p = Banded::momentum(n).to_dense();
        let c = &x * &p - &p * &x;
        for i in 0..n - 1 {
            assert!((c[(i, i)] - C64::new(0.0, 1.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn dense_exp_of_diagonal() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, 2.0),
            C64::new(-20.0, 0.0),
        ]));
        let e = expm_dense(&d);
        assert!((e[(0, 0)] - C64::new(0.5f64.exp(), 0.0)).norm() < 1e-14);
        assert!((e[(1, 1)] - C64::new(0.0, 2.0).exp()).norm() < 1e-14);
        assert!((e[(2, 2)].re - (-20f64).exp()).abs() < 1e-20);
    }

    #[test]
    fn action_agrees_with_dense() {
        let n = 40;
        let g = Banded::displacement_generator(n, C64::new(1.3, -0.7));
        let dense = expm_dense(&g.to_dense());
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[0] = C64::new(1.0, 0.0);
        v[3] = C64::new(0.0, 0.5);
        let w = expm_action(&g, &v);
        let wd = &dense * nalgebra::DVector::from_vec(v);
        for i in 0..n {
            assert!((w[i] - wd[i]).norm() < 1e-12, "{i}: {} vs {}", w[i], wd[i]);
        }
    }
}
