//! Open-system execution of gate schedules.
//!
//! Each gate `exp(i c G)` is produced by the Hamiltonian `H = -sign(c) G / T`
//! acting for a time `|c| T`, during which the Lindblad channels of the
//! [`NoiseModel`] act. The density matrix of oscillator and qubit is
//! integrated with an adaptive Dormand-Prince 5(4) pair.
//!
//! All channel operators used here map each basis state to a multiple of a
//! single basis state, so `L ρ L†` is a gather and `L†L` is diagonal. The
//! right-hand side therefore costs one sparse product `H ρ` plus a few
//! elementwise passes.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::density::BosonDensity;
use crate::error::{Error, Result};
use crate::hilbert::{displace, partial_trace_qubit, squeezed_vacuum, FockSpace, HybridState, ZERO};
use crate::linalg::Banded;
use crate::protocol::{build_schedule, run_in, GateKind, GateLabel, GateSchedule, GateSpec, LatticeSpec};

/// Success probabilities below this are reported as degenerate.
pub const MIN_SUCCESS_PROBABILITY: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// `√γ a`
    BosonLoss,
    /// `√γ (a a† + a† a)`
    BosonDephasing,
    /// `√γ σz`
    QubitDephasing,
    /// `√γ (σx + iσy)/2`
    QubitDecay,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 4] = [
        ChannelKind::BosonLoss,
        ChannelKind::BosonDephasing,
        ChannelKind::QubitDephasing,
        ChannelKind::QubitDecay,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BosonLoss => "boson_loss",
            Self::BosonDephasing => "boson_dephasing",
            Self::QubitDephasing => "qubit_dephasing",
            Self::QubitDecay => "qubit_decay",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Degenerate(format!("unknown channel '{s}'")))
    }

    pub fn acts_on_qubit(&self) -> bool {
        matches!(self, Self::QubitDephasing | Self::QubitDecay)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladChannel {
    pub kind: ChannelKind,
    /// In inverse units of [`NoiseModel::gate_time`].
    pub rate_gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// One entry per kind; duplicates are merged by [`NoiseModel::new`].
    pub channels: Vec<LindbladChannel>,
    /// Time needed for a unit-strength gate.
    pub gate_time: f64,
}

impl NoiseModel {
    pub fn new(channels: &[LindbladChannel], gate_time: f64) -> Result<Self> {
        if !(gate_time.is_finite() && gate_time > 0.0) {
            return Err(Error::Degenerate(format!("gate time {gate_time}")));
        }
        let mut merged: Vec<LindbladChannel> = Vec::new();
        for c in channels {
            if !(c.rate_gamma.is_finite() && c.rate_gamma >= 0.0) {
                return Err(Error::Degenerate(format!(
                    "{} rate {}",
                    c.kind.as_str(),
                    c.rate_gamma
                )));
            }
            match merged.iter_mut().find(|m| m.kind == c.kind) {
                Some(m) => m.rate_gamma += c.rate_gamma,
                None => merged.push(*c),
            }
        }
        Ok(Self {
            channels: merged,
            gate_time,
        })
    }

    pub fn noiseless() -> Self {
        Self {
            channels: Vec::new(),
            gate_time: 1.0,
        }
    }

    /// One channel with the dimensionless rate `γT`, in units where `T = 1`.
    pub fn single(kind: ChannelKind, gamma_t: f64) -> Result<Self> {
        Self::new(
            &[LindbladChannel {
                kind,
                rate_gamma: gamma_t,
            }],
            1.0,
        )
    }

    pub fn rate(&self, kind: ChannelKind) -> f64 {
        self.channels
            .iter()
            .filter(|c| c.kind == kind)
            .map(|c| c.rate_gamma)
            .sum()
    }

    /// `γT` for a channel kind.
    pub fn gamma_t(&self, kind: ChannelKind) -> f64 {
        self.rate(kind) * self.gate_time
    }

    pub fn is_noiseless(&self) -> bool {
        self.channels.iter().all(|c| c.rate_gamma == 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    TrappedIon,
    MicrowaveCavity,
}

impl PresetName {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::TrappedIon => "trapped_ion",
            Self::MicrowaveCavity => "microwave_cavity",
        }
    }
}

/// A channel as quoted for an experimental platform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotedChannel {
    pub kind: ChannelKind,
    /// `γ⁻¹` in seconds.
    pub inverse_rate: f64,
    /// The quoted `γT`. The model uses this value, which is not always
    /// exactly `gate_time / inverse_rate`.
    pub gamma_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub name: PresetName,
    /// Seconds per unit-strength gate.
    pub gate_time: f64,
    pub quoted: Vec<QuotedChannel>,
    pub model: NoiseModel,
}

pub fn preset(name: &str) -> Result<Preset> {
    let (pname, gate_time, quoted) = match name {
        "trapped_ion" => (
            PresetName::TrappedIon,
            11e-6,
            vec![QuotedChannel {
                kind: ChannelKind::BosonDephasing,
                inverse_rate: 140e-3,
                gamma_t: 7.7e-5,
            }],
        ),
        "microwave_cavity" => (
            PresetName::MicrowaveCavity,
            0.34e-6,
            vec![
                QuotedChannel {
                    kind: ChannelKind::QubitDecay,
                    inverse_rate: 50e-6,
                    gamma_t: 6.8e-3,
                },
                QuotedChannel {
                    kind: ChannelKind::QubitDephasing,
                    inverse_rate: 60e-6,
                    gamma_t: 5.7e-3,
                },
                QuotedChannel {
                    kind: ChannelKind::BosonLoss,
                    inverse_rate: 245e-6,
                    gamma_t: 1.4e-3,
                },
            ],
        ),
        _ => return Err(Error::UnknownPreset(name.to_string())),
    };
    let channels: Vec<LindbladChannel> = quoted
        .iter()
        .map(|q| LindbladChannel {
            kind: q.kind,
            rate_gamma: q.gamma_t / gate_time,
        })
        .collect();
    Ok(Preset {
        name: pname,
        gate_time,
        model: NoiseModel::new(&channels, gate_time)?,
        quoted,
    })
}

/// Compressed-row operator on the hybrid space.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_start: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// `B ⊗ Q` in the `2n + q` ordering.
    pub fn kron(boson: &Banded, qubit: &Matrix2<C64>) -> Self {
        let d = boson.dim();
        let dense_rows: Vec<Vec<(usize, C64)>> = (0..2 * d)
            .map(|i| {
                let (m, a) = (i / 2, i % 2);
                let mut row = Vec::new();
                for (k, vals) in boson.bands() {
                    let mc = m as isize + k;
                    if mc < 0 || mc >= d as isize || vals[m] == ZERO {
                        continue;
                    }
                    for b in 0..2 {
                        let q = qubit[(a, b)];
                        if q != ZERO {
                            row.push((2 * mc as usize + b, vals[m] * q));
                        }
                    }
                }
                row.sort_by_key(|e| e.0);
                row
            })
            .collect();
        Self::from_rows(2 * d, dense_rows)
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != ZERO)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(m.nrows(), rows)
    }

    fn from_rows(dim: usize, rows: Vec<Vec<(usize, C64)>>) -> Self {
        let mut row_start = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for r in rows {
            for (c, v) in r {
                cols.push(c);
                vals.push(v);
            }
            row_start.push(cols.len());
        }
        Self {
            dim,
            row_start,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            vals: self.vals.iter().map(|v| v * c).collect(),
            ..self.clone()
        }
    }

    /// Largest absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.dim)
            .map(|i| {
                self.vals[self.row_start[i]..self.row_start[i + 1]]
                    .iter()
                    .map(|v| v.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for k in self.row_start[i]..self.row_start[i + 1] {
                m[(i, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

/// Hybrid generator `G` of a conditional gate, so that the gate is `exp(i s G)`.
pub fn gate_generator(gate: &GateSpec, space: FockSpace) -> Option<SparseOperator> {
    let d = space.dim();
    let phi = gate.phi;
    match gate.kind {
        GateKind::XSigmaPhi => Some(SparseOperator::kron(
            &Banded::position(d),
            &Matrix2::new(ZERO, C64::from_polar(1.0, -phi), C64::from_polar(1.0, phi), ZERO),
        )),
        GateKind::PSigmaX => Some(SparseOperator::kron(
            &Banded::momentum(d),
            &Matrix2::new(ZERO, C64::new(1.0, 0.0), C64::new(1.0, 0.0), ZERO),
        )),
        GateKind::UnconditionalDisplacement => None,
    }
}

/// Jump operator acting as `(L x)_i = coef[i] x[i + shift]`, with `coef`
/// zero wherever the source index would fall outside the space.
struct Monomial {
    shift: usize,
    coef: Vec<f64>,
}

/// Everything about the dissipator that the right-hand side needs.
struct Dissipator {
    jumps: Vec<Monomial>,
    /// `-(L†L)_ii / 2` summed over all jumps, including the diagonal ones.
    half_decay: Vec<f64>,
    /// Diagonal jumps `√γ l` as `(γ, l)`: the cross term `γ l_i l_j`.
    diagonal: Vec<(f64, Vec<f64>)>,
    /// Rough rate bounds for the jump and diagonal parts.
    jump_rate: f64,
    diagonal_rate: f64,
}

impl Dissipator {
    fn new(model: &NoiseModel, space: FockSpace) -> Self {
        let d = space.dim();
        let n = 2 * d;
        let mut jumps = Vec::new();
        let mut half_decay = vec![0.0; n];
        let mut diagonal = Vec::new();
        let (mut jump_rate, mut diagonal_rate) = (0.0, 0.0);
        for ch in &model.channels {
            let g = ch.rate_gamma;
            if g == 0.0 {
                continue;
            }
            let sg = g.sqrt();
            let coef: Vec<f64>;
            let mut shift = 0;
            match ch.kind {
                ChannelKind::BosonLoss => {
                    // a|m⟩ = √m |m-1⟩: row (m, q) reads (m+1, q)
                    shift = 2;
                    coef = (0..n)
                        .map(|i| if i + 2 < n { sg * ((i / 2 + 1) as f64).sqrt() } else { 0.0 })
                        .collect();
                    jump_rate += g * d as f64;
                }
                ChannelKind::QubitDecay => {
                    shift = 1;
                    coef = (0..n).map(|i| if i % 2 == 0 { sg } else { 0.0 }).collect();
                    jump_rate += g;
                }
                ChannelKind::BosonDephasing => {
                    coef = (0..n).map(|i| (2 * (i / 2) + 1) as f64).collect();
                    diagonal_rate += 2.0 * g * (2 * d) as f64 * (2 * d) as f64;
                }
                ChannelKind::QubitDephasing => {
                    coef = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
                    diagonal_rate += 2.0 * g;
                }
            }
            if shift == 0 {
                for (h, l) in half_decay.iter_mut().zip(&coef) {
                    *h -= 0.5 * g * l * l;
                }
                diagonal.push((g, coef));
            } else {
                // L†L is diagonal with entry |coef_k|² at the source index k + shift
                for i in 0..n - shift {
                    half_decay[i + shift] -= 0.5 * coef[i] * coef[i];
                }
                jumps.push(Monomial { shift, coef });
            }
        }
        Self {
            jumps,
            half_decay,
            diagonal,
            jump_rate,
            diagonal_rate,
        }
    }

    /// The part of `L(ρ)_ij` proportional to `ρ_ij`; never positive.
    fn decay(&self, i: usize, j: usize) -> f64 {
        let cross: f64 = self.diagonal.iter().map(|(g, l)| g * l[i] * l[j]).sum();
        self.half_decay[i] + self.half_decay[j] + cross
    }
}

/// Complex square matrix as separate real and imaginary parts, column-major.
struct Field {
    n: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Field {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            re: vec![0.0; n * n],
            im: vec![0.0; n * n],
        }
    }

    fn from_matrix(m: &DMatrix<C64>) -> Self {
        Self {
            n: m.nrows(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    fn to_matrix(&self) -> DMatrix<C64> {
        let n = self.n;
        DMatrix::from_iterator(n, n, self.re.iter().zip(&self.im).map(|(&a, &b)| C64::new(a, b)))
    }
}

/// A window of recent columns, column `j` living in slot `j % slots`.
struct Ring {
    n: usize,
    slots: usize,
    re: Vec<f64>,
    im: Vec<f64>,
}

impl Ring {
    fn new(n: usize, slots: usize) -> Self {
        Self {
            n,
            slots,
            re: vec![0.0; n * slots],
            im: vec![0.0; n * slots],
        }
    }

    #[inline]
    fn offset(&self, j: usize) -> usize {
        (j % self.slots) * self.n
    }
}

/// Read access to whole columns of either a full matrix or a ring.
trait Columns {
    fn col(&self, j: usize) -> (&[f64], &[f64]);
}

impl Columns for Field {
    #[inline]
    fn col(&self, j: usize) -> (&[f64], &[f64]) {
        let r = j * self.n..(j + 1) * self.n;
        (&self.re[r.clone()], &self.im[r])
    }
}

impl Columns for Ring {
    #[inline]
    fn col(&self, j: usize) -> (&[f64], &[f64]) {
        let o = self.offset(j);
        (&self.re[o..o + self.n], &self.im[o..o + self.n])
    }
}

trait ColumnsMut: Columns {
    fn col_mut(&mut self, j: usize) -> (&mut [f64], &mut [f64]);
    /// Entry `(i, j)` with `i < j` from the stored `(j, i)`.
    fn mirror_into(&mut self, i: usize, j: usize);
}

impl ColumnsMut for Field {
    #[inline]
    fn col_mut(&mut self, j: usize) -> (&mut [f64], &mut [f64]) {
        let r = j * self.n..(j + 1) * self.n;
        (&mut self.re[r.clone()], &mut self.im[r])
    }
    fn mirror_into(&mut self, i: usize, j: usize) {
        let n = self.n;
        self.re[i + j * n] = self.re[j + i * n];
        self.im[i + j * n] = -self.im[j + i * n];
    }
}

impl ColumnsMut for Ring {
    #[inline]
    fn col_mut(&mut self, j: usize) -> (&mut [f64], &mut [f64]) {
        let o = self.offset(j);
        (&mut self.re[o..o + self.n], &mut self.im[o..o + self.n])
    }
    fn mirror_into(&mut self, i: usize, j: usize) {
        let (a, b) = (self.offset(j) + i, self.offset(i) + j);
        self.re[a] = self.re[b];
        self.im[a] = -self.im[b];
    }
}

struct Band {
    k: isize,
    re: Vec<f64>,
    im: Vec<f64>,
}

/// `dρ/dt` for a fixed Hamiltonian and dissipator, evaluated one column at
/// a time.
///
/// Only entries on or below the diagonal, plus `margin` entries above it,
/// are stored; the rest of the matrix is implied by Hermiticity. Column `j`
/// of the result depends on columns `j - reach ..= j + reach` of the input.
struct Liouvillian {
    n: usize,
    /// `-iH` as diagonals: `c[i] = (-iH)[i, i + k]`.
    bands: Vec<Band>,
    margin: usize,
    reach: usize,
    diss: Dissipator,
    /// Column-major `decay(i, j)` when that part is integrated exactly and
    /// left out of [`Liouvillian::column`].
    decay: Option<Vec<f64>>,
}

impl Liouvillian {
    fn new(h: &SparseOperator, diss: Dissipator, split: bool) -> Self {
        let n = h.dim();
        let mut bands: Vec<Band> = Vec::new();
        for i in 0..n {
            for p in h.row_start[i]..h.row_start[i + 1] {
                let k = h.cols[p] as isize - i as isize;
                let v = h.vals[p] * C64::new(0.0, -1.0);
                let b = match bands.iter().position(|b| b.k == k) {
                    Some(b) => &mut bands[b],
                    None => {
                        bands.push(Band {
                            k,
                            re: vec![0.0; n],
                            im: vec![0.0; n],
                        });
                        bands.last_mut().expect("just pushed")
                    }
                };
                b.re[i] += v.re;
                b.im[i] += v.im;
            }
        }
        bands.sort_by_key(|b| b.k);
        let margin = bands.iter().map(|b| b.k.unsigned_abs()).max().unwrap_or(0);
        let shift = diss.jumps.iter().map(|m| m.shift).max().unwrap_or(0);
        let decay = split.then(|| (0..n * n).map(|k| diss.decay(k % n, k / n)).collect());
        Self {
            n,
            bands,
            margin,
            reach: margin.max(shift).max(1),
            diss,
            decay,
        }
    }

    /// First stored row of column `j`.
    #[inline]
    fn lo(&self, j: usize) -> usize {
        j.saturating_sub(self.margin)
    }

    /// Rows `j..n` of column `j` of `L(ρ)`.
    fn column(&self, j: usize, rho: &impl Columns, ore: &mut [f64], oim: &mut [f64]) {
        let n = self.n;
        let dg = &self.diss;
        let len = n - j;
        let ore = &mut ore[j..n];
        let oim = &mut oim[j..n];
        let (cre, cim) = rho.col(j);
        let rre = &cre[j..n];
        let rim = &cim[j..n];

        if self.decay.is_some() {
            ore.fill(0.0);
            oim.fill(0.0);
        } else {
            let hj = dg.half_decay[j];
            let hd = &dg.half_decay[j..];
            for i in 0..len {
                let f = hd[i] + hj;
                ore[i] = rre[i] * f;
                oim[i] = rim[i] * f;
            }
            for (g, l) in &dg.diagonal {
                let f = g * l[j];
                let l = &l[j..];
                for i in 0..len {
                    let c = f * l[i];
                    ore[i] += rre[i] * c;
                    oim[i] += rim[i] * c;
                }
            }
        }
        for m in &dg.jumps {
            let s = m.shift;
            let cj = m.coef[j];
            if cj == 0.0 || j + s >= n {
                continue;
            }
            let l = len - s;
            let (sre, sim) = rho.col(j + s);
            let (sre, sim) = (&sre[j + s..n], &sim[j + s..n]);
            let c = &m.coef[j..j + l];
            for i in 0..l {
                let f = cj * c[i];
                ore[i] += sre[i] * f;
                oim[i] += sim[i] * f;
            }
        }
        // -iHρ: rows i ≥ j read ρ[i + k, j]
        for b in &self.bands {
            let k = b.k;
            let start = if k < 0 { j.max((-k) as usize) } else { j };
            let end = if k > 0 { n - k as usize } else { n };
            if start >= end {
                continue;
            }
            let l = end - start;
            let src = (start as isize + k) as usize;
            let (sre, sim) = (&cre[src..src + l], &cim[src..src + l]);
            let (bre, bim) = (&b.re[start..end], &b.im[start..end]);
            let (ore, oim) = (&mut ore[start - j..end - j], &mut oim[start - j..end - j]);
            for i in 0..l {
                ore[i] += bre[i] * sre[i] - bim[i] * sim[i];
                oim[i] += bre[i] * sim[i] + bim[i] * sre[i];
            }
        }
        // (-iHρ)† = iρH: column j gathers conj(c_k[j]) ρ[:, j + k]
        for b in &self.bands {
            let jk = j as isize + b.k;
            if jk < 0 || jk >= n as isize {
                continue;
            }
            let (fre, fim) = (b.re[j], -b.im[j]);
            if fre == 0.0 && fim == 0.0 {
                continue;
            }
            let (sre, sim) = rho.col(jk as usize);
            let (sre, sim) = (&sre[j..n], &sim[j..n]);
            for i in 0..len {
                ore[i] += fre * sre[i] - fim * sim[i];
                oim[i] += fre * sim[i] + fim * sre[i];
            }
        }
        oim[0] = 0.0;
    }

    /// Computes column `j` into `out` and fills its entries above the
    /// diagonal from the (already computed) earlier columns.
    fn column_into(&self, j: usize, rho: &impl Columns, out: &mut impl ColumnsMut) {
        let (ore, oim) = out.col_mut(j);
        self.column(j, rho, ore, oim);
        for i in self.lo(j)..j {
            out.mirror_into(i, j);
        }
    }

    /// Column `j` of `f⊙y + h Σ a_r f_r⊙k_r` on the stored rows, where a
    /// missing factor table means all ones.
    fn combine_column(
        &self,
        j: usize,
        dst: &mut impl ColumnsMut,
        y: &Field,
        h: f64,
        yf: Option<&[f64]>,
        terms: &[(f64, &Ring, Option<&[f64]>)],
    ) {
        let lo = self.lo(j);
        let col = j * self.n + lo..(j + 1) * self.n;
        let (dre, dim) = dst.col_mut(j);
        let (yre, yim) = y.col(j);
        let (dre, dim) = (&mut dre[lo..], &mut dim[lo..]);
        match yf {
            None => {
                dre.copy_from_slice(&yre[lo..]);
                dim.copy_from_slice(&yim[lo..]);
            }
            Some(f) => {
                let f = &f[col.clone()];
                for i in 0..dre.len() {
                    dre[i] = f[i] * yre[lo + i];
                    dim[i] = f[i] * yim[lo + i];
                }
            }
        }
        for (a, k, f) in terms {
            let a = h * a;
            let (kre, kim) = k.col(j);
            let (kre, kim) = (&kre[lo..], &kim[lo..]);
            match f {
                None => {
                    for i in 0..dre.len() {
                        dre[i] += a * kre[i];
                        dim[i] += a * kim[i];
                    }
                }
                Some(f) => {
                    let f = &f[col.clone()];
                    for i in 0..dre.len() {
                        let c = a * f[i];
                        dre[i] += c * kre[i];
                        dim[i] += c * kim[i];
                    }
                }
            }
        }
    }

    /// Sum over rows `j..n` of the squared, weighted local error in column `j`.
    fn error_column(
        &self,
        j: usize,
        y: &Field,
        ynew: &Field,
        k: &[Ring],
        factors: Option<&Lawson>,
        h: f64,
        tol: &Tolerances,
        ere: &mut [f64],
        eim: &mut [f64],
    ) -> f64 {
        let n = self.n;
        let len = n - j;
        let (ere, eim) = (&mut ere[..len], &mut eim[..len]);
        ere.iter_mut().for_each(|x| *x = 0.0);
        eim.iter_mut().for_each(|x| *x = 0.0);
        for (r, (wk, kk)) in ERR.iter().zip(k).enumerate() {
            if *wk == 0.0 {
                continue;
            }
            let a = wk * h;
            let (kre, kim) = kk.col(j);
            let (kre, kim) = (&kre[j..], &kim[j..]);
            match factors.and_then(|l| l.error_table(r)) {
                None => {
                    for i in 0..len {
                        ere[i] += a * kre[i];
                        eim[i] += a * kim[i];
                    }
                }
                Some(f) => {
                    let f = &f[j * n + j..(j + 1) * n];
                    for i in 0..len {
                        ere[i] += a * f[i] * kre[i];
                        eim[i] += a * f[i] * kim[i];
                    }
                }
            }
        }
        let (yre, yim) = y.col(j);
        let (nre, nim) = ynew.col(j);
        let (yre, yim, nre, nim) = (&yre[j..], &yim[j..], &nre[j..], &nim[j..]);
        let mut acc = 0.0;
        for i in 0..len {
            let a = yre[i] * yre[i] + yim[i] * yim[i];
            let b = nre[i] * nre[i] + nim[i] * nim[i];
            let sc = tol.atol + tol.rtol * a.max(b).sqrt();
            acc += (ere[i] * ere[i] + eim[i] * eim[i]) / (sc * sc);
        }
        acc
    }
}

/// Step-size control of the Dormand-Prince integrator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            max_steps: 200_000,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvolveStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evaluations: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Makes `m` exactly Hermitian by averaging with its adjoint.
fn symmetrize(m: &mut [C64], n: usize) {
    for j in 0..n {
        m[j + j * n].im = 0.0;
        for i in j + 1..n {
            let a = m[i + j * n];
            let b = m[j + i * n];
            let s = (a + b.conj()) * 0.5;
            m[i + j * n] = s;
            m[j + i * n] = s.conj();
        }
    }
}

/// Copies the lower triangle onto the upper one.
fn mirror_lower(m: &mut [C64], n: usize) {
    for j in 0..n {
        m[j + j * n].im = 0.0;
        for i in j + 1..n {
            m[j + i * n] = m[i + j * n].conj();
        }
    }
}

/// Integrates the master equation for `duration` (same time unit as the
/// channel rates; `hamiltonian` in inverse units).
pub fn evolve(
    rho: &HybridState,
    hamiltonian: &SparseOperator,
    duration: f64,
    model: &NoiseModel,
) -> Result<HybridState> {
    evolve_with(rho, hamiltonian, duration, model, &Tolerances::default()).map(|(s, _)| s)
}

/// Stage coefficients `a[s][r]`; the last row gives the fifth-order solution.
const STAGES: [&[f64]; 7] = [
    &[],
    &[A21],
    &[A31, A32],
    &[A41, A42, A43],
    &[A51, A52, A53, A54],
    &[A61, A62, A63, A64, A65],
    &[B1, 0.0, B3, B4, B5, B6],
];
const ERR: [f64; 7] = [E1, 0.0, E3, E4, E5, E6, E7];
/// Stage times as fractions of the step.
const NODES: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];

/// Integrating-factor (Lawson) form of the same scheme: with `ρ' = d⊙ρ +
/// N(ρ)` and `d` elementwise, every stage input and the error estimate
/// carry factors `exp(τ h d)` for the elapsed fraction `τ` of the step.
struct Lawson {
    taus: Vec<f64>,
    tables: Vec<Vec<f64>>,
    /// Table index for `y` in stage `s`, and for `k_r` in stage `s`.
    of_y: [Option<usize>; 7],
    of_k: [[Option<usize>; 7]; 7],
    of_err: [Option<usize>; 7],
}

impl Lawson {
    fn new(n: usize) -> Self {
        let mut taus: Vec<f64> = Vec::new();
        let mut index = |tau: f64| -> Option<usize> {
            if tau.abs() < 1e-12 {
                return None;
            }
            Some(match taus.iter().position(|t| (t - tau).abs() < 1e-12) {
                Some(p) => p,
                None => {
                    taus.push(tau);
                    taus.len() - 1
                }
            })
        };
        let mut of_y = [None; 7];
        let mut of_k = [[None; 7]; 7];
        let mut of_err = [None; 7];
        for s in 1..7 {
            of_y[s] = index(NODES[s]);
            for (r, a) in STAGES[s].iter().enumerate() {
                if *a != 0.0 {
                    of_k[s][r] = index(NODES[s] - NODES[r]);
                }
            }
        }
        for (r, e) in ERR.iter().enumerate() {
            if *e != 0.0 {
                of_err[r] = index(1.0 - NODES[r]);
            }
        }
        let tables = taus.iter().map(|_| vec![0.0; n * n]).collect();
        Self {
            taus,
            tables,
            of_y,
            of_k,
            of_err,
        }
    }

    /// Fills the tables for step `h` on the stored entries.
    fn prepare(&mut self, lv: &Liouvillian, decay: &[f64], h: f64) {
        let n = lv.n;
        for (tab, tau) in self.tables.iter_mut().zip(&self.taus) {
            let th = tau * h;
            for j in 0..n {
                let r = j * n + lv.lo(j)..(j + 1) * n;
                for (t, d) in tab[r.clone()].iter_mut().zip(&decay[r]) {
                    *t = (th * d).exp();
                }
            }
        }
    }

    fn error_table(&self, r: usize) -> Option<&[f64]> {
        self.of_err[r].map(|t| self.tables[t].as_slice())
    }
}

/// Scratch for one Dormand-Prince step.
struct StepBuffers {
    /// Stage inputs 2..=6; stage 1 is `y` and stage 7 is `ynew`.
    z: Vec<Ring>,
    k: Vec<Ring>,
    ere: Vec<f64>,
    eim: Vec<f64>,
    lawson: Option<Lawson>,
}

impl StepBuffers {
    fn new(n: usize, reach: usize, split: bool) -> Self {
        let lag = reach;
        Self {
            z: (0..5).map(|_| Ring::new(n, 2 * reach + 2)).collect(),
            k: (0..7).map(|_| Ring::new(n, 7 * lag + 2 * reach + 2)).collect(),
            ere: vec![0.0; n],
            eim: vec![0.0; n],
            lawson: split.then(|| Lawson::new(n)),
        }
    }
}

/// One trial step from `y` to `ynew`; returns the RMS error estimate.
///
/// The seven stages run as a skewed sweep over columns: stage `s` trails
/// stage `s - 1` by `reach` columns, which is exactly what column `j` of the
/// right-hand side needs. Stage inputs and slopes then only live in short
/// column windows, and each step streams `y` and `ynew` through memory once.
fn dopri_step(lv: &Liouvillian, y: &Field, ynew: &mut Field, h: f64, buf: &mut StepBuffers, tol: &Tolerances) -> f64 {
    let n = lv.n;
    let w = lv.reach;
    let lag = w;
    let mut acc = 0.0;
    let StepBuffers { z, k, ere, eim, lawson } = buf;
    if let (Some(l), Some(d)) = (lawson.as_mut(), lv.decay.as_deref()) {
        l.prepare(lv, d, h);
    }
    let lawson = lawson.as_ref();
    let table = |i: Option<usize>| lawson.zip(i).map(|(l, t)| l.tables[t].as_slice());
    for c in 0..n + 6 * lag + w + 1 {
        for s in 0..7 {
            let shift = s * lag;
            if c >= shift && c - shift < n {
                let j = c - shift;
                if s > 0 {
                    let terms: Vec<(f64, &Ring, Option<&[f64]>)> = STAGES[s]
                        .iter()
                        .zip(k.iter())
                        .enumerate()
                        .filter(|(_, (a, _))| **a != 0.0)
                        .map(|(r, (a, kr))| (*a, kr, lawson.and_then(|l| table(l.of_k[s][r]))))
                        .collect();
                    let yf = lawson.and_then(|l| table(l.of_y[s]));
                    if s == 6 {
                        lv.combine_column(j, ynew, y, h, yf, &terms);
                    } else {
                        lv.combine_column(j, &mut z[s - 1], y, h, yf, &terms);
                    }
                }
            }
            if c >= shift + w && c - shift - w < n {
                let j = c - shift - w;
                let out = &mut k[s];
                match s {
                    0 => lv.column_into(j, y, out),
                    6 => lv.column_into(j, &*ynew, out),
                    _ => lv.column_into(j, &z[s - 1], out),
                }
                if s == 6 {
                    acc += lv.error_column(j, y, ynew, k, lawson, h, tol, ere, eim);
                }
            }
        }
    }
    (acc / (n * (n + 1) / 2) as f64).sqrt()
}

/// [`evolve`] with explicit tolerances, also returning step statistics.
///
/// The state is stored through its lower triangle, so every accepted step
/// is Hermitian by construction; the full matrix is rebuilt at the end.
pub fn evolve_with(
    rho: &HybridState,
    hamiltonian: &SparseOperator,
    duration: f64,
    model: &NoiseModel,
    tol: &Tolerances,
) -> Result<(HybridState, EvolveStats)> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::Integration {
            t: 0.0,
            reason: format!("invalid duration {duration}"),
        });
    }
    let space = FockSpace::new(rho.fock_dim())?;
    if hamiltonian.dim() != space.hybrid_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.hybrid_dim(),
            got: hamiltonian.dim(),
        });
    }
    let mut m = rho.to_density();
    let n = m.nrows();
    symmetrize(m.as_mut_slice(), n);
    let mut stats = EvolveStats::default();
    if duration == 0.0 {
        return Ok((HybridState::Mixed(m), stats));
    }
    let diss = Dissipator::new(model, space);
    let h_norm = hamiltonian.inf_norm() + diss.jump_rate;
    // a stiff diagonal part is integrated exactly
    let split = diss.diagonal_rate > h_norm;
    let scale = if split { h_norm } else { h_norm + diss.diagonal_rate };
    let lv = Liouvillian::new(hamiltonian, diss, split);

    let mut y = Field::from_matrix(&m);
    drop(m);
    let mut ynew = Field::zeros(n);
    let mut buf = StepBuffers::new(n, lv.reach, split);

    let mut t = 0.0;
    let mut h = (0.5 / scale.max(1e-300)).min(duration);
    let mut err_prev: f64 = 1e-4;
    let h_min = 1e-13 * duration;
    while t < duration {
        if stats.accepted + stats.rejected >= tol.max_steps {
            return Err(Error::Integration {
                t,
                reason: format!("step budget {} exhausted", tol.max_steps),
            });
        }
        let last = t + h >= duration * (1.0 - 1e-14);
        if last {
            h = duration - t;
        }
        let err = dopri_step(&lv, &y, &mut ynew, h, &mut buf, tol);
        stats.rhs_evaluations += 7;
        if !err.is_finite() {
            return Err(Error::Integration {
                t,
                reason: "non-finite error estimate".into(),
            });
        }
        if err <= 1.0 {
            t = if last { duration } else { t + h };
            for j in 0..n {
                ynew.im[j + j * n] = 0.0;
            }
            std::mem::swap(&mut y, &mut ynew);
            stats.accepted += 1;
            let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err.max(1e-4);
        } else {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
        if h < h_min && t < duration {
            return Err(Error::Integration {
                t,
                reason: format!("step size {h:.3e} underflow"),
            });
        }
    }
    let mut out = y.to_matrix();
    mirror_lower(out.as_mut_slice(), n);
    Ok((HybridState::Mixed(out), stats))
}

/// Conjugates every column and then every row by `D(γ)`.
fn displace_density(rho: &DMatrix<C64>, gamma: C64) -> DMatrix<C64> {
    let n = rho.nrows();
    let d = n / 2;
    let act = |v: &[C64]| -> Vec<C64> {
        let c0: Vec<C64> = v.iter().step_by(2).copied().collect();
        let c1: Vec<C64> = v.iter().skip(1).step_by(2).copied().collect();
        let (a, b) = (displace(&c0, gamma), displace(&c1, gamma));
        (0..2 * d).map(|i| if i % 2 == 0 { a[i / 2] } else { b[i / 2] }).collect()
    };
    let mut half = DMatrix::zeros(n, n);
    for j in 0..n {
        half.column_mut(j).copy_from_slice(&act(rho.column(j).as_slice()));
    }
    let adj = half.adjoint();
    let mut full = DMatrix::zeros(n, n);
    for j in 0..n {
        full.column_mut(j).copy_from_slice(&act(adj.column(j).as_slice()));
    }
    let mut out = full.adjoint();
    symmetrize(out.as_mut_slice(), n);
    out
}

/// One gate as a timed Hamiltonian. Unconditional displacements are frame
/// changes and are applied instantly without noise.
pub fn noisy_gate(rho: &HybridState, gate: &GateSpec, model: &NoiseModel) -> Result<HybridState> {
    noisy_gate_with(rho, gate, model, &Tolerances::default()).map(|(s, _)| s)
}

pub fn noisy_gate_with(
    rho: &HybridState,
    gate: &GateSpec,
    model: &NoiseModel,
    tol: &Tolerances,
) -> Result<(HybridState, EvolveStats)> {
    let space = FockSpace::new(rho.fock_dim())?;
    if gate.strength == 0.0 {
        return Ok((HybridState::Mixed(rho.to_density()), EvolveStats::default()));
    }
    match gate_generator(gate, space) {
        None => {
            let g = C64::from_polar(gate.strength, gate.phi);
            Ok((
                HybridState::Mixed(displace_density(&rho.to_density(), g)),
                EvolveStats::default(),
            ))
        }
        Some(gen) => {
            let t = model.gate_time;
            let h = gen.scaled(C64::new(-gate.strength.signum() / t, 0.0));
            evolve_with(rho, &h, gate.strength.abs() * t, model, tol)
        }
    }
}

/// Projects the qubit onto `q`; returns the conditional state and the
/// probability of the outcome.
pub fn project_qubit(rho: &DMatrix<C64>, q: [C64; 2]) -> Result<(DMatrix<C64>, f64)> {
    let d = rho.nrows() / 2;
    // ⟨q| acting on the qubit index from both sides gives the boson block
    let block = DMatrix::from_fn(d, d, |i, j| {
        let mut s = ZERO;
        for a in 0..2 {
            for b in 0..2 {
                s += q[a].conj() * rho[(2 * i + a, 2 * j + b)] * q[b];
            }
        }
        s
    });
    let p: f64 = block.diagonal().iter().map(|x| x.re).sum();
    if !(p >= MIN_SUCCESS_PROBABILITY) {
        return Err(Error::DegeneratePostselection(p));
    }
    let out = DMatrix::from_fn(2 * d, 2 * d, |i, j| block[(i / 2, j / 2)] * q[i % 2] * q[j % 2].conj() / p);
    Ok((out, p))
}

#[derive(Clone, Debug)]
pub struct NoisyRun {
    /// Oscillator state, qubit traced out. Conditional on success when
    /// postselecting.
    pub rho: BosonDensity,
    pub hybrid: HybridState,
    pub success_probability: f64,
    pub space: FockSpace,
    /// `|tr ρ − 1|` after each gate, before any projection.
    pub trace_errors: Vec<f64>,
    pub stats: EvolveStats,
}

/// Runs `gates` on `rho`. When `expected` is given, the qubit is projected
/// onto successive entries after each disentangling gate.
pub fn noisy_sequence(
    rho: HybridState,
    gates: &[GateSpec],
    model: &NoiseModel,
    expected: Option<&[[C64; 2]]>,
    tol: &Tolerances,
) -> Result<(HybridState, f64, Vec<f64>, EvolveStats)> {
    let mut state = rho;
    let mut prob = 1.0;
    let mut trace_errors = Vec::with_capacity(gates.len());
    let mut stats = EvolveStats::default();
    let mut next_check = 0;
    for g in gates {
        let (s, st) = noisy_gate_with(&state, g, model, tol)?;
        stats.accepted += st.accepted;
        stats.rejected += st.rejected;
        stats.rhs_evaluations += st.rhs_evaluations;
        trace_errors.push((s.trace() - 1.0).abs());
        state = s;
        if g.label == GateLabel::Disentangle {
            if let Some(exp) = expected {
                let q = *exp.get(next_check).ok_or_else(|| {
                    Error::Degenerate("fewer expected qubit states than disentangling gates".into())
                })?;
                let (m, p) = project_qubit(&state.to_density(), q)?;
                prob *= p;
                if prob < MIN_SUCCESS_PROBABILITY {
                    return Err(Error::DegeneratePostselection(prob));
                }
                state = HybridState::Mixed(m);
            }
            next_check += 1;
        }
    }
    Ok((state, prob, trace_errors, stats))
}

/// Fock dimension used for open-system runs: large enough that noiseless
/// figures of merit agree with the default protocol space to about 1e-3 dB.
pub fn noise_fock_dim(n_rounds: usize, r: f64) -> usize {
    let need = 4.0 * (2.0 * r).exp() + 16.0 * 2f64.powi(n_rounds as i32);
    (need.ceil() as usize).max(120)
}

/// Executes an `n`-round schedule from `S(r)|0⟩ ⊗ |0⟩` under `model`.
pub fn noisy_run(
    n: usize,
    u: &[f64],
    lattice: &LatticeSpec,
    r: f64,
    model: &NoiseModel,
    postselect: bool,
    space: Option<FockSpace>,
) -> Result<NoisyRun> {
    let schedule = build_schedule(n, u, lattice)?;
    let space = match space {
        Some(s) => s,
        None => FockSpace::new(noise_fock_dim(n, r))?,
    };
    noisy_schedule(&schedule, space, r, model, postselect, &Tolerances::default())
}

pub fn noisy_schedule(
    schedule: &GateSchedule,
    space: FockSpace,
    r: f64,
    model: &NoiseModel,
    postselect: bool,
    tol: &Tolerances,
) -> Result<NoisyRun> {
    let expected = if postselect {
        Some(run_in(schedule, space, r)?.expected_qubits)
    } else {
        None
    };
    let input = HybridState::product(&squeezed_vacuum(space, r), schedule.qubit_init)?;
    let (hybrid, p, trace_errors, stats) =
        noisy_sequence(input, &schedule.gates, model, expected.as_deref(), tol)?;
    let rho = partial_trace_qubit(&hybrid).normalized();
    Ok(NoisyRun {
        rho,
        hybrid,
        success_probability: p,
        space,
        trace_errors,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{db_to_r, vacuum};
    use crate::protocol::apply_gate;
    use std::f64::consts::PI;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    /// Jump operators written out densely on the hybrid index `2m + q`.
    fn dense_jumps(model: &NoiseModel, d: usize) -> Vec<DMatrix<C64>> {
        let n = 2 * d;
        let mut out = Vec::new();
        for ch in &model.channels {
            let sg = ch.rate_gamma.sqrt();
            let mut l = DMatrix::<C64>::zeros(n, n);
            for m in 0..d {
                for q in 0..2 {
                    let i = 2 * m + q;
                    match ch.kind {
                        ChannelKind::BosonLoss if m + 1 < d => {
                            l[(i, i + 2)] = c(sg * ((m + 1) as f64).sqrt());
                        }
                        ChannelKind::BosonDephasing => l[(i, i)] = c(sg * (2 * m + 1) as f64),
                        ChannelKind::QubitDephasing => l[(i, i)] = c(if q == 0 { sg } else { -sg }),
                        ChannelKind::QubitDecay if q == 0 => l[(i, i + 1)] = c(sg),
                        _ => {}
                    }
                }
            }
            out.push(l);
        }
        out
    }

    /// `exp(L t) vec(ρ)` with the superoperator built by Kronecker products.
    fn dense_reference(rho: &DMatrix<C64>, h: &DMatrix<C64>, jumps: &[DMatrix<C64>], t: f64) -> DMatrix<C64> {
        let n = rho.nrows();
        let id = DMatrix::<C64>::identity(n, n);
        let mi = C64::new(0.0, -1.0);
        let mut sup = (id.kronecker(h) - h.transpose().kronecker(&id)) * mi;
        for l in jumps {
            let ld = l.adjoint();
            let ll = &ld * l;
            sup += l.conjugate().kronecker(l) - (id.kronecker(&ll) + ll.transpose().kronecker(&id)) * c(0.5);
        }
        let vec = DMatrix::from_column_slice(n * n, 1, rho.as_slice());
        let out = (sup * c(t)).exp() * vec;
        DMatrix::from_column_slice(n, n, out.as_slice())
    }

    fn random_state(n: usize, seed: u64) -> DMatrix<C64> {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let a = DMatrix::from_fn(n, n, |_, _| C64::new(next(), next()));
        let m = &a * a.adjoint();
        let t: f64 = m.diagonal().iter().map(|x| x.re).sum();
        m / c(t)
    }

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        let a = random_state(n, seed) * c(n as f64);
        let b = random_state(n, seed ^ 0xabcdef) * c(n as f64);
        // a - b is Hermitian with both signs in the spectrum
        a - b
    }

    fn all_channels(g: f64) -> NoiseModel {
        let ch: Vec<LindbladChannel> = ChannelKind::ALL
            .iter()
            .enumerate()
            .map(|(k, &kind)| LindbladChannel {
                kind,
                rate_gamma: g * (k + 1) as f64,
            })
            .collect();
        NoiseModel::new(&ch, 1.0).unwrap()
    }

    fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn matches_dense_superoperator() {
        let d = 5;
        let rho = random_state(2 * d, 7);
        let h = random_hermitian(2 * d, 11);
        let model = all_channels(0.05);
        let t = 0.8;
        let (got, stats) = evolve_with(
            &HybridState::Mixed(rho.clone()),
            &SparseOperator::from_dense(&h),
            t,
            &model,
            &Tolerances::default(),
        )
        .unwrap();
        let want = dense_reference(&rho, &h, &dense_jumps(&model, d), t);
        assert!(max_diff(&got.to_density(), &want) < 1e-8, "{}", max_diff(&got.to_density(), &want));
        assert!(stats.accepted > 0);
    }

    #[test]
    fn stiff_dephasing_matches_dense_superoperator() {
        let d = 6;
        let rho = random_state(2 * d, 3);
        let h = random_hermitian(2 * d, 5);
        let g = 20.0;
        let model = NoiseModel::single(ChannelKind::BosonDephasing, g).unwrap();
        let t = 1.5;
        let (got, stats) = evolve_with(
            &HybridState::Mixed(rho.clone()),
            &SparseOperator::from_dense(&h),
            t,
            &model,
            &Tolerances::default(),
        )
        .unwrap();
        let want = dense_reference(&rho, &h, &dense_jumps(&model, d), t);
        assert!(max_diff(&got.to_density(), &want) < 1e-8, "{}", max_diff(&got.to_density(), &want));
        assert!(stats.accepted > 0);
    }

    #[test]
    fn banded_generator_matches_dense_superoperator() {
        let d = 6;
        let space = FockSpace::new(d).unwrap();
        let g = GateSpec {
            kind: GateKind::XSigmaPhi,
            strength: 0.7,
            phi: 0.3,
            label: GateLabel::Prepare,
            round: 1,
        };
        let h = gate_generator(&g, space).unwrap();
        let rho = random_state(2 * d, 3);
        let model = all_channels(0.02);
        let (got, _) = evolve_with(&HybridState::Mixed(rho.clone()), &h, 1.3, &model, &Tolerances::default()).unwrap();
        let want = dense_reference(&rho, &h.to_dense(), &dense_jumps(&model, d), 1.3);
        assert!(max_diff(&got.to_density(), &want) < 1e-8);
    }

    #[test]
    fn loss_shrinks_a_coherent_state() {
        let space = FockSpace::new(40).unwrap();
        let alpha = C64::new(1.2, -0.7);
        let (g, t) = (0.4, 1.5);
        let coh = displace(&vacuum(space), alpha);
        let rho = HybridState::product(&coh, [c(1.0), c(0.0)]).unwrap();
        let model = NoiseModel::single(ChannelKind::BosonLoss, g).unwrap();
        let out = evolve(&rho, &SparseOperator::zeros(space.hybrid_dim()), t, &model).unwrap();
        let target = displace(&vacuum(space), alpha * (-g * t / 2.0).exp());
        let f = partial_trace_qubit(&out).overlap(&target);
        assert!(f > 1.0 - 1e-6, "fidelity {f}");
    }

    #[test]
    fn qubit_decay_is_exponential() {
        let space = FockSpace::new(3).unwrap();
        let rho = HybridState::product(&vacuum(space), [c(0.0), c(1.0)]).unwrap();
        let (g, t) = (0.9, 1.7);
        let model = NoiseModel::single(ChannelKind::QubitDecay, g).unwrap();
        let out = evolve(&rho, &SparseOperator::zeros(space.hybrid_dim()), t, &model).unwrap();
        let p1 = out.reduced_qubit()[(1, 1)].re;
        assert!((p1 - (-g * t).exp()).abs() < 1e-7, "{p1}");
    }

    #[test]
    fn noiseless_gate_equals_unitary() {
        let space = FockSpace::new(50).unwrap();
        let r = db_to_r(6.0);
        let input = HybridState::product(&squeezed_vacuum(space, r), [c(1.0), c(0.0)]).unwrap();
        let sched = build_schedule(2, &[0.0, 0.045], &LatticeSpec::square()).unwrap();
        for g in &sched.gates {
            let want = apply_gate(&input, g).unwrap();
            let got = noisy_gate(&input, g, &NoiseModel::noiseless()).unwrap();
            let f = match &want {
                HybridState::Pure(v) => v.dotc(&(got.to_density() * v)).re,
                HybridState::Mixed(_) => unreachable!(),
            };
            assert!(f > 1.0 - 1e-7, "{:?}: {f}", g.label);
        }
    }

    #[test]
    fn zero_strength_gate_is_identity() {
        let space = FockSpace::new(8).unwrap();
        let rho = HybridState::Mixed(random_state(16, 5));
        let g = GateSpec {
            kind: GateKind::PSigmaX,
            strength: 0.0,
            phi: 0.0,
            label: GateLabel::Disentangle,
            round: 1,
        };
        let out = noisy_gate(&rho, &g, &all_channels(0.3)).unwrap();
        assert_eq!(out.to_density(), rho.to_density());
        assert_eq!(space.hybrid_dim(), 16);
    }

    #[test]
    fn microwave_first_gate_loses_purity() {
        let p = preset("microwave_cavity").unwrap();
        let space = FockSpace::new(60).unwrap();
        let sched = build_schedule(2, &[0.0, 0.045], &LatticeSpec::square()).unwrap();
        let input = HybridState::product(&squeezed_vacuum(space, db_to_r(8.0)), sched.qubit_init).unwrap();
        let v1 = sched.gates.iter().find(|g| g.label == GateLabel::Displace).unwrap();
        let out = noisy_gate(&input, v1, &p.model).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-8);
        let m = out.to_density();
        let purity: f64 = m.iter().map(|x| x.norm_sqr()).sum();
        assert!(purity < 1.0 - 1e-4, "{purity}");
    }

    #[test]
    fn every_gate_keeps_trace_and_positivity() {
        let model = all_channels(2e-3);
        let sched = build_schedule(2, &[0.0, 0.045], &LatticeSpec::square()).unwrap();
        let space = FockSpace::new(40).unwrap();
        let mut state = HybridState::product(&squeezed_vacuum(space, db_to_r(5.0)), sched.qubit_init).unwrap();
        for g in &sched.gates {
            state = noisy_gate(&state, g, &model).unwrap();
            assert!((state.trace() - 1.0).abs() < 1e-8);
            let m = state.to_density();
            assert!(max_diff(&m, &m.adjoint()) < 1e-14);
            let low = nalgebra::SymmetricEigen::new(m).eigenvalues.min();
            assert!(low > -1e-8, "{:?}: {low}", g.label);
        }
    }

    /// Postselection on pure states: `(boson state, success probability)`.
    fn pure_postselected(n: usize, u: &[f64], r: f64, space: FockSpace) -> (Vec<C64>, f64) {
        let sched = build_schedule(n, u, &LatticeSpec::square()).unwrap();
        let expected = run_in(&sched, space, r).unwrap().expected_qubits;
        let mut st = HybridState::product(&squeezed_vacuum(space, r), sched.qubit_init).unwrap();
        let (mut p, mut k) = (1.0, 0);
        let mut psi = Vec::new();
        for g in &sched.gates {
            st = apply_gate(&st, g).unwrap();
            if g.label == GateLabel::Disentangle {
                let q = expected[k];
                k += 1;
                let (c0, c1) = st.components().unwrap();
                psi = c0.iter().zip(&c1).map(|(a, b)| q[0].conj() * a + q[1].conj() * b).collect();
                p *= psi.iter().map(|x| x.norm_sqr()).sum::<f64>();
                st = HybridState::product(&psi, q).unwrap();
            }
        }
        let norm = psi.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        (psi.iter().map(|x| x / norm).collect(), p)
    }

    #[test]
    fn noiseless_postselection_matches_pure_projection() {
        let (n, u, r) = (2, [0.0, 0.045], db_to_r(11.5));
        let space = FockSpace::new(noise_fock_dim(n, r)).unwrap();
        let run = noisy_run(n, &u, &LatticeSpec::square(), r, &NoiseModel::noiseless(), true, Some(space)).unwrap();
        let (psi, p) = pure_postselected(n, &u, r, space);
        assert!((run.success_probability - p).abs() < 1e-6);
        let f = run.rho.overlap(&psi);
        assert!(f > 1.0 - 1e-6, "{f}");
        assert!(run.success_probability > 0.99);
    }

    #[test]
    fn postselection_success_tends_to_one() {
        let mut last = 0.0;
        for db in [11.5, 16.0, 22.5] {
            let r = db_to_r(db);
            let (_, p) = pure_postselected(2, &[0.0, 0.045], r, FockSpace::for_protocol(2, r));
            assert!(p > last, "{db} dB: {p}");
            last = p;
        }
        assert!(last >= 0.999, "{last}");
    }

    #[test]
    fn presets_are_verbatim() {
        let ion = preset("trapped_ion").unwrap();
        assert_eq!(ion.gate_time, 11e-6);
        assert_eq!(ion.quoted.len(), 1);
        assert_eq!(ion.model.gamma_t(ChannelKind::BosonDephasing), 7.7e-5);
        let mw = preset("microwave_cavity").unwrap();
        let gts: Vec<f64> = mw.quoted.iter().map(|q| q.gamma_t).collect();
        assert_eq!(gts, vec![6.8e-3, 5.7e-3, 1.4e-3]);
        let loss = mw.quoted.iter().find(|q| q.kind == ChannelKind::BosonLoss).unwrap();
        assert_eq!(loss.inverse_rate, 245e-6);
        assert!(matches!(preset("rydberg"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn rejects_bad_input() {
        let rho = HybridState::Mixed(random_state(8, 1));
        let h = SparseOperator::zeros(8);
        let m = NoiseModel::noiseless();
        assert!(evolve(&rho, &h, -1.0, &m).is_err());
        assert!(evolve(&rho, &SparseOperator::zeros(6), 1.0, &m).is_err());
        let big = SparseOperator::from_dense(&(random_hermitian(8, 2) * c(1e6)));
        let tight = Tolerances {
            max_steps: 10,
            ..Tolerances::default()
        };
        assert!(matches!(evolve_with(&rho, &big, 1.0, &m, &tight), Err(Error::Integration { .. })));
        let q0 = [c(1.0), c(0.0)];
        let excited = HybridState::product(&[c(1.0), c(0.0), c(0.0), c(0.0)], [c(0.0), c(1.0)]).unwrap();
        assert!(matches!(
            project_qubit(&excited.to_density(), q0),
            Err(Error::DegeneratePostselection(_))
        ));
    }

    #[test]
    fn frame_shift_is_a_unitary_displacement() {
        let space = FockSpace::new(40).unwrap();
        let input = HybridState::product(&squeezed_vacuum(space, 0.3), [c(1.0), c(0.0)]).unwrap();
        let g = GateSpec {
            kind: GateKind::UnconditionalDisplacement,
            strength: PI.sqrt() / 2.0,
            phi: 0.4,
            label: GateLabel::Frame,
            round: 0,
        };
        let want = apply_gate(&input, &g).unwrap().to_density();
        let got = noisy_gate(&input, &g, &all_channels(0.1)).unwrap().to_density();
        assert!(max_diff(&want, &got) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn trace_and_hermiticity(seed in 0u64..1000, g in 0.0f64..0.5, t in 0.0f64..2.0) {
                let rho = random_state(8, seed);
                let h = random_hermitian(8, seed + 1);
                let out = evolve(&HybridState::Mixed(rho), &SparseOperator::from_dense(&h), t, &all_channels(g))
                    .unwrap()
                    .to_density();
                let tr: f64 = out.diagonal().iter().map(|x| x.re).sum();
                prop_assert!((tr - 1.0).abs() < 1e-8);
                prop_assert!(max_diff(&out, &out.adjoint()) == 0.0);
                let low = nalgebra::SymmetricEigen::new(out).eigenvalues.min();
                prop_assert!(low > -1e-8);
            }

            #[test]
            fn channels_never_raise_purity_of_pure_states(seed in 0u64..1000, g in 0.01f64..0.5) {
                let d = 4;
                let a = random_state(2 * d, seed);
                let v = nalgebra::SymmetricEigen::new(a).eigenvectors.column(0).into_owned();
                let out = evolve(&HybridState::Pure(v), &SparseOperator::zeros(2 * d), 0.5, &all_channels(g))
                    .unwrap()
                    .to_density();
                let purity: f64 = out.iter().map(|x| x.norm_sqr()).sum();
                prop_assert!(purity <= 1.0 + 1e-10);
            }
        }
    }
}
