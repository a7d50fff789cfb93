//! One driver per table or figure. Each returns its tables in a fixed order
//! with the main table first.

use std::path::{Path, PathBuf};
use std::time::Instant;

use gridstates::fom::{apply_logical_x, effective_squeezing, shift_error, wigner, EffectiveSqueezing, ZakGrid};
use gridstates::hilbert::{squeezed_vacuum, FockSpace};
use gridstates::protocol::{apply_gate_components, GateLabel, GateSchedule, LatticeSpec};
use gridstates::{BosonDensity, C64};
use nalgebra::DVector;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{CliError, Result};
use crate::table::{ColumnKind, ResultTable};

pub mod fig2;
pub mod fig4;
pub mod fig5;
pub mod fig6;
pub mod fig7;
pub mod prepare;
pub mod table1;

pub use fig2::run_fig2;
pub use fig4::run_fig4;
pub use fig5::run_fig5;
pub use fig6::run_fig6;
pub use fig7::run_fig7;
pub use prepare::run_prepare;
pub use table1::run_table1;

/// A square matrix written as a pair of real and imaginary CSV files.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixDump {
    pub name: String,
    pub dim: usize,
    /// Column-major, `values[i + j * dim] = ρ_{ij}`.
    pub values: Vec<C64>,
}

impl MatrixDump {
    fn write_part(&self, dir: &Path, tag: &str, part: impl Fn(C64) -> f64) -> Result<PathBuf> {
        let path = dir.join(format!("{}_{tag}.csv", self.name));
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        for i in 0..self.dim {
            w.write_record((0..self.dim).map(|j| format!("{:e}", part(self.values[i + j * self.dim]))))?;
        }
        let body = w.into_inner().map_err(|e| CliError::Table(e.to_string()))?;
        let head = format!(
            "# {} part of the oscillator density matrix in the Fock basis; row n, column m is <n|rho|m>, dimension {}\n",
            if tag == "re" { "real" } else { "imaginary" },
            self.dim
        );
        std::fs::write(&path, head + &String::from_utf8_lossy(&body))?;
        Ok(path)
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        Ok(vec![self.write_part(dir, "re", |z| z.re)?, self.write_part(dir, "im", |z| z.im)?])
    }

    /// Reads a pair written by [`MatrixDump::write`].
    pub fn read(dir: &Path, name: &str) -> Result<Self> {
        let part = |tag: &str| -> Result<Vec<Vec<f64>>> {
            let text = std::fs::read_to_string(dir.join(format!("{name}_{tag}.csv")))?;
            let mut r = csv::ReaderBuilder::new()
                .has_headers(false)
                .comment(Some(b'#'))
                .from_reader(text.as_bytes());
            r.records()
                .map(|rec| {
                    rec?.iter()
                        .map(|f| f.parse::<f64>().map_err(|e| CliError::Table(e.to_string())))
                        .collect()
                })
                .collect()
        };
        let (re, im) = (part("re")?, part("im")?);
        let dim = re.len();
        if im.len() != dim || re.iter().chain(&im).any(|r| r.len() != dim) {
            return Err(CliError::Table(format!("{name}: dump is not square")));
        }
        let mut values = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                values[i + j * dim] = C64::new(re[i][j], im[i][j]);
            }
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            values,
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<ResultTable>,
    pub dumps: Vec<MatrixDump>,
}

impl RunOutput {
    pub fn main(&self) -> &ResultTable {
        &self.tables[0]
    }

    pub fn table(&self, name: &str) -> Option<&ResultTable> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes every table and dump under `dir`; returns the files written.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = Vec::new();
        for t in &self.tables {
            files.push(t.write(dir)?);
        }
        for d in &self.dumps {
            files.extend(d.write(dir)?);
        }
        Ok(files)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let mut out = match cfg.experiment {
        Experiment::Table1 => run_table1(cfg),
        Experiment::Fig2Sweep => run_fig2(cfg),
        Experiment::Fig4Noise => run_fig4(cfg),
        Experiment::Fig5ShiftError => run_fig5(cfg),
        Experiment::Fig6Vacuum => run_fig6(cfg),
        Experiment::Fig7Realistic => run_fig7(cfg),
        Experiment::Prepare => run_prepare(cfg),
    }?;
    let secs = start.elapsed().as_secs_f64();
    for t in &mut out.tables {
        stamp(t, cfg);
        t.set_meta("runtime_seconds", secs);
    }
    Ok(out)
}

/// Config echo and provenance written next to every table.
pub fn stamp(t: &mut ResultTable, cfg: &ExperimentConfig) {
    t.set_meta("config", cfg);
    t.set_meta("code_version", env!("CARGO_PKG_VERSION"));
    t.set_meta("tolerances", json!({
        "integrator_rtol": gridstates::noise::Tolerances::default().rtol,
        "integrator_atol": gridstates::noise::Tolerances::default().atol,
        "optimizer": "Nelder-Mead, fixed multistart order",
    }));
    if let Some(c) = t.column("fock_dim") {
        let mut dims: Vec<i64> = t
            .rows
            .iter()
            .filter_map(|r| match r[c] {
                crate::table::Cell::Integer(d) => Some(d),
                _ => None,
            })
            .collect();
        dims.sort_unstable();
        dims.dedup();
        t.set_meta("fock_dims", dims);
    }
}

/// Rough wall-clock cost in seconds, printed before a run starts.
pub fn estimate_seconds(cfg: &ExperimentConfig) -> f64 {
    match cfg.experiment {
        Experiment::Table1 => 1.0,
        Experiment::Fig2Sweep => fig2::estimate(cfg),
        Experiment::Fig4Noise => fig4::estimate(cfg),
        Experiment::Fig5ShiftError => fig5::estimate(cfg),
        Experiment::Fig6Vacuum => fig6::estimate(cfg),
        Experiment::Fig7Realistic => fig7::estimate(cfg),
        Experiment::Prepare => prepare::estimate(cfg),
    }
}

/// Cost models fitted to single-core timings.
pub(crate) fn pure_run_cost(dim: usize) -> f64 {
    6e-7 * (dim as f64).powi(2)
}

pub(crate) fn noisy_run_cost(n: usize, dim: usize) -> f64 {
    2.6e-5 * (dim as f64).powi(2) * (1usize << n) as f64
}

pub(crate) fn wigner_cost(dim: usize, points: usize, components: usize) -> f64 {
    2e-6 * (dim * points * points * components) as f64
}

/// Maps `f` over `items` on `jobs` worker threads, keeping input order.
pub fn par_map<T, R, F>(jobs: usize, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    if jobs <= 1 {
        return items.into_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.into_par_iter().map(f).collect()),
        Err(e) => {
            log::warn!("worker pool unavailable ({e}); running serially");
            items.into_iter().map(f).collect()
        }
    }
}

/// Outcome of a noiseless run, optionally postselected on the expected
/// qubit state after every disentangling gate.
pub struct PurePoint {
    pub rho: BosonDensity,
    pub success_probability: f64,
}

pub fn noiseless_point(
    schedule: &GateSchedule,
    space: FockSpace,
    r: f64,
    postselect: bool,
) -> gridstates::Result<PurePoint> {
    let boson = squeezed_vacuum(space, r);
    let q = schedule.qubit_init;
    let mut c0: Vec<C64> = boson.iter().map(|b| b * q[0]).collect();
    let mut c1: Vec<C64> = boson.iter().map(|b| b * q[1]).collect();
    let expected = if postselect {
        gridstates::protocol::run_in(schedule, space, r)?.expected_qubits
    } else {
        Vec::new()
    };
    let mut p = 1.0;
    let mut checks = expected.iter();
    for g in &schedule.gates {
        let (a, b) = apply_gate_components(&c0, &c1, g);
        c0 = a;
        c1 = b;
        if postselect && g.label == GateLabel::Disentangle {
            let e = checks.next().expect("one expected state per disentangling gate");
            let psi: Vec<C64> = c0.iter().zip(&c1).map(|(a, b)| e[0].conj() * a + e[1].conj() * b).collect();
            let w: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
            p *= w;
            let s = 1.0 / w.sqrt();
            c0 = psi.iter().map(|x| x * e[0] * s).collect();
            c1 = psi.iter().map(|x| x * e[1] * s).collect();
        }
    }
    Ok(PurePoint {
        rho: BosonDensity::Ensemble(vec![DVector::from_vec(c0), DVector::from_vec(c1)]),
        success_probability: p,
    })
}

/// Square-lattice figures of merit, with the shift error taken on the
/// logical-zero image of the (logical one) protocol output.
pub struct Foms {
    pub squeezing: EffectiveSqueezing,
    pub p_error: Option<f64>,
}

pub fn square_foms(rho: &BosonDensity, with_shift_error: bool) -> gridstates::Result<Foms> {
    let sq = LatticeSpec::square();
    let squeezing = effective_squeezing(rho, &sq)?;
    let p_error = if with_shift_error {
        let space = FockSpace::new(rho.dim())?;
        Some(shift_error(&apply_logical_x(rho, &sq), &ZakGrid::covering(space))?)
    } else {
        None
    };
    Ok(Foms { squeezing, p_error })
}

/// `W(x, p)` on the square grid `axis × axis`, `x` outermost.
pub fn wigner_table(name: &str, rho: &BosonDensity, axis: &[f64]) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        name,
        &[
            ("x", ColumnKind::Real, "position quadrature"),
            ("p", ColumnKind::Real, "momentum quadrature"),
            ("w", ColumnKind::Real, "W(x,p), unit integral over the plane"),
        ],
    );
    let g = wigner(rho, axis, axis);
    for (i, &x) in g.xs.iter().enumerate() {
        for (j, &p) in g.ps.iter().enumerate() {
            t.push(vec![x.into(), p.into(), g.values[(i, j)].into()])?;
        }
    }
    Ok(t)
}

/// `status` cell text for a failed point.
pub(crate) fn failure(e: &gridstates::Error) -> String {
    format!("error: {e}").replace(['\n', ','], " ")
}

pub(crate) fn join(u: &[f64]) -> String {
    u.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

/// Inverse of the `;`-separated strength lists in table cells.
pub fn parse_list(s: &str) -> Vec<f64> {
    s.split(';').filter(|x| !x.is_empty()).filter_map(|x| x.parse().ok()).collect()
}
