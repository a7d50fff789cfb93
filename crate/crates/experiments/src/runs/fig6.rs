//! Vacuum input: the protocol twice, with a quarter turn of phase space in
//! between.

use std::f64::consts::FRAC_PI_2;

use gridstates::fom::{logical_pauli_max, LogicalPauli};
use gridstates::hilbert::{db_to_r, rotate, vacuum, FockSpace};
use gridstates::peaks::{coefficients, fom};
use gridstates::protocol::{apply_gate_components, build_schedule, GateSchedule, LatticeSpec};
use gridstates::{BosonDensity, C64};
use nalgebra::DVector;

use super::{par_map, pure_run_cost, square_foms, wigner_cost, wigner_table, RunOutput};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::table::{Cell, ColumnKind, ResultTable};

/// Rounds for which Wigner grids are written.
pub const WIGNER_ROUNDS: [usize; 2] = [2, 3];

pub(crate) fn default_dim(cfg: &ExperimentConfig, n: usize) -> Result<usize> {
    let u = cfg.objective.u(n)?;
    let asymptote = fom(&coefficients(n, &u)?.coeffs)?.delta_p_db;
    Ok(cfg.dim(FockSpace::for_protocol(n, db_to_r(asymptote)).dim()))
}

/// Runs `schedule` on each oscillator component with a fresh qubit.
fn pass(schedule: &GateSchedule, inputs: &[Vec<C64>]) -> Vec<Vec<C64>> {
    let q = schedule.qubit_init;
    let mut out = Vec::with_capacity(2 * inputs.len());
    for b in inputs {
        let mut c0: Vec<C64> = b.iter().map(|x| x * q[0]).collect();
        let mut c1: Vec<C64> = b.iter().map(|x| x * q[1]).collect();
        for g in &schedule.gates {
            let (a, z) = apply_gate_components(&c0, &c1, g);
            c0 = a;
            c1 = z;
        }
        out.push(c0);
        out.push(c1);
    }
    out
}

fn ensemble(comps: &[Vec<C64>]) -> BosonDensity {
    BosonDensity::Ensemble(comps.iter().map(|c| DVector::from_column_slice(c)).collect())
}

pub struct VacuumRun {
    pub first: BosonDensity,
    pub second: BosonDensity,
    pub pauli: LogicalPauli,
    pub dim: usize,
}

pub fn vacuum_run(cfg: &ExperimentConfig, n: usize) -> Result<VacuumRun> {
    let dim = default_dim(cfg, n)?;
    let space = FockSpace::new(dim)?;
    let sq = LatticeSpec::square();
    let schedule = build_schedule(n, &cfg.objective.u(n)?, &sq)?;
    let first = pass(&schedule, &[vacuum(space)]);
    let turned: Vec<Vec<C64>> = first.iter().map(|c| rotate(c, FRAC_PI_2)).collect();
    let second = pass(&schedule, &turned);
    let second = ensemble(&second);
    let pauli = logical_pauli_max(&second, &sq)?;
    Ok(VacuumRun {
        first: ensemble(&first),
        second,
        pauli,
        dim,
    })
}

pub fn run_fig6(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut t = ResultTable::new(
        "fig6_vacuum",
        &[
            ("n", ColumnKind::Integer, "rounds per pass"),
            ("first_delta_x_db", ColumnKind::Real, "dB after the first pass"),
            ("first_delta_p_db", ColumnKind::Real, "dB after the first pass"),
            ("delta_x_db", ColumnKind::Real, "dB after the second pass"),
            ("delta_p_db", ColumnKind::Real, "dB after the second pass"),
            ("pauli_max", ColumnKind::Real, "max over Bloch directions of |<U_L>|"),
            ("c0_re", ColumnKind::Real, "maximising direction, c0 = cos(theta/2)"),
            ("c0_im", ColumnKind::Real, ""),
            ("c1_re", ColumnKind::Real, "c1 = exp(i phi) sin(theta/2)"),
            ("c1_im", ColumnKind::Real, ""),
            ("fock_dim", ColumnKind::Integer, ""),
        ],
    );
    let rounds = cfg.rounds(3);
    let runs = par_map(cfg.jobs, rounds.clone(), |n| vacuum_run(cfg, n));
    let axis = cfg.wigner_axis();
    let mut grids = Vec::new();
    for (n, run) in rounds.into_iter().zip(runs) {
        let run = run?;
        let a = square_foms(&run.first, false)?.squeezing;
        let b = square_foms(&run.second, false)?.squeezing;
        let p = run.pauli;
        let row: Vec<Cell> = vec![
            n.into(),
            a.delta_x_db.into(),
            a.delta_p_db.into(),
            b.delta_x_db.into(),
            b.delta_p_db.into(),
            p.value.into(),
            p.c0.re.into(),
            p.c0.im.into(),
            p.c1.re.into(),
            p.c1.im.into(),
            run.dim.into(),
        ];
        t.push(row)?;
        if !axis.is_empty() && WIGNER_ROUNDS.contains(&n) {
            grids.push(wigner_table(&format!("fig6_wigner_n{n}"), &run.second, &axis)?);
        }
    }
    let mut tables = vec![t];
    tables.extend(grids);
    Ok(RunOutput {
        tables,
        dumps: Vec::new(),
    })
}

pub(crate) fn estimate(cfg: &ExperimentConfig) -> f64 {
    cfg.rounds(3)
        .into_iter()
        .map(|n| {
            let d = default_dim(cfg, n).unwrap_or(0);
            let grid = if WIGNER_ROUNDS.contains(&n) { wigner_cost(d, cfg.wigner_points, 4) } else { 0.0 };
            3.0 * pure_run_cost(d) + grid
        })
        .sum()
}
