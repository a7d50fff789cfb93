//! Shift-error probability against input squeezing.

use gridstates::fom::{approx_gkp_state, shift_error, ApproxGkpParams, Logical, ZakGrid};
use gridstates::hilbert::{db_to_r, FockSpace};
use gridstates::peaks::{coefficients, fom};
use gridstates::protocol::{build_schedule, LatticeSpec};
use gridstates::BosonDensity;

use super::{failure, join, noiseless_point, par_map, pure_run_cost, square_foms, RunOutput};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::table::{ColumnKind, ResultTable};

pub const DEFAULT_INPUT_DB: [f64; 9] = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0];

/// Series name of the finite-energy reference state with `r = κ`.
pub const APPROX: &str = "approx";
pub const PROTOCOL: &str = "protocol";

#[derive(Clone, Copy)]
enum Point {
    Protocol(usize, f64),
    Approx(f64),
}

fn dim_of(cfg: &ExperimentConfig, p: Point) -> usize {
    match p {
        Point::Protocol(n, db) => super::fig2::default_dim(cfg, n, db),
        Point::Approx(db) => cfg.dim(FockSpace::for_protocol(3, db_to_r(db)).dim()),
    }
}

fn points(cfg: &ExperimentConfig) -> Vec<Point> {
    let grid = cfg.input_grid(&DEFAULT_INPUT_DB);
    let mut pts: Vec<Point> = cfg
        .rounds(3)
        .into_iter()
        .flat_map(|n| grid.iter().map(move |&db| Point::Protocol(n, db)))
        .collect();
    pts.extend(grid.iter().map(|&db| Point::Approx(db)));
    pts
}

fn p_error(cfg: &ExperimentConfig, p: Point, dim: usize) -> gridstates::Result<f64> {
    let space = FockSpace::new(dim)?;
    match p {
        Point::Protocol(n, db) => {
            let schedule = build_schedule(n, &cfg.objective.u(n)?, &LatticeSpec::square())?;
            let rho = noiseless_point(&schedule, space, db_to_r(db), false)?.rho;
            Ok(square_foms(&rho, true)?.p_error.unwrap_or(0.0))
        }
        Point::Approx(db) => {
            let r = db_to_r(db);
            let params = ApproxGkpParams::new(r, (-r).exp(), Logical::Zero, LatticeSpec::square());
            let v = approx_gkp_state(&params, space)?;
            shift_error(&BosonDensity::pure(&v), &ZakGrid::covering(space))
        }
    }
}

pub fn run_fig5(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut t = ResultTable::new(
        "fig5_shift_error",
        &[
            ("series", ColumnKind::Text, "protocol or approx (finite-energy state with kappa = exp(-r))"),
            ("n", ColumnKind::Integer, "rounds, 0 for approx"),
            ("input_db", ColumnKind::Real, "dB"),
            ("p_error", ColumnKind::Real, "probability of a shift beyond sqrt(pi)/6"),
            ("fock_dim", ColumnKind::Integer, ""),
            ("status", ColumnKind::Text, ""),
        ],
    );
    let rows = par_map(cfg.jobs, points(cfg), |p| {
        let dim = dim_of(cfg, p);
        let (series, n, db) = match p {
            Point::Protocol(n, db) => (PROTOCOL, n, db),
            Point::Approx(db) => (APPROX, 0, db),
        };
        let (pe, status) = match p_error(cfg, p, dim) {
            Ok(x) => (x, "ok".to_string()),
            Err(e) => (0.0, failure(&e)),
        };
        vec![series.into(), n.into(), db.into(), pe.into(), dim.into(), status.into()]
    });
    for r in rows {
        t.push(r)?;
    }

    let mut asym = ResultTable::new(
        "fig5_asymptotes",
        &[
            ("n", ColumnKind::Integer, "rounds"),
            ("u", ColumnKind::Text, "strengths, ';'-separated"),
            ("p_error", ColumnKind::Real, "infinite input squeezing"),
            ("delta_p_db", ColumnKind::Real, "dB, infinite input squeezing"),
        ],
    );
    for n in cfg.rounds(3) {
        let u = cfg.objective.u(n)?;
        let f = fom(&coefficients(n, &u)?.coeffs)?;
        asym.push(vec![n.into(), join(&u).into(), f.p_error.into(), f.delta_p_db.into()])?;
    }
    Ok(RunOutput {
        tables: vec![t, asym],
        dumps: Vec::new(),
    })
}

pub(crate) fn estimate(cfg: &ExperimentConfig) -> f64 {
    points(cfg).into_iter().map(|p| 0.6 * pure_run_cost(dim_of(cfg, p))).sum()
}
