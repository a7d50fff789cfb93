//! Output squeezing against input squeezing, and the two marked states.

use gridstates::fom::{approx_gkp_state, fidelity, ApproxGkpParams, Logical};
use gridstates::hilbert::{db_to_r, FockSpace};
use gridstates::protocol::{build_schedule, LatticeSpec};
use gridstates::BosonDensity;

use super::{failure, noiseless_point, par_map, pure_run_cost, square_foms, wigner_cost, wigner_table, RunOutput};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::table::{ColumnKind, ResultTable};

pub const DEFAULT_INPUT_DB: [f64; 13] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0, 18.0, 20.0, 22.0, 24.0];

/// `(label, N, input dB)` of the states shown next to the sweep.
pub const MARKED: [(&str, usize, f64); 2] = [("i", 2, 11.5), ("ii", 3, 16.6)];

pub(crate) fn default_dim(cfg: &ExperimentConfig, n: usize, db: f64) -> usize {
    cfg.dim(FockSpace::for_protocol(n, db_to_r(db)).dim())
}

struct Marked {
    rho: BosonDensity,
    target: Vec<gridstates::C64>,
    row: Vec<crate::table::Cell>,
}

fn marked(cfg: &ExperimentConfig, label: &str, n: usize, db: f64) -> Result<Marked> {
    let r = db_to_r(db);
    let space = FockSpace::new(default_dim(cfg, n, db))?;
    let u = cfg.objective.u(n)?;
    let sq = LatticeSpec::square();
    let rho = noiseless_point(&build_schedule(n, &u, &sq)?, space, r, false)?.rho;
    let f = square_foms(&rho, false)?.squeezing;
    // envelope matched to the measured Δ_P, peak width to the input
    let target = approx_gkp_state(&ApproxGkpParams::new(r, f.delta_p, Logical::One, sq), space)?;
    let fid = fidelity(&rho, &target)?;
    Ok(Marked {
        row: vec![
            label.into(),
            n.into(),
            db.into(),
            f.delta_x_db.into(),
            f.delta_p_db.into(),
            f.delta_p_db.into(),
            fid.into(),
            space.dim().into(),
        ],
        rho,
        target,
    })
}

pub fn run_fig2(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut sweep = ResultTable::new(
        "fig2_sweep",
        &[
            ("n", ColumnKind::Integer, "rounds"),
            ("input_db", ColumnKind::Real, "dB, input squeezing = Delta_X of the input"),
            ("delta_x_db", ColumnKind::Real, "dB"),
            ("delta_p_db", ColumnKind::Real, "dB"),
            ("fock_dim", ColumnKind::Integer, ""),
            ("status", ColumnKind::Text, ""),
        ],
    );
    let points: Vec<(usize, f64)> = cfg
        .rounds(3)
        .into_iter()
        .flat_map(|n| cfg.input_grid(&DEFAULT_INPUT_DB).into_iter().map(move |db| (n, db)))
        .collect();
    let rows = par_map(cfg.jobs, points, |(n, db)| {
        let dim = default_dim(cfg, n, db);
        let res = (|| {
            let u = cfg.objective.u(n)?;
            let space = FockSpace::new(dim)?;
            let schedule = build_schedule(n, &u, &LatticeSpec::square())?;
            let rho = noiseless_point(&schedule, space, db_to_r(db), false)?.rho;
            square_foms(&rho, false)
        })();
        match res {
            Ok(f) => vec![
                n.into(),
                db.into(),
                f.squeezing.delta_x_db.into(),
                f.squeezing.delta_p_db.into(),
                dim.into(),
                "ok".into(),
            ],
            Err(e) => vec![n.into(), db.into(), 0.0.into(), 0.0.into(), dim.into(), failure(&e).into()],
        }
    });
    for r in rows {
        sweep.push(r)?;
    }

    let mut marked_table = ResultTable::new(
        "fig2_marked",
        &[
            ("label", ColumnKind::Text, "marked point"),
            ("n", ColumnKind::Integer, "rounds"),
            ("input_db", ColumnKind::Real, "dB"),
            ("delta_x_db", ColumnKind::Real, "dB"),
            ("delta_p_db", ColumnKind::Real, "dB"),
            ("kappa_db", ColumnKind::Real, "dB, target envelope matched to delta_p"),
            ("fidelity", ColumnKind::Real, "against the finite-energy logical one"),
            ("fock_dim", ColumnKind::Integer, ""),
        ],
    );
    let mut tables = Vec::new();
    let axis = cfg.wigner_axis();
    for (label, n, db) in MARKED {
        let m = marked(cfg, label, n, db)?;
        marked_table.push(m.row)?;
        if !axis.is_empty() {
            tables.push(wigner_table(&format!("fig2_wigner_{label}"), &m.rho, &axis)?);
            tables.push(wigner_table(
                &format!("fig2_target_{label}"),
                &BosonDensity::pure(&m.target),
                &axis,
            )?);
        }
    }
    let mut all = vec![sweep, marked_table];
    all.extend(tables);
    Ok(RunOutput {
        tables: all,
        dumps: Vec::new(),
    })
}

pub(crate) fn estimate(cfg: &ExperimentConfig) -> f64 {
    let mut s = 0.0;
    for n in cfg.rounds(3) {
        for db in cfg.input_grid(&DEFAULT_INPUT_DB) {
            s += pure_run_cost(default_dim(cfg, n, db));
        }
    }
    for (_, n, db) in MARKED {
        let d = default_dim(cfg, n, db);
        s += pure_run_cost(d) + wigner_cost(d, cfg.wigner_points, 3);
    }
    s
}
