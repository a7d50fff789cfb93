//! Single-channel noise sweeps, with and without postselection.

use gridstates::hilbert::{db_to_r, FockSpace};
use gridstates::noise::{noise_fock_dim, noisy_run, ChannelKind, NoiseModel};
use gridstates::protocol::{build_schedule, LatticeSpec};

use super::{failure, noiseless_point, noisy_run_cost, par_map, square_foms, RunOutput};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::table::{Cell, ColumnKind, ResultTable};

/// Default `γT` points: six per decade-and-a-half, `10^-4 … 10^-1`.
pub fn default_gamma_t() -> Vec<f64> {
    (0..6).map(|k| 10f64.powf(-4.0 + 0.6 * k as f64)).collect()
}

/// `(N, input dB)` pairs: two rounds at 11.5 dB and three at 16.6 dB.
pub fn settings(cfg: &ExperimentConfig) -> Vec<(usize, f64)> {
    let default_db = |n: usize| if n <= 2 { 11.5 } else { 16.6 };
    let rounds = match cfg.n {
        Some(n) => vec![n],
        None => vec![2, 3],
    };
    rounds
        .into_iter()
        .flat_map(|n| cfg.input_grid(&[default_db(n)]).into_iter().map(move |db| (n, db)))
        .collect()
}

pub fn channels(cfg: &ExperimentConfig) -> Vec<ChannelKind> {
    match cfg.channel {
        Some(c) => vec![c],
        None => ChannelKind::ALL.to_vec(),
    }
}

pub(crate) fn noise_dim(cfg: &ExperimentConfig, n: usize, db: f64) -> usize {
    cfg.dim(noise_fock_dim(n, db_to_r(db)))
}

pub(crate) const COLUMNS: &[(&str, ColumnKind, &str)] = &[
    ("channel", ColumnKind::Text, "noise channel, none for the noiseless reference"),
    ("gamma_t", ColumnKind::Real, "rate times unit-gate time"),
    ("n", ColumnKind::Integer, "rounds"),
    ("input_db", ColumnKind::Real, "dB"),
    ("postselect", ColumnKind::Integer, "1 if the qubit is postselected"),
    ("delta_x_db", ColumnKind::Real, "dB"),
    ("delta_p_db", ColumnKind::Real, "dB"),
    ("success_probability", ColumnKind::Real, "1 without postselection"),
    ("fock_dim", ColumnKind::Integer, ""),
    ("status", ColumnKind::Text, ""),
];

fn row(
    channel: &str,
    gamma_t: f64,
    n: usize,
    db: f64,
    ps: bool,
    dim: usize,
    result: gridstates::Result<(f64, f64, f64)>,
) -> Vec<Cell> {
    let (dx, dp, p, status) = match result {
        Ok((dx, dp, p)) => (dx, dp, p, "ok".to_string()),
        Err(e) => (0.0, 0.0, 0.0, failure(&e)),
    };
    vec![
        channel.into(),
        gamma_t.into(),
        n.into(),
        db.into(),
        ps.into(),
        dx.into(),
        dp.into(),
        p.into(),
        dim.into(),
        status.into(),
    ]
}

pub fn run_fig4(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut t = ResultTable::new("fig4_noise", COLUMNS);
    let sq = LatticeSpec::square();
    let gammas = cfg.gamma_t_grid.clone().unwrap_or_else(default_gamma_t);
    for (n, db) in settings(cfg) {
        let dim = noise_dim(cfg, n, db);
        let u = cfg.objective.u(n)?;
        let r = db_to_r(db);
        for ps in cfg.postselect_options() {
            let reference = (|| {
                let point = noiseless_point(&build_schedule(n, &u, &sq)?, FockSpace::new(dim)?, r, ps)?;
                let f = square_foms(&point.rho, false)?.squeezing;
                Ok((f.delta_x_db, f.delta_p_db, point.success_probability))
            })();
            t.push(row("none", 0.0, n, db, ps, dim, reference))?;
        }
        let points: Vec<(ChannelKind, f64, bool)> = channels(cfg)
            .into_iter()
            .flat_map(|c| gammas.iter().map(move |&g| (c, g)))
            .flat_map(|(c, g)| cfg.postselect_options().into_iter().map(move |ps| (c, g, ps)))
            .collect();
        let rows = par_map(cfg.jobs, points, |(c, g, ps)| {
            let res = (|| {
                let model = NoiseModel::single(c, g)?;
                let out = noisy_run(n, &u, &sq, r, &model, ps, Some(FockSpace::new(dim)?))?;
                let f = square_foms(&out.rho, false)?.squeezing;
                Ok((f.delta_x_db, f.delta_p_db, out.success_probability))
            })();
            log::info!("fig4 {} gamma_t={g:.2e} N={n} postselect={ps}", c.as_str());
            row(c.as_str(), g, n, db, ps, dim, res)
        });
        for r in rows {
            t.push(r)?;
        }
    }
    Ok(RunOutput {
        tables: vec![t],
        dumps: Vec::new(),
    })
}

pub(crate) fn estimate(cfg: &ExperimentConfig) -> f64 {
    let gammas = cfg.gamma_t_grid.as_ref().map_or(6, Vec::len);
    let per_setting = (channels(cfg).len() * gammas * cfg.postselect_options().len()) as f64;
    settings(cfg)
        .into_iter()
        .map(|(n, db)| per_setting * noisy_run_cost(n, noise_dim(cfg, n, db)))
        .sum::<f64>()
        / cfg.jobs as f64
}
