//! Optimal preparation strengths and the resulting infinite-squeezing
//! figures of merit.

use gridstates::peaks::{coefficients, fom, optimal_distribution, optimize_u, tabulated_u, Objective, PeakFom};
use gridstates::Error;

use super::{failure, join, RunOutput};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::table::{ColumnKind, ResultTable};

const COLUMNS: &[(&str, ColumnKind, &str)] = &[
    ("n", ColumnKind::Integer, "rounds"),
    ("objective", ColumnKind::Text, "shift_error or delta_p"),
    ("u", ColumnKind::Text, "optimised strengths, ';'-separated"),
    ("u_tabulated", ColumnKind::Text, "published strengths, ';'-separated"),
    ("p_error", ColumnKind::Real, "shift-error probability at u"),
    ("delta_p_db", ColumnKind::Real, "dB at u"),
    ("tabulated_p_error", ColumnKind::Real, "at u_tabulated"),
    ("tabulated_delta_p_db", ColumnKind::Real, "dB at u_tabulated"),
    ("optimal_p_error", ColumnKind::Real, "free comb weights"),
    ("optimal_delta_p_db", ColumnKind::Real, "dB, free comb weights"),
    ("flat_p_error", ColumnKind::Real, "equal comb weights"),
    ("flat_delta_p_db", ColumnKind::Real, "dB, equal comb weights"),
    ("status", ColumnKind::Text, "ok or per-cell failures"),
];

fn fom_at(n: usize, u: &[f64]) -> gridstates::Result<PeakFom> {
    fom(&coefficients(n, u)?.coeffs)
}

/// Keeps the best point of an unconverged optimisation.
fn optimised(n: usize, objective: Objective, notes: &mut Vec<String>) -> (Vec<f64>, Option<PeakFom>) {
    match optimize_u(n, objective) {
        Ok((u, f)) => (u, Some(f)),
        Err(Error::NoConvergence { best_point, .. }) => {
            notes.push("u: no convergence, best point kept".into());
            let mut u = vec![0.0];
            u.extend(best_point);
            let f = fom_at(n, &u).ok();
            (u, f)
        }
        Err(e) => {
            notes.push(format!("u: {}", failure(&e)));
            (vec![0.0; n], None)
        }
    }
}

pub fn run_table1(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut t = ResultTable::new("table1", COLUMNS);
    for n in cfg.rounds(4) {
        for objective in [Objective::ShiftError, Objective::DeltaP] {
            let mut notes = Vec::new();
            let (u, this) = optimised(n, objective, &mut notes);
            let tab = tabulated_u(n, objective);
            let tab_fom = tab.as_ref().and_then(|u| fom_at(n, u).ok());
            let optimal = match optimal_distribution(n, objective) {
                Ok((_, f)) => Some(f),
                Err(Error::NoConvergence { .. }) => {
                    notes.push("optimal: no convergence".into());
                    None
                }
                Err(e) => {
                    notes.push(format!("optimal: {}", failure(&e)));
                    None
                }
            };
            let flat = fom_at(n, &vec![0.0; n]);
            if let Err(e) = &flat {
                notes.push(format!("flat: {}", failure(e)));
            }
            let flat = flat.ok();
            let p = |f: &Option<PeakFom>| f.map_or(0.0, |f| f.p_error);
            let d = |f: &Option<PeakFom>| f.map_or(0.0, |f| f.delta_p_db);
            t.push(vec![
                n.into(),
                objective.as_str().into(),
                join(&u).into(),
                tab.as_deref().map(join).unwrap_or_default().into(),
                p(&this).into(),
                d(&this).into(),
                p(&tab_fom).into(),
                d(&tab_fom).into(),
                p(&optimal).into(),
                d(&optimal).into(),
                p(&flat).into(),
                d(&flat).into(),
                if notes.is_empty() { "ok".to_string() } else { notes.join("; ") }.into(),
            ])?;
        }
    }
    Ok(RunOutput {
        tables: vec![t],
        dumps: Vec::new(),
    })
}
