//! `--audit`: reruns at doubled Fock dimension and checks published values.

use gridstates::noise::ChannelKind;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::runs::{parse_list, run, RunOutput};
use crate::table::{ColumnKind, ResultTable};

/// Largest change of a figure of merit allowed when the dimension doubles.
pub const CONVERGENCE_TOL: f64 = 1e-3;

/// Columns compared by the convergence check.
const FOM_COLUMNS: &[&str] = &[
    "delta_x_db",
    "delta_p_db",
    "first_delta_x_db",
    "first_delta_p_db",
    "delta_alpha_db",
    "delta_beta_db",
    "p_error",
    "fidelity",
    "pauli_max",
    "success_probability",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn abs(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            reference,
            tolerance,
            pass: (value - reference).abs() <= tolerance,
        }
    }

    fn rel(name: impl Into<String>, value: f64, reference: f64, tolerance: f64) -> Self {
        let mut c = Self::abs(name, value, reference, tolerance * reference.abs());
        c.tolerance = tolerance;
        c.pass = (value / reference - 1.0).abs() <= tolerance;
        c
    }

    /// `value < bound`, or `value > bound` when `above`.
    fn bound(name: impl Into<String>, value: f64, bound: f64, above: bool) -> Self {
        Self {
            name: name.into(),
            value,
            reference: bound,
            tolerance: 0.0,
            pass: if above { value > bound } else { value < bound },
        }
    }
}

/// Row-by-row comparison of the figure-of-merit columns of two runs.
pub fn convergence(base: &RunOutput, fine: &RunOutput) -> Vec<Check> {
    let mut checks = Vec::new();
    for t in &base.tables {
        let Some(f) = fine.table(&t.name) else { continue };
        if t.column("fock_dim").is_none() || t.rows.len() != f.rows.len() {
            continue;
        }
        for i in 0..t.rows.len() {
            if t.text(i, "status").is_some_and(|s| s != "ok") || f.text(i, "status").is_some_and(|s| s != "ok") {
                continue;
            }
            for &c in FOM_COLUMNS {
                if let (Some(a), Some(b)) = (t.real(i, c), f.real(i, c)) {
                    checks.push(Check::abs(format!("{}[{i}].{c} at 2x dim", t.name), b, a, CONVERGENCE_TOL));
                }
            }
        }
    }
    checks
}

/// Published values for the infinite-squeezing table:
/// `(n, objective, u, p_error, delta_p_db)` for the optimised strengths.
const TABLE1: &[(usize, &str, &[f64], f64, f64)] = &[
    (1, "shift_error", &[0.0], 0.39, 6.6),
    (2, "shift_error", &[0.0, 0.045], 9.3e-2, 11.6),
    (3, "shift_error", &[0.0, 0.053, 0.033], 2.3e-3, 16.6),
    (4, "shift_error", &[0.0, 0.038, 0.027, 0.015], 6.1e-5, 20.6),
    (1, "delta_p", &[0.0], 0.39, 6.6),
    (2, "delta_p", &[0.0, 0.093], 9.7e-2, 11.7),
    (3, "delta_p", &[0.0, 0.040, 0.026], 6.7e-3, 17.0),
    (4, "delta_p", &[0.0, 0.024, 0.015, 0.008], 1.8e-3, 22.3),
];

/// Published equal-weight comb values `(n, p_error, delta_p_db)`.
const FLAT: &[(usize, f64, f64)] = &[(1, 0.39, 6.6), (2, 1.2e-1, 10.4), (3, 7.8e-2, 13.7), (4, 3.3e-2, 16.9)];

fn table1_checks(t: &ResultTable) -> Vec<Check> {
    let mut out = Vec::new();
    for &(n, obj, u, p, dp) in TABLE1 {
        let Some(&i) = t.find(&[("n", n.into()), ("objective", obj.into())]).first() else {
            continue;
        };
        let got = parse_list(t.text(i, "u").unwrap_or_default());
        for (k, (&a, &b)) in got.iter().zip(u).enumerate() {
            out.push(Check::abs(format!("table1 n={n} {obj} u[{k}]"), a, b, 0.002));
        }
        out.push(Check::rel(format!("table1 n={n} {obj} p_error"), t.real(i, "p_error").unwrap_or(0.0), p, 0.1));
        out.push(Check::abs(format!("table1 n={n} {obj} delta_p_db"), t.real(i, "delta_p_db").unwrap_or(0.0), dp, 0.1));
    }
    for &(n, p, dp) in FLAT {
        if let Some(&i) = t.find(&[("n", n.into())]).first() {
            out.push(Check::rel(format!("table1 n={n} flat p_error"), t.real(i, "flat_p_error").unwrap_or(0.0), p, 0.1));
            out.push(Check::abs(format!("table1 n={n} flat delta_p_db"), t.real(i, "flat_delta_p_db").unwrap_or(0.0), dp, 0.1));
        }
    }
    out
}

fn fig2_checks(out: &RunOutput) -> Vec<Check> {
    let mut c = Vec::new();
    if let Some(t) = out.table("fig2_marked") {
        for (label, fid, tol) in [("i", 0.935, 0.005), ("ii", 0.993, 0.003)] {
            if let Some(&i) = t.find(&[("label", label.into())]).first() {
                c.push(Check::abs(format!("fig2 ({label}) fidelity"), t.real(i, "fidelity").unwrap_or(0.0), fid, tol));
            }
        }
        if let Some(&i) = t.find(&[("label", "ii".into())]).first() {
            c.push(Check::abs("fig2 (ii) delta_p_db", t.real(i, "delta_p_db").unwrap_or(0.0), 16.6, 0.15));
        }
    }
    c
}

/// Rows of `t` matching `keys`, ordered by `gamma_t`.
fn by_gamma(t: &ResultTable, keys: &[(&str, crate::table::Cell)]) -> Vec<usize> {
    let mut rows = t.find(keys);
    rows.retain(|&i| t.text(i, "status") == Some("ok"));
    rows.sort_by(|&a, &b| t.real(a, "gamma_t").partial_cmp(&t.real(b, "gamma_t")).unwrap());
    rows
}

fn fig4_checks(t: &ResultTable) -> Vec<Check> {
    let mut c = Vec::new();
    let mut settings: Vec<(i64, f64)> = Vec::new();
    for i in 0..t.rows.len() {
        let s = (t.integer(i, "n").unwrap_or(0), t.real(i, "input_db").unwrap_or(0.0));
        if !settings.contains(&s) {
            settings.push(s);
        }
    }
    for (n, db) in settings {
        for kind in ChannelKind::ALL {
            let ch = kind.as_str();
            for ps in [0i64, 1] {
                let rows = by_gamma(t, &[("channel", ch.into()), ("n", n.into()), ("input_db", db.into()), ("postselect", ps.into())]);
                for col in ["delta_x_db", "delta_p_db"] {
                    let worst = rows
                        .windows(2)
                        .map(|w| t.real(w[1], col).unwrap_or(0.0) - t.real(w[0], col).unwrap_or(0.0))
                        .fold(f64::NEG_INFINITY, f64::max);
                    if worst.is_finite() {
                        c.push(Check::bound(format!("fig4 {ch} n={n} ps={ps} {col} rise"), worst, 0.05, false));
                    }
                }
            }
            let plain = by_gamma(t, &[("channel", ch.into()), ("n", n.into()), ("input_db", db.into()), ("postselect", 0i64.into())]);
            let post = by_gamma(t, &[("channel", ch.into()), ("n", n.into()), ("input_db", db.into()), ("postselect", 1i64.into())]);
            for (&a, &b) in plain.iter().zip(&post) {
                let g = t.real(a, "gamma_t").unwrap_or(0.0);
                for col in ["delta_x_db", "delta_p_db"] {
                    let d = t.real(b, col).unwrap_or(0.0) - t.real(a, col).unwrap_or(0.0);
                    let name = format!("fig4 {ch} n={n} gamma_t={g:.1e} {col} postselection gain");
                    c.push(if kind.acts_on_qubit() {
                        Check::bound(name, d, -0.05, true)
                    } else {
                        Check::abs(name, d, 0.0, 0.2)
                    });
                }
            }
        }
    }
    c
}

fn fig5_checks(out: &RunOutput) -> Vec<Check> {
    let mut c = Vec::new();
    if let Some(t) = out.table("fig5_asymptotes") {
        if let Some(&i) = t.find(&[("n", 3usize.into())]).first() {
            c.push(Check::rel("fig5 n=3 asymptote", t.real(i, "p_error").unwrap_or(0.0), 2.3e-3, 0.1));
        }
    }
    c
}

fn fig6_checks(t: &ResultTable) -> Vec<Check> {
    let mut c = Vec::new();
    for i in 0..t.rows.len() {
        let n = t.integer(i, "n").unwrap_or(0);
        c.push(Check::bound(format!("fig6 n={n} pauli_max"), t.real(i, "pauli_max").unwrap_or(1.0), 0.95, false));
        if n >= 2 {
            for col in ["delta_x_db", "delta_p_db"] {
                c.push(Check::bound(format!("fig6 n={n} {col}"), t.real(i, col).unwrap_or(0.0), 0.0, true));
            }
        }
    }
    c
}

fn fig7_checks(out: &RunOutput) -> Vec<Check> {
    let mut c = Vec::new();
    let Some(s) = out.table("fig7_summary") else { return c };
    for i in s.find(&[("best_for_preset", 1i64.into())]) {
        let p = s.text(i, "preset").unwrap_or_default().to_string();
        c.push(Check::bound(format!("fig7 {p} best min delta"), s.real(i, "min_delta_db").unwrap_or(0.0), 10.0, true));
        if p == "trapped_ion" {
            c.push(Check::abs("fig7 trapped_ion optimal n", s.integer(i, "n").unwrap_or(0) as f64, 2.0, 0.0));
        }
    }
    if let Some(&i) = s.find(&[("preset", "microwave_cavity".into()), ("n", 3i64.into()), ("postselect", 1i64.into())]).first() {
        c.push(Check::abs("fig7 microwave_cavity n=3 postselected", s.real(i, "min_delta_db").unwrap_or(0.0), 12.0, 0.5));
    }
    c
}

fn prepare_checks(cfg: &ExperimentConfig, t: &ResultTable) -> Vec<Check> {
    let one = cfg.c0.norm() == 0.0 && (cfg.c1.re - 1.0).abs() < 1e-12;
    let square = gridstates::fom::supports_shift_error(&cfg.lattice);
    if one && square && cfg.preset.is_none() && t.integer(0, "n") == Some(3) && t.real(0, "input_db") == Some(16.6) {
        vec![Check::abs("prepare logical one fidelity", t.real(0, "fidelity").unwrap_or(0.0), 0.993, 0.003)]
    } else {
        Vec::new()
    }
}

/// Published-value checks that apply to `out`.
pub fn published(cfg: &ExperimentConfig, out: &RunOutput) -> Vec<Check> {
    match cfg.experiment {
        Experiment::Table1 => table1_checks(out.main()),
        Experiment::Fig2Sweep => fig2_checks(out),
        Experiment::Fig4Noise => fig4_checks(out.main()),
        Experiment::Fig5ShiftError => fig5_checks(out),
        Experiment::Fig6Vacuum => fig6_checks(out.main()),
        Experiment::Fig7Realistic => fig7_checks(out),
        Experiment::Prepare => prepare_checks(cfg, out.main()),
    }
}

pub fn checks_table(checks: &[Check]) -> Result<ResultTable> {
    let mut t = ResultTable::new(
        "audit",
        &[
            ("check", ColumnKind::Text, ""),
            ("value", ColumnKind::Real, ""),
            ("reference", ColumnKind::Real, "expected value or bound"),
            ("tolerance", ColumnKind::Real, "absolute, or relative for p_error checks"),
            ("pass", ColumnKind::Integer, "1 if the check passed"),
        ],
    );
    for c in checks {
        t.push(vec![c.name.as_str().into(), c.value.into(), c.reference.into(), c.tolerance.into(), c.pass.into()])?;
    }
    Ok(t)
}

/// Runs `cfg` at its own and at doubled dimension, then appends the audit
/// table to the base output.
pub fn audit(cfg: &ExperimentConfig) -> Result<(RunOutput, Vec<Check>)> {
    let mut base = run(cfg)?;
    let mut checks = published(cfg, &base);
    if cfg.experiment != Experiment::Table1 {
        let mut fine_cfg = cfg.clone();
        match cfg.fock_dim {
            Some(d) => fine_cfg.fock_dim = Some(2 * d),
            None => fine_cfg.dim_scale = 2.0 * cfg.dim_scale,
        }
        // Wigner grids are not figures of merit
        fine_cfg.wigner_points = 0;
        let fine = run(&fine_cfg)?;
        checks.extend(convergence(&base, &fine));
    }
    let mut t = checks_table(&checks)?;
    crate::runs::stamp(&mut t, cfg);
    base.tables.push(t);
    Ok((base, checks))
}
