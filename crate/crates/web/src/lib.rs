//! WebAssembly bindings for the static page in `www/`.

use gridstates::fom::{effective_squeezing, wigner};
use gridstates::hilbert::{db_to_r, partial_trace_qubit, FockSpace};
use gridstates::peaks::{self, Objective};
use gridstates::protocol::{build_schedule, preparation_strengths, run_in, LatticeSpec};
use gridstates::BosonDensity;
use wasm_bindgen::prelude::*;

/// Largest Fock dimension the page will simulate.
pub const MAX_DIM: usize = 1200;
pub const MAX_WIGNER_POINTS: usize = 121;

fn objective(name: &str) -> gridstates::Result<Objective> {
    match name {
        "shift_error" => Ok(Objective::ShiftError),
        "delta_p" => Ok(Objective::DeltaP),
        _ => Err(gridstates::Error::Degenerate(format!("unknown objective '{name}'"))),
    }
}

/// Comb weights followed by `[delta_p_db, p_error]`.
pub fn comb(n: usize, u: &[f64]) -> gridstates::Result<Vec<f64>> {
    let d = peaks::coefficients(n, u)?;
    let f = peaks::fom(&d.coeffs)?;
    let mut out = d.coeffs;
    out.extend([f.delta_p_db, f.p_error]);
    Ok(out)
}

fn output(n: usize, input_db: f64) -> gridstates::Result<BosonDensity> {
    let r = db_to_r(input_db);
    let space = FockSpace::for_protocol(n, r);
    if space.dim() > MAX_DIM {
        return Err(gridstates::Error::Degenerate(format!(
            "needs {} Fock states; the page stops at {MAX_DIM}",
            space.dim()
        )));
    }
    let u = preparation_strengths(n, Objective::ShiftError)?;
    let schedule = build_schedule(n, &u, &LatticeSpec::square())?;
    Ok(partial_trace_qubit(&run_in(&schedule, space, r)?.state))
}

/// `[delta_x_db, delta_p_db, fock_dim]` of the noiseless protocol output.
pub fn squeezing(n: usize, input_db: f64) -> gridstates::Result<Vec<f64>> {
    let rho = output(n, input_db)?;
    let e = effective_squeezing(&rho, &LatticeSpec::square())?;
    Ok(vec![e.delta_x_db, e.delta_p_db, rho.dim() as f64])
}

/// `W(x, p)` on `points × points` samples of `[-extent, extent]²`,
/// `p` fastest.
pub fn wigner_values(n: usize, input_db: f64, points: usize, extent: f64) -> gridstates::Result<Vec<f64>> {
    if !(2..=MAX_WIGNER_POINTS).contains(&points) || !(extent > 0.0) {
        return Err(gridstates::Error::Degenerate("bad Wigner grid".into()));
    }
    let rho = output(n, input_db)?;
    let axis: Vec<f64> = (0..points)
        .map(|i| -extent + 2.0 * extent * i as f64 / (points - 1) as f64)
        .collect();
    let g = wigner(&rho, &axis, &axis);
    Ok(g.values.transpose().as_slice().to_vec())
}

fn js<T>(r: gridstates::Result<T>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = defaultStrengths)]
pub fn default_strengths(n: usize, objective_name: &str) -> Result<Vec<f64>, JsError> {
    js(objective(objective_name).and_then(|o| preparation_strengths(n, o)))
}

#[wasm_bindgen(js_name = combWeights)]
pub fn comb_weights(n: usize, u: Vec<f64>) -> Result<Vec<f64>, JsError> {
    js(comb(n, &u))
}

#[wasm_bindgen(js_name = outputSqueezing)]
pub fn output_squeezing(n: usize, input_db: f64) -> Result<Vec<f64>, JsError> {
    js(squeezing(n, input_db))
}

#[wasm_bindgen(js_name = wignerGrid)]
pub fn wigner_grid(n: usize, input_db: f64, points: usize, extent: f64) -> Result<Vec<f64>, JsError> {
    js(wigner_values(n, input_db, points, extent))
}
