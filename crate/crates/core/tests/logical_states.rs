//! Arbitrary logical states and the headline fidelities of the base protocol.

use std::f64::consts::PI;

use gridstates::fom::{approx_gkp_state, effective_squeezing, fidelity, logical_pauli_max, ApproxGkpParams, Logical};
use gridstates::hilbert::{db_to_r, FockSpace};
use gridstates::peaks::Objective;
use gridstates::protocol::{build_schedule, output_density, prepare_logical, preparation_strengths, run, LatticeSpec};
use gridstates::{BosonDensity, C64};
use nalgebra::DMatrix;

fn base_output(n: usize, db: f64) -> BosonDensity {
    let u = preparation_strengths(n, Objective::ShiftError).unwrap();
    output_density(&run(&build_schedule(n, &u, &LatticeSpec::square()).unwrap(), db_to_r(db)).unwrap())
}

fn factor(rho: &BosonDensity) -> DMatrix<C64> {
    match rho.normalized() {
        BosonDensity::Ensemble(c) => DMatrix::from_columns(&c),
        BosonDensity::Dense(_) => panic!("expected a low-rank ensemble"),
    }
}

/// Uhlmann fidelity of `A A†` and `B B†`: the squared trace norm of `A† B`.
fn uhlmann(a: &BosonDensity, b: &BosonDensity) -> f64 {
    let m = factor(a).adjoint() * factor(b);
    m.singular_values().sum().powi(2)
}

fn matched_fidelity(n: usize, db: f64) -> f64 {
    let rho = base_output(n, db);
    let lat = LatticeSpec::square();
    let e = effective_squeezing(&rho, &lat).unwrap();
    let space = FockSpace::new(rho.dim()).unwrap();
    let target = approx_gkp_state(&ApproxGkpParams::new(db_to_r(db), e.delta_p, Logical::One, lat), space).unwrap();
    fidelity(&rho, &target).unwrap()
}

#[test]
fn uhlmann_helper_reduces_to_overlap_for_pure_states() {
    let a = [C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0)];
    let b = [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let f = uhlmann(&BosonDensity::pure(&a), &BosonDensity::pure(&b));
    assert!((f - 0.36).abs() < 1e-12);
}

#[test]
fn two_round_fidelity_at_eleven_and_a_half_db() {
    let f = matched_fidelity(2, 11.5);
    assert!((f - 0.935).abs() <= 0.005, "{f}");
}

#[test]
fn three_round_fidelity_at_sixteen_point_six_db() {
    let f = matched_fidelity(3, 16.6);
    assert!((f - 0.993).abs() <= 0.003, "{f}");
}

#[test]
fn protocol_output_is_logical_one() {
    let p = logical_pauli_max(&base_output(3, 16.6), &LatticeSpec::square()).unwrap();
    assert!(p.value > 0.9, "{p:?}");
    assert!(p.c1.norm() > 0.99 && p.z.re < -0.9, "{p:?}");
}

#[test]
fn logical_one_matches_the_base_protocol() {
    let u = preparation_strengths(3, Objective::ShiftError).unwrap();
    let r = db_to_r(16.6);
    let lp = prepare_logical(3, &u, &LatticeSpec::square(), C64::new(0.0, 0.0), C64::new(1.0, 0.0), r, None).unwrap();
    let f = uhlmann(&lp.state, &base_output(3, 16.6));
    assert!(f >= 0.99, "{f}");
    assert!(lp.target_fidelity > 0.97, "{}", lp.target_fidelity);
}

#[test]
fn magic_state_points_between_x_and_z() {
    let u = preparation_strengths(3, Objective::ShiftError).unwrap();
    let (c, s) = ((PI / 8.0).cos(), (PI / 8.0).sin());
    let lat = LatticeSpec::square();
    let lp = prepare_logical(3, &u, &lat, C64::new(c, 0.0), C64::new(s, 0.0), db_to_r(16.6), None).unwrap();
    assert!(lp.target_fidelity > 0.9, "{}", lp.target_fidelity);
    let p = logical_pauli_max(&lp.state, &lat).unwrap();
    assert!(p.value > 0.9, "{p:?}");
    // Bloch direction of the argmax against (x + z)/√2
    let bz = p.c0.norm_sqr() - p.c1.norm_sqr();
    let bx = 2.0 * (p.c0.conj() * p.c1).re;
    let by = 2.0 * (p.c0.conj() * p.c1).im;
    let cos = (bx + bz) / 2f64.sqrt();
    assert!(cos > 0.99 && by.abs() < 0.05, "({bx}, {by}, {bz})");
}

#[test]
fn hexagonal_zero_is_squeezed_along_both_stabilizers() {
    let u = preparation_strengths(3, Objective::ShiftError).unwrap();
    let hex = LatticeSpec::hexagonal();
    let lp = prepare_logical(3, &u, &hex, C64::new(1.0, 0.0), C64::new(0.0, 0.0), db_to_r(15.0), None).unwrap();
    let e = effective_squeezing(&lp.state, &hex).unwrap();
    assert!(e.delta_x_db > 10.0 && e.delta_p_db > 10.0, "{e:?}");
    let p = logical_pauli_max(&lp.state, &hex).unwrap();
    assert!(p.value > 0.9 && p.c0.norm() > 0.99, "{p:?}");
}

#[test]
fn unnormalised_amplitudes_are_rejected() {
    let u = [0.0, 0.045];
    let r = prepare_logical(2, &u, &LatticeSpec::square(), C64::new(1.0, 0.0), C64::new(1.0, 0.0), 1.0, None);
    assert!(r.is_err());
}
