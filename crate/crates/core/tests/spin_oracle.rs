//! Spin Hamiltonian against a dense eigensolver, and the spin/rotor
//! coupling against closed-form motions.

use nalgebra::Matrix3;
use proptest::prelude::*;

use nanorotor::spin::{
    build_h_spin, edh_rhs, feshbach_reduce, spin_potential, EffectiveSpin2, RotorMechanicalState,
};
use nanorotor::units::ScenarioParams;

fn dense_eigenvalues(p: &ScenarioParams, b_par: f64, b_perp: f64, gamma: f64) -> Vec<f64> {
    let h = build_h_spin(b_par, b_perp, gamma, p);
    let m = Matrix3::from_fn(|i, j| h.entries[i][j]);
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn axial_field_has_exact_doublet() {
    let p = ScenarioParams::reference();
    let b = 3e-3;
    let ev = dense_eigenvalues(&p, b, 0.0, 0.0);
    let (vp, vm) = spin_potential(b, 0.0, &p);
    let scale = p.d_zfs;
    assert!((ev[0] + 2.0 * p.d_zfs / 3.0).abs() < 1e-12 * scale);
    assert!((ev[1] - vm).abs() < 1e-12 * scale);
    assert!((ev[2] - vp).abs() < 1e-12 * scale);
}

#[test]
fn strain_splits_the_doublet_by_hypot() {
    let mut p = ScenarioParams::reference();
    p.e_strain = p.d_zfs / 60.0;
    let b = 1e-4;
    let ev = dense_eigenvalues(&p, b, 0.0, 0.0);
    let expect = 2.0 * (p.mu_spin * b).hypot(p.e_strain);
    assert!(((ev[2] - ev[1]) - expect).abs() < 1e-10 * expect);
}

#[test]
fn rotating_frame_doublet_is_hermitian_and_tracks_detuning() {
    let p = ScenarioParams::reference();
    let d = EffectiveSpin2::rotating_frame(1e-2, 0.1, &p);
    let m = d.matrix();
    assert_eq!(m[0][1], m[1][0].conj());
    let ev = d.eigenvalues();
    let detune = p.mu_spin * 1e-2 * p.beta0.cos() - p.constants.hbar * p.omega0;
    assert!(((ev[1] - ev[0]) - 2.0 * detune).abs() < 1e-6 * detune);
}

proptest! {
    #[test]
    fn feshbach_error_is_below_second_order(
        log_b in (1e-4f64).log10()..(1e-2f64).log10(),
        theta in 0.0f64..std::f64::consts::PI,
        gamma in -3.2f64..3.2,
        e_frac in 0.0f64..1.0,
    ) {
        let mut p = ScenarioParams::reference();
        p.e_strain = e_frac * p.d_zfs / 3.0 * 1e-2;
        let b = 10f64.powf(log_b);
        let exact = dense_eigenvalues(&p, b * theta.cos(), b * theta.sin(), gamma);
        let h3 = build_h_spin(b * theta.cos(), b * theta.sin(), gamma, &p);
        prop_assert!(h3.is_hermitian(1e-14));
        let eff = feshbach_reduce(&h3, &p).unwrap().eigenvalues();
        let bound = (p.mu_spin * b / p.d_zfs).powi(2) * p.d_zfs;
        prop_assert!((eff[0] - exact[1]).abs() < bound);
        prop_assert!((eff[1] - exact[2]).abs() < bound);
    }

    #[test]
    fn spin_length_is_preserved(
        s in prop::array::uniform3(-1.0f64..1.0),
        l in prop::array::uniform3(-1e-27f64..1e-27),
        b in prop::array::uniform3(-1e-2f64..1e-2),
    ) {
        let p = ScenarioParams::reference();
        let g = p.geometry().unwrap();
        let st = RotorMechanicalState { s, l, b_body: b };
        let (ds, dl) = edh_rhs(&st, &g, &p);
        let dot: f64 = s.iter().zip(&ds).map(|(a, b)| a * b).sum();
        let scale: f64 = ds.iter().map(|x| x.abs()).sum::<f64>() * s.iter().map(|x| x.abs()).sum::<f64>();
        prop_assert!(dot.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE));
        // without spin the axial angular momentum of a symmetric top is constant
        let free = RotorMechanicalState { s: [0.0; 3], l, b_body: b };
        let l2: f64 = l.iter().map(|x| x * x).sum();
        prop_assert!(edh_rhs(&free, &g, &p).1[2].abs() <= 1e-14 * l2 / g.i_perp);
        prop_assert!(dl.iter().all(|x| x.is_finite()));
    }
}

#[test]
fn reduction_refuses_strong_fields() {
    let p = ScenarioParams::reference();
    let b = p.d_zfs / p.mu_spin / 5.0;
    assert!(feshbach_reduce(&build_h_spin(b, 0.0, 0.0, &p), &p).is_err());
}
