//! Whole-protocol physics on shortened and full runs, checked against
//! closed forms.

use approx::assert_relative_eq;

use nanorotor::config::RunSettings;
use nanorotor::contrast::{
    common_mode, contrast_thermal, libration_summary_closed_form, mismatches_closed_form,
    Occupation,
};
use nanorotor::dynamics::{run_pair, DynamicsOptions, SpinLabel};
use nanorotor::field::FieldProfile;
use nanorotor::runner::compute_point;
use nanorotor::units::ScenarioParams;

/// With no spin coupling both arms follow the diamagnetic common mode,
/// which is known in closed form.
#[test]
fn spinless_motion_matches_closed_form() {
    let mut p = ScenarioParams::reference();
    p.mu_spin = 1e-40;
    let prof = FieldProfile::new(&p);
    let opts = DynamicsOptions {
        n_output: 1001,
        ..Default::default()
    };
    let pair = run_pair(&p, &prof, &opts).unwrap();
    for s in pair.plus.samples.iter().step_by(50) {
        let (z, v) = common_mode(s.t, &p);
        let zs = z.abs().max(1e-9);
        assert!(
            (s.z - z).abs() <= 1e-6 * zs + 1e-12,
            "t={} z={} closed={}",
            s.t,
            s.z,
            z
        );
        assert!((s.z_dot - v).abs() <= 1e-6 * v.abs().max(1e-7));
    }
}

/// Before the libration shifts matter, the ±1 arms are mirror images about
/// the common mode.
#[test]
fn early_split_is_symmetric_about_common_mode() {
    let mut p = ScenarioParams::reference();
    let k = 0.01;
    p.tau1 *= k;
    p.tau2 *= k;
    p.t_flip *= k;
    p.t_closed *= k;
    let prof = FieldProfile::new(&p);
    let pair = run_pair(&p, &prof, &DynamicsOptions::default()).unwrap();
    assert_eq!(pair.plus.initial_label, SpinLabel::Plus);
    let (a, b) = (&pair.plus.samples[1000], &pair.minus.samples[1000]);
    let (zc, _) = common_mode(a.t, &p);
    let (da, db) = (a.z - zc, b.z - zc);
    assert!(da > 0.0 && db < 0.0);
    assert_relative_eq!(da, -db, max_relative = 1e-3);
}

#[test]
fn fixed_and_adaptive_steps_agree() {
    let mut p = ScenarioParams::reference();
    let k = 0.05;
    p.tau1 *= k;
    p.tau2 *= k;
    p.t_flip *= k;
    p.t_closed *= k;
    let adaptive = compute_point(&p, &RunSettings::default()).unwrap();
    let fixed = compute_point(
        &p,
        &RunSettings {
            fixed_step: true,
            ..Default::default()
        },
    )
    .unwrap();
    let (a, f) = (adaptive.pair.plus.last(), fixed.pair.plus.last());
    assert_relative_eq!(a.z, f.z, max_relative = 1e-6);
    assert_relative_eq!(a.beta, f.beta, max_relative = 1e-6);
}

#[test]
fn contrast_rises_with_spin_rate_under_closed_forms() {
    let mut last = 0.0;
    for w in [1e4, 2e4, 4e4, 8e4] {
        let mut p = ScenarioParams::reference();
        p.omega0 = 2.0 * std::f64::consts::PI * w;
        let g = p.geometry().unwrap();
        let m = mismatches_closed_form(&p, &g, 20001);
        let s = libration_summary_closed_form(&p, &g, 20001);
        let c = contrast_thermal(
            &m,
            &s,
            p.constants.hbar,
            None,
            Occupation::Number(5.0),
            &p,
            &g,
        )
        .unwrap()
        .c_thermal;
        assert!(c > last, "{w}: {c} <= {last}");
        last = c;
    }
}

#[test]
fn occupation_from_temperature_hand_value() {
    let mut p = ScenarioParams::reference();
    p.omega0 = 2.0 * std::f64::consts::PI * 8e4;
    let n = nanorotor::contrast::occupation_number(1e-4, &p).unwrap();
    // k_B T / (hbar w0) = 1.380649e-27 / (1.054571817e-34 * 502654.8)
    assert_relative_eq!(n, 26.045, max_relative = 1e-3);
}
