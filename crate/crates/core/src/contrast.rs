//! Closed-form libration quantities and the spin-contrast lower bounds.

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::{ArmPair, RotorState, SpinLabel};
use crate::field::{FieldProfile, Stage};
use crate::units::{CylinderGeometry, ScenarioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContrastError {
    #[error("`{key}` must be > 0 (got {value})")]
    NonPositive { key: &'static str, value: f64 },
    #[error("`{key}` must be >= 0 (got {value})")]
    Negative { key: &'static str, value: f64 },
    #[error("contrast bound needs a spinning rotor (omega0 > 0)")]
    NotRotating,
}

/// Libration angular frequency: ω₀I₃/I for a spinning rotor, otherwise the
/// pendulum frequency sqrt(μB₀/I).
pub fn libration_frequency(params: &ScenarioParams, geometry: &CylinderGeometry) -> f64 {
    if params.omega0 > 0.0 {
        params.omega0 * geometry.inertia_ratio
    } else {
        (params.mu_spin * params.b0 / geometry.i_perp).sqrt()
    }
}

/// `(I/I₃)² μ β₀ / (I ω₀²)`: equilibrium shift per tesla per unit spin.
fn shift_per_tesla(params: &ScenarioParams, geometry: &CylinderGeometry) -> f64 {
    let r = 1.0 / geometry.inertia_ratio;
    r * r * params.mu_spin * params.beta0 / (geometry.i_perp * params.omega0 * params.omega0)
}

/// Equilibrium libration angle for spin `s` in axial field `bz`.
pub fn beta_bar(
    s: SpinLabel,
    bz: f64,
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
) -> f64 {
    if params.omega0 == 0.0 {
        return params.beta0;
    }
    params.beta0 + s.value() * bz * shift_per_tesla(params, geometry)
}

/// Initial libration amplitude A_β(0) = (I/I₃)² μB₀β₀/(Iω₀²).
pub fn amplitude_initial(params: &ScenarioParams, geometry: &CylinderGeometry) -> f64 {
    params.b0 * shift_per_tesla(params, geometry)
}

/// Upper estimate for the libration mismatch at closure, 8 A_β(0).
pub fn delta_beta_bound(params: &ScenarioParams, geometry: &CylinderGeometry) -> f64 {
    8.0 * amplitude_initial(params, geometry)
}

/// sqrt(Iω₀ / 2ħ): converts a libration amplitude to a coherent-state label.
pub fn kappa_scale(params: &ScenarioParams, geometry: &CylinderGeometry) -> f64 {
    (geometry.i_perp * params.omega0 / (2.0 * params.constants.hbar)).sqrt()
}

/// Thermal occupation of the libration mode, k_B T / (ħω₀).
pub fn occupation_number(temperature: f64, params: &ScenarioParams) -> Result<f64, ContrastError> {
    if temperature < 0.0 || temperature.is_nan() {
        return Err(ContrastError::Negative {
            key: "T_lib",
            value: temperature,
        });
    }
    if params.omega0 <= 0.0 {
        return Err(ContrastError::NotRotating);
    }
    Ok(params.constants.kb * temperature / (params.constants.hbar * params.omega0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LibrationSummary {
    pub a_beta_0: f64,
    pub a_beta_closed_bound: f64,
    pub times: Vec<f64>,
    /// Equilibrium track of whichever arm currently holds s = +1 (or the
    /// first label of the pair).
    pub beta_bar_plus: Vec<f64>,
    pub beta_bar_minus: Vec<f64>,
    pub delta_beta_bar_flip: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// (I₃/I)(ω₀/β₀)(Σ_A − Σ_B)
    pub delta_alpha_estimate: f64,
    pub bz_closed: f64,
}

fn trapezoid(t: &[f64], f: &[f64], lo: f64, hi: f64) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .filter(|(w, _)| w[0] >= lo && w[1] <= hi)
        .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
        .sum()
}

fn summary_from_tracks(
    times: Vec<f64>,
    bz_a: &[f64],
    bz_b: &[f64],
    labels_a: &[SpinLabel],
    labels_b: &[SpinLabel],
    bz_closed: f64,
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
) -> LibrationSummary {
    let n = times.len();
    let mut plus = Vec::with_capacity(n);
    let mut minus = Vec::with_capacity(n);
    for k in 0..n {
        let ba = beta_bar(labels_a[k], bz_a[k], params, geometry);
        let bb = beta_bar(labels_b[k], bz_b[k], params, geometry);
        if times[k] <= params.t_flip {
            plus.push(ba);
            minus.push(bb);
        } else {
            plus.push(bb);
            minus.push(ba);
        }
    }
    let diff: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| p - m).collect();
    let sigma_a = trapezoid(&times, &diff, 0.0, params.t_flip);
    let sigma_b = trapezoid(&times, &diff, params.t_flip, params.t_closed);
    let k = shift_per_tesla(params, geometry);
    let a0 = amplitude_initial(params, geometry);
    let bz_flip = {
        // field seen at the flip, interpolated on the grid
        let i = times.partition_point(|&t| t < params.t_flip).min(n - 1);
        bz_a[i]
    };
    let delta_alpha_estimate = if params.omega0 > 0.0 {
        geometry.inertia_ratio * params.omega0 / params.beta0 * (sigma_a - sigma_b)
    } else {
        0.0
    };
    LibrationSummary {
        a_beta_0: a0,
        a_beta_closed_bound: 3.0 * a0,
        times,
        beta_bar_plus: plus,
        beta_bar_minus: minus,
        delta_beta_bar_flip: 2.0 * k * bz_flip.abs(),
        sigma_a,
        sigma_b,
        delta_alpha_estimate,
        bz_closed,
    }
}

fn arm_fields(states: &[RotorState], profile: &FieldProfile) -> (Vec<f64>, Vec<SpinLabel>) {
    states
        .iter()
        .map(|s| (profile.sample_in_stage(s.stage, s.t, s.z).bz, s.s_label))
        .unzip()
}

/// Equilibrium tracks and mismatch areas from simulated arms, each arm
/// using the field at its own position. Uses the dense grid when both arms
/// kept one.
pub fn libration_summary(
    pair: &ArmPair,
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
    profile: &FieldProfile,
) -> LibrationSummary {
    let (a, b) = match (&pair.plus.dense, &pair.minus.dense) {
        (Some(a), Some(b)) => (a.as_slice(), b.as_slice()),
        _ => (pair.plus.samples.as_slice(), pair.minus.samples.as_slice()),
    };
    let times: Vec<f64> = a.iter().map(|s| s.t).collect();
    let (bz_a, la) = arm_fields(a, profile);
    let (bz_b, lb) = arm_fields(b, profile);
    let bz_closed = 0.5 * (bz_a[bz_a.len() - 1] + bz_b[bz_b.len() - 1]);
    summary_from_tracks(times, &bz_a, &bz_b, &la, &lb, bz_closed, params, geometry)
}

/// Evolve u = z − Z₀ under ü = k u for time dt.
fn propagate(u: f64, v: f64, k: f64, dt: f64) -> (f64, f64) {
    if k < 0.0 {
        let w = (-k).sqrt();
        let (s, c) = (w * dt).sin_cos();
        (u * c + v / w * s, -u * w * s + v * c)
    } else if k > 0.0 {
        let w = k.sqrt();
        let (s, c) = ((w * dt).sinh(), (w * dt).cosh());
        (u * c + v / w * s, u * w * s + v * c)
    } else {
        (u + v * dt, v)
    }
}

/// Spin-independent centre-of-mass motion `(z, ż)` from rest at z = 0,
/// solved piecewise in closed form (sharp switching only).
pub fn common_mode(t: f64, params: &ScenarioParams) -> (f64, f64) {
    let z0 = params.z0();
    let k = params.chi_rho * params.eta * params.eta / params.constants.mu0;
    let (mut u, mut v) = (-z0, 0.0);
    let t1 = t.min(params.tau1);
    (u, v) = propagate(u, v, k, t1);
    if t > params.tau1 {
        let t2 = t.min(params.tau2) - params.tau1;
        (u, v) = propagate(u, v, 0.0, t2);
    }
    if t > params.tau2 {
        (u, v) = propagate(u, v, k, t - params.tau2);
    }
    (u + z0, v)
}

/// Equilibrium tracks and mismatch areas from the common-mode field alone,
/// without integrating the arms.
pub fn libration_summary_closed_form(
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
    n_grid: usize,
) -> LibrationSummary {
    let profile = FieldProfile {
        ramp_width: None,
        ..FieldProfile::new(params)
    };
    let n = n_grid.max(2);
    let mut times: Vec<f64> = (0..n)
        .map(|k| params.t_closed * k as f64 / (n - 1) as f64)
        .collect();
    // make sure the flip and switch instants are grid points
    for t in [params.tau1, params.tau2, params.t_flip] {
        let i = times.partition_point(|&x| x < t);
        if times.get(i) != Some(&t) {
            times.insert(i, t);
        }
    }
    let stage_for = |t: f64| {
        if t <= params.tau1 {
            Stage::Split
        } else {
            profile.stage_at(t)
        }
    };
    let bz: Vec<f64> = times
        .iter()
        .map(|&t| {
            profile
                .sample_in_stage(stage_for(t), t, common_mode(t, params).0)
                .bz
        })
        .collect();
    let pre = |t: f64| t <= params.t_flip;
    let la: Vec<SpinLabel> = times
        .iter()
        .map(|&t| {
            if pre(t) {
                SpinLabel::Plus
            } else {
                SpinLabel::Minus
            }
        })
        .collect();
    let lb: Vec<SpinLabel> = times
        .iter()
        .map(|&t| {
            if pre(t) {
                SpinLabel::Minus
            } else {
                SpinLabel::Plus
            }
        })
        .collect();
    let bz_closed = bz[bz.len() - 1];
    summary_from_tracks(times, &bz, &bz, &la, &lb, bz_closed, params, geometry)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MismatchSet {
    pub delta_beta: f64,
    pub delta_alpha: f64,
    pub delta_gamma: f64,
    /// Area-based δα estimate, for comparison with the integrated value.
    pub delta_alpha_sigma_estimate: Option<f64>,
}

/// Angle differences between the arms at closure.
pub fn mismatches(pair: &ArmPair, summary: Option<&LibrationSummary>) -> MismatchSet {
    let (a, b) = (pair.plus.last(), pair.minus.last());
    MismatchSet {
        delta_beta: a.beta - b.beta,
        delta_alpha: a.alpha - b.alpha,
        delta_gamma: a.gamma - b.gamma,
        delta_alpha_sigma_estimate: summary.map(|s| s.delta_alpha_estimate),
    }
}

/// Mismatches regenerated from the closed forms: δβ at its bound,
/// δα from the areas and δγ = −δα.
pub fn mismatches_closed_form(
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
    n_grid: usize,
) -> MismatchSet {
    let s = libration_summary_closed_form(params, geometry, n_grid);
    MismatchSet {
        delta_beta: delta_beta_bound(params, geometry),
        delta_alpha: s.delta_alpha_estimate,
        delta_gamma: -s.delta_alpha_estimate,
        delta_alpha_sigma_estimate: Some(s.delta_alpha_estimate),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContrastReport {
    pub c_zero: f64,
    pub c_thermal: f64,
    pub kappa0_abs: f64,
    pub kappa_closed_bound: f64,
    pub delta_x: f64,
    pub n_occ: f64,
    pub dp_alpha: f64,
    pub dp_gamma: f64,
    pub delta_alpha: f64,
    pub delta_gamma: f64,
    /// Exponent contributions: α, γ and libration (zero-temperature).
    pub exponent_alpha: f64,
    pub exponent_gamma: f64,
    pub exponent_libration: f64,
}

/// How the thermal occupation is specified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Occupation {
    Number(f64),
    Temperature(f64),
}

/// Zero-temperature contrast lower bound. `dp_gamma = None` uses
/// Δp_α cos β₀.
pub fn contrast_zero_t(
    mismatch: &MismatchSet,
    summary: &LibrationSummary,
    dp_alpha: f64,
    dp_gamma: Option<f64>,
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
) -> Result<ContrastReport, ContrastError> {
    contrast_thermal(
        mismatch,
        summary,
        dp_alpha,
        dp_gamma,
        Occupation::Number(0.0),
        params,
        geometry,
    )
}

/// Finite-temperature contrast lower bound; reduces to the zero-temperature
/// value at n = 0.
pub fn contrast_thermal(
    mismatch: &MismatchSet,
    summary: &LibrationSummary,
    dp_alpha: f64,
    dp_gamma: Option<f64>,
    occupation: Occupation,
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
) -> Result<ContrastReport, ContrastError> {
    if params.omega0 <= 0.0 {
        return Err(ContrastError::NotRotating);
    }
    let dp_gamma = dp_gamma.unwrap_or(dp_alpha * params.beta0.cos());
    for (key, value) in [("dp_alpha", dp_alpha), ("dp_gamma", dp_gamma)] {
        if !(value > 0.0) {
            return Err(ContrastError::NonPositive { key, value });
        }
    }
    let n = match occupation {
        Occupation::Number(n) => {
            if !(n >= 0.0) {
                return Err(ContrastError::Negative { key: "n", value: n });
            }
            n
        }
        Occupation::Temperature(t) => occupation_number(t, params)?,
    };
    let hbar = params.constants.hbar;
    let i = geometry.i_perp;
    let w0 = params.omega0;
    let r = 1.0 / geometry.inertia_ratio;
    let mu_b0_beta0 = params.mu_spin * params.b0 * params.beta0;
    let lib = r.powi(4) * 16.0 * mu_b0_beta0 * mu_b0_beta0 / (hbar * i * w0.powi(3));
    let ea = (mismatch.delta_alpha * dp_alpha / hbar).powi(2) / 2.0;
    let eg = (mismatch.delta_gamma * dp_gamma / hbar).powi(2) / 2.0;
    let c_zero = (-(ea + eg + lib)).exp();
    let c_thermal = (-(ea + eg + (1.0 + 2.0 * n) * lib)).exp();
    let ks = kappa_scale(params, geometry);
    let kappa0 = ks * summary.a_beta_0;
    let delta_x = ks * 2.0 * summary.bz_closed.abs() * shift_per_tesla(params, geometry);
    Ok(ContrastReport {
        c_zero,
        c_thermal,
        kappa0_abs: kappa0,
        kappa_closed_bound: 3.0 * kappa0,
        delta_x,
        n_occ: n,
        dp_alpha,
        dp_gamma,
        delta_alpha: mismatch.delta_alpha,
        delta_gamma: mismatch.delta_gamma,
        exponent_alpha: ea,
        exponent_gamma: eg,
        exponent_libration: lib,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (ScenarioParams, CylinderGeometry) {
        let p = ScenarioParams::reference();
        let g = p.geometry().unwrap();
        (p, g)
    }

    fn zero_mismatch() -> MismatchSet {
        MismatchSet {
            delta_beta: 0.0,
            delta_alpha: 0.0,
            delta_gamma: 0.0,
            delta_alpha_sigma_estimate: None,
        }
    }

    #[test]
    fn initial_amplitude_hand_value() {
        let (p, g) = setup();
        let r = g.i_perp / g.i_3;
        let hand = r * r * p.mu_spin * 1e-2 * 0.01
            / (g.i_perp * (2.0 * std::f64::consts::PI * 1e4f64).powi(2));
        assert_relative_eq!(amplitude_initial(&p, &g), hand, max_relative = 1e-12);
        assert!((hand - 7.06e-6).abs() < 0.02e-6, "{hand}");
    }

    #[test]
    fn zero_field_means_no_area() {
        let (mut p, g) = setup();
        p.b0 = 1e-30;
        p.b1 = 0.0;
        let s = libration_summary_closed_form(&p, &g, 2001);
        assert!(s.sigma_a.abs() < 1e-30 && s.sigma_b.abs() < 1e-30);
        assert!(s.beta_bar_plus.iter().all(|&b| (b - p.beta0).abs() < 1e-25));
    }

    #[test]
    fn common_mode_oscillates_about_z0() {
        let (p, _) = setup();
        let w = (-p.chi_rho * p.eta * p.eta / p.constants.mu0).sqrt();
        let t = 0.3;
        let (z, v) = common_mode(t, &p);
        assert_relative_eq!(z, p.z0() * (1.0 - (w * t).cos()), max_relative = 1e-12);
        assert_relative_eq!(v, p.z0() * w * (w * t).sin(), max_relative = 1e-12);
    }

    #[test]
    fn contrast_limits() {
        let (mut p, g) = setup();
        p.omega0 = 1e12;
        let s = libration_summary_closed_form(&p, &g, 101);
        let r = contrast_zero_t(&zero_mismatch(), &s, p.constants.hbar, None, &p, &g).unwrap();
        assert!(r.c_zero > 1.0 - 1e-9);
    }

    #[test]
    fn thermal_reduces_at_zero_occupation() {
        let (p, g) = setup();
        let s = libration_summary_closed_form(&p, &g, 2001);
        let m = MismatchSet {
            delta_beta: 1e-6,
            delta_alpha: 0.05,
            delta_gamma: -0.05,
            delta_alpha_sigma_estimate: None,
        };
        let hb = p.constants.hbar;
        let z = contrast_zero_t(&m, &s, hb, None, &p, &g).unwrap();
        let t = contrast_thermal(&m, &s, hb, None, Occupation::Number(0.0), &p, &g).unwrap();
        assert_eq!(z.c_zero, t.c_thermal);
        assert!(contrast_thermal(&m, &s, hb, None, Occupation::Number(-1.0), &p, &g).is_err());
        assert!(contrast_thermal(&m, &s, hb, None, Occupation::Temperature(-1.0), &p, &g).is_err());
    }

    #[test]
    fn occupation_from_temperature() {
        let (mut p, _) = setup();
        p.omega0 = 2.0 * std::f64::consts::PI * 8e4;
        let n = occupation_number(1e-4, &p).unwrap();
        let hand = 1.380649e-23 * 1e-4 / (6.62607015e-34 / (2.0 * std::f64::consts::PI) * p.omega0);
        assert_relative_eq!(n, hand, max_relative = 1e-12);
        assert!((n - 26.0).abs() < 0.5, "{n}");
    }

    #[test]
    fn requires_rotation() {
        let (mut p, g) = setup();
        let s = libration_summary_closed_form(&p, &g, 11);
        p.omega0 = 0.0;
        assert_eq!(
            contrast_zero_t(&zero_mismatch(), &s, 1e-34, None, &p, &g),
            Err(ContrastError::NotRotating)
        );
    }

    #[test]
    fn closed_form_alpha_scales_inverse_omega() {
        let (mut p, g) = setup();
        let a = mismatches_closed_form(&p, &g, 20001);
        p.omega0 *= 2.0;
        let b = mismatches_closed_form(&p, &g, 20001);
        assert_relative_eq!(a.delta_alpha / b.delta_alpha, 2.0, max_relative = 1e-9);
        assert_relative_eq!(a.delta_beta / b.delta_beta, 4.0, max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ordering_and_monotonicity(
                da in -1.0f64..1.0,
                dg in -1.0f64..1.0,
                dp in 0.1f64..30.0,
                n in 0.0f64..100.0,
                dn in 0.01f64..10.0,
            ) {
                let (p, g) = setup();
                let s = libration_summary_closed_form(&p, &g, 11);
                let hb = p.constants.hbar;
                let m = MismatchSet { delta_beta: 0.0, delta_alpha: da, delta_gamma: dg, delta_alpha_sigma_estimate: None };
                let r = contrast_thermal(&m, &s, dp * hb, None, Occupation::Number(n), &p, &g).unwrap();
                // stay inside the range where exp(-x) is a normal f64, with
                // room for the perturbed cases below
                let x = 1.21 * (r.exponent_alpha + r.exponent_gamma) + (1.0 + 2.0 * (n + dn)) * r.exponent_libration;
                prop_assume!(x < 700.0);
                prop_assert!(r.c_thermal > 0.0);
                prop_assert!(r.c_thermal <= r.c_zero && r.c_zero <= 1.0);
                let r2 = contrast_thermal(&m, &s, dp * hb, None, Occupation::Number(n + dn), &p, &g).unwrap();
                prop_assert!(r2.c_thermal < r.c_thermal);
                if da != 0.0 {
                    let r3 = contrast_thermal(&m, &s, dp * hb * 1.1, Some(dp * hb * p.beta0.cos()), Occupation::Number(n), &p, &g).unwrap();
                    prop_assert!(r3.c_thermal < r.c_thermal);
                }
                if dg != 0.0 {
                    let r4 = contrast_thermal(&m, &s, dp * hb, Some(dp * hb * 1.1), Occupation::Number(n), &p, &g).unwrap();
                    prop_assert!(r4.c_thermal < r.c_thermal);
                }
            }

            #[test]
            fn closed_form_contrast_rises_with_omega(w in 1e4f64..1e5, k in 1.05f64..3.0) {
                let (mut p, g) = setup();
                let hb = p.constants.hbar;
                p.omega0 = 2.0 * std::f64::consts::PI * w;
                let s1 = libration_summary_closed_form(&p, &g, 4001);
                let c1 = contrast_zero_t(&mismatches_closed_form(&p, &g, 4001), &s1, hb, None, &p, &g).unwrap();
                p.omega0 *= k;
                let s2 = libration_summary_closed_form(&p, &g, 4001);
                let c2 = contrast_zero_t(&mismatches_closed_form(&p, &g, 4001), &s2, hb, None, &p, &g).unwrap();
                prop_assert!(c2.c_zero > c1.c_zero);
            }
        }
    }
}
