//! Spin-1 defect Hamiltonian, its reduction to the |±1⟩ doublet, and the
//! spin/angular-momentum torque equations.

use std::fmt;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::units::{CylinderGeometry, ScenarioParams};

pub type Vec3 = [f64; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpinError {
    #[error("doublet reduction invalid: D = {d_zfs:e} J is not above 10·mu|B| = {limit:e} J")]
    ReductionInvalid { d_zfs: f64, limit: f64 },
}

/// Complex 3×3 energy matrix in the basis (|+1⟩, |0⟩, |−1⟩), joules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMatrix3 {
    pub entries: [[Complex64; 3]; 3],
}

impl SpinMatrix3 {
    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        let scale = self
            .entries
            .iter()
            .flatten()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        (0..3).all(|i| {
            (0..3)
                .all(|j| (self.entries[i][j] - self.entries[j][i].conj()).norm() <= rel_tol * scale)
        })
    }
}

/// Two-level effective Hamiltonian on (|+1⟩, |−1⟩):
/// `[[Δ₊, W*], [W, Δ₋]] + shift·𝟙`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectiveSpin2 {
    pub delta_plus: f64,
    pub delta_minus: f64,
    /// Lower off-diagonal element (⟨−1|H|+1⟩).
    #[serde(skip)]
    pub w: Complex64,
    pub shift: f64,
}

impl EffectiveSpin2 {
    /// Eigenvalues in ascending order, shift included.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.delta_plus + self.delta_minus);
        let half = 0.5 * (self.delta_plus - self.delta_minus);
        let r = half.hypot(self.w.norm());
        [self.shift + mean - r, self.shift + mean + r]
    }

    pub fn matrix(&self) -> [[Complex64; 2]; 2] {
        let s = self.shift;
        [
            [Complex64::new(self.delta_plus + s, 0.0), self.w.conj()],
            [self.w, Complex64::new(self.delta_minus + s, 0.0)],
        ]
    }

    /// Rotating-frame doublet for a spin tilted by β₀ in an axial field
    /// `bz`, at time `t`.
    pub fn rotating_frame(bz: f64, t: f64, params: &ScenarioParams) -> Self {
        let mu = params.mu_spin;
        let hbar = params.constants.hbar;
        let w0 = params.omega0;
        let (sb, cb) = params.beta0.sin_cos();
        let b_perp = bz * sb;
        let coupling = mu * mu * b_perp * b_perp / (2.0 * params.d_zfs);
        Self {
            delta_plus: mu * bz * cb - hbar * w0,
            delta_minus: -mu * bz * cb + hbar * w0,
            w: Complex64::from_polar(coupling, 2.0 * w0 * t),
            shift: params.d_zfs / 3.0 + coupling,
        }
    }
}

pub fn build_h_spin(b_par: f64, b_perp: f64, gamma: f64, params: &ScenarioParams) -> SpinMatrix3 {
    let mu = params.mu_spin;
    let d = params.d_zfs;
    let e = Complex64::new(params.e_strain, 0.0);
    let x = mu * b_perp / std::f64::consts::SQRT_2;
    let up = Complex64::from_polar(x, -gamma);
    let dn = up.conj();
    let shift = d / 3.0;
    let re = |v: f64| Complex64::new(v + shift, 0.0);
    SpinMatrix3 {
        entries: [
            [re(mu * b_par), up, e],
            [dn, re(-d), up],
            [e, dn, re(-mu * b_par)],
        ],
    }
}

/// Project out |0⟩ at second order. The reference energy is the mean of the
/// two doublet diagonals, so for the defect Hamiltonian the energy
/// denominator is exactly 𝒟.
pub fn feshbach_reduce(
    h3: &SpinMatrix3,
    params: &ScenarioParams,
) -> Result<EffectiveSpin2, SpinError> {
    let h = &h3.entries;
    // μ|B| recovered from the matrix: h00 − h22 = 2μB∥, |h01|² = μ²B⊥²/2.
    let mu_b_par = 0.5 * (h[0][0].re - h[2][2].re);
    let mu_b = (mu_b_par * mu_b_par + 2.0 * h[0][1].norm_sqr()).sqrt();
    if params.d_zfs <= 10.0 * mu_b {
        return Err(SpinError::ReductionInvalid {
            d_zfs: params.d_zfs,
            limit: 10.0 * mu_b,
        });
    }
    let e_ref = 0.5 * (h[0][0].re + h[2][2].re);
    let g = 1.0 / (e_ref - h[1][1].re);
    let h00 = h[0][0].re + h[0][1].norm_sqr() * g;
    let h22 = h[2][2].re + h[2][1].norm_sqr() * g;
    let w = h[2][0] + h[2][1] * h[1][0] * g;
    let shift = 0.5 * (h00 + h22);
    Ok(EffectiveSpin2 {
        delta_plus: h00 - shift,
        delta_minus: h22 - shift,
        w,
        shift,
    })
}

/// Branch energies `(V₊, V₋)` of the doublet in an axial field.
pub fn spin_potential(b_par: f64, e_strain: f64, params: &ScenarioParams) -> (f64, f64) {
    let r = (params.mu_spin * b_par).hypot(e_strain);
    let c = params.d_zfs / 3.0;
    (c + r, c - r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorMechanicalState {
    /// Body-frame spin direction, dimensionless.
    pub s: Vec3,
    /// Body-frame angular momentum, kg·m²/s.
    pub l: Vec3,
    /// Body-frame field, T.
    pub b_body: Vec3,
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Body-frame `(dS/dt, dL/dt)`.
///
/// dL/dt = μ B×S + ħ S×ω + L×ω and dS/dt = (μ/ħ) S×B + S×ω with
/// ω_k = L_k/I_k. The zero-field-splitting commutator in dS/dt and the
/// ħ/2I_k damping term are not included; the latter is of order 1e-12 Hz.
pub fn edh_rhs(
    state: &RotorMechanicalState,
    geometry: &CylinderGeometry,
    params: &ScenarioParams,
) -> (Vec3, Vec3) {
    let mu = params.mu_spin;
    let hbar = params.constants.hbar;
    let inertia = [geometry.i_perp, geometry.i_perp, geometry.i_3];
    let omega = [
        state.l[0] / inertia[0],
        state.l[1] / inertia[1],
        state.l[2] / inertia[2],
    ];
    let b_x_s = cross(state.b_body, state.s);
    let s_x_w = cross(state.s, omega);
    let l_x_w = cross(state.l, omega);
    let dl = std::array::from_fn(|i| mu * b_x_s[i] + hbar * s_x_w[i] + l_x_w[i]);
    let ds = std::array::from_fn(|i| -(mu / hbar) * b_x_s[i] + s_x_w[i]);
    (ds, dl)
}

/// Dimensionless checks on the rotation rate against the libration
/// frequency, the Zeeman splitting, and the |0⟩ gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowReport {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub libration_ok: bool,
    pub majorana_ok: bool,
    pub rabi_ok: bool,
}

impl WindowReport {
    pub fn pass(&self) -> bool {
        self.libration_ok && self.majorana_ok && self.rabi_ok
    }
}

impl fmt::Display for WindowReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "omega0_window: {} r1={:.4e} r2={:.4e} r3={:.4e}",
            if self.pass() { "PASS" } else { "FAIL" },
            self.r1,
            self.r2,
            self.r3
        )
    }
}

pub fn validate_omega0(params: &ScenarioParams, geometry: &CylinderGeometry) -> WindowReport {
    let mu_b = params.mu_spin * params.b0;
    let hw = params.omega0 * params.constants.hbar;
    let r1 = params.omega0 / (mu_b / geometry.i_perp).sqrt();
    let r2 = hw / mu_b;
    let r3 = hw / (params.d_zfs - mu_b);
    WindowReport {
        r1,
        r2,
        r3,
        libration_ok: r1 >= 10.0,
        majorana_ok: r2 <= 0.1,
        rabi_ok: (0.0..=0.1).contains(&r3),
    }
}
