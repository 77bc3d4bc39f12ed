//! Equations of motion for one interferometer arm and the driver that runs
//! the two arms over the staged field protocol.
//!
//! The integrated state is `[z, ż, β − β_ref, β̇, α, γ − ω₀t]`. Offsetting β
//! and γ by their reference motion keeps the small quantities of interest
//! (libration about β₀, drift of γ away from uniform spin) resolvable by the
//! step-size controller; the public [`RotorState`] always reports plain
//! angles.

use serde::Serialize;
use thiserror::Error;

use crate::contrast::{beta_bar, libration_frequency};
use crate::field::{defect_field, FieldError, FieldProfile, FieldSample, Stage};
use crate::integrator::{
    integrate, DenseStep, IntegrationError, IntegratorOptions, SegmentStats, StepMode,
};
use crate::spin::validate_omega0;
use crate::units::{CylinderGeometry, ParamError, ScenarioParams};

/// Below this |sin β| the gyroscopic terms are replaced by their
/// expansion about β₀.
pub const CHART_EPS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("beta = {beta} left the chart (0, pi)")]
    ChartExit { beta: f64 },
    #[error("arm s0={label}: {source}")]
    Integration {
        label: i8,
        #[source]
        source: IntegrationError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, PartialOrd, Ord)]
pub enum SpinLabel {
    Minus,
    Zero,
    Plus,
}

impl SpinLabel {
    pub fn value(self) -> f64 {
        self.as_i8() as f64
    }

    pub fn as_i8(self) -> i8 {
        match self {
            SpinLabel::Minus => -1,
            SpinLabel::Zero => 0,
            SpinLabel::Plus => 1,
        }
    }
}

/// Which two spin states carry the arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PairKind {
    /// s = {+1, −1}
    PlusMinus,
    /// s = {0, −1}
    ZeroMinus,
}

impl PairKind {
    pub fn labels(self) -> (SpinLabel, SpinLabel) {
        match self {
            PairKind::PlusMinus => (SpinLabel::Plus, SpinLabel::Minus),
            PairKind::ZeroMinus => (SpinLabel::Zero, SpinLabel::Minus),
        }
    }

    /// Label after the mid-loop microwave swap.
    pub fn flipped(self, s: SpinLabel) -> SpinLabel {
        let (a, b) = self.labels();
        if s == a {
            b
        } else {
            a
        }
    }

    pub fn auto(params: &ScenarioParams) -> Self {
        if params.omega0 > 0.0 {
            PairKind::PlusMinus
        } else {
            PairKind::ZeroMinus
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RotorState {
    pub t: f64,
    pub z: f64,
    pub z_dot: f64,
    pub beta: f64,
    pub beta_dot: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub s_label: SpinLabel,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedMomenta {
    pub p_alpha: f64,
    pub p_gamma: f64,
}

impl ConservedMomenta {
    pub fn new(params: &ScenarioParams, geometry: &CylinderGeometry) -> Self {
        let p_gamma = geometry.i_3 * params.omega0;
        Self {
            p_alpha: p_gamma * params.beta0.cos(),
            p_gamma,
        }
    }

    /// Momenta implied by the angular velocities at angle β.
    pub fn from_velocities(
        beta: f64,
        alpha_dot: f64,
        gamma_dot: f64,
        geometry: &CylinderGeometry,
    ) -> Self {
        let p_gamma = geometry.i_3 * (alpha_dot * beta.cos() + gamma_dot);
        Self {
            p_alpha: geometry.i_perp * alpha_dot * beta.sin().powi(2) + p_gamma * beta.cos(),
            p_gamma,
        }
    }
}

/// `μ|B∥| / sqrt((μB∥)² + E²)` with B∥ = B_z cos β; exactly 1 when E = 0.
pub fn strain_factor(bz: f64, beta: f64, params: &ScenarioParams) -> f64 {
    if params.e_strain == 0.0 {
        return 1.0;
    }
    let x = (params.mu_spin * bz * beta.cos()).abs();
    x / x.hypot(params.e_strain)
}

/// Centre-of-mass acceleration along z.
///
/// Spin force `−sμ cos β ∂B_z/∂z / m`, scaled by [`strain_factor`], plus the
/// diamagnetic force `(χ_ρ/μ₀) B_z ∂B_z/∂z`, which pulls toward the field
/// zero at Z₀ for χ_ρ < 0.
pub fn z_rhs(state: &RotorState, sample: &FieldSample, params: &ScenarioParams) -> f64 {
    let s = state.s_label.value();
    let spin = -s * params.mu_spin * state.beta.cos() * sample.dbz_dz / params.mass
        * strain_factor(sample.bz, state.beta, params);
    let dia = params.chi_rho / params.constants.mu0 * sample.bz * sample.dbz_dz;
    spin + dia
}

/// Gyroscopic part of β̈ for a spinning rotor,
/// `(p_α − p_γ cos β)(p_α cos β − p_γ) / (I² sin³β)`, where p_α = p_γ cos β₀.
pub fn gyroscopic_beta_accel(
    beta: f64,
    beta0: f64,
    momenta: &ConservedMomenta,
    geometry: &CylinderGeometry,
) -> f64 {
    let (sb, cb) = beta.sin_cos();
    let i = geometry.i_perp;
    let u = momenta.p_gamma * cos_difference(beta0, beta);
    u * (momenta.p_alpha * cb - momenta.p_gamma) / (i * i * sb.powi(3))
}

fn gyroscopic_linear(
    beta: f64,
    beta0: f64,
    momenta: &ConservedMomenta,
    geometry: &CylinderGeometry,
) -> f64 {
    let w = momenta.p_gamma / geometry.i_perp;
    -w * w * (beta - beta0)
}

/// Spin torque part of β̈: `(sμ/I)[B sin β · f_E − d ∂B_z/∂z sin α′]`.
pub fn spin_beta_accel(
    s: SpinLabel,
    beta: f64,
    b_torque: f64,
    sample: &FieldSample,
    geometry: &CylinderGeometry,
    params: &ScenarioParams,
) -> f64 {
    let f_e = strain_factor(sample.bz, beta, params);
    s.value() * params.mu_spin / geometry.i_perp
        * (b_torque * beta.sin() * f_e - params.d_off * sample.dbz_dz * params.alpha_prime.sin())
}

/// Full nonlinear libration acceleration. Returns the acceleration and
/// whether the near-pole substitution was used. With ω₀ = 0 β is a plain
/// pendulum angle and only the torque term remains.
pub fn beta_rhs_full(
    state: &RotorState,
    momenta: &ConservedMomenta,
    b_torque: f64,
    sample: &FieldSample,
    geometry: &CylinderGeometry,
    params: &ScenarioParams,
) -> Result<(f64, bool), DynamicsError> {
    let torque = spin_beta_accel(
        state.s_label,
        state.beta,
        b_torque,
        sample,
        geometry,
        params,
    );
    if params.omega0 == 0.0 {
        return Ok((torque, false));
    }
    let beta = state.beta;
    if !(beta > 0.0 && beta < std::f64::consts::PI) || !beta.is_finite() {
        return Err(DynamicsError::ChartExit { beta });
    }
    if beta.sin() < CHART_EPS {
        return Ok((
            gyroscopic_linear(beta, params.beta0, momenta, geometry) + torque,
            true,
        ));
    }
    Ok((
        gyroscopic_beta_accel(beta, params.beta0, momenta, geometry) + torque,
        false,
    ))
}

/// First-order expansion of [`beta_rhs_full`] about β₀.
pub fn beta_rhs_linearized(
    state: &RotorState,
    momenta: &ConservedMomenta,
    b_torque: f64,
    sample: &FieldSample,
    geometry: &CylinderGeometry,
    params: &ScenarioParams,
) -> f64 {
    let b0 = params.beta0;
    let db = state.beta - b0;
    let s = state.s_label.value();
    let f_e = strain_factor(sample.bz, b0, params);
    gyroscopic_linear(state.beta, b0, momenta, geometry)
        + s * params.mu_spin / geometry.i_perp
            * (b_torque * (b0.sin() + b0.cos() * db) * f_e
                - params.d_off * sample.dbz_dz * params.alpha_prime.sin())
}

fn cos_difference(a: f64, b: f64) -> f64 {
    // cos a − cos b without cancellation
    -2.0 * (0.5 * (a + b)).sin() * (0.5 * (a - b)).sin()
}

/// `(α̇, γ̇)` from the conserved momenta.
pub fn alpha_gamma_rhs(
    state: &RotorState,
    momenta: &ConservedMomenta,
    geometry: &CylinderGeometry,
) -> (f64, f64) {
    let beta0 = if momenta.p_gamma == 0.0 {
        0.0
    } else {
        (momenta.p_alpha / momenta.p_gamma).clamp(-1.0, 1.0).acos()
    };
    angular_rates(state.beta, beta0, momenta, geometry)
}

/// As [`alpha_gamma_rhs`] with β₀ supplied directly, which avoids
/// recovering it through an arccosine.
pub fn angular_rates(
    beta: f64,
    beta0: f64,
    momenta: &ConservedMomenta,
    geometry: &CylinderGeometry,
) -> (f64, f64) {
    let sb = beta.sin().max(CHART_EPS);
    let numer = if momenta.p_gamma == 0.0 {
        momenta.p_alpha
    } else {
        momenta.p_gamma * cos_difference(beta0, beta)
    };
    let alpha_dot = numer / (geometry.i_perp * sb * sb);
    let gamma_dot = momenta.p_gamma / geometry.i_3 - alpha_dot * beta.cos();
    (alpha_dot, gamma_dot)
}

/// Total energy of one arm within a stage: rotor kinetic energy, centre of
/// mass kinetic energy, spin potential and diamagnetic potential. It is
/// conserved between field switches.
pub fn hamiltonian(
    state: &RotorState,
    momenta: &ConservedMomenta,
    sample: &FieldSample,
    geometry: &CylinderGeometry,
    params: &ScenarioParams,
) -> f64 {
    let i = geometry.i_perp;
    let beta = state.beta;
    let s = state.s_label.value();
    let mut h = 0.5 * i * state.beta_dot * state.beta_dot;
    if params.omega0 > 0.0 {
        let u = momenta.p_gamma * cos_difference(params.beta0, beta);
        h += 0.5 * momenta.p_gamma * momenta.p_gamma / geometry.i_3
            + u * u / (2.0 * i * beta.sin().powi(2));
    }
    let b_par = sample.bz * beta.cos();
    let zeeman = if params.e_strain == 0.0 {
        params.mu_spin * b_par
    } else {
        b_par.signum() * (params.mu_spin * b_par).hypot(params.e_strain)
    };
    h += s * zeeman;
    h += s * params.mu_spin * params.d_off * sample.eta_tilde * params.alpha_prime.sin() * beta;
    h += 0.5 * params.mass * state.z_dot * state.z_dot;
    h -= params.chi_rho * params.mass * sample.bz * sample.bz / (2.0 * params.constants.mu0);
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsOptions {
    pub integrator: IntegratorOptions,
    /// Points on the uniform output grid, end points included.
    pub n_output: usize,
    /// Optional finer grid kept for quadrature.
    pub dense_grid: Option<usize>,
    /// Use the defect field in the Zeeman torque as well.
    pub strict_bnv: bool,
    /// `None` picks {+1, −1} for ω₀ > 0 and {0, −1} otherwise.
    pub pair: Option<PairKind>,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorOptions::default(),
            n_output: 10_001,
            dense_grid: None,
            strict_bnv: false,
            pair: None,
        }
    }
}

impl DynamicsOptions {
    /// Fixed step of 1/50 of the fastest libration period.
    pub fn fixed_step(params: &ScenarioParams, geometry: &CylinderGeometry) -> f64 {
        let w = if params.omega0 > 0.0 {
            params.omega0 * geometry.inertia_ratio
        } else {
            (params.mu_spin * params.b0 / geometry.i_perp).sqrt()
        };
        2.0 * std::f64::consts::PI / (50.0 * w)
    }

    pub fn with_fixed_step(mut self, params: &ScenarioParams, geometry: &CylinderGeometry) -> Self {
        self.integrator.mode = StepMode::Fixed {
            dt: Self::fixed_step(params, geometry),
        };
        self
    }

    pub fn pair_kind(&self, params: &ScenarioParams) -> PairKind {
        self.pair.unwrap_or_else(|| PairKind::auto(params))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmEvent {
    pub t: f64,
    pub kind: String,
}

/// Per-arm numerical and physical diagnostics gathered on every accepted
/// step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArmDiagnostics {
    pub steps: SegmentStats,
    pub chart_substitutions: usize,
    pub max_beta_excursion: f64,
    /// Libration amplitude `sqrt((β−β̄)² + (β̇/ω)²)`; zero-valued when ω₀ = 0.
    pub amplitude_initial: f64,
    pub amplitude_pre_flip_max: f64,
    pub amplitude_post_flip_min: f64,
    pub amplitude_post_flip_max: f64,
    pub amplitude_closed: f64,
    /// Largest |H − H(τ₁)| over the hold stage, J.
    pub hold_energy_drift: f64,
    /// |H(τ₁)| without the constant spin term p_γ²/2I₃, J; the scale the
    /// drift is judged against.
    pub hold_energy_scale: f64,
    /// Largest relative deviation of (p_α, p_γ) recomputed from the
    /// interpolated angular velocities.
    pub momentum_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmTrajectory {
    pub initial_label: SpinLabel,
    pub samples: Vec<RotorState>,
    #[serde(skip)]
    pub dense: Option<Vec<RotorState>>,
    pub events: Vec<ArmEvent>,
    pub params_hash: String,
    pub diagnostics: ArmDiagnostics,
}

impl ArmTrajectory {
    pub fn last(&self) -> &RotorState {
        self.samples.last().expect("non-empty trajectory")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmPair {
    pub kind: PairKind,
    /// Arm that starts in the first label of the pair (+1, or 0).
    pub plus: ArmTrajectory,
    /// Arm that starts in −1.
    pub minus: ArmTrajectory,
}

impl ArmPair {
    /// `(t, z_plus − z_minus)` on the shared grid.
    pub fn delta_z(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.plus
            .samples
            .iter()
            .zip(&self.minus.samples)
            .map(|(a, b)| (a.t, a.z - b.z))
    }

    pub fn max_abs_delta_z(&self) -> f64 {
        self.delta_z().map(|(_, d)| d.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_delta_z_dot(&self) -> f64 {
        self.plus
            .samples
            .iter()
            .zip(&self.minus.samples)
            .map(|(a, b)| (a.z_dot - b.z_dot).abs())
            .fold(0.0, f64::max)
    }
}

fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    // t_end * k / (n - 1) can overshoot t_end by an ulp at k = n - 1
    (0..n)
        .map(|k| {
            if k + 1 == n {
                t_end
            } else {
                t_end * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

struct Model<'a> {
    params: &'a ScenarioParams,
    geometry: &'a CylinderGeometry,
    profile: FieldProfile,
    momenta: ConservedMomenta,
    strict_bnv: bool,
    beta_ref: f64,
}

impl Model<'_> {
    fn to_state(&self, t: f64, y: &[f64; 6], s: SpinLabel, stage: Stage) -> RotorState {
        RotorState {
            t,
            z: y[0],
            z_dot: y[1],
            beta: self.beta_ref + y[2],
            beta_dot: y[3],
            alpha: y[4],
            gamma: y[5] + self.params.omega0 * t,
            s_label: s,
            stage,
        }
    }

    fn sample(&self, stage: Stage, t: f64, z: f64) -> FieldSample {
        self.profile.sample_in_stage(stage, t, z)
    }

    fn rhs(
        &self,
        stage: Stage,
        s: SpinLabel,
        t: f64,
        y: &[f64; 6],
        subs: &mut usize,
    ) -> Result<[f64; 6], String> {
        let st = self.to_state(t, y, s, stage);
        let fs = self.sample(stage, t, st.z);
        let zdd = z_rhs(&st, &fs, self.params);
        let b_torque = if self.strict_bnv {
            defect_field(&fs, st.beta, self.params)
        } else {
            fs.bz
        };
        let (bdd, sub) = beta_rhs_full(
            &st,
            &self.momenta,
            b_torque,
            &fs,
            self.geometry,
            self.params,
        )
        .map_err(|e| e.to_string())?;
        if sub {
            *subs += 1;
        }
        let (ad, psi_dot) = if self.params.omega0 > 0.0 {
            let (ad, _) = angular_rates(st.beta, self.params.beta0, &self.momenta, self.geometry);
            let drift = self.momenta.p_gamma / self.geometry.i_3 - self.params.omega0;
            (ad, drift - ad * st.beta.cos())
        } else {
            (0.0, 0.0)
        };
        Ok([y[1], zdd, y[3], bdd, ad, psi_dot])
    }
}

/// Integrate one arm from rest at z = 0 over the whole protocol.
pub fn integrate_arm(
    initial: SpinLabel,
    params: &ScenarioParams,
    profile: &FieldProfile,
    options: &DynamicsOptions,
) -> Result<ArmTrajectory, DynamicsError> {
    params.validate()?;
    let geometry = params.geometry()?;
    let kind = options.pair_kind(params);
    let rotating = params.omega0 > 0.0;
    let beta_ref = if rotating { params.beta0 } else { 0.0 };
    let model = Model {
        params,
        geometry: &geometry,
        profile: *profile,
        momenta: ConservedMomenta::new(params, &geometry),
        strict_bnv: options.strict_bnv,
        beta_ref,
    };

    let mut events = Vec::new();
    let window = validate_omega0(params, &geometry);
    if !window.pass() {
        events.push(ArmEvent {
            t: 0.0,
            kind: format!("warning {window}"),
        });
    }

    let grid = uniform_grid(params.t_closed, options.n_output);
    let dense_grid = options.dense_grid.map(|n| uniform_grid(params.t_closed, n));
    let mut samples = Vec::with_capacity(grid.len());
    let mut dense_samples = dense_grid.as_ref().map(|g| Vec::with_capacity(g.len()));
    let mut next = 0usize;
    let mut next_dense = 0usize;

    let omega_lib = libration_frequency(params, &geometry);
    let amp = |st: &RotorState, bz: f64| -> f64 {
        if !rotating {
            return 0.0;
        }
        let bb = beta_bar(st.s_label, bz, params, &geometry);
        (st.beta - bb).hypot(st.beta_dot / omega_lib)
    };

    let mut y = [0.0; 6];
    let mut s = initial;
    let first_stage = profile.stage_at(0.0);
    let st0 = model.to_state(0.0, &y, s, first_stage);
    let bz0 = model.sample(first_stage, 0.0, 0.0).bz;
    let mut diag = ArmDiagnostics {
        steps: SegmentStats::default(),
        chart_substitutions: 0,
        max_beta_excursion: 0.0,
        amplitude_initial: amp(&st0, bz0),
        amplitude_pre_flip_max: amp(&st0, bz0),
        amplitude_post_flip_min: f64::INFINITY,
        amplitude_post_flip_max: 0.0,
        amplitude_closed: 0.0,
        hold_energy_drift: 0.0,
        hold_energy_scale: 0.0,
        momentum_rel_dev: 0.0,
    };

    let segments = [
        (0.0, params.tau1, Stage::Split, false),
        (params.tau1, params.tau2, Stage::Hold, false),
        (params.tau2, params.t_flip, Stage::Recombine, false),
        (params.t_flip, params.t_closed, Stage::Recombine, true),
    ];
    let mut hold_ref: Option<f64> = None;
    let mut subs_total = 0usize;

    for (t0, t1, stage, flip_first) in segments {
        if flip_first {
            let to = kind.flipped(s);
            events.push(ArmEvent {
                t: t0,
                kind: format!("spin_flip {} -> {}", s.as_i8(), to.as_i8()),
            });
            s = to;
        }
        events.push(ArmEvent {
            t: t0,
            kind: format!("segment {}", stage.label()),
        });
        let post_flip = t0 >= params.t_flip;
        if stage == Stage::Hold && hold_ref.is_none() {
            let st = model.to_state(t0, &y, s, stage);
            let fs = model.sample(stage, t0, st.z);
            let h = hamiltonian(&st, &model.momenta, &fs, &geometry, params);
            let spin = if rotating {
                0.5 * model.momenta.p_gamma * model.momenta.p_gamma / geometry.i_3
            } else {
                0.0
            };
            diag.hold_energy_scale = (h - spin).abs();
            hold_ref = Some(h);
        }
        let mut subs = 0usize;
        let observer = |step: &DenseStep<6>| {
            while next < grid.len() && grid[next] <= step.t1 && (grid[next] > step.t0 || next == 0)
            {
                let tg = grid[next];
                let yy = step.eval(tg);
                samples.push(model.to_state(tg, &yy, s, stage));
                if rotating {
                    let dy = step.derivative(tg);
                    let bet = model.beta_ref + yy[2];
                    let p = ConservedMomenta::from_velocities(
                        bet,
                        dy[4],
                        dy[5] + params.omega0,
                        &geometry,
                    );
                    let dev = ((p.p_alpha - model.momenta.p_alpha) / model.momenta.p_alpha)
                        .abs()
                        .max(((p.p_gamma - model.momenta.p_gamma) / model.momenta.p_gamma).abs());
                    diag.momentum_rel_dev = diag.momentum_rel_dev.max(dev);
                }
                next += 1;
            }
            if let (Some(g), Some(out)) = (dense_grid.as_ref(), dense_samples.as_mut()) {
                while next_dense < g.len()
                    && g[next_dense] <= step.t1
                    && (g[next_dense] > step.t0 || next_dense == 0)
                {
                    let tg = g[next_dense];
                    out.push(model.to_state(tg, &step.eval(tg), s, stage));
                    next_dense += 1;
                }
            }
            let st = model.to_state(step.t1, &step.y1, s, stage);
            let fs = model.sample(stage, step.t1, st.z);
            diag.max_beta_excursion = diag.max_beta_excursion.max((st.beta - beta_ref).abs());
            let a = amp(&st, fs.bz);
            if post_flip {
                diag.amplitude_post_flip_min = diag.amplitude_post_flip_min.min(a);
                diag.amplitude_post_flip_max = diag.amplitude_post_flip_max.max(a);
            } else {
                diag.amplitude_pre_flip_max = diag.amplitude_pre_flip_max.max(a);
            }
            if stage == Stage::Hold {
                let h = hamiltonian(&st, &model.momenta, &fs, &geometry, params);
                let r = hold_ref.unwrap_or(h);
                diag.hold_energy_drift = diag.hold_energy_drift.max((h - r).abs());
            }
        };
        let result = integrate(
            |t, yy: &[f64; 6]| model.rhs(stage, s, t, yy, &mut subs),
            t0,
            y,
            t1,
            &options.integrator,
            observer,
        );
        let (y_end, stats) = result.map_err(|source| DynamicsError::Integration {
            label: initial.as_i8(),
            source,
        })?;
        diag.steps += stats;
        subs_total += subs;
        if subs > 0 {
            events.push(ArmEvent {
                t: t1,
                kind: format!("chart_substitution count={subs}"),
            });
        }
        y = y_end;
    }
    diag.chart_substitutions = subs_total;
    let end = model.to_state(params.t_closed, &y, s, Stage::Recombine);
    diag.amplitude_closed = amp(
        &end,
        model.sample(Stage::Recombine, params.t_closed, end.z).bz,
    );
    if !diag.amplitude_post_flip_min.is_finite() {
        diag.amplitude_post_flip_min = 0.0;
    }

    Ok(ArmTrajectory {
        initial_label: initial,
        samples,
        dense: dense_samples,
        events,
        params_hash: params.hash_hex(),
        diagnostics: diag,
    })
}

/// Run both arms (concurrently) on the shared output grid.
pub fn run_pair(
    params: &ScenarioParams,
    profile: &FieldProfile,
    options: &DynamicsOptions,
) -> Result<ArmPair, DynamicsError> {
    let kind = options.pair_kind(params);
    let (a, b) = kind.labels();
    let (pa, pb) = rayon::join(
        || integrate_arm(a, params, profile, options),
        || integrate_arm(b, params, profile, options),
    );
    Ok(ArmPair {
        kind,
        plus: pa?,
        minus: pb?,
    })
}
