//! Physical constants, scenario parameters and cylinder geometry.
//!
//! Everything is stored in SI. Energies that are conventionally quoted as
//! `h × frequency` (zero-field splittings, the spin moment) are converted
//! once, in [`ScenarioParams::from_frequencies`] or by the config loader, and
//! the rest of the crate only ever sees joules.

use std::f64::consts::PI;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Planck constant, J·s (exact SI value).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Vacuum permeability as used by the reference parameter table, H/m.
pub const MU0_TABLE: f64 = 1.257e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("parameter `{key}` out of range: {reason}")]
    OutOfRange { key: &'static str, reason: String },
    #[error("parameter `{key}` must be finite")]
    NotFinite { key: &'static str },
    #[error("inconsistent shape: {0}")]
    Shape(String),
}

fn out_of_range(key: &'static str, reason: impl Into<String>) -> ParamError {
    ParamError::OutOfRange {
        key,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub h: f64,
    pub hbar: f64,
    pub mu0: f64,
    pub kb: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            h: PLANCK,
            hbar: PLANCK / (2.0 * PI),
            mu0: MU0_TABLE,
            kb: BOLTZMANN,
        }
    }
}

/// How the cylinder's aspect is pinned down once mass and density are known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ShapeSpec {
    /// Height fixed, radius follows from the volume.
    Height(f64),
    /// Diameter-to-height ratio fixed, radius and height solved jointly.
    AspectRatio(f64),
}

/// All physical and protocol constants of one interferometer scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioParams {
    pub constants: PhysicalConstants,
    /// kg
    pub mass: f64,
    /// kg/m³
    pub density: f64,
    /// Mass magnetic susceptibility, m³/kg (negative for a diamagnet).
    pub chi_rho: f64,
    /// Axial zero-field splitting, J.
    pub d_zfs: f64,
    /// Transverse (strain) splitting, J.
    pub e_strain: f64,
    /// Spin magnetic moment, J/T.
    pub mu_spin: f64,
    /// Defect offset from the centre of mass, m.
    pub d_off: f64,
    /// Fixed angle between the spin axis and the offset vector, rad.
    pub alpha_prime: f64,
    /// Initial libration angle, rad.
    pub beta0: f64,
    /// Initial spin-axis rotation rate, rad/s.
    pub omega0: f64,
    pub shape: ShapeSpec,
    /// T
    pub b0: f64,
    /// T
    pub b1: f64,
    /// T/m
    pub eta: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub t_flip: f64,
    pub t_closed: f64,
    /// Optional tanh switching width for the field stages, s. `None` is the
    /// discontinuous piecewise law.
    pub ramp_width: Option<f64>,
}

impl ScenarioParams {
    /// Reference scenario: m = 1e-17 kg, L = 100 nm, ω₀ = 2π × 10 kHz.
    pub fn reference() -> Self {
        let constants = PhysicalConstants::default();
        let h = constants.h;
        Self {
            constants,
            mass: 1e-17,
            density: 3.5e3,
            chi_rho: -6.2e-9,
            d_zfs: h * 2.87e9,
            e_strain: 0.0,
            mu_spin: h * 2.8e10,
            d_off: 10e-9,
            alpha_prime: PI / 6.0,
            beta0: 0.01,
            omega0: 2.0 * PI * 1e4,
            shape: ShapeSpec::Height(100e-9),
            b0: 1e-2,
            b1: 1e-4,
            eta: 45.0,
            tau1: 0.482,
            tau2: 0.514,
            t_flip: 0.8022,
            t_closed: 1.320,
            ramp_width: None,
        }
    }

    /// Build from spectroscopic inputs: splittings in Hz and the moment in
    /// Hz/T, each multiplied by `h` here and nowhere else.
    pub fn from_frequencies(
        mut base: ScenarioParams,
        d_zfs_hz: f64,
        e_strain_hz: f64,
        mu_spin_hz_per_t: f64,
    ) -> Result<Self, ParamError> {
        let h = base.constants.h;
        base.d_zfs = h * d_zfs_hz;
        base.e_strain = h * e_strain_hz;
        base.mu_spin = h * mu_spin_hz_per_t;
        base.validate()?;
        Ok(base)
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        let finite: [(&'static str, f64); 18] = [
            ("mass", self.mass),
            ("density", self.density),
            ("chi_rho", self.chi_rho),
            ("D_zfs", self.d_zfs),
            ("E_strain", self.e_strain),
            ("mu_spin", self.mu_spin),
            ("d_off", self.d_off),
            ("alpha_prime", self.alpha_prime),
            ("beta0", self.beta0),
            ("omega0", self.omega0),
            ("B0", self.b0),
            ("B1", self.b1),
            ("eta", self.eta),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("t_flip", self.t_flip),
            ("t_closed", self.t_closed),
            ("ramp_width", self.ramp_width.unwrap_or(0.0)),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(ParamError::NotFinite { key });
            }
        }
        for (key, v) in [
            ("mass", self.mass),
            ("density", self.density),
            ("B0", self.b0),
            ("eta", self.eta),
            ("D_zfs", self.d_zfs),
            ("mu_spin", self.mu_spin),
        ] {
            if v <= 0.0 {
                return Err(out_of_range(key, format!("{v} must be > 0")));
            }
        }
        match self.shape {
            ShapeSpec::Height(l) if !(l.is_finite() && l > 0.0) => {
                return Err(out_of_range("L_height", format!("{l} must be > 0")))
            }
            ShapeSpec::AspectRatio(q) if !(q.is_finite() && q > 0.0) => {
                return Err(out_of_range("DL_ratio", format!("{q} must be > 0")))
            }
            _ => {}
        }
        if self.e_strain < 0.0 || self.e_strain > self.d_zfs / 3.0 {
            return Err(out_of_range(
                "E_strain",
                format!(
                    "{:e} J outside [0, D_zfs/3 = {:e} J]",
                    self.e_strain,
                    self.d_zfs / 3.0
                ),
            ));
        }
        if !(self.beta0 > 0.0 && self.beta0 < PI / 2.0) {
            return Err(out_of_range("beta0", "must lie in (0, pi/2)"));
        }
        if self.omega0 < 0.0 {
            return Err(out_of_range("omega0", "must be >= 0"));
        }
        if self.d_off < 0.0 {
            return Err(out_of_range("d_off", "must be >= 0"));
        }
        if let Some(w) = self.ramp_width {
            if w <= 0.0 {
                return Err(out_of_range("ramp_width", "must be > 0 when set"));
            }
        }
        if !(0.0 < self.tau1) {
            return Err(out_of_range("tau1", "must be > 0"));
        }
        if !(self.tau1 < self.tau2) {
            return Err(out_of_range("tau2", "must exceed tau1"));
        }
        if !(self.tau2 < self.t_flip) {
            return Err(out_of_range("t_flip", "must exceed tau2"));
        }
        if !(self.t_flip < self.t_closed) {
            return Err(out_of_range("t_closed", "must exceed t_flip"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<CylinderGeometry, ParamError> {
        build_geometry(self.mass, self.density, self.shape)
    }

    /// Hex SHA-256 of the canonical JSON form of the parameters.
    pub fn hash_hex(&self) -> String {
        let json = serde_json::to_vec(self).expect("parameters serialize");
        hex::encode(Sha256::digest(&json))
    }

    /// Centre of the diamagnetic potential, `B0 / eta`.
    pub fn z0(&self) -> f64 {
        self.b0 / self.eta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderGeometry {
    pub radius: f64,
    pub height: f64,
    /// Transverse moment of inertia I = I₁ = I₂.
    pub i_perp: f64,
    /// Symmetry-axis moment of inertia.
    pub i_3: f64,
    /// I₃ / I, in (0, 2).
    pub inertia_ratio: f64,
}

impl CylinderGeometry {
    /// Geometry of a solid cylinder of given mass, radius and height.
    pub fn from_dimensions(mass: f64, radius: f64, height: f64) -> Self {
        let i_perp = mass * (3.0 * radius * radius + height * height) / 12.0;
        let i_3 = mass * radius * radius / 2.0;
        Self {
            radius,
            height,
            i_perp,
            i_3,
            inertia_ratio: 6.0 * radius * radius / (3.0 * radius * radius + height * height),
        }
    }

    pub fn diameter_to_height(&self) -> f64 {
        2.0 * self.radius / self.height
    }
}

/// Radius of a cylinder with the given mass, density and height.
pub fn radius_from_mass(mass: f64, density: f64, height: f64) -> Result<f64, ParamError> {
    for (key, v) in [("mass", mass), ("density", density), ("L_height", height)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(out_of_range(key, format!("{v} must be > 0")));
        }
    }
    Ok((mass / (density * PI * height)).sqrt())
}

pub fn build_geometry(
    mass: f64,
    density: f64,
    shape: ShapeSpec,
) -> Result<CylinderGeometry, ParamError> {
    match shape {
        ShapeSpec::Height(height) => {
            let radius = radius_from_mass(mass, density, height)?;
            Ok(CylinderGeometry::from_dimensions(mass, radius, height))
        }
        ShapeSpec::AspectRatio(ratio) => {
            if !(ratio.is_finite() && ratio > 0.0) {
                return Err(out_of_range("DL_ratio", format!("{ratio} must be > 0")));
            }
            if !(mass > 0.0 && density > 0.0) {
                return Err(out_of_range("mass", "mass and density must be > 0"));
            }
            // m = ρ π R² L with L = 2R / ratio.
            let radius = (mass * ratio / (2.0 * PI * density)).cbrt();
            Ok(CylinderGeometry::from_dimensions(
                mass,
                radius,
                2.0 * radius / ratio,
            ))
        }
    }
}

/// Resolve the two optional shape inputs of a config into one [`ShapeSpec`].
/// Supplying both is accepted only when they describe the same cylinder.
pub fn resolve_shape(
    mass: f64,
    density: f64,
    height: Option<f64>,
    ratio: Option<f64>,
) -> Result<ShapeSpec, ParamError> {
    match (height, ratio) {
        (Some(l), None) => Ok(ShapeSpec::Height(l)),
        (None, Some(q)) => Ok(ShapeSpec::AspectRatio(q)),
        (None, None) => Err(ParamError::Shape(
            "one of L_height or DL_ratio is required".into(),
        )),
        (Some(l), Some(q)) => {
            let geom = build_geometry(mass, density, ShapeSpec::Height(l))?;
            let implied = geom.diameter_to_height();
            if ((implied - q) / q).abs() > 1e-6 {
                Err(ParamError::Shape(format!(
                    "L_height = {l:e} m implies D/L = {implied:.6}, but DL_ratio = {q}"
                )))
            } else {
                Ok(ShapeSpec::Height(l))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeClass {
    LongCylinder,
    Normal,
    Disk,
}

impl ShapeClass {
    pub fn label(self) -> &'static str {
        match self {
            ShapeClass::LongCylinder => "long-cylinder",
            ShapeClass::Normal => "normal",
            ShapeClass::Disk => "disk",
        }
    }
}

/// Label a cylinder by its diameter-to-height ratio: ≤ 0.3 long, ≥ 3 disk.
pub fn classify_shape(geometry: &CylinderGeometry) -> ShapeClass {
    let q = geometry.diameter_to_height();
    if q <= 0.3 {
        ShapeClass::LongCylinder
    } else if q < 3.0 {
        ShapeClass::Normal
    } else {
        ShapeClass::Disk
    }
}
