//! Staged axial magnetic field at the centre of mass.

use serde::Serialize;
use thiserror::Error;

use crate::units::ScenarioParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field sampled at negative time t = {0}")]
    NegativeTime(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Split,
    Hold,
    Recombine,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Split => "split",
            Stage::Hold => "hold",
            Stage::Recombine => "recombine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldProfile {
    pub b0: f64,
    pub b1: f64,
    pub eta: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub z0: f64,
    pub ramp_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSample {
    pub bz: f64,
    pub dbz_dz: f64,
    pub eta_tilde: f64,
    pub stage: Stage,
}

impl FieldProfile {
    pub fn new(params: &ScenarioParams) -> Self {
        Self {
            b0: params.b0,
            b1: params.b1,
            eta: params.eta,
            tau1: params.tau1,
            tau2: params.tau2,
            z0: params.b0 / params.eta,
            ramp_width: params.ramp_width,
        }
    }

    /// Stage that owns time `t`; the hold stage is closed on both ends.
    pub fn stage_at(&self, t: f64) -> Stage {
        if t < self.tau1 {
            Stage::Split
        } else if t <= self.tau2 {
            Stage::Hold
        } else {
            Stage::Recombine
        }
    }

    pub fn sample(&self, t: f64, z: f64) -> Result<FieldSample, FieldError> {
        if t < 0.0 || t.is_nan() {
            return Err(FieldError::NegativeTime(t));
        }
        Ok(self.sample_in_stage(self.stage_at(t), t, z))
    }

    /// Evaluate with the stage fixed by the caller. An integrator working on
    /// one stage segment uses this so that its end-point evaluations at
    /// τ₁ or τ₂ stay on the segment's own branch.
    pub fn sample_in_stage(&self, stage: Stage, t: f64, z: f64) -> FieldSample {
        let lin = self.b0 - self.eta * z;
        if let Some(w) = self.ramp_width {
            let s1 = 0.5 * (1.0 + ((t - self.tau1) / w).tanh());
            let s2 = 0.5 * (1.0 + ((t - self.tau2) / w).tanh());
            let eta_tilde = -self.eta * (1.0 - s1) + self.eta * s2;
            let bz = lin * (1.0 - s1) + self.b1 * s1 * (1.0 - s2) - lin * s2;
            return FieldSample {
                bz,
                dbz_dz: eta_tilde,
                eta_tilde,
                stage,
            };
        }
        let (bz, eta_tilde) = match stage {
            Stage::Split => (lin, -self.eta),
            Stage::Hold => (self.b1, 0.0),
            Stage::Recombine => (-lin, self.eta),
        };
        FieldSample {
            bz,
            dbz_dz: eta_tilde,
            eta_tilde,
            stage,
        }
    }
}

/// Field at the off-centre defect: `B_z + η̃ d cos(β + α′)`.
pub fn defect_field(sample: &FieldSample, beta: f64, params: &ScenarioParams) -> f64 {
    sample.bz + sample.eta_tilde * params.d_off * (beta + params.alpha_prime).cos()
}

pub fn field_at_defect(
    t: f64,
    z: f64,
    beta: f64,
    params: &ScenarioParams,
    profile: &FieldProfile,
) -> Result<f64, FieldError> {
    Ok(defect_field(&profile.sample(t, z)?, beta, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup() -> (ScenarioParams, FieldProfile) {
        let p = ScenarioParams::reference();
        let f = FieldProfile::new(&p);
        (p, f)
    }

    #[test]
    fn stage_values() {
        let (_, f) = setup();
        let s = f.sample(0.0, 0.0).unwrap();
        assert_eq!(s.bz, 1e-2);
        assert_eq!(s.stage, Stage::Split);
        assert_eq!(s.eta_tilde, -45.0);
        let s = f.sample(0.5, 3e-5).unwrap();
        assert_eq!((s.bz, s.eta_tilde, s.stage), (1e-4, 0.0, Stage::Hold));
        let s = f.sample(1.0, 0.0).unwrap();
        assert_eq!((s.bz, s.eta_tilde), (-1e-2, 45.0));
    }

    #[test]
    fn zero_crossing_at_z0() {
        let (_, f) = setup();
        assert_eq!(f.z0, 1e-2 / 45.0);
        assert!(f.sample(0.0, f.z0).unwrap().bz.abs() < 1e-18);
    }

    #[test]
    fn negative_time_rejected() {
        let (_, f) = setup();
        assert!(f.sample(-1e-9, 0.0).is_err());
    }

    #[test]
    fn stage_boundaries() {
        let (_, f) = setup();
        assert_eq!(f.stage_at(f.tau1), Stage::Hold);
        assert_eq!(f.stage_at(f.tau2), Stage::Hold);
        assert_eq!(f.stage_at(f.tau2 + 1e-12), Stage::Recombine);
    }

    #[test]
    fn defect_offset_at_start() {
        let (p, f) = setup();
        let bnv = field_at_defect(0.0, 0.0, 0.01, &p, &f).unwrap();
        let hand = -45.0 * 10e-9 * (0.01f64 + std::f64::consts::PI / 6.0).cos();
        assert_relative_eq!(bnv - 1e-2, hand, max_relative = 1e-8);
        assert!((hand + 3.9e-7).abs() < 0.05e-7);
    }

    #[test]
    fn defect_equals_axis_field() {
        let (p, f) = setup();
        assert_eq!(field_at_defect(0.5, 0.0, 0.3, &p, &f).unwrap(), 1e-4);
        let beta = std::f64::consts::FRAC_PI_2 - p.alpha_prime;
        let s = f.sample(0.1, 0.0).unwrap();
        assert!((defect_field(&s, beta, &p) - s.bz).abs() < 1e-20);
    }

    #[test]
    fn ramp_limits() {
        let mut p = ScenarioParams::reference();
        p.ramp_width = Some(1e-4);
        let f = FieldProfile::new(&p);
        let s = f.sample(0.1, 0.0).unwrap();
        assert_relative_eq!(s.bz, 1e-2, max_relative = 1e-12);
        let s = f.sample(0.498, 0.0).unwrap();
        assert_relative_eq!(s.bz, 1e-4, max_relative = 1e-9);
        assert!(s.eta_tilde.abs() < 1e-9);
        let s = f.sample(1.0, 0.0).unwrap();
        assert_relative_eq!(s.bz, -1e-2, max_relative = 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn recombine_is_negated_split(z in -1e-3f64..1e-3, t1 in 0.0f64..0.48, t2 in 0.52f64..2.0) {
                let (_, f) = setup();
                let a = f.sample(t1, z).unwrap();
                let b = f.sample(t2, z).unwrap();
                prop_assert_eq!(a.bz, -b.bz);
                prop_assert_eq!(a.eta_tilde, -b.eta_tilde);
            }

            #[test]
            fn defect_offset_bounded(t in 0.0f64..1.4, z in -1e-4f64..1e-4, beta in 0.0f64..3.14) {
                let (p, f) = setup();
                let s = f.sample(t, z).unwrap();
                let bnv = defect_field(&s, beta, &p);
                prop_assert!((bnv - s.bz).abs() <= p.eta * p.d_off * (1.0 + 1e-12));
                if s.bz.abs() >= p.b1 {
                    prop_assert!((bnv - s.bz).abs() / s.bz.abs() <= p.eta * p.d_off / p.b1 * (1.0 + 1e-12));
                }
            }
        }
    }
}
