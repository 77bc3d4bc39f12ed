//! CSV and manifest writers. Numbers use Rust's shortest round-trip
//! formatting so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use crate::dynamics::ArmTrajectory;

pub const TRAJECTORY_HEADER: &str = "t,z,z_dot,beta,beta_dot,alpha,gamma,s,stage";

pub const SWEEP_HEADER: &str = "mass,omega0,DL_ratio,dp_over_hbar,n,T_lib,C_zero,C_thermal,delta_alpha,delta_gamma,delta_beta,A_beta0,kappa0,E_strain,max_dz,closure_dz,closure_dz_dot,shape,delta_alpha_sigma";

/// One row of the contrast / sweep table. The contrast columns hold NaN
/// for a non-spinning rotor, where the bound is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub mass: f64,
    pub omega0: f64,
    pub dl_ratio: f64,
    pub dp_over_hbar: f64,
    pub n: f64,
    pub t_lib: f64,
    pub c_zero: f64,
    pub c_thermal: f64,
    pub delta_alpha: f64,
    pub delta_gamma: f64,
    pub delta_beta: f64,
    pub a_beta0: f64,
    pub kappa0: f64,
    pub e_strain: f64,
    pub max_dz: f64,
    pub closure_dz: f64,
    pub closure_dz_dot: f64,
    pub shape: &'static str,
    pub delta_alpha_sigma: f64,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let nums = [
            self.mass,
            self.omega0,
            self.dl_ratio,
            self.dp_over_hbar,
            self.n,
            self.t_lib,
            self.c_zero,
            self.c_thermal,
            self.delta_alpha,
            self.delta_gamma,
            self.delta_beta,
            self.a_beta0,
            self.kappa0,
            self.e_strain,
            self.max_dz,
            self.closure_dz,
            self.closure_dz_dot,
        ];
        let mut line = String::new();
        for x in nums {
            let _ = write!(line, "{x:e},");
        }
        let _ = write!(line, "{},{:e}", self.shape, self.delta_alpha_sigma);
        line
    }
}

pub fn trajectory_csv(arm: &ArmTrajectory) -> String {
    let mut out = String::with_capacity(arm.samples.len() * 160);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &arm.samples {
        let _ = writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            s.t,
            s.z,
            s.z_dot,
            s.beta,
            s.beta_dot,
            s.alpha,
            s.gamma,
            s.s_label.as_i8(),
            s.stage.label()
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())?;
    f.flush()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub note: String,
}

impl Check {
    pub fn line(&self) -> String {
        format!(
            "{}: {} value={:.4e} threshold={:.4e}{}",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.value,
            self.threshold,
            if self.note.is_empty() {
                String::new()
            } else {
                format!(" ({})", self.note)
            }
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<P: Serialize, S: Serialize, O: Serialize> {
    pub kind: &'static str,
    pub version: &'static str,
    pub scenario_hash: String,
    pub preset: Option<String>,
    pub parameters: P,
    pub settings: S,
    pub integrator: O,
    pub wall_time_s: f64,
    pub files: Vec<String>,
    pub omega0_window: String,
    pub checks: Vec<Check>,
}

impl<P: Serialize, S: Serialize, O: Serialize> RunManifest<P, S, O> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_starts_with_contrast_columns() {
        assert!(SWEEP_HEADER.starts_with(
            "mass,omega0,DL_ratio,dp_over_hbar,n,T_lib,C_zero,C_thermal,delta_alpha,delta_gamma,delta_beta,A_beta0,kappa0"
        ));
    }

    #[test]
    fn row_has_header_arity() {
        let r = SweepRow {
            mass: 1e-17,
            omega0: 1.0,
            dl_ratio: 1.0,
            dp_over_hbar: 1.0,
            n: 0.0,
            t_lib: 0.0,
            c_zero: f64::NAN,
            c_thermal: 0.5,
            delta_alpha: 0.1,
            delta_gamma: -0.1,
            delta_beta: 1e-6,
            a_beta0: 1e-6,
            kappa0: 0.1,
            e_strain: 0.0,
            max_dz: 2e-5,
            closure_dz: 0.01,
            closure_dz_dot: 0.01,
            shape: "normal",
            delta_alpha_sigma: 0.04,
        };
        let line = r.csv_line();
        assert_eq!(line.split(',').count(), SWEEP_HEADER.split(',').count());
        assert!(line.contains("NaN"));
    }
}
