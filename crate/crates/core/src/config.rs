//! Flat `key = value` scenario files.
//!
//! ```text
//! # comment
//! preset = table1_m1e-17        # optional starting point
//! mass = 5e-18
//! D_zfs_hz_times_h = 2.87e9     # multiplied by h on load
//! axis.mass = 5e-18,1e-16,9,log # sweep axis: start,stop,count,lin|log
//! ```
//!
//! Without a preset every physical key must be given. Keys are matched
//! exactly; unknown keys are rejected so typos do not go unnoticed.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::dynamics::PairKind;
use crate::presets;
#[cfg(test)]
use crate::units::ShapeSpec;
use crate::units::{resolve_shape, ParamError, PhysicalConstants, ScenarioParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key `{key}`")]
    UnknownKey { key: String },
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("missing required key `{key}`")]
    Missing { key: String },
    #[error("key `{key}` given twice")]
    Duplicate { key: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("axis `{key}` is empty")]
    EmptyAxis { key: String },
    #[error(transparent)]
    Param(#[from] ParamError),
}

impl ConfigError {
    /// The config key the error is about, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key }
            | ConfigError::BadValue { key, .. }
            | ConfigError::Missing { key }
            | ConfigError::Duplicate { key }
            | ConfigError::EmptyAxis { key } => Some(key),
            ConfigError::Param(ParamError::OutOfRange { key, .. })
            | ConfigError::Param(ParamError::NotFinite { key }) => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisScale {
    Lin,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AxisName {
    Mass,
    Omega0,
    DlRatio,
    Dp,
    N,
    TLib,
    EStrain,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub name: AxisName,
    pub key: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSettings {
    pub strict_bnv: bool,
    pub fixed_step: bool,
    pub dense_grid: Option<usize>,
    pub n_output: usize,
    pub rtol: f64,
    pub atol: f64,
    pub pair: Option<PairKind>,
    pub dp_over_hbar: f64,
    pub dp_gamma_over_hbar: Option<f64>,
    pub n_occ: f64,
    pub t_lib: Option<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            strict_bnv: false,
            fixed_step: false,
            dense_grid: None,
            n_output: 10_001,
            rtol: 1e-9,
            atol: 1e-12,
            pair: None,
            dp_over_hbar: 1.0,
            dp_gamma_over_hbar: None,
            n_occ: 0.0,
            t_lib: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub preset: Option<String>,
    pub params: ScenarioParams,
    pub settings: RunSettings,
    pub axes: Vec<Axis>,
}

const PHYSICAL_KEYS: [&str; 17] = [
    "mass",
    "density",
    "chi_rho",
    "D_zfs",
    "E_strain",
    "mu_spin",
    "d_off",
    "alpha_prime",
    "beta0",
    "omega0",
    "B0",
    "B1",
    "eta",
    "tau1",
    "tau2",
    "t_flip",
    "t_closed",
];

const HZ_KEYS: [&str; 3] = ["D_zfs", "E_strain", "mu_spin"];

/// Ordered `key → (line, value)` pairs of one file.
type Entries = Vec<(String, usize, String)>;

fn parse_lines(text: &str) -> Result<Entries, ConfigError> {
    let mut out: Entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            reason: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                reason: "empty key".into(),
            });
        }
        if out.iter().any(|(key, _, _)| key == k) {
            return Err(ConfigError::Duplicate { key: k.to_string() });
        }
        out.push((k.to_string(), i + 1, v.to_string()));
    }
    Ok(out)
}

fn number(key: &str, v: &str) -> Result<f64, ConfigError> {
    let x: f64 = v.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        reason: format!("`{v}` is not a number"),
    })?;
    if !x.is_finite() {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: "must be finite".into(),
        });
    }
    Ok(x)
}

fn boolean(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: format!("`{v}` is not a boolean"),
        }),
    }
}

fn count(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        reason: format!("`{v}` is not a non-negative integer"),
    })
}

fn parse_axis(key: &str, v: &str, h: f64, d_zfs: f64) -> Result<Axis, ConfigError> {
    let name_part = &key["axis.".len()..];
    let (name, factor) = match name_part {
        "mass" => (AxisName::Mass, 1.0),
        "omega0" => (AxisName::Omega0, 1.0),
        "DL_ratio" => (AxisName::DlRatio, 1.0),
        "dp" | "dp_over_hbar" => (AxisName::Dp, 1.0),
        "n" => (AxisName::N, 1.0),
        "T_lib" => (AxisName::TLib, 1.0),
        "E_strain" => (AxisName::EStrain, 1.0),
        "E_strain_hz_times_h" => (AxisName::EStrain, h),
        "E_strain_over_D" => (AxisName::EStrain, d_zfs),
        _ => {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
            })
        }
    };
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: "expected start,stop,count,lin|log".into(),
        });
    }
    let start = number(key, parts[0])?;
    let stop = number(key, parts[1])?;
    let n = count(key, parts[2])?;
    let scale = match parts[3] {
        "lin" => AxisScale::Lin,
        "log" => AxisScale::Log,
        s => {
            return Err(ConfigError::BadValue {
                key: key.to_string(),
                reason: format!("scale `{s}` is not lin or log"),
            })
        }
    };
    if n == 0 {
        return Err(ConfigError::EmptyAxis {
            key: key.to_string(),
        });
    }
    if scale == AxisScale::Log && (start <= 0.0 || stop <= 0.0) {
        return Err(ConfigError::BadValue {
            key: key.to_string(),
            reason: "log axis needs positive end points".into(),
        });
    }
    let values = (0..n)
        .map(|i| {
            let f = if n == 1 {
                0.0
            } else {
                i as f64 / (n - 1) as f64
            };
            let x = match scale {
                AxisScale::Lin => start + (stop - start) * f,
                AxisScale::Log => (start.ln() + (stop.ln() - start.ln()) * f).exp(),
            };
            // pin the end points exactly
            let x = if i == 0 {
                start
            } else if i + 1 == n {
                stop
            } else {
                x
            };
            let x = x * factor;
            // a strain axis ending at D/3 should not trip the range check
            // through rounding of the scale factor
            if name == AxisName::EStrain && x > d_zfs / 3.0 && x <= d_zfs / 3.0 * (1.0 + 1e-12) {
                d_zfs / 3.0
            } else {
                x
            }
        })
        .collect();
    Ok(Axis {
        name,
        key: key.to_string(),
        values,
    })
}

/// Parse config text. `base` supplies a starting scenario (used for
/// presets that extend other presets).
pub fn parse_str(text: &str) -> Result<Scenario, ConfigError> {
    parse_with_base(text, None)
}

pub fn parse_with_base(text: &str, base: Option<Scenario>) -> Result<Scenario, ConfigError> {
    let entries = parse_lines(text)?;
    let mut base = base;
    if let Some((_, _, name)) = entries.iter().find(|(k, _, _)| k == "preset") {
        let preset = presets::load(name)?;
        base = Some(preset);
    }

    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    let mut settings = base
        .as_ref()
        .map(|b| b.settings.clone())
        .unwrap_or_default();
    let mut axes = base.as_ref().map(|b| b.axes.clone()).unwrap_or_default();
    let mut axis_entries = Vec::new();
    let mut height = None;
    let mut ratio = None;
    let mut ramp = None;
    let constants = PhysicalConstants::default();

    for (key, _line, v) in &entries {
        let k = key.as_str();
        if k == "preset" {
            continue;
        }
        if k.starts_with("axis.") {
            axis_entries.push((key.clone(), v.clone()));
            continue;
        }
        if let Some(stem) = k.strip_suffix("_hz_times_h") {
            if HZ_KEYS.contains(&stem) {
                values.insert(stem.to_string(), number(k, v)? * constants.h);
                continue;
            }
            return Err(ConfigError::UnknownKey { key: key.clone() });
        }
        if PHYSICAL_KEYS.contains(&k) {
            values.insert(k.to_string(), number(k, v)?);
            continue;
        }
        match k {
            "L_height" => height = Some(number(k, v)?),
            "DL_ratio" => ratio = Some(number(k, v)?),
            "ramp_width" => ramp = Some(number(k, v)?),
            "strict_bnv" => settings.strict_bnv = boolean(k, v)?,
            "fixed_step" => settings.fixed_step = boolean(k, v)?,
            "dense_grid" => {
                let n = count(k, v)?;
                settings.dense_grid = if n == 0 { None } else { Some(n) };
            }
            "n_output" => {
                let n = count(k, v)?;
                if n < 2 {
                    return Err(ConfigError::BadValue {
                        key: key.clone(),
                        reason: "need at least 2 output points".into(),
                    });
                }
                settings.n_output = n;
            }
            "rtol" => settings.rtol = number(k, v)?,
            "atol" => settings.atol = number(k, v)?,
            "pair" => {
                settings.pair = match v.as_str() {
                    "auto" => None,
                    "plus_minus" => Some(PairKind::PlusMinus),
                    "zero_minus" => Some(PairKind::ZeroMinus),
                    _ => {
                        return Err(ConfigError::BadValue {
                            key: key.clone(),
                            reason: "expected auto, plus_minus or zero_minus".into(),
                        })
                    }
                }
            }
            "dp_over_hbar" => settings.dp_over_hbar = number(k, v)?,
            "dp_gamma_over_hbar" => settings.dp_gamma_over_hbar = Some(number(k, v)?),
            "n" => settings.n_occ = number(k, v)?,
            "T_lib" => settings.t_lib = Some(number(k, v)?),
            _ => return Err(ConfigError::UnknownKey { key: key.clone() }),
        }
    }

    let mut params = match &base {
        Some(b) => b.params.clone(),
        None => {
            for k in PHYSICAL_KEYS {
                if !values.contains_key(k) {
                    return Err(ConfigError::Missing { key: k.to_string() });
                }
            }
            ScenarioParams::reference()
        }
    };
    for (k, v) in &values {
        let slot = match k.as_str() {
            "mass" => &mut params.mass,
            "density" => &mut params.density,
            "chi_rho" => &mut params.chi_rho,
            "D_zfs" => &mut params.d_zfs,
            "E_strain" => &mut params.e_strain,
            "mu_spin" => &mut params.mu_spin,
            "d_off" => &mut params.d_off,
            "alpha_prime" => &mut params.alpha_prime,
            "beta0" => &mut params.beta0,
            "omega0" => &mut params.omega0,
            "B0" => &mut params.b0,
            "B1" => &mut params.b1,
            "eta" => &mut params.eta,
            "tau1" => &mut params.tau1,
            "tau2" => &mut params.tau2,
            "t_flip" => &mut params.t_flip,
            "t_closed" => &mut params.t_closed,
            _ => unreachable!("filtered above"),
        };
        *slot = *v;
    }
    if let Some(w) = ramp {
        params.ramp_width = if w == 0.0 { None } else { Some(w) };
    }
    params.shape = match (height, ratio, &base) {
        (None, None, Some(_)) => params.shape,
        (None, None, None) => {
            return Err(ConfigError::Missing {
                key: "L_height".to_string(),
            })
        }
        (h, r, _) => resolve_shape(params.mass, params.density, h, r)?,
    };

    for (key, v) in axis_entries {
        let axis = parse_axis(&key, &v, constants.h, params.d_zfs)?;
        axes.retain(|a| a.name != axis.name);
        axes.push(axis);
    }

    params.validate()?;
    let run_checks: [(&str, f64); 3] = [
        ("rtol", settings.rtol),
        ("atol", settings.atol),
        ("dp_over_hbar", settings.dp_over_hbar),
    ];
    for (key, value) in run_checks {
        if !(value > 0.0) {
            return Err(ConfigError::BadValue {
                key: key.to_string(),
                reason: format!("{value} must be > 0"),
            });
        }
    }
    if settings.n_occ < 0.0 {
        return Err(ConfigError::BadValue {
            key: "n".into(),
            reason: "must be >= 0".into(),
        });
    }
    if matches!(settings.t_lib, Some(t) if t < 0.0) {
        return Err(ConfigError::BadValue {
            key: "T_lib".into(),
            reason: "must be >= 0".into(),
        });
    }

    Ok(Scenario {
        preset: entries
            .iter()
            .find(|(k, _, _)| k == "preset")
            .map(|(_, _, v)| v.clone())
            .or_else(|| base.and_then(|b| b.preset)),
        params,
        settings,
        axes,
    })
}

pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "
        mass = 1e-17
        density = 3.5e3
        chi_rho = -6.2e-9
        D_zfs_hz_times_h = 2.87e9
        E_strain = 0
        mu_spin_hz_times_h = 2.8e10   # J/T
        d_off = 1e-8
        alpha_prime = 0.5235987755982988
        beta0 = 0.01
        omega0 = 62831.853071795864
        L_height = 1e-7
        B0 = 1e-2
        B1 = 1e-4
        eta = 45
        tau1 = 0.482
        tau2 = 0.514
        t_flip = 0.8022
        t_closed = 1.32
    ";

    #[test]
    fn full_file_matches_preset() {
        let s = parse_str(FULL).unwrap();
        let p = ScenarioParams::reference();
        assert_eq!(s.params.mass, p.mass);
        assert!((s.params.d_zfs / p.d_zfs - 1.0).abs() < 1e-15);
        assert!((s.params.mu_spin / p.mu_spin - 1.0).abs() < 1e-15);
        assert_eq!(s.params.shape, ShapeSpec::Height(1e-7));
    }

    #[test]
    fn missing_key_is_named() {
        let text = FULL.replace("tau2 = 0.514", "");
        let e = parse_str(&text).unwrap_err();
        assert_eq!(e.key(), Some("tau2"));
    }

    #[test]
    fn strain_out_of_range_is_named() {
        let text = FULL.replace("E_strain = 0", "E_strain_hz_times_h = 1e9");
        let e = parse_str(&text).unwrap_err();
        assert_eq!(e.key(), Some("E_strain"));
    }

    #[test]
    fn preset_plus_overrides() {
        let s = parse_str("preset = table1_m1e-17\nmass = 5e-18\n").unwrap();
        assert_eq!(s.params.mass, 5e-18);
        assert_eq!(s.params.b0, 1e-2);
        assert_eq!(s.preset.as_deref(), Some("table1_m1e-17"));
    }

    #[test]
    fn axes_parse() {
        let s = parse_str(
            "preset = table1_m1e-17\naxis.mass = 1e-18,1e-16,3,log\naxis.n = 0,10,6,lin\n",
        )
        .unwrap();
        assert_eq!(s.axes.len(), 2);
        assert_eq!(s.axes[0].values.len(), 3);
        assert!((s.axes[0].values[1] - 1e-17).abs() < 1e-30);
        assert_eq!(s.axes[1].values, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
    }

    #[test]
    fn empty_axis_rejected() {
        let e = parse_str("preset = table1_m1e-17\naxis.omega0 = 1,2,0,lin\n").unwrap_err();
        assert!(matches!(e, ConfigError::EmptyAxis { .. }));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        assert!(matches!(
            parse_str("preset = table1_m1e-17\nmas = 1\n"),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(
            parse_str("preset = table1_m1e-17\nmass = 1e-17\nmass = 2e-17\n"),
            Err(ConfigError::Duplicate { .. })
        ));
        assert!(matches!(
            parse_str("junk line\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(
            parse_str("preset = nope\n"),
            Err(ConfigError::UnknownPreset(_))
        ));
    }
}
