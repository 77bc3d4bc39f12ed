//! Named scenarios. Each is ordinary config text, so presets go through the
//! same parser and validation as user files.

use crate::config::{parse_with_base, ConfigError, Scenario};

pub const NAMES: [&str; 6] = [
    "table1_m1e-17",
    "fig5_mass_sweep",
    "fig6_contrast",
    "appendixC_E_sweep",
    "appendixD_omega0_zero",
    "appendixE_long_cylinder",
];

const REFERENCE: &str = "
mass = 1e-17
density = 3.5e3
chi_rho = -6.2e-9
D_zfs_hz_times_h = 2.87e9
E_strain = 0
mu_spin_hz_times_h = 2.8e10
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

/// Config text for a preset, or `None` if the name is unknown.
pub fn text(name: &str) -> Option<&'static str> {
    Some(match name {
        "table1_m1e-17" => REFERENCE,
        "fig5_mass_sweep" => "axis.mass = 5e-18,1e-16,9,log\n",
        "fig6_contrast" => {
            "axis.omega0 = 62831.853071795864,251327.41228718346,3,log\naxis.dp = 1,25,25,lin\n"
        }
        "appendixC_E_sweep" => "axis.E_strain_over_D = 0,0.3333333333333333,21,lin\n",
        "appendixD_omega0_zero" => "omega0 = 0\n",
        "appendixE_long_cylinder" => "DL_ratio = 0.1\naxis.mass = 5e-18,1e-16,3,log\n",
        _ => return None,
    })
}

pub fn load(name: &str) -> Result<Scenario, ConfigError> {
    let body = text(name).ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
    let base = if name == "table1_m1e-17" {
        None
    } else {
        Some(load("table1_m1e-17")?)
    };
    let mut s = parse_with_base(body, base)?;
    s.preset = Some(name.to_string());
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::ScenarioParams;

    #[test]
    fn all_presets_load() {
        for n in NAMES {
            let s = load(n).unwrap_or_else(|e| panic!("{n}: {e}"));
            s.params.validate().unwrap();
            assert_eq!(s.preset.as_deref(), Some(n));
        }
    }

    #[test]
    fn base_preset_equals_constructor() {
        let s = load("table1_m1e-17").unwrap();
        let p = ScenarioParams::reference();
        assert_eq!(s.params.omega0, p.omega0);
        assert_eq!(s.params.alpha_prime, p.alpha_prime);
        assert!((s.params.d_zfs / p.d_zfs - 1.0).abs() < 1e-15);
        assert!(s.axes.is_empty());
    }

    #[test]
    fn strain_axis_ends_at_bound() {
        let s = load("appendixC_E_sweep").unwrap();
        let last = *s.axes[0].values.last().unwrap();
        assert!((last / (s.params.d_zfs / 3.0) - 1.0).abs() < 1e-15);
    }
}
