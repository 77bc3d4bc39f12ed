//! Single runs and parameter sweeps, from a parsed [`Scenario`] to files on
//! disk.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{AxisName, ConfigError, RunSettings, Scenario};
use crate::contrast::{
    amplitude_initial, contrast_thermal, delta_beta_bound, kappa_scale, libration_summary,
    mismatches, LibrationSummary, MismatchSet, Occupation,
};
use crate::dynamics::{run_pair, ArmPair, DynamicsError, DynamicsOptions};
use crate::field::FieldProfile;
use crate::integrator::StepMode;
use crate::output::{sweep_csv, trajectory_csv, write_file, Check, RunManifest, SweepRow};
use crate::spin::{validate_omega0, WindowReport};
use crate::units::{classify_shape, CylinderGeometry, ParamError, ScenarioParams, ShapeSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<ParamError> for RunError {
    fn from(e: ParamError) -> Self {
        RunError::Config(ConfigError::Param(e))
    }
}

impl RunError {
    /// 2 for configuration and validation problems, 1 for everything that
    /// went wrong while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Dynamics(DynamicsError::Param(_)) => 2,
            _ => 1,
        }
    }
}

/// Command-line overrides layered on top of the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub strict_bnv: bool,
    pub fixed_step: bool,
    pub dense_grid: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, s: &mut RunSettings) {
        s.strict_bnv |= self.strict_bnv;
        s.fixed_step |= self.fixed_step;
        if self.dense_grid.is_some() {
            s.dense_grid = self.dense_grid;
        }
    }
}

pub fn dynamics_options(
    params: &ScenarioParams,
    geometry: &CylinderGeometry,
    settings: &RunSettings,
) -> DynamicsOptions {
    let mut o = DynamicsOptions {
        n_output: settings.n_output,
        dense_grid: settings.dense_grid,
        strict_bnv: settings.strict_bnv,
        pair: settings.pair,
        ..Default::default()
    };
    o.integrator.mode = StepMode::Adaptive {
        rtol: settings.rtol,
        atol: settings.atol,
    };
    if settings.fixed_step {
        o = o.with_fixed_step(params, geometry);
    }
    o
}

/// Everything computed for one physical parameter point.
#[derive(Debug, Clone)]
pub struct PointResult {
    pub params: ScenarioParams,
    pub geometry: CylinderGeometry,
    pub options: DynamicsOptions,
    pub window: WindowReport,
    pub pair: ArmPair,
    pub summary: LibrationSummary,
    pub mismatch: MismatchSet,
}

impl PointResult {
    pub fn max_dz(&self) -> f64 {
        self.pair.max_abs_delta_z()
    }

    /// `(|δz(t_closed)| / max|δz|, |δż(t_closed)| / max|δż|)`
    pub fn closure(&self) -> (f64, f64) {
        let (a, b) = (self.pair.plus.last(), self.pair.minus.last());
        (
            (a.z - b.z).abs() / self.max_dz(),
            (a.z_dot - b.z_dot).abs() / self.pair.max_abs_delta_z_dot(),
        )
    }
}

pub fn compute_point(
    params: &ScenarioParams,
    settings: &RunSettings,
) -> Result<PointResult, RunError> {
    params.validate()?;
    let geometry = params.geometry()?;
    let options = dynamics_options(params, &geometry, settings);
    let profile = FieldProfile::new(params);
    let pair = run_pair(params, &profile, &options)?;
    let summary = libration_summary(&pair, params, &geometry, &profile);
    let mismatch = mismatches(&pair, Some(&summary));
    Ok(PointResult {
        params: params.clone(),
        geometry,
        options,
        window: validate_omega0(params, &geometry),
        pair,
        summary,
        mismatch,
    })
}

/// Contrast table row for a computed point at the given momentum spread
/// and occupation. `t_lib` takes precedence over `n` when given.
pub fn contrast_row(
    point: &PointResult,
    dp_over_hbar: f64,
    dp_gamma_over_hbar: Option<f64>,
    n: f64,
    t_lib: Option<f64>,
) -> Result<SweepRow, RunError> {
    let p = &point.params;
    let g = &point.geometry;
    let hbar = p.constants.hbar;
    let (max_dz, (cdz, cdzd)) = (point.max_dz(), point.closure());
    let mut row = SweepRow {
        mass: p.mass,
        omega0: p.omega0,
        dl_ratio: g.diameter_to_height(),
        dp_over_hbar,
        n,
        t_lib: t_lib.unwrap_or(f64::NAN),
        c_zero: f64::NAN,
        c_thermal: f64::NAN,
        delta_alpha: point.mismatch.delta_alpha,
        delta_gamma: point.mismatch.delta_gamma,
        delta_beta: point.mismatch.delta_beta,
        a_beta0: f64::NAN,
        kappa0: f64::NAN,
        e_strain: p.e_strain,
        max_dz,
        closure_dz: cdz,
        closure_dz_dot: cdzd,
        shape: classify_shape(g).label(),
        delta_alpha_sigma: point.summary.delta_alpha_estimate,
    };
    if p.omega0 > 0.0 {
        let occ = match t_lib {
            Some(t) => Occupation::Temperature(t),
            None => Occupation::Number(n),
        };
        let r = contrast_thermal(
            &point.mismatch,
            &point.summary,
            dp_over_hbar * hbar,
            dp_gamma_over_hbar.map(|x| x * hbar),
            occ,
            p,
            g,
        )
        .map_err(|e| {
            RunError::Config(ConfigError::BadValue {
                key: "contrast".into(),
                reason: e.to_string(),
            })
        })?;
        row.n = r.n_occ;
        row.t_lib = t_lib.unwrap_or(r.n_occ * hbar * p.omega0 / p.constants.kb);
        row.c_zero = r.c_zero;
        row.c_thermal = r.c_thermal;
        row.a_beta0 = amplitude_initial(p, g);
        row.kappa0 = r.kappa0_abs;
    }
    Ok(row)
}

/// Relative hold-stage energy tolerance used when there is no rtol.
pub const FIXED_STEP_ENERGY_TOL: f64 = 1e-6;

/// Invariant checks reported in every run manifest.
pub fn invariant_checks(point: &PointResult) -> Vec<Check> {
    let p = &point.params;
    let g = &point.geometry;
    let rotating = p.omega0 > 0.0;
    let (cdz, cdzd) = point.closure();
    let mut checks = vec![
        Check {
            name: "omega0_window".into(),
            pass: point.window.pass(),
            value: point.window.r2,
            threshold: 0.1,
            note: point.window.to_string(),
        },
        Check {
            name: "closure_dz".into(),
            pass: cdz <= 1e-2,
            value: cdz,
            threshold: 1e-2,
            note: "|dz(t_closed)| / max|dz|".into(),
        },
        Check {
            name: "closure_dz_dot".into(),
            pass: cdzd <= 1e-2,
            value: cdzd,
            threshold: 1e-2,
            note: "|dz_dot(t_closed)| / max|dz_dot|".into(),
        },
    ];
    if rotating {
        let arms = [&point.pair.plus.diagnostics, &point.pair.minus.diagnostics];
        let dev = arms.iter().map(|d| d.momentum_rel_dev).fold(0.0, f64::max);
        checks.push(Check {
            name: "momentum_conservation".into(),
            pass: dev <= 1e-9,
            value: dev,
            threshold: 1e-9,
            note: "max relative deviation of p_alpha, p_gamma".into(),
        });
        let tol = match point.options.integrator.mode {
            StepMode::Adaptive { rtol, .. } => rtol,
            StepMode::Fixed { .. } => FIXED_STEP_ENERGY_TOL,
        };
        let drift = arms
            .iter()
            .map(|d| d.hold_energy_drift / d.hold_energy_scale)
            .fold(0.0, f64::max);
        checks.push(Check {
            name: "hold_energy".into(),
            pass: drift <= tol,
            value: drift,
            threshold: tol,
            note: "max |H - H(tau1)| over hold / |H(tau1) - p_gamma^2/2I3|".into(),
        });
        let a0 = amplitude_initial(p, g);
        let bound = delta_beta_bound(p, g);
        checks.push(Check {
            name: "delta_beta_bound".into(),
            pass: point.mismatch.delta_beta.abs() <= bound,
            value: point.mismatch.delta_beta.abs(),
            threshold: bound,
            note: String::new(),
        });
        let m = &point.mismatch;
        let sym = (m.delta_alpha + m.delta_gamma).abs() / m.delta_alpha.abs();
        checks.push(Check {
            name: "alpha_gamma_symmetry".into(),
            pass: sym <= 0.05,
            value: sym,
            threshold: 0.05,
            note: "|da + dg| / |da|".into(),
        });
        let ks = kappa_scale(p, g);
        let kc = arms.iter().map(|d| d.amplitude_closed).fold(0.0, f64::max) * ks;
        let k0 = ks * a0;
        checks.push(Check {
            name: "kappa_closed".into(),
            pass: kc <= 3.0 * k0 * 1.05,
            value: kc,
            threshold: 3.0 * k0 * 1.05,
            note: String::new(),
        });
    }
    checks
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub point: PointResult,
    pub row: SweepRow,
    pub checks: Vec<Check>,
    pub files: Vec<PathBuf>,
}

/// Run one scenario and write the two arm trajectories, the contrast row
/// and the manifest into `out_dir`.
pub fn run_scenario(scenario: &Scenario, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let start = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let s = &scenario.settings;
    let point = compute_point(&scenario.params, s)?;
    let row = contrast_row(
        &point,
        s.dp_over_hbar,
        s.dp_gamma_over_hbar,
        s.n_occ,
        s.t_lib,
    )?;
    let checks = invariant_checks(&point);

    let names = ["arm_plus.csv", "arm_minus.csv", "contrast.csv"];
    let bodies = [
        trajectory_csv(&point.pair.plus),
        trajectory_csv(&point.pair.minus),
        sweep_csv(std::slice::from_ref(&row)),
    ];
    let mut files = Vec::new();
    for (name, body) in names.iter().zip(&bodies) {
        let path = out_dir.join(name);
        write_file(&path, body).map_err(io_err(&path))?;
        files.push(path);
    }
    let manifest = RunManifest {
        kind: "run",
        version: env!("CARGO_PKG_VERSION"),
        scenario_hash: scenario.params.hash_hex(),
        preset: scenario.preset.clone(),
        parameters: &scenario.params,
        settings: s,
        integrator: &point.options,
        wall_time_s: start.elapsed().as_secs_f64(),
        files: names.iter().map(|n| n.to_string()).collect(),
        omega0_window: point.window.to_string(),
        checks: checks.clone(),
    };
    let path = out_dir.join("manifest.json");
    write_file(&path, &manifest.to_json()).map_err(io_err(&path))?;
    files.push(path);
    Ok(RunOutcome {
        point,
        row,
        checks,
        files,
    })
}

/// Key identifying the integrations a sweep needs; contrast-only axes
/// reuse the same trajectories.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct PhysicsKey {
    mass: f64,
    omega0: f64,
    dl_ratio: Option<f64>,
    e_strain: f64,
}

impl PhysicsKey {
    fn bits(&self) -> (u64, u64, Option<u64>, u64) {
        (
            self.mass.to_bits(),
            self.omega0.to_bits(),
            self.dl_ratio.map(f64::to_bits),
            self.e_strain.to_bits(),
        )
    }

    fn params(&self, base: &ScenarioParams) -> ScenarioParams {
        let mut p = base.clone();
        p.mass = self.mass;
        p.omega0 = self.omega0;
        p.e_strain = self.e_strain;
        if let Some(q) = self.dl_ratio {
            p.shape = ShapeSpec::AspectRatio(q);
        }
        p
    }
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    key: PhysicsKey,
    dp: f64,
    n: f64,
    t_lib: Option<f64>,
}

fn expand(scenario: &Scenario) -> Vec<GridPoint> {
    let p = &scenario.params;
    let s = &scenario.settings;
    let mut pts = vec![GridPoint {
        key: PhysicsKey {
            mass: p.mass,
            omega0: p.omega0,
            dl_ratio: None,
            e_strain: p.e_strain,
        },
        dp: s.dp_over_hbar,
        n: s.n_occ,
        t_lib: s.t_lib,
    }];
    for axis in &scenario.axes {
        let mut next = Vec::with_capacity(pts.len() * axis.values.len());
        for base in &pts {
            for &v in &axis.values {
                let mut g = *base;
                match axis.name {
                    AxisName::Mass => g.key.mass = v,
                    AxisName::Omega0 => g.key.omega0 = v,
                    AxisName::DlRatio => g.key.dl_ratio = Some(v),
                    AxisName::EStrain => g.key.e_strain = v,
                    AxisName::Dp => g.dp = v,
                    AxisName::N => g.n = v,
                    AxisName::TLib => g.t_lib = Some(v),
                }
                next.push(g);
            }
        }
        pts = next;
    }
    pts
}

/// Distinct physical parameter sets a scenario needs integrated, in axis
/// order. Contrast-only axes (Δp, n, T_lib) do not add points.
pub fn physics_points(scenario: &Scenario) -> Vec<ScenarioParams> {
    let mut unique: Vec<PhysicsKey> = Vec::new();
    for g in expand(scenario) {
        if !unique.iter().any(|k| k.bits() == g.key.bits()) {
            unique.push(g.key);
        }
    }
    unique.iter().map(|k| k.params(&scenario.params)).collect()
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub files: Vec<PathBuf>,
    pub points: usize,
}

/// Evaluate the Cartesian product of the scenario's axes (first axis
/// slowest) and write one aggregate CSV plus a manifest.
pub fn run_sweep(
    scenario: &Scenario,
    out_dir: &Path,
    workers: Option<usize>,
) -> Result<SweepOutcome, RunError> {
    let start = Instant::now();
    if scenario.axes.is_empty() {
        return Err(ConfigError::Missing {
            key: "axis.<name>".into(),
        }
        .into());
    }
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let grid = expand(scenario);

    let mut unique: Vec<PhysicsKey> = Vec::new();
    for g in &grid {
        if !unique.iter().any(|k| k.bits() == g.key.bits()) {
            unique.push(g.key);
        }
    }
    // validate every point before spending time integrating
    for k in &unique {
        k.params(&scenario.params).validate()?;
    }
    let threads = workers
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("worker pool");
    let settings = &scenario.settings;
    let computed: Vec<Result<PointResult, RunError>> = pool.install(|| {
        unique
            .par_iter()
            .map(|k| compute_point(&k.params(&scenario.params), settings))
            .collect()
    });
    let mut results = BTreeMap::new();
    for (k, r) in unique.iter().zip(computed) {
        results.insert(k.bits(), r?);
    }

    let mut rows = Vec::with_capacity(grid.len());
    for g in &grid {
        let point = &results[&g.key.bits()];
        rows.push(contrast_row(
            point,
            g.dp,
            settings.dp_gamma_over_hbar,
            g.n,
            g.t_lib,
        )?);
    }

    let csv = out_dir.join("sweep.csv");
    write_file(&csv, &sweep_csv(&rows)).map_err(io_err(&csv))?;

    let mut checks = Vec::new();
    for (i, point) in results.values().enumerate() {
        for mut c in invariant_checks(point) {
            c.name = format!("point{i}.{}", c.name);
            c.note = format!(
                "mass={:e} omega0={:e} DL={:e} E={:e}; {}",
                point.params.mass,
                point.params.omega0,
                point.geometry.diameter_to_height(),
                point.params.e_strain,
                c.note
            );
            checks.push(c);
        }
    }
    let manifest = RunManifest {
        kind: "sweep",
        version: env!("CARGO_PKG_VERSION"),
        scenario_hash: scenario.params.hash_hex(),
        preset: scenario.preset.clone(),
        parameters: &scenario.params,
        settings: (settings, &scenario.axes),
        integrator: dynamics_options(&scenario.params, &scenario.params.geometry()?, settings),
        wall_time_s: start.elapsed().as_secs_f64(),
        files: vec!["sweep.csv".into()],
        omega0_window: validate_omega0(&scenario.params, &scenario.params.geometry()?).to_string(),
        checks,
    };
    let mpath = out_dir.join("manifest.json");
    write_file(&mpath, &manifest.to_json()).map_err(io_err(&mpath))?;
    Ok(SweepOutcome {
        rows,
        files: vec![csv, mpath],
        points: unique.len(),
    })
}
