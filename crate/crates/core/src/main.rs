use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nanorotor::config::{self, ConfigError, Scenario};
use nanorotor::presets;
use nanorotor::runner::{run_scenario, run_sweep, Overrides, RunError};

#[derive(Parser)]
#[command(
    name = "nanorotor",
    version,
    about = "Spinning nanorotor Stern-Gerlach loop simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate both arms of one scenario.
    Run(Common),
    /// Evaluate a grid of scenarios given by `axis.<name>` entries.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List the built-in presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Config file; keys override the preset when both are given.
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    preset: Option<String>,
    /// Use the off-centre defect field in the Zeeman torque too.
    #[arg(long)]
    strict_bnv: bool,
    /// Fixed-step integration at 1/50 of the libration period.
    #[arg(long)]
    fixed_step: bool,
    /// Also keep a dense grid of this many samples for quadrature.
    #[arg(long, num_args = 0..=1, default_missing_value = "1000001")]
    dense_grid: Option<usize>,
}

impl Common {
    fn scenario(&self) -> Result<Scenario, ConfigError> {
        let base = self.preset.as_deref().map(presets::load).transpose()?;
        let mut s = match (&self.config, base) {
            (Some(path), base) => {
                let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
                config::parse_with_base(&text, base)?
            }
            (None, Some(b)) => b,
            (None, None) => {
                return Err(ConfigError::Missing {
                    key: "config or --preset".into(),
                })
            }
        };
        Overrides {
            strict_bnv: self.strict_bnv,
            fixed_step: self.fixed_step,
            dense_grid: self.dense_grid,
        }
        .apply(&mut s.settings);
        Ok(s)
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    if let RunError::Config(c) = &e {
        if let Some(k) = c.key() {
            eprintln!("key: {k}");
        }
    }
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Presets => {
            for n in presets::NAMES {
                println!("{n}");
            }
            ExitCode::SUCCESS
        }
        Command::Run(c) => {
            let scenario = match c.scenario() {
                Ok(s) => s,
                Err(e) => return fail(e.into()),
            };
            match run_scenario(&scenario, &c.out) {
                Ok(out) => {
                    println!("{}", out.point.window);
                    println!("max_dz: {:.6e} m", out.point.max_dz());
                    println!(
                        "mismatch: delta_beta={:.6e} delta_alpha={:.6e} delta_gamma={:.6e}",
                        out.point.mismatch.delta_beta,
                        out.point.mismatch.delta_alpha,
                        out.point.mismatch.delta_gamma
                    );
                    if out.row.c_zero.is_finite() {
                        println!(
                            "C_lower: zero_T={:.6} thermal={:.6}",
                            out.row.c_zero, out.row.c_thermal
                        );
                    }
                    for ch in &out.checks {
                        println!("{}", ch.line());
                    }
                    for f in &out.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep { common, jobs } => {
            let scenario = match common.scenario() {
                Ok(s) => s,
                Err(e) => return fail(e.into()),
            };
            match run_sweep(&scenario, &common.out, jobs) {
                Ok(out) => {
                    println!("{} rows from {} integrations", out.rows.len(), out.points);
                    for f in &out.files {
                        println!("wrote {}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
    }
}
