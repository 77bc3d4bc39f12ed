//! Simulation of a one-loop Stern-Gerlach interferometer for a spinning
//! cylindrical nanodiamond carrying a spin-1 defect.
//!
//! Layers, bottom up: [`units`] (constants and geometry), [`spin`] and
//! [`field`] (pure physics functions), [`integrator`] and [`dynamics`] (arm
//! trajectories), [`contrast`] (closed-form overlaps), and the runner/config
//! layer used by the `nanorotor` binary.

pub mod config;
pub mod contrast;
pub mod dynamics;
pub mod field;
pub mod integrator;
pub mod output;
pub mod presets;
pub mod runner;
pub mod spin;
pub mod units;
