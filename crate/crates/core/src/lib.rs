//! Source seeking with a two-receiver TDOA baseline.
//!
//! A surface baseline carrying two acoustic receivers measures the
//! normalized time difference of arrival of a submerged pinger. A
//! perturbation-based extremum seeking law turns the baseline broadside to
//! the source, and a surge law drives the center toward it.
//!
//! - [`geometry`]: receiver placement, slant ranges, normalized delta, polar pose
//! - [`plant`]: unicycle kinematics in Cartesian and polar charts
//! - [`control`]: yaw-rate extremum seeking and the surge law
//! - [`estimator`]: filter that replaces the unmeasurable angle and range
//! - [`averaged`]: Lie-bracket averaged system, Lyapunov monitor, tuning and bounds checks
//! - [`sim`]: fixed-step closed-loop simulation and run metrics
//! - [`config`]: scenario files and overrides
//! - [`analysis`]: gradient check and frequency-refinement study
//! - [`cli`]: the `tdoa-seek` command-line front end

pub mod analysis;
pub mod averaged;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod estimator;
pub mod geometry;
pub mod plant;
pub mod sim;

pub use error::{ConfigError, Error, Result};
