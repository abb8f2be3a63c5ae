//! Numerical studies behind the `analyze` subcommand: gradient cross-check,
//! frequency refinement against the averaged system, Lyapunov decrease along
//! averaged trajectories and the chart-consistency step-halving check.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::averaged::{grad_f_alpha, AveragedState, AveragedSystem};
use crate::config::{ControlMode, ScenarioConfig};
use crate::control::{yaw_rate_command, SurgeFactors};
use crate::error::{ConfigError, Error};
use crate::geometry::{
    cost, normalized_delta, wrap_angle, BaselineGeometry, PlanarPoint, SourcePosition,
};
use crate::plant::{
    consistency_check, CartesianState, ChartComparison, ConsistencyReport, HighpassParams,
};
use crate::sim::Simulator;

/// Grid for [`gradient_check`]. Points with `|sin 2 alpha| < skip_below` are
/// left out because the relative error is meaningless near the zeros.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientGrid {
    pub ranges: (f64, f64, f64),
    pub alphas: (f64, f64, f64),
    pub baseline: f64,
    pub depth: f64,
    pub skip_below: f64,
    pub fd_step: f64,
}

impl Default for GradientGrid {
    fn default() -> Self {
        Self {
            ranges: (10.0, 100.0, 10.0),
            alphas: (-1.4, 1.4, 0.1),
            baseline: 1.0,
            depth: 5.0,
            skip_below: 0.05,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientReport {
    pub max_relative_error: f64,
    /// `(range, alpha)` where the maximum occurs.
    pub worst: (f64, f64),
    pub points: usize,
}

/// Inclusive arithmetic grid `lo, lo + step, ..` up to `hi`, built from an
/// integer count so rounding does not drop the last point.
fn axis((lo, hi, step): (f64, f64, f64)) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * step).collect()
}

/// Exact cost at polar pose `(range, alpha)`, evaluated through the
/// Cartesian receiver positions rather than the polar closed form.
fn cartesian_cost(range: f64, alpha: f64, baseline: f64, depth: f64) -> f64 {
    let source = SourcePosition::new(0.0, 0.0, depth);
    // Center on the +x axis: bearing 0, heading = alpha - pi.
    let g = BaselineGeometry::new(
        PlanarPoint::new(range, 0.0),
        alpha - std::f64::consts::PI,
        baseline,
    );
    cost(normalized_delta(&g, &source))
}

/// Compares [`grad_f_alpha`] against central differences of the exact cost.
pub fn gradient_check(grid: &GradientGrid) -> GradientReport {
    let h = grid.fd_step;
    let mut report = GradientReport {
        max_relative_error: 0.0,
        worst: (f64::NAN, f64::NAN),
        points: 0,
    };
    for &r in &axis(grid.ranges) {
        for &alpha in &axis(grid.alphas) {
            if (2.0 * alpha).sin().abs() < grid.skip_below {
                continue;
            }
            let fd = (cartesian_cost(r, alpha + h, grid.baseline, grid.depth)
                - cartesian_cost(r, alpha - h, grid.baseline, grid.depth))
                / (2.0 * h);
            let g = grad_f_alpha(r, alpha, grid.baseline, grid.depth);
            let rel = ((g - fd) / fd).abs();
            report.points += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = (r, alpha);
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinementRow {
    pub omega: f64,
    pub sup_range: f64,
    pub sup_alpha: f64,
}

impl RefinementRow {
    pub fn sup(&self) -> f64 {
        self.sup_range.max(self.sup_alpha)
    }
}

/// Runs the noise-free oracle loop at each `omega` from polar start
/// `(range, alpha)` with `x_e = 0`, and reports the sup-norm distance of
/// `(r_c, alpha)` to the averaged trajectory over `horizon` seconds.
pub fn refinement_study(
    base: &ScenarioConfig,
    omegas: &[f64],
    start: (f64, f64),
    horizon: f64,
) -> Result<Vec<RefinementRow>, ConfigError> {
    omegas
        .par_iter()
        .map(|&omega| {
            let mut cfg = *base;
            cfg.es.omega = omega;
            cfg.noise.sigma = 0.0;
            cfg.current.vx = 0.0;
            cfg.current.vy = 0.0;
            cfg.run.mode = ControlMode::Oracle;
            cfg.run.command_lag = 0.0;
            cfg.run.t_max = horizon;
            cfg.run.decimation = 1;
            cfg.run.stop_range = 0.0;
            cfg.place_vehicle_polar(start.0, start.1, 0.0);
            let full = Simulator::new(&cfg)?.run();

            let sys = AveragedSystem::new(cfg.es, cfg.surge, cfg.baseline.d, cfg.source.z);
            let avg = sys.integrate(
                AveragedState::new(start.0, start.1, 0.0),
                cfg.run.dt,
                horizon,
                0.0,
            );

            let mut row = RefinementRow {
                omega,
                sup_range: 0.0,
                sup_alpha: 0.0,
            };
            for (rec, (_, z)) in full.records.iter().zip(&avg) {
                row.sup_range = row.sup_range.max((rec.range - z.range).abs());
                row.sup_alpha = row.sup_alpha.max(wrap_angle(rec.alpha - z.alpha).abs());
            }
            Ok(row)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovReport {
    pub trajectories: usize,
    pub samples: usize,
    pub max_rate: f64,
    /// Start of the trajectory holding `max_rate`.
    pub worst_start: (f64, f64),
}

/// Integrates `count` averaged trajectories from random starts in
/// `range x alpha` and records the largest `dV/dt` seen.
///
/// Each start puts the filter state on its equilibrium `x_e = f / h`, so the
/// filter part of `dV/dt` starts at zero instead of at an arbitrary positive
/// value set by the initial transient.
pub fn lyapunov_study(
    sys: &AveragedSystem,
    count: usize,
    range: (f64, f64),
    alpha: (f64, f64),
    seed: u64,
    dt: f64,
    horizon: f64,
) -> Result<LyapunovReport, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<(f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(range.0..range.1),
                rng.random_range(alpha.0..alpha.1),
            )
        })
        .collect();
    let per_run = starts
        .par_iter()
        .map(|&(r, a)| {
            let mut z = AveragedState::new(r, a, 0.0);
            z.filter = sys.cost(&z) / sys.es.h;
            let traj = sys.integrate(z, dt, horizon, 0.0);
            let mut worst = f64::NEG_INFINITY;
            for (_, s) in &traj {
                if s.range < sys.range_floor {
                    break;
                }
                worst = worst.max(sys.lyapunov(s)?.rate());
            }
            Ok::<_, Error>((worst, traj.len(), (r, a)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut report = LyapunovReport {
        trajectories: count,
        samples: 0,
        max_rate: f64::NEG_INFINITY,
        worst_start: (f64::NAN, f64::NAN),
    };
    for (worst, n, start) in per_run {
        report.samples += n;
        if worst > report.max_rate {
            report.max_rate = worst;
            report.worst_start = start;
        }
    }
    Ok(report)
}

/// Default starting box of [`lyapunov_study`]: `alpha` strictly inside the
/// half-plane facing the source.
pub const LYAPUNOV_ALPHA_BOX: (f64, f64) = (-FRAC_PI_2 + 1e-3, FRAC_PI_2 - 1e-3);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepHalving {
    pub coarse: ConsistencyReport,
    pub fine: ConsistencyReport,
}

impl StepHalving {
    pub fn ratio(&self) -> f64 {
        self.coarse.max() / self.fine.max()
    }
}

/// Integrates the noise-free oracle loop of `cfg` in Cartesian and polar
/// coordinates at `dt` and `dt / 2` over `horizon` seconds.
pub fn chart_step_halving(
    cfg: &ScenarioConfig,
    dt: f64,
    horizon: f64,
) -> Result<StepHalving, Error> {
    let initial = CartesianState {
        x: cfg.vehicle.x,
        y: cfg.vehicle.y,
        heading: cfg.vehicle.heading,
        filter: 0.0,
    };
    let run = |dt: f64| {
        let setup = ChartComparison {
            source: cfg.source_position(),
            baseline: cfg.baseline.d,
            hp: HighpassParams { h: cfg.es.h },
            dt,
            steps: (horizon / dt).round() as usize,
        };
        consistency_check(initial, &setup, |c| {
            let factors = SurgeFactors::oracle(c.delta, c.alpha, c.range, &cfg.surge);
            (
                factors.command(),
                yaw_rate_command(c.t, cost(c.delta), c.filter, &cfg.es),
            )
        })
    };
    Ok(StepHalving {
        coarse: run(dt)?,
        fine: run(dt / 2.0)?,
    })
}
