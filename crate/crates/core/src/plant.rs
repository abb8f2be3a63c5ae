//! Unicycle kinematics with the extremum-seeking high-pass state, in
//! Cartesian and polar charts.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{
    cost, normalized_delta, normalized_delta_polar, to_polar, wrap_angle, BaselineGeometry,
    PlanarPoint, SourcePosition,
};

/// Range below which the polar chart is treated as singular.
pub const DEFAULT_RANGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartesianState {
    pub x: f64,
    pub y: f64,
    /// Integrated heading; may run outside (-pi, pi]. See [`CartesianState::wrapped_heading`].
    pub heading: f64,
    pub filter: f64,
}

impl CartesianState {
    pub fn wrapped_heading(&self) -> f64 {
        wrap_angle(self.heading)
    }

    pub fn center(&self) -> PlanarPoint {
        PlanarPoint::new(self.x, self.y)
    }
}

impl Add for CartesianState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            x: self.x + o.x,
            y: self.y + o.y,
            heading: self.heading + o.heading,
            filter: self.filter + o.filter,
        }
    }
}

impl Mul<f64> for CartesianState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            x: self.x * s,
            y: self.y * s,
            heading: self.heading * s,
            filter: self.filter * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PolarState {
    pub range: f64,
    pub alpha: f64,
    pub filter: f64,
}

impl Add for PolarState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            range: self.range + o.range,
            alpha: self.alpha + o.alpha,
            filter: self.filter + o.filter,
        }
    }
}

impl Mul<f64> for PolarState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            range: self.range * s,
            alpha: self.alpha * s,
            filter: self.filter * s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HighpassParams {
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    /// The current drifts the vehicle.
    #[default]
    Velocity,
    /// An inner position loop cancels the current exactly.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CurrentDisturbance {
    pub velocity: [f64; 2],
    pub reference: ReferenceMode,
}

impl CurrentDisturbance {
    pub const NONE: Self = Self {
        velocity: [0.0, 0.0],
        reference: ReferenceMode::Velocity,
    };

    /// Drift actually seen by the vehicle center.
    pub fn effective(&self) -> [f64; 2] {
        match self.reference {
            ReferenceMode::Velocity => self.velocity,
            ReferenceMode::Position => [0.0, 0.0],
        }
    }
}

pub fn cartesian_derivative(
    state: &CartesianState,
    surge: f64,
    yaw_rate: f64,
    cost: f64,
    hp: &HighpassParams,
    current: &CurrentDisturbance,
) -> CartesianState {
    let [cx, cy] = current.effective();
    CartesianState {
        x: surge * state.heading.cos() + cx,
        y: surge * state.heading.sin() + cy,
        heading: yaw_rate,
        filter: -state.filter * hp.h + cost,
    }
}

/// Polar-chart derivative. `yaw_rate` is the commanded heading rate; the
/// bearing drift `(u/r) sin(alpha)` is added here.
pub fn polar_derivative(
    state: &PolarState,
    surge: f64,
    yaw_rate: f64,
    cost: f64,
    hp: &HighpassParams,
    range_floor: f64,
) -> Result<PolarState, Error> {
    if state.range < range_floor {
        return Err(Error::SingularRange {
            range: state.range,
            floor: range_floor,
        });
    }
    Ok(PolarState {
        range: -surge * state.alpha.cos(),
        alpha: yaw_rate + surge / state.range * state.alpha.sin(),
        filter: -state.filter * hp.h + cost,
    })
}

/// Classical fourth-order Runge-Kutta step for any vector-like state.
pub fn rk4_step<S, F>(y: S, t: f64, dt: f64, mut f: F) -> S
where
    S: Copy + Add<Output = S> + Mul<f64, Output = S>,
    F: FnMut(f64, S) -> S,
{
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * dt, y + k1 * (0.5 * dt));
    let k3 = f(t + 0.5 * dt, y + k2 * (0.5 * dt));
    let k4 = f(t + dt, y + k3 * dt);
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

/// What a command law sees at one instant: time, relative pose and measured delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandInput {
    pub t: f64,
    pub range: f64,
    pub alpha: f64,
    pub filter: f64,
    pub delta: f64,
}

/// Setup shared by both charts in [`consistency_check`].
#[derive(Debug, Clone, Copy)]
pub struct ChartComparison {
    pub source: SourcePosition,
    pub baseline: f64,
    pub hp: HighpassParams,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConsistencyReport {
    pub max_range_error: f64,
    pub max_alpha_error: f64,
    pub max_filter_error: f64,
}

impl ConsistencyReport {
    pub fn max(&self) -> f64 {
        self.max_range_error
            .max(self.max_alpha_error)
            .max(self.max_filter_error)
    }
}

/// Integrates the same command law in the Cartesian and the polar chart and
/// reports the largest disagreement after mapping the Cartesian run through
/// [`to_polar`].
///
/// `commands` returns `(surge, yaw_rate)`; the Cartesian run evaluates it on
/// the pose recovered from Cartesian coordinates and the polar run on its own
/// state, so both integrate the identical closed loop.
pub fn consistency_check<F>(
    initial: CartesianState,
    setup: &ChartComparison,
    mut commands: F,
) -> Result<ConsistencyReport, Error>
where
    F: FnMut(&CommandInput) -> (f64, f64),
{
    let ChartComparison {
        source,
        baseline,
        hp,
        dt,
        steps,
    } = *setup;
    let pose0 = to_polar(initial.center(), initial.heading, &source);
    let mut polar = PolarState {
        range: pose0.range,
        alpha: pose0.alpha,
        filter: initial.filter,
    };
    let mut cart = initial;
    let mut report = ConsistencyReport::default();
    let mut singular = None;

    for i in 0..steps {
        let t = i as f64 * dt;
        cart = rk4_step(cart, t, dt, |t, s| {
            let g = BaselineGeometry::new(s.center(), s.heading, baseline);
            let pose = to_polar(s.center(), s.heading, &source);
            let delta = normalized_delta(&g, &source);
            let input = CommandInput {
                t,
                range: pose.range,
                alpha: pose.alpha,
                filter: s.filter,
                delta,
            };
            let (u, w) = commands(&input);
            cartesian_derivative(&s, u, w, cost(delta), &hp, &CurrentDisturbance::NONE)
        });
        polar = rk4_step(polar, t, dt, |t, s| {
            let delta = normalized_delta_polar(s.range, s.alpha, baseline, source.z);
            let input = CommandInput {
                t,
                range: s.range,
                alpha: s.alpha,
                filter: s.filter,
                delta,
            };
            let (u, w) = commands(&input);
            polar_derivative(&s, u, w, cost(delta), &hp, DEFAULT_RANGE_FLOOR).unwrap_or_else(|e| {
                singular.get_or_insert(e);
                PolarState::default()
            })
        });
        if let Some(e) = singular.take() {
            return Err(e);
        }
        let pose = to_polar(cart.center(), cart.heading, &source);
        report.max_range_error = report.max_range_error.max((pose.range - polar.range).abs());
        report.max_alpha_error = report
            .max_alpha_error
            .max(wrap_angle(pose.alpha - polar.alpha).abs());
        report.max_filter_error = report
            .max_filter_error
            .max((cart.filter - polar.filter).abs());
    }
    Ok(report)
}
