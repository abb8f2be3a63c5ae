//! Second-order filter that stands in for the unmeasurable relative angle
//! and range.
//!
//! `v1` low-passes the measurement so that `delta - omega1 * v1` is a
//! high-passed (derivative-like) version of it. `v2` then averages the product
//! of that signal with the yaw rate: under the heading perturbation its sign
//! follows `d delta / d alpha`, and its magnitude shrinks as the baseline
//! closes on the source because a given heading swing changes `delta` less.

use std::ops::{Add, Mul};

use serde::{Deserialize, Serialize};

use crate::control::{damping, sign, SurgeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterParams {
    pub omega1: f64,
    pub omega2: f64,
    pub k1: f64,
    /// `|v2|` below which the estimated direction is 0.
    #[serde(default = "default_deadband")]
    pub deadband: f64,
    /// Maps `|v2|` onto a range-like quantity for the damping factor.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_deadband() -> f64 {
    FilterParams::DEFAULT_DEADBAND
}

fn default_scale() -> f64 {
    FilterParams::DEFAULT_SCALE
}

impl FilterParams {
    pub const DEFAULT_DEADBAND: f64 = 1e-6;
    pub const DEFAULT_SCALE: f64 = 1.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilterState {
    pub v1: f64,
    pub v2: f64,
}

impl Add for FilterState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            v1: self.v1 + o.v1,
            v2: self.v2 + o.v2,
        }
    }
}

impl Mul<f64> for FilterState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            v1: self.v1 * s,
            v2: self.v2 * s,
        }
    }
}

pub fn filter_derivative(
    s: &FilterState,
    delta: f64,
    yaw_rate: f64,
    p: &FilterParams,
) -> FilterState {
    FilterState {
        v1: -p.omega1 * s.v1 + delta,
        v2: -p.omega2 * s.v2 + p.k1 * yaw_rate * (delta - p.omega1 * s.v1),
    }
}

/// `sgn(v2)` with a dead-band of half-width `deadband`.
pub fn estimated_direction(s: &FilterState, deadband: f64) -> f64 {
    if s.v2.abs() < deadband {
        0.0
    } else {
        sign(s.v2)
    }
}

/// Damping shape applied to `scale * |v2|` in place of the true range.
pub fn estimated_damping(s: &FilterState, scale: f64, p: &SurgeParams) -> f64 {
    damping(scale * s.v2.abs(), p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::rk4_step;

    fn params() -> FilterParams {
        FilterParams {
            omega1: 0.8,
            omega2: 0.15,
            k1: 1000.0,
            deadband: FilterParams::DEFAULT_DEADBAND,
            scale: 1.0,
        }
    }

    fn surge() -> SurgeParams {
        SurgeParams {
            u0: 0.5,
            m: 100.0,
            epsilon: 4.0,
            q: 3,
            mu: 100.0,
        }
    }

    #[test]
    fn zero_input_is_equilibrium() {
        let d = filter_derivative(&FilterState::default(), 0.0, 0.0, &params());
        assert_eq!(d, FilterState::default());
    }

    #[test]
    fn envelope_rate_example() {
        let d = filter_derivative(&FilterState::default(), 0.2, 0.5, &params());
        assert!((d.v2 - 100.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_settles() {
        let p = params();
        let c = 0.4;
        let mut s = FilterState::default();
        let dt = 0.01;
        for i in 0..30_000 {
            s = rk4_step(s, i as f64 * dt, dt, |_, y| {
                filter_derivative(&y, c, 0.3, &p)
            });
        }
        assert!((s.v1 - c / p.omega1).abs() < 1e-9);
        assert!(s.v2.abs() < 1e-6);
    }

    #[test]
    fn direction_deadband() {
        assert_eq!(
            estimated_direction(&FilterState { v1: 0.0, v2: 0.0 }, 1e-6),
            0.0
        );
        assert_eq!(
            estimated_direction(&FilterState { v1: 0.0, v2: 5e-7 }, 1e-6),
            0.0
        );
        assert_eq!(
            estimated_direction(&FilterState { v1: 0.0, v2: -3.2 }, 1e-6),
            -1.0
        );
        assert_eq!(
            estimated_direction(&FilterState { v1: 0.0, v2: 2.0 }, 1e-6),
            1.0
        );
    }

    #[test]
    fn damping_knee() {
        let p = surge();
        let s = FilterState { v1: 0.0, v2: 0.0 };
        assert_eq!(estimated_damping(&s, 0.5, &p), 0.0);
        let s = FilterState { v1: 0.0, v2: -8.0 };
        assert!((estimated_damping(&s, 0.5, &p) - 0.125).abs() < 1e-15);
        let s = FilterState { v1: 0.0, v2: 1e6 };
        assert!(estimated_damping(&s, 0.5, &p) > 0.99);
    }

    #[test]
    fn response_is_linear_in_delta() {
        let p = params();
        let run = |gain: f64| {
            let mut s = FilterState::default();
            let dt = 0.01;
            for i in 0..3000 {
                s = rk4_step(s, i as f64 * dt, dt, |t, y| {
                    filter_derivative(&y, gain * (0.7 * t).sin(), 0.2 * (0.4 * t).cos(), &p)
                });
            }
            s
        };
        let base = run(1.0);
        let scaled = run(-2.5);
        assert!((scaled.v1 + 2.5 * base.v1).abs() < 1e-9 * base.v1.abs().max(1.0));
        assert!((scaled.v2 + 2.5 * base.v2).abs() < 1e-9 * base.v2.abs().max(1.0));
    }
}
