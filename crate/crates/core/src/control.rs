//! Yaw-rate extremum seeking law and the three-factor surge law.

use serde::{Deserialize, Serialize};

/// Perturbation-based extremum seeking gains for the yaw degree of freedom.
///
/// `a` and `k` carry units of sqrt(rad/s); the perturbation amplitude is
/// `a * sqrt(omega)` and the demodulation gain `k * sqrt(omega)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EsParams {
    pub a: f64,
    pub omega: f64,
    pub k: f64,
    pub h: f64,
}

/// Surge law parameters. `mu` only shapes the smooth signum of the bounds audit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurgeParams {
    pub u0: f64,
    pub m: f64,
    pub epsilon: f64,
    pub q: u32,
    pub mu: f64,
}

/// Sign that maps `sgn(delta * sin(2 alpha))` onto "source ahead = +1".
///
/// Receiver 1 sits on the port side of the baseline, so `delta` has the sign
/// of `-sin(alpha)` and the product `delta * sin(2 alpha)` is `-sgn(cos alpha)`.
/// Every closed-loop use of a direction factor (oracle or estimated) is
/// multiplied by this constant.
pub const DIRECTION_POLARITY: f64 = -1.0;

/// `k (f - x_e h) sqrt(omega) sin(omega t) + a sqrt(omega) cos(omega t)`.
pub fn yaw_rate_command(t: f64, f: f64, x_e: f64, p: &EsParams) -> f64 {
    let sqrt_w = p.omega.sqrt();
    let phase = p.omega * t;
    p.k * (f - x_e * p.h) * sqrt_w * phase.sin() + p.a * sqrt_w * phase.cos()
}

/// `u0 (1 - tanh(m f))`.
pub fn surge_amplitude(f: f64, p: &SurgeParams) -> f64 {
    p.u0 * (1.0 - (p.m * f).tanh())
}

/// `sgn(delta * sin(2 alpha))`, exactly 0 only when the product is 0.
pub fn surge_direction(delta: f64, alpha: f64) -> f64 {
    sign(delta * (2.0 * alpha).sin())
}

/// `r^q / (r + eps)^q`; zero at the source and tending to one far away.
pub fn damping(range: f64, p: &SurgeParams) -> f64 {
    if range <= 0.0 {
        return 0.0;
    }
    (range / (range + p.epsilon)).powi(p.q as i32)
}

pub fn surge_command(direction: f64, amplitude: f64, damping: f64) -> f64 {
    damping * direction * amplitude
}

/// `tanh(mu x)`, the differentiable stand-in for `sgn` used by the bounds audit.
pub fn smooth_sgn(x: f64, mu: f64) -> f64 {
    (mu * x).tanh()
}

/// Signum with `sgn(0) = 0`.
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Surge factors evaluated from the true relative pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurgeFactors {
    /// Applied direction, polarity included.
    pub direction: f64,
    pub amplitude: f64,
    pub damping: f64,
}

impl SurgeFactors {
    pub fn oracle(delta: f64, alpha: f64, range: f64, p: &SurgeParams) -> Self {
        Self {
            direction: DIRECTION_POLARITY * surge_direction(delta, alpha),
            amplitude: surge_amplitude(delta * delta, p),
            damping: damping(range, p),
        }
    }

    pub fn command(&self) -> f64 {
        surge_command(self.direction, self.amplitude, self.damping)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{normalized_delta_polar, wrap_angle};
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

    fn es() -> EsParams {
        EsParams {
            a: 0.15,
            omega: TAU / 16.0,
            k: -1.0,
            h: 0.19,
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
    fn yaw_command_examples() {
        let p = es();
        // omega t = 0, f = x_e h
        let v = yaw_rate_command(0.0, 0.19, 1.0, &p);
        assert!((v - p.a * p.omega.sqrt()).abs() < 1e-15);
        // omega t = pi/2
        let t = FRAC_PI_2 / p.omega;
        let v = yaw_rate_command(t, 1.0, 0.0, &p);
        assert!((v + (TAU / 16.0).sqrt()).abs() < 1e-12);
        assert!((v + 0.6267).abs() < 1e-4);
        let v = yaw_rate_command(t, 0.38, 2.0, &p);
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn perturbation_has_zero_mean() {
        // Simpson quadrature over one period.
        let p = es();
        let period = TAU / p.omega;
        let n = 2000;
        let h = period / n as f64;
        let g = |t: f64| p.a * p.omega.sqrt() * (p.omega * t).cos();
        let mut acc = g(0.0) + g(period);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(i as f64 * h);
        }
        assert!((acc * h / 3.0 / period).abs() < 1e-10);
    }

    #[test]
    fn amplitude_examples() {
        let p = surge();
        assert_eq!(surge_amplitude(0.0, &p), 0.5);
        assert!((surge_amplitude(0.01, &p) - 0.5 * (1.0 - 1f64.tanh())).abs() < 1e-15);
        assert!((surge_amplitude(0.01, &p) - 0.11920).abs() < 1e-5);
        assert!(surge_amplitude(1.0, &p) < 1e-10);
    }

    #[test]
    fn direction_examples() {
        assert_eq!(surge_direction(0.5, FRAC_PI_4), 1.0);
        assert_eq!(surge_direction(0.5, 3.0 * FRAC_PI_4), -1.0);
        assert_eq!(surge_direction(0.0, 1.1), 0.0);
    }

    #[test]
    fn damping_examples() {
        let p = surge();
        assert_eq!(damping(0.0, &p), 0.0);
        assert!((damping(4.0, &p) - 0.125).abs() < 1e-15);
        assert!((damping(396.0, &p) - 0.9702).abs() < 1e-4);
    }

    #[test]
    fn command_examples() {
        assert_eq!(surge_command(0.0, 0.3, 0.9), 0.0);
        assert!((surge_command(1.0, 0.11920, 0.125) - 0.014900).abs() < 1e-9);
        let p = surge();
        let far = surge_command(1.0, surge_amplitude(0.0, &p), damping(1e9, &p));
        assert!((far - p.u0).abs() < 1e-7);
    }

    #[test]
    fn smooth_sgn_examples() {
        assert_eq!(smooth_sgn(0.0, 100.0), 0.0);
        assert_eq!(smooth_sgn(1e6, 100.0), 1.0);
        assert_eq!(smooth_sgn(-1e6, 100.0), -1.0);
        assert!((smooth_sgn(0.05, 100.0) - 0.99991).abs() < 1e-5);
    }

    #[test]
    fn oracle_direction_points_at_source() {
        // alpha near 0 means facing the source: the applied direction must be forward.
        let p = surge();
        for &alpha in &[0.3, -0.3, 1.2, -1.2] {
            let delta = normalized_delta_polar(30.0, alpha, 5.0, 5.0);
            assert_eq!(SurgeFactors::oracle(delta, alpha, 30.0, &p).direction, 1.0);
        }
        for &alpha in &[PI - 0.3, -PI + 0.3] {
            let delta = normalized_delta_polar(30.0, alpha, 5.0, 5.0);
            assert_eq!(SurgeFactors::oracle(delta, alpha, 30.0, &p).direction, -1.0);
        }
    }

    proptest! {
        #[test]
        fn amplitude_bounded_and_decreasing(f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
            let p = SurgeParams { m: 3.0, ..surge() };
            let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            let (a_lo, a_hi) = (surge_amplitude(lo, &p), surge_amplitude(hi, &p));
            prop_assert!(a_hi > 0.0 && a_lo <= p.u0);
            if hi - lo > 1e-9 {
                prop_assert!(a_hi < a_lo);
            }
        }

        #[test]
        fn damping_bounded_and_increasing(r1 in 0.0..500.0f64, r2 in 0.0..500.0f64, q in 1u32..5) {
            let p = SurgeParams { q, ..surge() };
            let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
            let (d_lo, d_hi) = (damping(lo, &p), damping(hi, &p));
            prop_assert!((0.0..1.0).contains(&d_lo) && (0.0..1.0).contains(&d_hi));
            prop_assert!(d_lo <= d_hi);
        }

        #[test]
        fn half_turn_cancels_in_kinematics(
            range in 0.5..80.0f64,
            alpha in -PI..PI,
            d in 0.5..10.0f64,
            z in 0.5..20.0f64,
        ) {
            // The surge command flips sign under alpha -> alpha + pi, and so do
            // cos(alpha) and sin(alpha): the range and angle contributions agree.
            let p = surge();
            let flipped = wrap_angle(alpha + PI);
            let u = SurgeFactors::oracle(normalized_delta_polar(range, alpha, d, z), alpha, range, &p).command();
            let v = SurgeFactors::oracle(normalized_delta_polar(range, flipped, d, z), flipped, range, &p).command();
            prop_assert!((u + v).abs() < 1e-9, "{u} vs {v}");
            prop_assert!((u * alpha.cos() - v * flipped.cos()).abs() < 1e-9);
            prop_assert!((u * alpha.sin() - v * flipped.sin()).abs() < 1e-9);
        }
    }
}
