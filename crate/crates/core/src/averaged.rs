//! Lie-bracket averaged dynamics of the closed loop in `(r_c, alpha, x_e)`.
//!
//! Averaging the two sinusoidal yaw inputs replaces them by the bracket term
//! `a k / 2 * df/dalpha`. The module also carries the Lyapunov monitor used to
//! check decrease along averaged trajectories, the worst-case tuning
//! inequality, and a sampled audit of the boundedness conditions required by
//! the averaging theorem.

use std::fmt;
use std::ops::{Add, Mul};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::{
    damping, smooth_sgn, surge_amplitude, EsParams, SurgeFactors, SurgeParams, DIRECTION_POLARITY,
};
use crate::error::Error;
use crate::geometry::{cost, normalized_delta_polar, slant_ranges_polar};
use crate::plant::{rk4_step, DEFAULT_RANGE_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AveragedState {
    pub range: f64,
    pub alpha: f64,
    pub filter: f64,
}

impl AveragedState {
    pub const fn new(range: f64, alpha: f64, filter: f64) -> Self {
        Self {
            range,
            alpha,
            filter,
        }
    }
}

impl Add for AveragedState {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(
            self.range + o.range,
            self.alpha + o.alpha,
            self.filter + o.filter,
        )
    }
}

impl Mul<f64> for AveragedState {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.range * s, self.alpha * s, self.filter * s)
    }
}

/// `r^2 sin(2 alpha) / (r1 r2)`, the small-baseline gradient of the cost in alpha.
pub fn grad_f_alpha(range: f64, alpha: f64, baseline: f64, depth: f64) -> f64 {
    let (r1, r2) = slant_ranges_polar(range, alpha, baseline, depth);
    range * range * (2.0 * alpha).sin() / (r1 * r2)
}

/// Parameters of the averaged system: controller gains plus the geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AveragedSystem {
    pub es: EsParams,
    pub surge: SurgeParams,
    pub baseline: f64,
    pub depth: f64,
    pub range_floor: f64,
}

/// Components of `dV/dt` for `V = r^2/2 + alpha^2/2 + x_e^2/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSample {
    pub value: f64,
    pub rate_range: f64,
    pub rate_alpha: f64,
    pub rate_filter: f64,
}

impl LyapunovSample {
    pub fn rate(&self) -> f64 {
        self.rate_range + self.rate_alpha + self.rate_filter
    }
}

impl AveragedSystem {
    pub fn new(es: EsParams, surge: SurgeParams, baseline: f64, depth: f64) -> Self {
        Self {
            es,
            surge,
            baseline,
            depth,
            range_floor: DEFAULT_RANGE_FLOOR,
        }
    }

    pub fn cost(&self, z: &AveragedState) -> f64 {
        cost(normalized_delta_polar(
            z.range,
            z.alpha,
            self.baseline,
            self.depth,
        ))
    }

    /// Surge speed from the oracle factors at the averaged state.
    pub fn surge_speed(&self, z: &AveragedState) -> f64 {
        let delta = normalized_delta_polar(z.range, z.alpha, self.baseline, self.depth);
        SurgeFactors::oracle(delta, z.alpha, z.range, &self.surge).command()
    }

    fn guard(&self, z: &AveragedState) -> Result<(), Error> {
        if z.range < self.range_floor {
            Err(Error::SingularRange {
                range: z.range,
                floor: self.range_floor,
            })
        } else {
            Ok(())
        }
    }

    pub fn derivative(&self, z: &AveragedState) -> Result<AveragedState, Error> {
        self.guard(z)?;
        let u = self.surge_speed(z);
        let grad = grad_f_alpha(z.range, z.alpha, self.baseline, self.depth);
        Ok(AveragedState {
            range: -u * z.alpha.cos(),
            alpha: u / z.range * z.alpha.sin() + 0.5 * self.es.a * self.es.k * grad,
            filter: -z.filter * self.es.h + self.cost(z),
        })
    }

    pub fn lyapunov(&self, z: &AveragedState) -> Result<LyapunovSample, Error> {
        self.guard(z)?;
        let u = self.surge_speed(z);
        let grad = grad_f_alpha(z.range, z.alpha, self.baseline, self.depth);
        Ok(LyapunovSample {
            value: 0.5 * (z.range * z.range + z.alpha * z.alpha + z.filter * z.filter),
            rate_range: -z.range * u * z.alpha.cos(),
            rate_alpha: z.alpha * u / z.range * z.alpha.sin()
                + 0.5 * z.alpha * self.es.a * self.es.k * grad,
            rate_filter: -z.filter * z.filter * self.es.h + z.filter * self.cost(z),
        })
    }

    /// Fixed-step RK4 trajectory, sampled every step. Stops early once the
    /// range falls below `stop_range` (or the singular floor).
    pub fn integrate(
        &self,
        initial: AveragedState,
        dt: f64,
        horizon: f64,
        stop_range: f64,
    ) -> Vec<(f64, AveragedState)> {
        let steps = (horizon / dt).round() as usize;
        let stop = stop_range.max(self.range_floor);
        let mut out = Vec::with_capacity(steps + 1);
        let mut z = initial;
        out.push((0.0, z));
        for i in 0..steps {
            if z.range < stop {
                break;
            }
            let t = i as f64 * dt;
            z = rk4_step(z, t, dt, |_, s| {
                // Stage states may dip under the floor only within one step of stopping.
                self.derivative(&s).unwrap_or_default()
            });
            out.push(((i + 1) as f64 * dt, z));
        }
        out
    }
}

/// Inputs of the worst-case tuning inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningInputs {
    pub u0: f64,
    pub baseline: f64,
    pub depth: f64,
    pub a: f64,
    pub k: f64,
    pub epsilon: f64,
    pub delta: f64,
}

/// `u0 (d^2 + 4 z^2) + 4 a k eps^3 cos(delta)`; the condition holds when this is <= 0.
pub fn tuning_lhs(t: &TuningInputs) -> f64 {
    t.u0 * (t.baseline * t.baseline + 4.0 * t.depth * t.depth)
        + 4.0 * t.a * t.k * t.epsilon.powi(3) * t.delta.cos()
}

pub fn tuning_condition(t: &TuningInputs) -> bool {
    tuning_lhs(t) <= 0.0
}

/// Closed box in `(r_c, alpha, x_e)` sampled by the audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditBox {
    pub range: (f64, f64),
    pub alpha: (f64, f64),
    pub filter: (f64, f64),
}

#[derive(Debug, Clone, Copy)]
pub struct AuditSettings {
    pub mu: f64,
    pub samples: usize,
    pub seed: u64,
    pub fd_step: f64,
}

impl Default for AuditSettings {
    fn default() -> Self {
        Self {
            mu: 100.0,
            samples: 100_000,
            seed: 0,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundEntry {
    pub symbol: &'static str,
    pub quantity: &'static str,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub entries: [BoundEntry; 6],
    pub samples: usize,
}

impl BoundsReport {
    pub fn get(&self, symbol: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.symbol == symbol)
            .map(|e| e.max)
    }

    pub fn all_finite(&self) -> bool {
        self.entries.iter().all(|e| e.max.is_finite())
    }
}

impl fmt::Display for BoundsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "{} = {:.9e}  # max {} over {} samples",
                e.symbol, e.max, e.quantity, self.samples
            )?;
        }
        Ok(())
    }
}

type Vec3 = [f64; 3];

fn norm(v: &Vec3) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Input-affine vector fields of the closed loop, smoothed with `tanh(mu .)`.
struct Fields<'a> {
    sys: &'a AveragedSystem,
    mu: f64,
}

impl Fields<'_> {
    fn cost(&self, eta: &Vec3) -> f64 {
        cost(normalized_delta_polar(
            eta[0],
            eta[1],
            self.sys.baseline,
            self.sys.depth,
        ))
    }

    /// Drift field; `t` is accepted so the time derivatives can be audited.
    fn b0(&self, _t: f64, eta: &Vec3) -> Vec3 {
        let [r, alpha, xe] = *eta;
        let p = &self.sys.surge;
        let delta = normalized_delta_polar(r, alpha, self.sys.baseline, self.sys.depth);
        let f = delta * delta;
        let dir = DIRECTION_POLARITY * smooth_sgn(delta * (2.0 * alpha).sin(), self.mu);
        let amp = surge_amplitude(f, p);
        // u_c / r written without the division so it stays finite at r = 0.
        let q = p.q as i32;
        let u_over_r = dir * amp * r.max(0.0).powi(q - 1) / (r.max(0.0) + p.epsilon).powi(q);
        let u = dir * amp * damping(r, p);
        [
            -u * alpha.cos(),
            u_over_r * alpha.sin(),
            -xe * self.sys.es.h + f,
        ]
    }

    fn b1(&self, _t: f64, eta: &Vec3) -> Vec3 {
        [
            0.0,
            self.sys.es.k * (self.cost(eta) - eta[2] * self.sys.es.h),
            0.0,
        ]
    }

    fn b2(&self, _t: f64, _eta: &Vec3) -> Vec3 {
        [0.0, self.sys.es.a, 0.0]
    }

    fn bracket(&self, _t: f64, eta: &Vec3) -> Vec3 {
        let g = grad_f_alpha(eta[0], eta[1], self.sys.baseline, self.sys.depth);
        [0.0, self.sys.es.a * self.sys.es.k * g, 0.0]
    }
}

/// Frobenius norm of the state Jacobian of `field` by central differences,
/// one-sided where the stencil would leave the box.
fn jacobian_norm<F: Fn(&Vec3) -> Vec3>(field: F, eta: &Vec3, bx: &AuditBox, h: f64) -> f64 {
    let bounds = [bx.range, bx.alpha, bx.filter];
    let mut sum = 0.0;
    for j in 0..3 {
        let (lo, hi) = bounds[j];
        let mut plus = *eta;
        let mut minus = *eta;
        plus[j] = (eta[j] + h).min(hi);
        minus[j] = (eta[j] - h).max(lo);
        let span = plus[j] - minus[j];
        if span <= 0.0 {
            continue;
        }
        let (fp, fm) = (field(&plus), field(&minus));
        for i in 0..3 {
            let d = (fp[i] - fm[i]) / span;
            sum += d * d;
        }
    }
    sum.sqrt()
}

/// Norm of the time derivative of a field by central differences in `t`.
fn time_rate<F: Fn(f64, &Vec3) -> Vec3>(field: F, t: f64, eta: &Vec3, h: f64) -> f64 {
    let (p, m) = (field(t + h, eta), field(t - h, eta));
    norm(&[
        (p[0] - m[0]) / (2.0 * h),
        (p[1] - m[1]) / (2.0 * h),
        (p[2] - m[2]) / (2.0 * h),
    ])
}

#[derive(Debug, Clone, Copy, Default)]
struct Maxima([f64; 6]);

impl Maxima {
    fn merge(self, o: Self) -> Self {
        let mut out = self.0;
        for (a, b) in out.iter_mut().zip(o.0) {
            *a = a.max(b);
        }
        Maxima(out)
    }
}

fn sample_point(bx: &AuditBox, index: usize, grid: usize, seed: u64) -> Vec3 {
    let lerp = |(lo, hi): (f64, f64), u: f64| lo + (hi - lo) * u;
    let cells = grid * grid * grid;
    if index < cells {
        let step = |i: usize| {
            if grid > 1 {
                i as f64 / (grid - 1) as f64
            } else {
                0.5
            }
        };
        let (i, j, k) = (index / (grid * grid), (index / grid) % grid, index % grid);
        [
            lerp(bx.range, step(i)),
            lerp(bx.alpha, step(j)),
            lerp(bx.filter, step(k)),
        ]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        [
            lerp(bx.range, rng.random()),
            lerp(bx.alpha, rng.random()),
            lerp(bx.filter, rng.random()),
        ]
    }
}

/// Samples the box (half on a regular grid, the rest uniformly at random)
/// and reports the largest observed value of each bound quantity.
///
/// Sampling is split across the rayon pool and merged with `max`, so the
/// report does not depend on the number of workers.
pub fn bounds_audit(
    sys: &AveragedSystem,
    bx: &AuditBox,
    settings: &AuditSettings,
) -> Result<BoundsReport, Error> {
    let fields = Fields {
        sys,
        mu: settings.mu,
    };
    let grid = ((settings.samples / 2) as f64).cbrt().floor().max(1.0) as usize;
    let h = settings.fd_step;
    let t = 0.0;

    let maxima = (0..settings.samples)
        .into_par_iter()
        .map(|idx| {
            let eta = sample_point(bx, idx, grid, settings.seed);
            let b0 = fields.b0(t, &eta);
            let b1 = fields.b1(t, &eta);
            let b2 = fields.b2(t, &eta);
            let a1 = norm(&b0).max(norm(&b1)).max(norm(&b2));
            let a2 = time_rate(|t, e| fields.b0(t, e), t, &eta, h)
                .max(time_rate(|t, e| fields.b1(t, e), t, &eta, h))
                .max(time_rate(|t, e| fields.b2(t, e), t, &eta, h));
            let a3 = jacobian_norm(|e| fields.b0(t, e), &eta, bx, h)
                .max(jacobian_norm(|e| fields.b1(t, e), &eta, bx, h))
                .max(jacobian_norm(|e| fields.b2(t, e), &eta, bx, h));
            // Mixed t/eta derivative: time rate of the state Jacobian.
            let a4 = {
                let jp = |tt: f64| {
                    jacobian_norm(|e| fields.b1(tt, e), &eta, bx, h)
                        + jacobian_norm(|e| fields.b2(tt, e), &eta, bx, h)
                };
                ((jp(t + h) - jp(t - h)) / (2.0 * h)).abs()
            };
            let a5 = jacobian_norm(|e| fields.bracket(t, e), &eta, bx, h);
            let a6 = time_rate(|t, e| fields.bracket(t, e), t, &eta, h);
            let m = [a1, a2, a3, a4, a5, a6];
            if let Some(pos) = m.iter().position(|v| !v.is_finite()) {
                return Err(Error::UnboundedSample {
                    quantity: SYMBOLS[pos].1,
                    range: eta[0],
                    alpha: eta[1],
                    filter: eta[2],
                });
            }
            Ok(Maxima(m))
        })
        .try_reduce(Maxima::default, |a, b| Ok(a.merge(b)))?;

    let entries = std::array::from_fn(|i| BoundEntry {
        symbol: SYMBOLS[i].0,
        quantity: SYMBOLS[i].1,
        max: maxima.0[i],
    });
    Ok(BoundsReport {
        entries,
        samples: settings.samples,
    })
}

const SYMBOLS: [(&str, &str); 6] = [
    ("A_1", "|b_i|"),
    ("A_2", "|db_i/dt|"),
    ("A_3", "|db_i/deta|"),
    ("A_4", "|d2b_j/dt deta|"),
    ("A_5", "|d[b_1,b_2]/deta|"),
    ("A_6", "|d[b_1,b_2]/dt|"),
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, TAU};

    fn system(k: f64) -> AveragedSystem {
        AveragedSystem::new(
            EsParams {
                a: 0.15,
                omega: TAU / 16.0,
                k,
                h: 0.19,
            },
            SurgeParams {
                u0: 0.5,
                m: 100.0,
                epsilon: 4.0,
                q: 3,
                mu: 100.0,
            },
            5.0,
            5.0,
        )
    }

    #[test]
    fn gradient_vanishes_on_axes() {
        assert_eq!(grad_f_alpha(20.0, 0.0, 1.0, 5.0), 0.0);
        assert!(grad_f_alpha(20.0, FRAC_PI_2, 1.0, 5.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let (r, a, d, z) = (20.0, FRAC_PI_4, 1.0, 5.0);
        let h = 1e-5;
        let f = |alpha: f64| cost(normalized_delta_polar(r, alpha, d, z));
        let fd = (f(a + h) - f(a - h)) / (2.0 * h);
        let g = grad_f_alpha(r, a, d, z);
        assert!(((g - fd) / fd).abs() < 0.02, "{g} vs {fd}");
    }

    #[test]
    fn on_axis_is_a_surge_null() {
        // Exactly on axis delta vanishes, and with it the direction factor.
        let sys = system(-1.0);
        let d = sys.derivative(&AveragedState::new(30.0, 0.0, 0.0)).unwrap();
        assert_eq!(d.range, 0.0);
        assert_eq!(d.alpha, 0.0);
        // Just off axis the vehicle closes in and the heading keeps turning in.
        for &alpha in &[0.05, -0.05] {
            let d = sys
                .derivative(&AveragedState::new(30.0, alpha, 0.0))
                .unwrap();
            assert!(d.range < 0.0);
            assert!(d.alpha * alpha < 0.0);
        }
    }

    #[test]
    fn heading_converges_without_surge() {
        let mut sys = system(-1.0);
        sys.surge.u0 = 0.0;
        for &alpha in &[0.3, 0.8, 1.3] {
            let z = AveragedState::new(30.0, alpha, 0.0);
            assert!(sys.surge_speed(&z).abs() < 1e-12);
            let d = sys.derivative(&z).unwrap();
            let expected = 0.5 * sys.es.a * sys.es.k * grad_f_alpha(30.0, alpha, 5.0, 5.0);
            assert!((d.alpha - expected).abs() < 1e-12 && d.alpha < 0.0);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let sys = system(-10.0);
        let l = sys.lyapunov(&AveragedState::new(1e-3, 0.0, 0.0)).unwrap();
        assert!(l.value < 1e-6);
        let l = sys
            .lyapunov(&AveragedState::new(20.0, FRAC_PI_2, 0.0))
            .unwrap();
        assert!(l.rate_alpha.abs() < 1e-12);
    }

    #[test]
    fn angle_rate_nonpositive_on_grid_when_tuned() {
        let sys = system(-10.0);
        let t = TuningInputs {
            u0: 0.5,
            baseline: 5.0,
            depth: 5.0,
            a: 0.15,
            k: -10.0,
            epsilon: 4.0,
            delta: 0.0,
        };
        assert!(tuning_condition(&t));
        for i in 1..=50 {
            for j in -19..=19 {
                let z = AveragedState::new(i as f64, j as f64 * 0.08, 0.0);
                let l = sys.lyapunov(&z).unwrap();
                assert!(l.rate_alpha <= 1e-9, "{z:?}: {}", l.rate_alpha);
            }
        }
    }

    #[test]
    fn singular_range_is_reported() {
        let sys = system(-1.0);
        assert!(matches!(
            sys.derivative(&AveragedState::new(0.0, 0.0, 0.0)),
            Err(Error::SingularRange { .. })
        ));
    }

    #[test]
    fn tuning_examples() {
        let base = TuningInputs {
            u0: 0.5,
            baseline: 5.0,
            depth: 5.0,
            a: 0.15,
            k: -1.0,
            epsilon: 4.0,
            delta: FRAC_PI_3,
        };
        assert!((tuning_lhs(&base) - 43.3).abs() < 1e-9);
        assert!(!tuning_condition(&base));
        assert!(tuning_condition(&TuningInputs { u0: 0.0, ..base }));
        let tuned = TuningInputs {
            k: -10.0,
            delta: 0.0,
            ..base
        };
        assert!((tuning_lhs(&tuned) - (62.5 - 384.0)).abs() < 1e-9);
        assert!(tuning_condition(&tuned));
    }

    #[test]
    fn audit_small_sample_is_finite() {
        let mut sys = system(-1.0);
        sys.baseline = 1.0;
        let bx = AuditBox {
            range: (0.0, 100.0),
            alpha: (-std::f64::consts::PI, std::f64::consts::PI),
            filter: (-1.0, 1.0),
        };
        let report = bounds_audit(
            &sys,
            &bx,
            &AuditSettings {
                samples: 2000,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(report.all_finite());
        assert_eq!(report.get("A_2"), Some(0.0));
        assert_eq!(report.get("A_4"), Some(0.0));
        assert_eq!(report.get("A_6"), Some(0.0));
        // |b_1| <= |k| (1 + |x_e| h) and |b_2| = a, both under A_1.
        assert!(report.get("A_1").unwrap() >= sys.es.a);
        let text = report.to_string();
        assert!(text.contains("A_5 = ") && text.contains("2000 samples"));
    }
}
