//! Planar geometry of a two-receiver baseline above a submerged source.
//!
//! Frame convention: `x` points north, `y` points east and the heading `psi`
//! is measured from `+x` toward `+y`. The receivers sit at the surface
//! (depth 0) and the source at depth `z > 0`.

use std::f64::consts::{PI, TAU};

/// A point in the horizontal plane, meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarPoint {
    pub x: f64,
    pub y: f64,
}

impl PlanarPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &PlanarPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Acoustic source position. `z` is depth, positive down, and must be > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourcePosition {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl SourcePosition {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn planar(&self) -> PlanarPoint {
        PlanarPoint::new(self.x, self.y)
    }
}

/// Receiver baseline: center, heading, length `d` and speed of sound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineGeometry {
    pub center: PlanarPoint,
    pub heading: f64,
    pub baseline: f64,
    pub sound_speed: f64,
}

impl BaselineGeometry {
    pub const DEFAULT_SOUND_SPEED: f64 = 1500.0;

    pub fn new(center: PlanarPoint, heading: f64, baseline: f64) -> Self {
        Self {
            center,
            heading,
            baseline,
            sound_speed: Self::DEFAULT_SOUND_SPEED,
        }
    }

    /// Offset of receiver 1 from the center; receiver 2 sits at the negated offset.
    pub fn receiver_offset(&self) -> PlanarPoint {
        let half = 0.5 * self.baseline;
        PlanarPoint::new(half * self.heading.sin(), -half * self.heading.cos())
    }
}

/// Range, bearing and relative angle of the baseline center with respect to the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPose {
    pub range: f64,
    pub bearing: f64,
    /// Heading error `psi - bearing + pi`, wrapped to (-pi, pi]. Zero means facing the source.
    pub alpha: f64,
    /// Set when the center is exactly above the source; bearing and alpha are reported as 0.
    pub degenerate: bool,
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(angle: f64) -> f64 {
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

pub fn receiver_positions(g: &BaselineGeometry) -> (PlanarPoint, PlanarPoint) {
    let off = g.receiver_offset();
    (
        PlanarPoint::new(g.center.x + off.x, g.center.y + off.y),
        PlanarPoint::new(g.center.x - off.x, g.center.y - off.y),
    )
}

fn slant(p: PlanarPoint, s: &SourcePosition) -> f64 {
    let dx = p.x - s.x;
    let dy = p.y - s.y;
    (dx * dx + dy * dy + s.z * s.z).sqrt()
}

/// 3-D distances `(r1, r2)` from each surface receiver to the source.
pub fn slant_ranges(g: &BaselineGeometry, s: &SourcePosition) -> (f64, f64) {
    let (p1, p2) = receiver_positions(g);
    (slant(p1, s), slant(p2, s))
}

/// Slant ranges written in the polar chart, source at the planar origin.
///
/// With `alpha = psi - bearing + pi` the cross term `d r sin(psi - bearing)`
/// becomes `-d r sin(alpha)`.
pub fn slant_ranges_polar(range: f64, alpha: f64, baseline: f64, depth: f64) -> (f64, f64) {
    let common = 0.25 * baseline * baseline + range * range + depth * depth;
    let cross = baseline * range * alpha.sin();
    (
        (common - cross).max(0.0).sqrt(),
        (common + cross).max(0.0).sqrt(),
    )
}

/// Normalized range difference `(r1 - r2) / d`, clamped to [-1, 1] against rounding.
pub fn normalized_delta(g: &BaselineGeometry, s: &SourcePosition) -> f64 {
    let (r1, r2) = slant_ranges(g, s);
    ((r1 - r2) / g.baseline).clamp(-1.0, 1.0)
}

/// Polar-chart counterpart of [`normalized_delta`].
pub fn normalized_delta_polar(range: f64, alpha: f64, baseline: f64, depth: f64) -> f64 {
    let (r1, r2) = slant_ranges_polar(range, alpha, baseline, depth);
    ((r1 - r2) / baseline).clamp(-1.0, 1.0)
}

/// Raw time difference of arrival `TOA_1 - TOA_2`, seconds.
pub fn tdoa_seconds(g: &BaselineGeometry, s: &SourcePosition) -> f64 {
    let (r1, r2) = slant_ranges(g, s);
    (r1 - r2) / g.sound_speed
}

pub fn to_polar(center: PlanarPoint, heading: f64, s: &SourcePosition) -> PolarPose {
    let dx = center.x - s.x;
    let dy = center.y - s.y;
    let range = dx.hypot(dy);
    if range == 0.0 {
        return PolarPose {
            range: 0.0,
            bearing: 0.0,
            alpha: 0.0,
            degenerate: true,
        };
    }
    let bearing = dy.atan2(dx);
    PolarPose {
        range,
        bearing,
        alpha: wrap_angle(heading - bearing + PI),
        degenerate: false,
    }
}

/// Seeking cost `f = delta^2`.
#[inline]
pub fn cost(delta: f64) -> f64 {
    delta * delta
}
