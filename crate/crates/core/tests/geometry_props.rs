use std::f64::consts::PI;

use proptest::prelude::*;
use tdoa_seek::geometry::{
    normalized_delta, receiver_positions, slant_ranges, slant_ranges_polar, to_polar, wrap_angle,
    BaselineGeometry, PlanarPoint, SourcePosition,
};

fn coord() -> impl Strategy<Value = f64> {
    -200.0..200.0f64
}

fn rotate(p: PlanarPoint, by: f64) -> PlanarPoint {
    let (s, c) = by.sin_cos();
    PlanarPoint::new(c * p.x - s * p.y, s * p.x + c * p.y)
}

proptest! {
    #[test]
    fn closed_form_matches_3d_distances(
        cx in coord(), cy in coord(), psi in -PI..PI,
        sx in coord(), sy in coord(), z in 0.1..30.0f64, d in 0.1..20.0f64,
    ) {
        let g = BaselineGeometry::new(PlanarPoint::new(cx, cy), psi, d);
        let s = SourcePosition::new(sx, sy, z);
        let (p1, p2) = receiver_positions(&g);
        let dist = |p: PlanarPoint| ((p.x - sx).powi(2) + (p.y - sy).powi(2) + z * z).sqrt();
        let (r1, r2) = slant_ranges(&g, &s);
        prop_assert!((r1 - dist(p1)).abs() < 1e-9 * (1.0 + r1));
        prop_assert!((r2 - dist(p2)).abs() < 1e-9 * (1.0 + r2));

        let pose = to_polar(g.center, psi, &s);
        prop_assume!(!pose.degenerate);
        let (q1, q2) = slant_ranges_polar(pose.range, pose.alpha, d, z);
        prop_assert!((q1 - r1).abs() < 1e-8 * (1.0 + r1), "{q1} vs {r1}");
        prop_assert!((q2 - r2).abs() < 1e-8 * (1.0 + r2), "{q2} vs {r2}");
    }

    #[test]
    fn delta_is_invariant_under_rigid_motions(
        cx in coord(), cy in coord(), psi in -PI..PI,
        sx in coord(), sy in coord(), z in 0.1..30.0f64, d in 0.1..20.0f64,
        tx in coord(), ty in coord(), rot in -PI..PI,
    ) {
        let g = BaselineGeometry::new(PlanarPoint::new(cx, cy), psi, d);
        let s = SourcePosition::new(sx, sy, z);
        let base = normalized_delta(&g, &s);

        let moved = |p: PlanarPoint| {
            let r = rotate(p, rot);
            PlanarPoint::new(r.x + tx, r.y + ty)
        };
        let c2 = moved(g.center);
        let s2 = moved(s.planar());
        let g2 = BaselineGeometry::new(c2, wrap_angle(psi + rot), d);
        let other = normalized_delta(&g2, &SourcePosition::new(s2.x, s2.y, z));
        prop_assert!((base - other).abs() < 1e-7, "{base} vs {other}");
    }

    #[test]
    fn delta_stays_in_unit_interval(
        cx in coord(), cy in coord(), psi in -PI..PI,
        sx in coord(), sy in coord(), z in 1e-3..30.0f64, d in 0.01..50.0f64,
    ) {
        let g = BaselineGeometry::new(PlanarPoint::new(cx, cy), psi, d);
        let s = SourcePosition::new(sx, sy, z);
        let (r1, r2) = slant_ranges(&g, &s);
        prop_assert!(((r1 - r2) / d).abs() <= 1.0);
        prop_assert!(normalized_delta(&g, &s).abs() <= 1.0);
    }

    #[test]
    fn swapping_receivers_flips_the_sign(
        cx in coord(), cy in coord(), psi in -PI..PI,
        sx in coord(), sy in coord(), z in 0.1..30.0f64, d in 0.1..20.0f64,
    ) {
        // Turning the baseline around exchanges the two receivers.
        let s = SourcePosition::new(sx, sy, z);
        let a = normalized_delta(&BaselineGeometry::new(PlanarPoint::new(cx, cy), psi, d), &s);
        let b = normalized_delta(&BaselineGeometry::new(PlanarPoint::new(cx, cy), psi + PI, d), &s);
        prop_assert!((a + b).abs() < 1e-9);
    }
}
