use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{slant_ranges, BaselineGeometry, SourcePosition};

/// One normalized TDOA sample. Rejected samples (|delta| > 1) carry
/// `valid = false` and must not reach the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub t: f64,
    pub delta: f64,
    pub valid: bool,
}

/// Draws a noisy normalized range difference. `sigma` is the standard
/// deviation of the additive range-difference noise in meters.
pub fn measure<R: Rng + ?Sized>(
    t: f64,
    g: &BaselineGeometry,
    s: &SourcePosition,
    sigma: f64,
    rng: &mut R,
) -> Measurement {
    let noise = draw_noise(sigma, rng);
    measure_with_noise(t, g, s, noise)
}

pub(crate) fn draw_noise<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma)
            .expect("sigma is finite and positive")
            .sample(rng)
    } else {
        0.0
    }
}

pub(crate) fn measure_with_noise(
    t: f64,
    g: &BaselineGeometry,
    s: &SourcePosition,
    noise: f64,
) -> Measurement {
    let (r1, r2) = slant_ranges(g, s);
    let raw = (r1 - r2 + noise) / g.baseline;
    if noise == 0.0 {
        // Noise-free differences obey the triangle inequality up to rounding.
        return Measurement {
            t,
            delta: raw.clamp(-1.0, 1.0),
            valid: true,
        };
    }
    Measurement {
        t,
        delta: raw,
        valid: raw.abs() <= 1.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{normalized_delta, PlanarPoint};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noise_free_matches_geometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = BaselineGeometry::new(PlanarPoint::new(3.0, 11.0), 0.4, 5.0);
        let s = SourcePosition::new(0.0, 0.0, 5.0);
        let m = measure(2.0, &g, &s, 0.0, &mut rng);
        assert!(m.valid);
        assert_eq!(m.t, 2.0);
        assert_eq!(m.delta, normalized_delta(&g, &s));
    }

    #[test]
    fn rejection_triggers_near_endfire() {
        // Baseline pointing at a shallow source from close by: |r1 - r2| close to d.
        let g = BaselineGeometry::new(PlanarPoint::new(0.0, 10.0), 0.0, 5.0);
        let s = SourcePosition::new(0.0, 0.0, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<_> = (0..200)
            .map(|i| measure(i as f64, &g, &s, 1.0, &mut rng))
            .collect();
        assert!(samples.iter().any(|m| !m.valid));
        assert!(samples
            .iter()
            .filter(|m| m.valid)
            .all(|m| m.delta.abs() <= 1.0));
    }
}
