// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

use rand::distributions::Open01;
use rand::Rng;

use crate::error::{Error, Result};

/// Laplace scale `delta / epsilon`. An infinite epsilon is accepted as the
/// noiseless limit and gives a zero scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseScale {
    delta: f64,
    epsilon: f64,
}

impl NoiseScale {
    pub fn new(delta: f64, epsilon: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "amplitude must be positive, got {delta}"
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        Ok(NoiseScale { delta, epsilon })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scale(&self) -> f64 {
        self.delta / self.epsilon
    }
}

/// One draw from Laplace(0, b) by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(b: f64, rng: &mut R) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// `v + Lap(delta / epsilon)`.
pub fn laplace<R: Rng + ?Sized>(v: f64, s: NoiseScale, rng: &mut R) -> f64 {
    v + sample_laplace(s.scale(), rng)
}

// Mass of Laplace(x, b) falling inside [0, width].
fn inside_mass(x: f64, width: f64, b: f64) -> f64 {
    1.0 - 0.5 * ((-x / b).exp() + (-(width - x) / b).exp())
}

/// Scale of the truncated Laplace mechanism on a domain of the given width.
///
/// Truncating and renormalising the density inflates the likelihood ratio by
/// the ratio of the largest to the smallest in-domain mass, which is reached
/// between the midpoint and an endpoint:
///
/// ```text
/// width / b + ln(2 / (1 + exp(-width / 2b))) <= epsilon
/// ```
///
/// The smallest `b` satisfying this lies in `[width/ε, 1.25·width/ε]` and is
/// found by bisection, keeping the side where the bound holds.
pub fn bounded_scale(width: f64, epsilon: f64) -> f64 {
    if epsilon.is_infinite() {
        return 0.0;
    }
    let loss = |b: f64| width / b + (2.0 / (1.0 + (-width / (2.0 * b)).exp())).ln();
    let mut lo = width / epsilon;
    let mut hi = 1.25 * width / epsilon;
    debug_assert!(loss(hi) <= epsilon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if loss(mid) <= epsilon {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Laplace noise centred on `v`, truncated to `[lower, upper]` and
/// renormalised, with the scale widened so the ε guarantee holds on the
/// whole interval. `upper - lower` must equal the scale's amplitude.
pub fn bounded_laplace<R: Rng + ?Sized>(
    v: f64,
    lower: f64,
    upper: f64,
    s: NoiseScale,
    rng: &mut R,
) -> Result<f64> {
    if !(lower <= v && v <= upper) {
        return Err(Error::ValueOutOfDomain {
            value: v,
            lower,
            upper,
        });
    }
    let width = upper - lower;
    if (width - s.delta()).abs() > 1e-9 * s.delta().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "domain width {width} differs from the amplitude {}",
            s.delta()
        )));
    }
    let b = bounded_scale(width, s.epsilon());
    if b == 0.0 {
        return Ok(v);
    }

    // Inverse CDF restricted to the domain. Work relative to v.
    let cdf = |y: f64| {
        if y < 0.0 {
            0.5 * (y / b).exp()
        } else {
            1.0 - 0.5 * (-y / b).exp()
        }
    };
    let (f_lo, f_hi) = (cdf(lower - v), cdf(upper - v));
    debug_assert!((f_hi - f_lo - inside_mass(v - lower, width, b)).abs() < 1e-9);
    let u: f64 = rng.sample(Open01);
    let p = f_lo + u * (f_hi - f_lo);
    let y = if p < 0.5 {
        b * (2.0 * p).ln()
    } else {
        -b * (2.0 * (1.0 - p)).ln()
    };
    Ok((v + y).clamp(lower, upper))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn rng() -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(7)
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(NoiseScale::new(0.0, 1.0).is_err());
        assert!(NoiseScale::new(1.0, 0.0).is_err());
        assert!(NoiseScale::new(1.0, f64::NAN).is_err());
        assert!(NoiseScale::new(1.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn noiseless_limit() {
        let s = NoiseScale::new(10.0, f64::INFINITY).unwrap();
        assert_eq!(laplace(5.0, s, &mut rng()), 5.0);
        let s = NoiseScale::new(61.0, f64::INFINITY).unwrap();
        assert_eq!(
            bounded_laplace(30.0, 0.0, 61.0, s, &mut rng()).unwrap(),
            30.0
        );
        let s = NoiseScale::new(61.0, 1e9).unwrap();
        assert!((bounded_laplace(30.0, 0.0, 61.0, s, &mut rng()).unwrap() - 30.0).abs() < 1e-6);
    }

    #[test]
    fn seeded_draws_repeat() {
        let s = NoiseScale::new(1.0, 1.0).unwrap();
        let a: Vec<f64> = (0..5)
            .scan(rng(), |r, _| Some(laplace(0.0, s, r)))
            .collect();
        let b: Vec<f64> = (0..5)
            .scan(rng(), |r, _| Some(laplace(0.0, s, r)))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn laplace_moments() {
        let s = NoiseScale::new(1.0, 1.0).unwrap();
        let mut r = rng();
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| laplace(0.0, s, &mut r)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 2.0).abs() < 0.1, "variance {var}");
    }

    #[test]
    fn bounded_output_stays_in_domain() {
        let s = NoiseScale::new(61.0, 1.0).unwrap();
        let mut r = rng();
        for _ in 0..1_000_000 {
            let y = bounded_laplace(30.0, 0.0, 61.0, s, &mut r).unwrap();
            assert!((0.0..=61.0).contains(&y));
        }
    }

    #[test]
    fn bounded_rejects_out_of_domain() {
        let s = NoiseScale::new(61.0, 1.0).unwrap();
        assert!(matches!(
            bounded_laplace(62.0, 0.0, 61.0, s, &mut rng()),
            Err(Error::ValueOutOfDomain { .. })
        ));
        assert!(bounded_laplace(10.0, 0.0, 50.0, s, &mut rng()).is_err());
    }

    #[test]
    fn bounded_scale_meets_the_ratio_bound() {
        for eps in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
            let width = 61.0;
            let b = bounded_scale(width, eps);
            assert!(b > width / eps);
            // worst-case ratio of densities over all inputs and outputs, by brute force
            let masses: Vec<f64> = (0..=610)
                .map(|i| inside_mass(i as f64 / 10.0, width, b))
                .collect();
            let (min, max) = masses
                .iter()
                .fold((f64::MAX, f64::MIN), |(lo, hi), m| (lo.min(*m), hi.max(*m)));
            let worst = (width / b).exp() * max / min;
            assert!(worst <= eps.exp() * (1.0 + 1e-9), "eps {eps}: {worst}");
            assert!(
                worst >= eps.exp() * (1.0 - 1e-6),
                "scale not tight for eps {eps}"
            );
        }
    }
}
