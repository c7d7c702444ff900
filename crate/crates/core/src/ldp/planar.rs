// Copyright 2026 The deid Authors
// SPDX-License-Identifier: Apache-2.0

//! Polar Laplace noise for geo-indistinguishability.
//!
//! The radius has density `ε² r e^(-εr)` (a Gamma(2, 1/ε) law) and CDF
//! `1 - (1 + εr) e^(-εr)`; it is sampled by inverting that CDF with the
//! lower real branch of the Lambert W function.

use std::f64::consts::{E, PI};

use rand::Rng;

use crate::error::{Error, Result};

/// Lower real branch `W₋₁(x)` for `x` in `[-1/e, 0)`: the solution `w ≤ -1`
/// of `w·eʷ = x`.
///
/// Solves `w + ln(-w) = ln(-x)` by Newton steps kept inside a bisection
/// bracket, to full double precision.
pub fn lambert_w_minus1(x: f64) -> Result<f64> {
    let branch_point = -1.0 / E;
    if !(x >= branch_point - 1e-15 && x < 0.0) {
        return Err(Error::InvalidParameter(format!(
            "W-1 is defined on [-1/e, 0), got {x}"
        )));
    }
    if x <= branch_point {
        return Ok(-1.0);
    }
    let target = (-x).ln();
    let g = |w: f64| w + (-w).ln() - target;

    // g increases on (-inf, -1), with g(-1) > 0
    let mut hi = -1.0;
    let mut lo = -2.0;
    while g(lo) > 0.0 {
        hi = lo;
        lo *= 2.0;
    }

    // series about the branch point, or the asymptotic form near 0
    let mut w = if x < -0.25 {
        let p = -(2.0 * (1.0 + E * x)).sqrt();
        -1.0 + p - p * p / 3.0
    } else {
        let l1 = target;
        let l2 = (-l1).ln();
        l1 - l2 + l2 / l1
    };
    if !(lo < w && w < hi) {
        w = 0.5 * (lo + hi);
    }

    for _ in 0..100 {
        let gw = g(w);
        if gw == 0.0 {
            return Ok(w);
        }
        if gw > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        let step = gw / (1.0 + 1.0 / w);
        let mut next = w - step;
        if !(lo < next && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - w).abs() <= 4.0 * f64::EPSILON * w.abs()
            || hi - lo <= 4.0 * f64::EPSILON * lo.abs()
        {
            return Ok(next);
        }
        w = next;
    }
    Ok(w)
}

/// Radius at cumulative probability `p` in `[0, 1)`:
/// `r = -(W₋₁((p - 1)/e) + 1) / ε`.
pub fn planar_radius(epsilon: f64, p: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "p must lie in [0, 1), got {p}"
        )));
    }
    if epsilon.is_infinite() {
        return Ok(0.0);
    }
    let w = lambert_w_minus1((p - 1.0) / E)?;
    Ok((-(w + 1.0) / epsilon).max(0.0))
}

/// CDF of the radius.
pub fn radial_cdf(epsilon: f64, r: f64) -> f64 {
    1.0 - (1.0 + epsilon * r) * (-epsilon * r).exp()
}

/// Draws `(r, theta)`: a distance in the unit `epsilon` is expressed per,
/// and a uniform bearing in radians.
pub fn planar_laplace<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> Result<(f64, f64)> {
    let theta = rng.gen::<f64>() * 2.0 * PI;
    let p: f64 = rng.gen();
    Ok((planar_radius(epsilon, p)?, theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn satisfies_defining_equation() {
        for x in [
            -0.3678,
            -0.3,
            -0.18393972058572117,
            -0.1,
            -1e-3,
            -1e-10,
            -1e-300,
        ] {
            let w = lambert_w_minus1(x).unwrap();
            assert!(w <= -1.0);
            let back = w * w.exp();
            assert!(((back - x) / x).abs() < 1e-12, "x {x}: w {w} gives {back}");
        }
        assert_eq!(lambert_w_minus1(-1.0 / E).unwrap(), -1.0);
        assert!(lambert_w_minus1(0.0).is_err());
        assert!(lambert_w_minus1(-0.5).is_err());
    }

    #[test]
    fn radius_boundaries() {
        assert_eq!(planar_radius(1.0, 0.0).unwrap(), 0.0);
        assert!(planar_radius(1.0, 1e-12).unwrap() < 1e-5);
        assert!(planar_radius(1.0, 1.0).is_err());
        assert_eq!(planar_radius(f64::INFINITY, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn radius_inverts_cdf() {
        for eps in [0.1, 1.0, 3.0] {
            for p in [0.01, 0.25, 0.5, 0.9, 0.999] {
                let r = planar_radius(eps, p).unwrap();
                assert!((radial_cdf(eps, r) - p).abs() < 1e-12);
            }
        }
    }
}
