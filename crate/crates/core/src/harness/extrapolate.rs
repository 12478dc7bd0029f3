//! Three-point Richardson extrapolation with a fitted rate.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// Estimated value at `delta = 0`.
    pub limit: f64,
    /// Fitted exponent `alpha` in `L + c delta^alpha`; absent when the three
    /// values do not approach a limit monotonically.
    pub rate: Option<f64>,
    pub coefficient: Option<f64>,
    /// All three values coincide, so the sequence is trivially converged.
    pub constant: bool,
}

impl Extrapolation {
    /// The fit describes a sequence converging at a positive rate.
    pub fn is_sound(&self) -> bool {
        self.constant || self.rate.is_some_and(|a| a > 0.0)
    }
}

/// Fits `v(delta) = L + c delta^alpha` through the last three samples.
///
/// `deltas` must be strictly decreasing and positive. With a constant ratio
/// between successive horizons the rate is `ln(d1/d2) / ln(r)`; otherwise it
/// is found by bisection on the ratio of differences.
pub fn richardson(deltas: &[f64], values: &[f64]) -> Extrapolation {
    assert!(deltas.len() >= 3 && deltas.len() == values.len());
    let n = deltas.len();
    let (x1, x2, x3) = (deltas[n - 3], deltas[n - 2], deltas[n - 1]);
    let (v1, v2, v3) = (values[n - 3], values[n - 2], values[n - 1]);
    let (d1, d2) = (v1 - v2, v2 - v3);
    let scale = v1.abs().max(v2.abs()).max(v3.abs());
    if d1.abs() <= 1e-15 * scale && d2.abs() <= 1e-15 * scale {
        return Extrapolation {
            limit: v3,
            rate: None,
            coefficient: None,
            constant: true,
        };
    }
    let no_fit = Extrapolation {
        limit: v3,
        rate: None,
        coefficient: None,
        constant: false,
    };
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return no_fit;
    }
    let ratio = d1 / d2;
    let target = |a: f64| (x1.powf(a) - x2.powf(a)) / (x2.powf(a) - x3.powf(a));
    let (r12, r23) = (x1 / x2, x2 / x3);
    let alpha = if (r12 - r23).abs() <= 1e-12 * r12 {
        ratio.ln() / r12.ln()
    } else {
        // target is increasing in alpha for decreasing horizons
        let (mut lo, mut hi) = (1e-8, 40.0);
        if !(target(lo) < ratio && ratio < target(hi)) {
            return no_fit;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if target(mid) < ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    if !alpha.is_finite() || alpha <= 0.0 {
        return Extrapolation {
            rate: Some(alpha).filter(|a| a.is_finite()),
            ..no_fit
        };
    }
    let c = d2 / (x2.powf(alpha) - x3.powf(alpha));
    Extrapolation {
        limit: v3 - c * x3.powf(alpha),
        rate: Some(alpha),
        coefficient: Some(c),
        constant: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_power_law() {
        let d = [0.2, 0.1, 0.05, 0.025];
        let v: Vec<f64> = d.iter().map(|x: &f64| 3.0 + 0.7 * x.powf(1.5)).collect();
        let e = richardson(&d, &v);
        assert!((e.limit - 3.0).abs() < 1e-12);
        assert!((e.rate.unwrap() - 1.5).abs() < 1e-10);
        assert!(e.is_sound());
    }

    #[test]
    fn uneven_spacing_uses_bisection() {
        let d = [0.3, 0.1, 0.04];
        let v: Vec<f64> = d.iter().map(|x: &f64| -1.0 - 2.0 * x.powf(0.8)).collect();
        let e = richardson(&d, &v);
        assert!((e.limit + 1.0).abs() < 1e-10, "{e:?}");
        assert!((e.rate.unwrap() - 0.8).abs() < 1e-9);
    }

    #[test]
    fn oscillation_and_constants() {
        let e = richardson(&[3.0, 2.0, 1.0], &[1.0, 2.0, 1.5]);
        assert!(!e.is_sound());
        assert_eq!(e.limit, 1.5);
        let e = richardson(&[3.0, 2.0, 1.0], &[0.0; 3]);
        assert!(e.constant && e.is_sound());
        // growing differences mean divergence, alpha < 0
        let e = richardson(&[0.4, 0.2, 0.1], &[1.0, 1.1, 1.3]);
        assert!(!e.is_sound());
    }
}
