//! Independent reference computations for the integration tests.
//!
//! Nothing here calls into the assembly code: energies are obtained by
//! nested adaptive double-exponential quadrature of the defining integral,
//! and the sphere constant by direct quadrature over the unit sphere.

#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;

/// Adaptive tanh-sinh quadrature on a finite interval. Abscissae are
/// produced as distances from the nearer endpoint so integrable endpoint
/// singularities at `lo` or `hi` are sampled without cancellation.
pub fn tanh_sinh(lo: f64, hi: f64, tol: f64, f: &mut dyn FnMut(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let half = 0.5 * (hi - lo);
    let tmax = 3.4;
    let mut node = |t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let e = (-2.0 * u.abs()).exp();
        // distance from the nearer endpoint: half * (1 - tanh|u|)
        let dist = half * 2.0 * e / (1.0 + e);
        let w = half * 0.5 * PI * t.cosh() * 4.0 * e / ((1.0 + e) * (1.0 + e));
        if dist <= 0.0 || w == 0.0 {
            return 0.0;
        }
        let x = if t < 0.0 { lo + dist } else { hi - dist };
        let v = f(x);
        if v.is_finite() {
            w * v
        } else {
            0.0
        }
    };
    let mut step = 0.5;
    let mut sum = node(0.0);
    let mut k = 1;
    while k as f64 * step <= tmax {
        sum += node(k as f64 * step) + node(-(k as f64) * step);
        k += 1;
    }
    let mut estimate = sum * step;
    for _level in 0..9 {
        step *= 0.5;
        let mut k = 1;
        while k as f64 * step <= tmax {
            sum += node(k as f64 * step) + node(-(k as f64) * step);
            k += 2;
        }
        let next = sum * step;
        let converged = (next - estimate).abs() <= tol * next.abs() + 1e-300;
        estimate = next;
        if converged {
            break;
        }
    }
    estimate
}

/// Sum of tanh-sinh integrals over consecutive breakpoints.
pub fn piecewise(points: &[f64], tol: f64, f: &mut dyn FnMut(f64) -> f64) -> f64 {
    points
        .windows(2)
        .map(|w| tanh_sinh(w[0], w[1], tol, f))
        .sum()
}

/// Continuous piecewise-linear function on a uniform grid of `(a, b)`,
/// extended by zero.
#[derive(Clone, Debug)]
pub struct Hat {
    pub a: f64,
    pub b: f64,
    /// Values at `a + i h`, `i = 0..=n`, with zero at both ends.
    pub values: Vec<f64>,
}

impl Hat {
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n() as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        let t = (x - self.a) / self.h();
        let i = (t.floor() as usize).min(self.n() - 1);
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Grid points `a + i h` for integer `i` in `[lo, hi]`.
    fn grid_between(&self, lo: f64, hi: f64) -> Vec<f64> {
        let h = self.h();
        let first = ((lo - self.a) / h).ceil() as i64;
        let last = ((hi - self.a) / h).floor() as i64;
        let mut pts = vec![lo];
        for i in first..=last {
            let x = self.a + i as f64 * h;
            if x > lo + 1e-14 * h && x < hi - 1e-14 * h {
                pts.push(x);
            }
        }
        pts.push(hi);
        pts
    }

    pub fn local_energy(&self, p: f64) -> f64 {
        let h = self.h();
        self.values
            .windows(2)
            .map(|w| h * ((w[1] - w[0]) / h).abs().powf(p))
            .sum()
    }

    pub fn lp_mass(&self, p: f64) -> f64 {
        let pts = self.grid_between(self.a, self.b);
        piecewise(&pts, 1e-13, &mut |x| self.eval(x).abs().powf(p))
    }
}

/// `int int |u(x) - u(y)|^p / |x - y|^{1 + ps}` over pairs of
/// `(a - delta, b + delta)` closer than `delta`, or over the complement of
/// `(R \ (a, b))^2` when `delta` is `None`.
pub fn brute_energy(u: &Hat, delta: Option<f64>, p: f64, s: f64, tol: f64) -> f64 {
    let (a, b) = (u.a, u.b);
    let ps = p * s;
    let pair = |x: f64, r: f64| (u.eval(x) - u.eval(x + r)).abs().powf(p) / r.powf(1.0 + ps);
    match delta {
        Some(d) => {
            // both orders of each pair: 2 int_x int_{r > 0}
            let xs = u.grid_between(a - d, b + d);
            2.0 * piecewise(&xs, tol, &mut |x| {
                let rmax = d.min(b + d - x);
                let mut rs = vec![0.0];
                rs.extend(
                    u.grid_between(x, x + rmax)
                        .into_iter()
                        .skip(1)
                        .map(|y| y - x),
                );
                // a node may coincide with x + rmax; grid_between closes the list
                rs.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
                piecewise(&rs, tol, &mut |r| pair(x, r))
            })
        }
        None => {
            let xs = u.grid_between(a, b);
            let inner = 2.0
                * piecewise(&xs, tol, &mut |x| {
                    let mut rs = vec![0.0];
                    rs.extend(u.grid_between(x, b).into_iter().skip(1).map(|y| y - x));
                    rs.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
                    piecewise(&rs, tol, &mut |r| pair(x, r))
                });
            // y outside (a, b): substitute r = dist / w, w in (0, 1]
            let unit = tanh_sinh(0.0, 1.0, tol, &mut |w| w.powf(ps - 1.0));
            let tail = 2.0
                * piecewise(&xs, tol, &mut |x| {
                    let ux = u.eval(x).abs().powf(p);
                    ux * unit * ((x - a).powf(-ps) + (b - x).powf(-ps))
                });
            inner + tail
        }
    }
}

/// `int_{S^{N-1}} |e . sigma|^p` by quadrature in spherical coordinates.
pub fn sphere_moment(dim: usize, p: f64) -> f64 {
    let tol = 1e-14;
    match dim {
        1 => 2.0,
        2 => 4.0 * tanh_sinh(0.0, 0.5 * PI, tol, &mut |t| t.cos().powf(p)),
        3 => 2.0 * PI * 2.0 * tanh_sinh(0.0, 0.5 * PI, tol, &mut |t| t.cos().powf(p) * t.sin()),
        _ => panic!("dimension {dim} not covered"),
    }
}

/// Random nodal values with zero endpoints.
pub fn random_values(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    v[0] = 0.0;
    v[n] = 0.0;
    v
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
