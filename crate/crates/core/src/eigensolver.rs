//! Eigenpairs of the discrete truncated fractional p-Laplacian.
//!
//! * `p = 2`: dense symmetric-definite solve of `A x = lambda M x`.
//! * any `p`: nonlinear inverse power iteration for the first eigenpair.
//! * a shooting method for the local one-dimensional p-Laplacian, used as
//!   an independent reference for the `delta -> 0` limit.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::NonlocalForm;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernelmath::KernelParams;
use crate::mesh::{interpolate, DiscreteFunction, Mesh};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Relative change of lambda between outer iterations.
    pub tol_lambda: f64,
    /// `L^p` distance between successive normalized iterates.
    pub tol_u: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Inner stop: dual gradient norm `<= inner_tol (1 + |lambda|)`.
    pub inner_tol: f64,
    pub seed: u64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_lambda: 1e-11,
            tol_u: 1e-7,
            max_outer: 300,
            max_inner: 400,
            inner_tol: 1e-11,
            seed: 0x5eed,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_lambda > 0.0 && self.tol_u > 0.0 && self.inner_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "solver tolerances must be positive".into(),
            ));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidArgument(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub lambda: f64,
    /// Normalized to unit `L^p(Omega)` norm.
    pub eigenfunction: DiscreteFunction,
    pub index_k: usize,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Times an iterate changed sign and was replaced by its absolute value.
    pub restarts: usize,
    /// Rayleigh quotient after each outer iteration.
    pub history: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct EigenPairRecord {
    pub lambda: f64,
    pub k: usize,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl EigenPair {
    pub fn record(&self) -> EigenPairRecord {
        EigenPairRecord {
            lambda: self.lambda,
            k: self.index_k,
            residual: self.residual,
            iterations: self.iterations,
            converged: self.converged,
            nodes: self.eigenfunction.mesh().nodes.clone(),
            values: self.eigenfunction.values().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.record())?)
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl Tridiagonal {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.diag.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i, i + 1)] = self.off[i];
                m[(i + 1, i)] = self.off[i];
            }
        }
        m
    }
}

/// Stiffness and `L^2` Gram matrices over the interior nodes for `p = 2`.
pub fn assemble_p2_matrices(
    mesh: &Mesh,
    params: &KernelParams,
) -> Result<(DMatrix<f64>, Tridiagonal)> {
    if params.p != 2.0 {
        return Err(Error::WrongExponent(params.p));
    }
    let form = NonlocalForm::for_mesh(mesh, *params)?;
    Ok((
        form.quadratic_matrix()?,
        p1_gram(mesh.interior_count(), mesh.h),
    ))
}

fn p1_gram(dim: usize, h: f64) -> Tridiagonal {
    Tridiagonal {
        diag: vec![2.0 * h / 3.0; dim],
        off: vec![h / 6.0; dim.saturating_sub(1)],
    }
}

/// Writes a dense matrix as: `u64` little-endian `n`, then `n * n`
/// row-major little-endian `f64` entries.
pub fn write_dense_matrix(out: &mut impl Write, m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    let n = m.nrows();
    out.write_all(&(n as u64).to_le_bytes())?;
    for i in 0..n {
        for j in 0..n {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_dense_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let bad = || Error::InvalidArgument("truncated matrix record".into());
    let head: [u8; 8] = bytes
        .get(..8)
        .ok_or_else(bad)?
        .try_into()
        .map_err(|_| bad())?;
    let n = u64::from_le_bytes(head) as usize;
    let body = bytes.get(8..).ok_or_else(bad)?;
    if body.len() != n * n * 8 {
        return Err(bad());
    }
    let mut m = DMatrix::zeros(n, n);
    for (k, chunk) in body.chunks_exact(8).enumerate() {
        m[(k / n, k % n)] = f64::from_le_bytes(chunk.try_into().map_err(|_| bad())?);
    }
    Ok(m)
}

fn sign_normalize(x: &mut DVector<f64>) {
    let max = x.amax();
    if let Some(first) = x.iter().find(|v| v.abs() > 1e-6 * max) {
        if *first < 0.0 {
            x.neg_mut();
        }
    }
}

/// The `k_max` smallest eigenpairs for `p = 2`, ascending, each with unit
/// `L^2(Omega)` norm.
pub fn solve_p2_spectrum(
    mesh: &Arc<Mesh>,
    params: &KernelParams,
    k_max: usize,
) -> Result<Vec<EigenPair>> {
    let dim = mesh.interior_count();
    if k_max == 0 || k_max > dim {
        return Err(Error::InvalidArgument(format!(
            "k_max must lie in 1..={dim}, got {k_max}"
        )));
    }
    let (a, mass) = assemble_p2_matrices(mesh, params)?;
    let m = mass.to_dense();
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::AssemblyCorruption("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    // C = L^{-1} A L^{-T}
    let x = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::AssemblyCorruption("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::AssemblyCorruption("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let lt = l.transpose();
    let mut pairs = Vec::with_capacity(k_max);
    for (k, &idx) in order.iter().take(k_max).enumerate() {
        let lambda = eig.eigenvalues[idx];
        let y = eig.eigenvectors.column(idx).into_owned();
        let mut xk = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| Error::AssemblyCorruption("singular Cholesky factor".into()))?;
        let norm = (xk.transpose() * &m * &xk)[(0, 0)].sqrt();
        xk /= norm;
        sign_normalize(&mut xk);
        let r = &a * &xk - (&m * &xk) * lambda;
        let residual = r.norm() / (lambda.abs() * (&m * &xk).norm());
        pairs.push(EigenPair {
            lambda,
            eigenfunction: DiscreteFunction::from_interior(mesh.clone(), xk.as_slice())?,
            index_k: k + 1,
            residual,
            iterations: 0,
            converged: true,
            restarts: 0,
            history: vec![lambda],
        });
    }
    Ok(pairs)
}

fn embed(x: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 2);
    v.push(0.0);
    v.extend_from_slice(x);
    v.push(0.0);
    v
}

fn interior(v: &[f64]) -> Vec<f64> {
    v[1..v.len() - 1].to_vec()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixed SPD preconditioner for the inner problems: the `p = 2` matrix of
/// a kernel with matching dilation scaling.
struct Preconditioner {
    chol: Cholesky<f64, Dyn>,
}

impl Preconditioner {
    fn new(form: &NonlocalForm) -> Result<Self> {
        let params = form.params();
        let s2 = (1.0 - params.p1s() / 2.0).clamp(0.05, 0.95);
        let linear = KernelParams {
            s: s2,
            p: 2.0,
            delta: params.delta,
        };
        let a = NonlocalForm::new(form.n_cells(), form.h(), linear)?
            .with_execution(Execution::Serial)
            .quadratic_matrix()?;
        let chol = Cholesky::new(a).ok_or_else(|| {
            Error::AssemblyCorruption("preconditioner is not positive definite".into())
        })?;
        Ok(Preconditioner { chol })
    }

    fn apply(&self, g: &[f64]) -> Vec<f64> {
        let v = self.chol.solve(&DVector::from_column_slice(g));
        v.as_slice().to_vec()
    }
}

struct InnerProblem<'a> {
    form: &'a NonlocalForm,
    rhs: Vec<f64>,
    inv_p: f64,
}

impl InnerProblem<'_> {
    /// `E(w)/p - rhs . w` and its gradient on interior nodes.
    fn eval(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (e, g) = self.form.energy_gradient(&embed(x))?;
        let mut g = interior(&g);
        for (gi, r) in g.iter_mut().zip(&self.rhs) {
            *gi = *gi * self.inv_p - r;
        }
        Ok((e * self.inv_p - dot(&self.rhs, x), g))
    }
}

/// Preconditioned L-BFGS with Armijo backtracking. Returns the point and
/// the iteration count.
fn lbfgs(
    prob: &InnerProblem,
    pre: &Preconditioner,
    x0: Vec<f64>,
    max_iter: usize,
    gtol: f64,
    h: f64,
) -> Result<(Vec<f64>, usize)> {
    const MEMORY: usize = 8;
    let dual = |g: &[f64]| (dot(g, g) / h).sqrt();
    let mut x = x0;
    let (mut f, mut g) = prob.eval(&x)?;
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iters = 0;
    while iters < max_iter {
        if dual(&g) <= gtol {
            break;
        }
        iters += 1;
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let mut r = pre.apply(&q);
        if let Some((s, y, _)) = hist.last() {
            let py = pre.apply(y);
            let gamma = dot(s, y) / dot(y, &py);
            for ri in r.iter_mut() {
                *ri *= gamma;
            }
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            for (ri, si) in r.iter_mut().zip(s) {
                *ri += (a - b) * si;
            }
        }
        let mut dir: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            hist.clear();
            dir = pre.apply(&g).iter().map(|v| -v).collect();
            slope = dot(&g, &dir);
        }
        let fresh = hist.is_empty();
        let trial = |t: f64| -> Result<(Vec<f64>, f64, Vec<f64>)> {
            let xt: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            let (ft, gt) = prob.eval(&xt)?;
            Ok((xt, ft, gt))
        };
        // The inner objective is convex, so a nonpositive directional
        // derivative at the trial point certifies descent even when the
        // function values differ only by rounding.
        let accept = |t: f64, c: &(Vec<f64>, f64, Vec<f64>)| {
            c.1 <= f + 1e-4 * t * slope || dot(&c.2, &dir) <= 0.0
        };
        let mut t = 1.0;
        let mut best = trial(t)?;
        if fresh && dot(&best.2, &dir) < 0.0 {
            // no curvature information yet: try longer steps
            for _ in 0..40 {
                let cand = trial(2.0 * t)?;
                if cand.1 < best.1 || dot(&cand.2, &dir) <= 0.0 {
                    t *= 2.0;
                    best = cand;
                } else {
                    break;
                }
            }
        }
        let mut ok = accept(t, &best);
        for _ in 0..60 {
            if ok {
                break;
            }
            t *= 0.5;
            best = trial(t)?;
            ok = accept(t, &best);
        }
        if !ok {
            // stalled at rounding level
            break;
        }
        let (xn, fnew, gn) = best;
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-300 {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, y, 1.0 / sy));
        }
        let stalled = fnew >= f && t < 1e-12;
        x = xn;
        f = fnew;
        g = gn;
        if stalled {
            break;
        }
    }
    Ok((x, iters))
}

/// `E(v) / int |v|^p`.
pub fn rayleigh_quotient(form: &NonlocalForm, v: &[f64]) -> Result<f64> {
    let m = form.mass(v);
    if !(m > 0.0) {
        return Err(Error::InvalidArgument(
            "zero function has no Rayleigh quotient".into(),
        ));
    }
    Ok(form.energy(v)? / m)
}

/// Smallest Rayleigh quotient over `count` random functions drawn from a
/// seeded generator (random nodal values and random low-mode sine sums).
pub fn random_rayleigh_probes(form: &NonlocalForm, count: usize, seed: u64) -> Result<f64> {
    let n = form.n_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for i in 0..count {
        let mut v = vec![0.0; n + 1];
        if i % 2 == 0 {
            for vi in v.iter_mut().take(n).skip(1) {
                *vi = rng.gen_range(-1.0..1.0);
            }
        } else {
            let modes: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for (j, vi) in v.iter_mut().enumerate().take(n).skip(1) {
                let x = j as f64 / n as f64;
                *vi = modes
                    .iter()
                    .enumerate()
                    .map(|(m, c)| c * ((m + 1) as f64 * std::f64::consts::PI * x).sin())
                    .sum::<f64>()
                    + (std::f64::consts::PI * x).sin();
            }
        }
        best = best.min(rayleigh_quotient(form, &v)?);
    }
    Ok(best)
}

/// First eigenpair for any `p` by inverse power iteration, started from the
/// positive bump `sin(pi (x - a) / (b - a))`.
pub fn solve_first_eigenpair(
    mesh: &Arc<Mesh>,
    params: &KernelParams,
    opts: &SolverOptions,
) -> Result<EigenPair> {
    let (a, len) = (mesh.a, mesh.b - mesh.a);
    let init = interpolate(
        |x| (std::f64::consts::PI * (x - a) / len).sin(),
        mesh.clone(),
    )?;
    solve_first_eigenpair_from(&init, params, opts)
}

/// Inverse power iteration from a given start:
/// `w = argmin E(w)/p - <|u|^{p-2} u, w>`, `u <- w / |w|_p`.
pub fn solve_first_eigenpair_from(
    init: &DiscreteFunction,
    params: &KernelParams,
    opts: &SolverOptions,
) -> Result<EigenPair> {
    opts.validate()?;
    let mesh = init.mesh().clone();
    let form = NonlocalForm::for_mesh(&mesh, *params)?;
    let p = params.p;
    let h = mesh.h;
    let pre = Preconditioner::new(&form)?;

    let normalize = |v: &mut Vec<f64>| -> Result<()> {
        let m = form.mass(v);
        if !(m > 0.0) {
            return Err(Error::InvalidArgument("iterate vanished".into()));
        }
        let c = m.powf(-1.0 / p);
        v.iter_mut().for_each(|x| *x *= c);
        Ok(())
    };

    let mut u = init.omega_values().to_vec();
    normalize(&mut u)?;
    let mut lambda = form.energy(&u)?;
    let mut history = vec![lambda];
    let mut restarts = 0;
    let mut converged = false;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        let (_, gm) = form.mass_gradient(&u);
        let rhs: Vec<f64> = interior(&gm).iter().map(|g| g / p).collect();
        let prob = InnerProblem {
            form: &form,
            rhs,
            inv_p: 1.0 / p,
        };
        let warm = lambda.powf(-1.0 / (p - 1.0));
        let x0: Vec<f64> = interior(&u).iter().map(|v| v * warm).collect();
        let gtol = opts.inner_tol * (1.0 + lambda.abs());
        let (w, _) = lbfgs(&prob, &pre, x0, opts.max_inner, gtol, h)?;
        let mut w = embed(&w);
        let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let negative = w.iter().any(|&v| v < -1e-10 * max);
        if negative && w.iter().all(|&v| v <= 1e-10 * max) {
            // uniformly signed, only the orientation differs
            w.iter_mut().for_each(|v| *v = -*v);
        } else if negative {
            restarts += 1;
            w.iter_mut().for_each(|v| *v = v.abs());
        }
        normalize(&mut w)?;
        let lambda_new = form.energy(&w)?;
        let diff: Vec<f64> = w.iter().zip(&u).map(|(a, b)| a - b).collect();
        let step = form.mass(&diff).powf(1.0 / p);
        history.push(lambda_new);
        let rel = (lambda_new - lambda).abs() / lambda_new.abs();
        u = w;
        lambda = lambda_new;
        if rel < opts.tol_lambda && step < opts.tol_u {
            converged = true;
            break;
        }
    }

    let (_, ge) = form.energy_gradient(&u)?;
    let (_, gm) = form.mass_gradient(&u);
    let r: Vec<f64> = ge.iter().zip(&gm).map(|(a, b)| a - lambda * b).collect();
    let ri = interior(&r);
    let gmi = interior(&gm);
    let residual = (dot(&ri, &ri) / dot(&gmi, &gmi)).sqrt() / lambda;

    Ok(EigenPair {
        lambda,
        eigenfunction: DiscreteFunction::from_interior(mesh, &interior(&u))?,
        index_k: 1,
        residual,
        iterations: outer,
        converged,
        restarts,
        history,
    })
}

/// First Dirichlet eigenvalue of `-(|u'|^{p-2} u')' = lambda |u|^{p-2} u`
/// on `(0, length)`: integrate from `u(0) = 0, u'(0) = 1` and bisect on
/// lambda until the first zero of `u` lands at `length`.
pub fn shooting_oracle_lambda1(p: f64, length: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) || !(length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need p > 1 and length > 0, got ({p}, {length})"
        )));
    }
    let zero_at = |lambda: f64| first_zero(p, lambda);
    // first zero moves left as lambda grows
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut tries = 0;
    while zero_at(lo)? <= length {
        lo *= 0.5;
        tries += 1;
        if tries > 200 {
            return Err(Error::OracleFailure("no lower bracket for lambda".into()));
        }
    }
    while zero_at(hi)? >= length {
        hi *= 2.0;
        tries += 1;
        if tries > 400 {
            return Err(Error::OracleFailure("no upper bracket for lambda".into()));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let z = zero_at(mid)?;
        if z > length {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-14 * hi {
            break;
        }
    }
    let lambda = (lo * hi).sqrt();
    let z = zero_at(lambda)?;
    if (z - length).abs() > 1e-10 * length.max(1.0) {
        return Err(Error::OracleFailure(format!(
            "first zero at {z}, wanted {length}"
        )));
    }
    Ok(lambda)
}

/// Position of the first positive zero of `u` for the given lambda.
fn first_zero(p: f64, lambda: f64) -> Result<f64> {
    let rhs = |y: [f64; 2]| -> [f64; 2] {
        let (u, w) = (y[0], y[1]);
        let du = if w == 0.0 {
            0.0
        } else {
            w.abs().powf(1.0 / (p - 1.0)).copysign(w)
        };
        let dw = if u == 0.0 {
            0.0
        } else {
            -lambda * u.abs().powf(p - 1.0).copysign(u)
        };
        [du, dw]
    };
    let mut t = 0.0;
    let mut y = [0.0, 1.0];
    let mut dt = 1e-6 * lambda.powf(-1.0 / p);
    let rtol = 1e-13;
    for _ in 0..2_000_000 {
        let (yn, err) = dopri_step(&rhs, y, dt);
        let scale = 1e-14 + rtol * y[0].abs().max(yn[0].abs()).max(y[1].abs()).max(yn[1].abs());
        let ratio = err / scale;
        if ratio <= 1.0 {
            if yn[0] <= 0.0 && y[1] < 0.0 {
                // crossing inside this step: bisect the step length
                let (mut a, mut b) = (0.0, dt);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    let (ym, _) = dopri_step(&rhs, y, mid);
                    if ym[0] > 0.0 {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                return Ok(t + 0.5 * (a + b));
            }
            t += dt;
            y = yn;
        }
        let factor = if ratio == 0.0 {
            4.0
        } else {
            (0.9 * ratio.powf(-0.2)).clamp(0.2, 4.0)
        };
        dt *= factor;
    }
    Err(Error::OracleFailure(
        "ODE integration did not reach the first zero".into(),
    ))
}

/// One Dormand-Prince 5(4) step; returns the 5th-order state and the
/// max-norm error estimate.
fn dopri_step(f: &impl Fn([f64; 2]) -> [f64; 2], y: [f64; 2], h: f64) -> ([f64; 2], f64) {
    let add = |y: [f64; 2], ks: &[([f64; 2], f64)]| -> [f64; 2] {
        let mut out = y;
        for (k, c) in ks {
            out[0] += h * c * k[0];
            out[1] += h * c * k[1];
        }
        out
    };
    let k1 = f(y);
    let k2 = f(add(y, &[(k1, 1.0 / 5.0)]));
    let k3 = f(add(y, &[(k1, 3.0 / 40.0), (k2, 9.0 / 40.0)]));
    let k4 = f(add(
        y,
        &[(k1, 44.0 / 45.0), (k2, -56.0 / 15.0), (k3, 32.0 / 9.0)],
    ));
    let k5 = f(add(
        y,
        &[
            (k1, 19372.0 / 6561.0),
            (k2, -25360.0 / 2187.0),
            (k3, 64448.0 / 6561.0),
            (k4, -212.0 / 729.0),
        ],
    ));
    let k6 = f(add(
        y,
        &[
            (k1, 9017.0 / 3168.0),
            (k2, -355.0 / 33.0),
            (k3, 46732.0 / 5247.0),
            (k4, 49.0 / 176.0),
            (k5, -5103.0 / 18656.0),
        ],
    ));
    let y5 = add(
        y,
        &[
            (k1, 35.0 / 384.0),
            (k3, 500.0 / 1113.0),
            (k4, 125.0 / 192.0),
            (k5, -2187.0 / 6784.0),
            (k6, 11.0 / 84.0),
        ],
    );
    let k7 = f(y5);
    let e = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let ks = [k1, k2, k3, k4, k5, k6, k7];
    let mut err = [0.0f64; 2];
    for (k, c) in ks.iter().zip(e) {
        err[0] += h * c * k[0];
        err[1] += h * c * k[1];
    }
    (y5, err[0].abs().max(err[1].abs()))
}
