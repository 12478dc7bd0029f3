//! Discrete Gagliardo energies of piecewise-linear functions.
//!
//! The truncated energy of `u` vanishing outside `(a, b)` splits into
//!
//! * the principal part over `Omega x Omega` with `|x - y| < delta`, and
//! * the interaction with the collar, `2 int_Omega |u|^p k_delta(x) dx`,
//!   where `k_delta(x) = sum over both sides of
//!   max(0, d^{-ps} - delta^{-ps}) / (ps)` and `d` is the distance to that
//!   side. The `y` integral over the collar is exact because `u` is 0 there.
//!   The remaining `x` integral uses Gauss points per element, split at the
//!   zero of `u` where it changes sign inside an element and `|u|^p` is not
//!   a polynomial.
//!
//! The principal part is a sum over ordered element pairs:
//!
//! * same element: closed form `|slope|^p 2 h^{q+1} / (q (q + 1))`, `q = p(1-s)`;
//! * adjacent elements: Duffy split at the shared vertex, which factors out
//!   the radial integral exactly and leaves a 1-D Gauss rule;
//! * separated elements: in the coordinates `t = eta - xi` and position
//!   along the diagonal, `u(x) - u(y)` is linear on each diagonal segment,
//!   so the mean of its `p`-th power is taken in closed form and only the
//!   smooth kernel direction uses Gauss points. A pair straddling the
//!   horizon keeps the half `t < 0`, which is exactly `|x - y| < delta`.
//!
//! Every contribution is a fixed function of a few nodal values with
//! coefficients set by the mesh, so gradients and the `p = 2` matrix are
//! exact derivatives of the value. `L^p` masses use the same segment mean.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::kernelmath::{scaling_factor, Horizon, KernelParams};
use crate::mesh::{DiscreteFunction, Mesh};
use crate::quadrature::{GaussRule, NeumaierSum};

/// Gauss order on each half of the diagonal coordinate of separated pairs.
pub const PAIR_ORDER: usize = 8;
/// Gauss order along the Duffy coordinate of adjacent element pairs.
pub const ADJACENT_ORDER: usize = 16;
/// Gauss order per element for collar tails.
pub const ELEMENT_ORDER: usize = 16;

const NP: usize = PAIR_ORDER;
const NE: usize = ELEMENT_ORDER;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub principal: f64,
    pub interaction: f64,
    pub total: f64,
    pub quadrature_order: usize,
    pub delta_effective: Horizon,
}

/// `|x|^p` and `|x|^{p-2} x` with fast paths for small integer `p`.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Power {
    Two,
    Three,
    Four,
    General(f64),
}

impl Power {
    pub(crate) fn new(p: f64) -> Self {
        if p == 2.0 {
            Power::Two
        } else if p == 3.0 {
            Power::Three
        } else if p == 4.0 {
            Power::Four
        } else {
            Power::General(p)
        }
    }

    #[inline]
    pub(crate) fn pow(self, x: f64) -> f64 {
        match self {
            Power::Two => x * x,
            Power::Three => x.abs() * x * x,
            Power::Four => {
                let y = x * x;
                y * y
            }
            Power::General(p) => x.abs().powf(p),
        }
    }

    /// `|x|^{p-2} x`, taken as 0 at `x = 0`.
    #[inline]
    pub(crate) fn dual(self, x: f64) -> f64 {
        match self {
            Power::Two => x,
            Power::Three => x.abs() * x,
            Power::Four => x * x * x,
            Power::General(p) => {
                if x == 0.0 {
                    0.0
                } else {
                    x.abs().powf(p - 1.0).copysign(x)
                }
            }
        }
    }
}

/// Terms of the near-flat expansion in [`SegmentMean`].
const SERIES: usize = 10;

/// Mean of `|w|^p` over a segment on which `w` runs linearly from `a` to `b`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SegmentMean {
    pw: Power,
    p: f64,
    /// `binom(p, 2k) / (2k + 1)`
    series: [f64; SERIES],
}

impl SegmentMean {
    pub(crate) fn new(p: f64) -> Self {
        let mut series = [0.0; SERIES];
        let mut binom = 1.0;
        for (k, c) in series.iter_mut().enumerate() {
            if k > 0 {
                let j = 2.0 * k as f64;
                binom *= (p - j + 2.0) * (p - j + 1.0) / ((j - 1.0) * j);
            }
            *c = binom / (2 * k + 1) as f64;
        }
        SegmentMean {
            pw: Power::new(p),
            p,
            series,
        }
    }

    #[inline]
    pub(crate) fn value(&self, a: f64, b: f64) -> f64 {
        match self.pw {
            Power::Two => (a * a + a * b + b * b) / 3.0,
            _ => self.eval(a, b, false).0,
        }
    }

    /// Value and partial derivatives in `a` and `b`.
    #[inline]
    pub(crate) fn with_grad(&self, a: f64, b: f64) -> (f64, f64, f64) {
        match self.pw {
            Power::Two => (
                (a * a + a * b + b * b) / 3.0,
                (2.0 * a + b) / 3.0,
                (a + 2.0 * b) / 3.0,
            ),
            _ => self.eval(a, b, true),
        }
    }

    fn eval(&self, a: f64, b: f64, grad: bool) -> (f64, f64, f64) {
        let m = a.abs().max(b.abs());
        if m == 0.0 {
            return (0.0, 0.0, 0.0);
        }
        let diff = b - a;
        if diff.abs() > 0.25 * m {
            // (F(b) - F(a)) / (b - a) with F(w) = w |w|^p / (p + 1)
            let (pa, pb) = (self.pw.pow(a), self.pw.pow(b));
            let val = (b * pb - a * pa) / ((self.p + 1.0) * diff);
            return (val, (val - pa) / diff, (pb - val) / diff);
        }
        // no sign change: |c|^p S(r) about the midpoint c with r = (b - a) / (2c)
        let c = 0.5 * (a + b);
        let r = 0.5 * diff / c;
        let r2 = r * r;
        let mut series = 0.0;
        for k in (0..SERIES).rev() {
            series = series * r2 + self.series[k];
        }
        let cp = self.pw.pow(c);
        let val = cp * series;
        if !grad {
            return (val, 0.0, 0.0);
        }
        let mut slope = 0.0;
        for k in (1..SERIES).rev() {
            slope = slope * r2 + 2.0 * k as f64 * self.series[k];
        }
        slope *= r;
        let dc = self.pw.dual(c) * (self.p * series - r * slope);
        let de = cp * slope / c;
        (val, 0.5 * (dc - de), 0.5 * (dc + de))
    }
}

/// One Gauss point of the diagonal coordinate of a separated pair. `ca` and
/// `cb` give `u(x) - u(y)` at the two segment ends in terms of the values
/// `[lower left, lower right, upper left, upper right]`.
#[derive(Debug, Clone, Copy)]
struct SegmentNode {
    weight: f64,
    ca: [f64; 4],
    cb: [f64; 4],
}

impl SegmentNode {
    fn new(t: f64, weight: f64) -> Self {
        let (ca, cb) = if t >= 0.0 {
            ([1.0, 0.0, -(1.0 - t), -t], [t, 1.0 - t, 0.0, -1.0])
        } else {
            let s = -t;
            ([1.0 - s, s, -1.0, 0.0], [0.0, 1.0, -s, -(1.0 - s)])
        };
        SegmentNode { weight, ca, cb }
    }
}

#[inline]
fn dot4(c: &[f64; 4], x: &[f64; 4]) -> f64 {
    c[0] * x[0] + c[1] * x[1] + c[2] * x[2] + c[3] * x[3]
}

/// Collar kernel `2 h k_delta` on element `e` at local coordinate `sigma`,
/// without the singular part on the elements touching `a` and `b`.
#[derive(Debug, Clone, Copy)]
struct TailKernel {
    n: usize,
    h: f64,
    ps: f64,
    /// `delta^{-ps}`, 0 for an infinite horizon.
    cut: f64,
    cells: Option<usize>,
}

impl TailKernel {
    /// Value and derivative in `sigma`.
    fn at(&self, e: usize, sigma: f64) -> (f64, f64) {
        let (h, ps) = (self.h, self.ps);
        let (mut k, mut dk) = (0.0, 0.0);
        let sides = [
            (e, e as f64 + sigma, 1.0),
            (self.n - 1 - e, (self.n - e) as f64 - sigma, -1.0),
        ];
        for (lo, dist, dir) in sides {
            if self.cells.is_some_and(|m| lo >= m) {
                continue;
            }
            k -= self.cut / ps;
            if lo > 0 {
                let r = dist * h;
                let rp = r.powf(-ps);
                k += rp / ps;
                dk -= dir * h * rp / r;
            }
        }
        (2.0 * h * k, 2.0 * h * dk)
    }
}

/// `weight * |sum_k coef[k] v[idx[k]]|^p`
#[derive(Debug, Clone, Copy)]
struct Term {
    idx: [usize; 4],
    coef: [f64; 4],
    len: usize,
    weight: f64,
}

impl Term {
    #[inline]
    fn diff(&self, v: &[f64]) -> f64 {
        let mut d = 0.0;
        for k in 0..self.len {
            d += self.coef[k] * v[self.idx[k]];
        }
        d
    }
}

/// Precomputed quadrature of the truncated (or full) energy for one mesh
/// and kernel. Vectors passed to it hold the `n_cells + 1` nodal values on
/// `[a, b]`, endpoints included (they must be 0).
#[derive(Debug, Clone)]
pub struct NonlocalForm {
    params: KernelParams,
    power: Power,
    n: usize,
    h: f64,
    horizon_cells: Option<usize>,
    exec: Execution,
    seg: SegmentMean,
    elem_nodes: [f64; NE],
    /// Separated-pair rules, indexed by element offset `d >= 2`.
    sep: Vec<Vec<SegmentNode>>,
    /// Largest element offset with separated-pair contributions.
    reach: usize,
    principal_terms: Vec<Term>,
    tail_terms: Vec<Term>,
    /// Per element, tail weights at the element Gauss points.
    tail_w: Vec<[f64; NE]>,
    tail: TailKernel,
    elem_weights: [f64; NE],
    /// Split elements where `u` changes sign at the root (`p` not 2 or 4).
    split: bool,
    /// `(1 - xi)^p` and `xi^p` at the element Gauss points.
    left_pow: [f64; NE],
    right_pow: [f64; NE],
}

impl NonlocalForm {
    /// Form for `n_cells` cells of width `h`. A finite horizon must be a
    /// whole number of cells.
    pub fn new(n_cells: usize, h: f64, params: KernelParams) -> Result<Self> {
        params.validate()?;
        if n_cells < 2 || !(h > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bad mesh: n = {n_cells}, h = {h}"
            )));
        }
        let horizon_cells = match params.delta {
            Horizon::Finite(d) => {
                let r = d / h;
                let m = r.round();
                if m < 1.0 {
                    return Err(Error::HorizonUnderresolved { delta: d, h });
                }
                if (r - m).abs() > 1e-9 * r.max(1.0) {
                    return Err(Error::InconsistentHorizon {
                        mesh: format!("multiple of h = {h}"),
                        params: format!("{d}"),
                    });
                }
                Some(m as usize)
            }
            Horizon::Infinite => None,
        };
        let gp = GaussRule::new(NP);
        let ge = GaussRule::new(NE);
        let ga = GaussRule::new(ADJACENT_ORDER);
        let mut elem_nodes = [0.0; NE];
        elem_nodes.copy_from_slice(&ge.nodes);

        let ps = params.ps();
        let q = params.p1s();
        let expo = 1.0 + ps;
        let n = n_cells;

        // a pair at offset `partial` straddles the horizon
        let (reach, partial) = match horizon_cells {
            Some(m) if m < n => (if m >= 2 { m } else { 0 }, Some(m)),
            _ => (n - 1, None),
        };

        let mut sep = vec![Vec::new(); reach.max(1) + 1];
        for (d, table) in sep.iter_mut().enumerate().skip(2) {
            let sides: &[f64] = if partial == Some(d) {
                &[-1.0]
            } else {
                &[-1.0, 1.0]
            };
            for (tau, w) in gp.iter() {
                for &side in sides {
                    let r = h * (d as f64 + side * tau);
                    table.push(SegmentNode::new(
                        side * tau,
                        h * h * w * (1.0 - tau) / r.powf(expo),
                    ));
                }
            }
        }

        let mut principal_terms = Vec::new();
        // same element
        let w_same = 2.0 * h.powf(q + 1.0) / (q * (q + 1.0)) / h.powf(params.p);
        for e in 0..n {
            principal_terms.push(Term {
                idx: [e, e + 1, 0, 0],
                coef: [-1.0, 1.0, 0.0, 0.0],
                len: 2,
                weight: w_same,
            });
        }
        // adjacent elements (e, e+1), both orders
        let cut = horizon_cells == Some(1);
        for e in 0..n - 1 {
            for (eta, w) in ga.iter() {
                let reach = if cut { h / (1.0 + eta) } else { h };
                let weight = 2.0 * w * reach.powf(q + 1.0) / ((q + 1.0) * (1.0 + eta).powf(expo));
                principal_terms.push(Term {
                    idx: [e, e + 1, e + 2, 0],
                    coef: [-1.0 / h, (1.0 - eta) / h, eta / h, 0.0],
                    len: 3,
                    weight,
                });
                principal_terms.push(Term {
                    idx: [e, e + 1, e + 2, 0],
                    coef: [-eta / h, (eta - 1.0) / h, 1.0 / h, 0.0],
                    len: 3,
                    weight,
                });
            }
        }

        // collar interaction
        let tail = TailKernel {
            n,
            h,
            ps,
            cut: params.delta.finite().map_or(0.0, |d| d.powf(-ps)),
            cells: horizon_cells,
        };
        let mut tail_w = vec![[0.0; NE]; n];
        for (e, row) in tail_w.iter_mut().enumerate() {
            for (k, (xi, w)) in ge.iter().enumerate() {
                row[k] = w * tail.at(e, xi).0;
            }
        }
        let mut elem_weights = [0.0; NE];
        elem_weights.copy_from_slice(&ge.weights);
        let (mut left_pow, mut right_pow) = ([0.0; NE], [0.0; NE]);
        for (k, &xi) in ge.nodes.iter().enumerate() {
            left_pow[k] = (1.0 - xi).powf(params.p);
            right_pow[k] = xi.powf(params.p);
        }
        let power = Power::new(params.p);
        // singular part on the two boundary elements, in closed form
        let w_edge = 2.0 * h.powf(q + 1.0) / ((q + 1.0) * ps) / h.powf(params.p);
        let tail_terms = vec![
            Term {
                idx: [1, 0, 0, 0],
                coef: [1.0, 0.0, 0.0, 0.0],
                len: 1,
                weight: w_edge,
            },
            Term {
                idx: [n - 1, 0, 0, 0],
                coef: [1.0, 0.0, 0.0, 0.0],
                len: 1,
                weight: w_edge,
            },
        ];

        Ok(NonlocalForm {
            params,
            power,
            n,
            h,
            horizon_cells,
            exec: Execution::default(),
            seg: SegmentMean::new(params.p),
            elem_nodes,
            sep,
            reach,
            principal_terms,
            tail_terms,
            tail_w,
            tail,
            elem_weights,
            split: !matches!(power, Power::Two | Power::Four),
            left_pow,
            right_pow,
        })
    }

    /// Form for a mesh; `params.delta` must equal the mesh's effective
    /// horizon.
    pub fn for_mesh(mesh: &Mesh, params: KernelParams) -> Result<Self> {
        check_horizon(mesh, &params)?;
        NonlocalForm::new(mesh.n_cells, mesh.h, params)
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn n_cells(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn horizon_cells(&self) -> Option<usize> {
        self.horizon_cells
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n + 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values on [a, b], got {}",
                self.n + 1,
                v.len()
            )));
        }
        if v[0] != 0.0 || v[self.n] != 0.0 {
            return Err(Error::ConstraintViolation(format!(
                "function must vanish at both endpoints, got {} and {}",
                v[0], v[self.n]
            )));
        }
        Ok(())
    }

    fn partners(&self, e: usize) -> impl Iterator<Item = usize> {
        let lo = e.saturating_sub(self.reach);
        let hi = (e + self.reach).min(self.n - 1);
        (lo..=hi).filter(move |&f| f.abs_diff(e) >= 2)
    }

    /// Row `e` of the separated-pair sum and, optionally, its gradient with
    /// respect to the two nodal values of element `e`.
    fn separated_row(&self, e: usize, v: &[f64], grad: bool) -> (f64, [f64; 2]) {
        let mut acc = NeumaierSum::default();
        let mut g = [0.0; 2];
        for f in self.partners(e) {
            let (lo, hi, own) = if f > e { (e, f, 0) } else { (f, e, 2) };
            let x = [v[lo], v[lo + 1], v[hi], v[hi + 1]];
            let mut s = 0.0;
            for node in &self.sep[hi - lo] {
                let (a, b) = (dot4(&node.ca, &x), dot4(&node.cb, &x));
                if grad {
                    let (val, da, db) = self.seg.with_grad(a, b);
                    s += node.weight * val;
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk += node.weight * (da * node.ca[own + k] + db * node.cb[own + k]);
                    }
                } else {
                    s += node.weight * self.seg.value(a, b);
                }
            }
            acc.add(s);
        }
        // each unordered pair appears in two rows
        (acc.value(), [2.0 * g[0], 2.0 * g[1]])
    }

    fn principal_impl(&self, v: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let pw = self.power;
        let want = grad.is_some();
        let rows = self
            .exec
            .map_rows(self.n, |e| self.separated_row(e, v, want));
        let mut acc = NeumaierSum::default();
        for (s, _) in &rows {
            acc.add(*s);
        }
        for t in &self.principal_terms {
            acc.add(t.weight * pw.pow(t.diff(v)));
        }
        if let Some(g) = grad {
            for (e, (_, gr)) in rows.iter().enumerate() {
                g[e] += gr[0];
                g[e + 1] += gr[1];
            }
            scatter_terms(&self.principal_terms, v, pw, self.params.p, g);
        }
        acc.value()
    }

    fn interaction_impl(&self, v: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let pw = self.power;
        let p = self.params.p;
        let mut acc = NeumaierSum::default();
        for e in 0..self.n {
            let (a, b) = (v[e], v[e + 1]);
            if self.split && a * b < 0.0 {
                let (val, da, db) = self.split_tail(e, a, b);
                acc.add(val);
                if let Some(g) = grad.as_deref_mut() {
                    g[e] += da;
                    g[e + 1] += db;
                }
                continue;
            }
            let w = &self.tail_w[e];
            for (k, &xi) in self.elem_nodes.iter().enumerate() {
                let u = a * (1.0 - xi) + b * xi;
                acc.add(w[k] * pw.pow(u));
                if let Some(g) = grad.as_deref_mut() {
                    let d = p * w[k] * pw.dual(u);
                    g[e] += d * (1.0 - xi);
                    g[e + 1] += d * xi;
                }
            }
        }
        for t in &self.tail_terms {
            acc.add(t.weight * pw.pow(t.diff(v)));
        }
        if let Some(g) = grad {
            scatter_terms(&self.tail_terms, v, pw, p, g);
        }
        acc.value()
    }

    /// Tail integral over an element where `u` runs from `a` to `b` through
    /// zero at `s = a / (a - b)`. On `[0, s]` the integrand is
    /// `|a|^p (1 - xi)^p k(s xi)`, on `[s, 1]` it is
    /// `|b|^p xi^p k(s + (1 - s) xi)`. Derivatives include the motion of `s`.
    fn split_tail(&self, e: usize, a: f64, b: f64) -> (f64, f64, f64) {
        let pw = self.power;
        let s = a / (a - b);
        let (mut qa, mut dqa, mut qb, mut dqb) = (0.0, 0.0, 0.0, 0.0);
        for (k, &xi) in self.elem_nodes.iter().enumerate() {
            let w = self.elem_weights[k];
            let (kl, dkl) = self.tail.at(e, s * xi);
            qa += w * self.left_pow[k] * kl;
            dqa += w * self.left_pow[k] * xi * dkl;
            let (kr, dkr) = self.tail.at(e, s + (1.0 - s) * xi);
            qb += w * self.right_pow[k] * kr;
            dqb += w * self.right_pow[k] * (1.0 - xi) * dkr;
        }
        let (pa, pb) = (pw.pow(a), pw.pow(b));
        let val = pa * s * qa + pb * (1.0 - s) * qb;
        // d val / d s, then s_a = -b / (a - b)^2 and s_b = a / (a - b)^2
        let ds = pa * (qa + s * dqa) + pb * ((1.0 - s) * dqb - qb);
        let den = (a - b) * (a - b);
        let p = self.params.p;
        let da = p * pw.dual(a) * s * qa - ds * b / den;
        let db = p * pw.dual(b) * (1.0 - s) * qb + ds * a / den;
        (val, da, db)
    }

    pub fn breakdown(&self, v: &[f64]) -> Result<EnergyBreakdown> {
        self.check(v)?;
        let principal = self.principal_impl(v, None);
        let interaction = self.interaction_impl(v, None);
        Ok(EnergyBreakdown {
            principal,
            interaction,
            total: principal + interaction,
            quadrature_order: NP,
            delta_effective: self.params.delta,
        })
    }

    pub fn energy(&self, v: &[f64]) -> Result<f64> {
        Ok(self.breakdown(v)?.total)
    }

    /// Energy and its gradient with respect to the nodal values on `[a, b]`.
    pub fn energy_gradient(&self, v: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(v)?;
        let mut g = vec![0.0; self.n + 1];
        let e = self.principal_impl(v, Some(&mut g)) + self.interaction_impl(v, Some(&mut g));
        Ok((e, g))
    }

    /// `int_Omega |u|^p`.
    pub fn mass(&self, v: &[f64]) -> f64 {
        lp_mass_values(v, self.h, self.params.p)
    }

    pub fn mass_gradient(&self, v: &[f64]) -> (f64, Vec<f64>) {
        let h = self.h;
        let mut acc = NeumaierSum::default();
        let mut g = vec![0.0; self.n + 1];
        for e in 0..self.n {
            let (val, da, db) = self.seg.with_grad(v[e], v[e + 1]);
            acc.add(h * val);
            g[e] += h * da;
            g[e + 1] += h * db;
        }
        (acc.value(), g)
    }

    /// For `p = 2`: the symmetric matrix `A` over interior nodes with
    /// `x^T A x` equal to the energy of the embedded vector.
    pub fn quadratic_matrix(&self) -> Result<DMatrix<f64>> {
        if self.params.p != 2.0 {
            return Err(Error::WrongExponent(self.params.p));
        }
        let n = self.n;
        let dim = n - 1;
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        let mut add = |i: usize, j: usize, val: f64| {
            if i >= 1 && i < n && j >= 1 && j < n {
                a[(i - 1, j - 1)] += val;
            }
        };
        let mut add_term = |idx: &[usize], coef: &[f64], w: f64| {
            for (&i, &ci) in idx.iter().zip(coef) {
                for (&j, &cj) in idx.iter().zip(coef) {
                    add(i, j, w * ci * cj);
                }
            }
        };
        for t in self.principal_terms.iter().chain(&self.tail_terms) {
            add_term(&t.idx[..t.len], &t.coef[..t.len], t.weight);
        }
        // separated pairs: one 4x4 block per offset, doubled for both orders;
        // the segment mean of w^2 is (a^2 + a b + b^2) / 3
        let mut blocks = vec![[[0.0; 4]; 4]; self.sep.len()];
        for (d, block) in blocks.iter_mut().enumerate().skip(2) {
            for node in &self.sep[d] {
                let w = 2.0 * node.weight;
                let (ca, cb) = (&node.ca, &node.cb);
                for r in 0..4 {
                    for s in 0..4 {
                        block[r][s] += w
                            * ((ca[r] * ca[s] + cb[r] * cb[s]) / 3.0
                                + (ca[r] * cb[s] + cb[r] * ca[s]) / 6.0);
                    }
                }
            }
        }
        for e in 0..n {
            for f in e + 2..=(e + self.reach).min(n - 1) {
                let idx = [e, e + 1, f, f + 1];
                let block = &blocks[f - e];
                for r in 0..4 {
                    for s in 0..4 {
                        add_term_entry(&mut a, n, idx[r], idx[s], block[r][s]);
                    }
                }
            }
        }
        // collar tail
        for (e, w) in self.tail_w.iter().enumerate() {
            for (k, &xi) in self.elem_nodes.iter().enumerate() {
                let c = [1.0 - xi, xi];
                let idx = [e, e + 1];
                for r in 0..2 {
                    for s in 0..2 {
                        add_term_entry(&mut a, n, idx[r], idx[s], w[k] * c[r] * c[s]);
                    }
                }
            }
        }
        // summation order differs across the diagonal by rounding only
        let sym = (&a + a.transpose()) * 0.5;
        Ok(sym)
    }
}

fn add_term_entry(a: &mut DMatrix<f64>, n: usize, i: usize, j: usize, val: f64) {
    if i >= 1 && i < n && j >= 1 && j < n {
        a[(i - 1, j - 1)] += val;
    }
}

fn scatter_terms(terms: &[Term], v: &[f64], pw: Power, p: f64, g: &mut [f64]) {
    for t in terms {
        let d = p * t.weight * pw.dual(t.diff(v));
        for k in 0..t.len {
            g[t.idx[k]] += d * t.coef[k];
        }
    }
}

fn check_horizon(mesh: &Mesh, params: &KernelParams) -> Result<()> {
    let ok = match (mesh.delta_effective, params.delta) {
        (Horizon::Finite(m), Horizon::Finite(k)) => (m - k).abs() <= 1e-9 * m,
        (Horizon::Infinite, Horizon::Infinite) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::InconsistentHorizon {
            mesh: mesh.delta_effective.to_string(),
            params: params.delta.to_string(),
        })
    }
}

/// `int_Omega |u|^p` for nodal values on `[a, b]`, exact per element.
pub(crate) fn lp_mass_values(v: &[f64], h: f64, p: f64) -> f64 {
    let seg = SegmentMean::new(p);
    v.windows(2)
        .map(|w| h * seg.value(w[0], w[1]))
        .collect::<NeumaierSum>()
        .value()
}

fn finite_form(u: &DiscreteFunction, params: &KernelParams) -> Result<NonlocalForm> {
    if params.delta.is_infinite() {
        return Err(Error::InfiniteHorizon("the truncated energy"));
    }
    NonlocalForm::for_mesh(u.mesh(), *params)
}

/// Truncated energy `[u]^p` over the completed domain, split into the
/// `Omega x Omega` part and the collar interaction.
pub fn nonlocal_energy(u: &DiscreteFunction, params: &KernelParams) -> Result<EnergyBreakdown> {
    finite_form(u, params)?.breakdown(u.omega_values())
}

/// Gradient of [`nonlocal_energy`] per mesh node. Collar entries are 0: the
/// collar is integrated analytically and carries no unknowns.
pub fn nonlocal_energy_gradient(u: &DiscreteFunction, params: &KernelParams) -> Result<Vec<f64>> {
    let form = finite_form(u, params)?;
    let (_, g) = form.energy_gradient(u.omega_values())?;
    Ok(embed_omega(u.mesh(), &g))
}

pub(crate) fn embed_omega(mesh: &Arc<Mesh>, omega: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; mesh.node_count()];
    let off = mesh.omega_offset();
    full[off..off + omega.len()].copy_from_slice(omega);
    full
}

/// Full fractional energy over `R x R` minus `(Omega^c)^2`, with the
/// complement tail `2 int_Omega |u|^p ((x-a)^{-ps} + (b-x)^{-ps}) / (ps)`.
/// Any mesh may be used; only the values on `[a, b]` enter.
pub fn fractional_energy(u: &DiscreteFunction, params: &KernelParams) -> Result<f64> {
    Ok(fractional_breakdown(u, params)?.total)
}

pub fn fractional_breakdown(
    u: &DiscreteFunction,
    params: &KernelParams,
) -> Result<EnergyBreakdown> {
    if !params.delta.is_infinite() {
        return Err(Error::InvalidArgument(
            "fractional_energy needs an infinite horizon".into(),
        ));
    }
    let mesh = u.mesh();
    NonlocalForm::new(mesh.n_cells, mesh.h, *params)?.breakdown(u.omega_values())
}

/// `p (1 - s) / delta^{p (1 - s)} [u]^p`.
pub fn scaled_energy(u: &DiscreteFunction, params: &KernelParams) -> Result<f64> {
    let factor = scaling_factor(params)?;
    Ok(factor * nonlocal_energy(u, params)?.total)
}

/// `int_Omega |u'|^p`, exact for piecewise-linear `u`.
pub fn local_gradient_energy(u: &DiscreteFunction, p: f64) -> f64 {
    let h = u.mesh().h;
    let pw = Power::new(p);
    u.omega_values()
        .windows(2)
        .map(|w| h * pw.pow((w[1] - w[0]) / h))
        .collect::<NeumaierSum>()
        .value()
}

/// `int_Omega |u|^p`, exact for piecewise-linear `u`.
pub fn lp_mass(u: &DiscreteFunction, p: f64) -> f64 {
    lp_mass_values(u.omega_values(), u.mesh().h, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, interpolate, DomainSpec};
    use std::f64::consts::PI;

    fn mesh(d: Horizon, n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(&DomainSpec::new(0.0, 1.0, d).unwrap(), n).unwrap())
    }

    fn kp(s: f64, p: f64, d: Horizon) -> KernelParams {
        KernelParams::new(s, p, d).unwrap()
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let m = mesh(Horizon::Finite(0.25), 8);
        let k = kp(0.5, 2.0, m.delta_effective);
        let z = DiscreteFunction::zeros(m.clone());
        assert_eq!(nonlocal_energy(&z, &k).unwrap().total, 0.0);
        assert_eq!(scaled_energy(&z, &k).unwrap(), 0.0);
        assert_eq!(local_gradient_energy(&z, 2.0), 0.0);
        assert_eq!(lp_mass(&z, 3.0), 0.0);
        let g = nonlocal_energy_gradient(&z, &kp(0.5, 3.0, m.delta_effective)).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
        let inf = kp(0.5, 2.0, Horizon::Infinite);
        assert_eq!(fractional_energy(&z, &inf).unwrap(), 0.0);
    }

    #[test]
    fn horizon_mismatch_and_endpoint_errors() {
        let m = mesh(Horizon::Finite(0.25), 8);
        let z = DiscreteFunction::zeros(m);
        assert!(matches!(
            nonlocal_energy(&z, &kp(0.5, 2.0, Horizon::Finite(0.5))),
            Err(Error::InconsistentHorizon { .. })
        ));
        assert!(matches!(
            nonlocal_energy(&z, &kp(0.5, 2.0, Horizon::Infinite)),
            Err(Error::InfiniteHorizon(_))
        ));
        let form = NonlocalForm::new(4, 0.25, kp(0.5, 2.0, Horizon::Finite(0.25))).unwrap();
        assert!(matches!(
            form.energy(&[0.1, 0.0, 0.0, 0.0, 0.0]),
            Err(Error::ConstraintViolation(_))
        ));
        assert!(matches!(
            NonlocalForm::new(4, 0.25, kp(0.5, 2.0, Horizon::Finite(0.3))),
            Err(Error::InconsistentHorizon { .. })
        ));
    }

    #[test]
    fn hat_function_local_energy_and_mass() {
        let m = mesh(Horizon::Finite(0.5), 2);
        let hat = DiscreteFunction::from_interior(m, &[1.0]).unwrap();
        assert!((local_gradient_energy(&hat, 2.0) - 4.0).abs() < 1e-14);
        assert!((lp_mass(&hat, 2.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sine_masses_converge() {
        let m = mesh(Horizon::Finite(1.0 / 64.0), 256);
        let u = interpolate(|x| (PI * x).sin(), m).unwrap();
        assert!((local_gradient_energy(&u, 2.0) - PI * PI / 2.0).abs() < 1e-3);
        assert!((lp_mass(&u, 3.0) - 4.0 / (3.0 * PI)).abs() < 1e-4);
    }

    #[test]
    fn unit_horizon_scaling_is_identity() {
        let m = mesh(Horizon::Finite(1.0), 8);
        let k = kp(0.5, 2.0, m.delta_effective);
        let u = interpolate(|x| x * (1.0 - x), m).unwrap();
        assert_eq!(
            scaled_energy(&u, &k).unwrap(),
            nonlocal_energy(&u, &k).unwrap().total
        );
    }

    #[test]
    fn same_element_closed_form_matches_direct_integral() {
        // Single linear piece: int_0^h int_0^h |x-y|^{p-1-ps}
        let (p, s, h): (f64, f64, f64) = (2.5, 0.3, 0.2);
        let q: f64 = p * (1.0 - s);
        let closed = 2.0 * h.powf(q + 1.0) / (q * (q + 1.0));
        let g = GaussRule::new(20);
        // int over x of [x^{q}/q + (h-x)^{q}/q], graded toward both ends
        let inner = |x: f64| (x.powf(q) + (h - x).powf(q)) / q;
        let mut direct = 0.0;
        let mut hi = 0.5 * h;
        for _ in 0..60 {
            let lo = 0.5 * hi;
            direct += g.integrate(lo, hi, inner) + g.integrate(h - hi, h - lo, inner);
            hi = lo;
        }
        assert!(
            (closed - direct).abs() < 1e-12 * closed,
            "{closed} vs {direct}"
        );
    }

    #[test]
    fn segment_mean_matches_quadrature() {
        let g = GaussRule::new(40);
        for p in [1.5, 2.0, 2.7, 3.0, 4.0] {
            let seg = SegmentMean::new(p);
            for (a, b) in [
                (0.3, 0.31),
                (1.0, 0.8),
                (-0.4, 0.9),
                (0.0, 1.0),
                (-2.0, -1.9),
                (0.5, -0.2),
            ] {
                // split at the zero crossing and grade geometrically towards it
                let f = |t: f64| (a + (b - a) * t).abs().powf(p);
                let graded = |from: f64, root: f64| -> f64 {
                    let mut acc = 0.0;
                    let (mut x, mut len) = (from, root - from);
                    for _ in 0..60 {
                        len *= 0.5;
                        acc += g.integrate(x.min(x + len), x.max(x + len), f);
                        x += len;
                    }
                    acc
                };
                let reference = if a * b <= 0.0 {
                    let root = a / (a - b);
                    (if root > 0.0 { graded(0.0, root) } else { 0.0 })
                        + (if root < 1.0 { graded(1.0, root) } else { 0.0 })
                } else {
                    g.integrate(0.0, 1.0, f)
                };
                let (val, da, db) = seg.with_grad(a, b);
                assert!(
                    (val - reference).abs() < 1e-13 * reference.max(1e-3),
                    "p={p} ({a},{b}) {val} vs {reference}"
                );
                assert_eq!(val, seg.value(a, b));
                let e = 1e-6;
                let fda = (seg.value(a + e, b) - seg.value(a - e, b)) / (2.0 * e);
                let fdb = (seg.value(a, b + e) - seg.value(a, b - e)) / (2.0 * e);
                assert!(
                    (da - fda).abs() < 1e-7 && (db - fdb).abs() < 1e-7,
                    "p={p} ({a},{b})"
                );
            }
        }
    }

    #[test]
    fn p2_matrix_matches_energy() {
        for d in [
            Horizon::Finite(0.125),
            Horizon::Finite(0.375),
            Horizon::Infinite,
        ] {
            let form = NonlocalForm::new(8, 0.125, kp(0.4, 2.0, d)).unwrap();
            let a = form.quadratic_matrix().unwrap();
            let x = [0.3, -1.0, 2.0, 0.5, 0.1, -0.7, 1.2];
            let mut v = vec![0.0];
            v.extend_from_slice(&x);
            v.push(0.0);
            let xa = nalgebra::DVector::from_column_slice(&x);
            let quad = (xa.transpose() * &a * &xa)[(0, 0)];
            let e = form.energy(&v).unwrap();
            assert!((quad - e).abs() < 1e-12 * e, "{d}: {quad} vs {e}");
            assert_eq!(a.clone(), a.transpose());
        }
        let form = NonlocalForm::new(8, 0.125, kp(0.4, 3.0, Horizon::Infinite)).unwrap();
        assert!(matches!(
            form.quadratic_matrix(),
            Err(Error::WrongExponent(_))
        ));
    }
}
