//! Uniform meshes of the completed domain `(a - delta, b + delta)`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernelmath::Horizon;

/// The interval `(a, b)` and the requested horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub a: f64,
    pub b: f64,
    pub delta: Horizon,
}

impl DomainSpec {
    pub fn new(a: f64, b: f64, delta: Horizon) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "need a < b, got ({a}, {b})"
            )));
        }
        if let Horizon::Finite(d) = delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "delta must be positive, got {d}"
                )));
            }
        }
        Ok(DomainSpec { a, b, delta })
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// Uniform partition of the completed domain.
///
/// Nodes `collar_cells ..= collar_cells + n_cells` cover `[a, b]`; the rest
/// form the nonlocal boundary. With an infinite horizon there is no collar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub nodes: Vec<f64>,
    pub interior_mask: Vec<bool>,
    pub delta_requested: Horizon,
    pub delta_effective: Horizon,
    /// Cells of `(a, b)`.
    pub n_cells: usize,
    /// Cells in each side collar.
    pub collar_cells: usize,
    pub element_count: usize,
}

/// Builds the mesh with `n_interior` cells over `(a, b)` and the horizon
/// snapped to a whole number of cells.
pub fn build_mesh(domain: &DomainSpec, n_interior: usize) -> Result<Mesh> {
    let domain = DomainSpec::new(domain.a, domain.b, domain.delta)?;
    if n_interior < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 cells, got {n_interior}"
        )));
    }
    let h = domain.length() / n_interior as f64;
    let (collar, delta_effective) = match domain.delta {
        Horizon::Finite(d) => {
            let ratio = d / h;
            if ratio < 1.0 - 1e-12 {
                return Err(Error::HorizonUnderresolved { delta: d, h });
            }
            let c = ratio.round() as usize;
            (c, Horizon::Finite(c as f64 * h))
        }
        Horizon::Infinite => (0, Horizon::Infinite),
    };
    let total = n_interior + 2 * collar;
    let nodes = (0..=total)
        .map(|i| {
            let k = i as f64 - collar as f64;
            if i == collar + n_interior {
                domain.b
            } else {
                domain.a + k * h
            }
        })
        .collect();
    let interior_mask = (0..=total)
        .map(|i| i > collar && i < collar + n_interior)
        .collect();
    Ok(Mesh {
        a: domain.a,
        b: domain.b,
        h,
        nodes,
        interior_mask,
        delta_requested: domain.delta,
        delta_effective,
        n_cells: n_interior,
        collar_cells: collar,
        element_count: total,
    })
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn interior_count(&self) -> usize {
        self.n_cells - 1
    }

    /// Index of the node at `a`.
    pub fn omega_offset(&self) -> usize {
        self.collar_cells
    }

    /// True when the requested finite horizon was moved onto the grid.
    pub fn snapped(&self) -> bool {
        match (self.delta_requested, self.delta_effective) {
            (Horizon::Finite(r), Horizon::Finite(e)) => (r - e).abs() > 1e-12 * r,
            _ => false,
        }
    }

    /// Horizon in whole cells, `None` for an infinite horizon.
    pub fn horizon_cells(&self) -> Option<usize> {
        match self.delta_effective {
            Horizon::Finite(_) => Some(self.collar_cells),
            Horizon::Infinite => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Nodal values of a continuous piecewise-linear function that vanishes on
/// the collar and at both endpoints of `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    truncated: bool,
}

impl DiscreteFunction {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.node_count()];
        DiscreteFunction {
            mesh,
            values,
            truncated: false,
        }
    }

    /// Wraps full nodal data; collar and endpoint values must already be 0.
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} nodal values, got {}",
                mesh.node_count(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidFunction(format!(
                "non-finite nodal value {v}"
            )));
        }
        for (i, (&v, &inside)) in values.iter().zip(&mesh.interior_mask).enumerate() {
            if !inside && v != 0.0 {
                return Err(Error::ConstraintViolation(format!(
                    "node {i} at x = {} lies outside (a, b) but carries {v}",
                    mesh.nodes[i]
                )));
            }
        }
        Ok(DiscreteFunction {
            mesh,
            values,
            truncated: false,
        })
    }

    /// Builds a function from the `n_cells - 1` interior values.
    pub fn from_interior(mesh: Arc<Mesh>, interior: &[f64]) -> Result<Self> {
        if interior.len() != mesh.interior_count() {
            return Err(Error::InvalidArgument(format!(
                "expected {} interior values, got {}",
                mesh.interior_count(),
                interior.len()
            )));
        }
        let mut values = vec![0.0; mesh.node_count()];
        let off = mesh.omega_offset() + 1;
        values[off..off + interior.len()].copy_from_slice(interior);
        DiscreteFunction::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values on the `n_cells + 1` nodes of `[a, b]`.
    pub fn omega_values(&self) -> &[f64] {
        let off = self.mesh.omega_offset();
        &self.values[off..=off + self.mesh.n_cells]
    }

    pub fn interior_values(&self) -> &[f64] {
        let off = self.mesh.omega_offset();
        &self.values[off + 1..off + self.mesh.n_cells]
    }

    /// Set when interpolation forced a nonzero sample to 0 outside `(a, b)`.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub fn scaled(&self, t: f64) -> Self {
        DiscreteFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| t * v).collect(),
            truncated: self.truncated,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `u(x) -> u(a + b - x)`; the mesh is symmetric about the midpoint.
    pub fn reflected(&self) -> Self {
        let mut values = self.values.clone();
        values.reverse();
        DiscreteFunction {
            mesh: self.mesh.clone(),
            values,
            truncated: self.truncated,
        }
    }

    /// Same `(a, b)` nodal data on another mesh with the same cells.
    pub fn transfer(&self, mesh: Arc<Mesh>) -> Result<Self> {
        if mesh.n_cells != self.mesh.n_cells || mesh.a != self.mesh.a || mesh.b != self.mesh.b {
            return Err(Error::InvalidArgument("meshes differ on (a, b)".into()));
        }
        DiscreteFunction::from_interior(mesh, self.interior_values())
    }

    /// Evaluates the piecewise-linear interpolant at `x` (0 outside the mesh).
    pub fn eval(&self, x: f64) -> f64 {
        let first = self.mesh.nodes[0];
        let h = self.mesh.h;
        let t = (x - first) / h;
        if t <= 0.0 || t >= self.mesh.element_count as f64 {
            return 0.0;
        }
        let e = (t.floor() as usize).min(self.mesh.element_count - 1);
        let xi = t - e as f64;
        self.values[e] * (1.0 - xi) + self.values[e + 1] * xi
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&FunctionJson {
            mesh: (*self.mesh).clone(),
            values: self.values.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: FunctionJson = serde_json::from_str(text)?;
        let rebuilt = build_mesh(
            &DomainSpec::new(raw.mesh.a, raw.mesh.b, raw.mesh.delta_requested)?,
            raw.mesh.n_cells,
        )?;
        if rebuilt != raw.mesh {
            return Err(Error::InvalidArgument(
                "mesh record is inconsistent with its parameters".into(),
            ));
        }
        DiscreteFunction::new(Arc::new(rebuilt), raw.values)
    }
}

#[derive(Serialize, Deserialize)]
struct FunctionJson {
    mesh: Mesh,
    values: Vec<f64>,
}

/// Samples `f` at the nodes, pinning every node outside `(a, b)` to 0.
pub fn interpolate(f: impl Fn(f64) -> f64, mesh: Arc<Mesh>) -> Result<DiscreteFunction> {
    let mut truncated = false;
    let mut values = Vec::with_capacity(mesh.node_count());
    for (&x, &inside) in mesh.nodes.iter().zip(&mesh.interior_mask) {
        let v = f(x);
        if !v.is_finite() {
            return Err(Error::InvalidFunction(format!("f({x}) = {v}")));
        }
        if inside {
            values.push(v);
        } else {
            if v.abs() > 1e-12 {
                truncated = true;
            }
            values.push(0.0);
        }
    }
    let mut u = DiscreteFunction::new(mesh, values)?;
    u.truncated = truncated;
    Ok(u)
}
