//! Kernel parameters and closed-form constants.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Interaction radius. `Infinite` selects the untruncated fractional kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

impl Horizon {
    pub fn finite(self) -> Option<f64> {
        match self {
            Horizon::Finite(d) => Some(d),
            Horizon::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Horizon::Infinite)
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(d) => write!(f, "{d}"),
            Horizon::Infinite => write!(f, "inf"),
        }
    }
}

impl std::str::FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "infinite" => Ok(Horizon::Infinite),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad horizon `{s}`")))
                .and_then(|d| {
                    if d.is_infinite() && d > 0.0 {
                        Ok(Horizon::Infinite)
                    } else if d > 0.0 && d.is_finite() {
                        Ok(Horizon::Finite(d))
                    } else {
                        Err(Error::InvalidArgument(format!(
                            "horizon must be positive, got {d}"
                        )))
                    }
                }),
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(d) => ser.serialize_f64(*d),
            Horizon::Infinite => ser.serialize_str("INF"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tok(String),
        }
        let parsed = match Raw::deserialize(de)? {
            Raw::Num(d) => format!("{d}").parse::<Horizon>(),
            Raw::Tok(s) => s.parse::<Horizon>(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// The triple `(s, p, delta)` defining the kernel `|x - y|^{-(1 + p s)}`
/// restricted to `|x - y| < delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub s: f64,
    pub p: f64,
    pub delta: Horizon,
}

impl KernelParams {
    pub fn new(s: f64, p: f64, delta: Horizon) -> Result<Self> {
        let k = KernelParams { s, p, delta };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "s must lie in (0,1), got {}",
                self.s
            )));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "p must lie in (1,inf), got {}",
                self.p
            )));
        }
        if let Horizon::Finite(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "delta must be positive, got {d}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_delta(self, delta: Horizon) -> Self {
        KernelParams { delta, ..self }
    }

    /// `p s`, the exponent of the complement tail.
    pub fn ps(&self) -> f64 {
        self.p * self.s
    }

    /// `p (1 - s)`, the homogeneity of the energy under dilation.
    pub fn p1s(&self) -> f64 {
        self.p * (1.0 - self.s)
    }

    /// Kernel exponent `N + p s` in one dimension.
    pub fn kernel_exponent(&self) -> f64 {
        1.0 + self.ps()
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        Err(Error::DimensionUnsupported(dim))
    }
}

/// Surface measure of the unit sphere in `R^dim`; `sigma_0 = 2` counts the
/// two points of `S^0`.
pub fn sphere_surface(dim: usize) -> Result<f64> {
    check_dim(dim)?;
    Ok(match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 4.0 * PI,
    })
}

/// `gamma(N, p) = int_{S^{N-1}} |e . z|^p dsigma(z)`, in closed form.
pub fn gamma_constant(dim: usize, p: f64) -> Result<f64> {
    check_dim(dim)?;
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in (1,inf), got {p}"
        )));
    }
    let n = dim as f64;
    let log_ratio = ln_gamma((p + 1.0) / 2.0) - ln_gamma((n + p) / 2.0);
    Ok(2.0 * PI.powf((n - 1.0) / 2.0) * log_ratio.exp())
}

/// `K(N, p) = gamma(N, p) / p`.
pub fn k_constant(dim: usize, p: f64) -> Result<f64> {
    Ok(gamma_constant(dim, p)? / p)
}

/// `p (1 - s) / delta^{p (1 - s)}`, the rescaling that makes the truncated
/// energy converge to the local gradient energy.
pub fn scaling_factor(params: &KernelParams) -> Result<f64> {
    let delta = params
        .delta
        .finite()
        .ok_or(Error::InfiniteHorizon("scaling_factor"))?;
    let q = params.p1s();
    Ok(q / delta.powf(q))
}

/// Norm-equivalence constant between the truncated and the full fractional
/// seminorm on `(a, b)`:
/// `(1 + (2^p |Omega_delta| / delta^{1+ps} + sigma_0 / (ps delta^{ps})) / lambda1)^{1/p}`.
pub fn embedding_constant(
    params: &KernelParams,
    domain_length: f64,
    lambda1_delta: f64,
) -> Result<f64> {
    let delta = params
        .delta
        .finite()
        .ok_or(Error::InfiniteHorizon("embedding_constant"))?;
    if !(lambda1_delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda1_delta must be positive, got {lambda1_delta}"
        )));
    }
    if !(domain_length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "domain length must be positive, got {domain_length}"
        )));
    }
    let p = params.p;
    let ps = params.ps();
    let completed = domain_length + 2.0 * delta;
    let far = 2f64.powf(p) * completed / delta.powf(1.0 + ps);
    let tail = sphere_surface(1)? / (ps * delta.powf(ps));
    Ok((1.0 + (far + tail) / lambda1_delta).powf(1.0 / p))
}

/// `pi_p = 2 pi / (p sin(pi / p))`.
pub fn pi_p(p: f64) -> f64 {
    2.0 * PI / (p * (PI / p).sin())
}

/// First eigenvalue of the one-dimensional Dirichlet p-Laplacian on an
/// interval of the given length: `(p - 1) (pi_p / L)^p`.
pub fn local_p_laplacian_lambda1(p: f64, length: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in (1,inf), got {p}"
        )));
    }
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "length must be positive, got {length}"
        )));
    }
    Ok((p - 1.0) * (pi_p(p) / length).powf(p))
}

/// k-th Dirichlet eigenvalue of the local Laplacian (`p = 2`): `(k pi / L)^2`.
pub fn local_laplacian_lambda(k: usize, length: f64) -> f64 {
    (k as f64 * PI / length).powi(2)
}
