//! Sweep configuration files.
//!
//! A configuration is a JSON object:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "study": "delta_zero",
//!   "p": 2.0,
//!   "s": 0.5,
//!   "domain": { "a": 0.0, "b": 1.0 },
//!   "delta_list": [0.2, 0.1, 0.05, 0.025],
//!   "mesh_rule": { "cells_per_horizon": 8 },
//!   "k_list": [1, 2],
//!   "thresholds": [0.02, 0.03]
//! }
//! ```
//!
//! `study` is one of `delta_zero`, `delta_infty` or `bbm`. `delta_list`
//! entries are numbers or the token `"INF"`. `mesh_rule` is either
//! `{"cells_per_horizon": m}` or `{"n_interior": n}`. `thresholds` is a
//! single number or one number per entry of `k_list`. Optional fields:
//! `output_path`, `solver` (see [`SolverOptions`]), `test_function`
//! (`"sine"` or `"zero"`, BBM studies only) and `initial_scale`, a factor
//! applied to the initial iterate of the general-`p` solver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eigensolver::SolverOptions;
use crate::error::{Error, Result};
use crate::kernelmath::{Horizon, KernelParams};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    DeltaZero,
    DeltaInfty,
    Bbm,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::DeltaZero => "delta_zero",
            StudyKind::DeltaInfty => "delta_infty",
            StudyKind::Bbm => "bbm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum MeshRule {
    CellsPerHorizon { cells_per_horizon: usize },
    Fixed { n_interior: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Thresholds {
    Single(f64),
    PerK(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    #[default]
    Sine,
    Zero,
}

fn default_k_list() -> Vec<usize> {
    vec![1]
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    pub study: StudyKind,
    pub p: f64,
    pub s: f64,
    pub domain: Interval,
    pub delta_list: Vec<Horizon>,
    pub mesh_rule: MeshRule,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    pub thresholds: Thresholds,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub test_function: TestFunction,
    #[serde(default = "default_scale")]
    pub initial_scale: f64,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Kernel parameters at a given horizon.
    pub fn params(&self, delta: Horizon) -> Result<KernelParams> {
        KernelParams::new(self.s, self.p, delta)
    }

    /// Threshold for the `i`-th entry of `k_list`.
    pub fn threshold(&self, i: usize) -> f64 {
        match &self.thresholds {
            Thresholds::Single(t) => *t,
            Thresholds::PerK(v) => v[i],
        }
    }

    pub fn k_max(&self) -> usize {
        self.k_list.iter().copied().max().unwrap_or(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if let Err(e) = KernelParams::new(self.s, self.p, Horizon::Infinite) {
            return bad(e.to_string());
        }
        let Interval { a, b } = self.domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return bad(format!("domain must satisfy a < b, got ({a}, {b})"));
        }
        if !(self.initial_scale.is_finite() && self.initial_scale != 0.0) {
            return bad("initial_scale must be finite and nonzero".into());
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return bad("k_list must be nonempty with entries >= 1".into());
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return bad("k_list must be strictly increasing".into());
        }
        if self.p != 2.0 && self.k_max() > 1 {
            return bad("k > 1 is only available for p = 2".into());
        }
        match &self.thresholds {
            Thresholds::Single(t) if !(*t > 0.0) => {
                return bad("thresholds must be positive".into())
            }
            Thresholds::PerK(v) if v.len() != self.k_list.len() => {
                return bad(format!(
                    "{} thresholds given for {} entries of k_list",
                    v.len(),
                    self.k_list.len()
                ))
            }
            Thresholds::PerK(v) if v.iter().any(|t| !(*t > 0.0)) => {
                return bad("thresholds must be positive".into())
            }
            _ => {}
        }
        self.solver
            .validate()
            .map_err(|e| Error::Config(format!("solver: {e}")))?;

        let d = &self.delta_list;
        for h in d {
            if let Horizon::Finite(x) = h {
                if !(*x > 0.0 && x.is_finite()) {
                    return bad(format!("horizons must be positive, got {x}"));
                }
            }
        }
        let finite: Vec<f64> = d.iter().filter_map(|h| h.finite()).collect();
        match self.study {
            StudyKind::DeltaZero | StudyKind::Bbm => {
                if finite.len() != d.len() {
                    return bad(format!(
                        "{} study takes finite horizons only",
                        self.study.name()
                    ));
                }
                if finite.len() < 3 {
                    return bad("extrapolation needs at least three horizons".into());
                }
                if finite.windows(2).any(|w| w[0] <= w[1]) {
                    return bad("delta_list must be strictly decreasing".into());
                }
                match self.mesh_rule {
                    MeshRule::CellsPerHorizon { cells_per_horizon } if cells_per_horizon >= 4 => {}
                    MeshRule::CellsPerHorizon { .. } => {
                        return bad("cells_per_horizon must be at least 4".into())
                    }
                    MeshRule::Fixed { .. } => {
                        return bad(format!(
                            "{} study needs mesh_rule cells_per_horizon",
                            self.study.name()
                        ))
                    }
                }
                if self.study == StudyKind::Bbm && self.k_list != [1] {
                    return bad("bbm study has no eigenvalue index; omit k_list".into());
                }
            }
            StudyKind::DeltaInfty => {
                if d.last() != Some(&Horizon::Infinite) || finite.len() + 1 != d.len() {
                    return bad(
                        "delta_infty study needs finite horizons followed by a single INF".into(),
                    );
                }
                if finite.is_empty() {
                    return bad("delta_infty study needs at least one finite horizon".into());
                }
                if finite.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("delta_list must be strictly increasing".into());
                }
                match self.mesh_rule {
                    MeshRule::Fixed { n_interior } if n_interior >= 2 => {}
                    MeshRule::Fixed { .. } => return bad("n_interior must be at least 2".into()),
                    MeshRule::CellsPerHorizon { .. } => {
                        return bad("delta_infty study needs mesh_rule n_interior".into())
                    }
                }
            }
        }
        if self.study != StudyKind::Bbm && self.test_function != TestFunction::Sine {
            return bad("test_function applies to bbm studies only".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ZERO: &str = r#"{
        "schema_version": 1, "study": "delta_zero", "p": 2.0, "s": 0.5,
        "domain": {"a": 0.0, "b": 1.0}, "delta_list": [0.2, 0.1, 0.05],
        "mesh_rule": {"cells_per_horizon": 8}, "k_list": [1, 2], "thresholds": [0.02, 0.03]
    }"#;

    fn with(field: &str, value: &str) -> String {
        let mut v: serde_json::Value = serde_json::from_str(ZERO).unwrap();
        v[field] = serde_json::from_str(value).unwrap();
        v.to_string()
    }

    #[test]
    fn parses_and_roundtrips() {
        let cfg = SweepConfig::from_json(ZERO).unwrap();
        assert_eq!(cfg.threshold(1), 0.03);
        assert_eq!(cfg.k_max(), 2);
        assert_eq!(
            SweepConfig::from_json(&cfg.to_json().unwrap()).unwrap(),
            cfg
        );
    }

    #[test]
    fn rejects_malformed() {
        for (field, value) in [
            ("schema_version", "2"),
            ("p", "1.0"),
            ("s", "1.5"),
            ("delta_list", "[0.1, 0.2, 0.05]"),
            ("delta_list", "[0.2, 0.1, \"INF\"]"),
            ("delta_list", "[0.2, 0.1]"),
            ("mesh_rule", "{\"cells_per_horizon\": 3}"),
            ("mesh_rule", "{\"n_interior\": 64}"),
            ("k_list", "[2, 1]"),
            ("thresholds", "[0.02]"),
            ("thresholds", "-1.0"),
            ("bogus", "1"),
        ] {
            let text = with(field, value);
            assert!(
                matches!(SweepConfig::from_json(&text), Err(Error::Config(_))),
                "{field} = {value}"
            );
        }
        let text = with("p", "3.0");
        assert!(SweepConfig::from_json(&text).is_err(), "k = 2 needs p = 2");
    }

    #[test]
    fn infinity_study_shape() {
        let text = r#"{
            "schema_version": 1, "study": "delta_infty", "p": 2.0, "s": 0.5,
            "domain": {"a": 0.0, "b": 1.0}, "delta_list": [1, 2, 4, "INF"],
            "mesh_rule": {"n_interior": 32}, "thresholds": 0.01
        }"#;
        let cfg = SweepConfig::from_json(text).unwrap();
        assert_eq!(cfg.delta_list.last(), Some(&Horizon::Infinite));
        assert_eq!(cfg.k_list, vec![1]);
        let swapped = text.replace("[1, 2, 4, \"INF\"]", "[1, \"INF\", 4]");
        assert!(SweepConfig::from_json(&swapped).is_err());
    }
}
