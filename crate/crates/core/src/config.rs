//! TOML run configuration.
//!
//! One file fully determines a run. Function families are written as
//! `{ family = "...", params = { ... } }`; every default is listed on the
//! field it applies to.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DelaySpec, DomainGeometry, InitialData, ProblemSpec, WeightSpec};
use crate::solver::Backend;

/// Tolerance constant `K` in `K (dt + h + Δρ) E(0)`, calibrated on the
/// reference configuration by refinement (see `fixtures/reference.toml`).
pub const DEFAULT_TOL_CONSTANT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    /// Target spatial step; each segment gets ⌈length / target_h⌉ cells.
    pub target_h: f64,
    /// Number of ρ-nodes on [0, 1].
    pub n_rho: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_final: f64,
    #[serde(default)]
    pub backend: Backend,
    /// Explicit time step, bypassing the CFL bound (rounded down to divide t_final).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Write a snapshot CSV every this many steps; 0 disables snapshots.
    #[serde(default)]
    pub snapshot_stride: usize,
    /// Trajectory CSV keeps every this many steps (diagnostics always use every step).
    #[serde(default = "one")]
    pub record_stride: usize,
    /// Uniform sampling density for hypothesis certification.
    #[serde(default = "default_certify_samples")]
    pub certify_samples: usize,
}

fn default_cfl() -> f64 {
    0.9
}

fn one() -> usize {
    1
}

fn default_certify_samples() -> usize {
    2001
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticSettings {
    #[serde(default = "default_tol_constant")]
    pub tol_constant: f64,
    /// Energies at or below `decay_floor · E(0)` are excluded from fits.
    #[serde(default = "default_decay_floor")]
    pub decay_floor: f64,
    /// Fit window; defaults to `[T/8, 7T/8]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[f64; 2]>,
}

impl Default for DiagnosticSettings {
    fn default() -> Self {
        Self {
            tol_constant: DEFAULT_TOL_CONSTANT,
            decay_floor: default_decay_floor(),
            fit_window: None,
        }
    }
}

fn default_tol_constant() -> f64 {
    DEFAULT_TOL_CONSTANT
}

fn default_decay_floor() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: DomainGeometry,
    pub weights: WeightSpec,
    pub delay: DelaySpec,
    #[serde(default)]
    pub initial: InitialData,
    pub solver: SolverSettings,
    #[serde(default)]
    pub diagnostics: DiagnosticSettings,
    /// Runs proceed even when the certificate fails (sweeps into unproven regimes).
    #[serde(default)]
    pub exploratory: bool,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Value = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: Config = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            geometry: self.geometry,
            weights: self.weights.clone(),
            delay: self.delay.clone(),
            initial: self.initial.clone(),
        }
    }

    pub fn fit_window(&self) -> [f64; 2] {
        self.diagnostics
            .fit_window
            .unwrap_or([self.solver.t_final / 8.0, 7.0 * self.solver.t_final / 8.0])
    }

    fn check(&self) -> Result<()> {
        let s = &self.solver;
        let positive = [("target_h", s.target_h), ("cfl", s.cfl), ("t_final", s.t_final)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("solver.{name} must be positive, got {v}")));
            }
        }
        if s.dt.is_some_and(|dt| !(dt > 0.0 && dt.is_finite())) {
            return Err(Error::Config("solver.dt must be positive".into()));
        }
        if s.record_stride == 0 {
            return Err(Error::Config("solver.record_stride must be at least 1".into()));
        }
        let d = &self.diagnostics;
        if !(d.tol_constant >= 0.0) || !(d.decay_floor >= 0.0) {
            return Err(Error::Config("diagnostics constants must be non-negative".into()));
        }
        self.problem().validate()
    }
}

/// Replaces the numeric leaf at a dotted path such as `weights.beta`.
pub fn set_scalar(value: &mut toml::Value, path: &str, x: f64) -> Result<()> {
    let mut cur = value;
    for key in path.split('.') {
        cur = cur
            .get_mut(key)
            .ok_or_else(|| Error::Usage(format!("config path `{path}` not found (at `{key}`)")))?;
    }
    match cur {
        toml::Value::Float(_) => *cur = toml::Value::Float(x),
        toml::Value::Integer(_) if x.fract() == 0.0 => *cur = toml::Value::Integer(x as i64),
        toml::Value::Integer(_) => *cur = toml::Value::Float(x),
        _ => return Err(Error::Usage(format!("config path `{path}` is not a scalar number"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[geometry]
l1 = 1.0
l2 = 1.2
l3 = 3.0
a = 1.0
b = 1.0

[weights]
mu1 = { family = "constant", params = { value = 1.0 } }
mu2 = { family = "constant", params = { value = 0.3 } }
m1 = 1.0
m2 = 1.0
beta = 0.3

[delay]
tau = { family = "constant", params = { value = 0.5 } }
tau0 = 0.5
tau1 = 0.5
d = 0.0

[initial]
u0 = { family = "bump", params = { center = 2.1, half_width = 0.5, amplitude = 1.0 } }

[solver]
target_h = 0.05
n_rho = 16
t_final = 1.0
"#;

    #[test]
    fn parses_with_defaults() {
        let c = Config::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.solver.cfl, 0.9);
        assert_eq!(c.solver.backend, Backend::Augmented);
        assert_eq!(c.diagnostics.tol_constant, DEFAULT_TOL_CONSTANT);
        assert_eq!(c.fit_window(), [0.125, 0.875]);
        assert!(!c.exploratory);
        assert_eq!(c.problem().xi_bar(), 1.0);
    }

    #[test]
    fn round_trips() {
        let c = Config::from_toml_str(MINIMAL).unwrap();
        let again = Config::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let bad = MINIMAL.replace("n_rho = 16", "n_rho = 16\nbogus = 1");
        assert!(matches!(Config::from_toml_str(&bad), Err(Error::Config(_))));
        let bad = MINIMAL.replace("t_final = 1.0", "t_final = -1.0");
        assert!(matches!(Config::from_toml_str(&bad), Err(Error::Config(_))));
        assert!(Config::from_toml_str("not toml [").is_err());
    }

    #[test]
    fn scalar_override() {
        let mut v: toml::Value = toml::from_str(MINIMAL).unwrap();
        set_scalar(&mut v, "weights.beta", 0.5).unwrap();
        set_scalar(&mut v, "solver.n_rho", 32.0).unwrap();
        set_scalar(&mut v, "weights.mu2.params.value", 0.2).unwrap();
        let c = Config::from_value(v.clone()).unwrap();
        assert_eq!(c.weights.beta, 0.5);
        assert_eq!(c.solver.n_rho, 32);
        assert!(matches!(set_scalar(&mut v, "weights.gamma", 1.0), Err(Error::Usage(_))));
        assert!(matches!(set_scalar(&mut v, "weights.mu1", 1.0), Err(Error::Usage(_))));
    }
}
