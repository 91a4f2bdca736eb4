//! Continuous problem definition: geometry, coefficient families, delay,
//! initial data and hypothesis certification.

mod certificate;
mod functions;
mod geometry;

pub use certificate::{certify, default_sampling, Certificate, Hypothesis, Violation};
pub use functions::{DelayFamily, Evaluator, HistoryFunction, Mu1Family, Mu2Family, SpaceFunction};
pub use geometry::{validate_geometry, DomainGeometry, GeometryCheck};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSpec {
    pub mu1: Mu1Family,
    pub mu2: Mu2Family,
    /// Declared bound on |μ₁'/μ₁|.
    pub m1: f64,
    /// Declared bound on |μ₂'|/μ₁.
    pub m2: f64,
    /// Declared bound on |μ₂|/μ₁.
    pub beta: f64,
    /// Fixed ξ̄; the midpoint of the admissible window when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_bar: Option<f64>,
    /// Level below which μ₁ is reported as degenerate over the horizon.
    #[serde(default = "default_mu1_floor")]
    pub mu1_floor: f64,
}

fn default_mu1_floor() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelaySpec {
    pub tau: DelayFamily,
    pub tau0: f64,
    pub tau1: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialData {
    #[serde(default)]
    pub u0: SpaceFunction,
    #[serde(default)]
    pub u1: SpaceFunction,
    #[serde(default)]
    pub v0: SpaceFunction,
    #[serde(default)]
    pub v1: SpaceFunction,
    #[serde(default)]
    pub f0: HistoryFunction,
}

/// Full model definition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub geometry: DomainGeometry,
    pub weights: WeightSpec,
    pub delay: DelaySpec,
    #[serde(default)]
    pub initial: InitialData,
}

/// Open interval `(lower, upper)`; empty when `lower >= upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiInterval {
    pub lower: f64,
    pub upper: f64,
}

impl XiInterval {
    pub fn is_empty(&self) -> bool {
        self.lower >= self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower < x && x < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

/// Window `(β/√(1-d), 2 - β/√(1-d))` of admissible ξ̄.
pub fn admissible_xi_interval(beta: f64, d: f64) -> Result<XiInterval> {
    if !(0.0..1.0).contains(&d) {
        return Err(Error::InvalidDelayBound(d));
    }
    if !(beta >= 0.0) {
        return Err(Error::MalformedSpec(format!("beta must be non-negative, got {beta}")));
    }
    let edge = beta / (1.0 - d).sqrt();
    Ok(XiInterval {
        lower: edge,
        upper: 2.0 - edge,
    })
}

/// Coefficient values at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub mu1: f64,
    pub dmu1: f64,
    pub mu2: f64,
    pub dmu2: f64,
    pub tau: f64,
    pub dtau: f64,
    pub xi: f64,
}

impl ProblemSpec {
    /// ξ̄ in use: the declared one, else the window midpoint (which is 1 for any β, d).
    pub fn xi_bar(&self) -> f64 {
        self.weights.xi_bar.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.check()?;
        functions::check_families(&self.weights.mu1, &self.weights.mu2, &self.delay.tau)?;
        functions::check_finite_params(
            "declared constants",
            &[
                self.weights.m1,
                self.weights.m2,
                self.weights.beta,
                self.delay.tau0,
                self.delay.tau1,
                self.delay.d,
                self.weights.mu1_floor,
            ],
        )?;
        if let Some(xi) = self.weights.xi_bar {
            functions::check_finite_params("xi_bar", &[xi])?;
        }
        Ok(())
    }

    /// Uniformly rescales all initial data by `s`.
    pub fn with_scaled_data(&self, s: f64) -> Self {
        fn scale(f: &SpaceFunction, s: f64) -> SpaceFunction {
            match f {
                SpaceFunction::Zero => SpaceFunction::Zero,
                SpaceFunction::Constant { value } => SpaceFunction::Constant { value: value * s },
                SpaceFunction::Bump {
                    center,
                    half_width,
                    amplitude,
                } => SpaceFunction::Bump {
                    center: *center,
                    half_width: *half_width,
                    amplitude: amplitude * s,
                },
                SpaceFunction::StandingWave { amplitude, mode } => SpaceFunction::StandingWave {
                    amplitude: amplitude * s,
                    mode: *mode,
                },
                SpaceFunction::Expression { expr } => SpaceFunction::Expression {
                    expr: format!("({s:e}) * ({expr})"),
                },
            }
        }
        let mut out = self.clone();
        let init = &mut out.initial;
        init.u0 = scale(&self.initial.u0, s);
        init.u1 = scale(&self.initial.u1, s);
        init.v0 = scale(&self.initial.v0, s);
        init.v1 = scale(&self.initial.v1, s);
        if let HistoryFunction::Expression { expr } = &self.initial.f0 {
            init.f0 = HistoryFunction::Expression {
                expr: format!("({s:e}) * ({expr})"),
            };
        }
        out
    }
}

/// Closed-form values of μ₁, μ₂, τ, their derivatives and ξ = ξ̄μ₁ at `t`.
pub fn evaluate_coefficients(spec: &ProblemSpec, t: f64) -> Result<Coefficients> {
    if !(t >= 0.0) {
        return Err(Error::Domain(t));
    }
    Ok(coefficients_at(spec, t))
}

pub fn coefficients_at(spec: &ProblemSpec, t: f64) -> Coefficients {
    let (mu1, dmu1) = spec.weights.mu1.eval(t);
    let (mu2, dmu2) = spec.weights.mu2.eval(t, (mu1, dmu1));
    let (tau, dtau) = spec.delay.tau.eval(t);
    Coefficients {
        mu1,
        dmu1,
        mu2,
        dmu2,
        tau,
        dtau,
        xi: spec.xi_bar() * mu1,
    }
}
