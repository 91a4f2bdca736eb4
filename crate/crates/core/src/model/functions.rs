//! Closed-form coefficient families and initial-data functions.
//!
//! Every time family returns its value together with an analytic derivative,
//! and reports the instants in a window where its hypothesis ratios reach an
//! extremum, so certification does not depend on sampling luck.

use std::f64::consts::PI;

use evalexpr::{
    build_operator_tree, ContextWithMutableFunctions, ContextWithMutableVariables,
    DefaultNumericTypes, Function, HashMapContext, Node, Value,
};
use serde::{Deserialize, Serialize};

use super::geometry::DomainGeometry;
use crate::error::{Error, Result};

/// Instantaneous damping weight μ₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Mu1Family {
    Constant { value: f64 },
    /// `value · exp(-rate · t)`.
    Exponential { value: f64, rate: f64 },
}

impl Mu1Family {
    /// Returns `(μ₁(t), μ₁'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            Mu1Family::Constant { value } => (value, 0.0),
            Mu1Family::Exponential { value, rate } => {
                let m = value * (-rate * t).exp();
                (m, -rate * m)
            }
        }
    }

    /// Logarithmic decay rate λ with μ₁' = -λ μ₁; constant for both families.
    pub fn log_rate(&self) -> f64 {
        match *self {
            Mu1Family::Constant { .. } => 0.0,
            Mu1Family::Exponential { rate, .. } => rate,
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Mu1Family::Constant { value } => vec![value],
            Mu1Family::Exponential { value, rate } => vec![value, rate],
        }
    }
}

/// Delayed damping weight μ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Mu2Family {
    Constant { value: f64 },
    /// `factor · μ₁(t)`.
    Scaled { factor: f64 },
    /// `factor · μ₁(t) · sin(omega · t)`.
    Modulated { factor: f64, omega: f64 },
}

impl Mu2Family {
    /// Returns `(μ₂(t), μ₂'(t))` given `(μ₁(t), μ₁'(t))`.
    pub fn eval(&self, t: f64, mu1: (f64, f64)) -> (f64, f64) {
        let (m, dm) = mu1;
        match *self {
            Mu2Family::Constant { value } => (value, 0.0),
            Mu2Family::Scaled { factor } => (factor * m, factor * dm),
            Mu2Family::Modulated { factor, omega } => {
                let (s, c) = (omega * t).sin_cos();
                (factor * m * s, factor * (dm * s + m * omega * c))
            }
        }
    }

    /// Instants in `[t0, t1]` where `|μ₂|/μ₁` or `|μ₂'|/μ₁` peak.
    pub fn critical_times(&self, mu1: &Mu1Family, t0: f64, t1: f64) -> Vec<f64> {
        match *self {
            Mu2Family::Modulated { omega, .. } if omega != 0.0 => {
                let lambda = mu1.log_rate();
                let w = omega.abs();
                // |sin(ωt)| peaks at ωt = π/2 + kπ; |ω cos(ωt) - λ sin(ωt)| at ωt = kπ - atan2(λ, ω).
                let mut out = periodic_points(PI / 2.0 / w, PI / w, t0, t1);
                let phase = (lambda.atan2(omega)) / omega;
                out.extend(periodic_points(-phase, PI / w, t0, t1));
                out
            }
            _ => Vec::new(),
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            Mu2Family::Constant { value } => vec![value],
            Mu2Family::Scaled { factor } => vec![factor],
            Mu2Family::Modulated { factor, omega } => vec![factor, omega],
        }
    }
}

/// Time-varying delay τ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum DelayFamily {
    Constant { value: f64 },
    /// `mean + amplitude · sin(omega · t)`.
    Sinusoidal { mean: f64, amplitude: f64, omega: f64 },
}

impl DelayFamily {
    /// Returns `(τ(t), τ'(t))`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            DelayFamily::Constant { value } => (value, 0.0),
            DelayFamily::Sinusoidal {
                mean,
                amplitude,
                omega,
            } => {
                let (s, c) = (omega * t).sin_cos();
                (mean + amplitude * s, amplitude * omega * c)
            }
        }
    }

    /// Exact supremum of |τ'| over all t.
    pub fn max_abs_slope(&self) -> f64 {
        match *self {
            DelayFamily::Constant { .. } => 0.0,
            DelayFamily::Sinusoidal {
                amplitude, omega, ..
            } => (amplitude * omega).abs(),
        }
    }

    /// Instants in `[t0, t1]` where τ or τ' reach their extrema.
    pub fn critical_times(&self, t0: f64, t1: f64) -> Vec<f64> {
        match *self {
            DelayFamily::Sinusoidal { omega, .. } if omega != 0.0 => {
                let period = PI / omega.abs();
                let mut out = periodic_points(0.0, period, t0, t1);
                out.extend(periodic_points(0.5 * period, period, t0, t1));
                out
            }
            _ => Vec::new(),
        }
    }

    fn params(&self) -> Vec<f64> {
        match *self {
            DelayFamily::Constant { value } => vec![value],
            DelayFamily::Sinusoidal {
                mean,
                amplitude,
                omega,
            } => vec![mean, amplitude, omega],
        }
    }
}

/// Points `offset + k·spacing` (k ∈ ℤ) that fall inside `[t0, t1]`.
fn periodic_points(offset: f64, spacing: f64, t0: f64, t1: f64) -> Vec<f64> {
    let k0 = ((t0 - offset) / spacing).ceil() as i64;
    let k1 = ((t1 - offset) / spacing).floor() as i64;
    (k0..=k1).map(|k| offset + k as f64 * spacing).collect()
}

pub(crate) fn check_finite_params(name: &str, params: &[f64]) -> Result<()> {
    if params.iter().all(|p| p.is_finite()) {
        Ok(())
    } else {
        Err(Error::MalformedSpec(format!("{name} has non-finite parameters")))
    }
}

pub(crate) fn check_families(mu1: &Mu1Family, mu2: &Mu2Family, tau: &DelayFamily) -> Result<()> {
    check_finite_params("mu1", &mu1.params())?;
    check_finite_params("mu2", &mu2.params())?;
    check_finite_params("tau", &tau.params())
}

/// Scalar function of position used for u₀, u₁, v₀, v₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum SpaceFunction {
    #[default]
    Zero,
    Constant { value: f64 },
    /// Smooth compactly supported bump with peak `amplitude` at `center`.
    Bump {
        center: f64,
        half_width: f64,
        amplitude: f64,
    },
    /// `amplitude · sin(mode · π · x / L3)`.
    StandingWave { amplitude: f64, mode: f64 },
    /// Expression in `x` (and `L1`, `L2`, `L3`, `pi`).
    Expression { expr: String },
}

/// Initial velocity history f₀(x, s) for s ∈ [-τ(0), 0].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum HistoryFunction {
    /// f₀(x, s) = u₁(x).
    #[default]
    FollowVelocity,
    /// Expression in `x` and `s` (and `L1`, `L2`, `L3`, `pi`).
    Expression { expr: String },
}

/// Compiled evaluator for [`SpaceFunction`] / [`HistoryFunction`].
pub struct Evaluator {
    kind: EvalKind,
    ctx: HashMapContext<DefaultNumericTypes>,
    l3: f64,
}

enum EvalKind {
    Space(SpaceFunction),
    Tree(Node<DefaultNumericTypes>),
    Follow(Box<Evaluator>),
}

fn math_context(geom: &DomainGeometry) -> Result<HashMapContext<DefaultNumericTypes>> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    let map_err = |e: evalexpr::EvalexprError<DefaultNumericTypes>| Error::MalformedSpec(e.to_string());
    for (name, value) in [("L1", geom.l1), ("L2", geom.l2), ("L3", geom.l3), ("pi", PI)] {
        ctx.set_value(name.into(), Value::Float(value)).map_err(map_err)?;
    }
    type Unary = (&'static str, fn(f64) -> f64);
    let unary: [Unary; 6] = [
        ("sin", f64::sin),
        ("cos", f64::cos),
        ("exp", f64::exp),
        ("sqrt", f64::sqrt),
        ("abs", f64::abs),
        ("tanh", f64::tanh),
    ];
    for (name, f) in unary {
        ctx.set_function(
            name.into(),
            Function::new(move |arg: &Value<DefaultNumericTypes>| Ok(Value::Float(f(arg.as_number()?)))),
        )
        .map_err(map_err)?;
    }
    Ok(ctx)
}

fn compile(expr: &str) -> Result<Node<DefaultNumericTypes>> {
    build_operator_tree::<DefaultNumericTypes>(expr)
        .map_err(|e| Error::MalformedSpec(format!("cannot parse expression `{expr}`: {e}")))
}

impl Evaluator {
    pub fn space(f: &SpaceFunction, geom: &DomainGeometry) -> Result<Self> {
        let ctx = math_context(geom)?;
        let kind = match f {
            SpaceFunction::Expression { expr } => EvalKind::Tree(compile(expr)?),
            SpaceFunction::Bump { half_width, .. } if *half_width <= 0.0 => {
                return Err(Error::MalformedSpec("bump half_width must be positive".into()))
            }
            other => EvalKind::Space(other.clone()),
        };
        Ok(Self { kind, ctx, l3: geom.l3 })
    }

    pub fn history(f: &HistoryFunction, u1: &SpaceFunction, geom: &DomainGeometry) -> Result<Self> {
        let ctx = math_context(geom)?;
        let kind = match f {
            HistoryFunction::FollowVelocity => EvalKind::Follow(Box::new(Self::space(u1, geom)?)),
            HistoryFunction::Expression { expr } => EvalKind::Tree(compile(expr)?),
        };
        Ok(Self { kind, ctx, l3: geom.l3 })
    }

    /// Evaluates at `x` (and history time `s`, ignored by space functions).
    pub fn eval(&mut self, x: f64, s: f64) -> Result<f64> {
        let value = match &mut self.kind {
            EvalKind::Space(f) => match *f {
                SpaceFunction::Zero => 0.0,
                SpaceFunction::Constant { value } => value,
                SpaceFunction::Bump {
                    center,
                    half_width,
                    amplitude,
                } => {
                    let r = (x - center) / half_width;
                    if r.abs() < 1.0 {
                        amplitude * (1.0 - 1.0 / (1.0 - r * r)).exp()
                    } else {
                        0.0
                    }
                }
                SpaceFunction::StandingWave { amplitude, mode } => amplitude * (mode * PI * x / self.l3).sin(),
                SpaceFunction::Expression { .. } => unreachable!("expressions are compiled"),
            },
            EvalKind::Follow(inner) => inner.eval(x, 0.0)?,
            EvalKind::Tree(node) => {
                let map_err = |e: evalexpr::EvalexprError<DefaultNumericTypes>| Error::MalformedSpec(e.to_string());
                self.ctx.set_value("x".into(), Value::Float(x)).map_err(map_err)?;
                self.ctx.set_value("s".into(), Value::Float(s)).map_err(map_err)?;
                node.eval_number_with_context(&self.ctx).map_err(map_err)?
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::MalformedSpec(format!("non-finite initial data at x = {x}, s = {s}")))
        }
    }
}
