use serde::{Deserialize, Serialize};

use super::{admissible_xi_interval, coefficients_at, validate_geometry, ProblemSpec, XiInterval};
use crate::error::{Error, Result};

/// Relative slack below which a residual counts as satisfied (absorbs rounding in
/// closed-form ratios such as `(λ μ₁) / μ₁`).
const RESIDUAL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Geometry,
    Mu1Positive,
    Mu1NonIncreasing,
    Mu1LogRatio,
    Mu2Bound,
    Mu2Derivative,
    BetaWindow,
    DelayLower,
    DelayUpper,
    DelaySlope,
    DelayDeclared,
    XiWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub hypothesis: Hypothesis,
    pub t: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub geometry_ok: bool,
    pub h1_ok: bool,
    pub h2_ok: bool,
    pub delay_ok: bool,
    pub xi_ok: bool,
    pub geometric_lhs: f64,
    pub geometric_rhs: f64,
    /// `None` when the declared d is not below 1.
    pub xi_interval: Option<XiInterval>,
    pub xi_bar: f64,
    /// Smallest sampled μ₁ over the horizon.
    pub mu1_inf: f64,
    /// False when `mu1_inf` drops below the configured floor (informational).
    pub mu1_floor_ok: bool,
    pub sampled_violations: Vec<Violation>,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.geometry_ok && self.h1_ok && self.h2_ok && self.delay_ok && self.xi_ok
    }

    fn has(&self, ids: &[Hypothesis]) -> bool {
        self.sampled_violations.iter().any(|v| ids.contains(&v.hypothesis))
    }
}

/// `n` equally spaced instants on `[0, t_final]`.
pub fn default_sampling(t_final: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n).map(|i| t_final * i as f64 / (n - 1) as f64).collect()
}

struct Recorder {
    out: Vec<Violation>,
}

impl Recorder {
    /// Records a violation when `residual > 0` beyond rounding relative to `scale`.
    fn check(&mut self, hypothesis: Hypothesis, t: f64, residual: f64, scale: f64) {
        if residual > RESIDUAL_EPS * (1.0 + scale.abs()) {
            self.out.push(Violation { hypothesis, t, residual });
        }
    }
}

/// Checks every hypothesis pointwise on `sampling` plus the analytic extremum
/// instants of the configured families that fall inside the sampled window.
pub fn certify(spec: &ProblemSpec, sampling: &[f64]) -> Result<Certificate> {
    spec.validate()?;
    if sampling.is_empty() || sampling.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::MalformedSpec("sampling must be non-empty and within t >= 0".into()));
    }
    let geom = validate_geometry(&spec.geometry)?;
    let w = &spec.weights;
    let dl = &spec.delay;

    let t_lo = sampling.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_hi = sampling.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut times: Vec<f64> = sampling.to_vec();
    times.extend(dl.tau.critical_times(t_lo, t_hi));
    times.extend(w.mu2.critical_times(&w.mu1, t_lo, t_hi));
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();

    let mut rec = Recorder { out: Vec::new() };
    if !geom.ok {
        rec.out.push(Violation {
            hypothesis: Hypothesis::Geometry,
            t: 0.0,
            residual: geom.lhs - geom.rhs,
        });
    }

    // Declared constants.
    let xi_interval = admissible_xi_interval(w.beta.max(0.0), dl.d).ok();
    if !(dl.d < 1.0) || !(dl.tau0 > 0.0) || dl.tau0 > dl.tau1 {
        rec.out.push(Violation {
            hypothesis: Hypothesis::DelayDeclared,
            t: 0.0,
            residual: (dl.d - 1.0).max(-dl.tau0).max(dl.tau0 - dl.tau1),
        });
    }
    let beta_cap = if dl.d < 1.0 { (1.0 - dl.d).sqrt() } else { 0.0 };
    if !(w.beta > 0.0 && w.beta < beta_cap) {
        rec.out.push(Violation {
            hypothesis: Hypothesis::BetaWindow,
            t: 0.0,
            residual: (w.beta - beta_cap).max(-w.beta),
        });
    }
    if !(w.m1 > 0.0) {
        rec.out.push(Violation {
            hypothesis: Hypothesis::Mu1LogRatio,
            t: 0.0,
            residual: -w.m1,
        });
    }
    if !(w.m2 > 0.0) {
        rec.out.push(Violation {
            hypothesis: Hypothesis::Mu2Derivative,
            t: 0.0,
            residual: -w.m2,
        });
    }

    let mut mu1_inf = f64::INFINITY;
    for &t in &times {
        let c = coefficients_at(spec, t);
        let vals = [c.mu1, c.dmu1, c.mu2, c.dmu2, c.tau, c.dtau];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedSpec(format!("coefficient families are not finite at t = {t}")));
        }
        mu1_inf = mu1_inf.min(c.mu1);

        if c.mu1 <= 0.0 {
            rec.out.push(Violation {
                hypothesis: Hypothesis::Mu1Positive,
                t,
                residual: -c.mu1,
            });
        } else {
            rec.check(Hypothesis::Mu1LogRatio, t, (c.dmu1 / c.mu1).abs() - w.m1, w.m1);
            rec.check(Hypothesis::Mu2Bound, t, c.mu2.abs() - w.beta * c.mu1, w.beta * c.mu1);
            rec.check(Hypothesis::Mu2Derivative, t, c.dmu2.abs() - w.m2 * c.mu1, w.m2 * c.mu1);
        }
        rec.check(Hypothesis::Mu1NonIncreasing, t, c.dmu1, c.mu1);
        rec.check(Hypothesis::DelayLower, t, dl.tau0 - c.tau, dl.tau0);
        rec.check(Hypothesis::DelayUpper, t, c.tau - dl.tau1, dl.tau1);
        rec.check(Hypothesis::DelaySlope, t, c.dtau - dl.d, dl.d);
    }

    let xi_bar = spec.xi_bar();
    let xi_ok = xi_interval.map(|i| i.contains(xi_bar)).unwrap_or(false);
    if !xi_ok {
        rec.out.push(Violation {
            hypothesis: Hypothesis::XiWindow,
            t: 0.0,
            residual: xi_interval
                .map(|i| (i.lower - xi_bar).max(xi_bar - i.upper))
                .unwrap_or(f64::INFINITY),
        });
    }

    let mut cert = Certificate {
        geometry_ok: geom.ok,
        h1_ok: true,
        h2_ok: true,
        delay_ok: true,
        xi_ok,
        geometric_lhs: geom.lhs,
        geometric_rhs: geom.rhs,
        xi_interval,
        xi_bar,
        mu1_inf,
        mu1_floor_ok: mu1_inf >= w.mu1_floor,
        sampled_violations: rec.out,
    };
    use Hypothesis::*;
    cert.h1_ok = !cert.has(&[Mu1Positive, Mu1NonIncreasing, Mu1LogRatio]);
    cert.h2_ok = !cert.has(&[Mu2Bound, Mu2Derivative, BetaWindow]);
    cert.delay_ok = !cert.has(&[DelayLower, DelayUpper, DelaySlope, DelayDeclared]);
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::reference_spec;
    use crate::model::{DelayFamily, Mu1Family, Mu2Family};

    fn grid() -> Vec<f64> {
        default_sampling(10.0, 201)
    }

    #[test]
    fn constant_reference_passes() {
        let cert = certify(&reference_spec(), &grid()).unwrap();
        assert!(cert.passed(), "{:?}", cert.sampled_violations);
        let i = cert.xi_interval.unwrap();
        assert!((i.lower - 0.3).abs() < 1e-12 && (i.upper - 1.7).abs() < 1e-12);
    }

    #[test]
    fn oversized_mu2_fails_h2_with_unit_residual() {
        let mut spec = reference_spec();
        spec.weights.mu2 = Mu2Family::Scaled { factor: 1.5 };
        spec.weights.beta = 0.5;
        let cert = certify(&spec, &grid()).unwrap();
        assert!(!cert.h2_ok);
        let v = cert
            .sampled_violations
            .iter()
            .find(|v| v.hypothesis == Hypothesis::Mu2Bound && v.t == 0.0)
            .unwrap();
        assert!((v.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn steep_sinusoidal_delay_fails() {
        let mut spec = reference_spec();
        spec.delay = crate::model::DelaySpec {
            tau: DelayFamily::Sinusoidal {
                mean: 0.5,
                amplitude: 0.4,
                omega: 3.0,
            },
            tau0: 0.1,
            tau1: 0.9,
            d: 0.9,
        };
        spec.weights.beta = 0.3;
        let cert = certify(&spec, &grid()).unwrap();
        assert!(!cert.delay_ok);
        let worst = cert
            .sampled_violations
            .iter()
            .filter(|v| v.hypothesis == Hypothesis::DelaySlope)
            .map(|v| v.residual)
            .fold(0.0, f64::max);
        assert!((worst - 0.3).abs() < 1e-9);
    }

    #[test]
    fn analytic_extrema_catch_what_sampling_misses() {
        let mut spec = reference_spec();
        // Peak slope 0.95 at t = 2πk/ω, never hit by a grid with step 1.
        spec.delay = crate::model::DelaySpec {
            tau: DelayFamily::Sinusoidal {
                mean: 0.5,
                amplitude: 0.1,
                omega: 9.5,
            },
            tau0: 0.4,
            tau1: 0.6,
            d: 0.9,
        };
        spec.weights.beta = 0.3;
        let cert = certify(&spec, &[0.5, 1.5, 2.5]).unwrap();
        assert!(!cert.delay_ok);
    }

    #[test]
    fn increasing_mu1_fails_h1() {
        let mut spec = reference_spec();
        spec.weights.mu1 = Mu1Family::Exponential { value: 1.0, rate: -0.1 };
        spec.weights.mu2 = Mu2Family::Scaled { factor: 0.3 };
        let cert = certify(&spec, &grid()).unwrap();
        assert!(!cert.h1_ok);
        assert!(cert.h2_ok);
    }

    #[test]
    fn tighter_sampling_never_rescues() {
        let mut spec = reference_spec();
        spec.weights.mu1 = Mu1Family::Exponential { value: 1.0, rate: 0.2 };
        // Constant μ₂ against a decaying μ₁ violates |μ₂| <= β μ₁ eventually.
        let coarse = certify(&spec, &default_sampling(10.0, 11)).unwrap();
        let fine = certify(&spec, &default_sampling(10.0, 1001)).unwrap();
        assert!(!coarse.h2_ok);
        assert!(!fine.h2_ok);
        assert!(fine.sampled_violations.len() >= coarse.sampled_violations.len());
    }

    #[test]
    fn mu1_floor_flag() {
        let mut spec = reference_spec();
        spec.weights.mu1 = Mu1Family::Exponential { value: 1.0, rate: 2.0 };
        spec.weights.mu2 = Mu2Family::Scaled { factor: 0.3 };
        spec.weights.m1 = 2.0;
        spec.weights.m2 = 1.0;
        let cert = certify(&spec, &default_sampling(10.0, 101)).unwrap();
        assert!(cert.passed());
        assert!(!cert.mu1_floor_ok);
        assert!(cert.mu1_inf < 1e-8);
    }

    #[test]
    fn non_finite_family_is_malformed() {
        let mut spec = reference_spec();
        spec.weights.mu1 = Mu1Family::Constant { value: f64::NAN };
        assert!(matches!(certify(&spec, &grid()), Err(Error::MalformedSpec(_))));
    }
}
