//! Constants for the Lyapunov functional `L = N E + N₁ I₁ + N₂ I₂ + N₃ I₃ + J`
//! and empirical equivalence / decay-rate estimates along trajectories.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::model::DomainGeometry;

/// Inputs to [`find_constants`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    pub geometry: DomainGeometry,
    pub mu1_at_0: f64,
    /// Smallest μ₁ over the horizon of interest.
    pub mu1_inf: f64,
    pub beta: f64,
    pub d: f64,
    pub xi_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantSet {
    pub n: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub xi_bar: f64,
}

/// Bounds `|N₁I₁ + N₂I₂ + N₃I₃| <= C·E`, split per corrector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrectorBounds {
    /// `|I₁| <= c1_u E₁ + c1_v E₂`.
    pub c1_u: f64,
    pub c1_v: f64,
    /// `|I₂| <= c2 E₁`.
    pub c2: f64,
    /// `|I₃| <= c3 E₂`.
    pub c3: f64,
}

impl CorrectorBounds {
    pub fn new(g: &DomainGeometry) -> Self {
        // Dirichlet Poincaré constant of the whole bar [0, L3]: u and v glue
        // into one H¹₀ function, so ∫u² + ∫v² <= (L3/π)² (∫u_x² + ∫v_x²).
        let cp2 = (g.l3 / PI).powi(2);
        let m = g.multiplier_bound();
        Self {
            c1_u: 1f64.max(cp2 / g.a),
            c1_v: 1f64.max(cp2 / g.b),
            c2: 2.0 * m * 1f64.max(1.0 / g.a),
            c3: m * 1f64.max(1.0 / g.b),
        }
    }
}

/// `(L1 + L3 - L2) / (4 (L2 - L1))`: the upper end of the N₁ window for N₃ = 1.
fn n1_ceiling(g: &DomainGeometry) -> f64 {
    (g.l1 + g.l3 - g.l2) / (4.0 * (g.l2 - g.l1))
}

/// Rate at which `N E` dissipates: `μ₁_inf · min` of the two energy-dissipation
/// coefficients. Non-positive when ξ̄ is outside its window.
fn dissipation_rate(inp: &ConstantInputs) -> f64 {
    let s = (1.0 - inp.d).sqrt();
    let ut = 1.0 - 0.5 * inp.xi_bar - inp.beta / (2.0 * s);
    let z = 0.5 * inp.xi_bar * (1.0 - inp.d) - 0.5 * inp.beta * s;
    inp.mu1_inf * ut.min(z)
}

/// Deterministic midpoint construction; `None` when no admissible set exists.
///
/// N₃ = 1, N₂ sits a third of the way into `(max{1, a/b}, 2R)`, N₁ at the
/// midpoint of `(N₂/2, R)`, ε₁ and ε₂ at half their saturating values, and N
/// is twice the largest of the lower bounds needed for negative u_t² and z(1)²
/// coefficients and for `L >= N E / 2`.
pub fn find_constants(inp: &ConstantInputs) -> Option<ConstantSet> {
    let g = &inp.geometry;
    let m = 1f64.max(g.a / g.b);
    let r = n1_ceiling(g);
    if !(m / 2.0 < r) || !(inp.mu1_at_0 > 0.0) {
        return None;
    }
    let k = dissipation_rate(inp);
    if !(k > 0.0) {
        return None;
    }

    let n3 = 1.0;
    let n2 = m + (2.0 * r - m) / 3.0;
    let n1 = 0.5 * (0.5 * n2 + r);

    let gap = g.a * (n1 - 0.5 * n2);
    let mu2 = inp.mu1_at_0 * inp.mu1_at_0;
    let c1 = g.poincare_constant();
    let big_m = g.multiplier_bound();
    let eps1 = 0.5 * gap / (2.0 * mu2 * c1 * c1 * n1);
    let eps2 = 0.5 * gap / (2.0 * big_m * big_m * mu2 * n2);

    let b2 = inp.beta * inp.beta;
    let n_ut = ((1.0 + 0.5 / eps1) * n1 + (0.5 + 0.5 / eps2) * n2 + inp.xi_bar) / k;
    let n_z = (0.5 * b2 / eps1 * n1 + 0.5 * b2 / eps2 * n2) / k;
    let cb = CorrectorBounds::new(g);
    let n_equiv = n1 * cb.c1_u.max(cb.c1_v) + n2 * cb.c2 + n3 * cb.c3;

    Some(ConstantSet {
        n: 2.0 * n_ut.max(n_z).max(n_equiv),
        n1,
        n2,
        n3,
        eps1,
        eps2,
        xi_bar: inp.xi_bar,
    })
}

/// Outcome of re-evaluating each defining inequality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InvariantCheck {
    pub n1_window: bool,
    pub n2_n1_order: bool,
    pub eps_budget: bool,
    pub ut_coefficient: bool,
}

impl InvariantCheck {
    pub fn all(&self) -> bool {
        self.n1_window && self.n2_n1_order && self.eps_budget && self.ut_coefficient
    }
}

impl ConstantSet {
    pub fn verify(&self, inp: &ConstantInputs) -> InvariantCheck {
        let g = &inp.geometry;
        let mu2 = inp.mu1_at_0 * inp.mu1_at_0;
        let c1 = g.poincare_constant();
        let m = g.multiplier_bound();
        let ut_coeff = -self.n * dissipation_rate(inp)
            + (1.0 + 0.5 / self.eps1) * self.n1
            + (0.5 + 0.5 / self.eps2) * self.n2
            + self.xi_bar;
        InvariantCheck {
            n1_window: self.n1 + g.middle_slope() / 2.0 * self.n3 < 0.0,
            n2_n1_order: self.n2 > 1f64.max(g.a / g.b) * self.n3 && self.n1 > self.n2 / 2.0,
            eps_budget: mu2 * c1 * c1 * self.eps1 * self.n1 + m * m * mu2 * self.eps2 * self.n2
                < g.a * (self.n1 - self.n2 / 2.0),
            ut_coefficient: ut_coeff < 0.0,
        }
    }
}

/// Empirical `γ₁ = min L/E`, `γ₂ = max L/E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equivalence {
    pub gamma1: f64,
    pub gamma2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrediction {
    pub eta2: f64,
    pub alpha_pred: f64,
}

fn lyapunov_value(r: &DiagnosticsRecord) -> Result<f64> {
    r.lyapunov
        .l
        .ok_or_else(|| Error::InsufficientData("records carry no Lyapunov value".into()))
}

/// Ratios are taken over records with `E > floor · E(0)`; records with
/// `E = 0` must have `L = 0`.
pub fn empirical_equivalence(records: &[DiagnosticsRecord], floor: f64) -> Result<Equivalence> {
    let e0 = records
        .first()
        .ok_or_else(|| Error::InsufficientData("empty trajectory".into()))?
        .energy
        .total;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in records {
        let (e, l) = (r.energy.total, lyapunov_value(r)?);
        if e == 0.0 {
            if l != 0.0 {
                return Err(Error::EquivalenceViolation { t: r.energy.t, l });
            }
            continue;
        }
        if e > floor * e0 {
            lo = lo.min(l / e);
            hi = hi.max(l / e);
        }
    }
    if !lo.is_finite() {
        return Err(Error::InsufficientData("no record with positive energy".into()));
    }
    Ok(Equivalence {
        gamma1: lo,
        gamma2: hi,
    })
}

/// `η₂ = min -ΔL / (Δt E)` over consecutive records (clipped at 0) and
/// `α_pred = η₂ / γ₂`.
pub fn predict_alpha(records: &[DiagnosticsRecord], eq: &Equivalence, floor: f64) -> Result<AlphaPrediction> {
    if records.len() < 10 {
        return Err(Error::InsufficientData(format!(
            "{} records; at least 10 are needed",
            records.len()
        )));
    }
    let e0 = records[0].energy.total;
    if !(e0 > 0.0) {
        return Err(Error::InsufficientData("zero initial energy".into()));
    }
    let mut eta = f64::INFINITY;
    for w in records.windows(2) {
        let e = w[0].energy.total;
        if !(e > floor * e0) {
            continue;
        }
        let dl = lyapunov_value(&w[1])? - lyapunov_value(&w[0])?;
        let dt = w[1].energy.t - w[0].energy.t;
        eta = eta.min(-dl / dt / e);
    }
    if !eta.is_finite() {
        return Err(Error::InsufficientData("no interval above the energy floor".into()));
    }
    let eta2 = eta.max(0.0);
    Ok(AlphaPrediction {
        eta2,
        alpha_pred: eta2 / eq.gamma2,
    })
}
