//! Energies, Lyapunov correctors, inequality residuals and decay fits on
//! discrete states.

use serde::{Deserialize, Serialize};

use crate::discretization::{RhoGrid, SpatialGrid, StateSnapshot};
use crate::error::{Error, Result};
use crate::lyapunov::{ConstantSet, CorrectorBounds};
use crate::model::{coefficients_at, DomainGeometry, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub e1: f64,
    pub e2: f64,
    pub e_delay: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LyapunovRecord {
    pub t: f64,
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j: f64,
    /// Absent when no admissible constant set exists.
    pub l: Option<f64>,
}

/// Everything the stream checks need from one level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub energy: EnergyRecord,
    pub lyapunov: LyapunovRecord,
    /// `∫_Ω u_t²`.
    pub ut_sq: f64,
    /// `∫_Ω z(·, 1)²`.
    pub z1_sq: f64,
}

impl DiagnosticsRecord {
    pub fn t(&self) -> f64 {
        self.energy.t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub window: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSeries {
    /// One entry per consecutive pair of records.
    pub residuals: Vec<f64>,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoincareCheck {
    pub ok: bool,
    pub ratio: f64,
    pub bound: f64,
}

/// Scheme tolerance `K (dt + h + Δρ) E(0)` for the inequality residuals.
pub fn tol_scheme(k: f64, dt: f64, h: f64, d_rho: f64, e0: f64) -> f64 {
    k * (dt + h + d_rho) * e0
}

/// Centered differences inside, second-order one-sided at both ends.
pub fn gradient(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    debug_assert!(n >= 3 && out.len() == n);
    let inv = 0.5 / h;
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
}

/// Quadrature weights and multiplier samples for one grid, reused across
/// records.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    grid: SpatialGrid,
    rho: RhoGrid,
    w_omega: Vec<f64>,
    w_mid: Vec<f64>,
    w_rho: Vec<f64>,
    q_omega: Vec<f64>,
    q_mid: Vec<f64>,
    ux: Vec<f64>,
    vx: Vec<f64>,
}

impl Diagnostics {
    pub fn new(grid: &SpatialGrid, rho: &RhoGrid, geom: &DomainGeometry) -> Self {
        Self {
            w_omega: grid.omega_weights(),
            w_mid: grid.middle.weights(),
            w_rho: rho.weights(),
            q_omega: grid.omega_nodes().map(|x| geom.multiplier(x)).collect(),
            q_mid: grid.middle.nodes.iter().map(|x| geom.multiplier(*x)).collect(),
            ux: vec![0.0; grid.omega_len()],
            vx: vec![0.0; grid.middle.len()],
            grid: grid.clone(),
            rho: rho.clone(),
        }
    }

    fn gradients(&mut self, s: &StateSnapshot) {
        let r = self.grid.right_offset();
        let (ul, ur) = s.u.split_at(r);
        let (gl, gr) = self.ux.split_at_mut(r);
        gradient(ul, self.grid.left.h, gl);
        gradient(ur, self.grid.right.h, gr);
        gradient(&s.v, self.grid.middle.h, &mut self.vx);
    }

    /// `(∫_Ω ∫ z², ∫_Ω ∫ e^{-2τρ} z², ∫_Ω z(·,1)²)`.
    fn delay_integrals(&self, s: &StateSnapshot, tau: f64) -> (f64, f64, f64) {
        let damp: Vec<f64> = self.rho.nodes.iter().map(|r| (-2.0 * tau * r).exp()).collect();
        let last = s.z.n_rho - 1;
        let (mut plain, mut weighted, mut trace) = (0.0, 0.0, 0.0);
        for (i, wx) in self.w_omega.iter().enumerate() {
            let row = s.z.row(i);
            let (mut p, mut w) = (0.0, 0.0);
            for ((z, wr), e) in row.iter().zip(&self.w_rho).zip(&damp) {
                let z2 = z * z * wr;
                p += z2;
                w += z2 * e;
            }
            plain += wx * p;
            weighted += wx * w;
            trace += wx * row[last] * row[last];
        }
        (plain, weighted, trace)
    }

    /// Energy and correctors at the state's time.
    pub fn record(&mut self, s: &StateSnapshot, spec: &ProblemSpec, constants: Option<&ConstantSet>) -> DiagnosticsRecord {
        self.gradients(s);
        let g = &spec.geometry;
        let c = coefficients_at(spec, s.t);
        let (mut e1, mut ut_sq, mut i1, mut i2) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..s.u.len() {
            let w = self.w_omega[i];
            let (u, ut, ux) = (s.u[i], s.ut[i], self.ux[i]);
            ut_sq += w * ut * ut;
            e1 += w * (ut * ut + g.a * ux * ux);
            i1 += w * u * ut;
            i2 -= w * self.q_omega[i] * ux * ut;
        }
        let (mut e2, mut i3) = (0.0, 0.0);
        for i in 0..s.v.len() {
            let w = self.w_mid[i];
            let (v, vt, vx) = (s.v[i], s.vt[i], self.vx[i]);
            e2 += w * (vt * vt + g.b * vx * vx);
            i1 += w * v * vt;
            i3 -= w * self.q_mid[i] * vx * vt;
        }
        let (plain, weighted, z1_sq) = self.delay_integrals(s, c.tau);
        let energy = EnergyRecord {
            t: s.t,
            e1: 0.5 * e1,
            e2: 0.5 * e2,
            e_delay: 0.5 * c.xi * c.tau * plain,
            total: 0.5 * e1 + 0.5 * e2 + 0.5 * c.xi * c.tau * plain,
        };
        let j = spec.xi_bar() * c.tau * weighted;
        let l = constants.map(|k| k.n * energy.total + k.n1 * i1 + k.n2 * i2 + k.n3 * i3 + j);
        DiagnosticsRecord {
            energy,
            lyapunov: LyapunovRecord {
                t: s.t,
                i1,
                i2,
                i3,
                j,
                l,
            },
            ut_sq,
            z1_sq,
        }
    }
}

pub fn compute_energy(state: &StateSnapshot, grid: &SpatialGrid, rho: &RhoGrid, spec: &ProblemSpec) -> EnergyRecord {
    Diagnostics::new(grid, rho, &spec.geometry).record(state, spec, None).energy
}

pub fn compute_lyapunov(
    state: &StateSnapshot,
    grid: &SpatialGrid,
    rho: &RhoGrid,
    spec: &ProblemSpec,
    constants: &ConstantSet,
) -> LyapunovRecord {
    Diagnostics::new(grid, rho, &spec.geometry)
        .record(state, spec, Some(constants))
        .lyapunov
}

/// Checks uniform spacing and returns it.
fn stream_step(records: &[DiagnosticsRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::Stream(format!("{} records; need at least two consecutive", records.len())));
    }
    let dt = records[1].t() - records[0].t();
    if !(dt > 0.0) {
        return Err(Error::Stream(format!("non-increasing times at t = {}", records[0].t())));
    }
    for w in records.windows(2) {
        let step = w[1].t() - w[0].t();
        if (step - dt).abs() > 1e-9 * dt {
            return Err(Error::Stream(format!(
                "gap between t = {} and t = {} is not the step {dt}",
                w[0].t(),
                w[1].t()
            )));
        }
    }
    Ok(dt)
}

fn series(records: &[DiagnosticsRecord], mut rhs: impl FnMut(&DiagnosticsRecord) -> (f64, f64)) -> Result<ResidualSeries> {
    let dt = stream_step(records)?;
    let residuals: Vec<f64> = records
        .windows(2)
        .map(|w| {
            let (now, bound) = rhs(&w[0]);
            let (next, _) = rhs(&w[1]);
            (next - now) / dt - bound
        })
        .collect();
    let max = residuals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ResidualSeries { residuals, max })
}

/// `[E(tₙ₊₁) - E(tₙ)]/dt - RHS(tₙ)` for the energy dissipation bound.
pub fn check_dissipation(records: &[DiagnosticsRecord], spec: &ProblemSpec) -> Result<ResidualSeries> {
    let xi = spec.xi_bar();
    let beta = spec.weights.beta;
    let s = (1.0 - spec.delay.d).sqrt();
    series(records, |r| {
        let c = coefficients_at(spec, r.t());
        let ut = 1.0 - 0.5 * xi - beta / (2.0 * s);
        let z = 0.5 * xi * (1.0 - c.dtau) - 0.5 * beta * s;
        (r.energy.total, -c.mu1 * (ut * r.ut_sq + z * r.z1_sq))
    })
}

/// `[J(tₙ₊₁) - J(tₙ)]/dt - (-2J(tₙ) + ξ̄ ∫u_t²)`.
pub fn check_j_inequality(records: &[DiagnosticsRecord], spec: &ProblemSpec) -> Result<ResidualSeries> {
    let xi = spec.xi_bar();
    series(records, |r| (r.lyapunov.j, -2.0 * r.lyapunov.j + xi * r.ut_sq))
}

/// Slack of the pointwise bounds on the correctors and on J (non-negative
/// when the bound holds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundSlack {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub j: f64,
}

impl BoundSlack {
    pub fn holds(&self, tol: f64) -> bool {
        [self.i1, self.i2, self.i3, self.j].iter().all(|s| *s >= -tol)
    }
}

pub fn corrector_bound_slack(r: &DiagnosticsRecord, spec: &ProblemSpec) -> BoundSlack {
    let b = CorrectorBounds::new(&spec.geometry);
    let e = &r.energy;
    let l = &r.lyapunov;
    let mu1 = coefficients_at(spec, e.t).mu1;
    BoundSlack {
        i1: b.c1_u * e.e1 + b.c1_v * e.e2 - l.i1.abs(),
        i2: b.c2 * e.e1 - l.i2.abs(),
        i3: b.c3 * e.e2 - l.i3.abs(),
        j: 2.0 / mu1 * e.e_delay - l.j,
    }
}

/// `∫_Ω u² / ∫_Ω u_x²` for the piecewise-linear interpolant of `u`, which
/// is bounded by `c₁²` whenever u vanishes at 0 and L3.
pub fn check_poincare(u: &[f64], grid: &SpatialGrid, geom: &DomainGeometry) -> PoincareCheck {
    let (ul, ur) = grid.split(u);
    let (mut mass, mut stiff) = (0.0, 0.0);
    for (f, h) in [(ul, grid.left.h), (ur, grid.right.h)] {
        for w in f.windows(2) {
            mass += h / 3.0 * (w[0] * w[0] + w[0] * w[1] + w[1] * w[1]);
            stiff += (w[1] - w[0]).powi(2) / h;
        }
    }
    let bound = geom.poincare_constant().powi(2);
    let ratio = if mass == 0.0 { 0.0 } else { mass / stiff };
    PoincareCheck {
        ok: ratio <= bound * (1.0 + 1e-12),
        ratio,
        bound,
    }
}

/// Least-squares line through `(t, ln E)` on `window`, skipping points with
/// `E <= floor · E(0)` where `E(0)` is the first sample.
pub fn fit_decay(series: &[(f64, f64)], window: [f64; 2], floor: f64) -> Result<DecayFit> {
    let e0 = series
        .first()
        .ok_or_else(|| Error::InsufficientDecayData("empty energy series".into()))?
        .1;
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, e)| *t >= window[0] && *t <= window[1] && *e > floor * e0 && *e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientDecayData(format!(
            "{} usable points in [{}, {}]",
            pts.len(),
            window[0],
            window[1]
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (t, y) in &pts {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if sxx == 0.0 {
        return Err(Error::InsufficientDecayData("all points share one time".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let ss_res: f64 = pts.iter().map(|(t, y)| (y - intercept - slope * t).powi(2)).sum();
    // A flat series leaves only summation rounding in syy; treat it as a perfect fit.
    let flat = syy <= n * (1e-12 * (1.0 + ym.abs())).powi(2);
    let r_squared = if flat { 1.0 } else { 1.0 - ss_res / syy };
    Ok(DecayFit {
        alpha_hat: -slope,
        c_hat: intercept.exp() / e0,
        r_squared,
        window,
        points: pts.len(),
    })
}
