//! Single-step kernels: wave update, interface closure, ρ-transport.

use serde::{Deserialize, Serialize};

use crate::discretization::{RhoField, RhoGrid, SpatialGrid};
use crate::error::{Error, Result};
use crate::model::{Coefficients, DelaySpec, DomainGeometry};

/// Any nodal magnitude above this is treated as overflow.
const BLOWUP: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Transport of z(x, ρ, t) on the ρ-grid.
    #[default]
    Augmented,
    /// Direct lookup of u_t(x, t - τ(t)) in a history ring.
    History,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "augmented" => Ok(Backend::Augmented),
            "history" => Ok(Backend::History),
            other => Err(Error::Usage(format!("unknown backend `{other}` (augmented | history)"))),
        }
    }
}

/// Step index and time, attached to errors raised inside a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub step: usize,
    pub t: f64,
}

/// Displacements of one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFields {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl WaveFields {
    pub fn zeros(grid: &SpatialGrid) -> Self {
        Self {
            u: vec![0.0; grid.omega_len()],
            v: vec![0.0; grid.middle.len()],
        }
    }
}

/// Largest dt satisfying the wave CFL bound `cfl · h_min / √max(a, b)` and the
/// transport bound `dt · (1 + max|τ'|) / τ₀ <= Δρ`.
pub fn compute_dt(geom: &DomainGeometry, grid: &SpatialGrid, rho: &RhoGrid, delay: &DelaySpec, cfl: f64) -> f64 {
    let wave = cfl * grid.h_min() / geom.a.max(geom.b).sqrt();
    let transport = rho.d_rho * delay.tau0 / (1.0 + delay.tau.max_abs_slope());
    wave.min(transport)
}

/// Three-level update with centered damping solved pointwise:
/// `u⁺ = [2u - (1 - γ) u⁻ + dt² · accel] / (1 + γ)`.
#[inline]
pub fn damped_update(u_now: f64, u_prev: f64, accel: f64, gamma: f64, dt: f64) -> f64 {
    (2.0 * u_now - (1.0 - gamma) * u_prev + dt * dt * accel) / (1.0 + gamma)
}

#[inline]
fn laplacian(f: &[f64], i: usize, inv_h2: f64) -> f64 {
    (f[i + 1] - 2.0 * f[i] + f[i - 1]) * inv_h2
}

/// Interior update of both subsystems; boundary nodes are pinned to zero and
/// interface nodes are left for [`apply_transmission`].
#[allow(clippy::too_many_arguments)]
pub fn step_wave(
    prev: &WaveFields,
    now: &WaveFields,
    next: &mut WaveFields,
    grid: &SpatialGrid,
    geom: &DomainGeometry,
    coeffs: &Coefficients,
    dt: f64,
    delayed_trace: &[f64],
    ctx: StepContext,
) -> Result<()> {
    let gamma = 0.5 * coeffs.mu1 * dt;
    let offset = grid.right_offset();
    for (seg, base) in [(&grid.left, 0), (&grid.right, offset)] {
        let inv_h2 = 1.0 / (seg.h * seg.h);
        let range = base..base + seg.len();
        let (up, un, trace) = (&prev.u[range.clone()], &now.u[range.clone()], &delayed_trace[range.clone()]);
        let out = &mut next.u[range];
        for i in 1..seg.cells {
            let accel = geom.a * laplacian(un, i, inv_h2) - coeffs.mu2 * trace[i];
            out[i] = damped_update(un[i], up[i], accel, gamma, dt);
        }
    }
    let last = grid.omega_len() - 1;
    next.u[0] = 0.0;
    next.u[last] = 0.0;

    let inv_h2 = 1.0 / (grid.middle.h * grid.middle.h);
    for i in 1..grid.middle.cells {
        let accel = geom.b * laplacian(&now.v, i, inv_h2);
        next.v[i] = damped_update(now.v[i], prev.v[i], accel, 0.0, dt);
    }
    check_finite(next, ctx)
}

pub(crate) fn check_finite(fields: &WaveFields, ctx: StepContext) -> Result<()> {
    let bad = fields.u.iter().chain(&fields.v).any(|x| !(x.abs() < BLOWUP));
    if bad {
        Err(Error::Instability {
            step: ctx.step,
            t: ctx.t,
        })
    } else {
        Ok(())
    }
}

/// Shared interface value `w` solving `a u_x = b v_x` with second-order
/// one-sided differences; `side_*[0]` is the first node away from the interface.
#[inline]
pub fn interface_value(a: f64, h_u: f64, side_u: [f64; 2], b: f64, h_v: f64, side_v: [f64; 2]) -> f64 {
    let (wu, wv) = (a / h_u, b / h_v);
    let ext_u = 4.0 * side_u[0] - side_u[1];
    let ext_v = 4.0 * side_v[0] - side_v[1];
    (wu * ext_u + wv * ext_v) / (3.0 * (wu + wv))
}

/// Sets the shared nodal value at L1 and L2 from the flux condition.
pub fn apply_transmission(fields: &mut WaveFields, grid: &SpatialGrid, geom: &DomainGeometry) -> Result<()> {
    for seg in [&grid.left, &grid.middle, &grid.right] {
        if seg.len() < 3 {
            return Err(Error::Resolution(format!(
                "segment [{}, {}] has {} nodes; the interface closure needs 3",
                seg.start,
                seg.end,
                seg.len()
            )));
        }
    }
    let (a, b) = (geom.a, geom.b);
    let r = grid.right_offset();
    let m = grid.middle.cells;

    let u = &fields.u;
    let v = &fields.v;
    let w1 = interface_value(a, grid.left.h, [u[r - 2], u[r - 3]], b, grid.middle.h, [v[1], v[2]]);
    let w2 = interface_value(a, grid.right.h, [u[r + 1], u[r + 2]], b, grid.middle.h, [v[m - 1], v[m - 2]]);
    fields.u[r - 1] = w1;
    fields.v[0] = w1;
    fields.u[r] = w2;
    fields.v[m] = w2;
    Ok(())
}

/// Transport speed `(1 - τ' ρ) / τ` at every ρ-node.
pub fn transport_speed(rho: &RhoGrid, coeffs: &Coefficients) -> Vec<f64> {
    rho.nodes.iter().map(|r| (1.0 - coeffs.dtau * r) / coeffs.tau).collect()
}

/// First-order upwind step in ρ. Row 0 is the inflow `z(·, 0) = u_t`; every
/// Ω-node column is advanced independently.
pub fn step_z_transport(
    z: &mut RhoField,
    rho: &RhoGrid,
    coeffs: &Coefficients,
    dt: f64,
    inflow: &[f64],
    ctx: StepContext,
) -> Result<()> {
    let speed = transport_speed(rho, coeffs);
    if let Some((j, c)) = speed.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
        return Err(Error::HypothesisViolation {
            step: ctx.step,
            t: ctx.t,
            detail: format!("transport speed {c} <= 0 at rho = {} (tau' = {})", rho.nodes[j], coeffs.dtau),
        });
    }
    let courant: Vec<f64> = speed.iter().map(|c| c * dt / rho.d_rho).collect();
    for (i, &head) in inflow.iter().enumerate().take(z.n_x) {
        let row = z.row_mut(i);
        row[0] = head;
        // Descending sweep reads the old upstream value.
        for j in (1..row.len()).rev() {
            row[j] -= courant[j] * (row[j] - row[j - 1]);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;
    use crate::model::DelayFamily;

    fn coeffs(mu1: f64, mu2: f64, tau: f64, dtau: f64) -> Coefficients {
        Coefficients {
            mu1,
            dmu1: 0.0,
            mu2,
            dmu2: 0.0,
            tau,
            dtau,
            xi: mu1,
        }
    }

    #[test]
    fn dt_examples() {
        let delay = DelaySpec {
            tau: DelayFamily::Constant { value: 10.0 },
            tau0: 10.0,
            tau1: 10.0,
            d: 0.0,
        };
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 4.0, 1.0).unwrap();
        let (grid, rho) = build_grid(&g, 0.01, 3).unwrap();
        assert!((compute_dt(&g, &grid, &rho, &delay, 0.9) - 0.0045).abs() < 1e-12);

        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 1.0).unwrap();
        let (grid, rho) = build_grid(&g, 0.1, 3).unwrap();
        assert!((compute_dt(&g, &grid, &rho, &delay, 0.5) - 0.05).abs() < 1e-12);

        let delay = DelaySpec {
            tau: DelayFamily::Constant { value: 0.5 },
            tau0: 0.5,
            tau1: 0.5,
            d: 0.0,
        };
        let rho = RhoGrid::new(101).unwrap();
        assert!((compute_dt(&g, &grid, &rho, &delay, 0.5) - 0.005).abs() < 1e-12);
    }

    #[test]
    fn single_node_damped_update() {
        // γ = μ₁ dt / 2 = 0.1.
        let u = damped_update(1.0, 1.0, 0.0, 0.5 * 2.0 * 0.1, 0.1);
        assert!((u - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 1.0).unwrap();
        let (grid, _) = build_grid(&g, 0.05, 3).unwrap();
        let z = WaveFields::zeros(&grid);
        let mut next = WaveFields::zeros(&grid);
        next.u.iter_mut().for_each(|x| *x = 7.0);
        let trace = vec![0.0; grid.omega_len()];
        let ctx = StepContext { step: 0, t: 0.0 };
        step_wave(&z, &z, &mut next, &grid, &g, &coeffs(1.0, 0.3, 0.5, 0.0), 0.01, &trace, ctx).unwrap();
        apply_transmission(&mut next, &grid, &g).unwrap();
        assert!(next.u.iter().chain(&next.v).all(|x| *x == 0.0));
    }

    #[test]
    fn overflow_reports_step() {
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 1.0).unwrap();
        let (grid, _) = build_grid(&g, 0.05, 3).unwrap();
        let mut now = WaveFields::zeros(&grid);
        now.u[5] = f64::NAN;
        let mut next = WaveFields::zeros(&grid);
        let trace = vec![0.0; grid.omega_len()];
        let ctx = StepContext { step: 42, t: 0.42 };
        let err = step_wave(&now, &now, &mut next, &grid, &g, &coeffs(0.0, 0.0, 0.5, 0.0), 0.01, &trace, ctx);
        assert!(matches!(err, Err(Error::Instability { step: 42, .. })));
    }

    #[test]
    fn smooth_function_interface_is_second_order() {
        // a = b: the closure reproduces a smooth function to O(h²).
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 1.0).unwrap();
        let mut errs = Vec::new();
        for h in [0.02, 0.01] {
            let (grid, _) = build_grid(&g, h, 3).unwrap();
            let f = |x: f64| (1.3 * x).sin() + 0.2 * x * x;
            let mut fields = WaveFields {
                u: grid.omega_nodes().map(f).collect(),
                v: grid.middle.nodes.iter().map(|x| f(*x)).collect(),
            };
            apply_transmission(&mut fields, &grid, &g).unwrap();
            let r = grid.right_offset();
            errs.push((fields.u[r - 1] - f(1.0)).abs().max((fields.u[r] - f(1.2)).abs()));
        }
        assert!(errs[0] < 1e-3);
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn linear_fields_transmit_flux() {
        // u = x on the left, a = 2, b = 1: v must leave L1 with slope 2.
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 2.0, 1.0).unwrap();
        let (grid, _) = build_grid(&g, 0.05, 3).unwrap();
        let r = grid.right_offset();
        let mut fields = WaveFields::zeros(&grid);
        for (i, x) in grid.left.nodes.iter().enumerate() {
            fields.u[i] = *x;
        }
        for (i, x) in grid.middle.nodes.iter().enumerate() {
            fields.v[i] = 1.0 + 2.0 * (x - 1.0);
        }
        fields.u[r - 1] = 0.0;
        fields.v[0] = 0.0;
        apply_transmission(&mut fields, &grid, &g).unwrap();
        assert!((fields.u[r - 1] - 1.0).abs() < 1e-12);
        let h = grid.middle.h;
        let vx = (-3.0 * fields.v[0] + 4.0 * fields.v[1] - fields.v[2]) / (2.0 * h);
        assert!((vx - 2.0).abs() < 1e-10);
    }

    #[test]
    fn zero_fields_transmit_zero() {
        let g = DomainGeometry::new(1.0, 1.2, 3.0, 1.0, 3.0).unwrap();
        let (grid, _) = build_grid(&g, 0.05, 3).unwrap();
        let mut fields = WaveFields::zeros(&grid);
        apply_transmission(&mut fields, &grid, &g).unwrap();
        assert!(fields.u.iter().chain(&fields.v).all(|x| *x == 0.0));
    }

    #[test]
    fn constant_transport_state_is_steady() {
        let rho = RhoGrid::new(17).unwrap();
        let mut z = RhoField::zeros(4, rho.len());
        z.data.iter_mut().for_each(|x| *x = 1.0);
        let c = coeffs(1.0, 0.0, 0.5, 0.0);
        let dt = 0.5 * rho.d_rho * 0.5;
        for k in 0..100 {
            step_z_transport(&mut z, &rho, &c, dt, &[1.0; 4], StepContext { step: k, t: 0.0 }).unwrap();
        }
        assert!(z.data.iter().all(|x| (*x - 1.0).abs() < 1e-14));
    }

    #[test]
    fn transport_tracks_characteristics() {
        // Inflow g(t) = sin 3t with constant τ: z(1, t) = g(t - τ) once t > τ.
        let tau = 0.5;
        let c = coeffs(1.0, 0.0, tau, 0.0);
        let mut errs = Vec::new();
        for n_rho in [33, 65] {
            let rho = RhoGrid::new(n_rho).unwrap();
            let dt = 0.8 * rho.d_rho * tau;
            let mut z = RhoField::zeros(1, n_rho);
            let steps = (2.0 / dt).round() as usize;
            for k in 0..steps {
                let t = k as f64 * dt;
                step_z_transport(&mut z, &rho, &c, dt, &[(3.0 * t).sin()], StepContext { step: k, t }).unwrap();
            }
            let t_end = steps as f64 * dt;
            errs.push((z.at(0, n_rho - 1) - (3.0 * (t_end - tau)).sin()).abs());
        }
        assert!(errs[0] < 0.05, "{errs:?}");
        assert!(errs[0] / errs[1] > 1.6, "{errs:?}");
    }

    #[test]
    fn speed_stays_positive_below_unit_slope() {
        let rho = RhoGrid::new(5).unwrap();
        let s = transport_speed(&rho, &coeffs(1.0, 0.0, 0.5, 0.9));
        assert!(s.iter().all(|c| *c > 0.0));
        assert!((s[4] - 0.1 / 0.5).abs() < 1e-12);

        let mut z = RhoField::zeros(1, 5);
        let bad = step_z_transport(&mut z, &rho, &coeffs(1.0, 0.0, 0.5, 1.5), 0.01, &[0.0], StepContext { step: 3, t: 0.0 });
        assert!(matches!(bad, Err(Error::HypothesisViolation { step: 3, .. })));
    }
}
