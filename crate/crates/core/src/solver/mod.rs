//! Explicit time stepping for the coupled wave / delay system.

mod scheme;

pub use scheme::{
    apply_transmission, compute_dt, damped_update, interface_value, step_wave, step_z_transport, transport_speed,
    Backend, StepContext, WaveFields,
};

use crate::discretization::{initialize_state, HistoryBuffer, RhoGrid, SpatialGrid, StateSnapshot};
use crate::error::{Error, Result};
use crate::model::{coefficients_at, Coefficients, Evaluator, ProblemSpec};

/// Resolved time-stepping parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub backend: Backend,
}

impl SolverConfig {
    /// Uniform steps covering `[0, t_final]`, each no larger than `dt_max`.
    pub fn covering(t_final: f64, dt_max: f64, backend: Backend) -> Result<Self> {
        if !(t_final > 0.0) || !(dt_max > 0.0) {
            return Err(Error::MalformedSpec(format!(
                "t_final = {t_final} and dt = {dt_max} must be positive"
            )));
        }
        let n_steps = (t_final / dt_max * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Self {
            dt: t_final / n_steps as f64,
            n_steps,
            backend,
        })
    }
}

/// Stateful integrator. Each call to [`Solver::step`] returns the next
/// complete time level (level 0 first), including its velocities and delay
/// field.
#[derive(Debug)]
pub struct Solver {
    spec: ProblemSpec,
    grid: SpatialGrid,
    rho: RhoGrid,
    config: SolverConfig,
    prev: WaveFields,
    now: WaveFields,
    next: WaveFields,
    state: StateSnapshot,
    history: Option<HistoryBuffer>,
    trace: Vec<f64>,
    level: usize,
    started: bool,
}

impl Solver {
    pub fn new(spec: &ProblemSpec, grid: SpatialGrid, rho: RhoGrid, config: SolverConfig) -> Result<Self> {
        spec.validate()?;
        let state = initialize_state(spec, &grid, &rho)?;
        let history = match config.backend {
            Backend::Augmented => None,
            Backend::History => Some(seed_history(spec, &grid, &state, config.dt)?),
        };
        let now = WaveFields {
            u: state.u.clone(),
            v: state.v.clone(),
        };
        Ok(Self {
            prev: WaveFields::zeros(&grid),
            next: WaveFields::zeros(&grid),
            trace: vec![0.0; grid.omega_len()],
            spec: spec.clone(),
            grid,
            rho,
            config,
            now,
            state,
            history,
            level: 0,
            started: false,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn rho(&self) -> &RhoGrid {
        &self.rho
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    /// Index of the most recently returned level.
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn time(&self) -> f64 {
        self.level as f64 * self.config.dt
    }

    /// Advances to and returns the next complete level.
    pub fn step(&mut self) -> Result<&StateSnapshot> {
        if self.started {
            self.advance()?;
        }
        self.started = true;
        self.complete_level()?;
        Ok(&self.state)
    }

    fn ctx(&self) -> StepContext {
        StepContext {
            step: self.level,
            t: self.time(),
        }
    }

    /// Computes level n+1 displacements, from which the level-n velocities
    /// and delay field follow.
    fn complete_level(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let t = self.time();
        let ctx = self.ctx();
        let c = coefficients_at(&self.spec, t);

        match &self.history {
            None => {
                let last = self.state.z.n_rho - 1;
                for (i, tr) in self.trace.iter_mut().enumerate() {
                    *tr = self.state.z.at(i, last);
                }
            }
            Some(h) => {
                if c.tau < dt * (1.0 - 1e-9) {
                    return Err(Error::HistoryUnderflow {
                        query: t - c.tau,
                        start: h.span().map_or(f64::NAN, |s| s.0),
                        end: t - dt,
                    });
                }
                h.interpolate_into(t - c.tau, &mut self.trace)?;
            }
        }

        if self.level == 0 {
            self.bootstrap(&c)?;
        }
        step_wave(
            &self.prev,
            &self.now,
            &mut self.next,
            &self.grid,
            &self.spec.geometry,
            &c,
            dt,
            &self.trace,
            ctx,
        )?;
        apply_transmission(&mut self.next, &self.grid, &self.spec.geometry)?;

        let s = &mut self.state;
        s.t = t;
        s.u.copy_from_slice(&self.now.u);
        s.v.copy_from_slice(&self.now.v);
        if self.level > 0 {
            let inv = 0.5 / dt;
            for ((o, a), b) in s.ut.iter_mut().zip(&self.next.u).zip(&self.prev.u) {
                *o = (a - b) * inv;
            }
            for ((o, a), b) in s.vt.iter_mut().zip(&self.next.v).zip(&self.prev.v) {
                *o = (a - b) * inv;
            }
        }

        match &mut self.history {
            None => s.z.set_column(0, &s.ut),
            Some(h) => {
                if self.level > 0 {
                    h.push(t, s.ut.clone())?;
                }
                let mut col = vec![0.0; s.ut.len()];
                for (j, r) in self.rho.nodes.iter().enumerate() {
                    h.interpolate_into(t - c.tau * r, &mut col)?;
                    s.z.set_column(j, &col);
                }
            }
        }
        Ok(())
    }

    /// Second-order Taylor start: fills the fictitious level -1.
    fn bootstrap(&mut self, c: &Coefficients) -> Result<()> {
        let dt = self.config.dt;
        let g = &self.spec.geometry;
        let s = &self.state;
        let half = 0.5 * dt * dt;
        let offset = self.grid.right_offset();
        for (seg, base) in [(&self.grid.left, 0), (&self.grid.right, offset)] {
            let inv_h2 = 1.0 / (seg.h * seg.h);
            for i in base + 1..base + seg.cells {
                let lap = (s.u[i + 1] - 2.0 * s.u[i] + s.u[i - 1]) * inv_h2;
                let acc = g.a * lap - c.mu1 * s.ut[i] - c.mu2 * self.trace[i];
                self.prev.u[i] = s.u[i] - dt * s.ut[i] + half * acc;
            }
        }
        let inv_h2 = 1.0 / (self.grid.middle.h * self.grid.middle.h);
        for i in 1..self.grid.middle.cells {
            let lap = (s.v[i + 1] - 2.0 * s.v[i] + s.v[i - 1]) * inv_h2;
            self.prev.v[i] = s.v[i] - dt * s.vt[i] + half * g.b * lap;
        }
        let last = self.grid.omega_len() - 1;
        self.prev.u[0] = 0.0;
        self.prev.u[last] = 0.0;
        apply_transmission(&mut self.prev, &self.grid, g)
    }

    fn advance(&mut self) -> Result<()> {
        if self.history.is_none() {
            let c = coefficients_at(&self.spec, self.time());
            let ctx = self.ctx();
            let inflow = self.state.ut.clone();
            step_z_transport(&mut self.state.z, &self.rho, &c, self.config.dt, &inflow, ctx)?;
        }
        std::mem::swap(&mut self.prev, &mut self.now);
        std::mem::swap(&mut self.now, &mut self.next);
        self.level += 1;
        Ok(())
    }
}

/// History ring holding `f₀` on `[-τ₁ - dt, 0]`; the entry at 0 is `u₁`.
fn seed_history(spec: &ProblemSpec, grid: &SpatialGrid, state: &StateSnapshot, dt: f64) -> Result<HistoryBuffer> {
    let tau1 = spec.delay.tau1.max(coefficients_at(spec, 0.0).tau);
    let mut buf = HistoryBuffer::new(dt, tau1)?;
    let k = (tau1 / dt).ceil() as usize + 1;
    let mut f0 = Evaluator::history(&spec.initial.f0, &spec.initial.u1, &spec.geometry)?;
    let xs: Vec<f64> = grid.omega_nodes().collect();
    for m in (1..=k).rev() {
        let s = -(m as f64) * dt;
        let field = xs.iter().map(|x| f0.eval(*x, s)).collect::<Result<Vec<_>>>()?;
        buf.push(s, field)?;
    }
    buf.push(0.0, state.ut.clone())?;
    Ok(buf)
}
