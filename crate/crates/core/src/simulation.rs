//! One complete run: certification, constants, time stepping and the
//! post-run analysis of the diagnostic stream.

use std::path::Path;

use serde::Serialize;

use crate::config::Config;
use crate::diagnostics::{
    check_dissipation, check_j_inequality, corrector_bound_slack, fit_decay, tol_scheme, DecayFit, Diagnostics,
    DiagnosticsRecord, ResidualSeries,
};
use crate::discretization::{build_grid, RhoGrid, SpatialGrid};
use crate::error::{Error, Result};
use crate::lyapunov::{
    empirical_equivalence, find_constants, predict_alpha, AlphaPrediction, ConstantInputs, ConstantSet, Equivalence,
};
use crate::model::{certify, coefficients_at, default_sampling, Certificate, ProblemSpec};
use crate::solver::{compute_dt, Backend, Solver, SolverConfig};

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Proceed even when the certificate fails.
    pub override_certificate: bool,
    /// Replaces the configured backend.
    pub backend: Option<Backend>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: ProblemSpec,
    pub grid: SpatialGrid,
    pub rho: RhoGrid,
    pub solver: SolverConfig,
    pub certificate: Certificate,
    pub constants: Option<ConstantSet>,
    /// One record per time level, 0 through `n_steps`.
    pub records: Vec<DiagnosticsRecord>,
}

impl RunOutput {
    pub fn energy_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t(), r.energy.total)).collect()
    }

    pub fn e0(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.energy.total)
    }
}

/// Certificate over `[0, t_final]` plus the constant set it admits.
pub fn certify_config(config: &Config) -> Result<(Certificate, Option<ConstantSet>)> {
    let spec = config.problem();
    let samples = default_sampling(config.solver.t_final, config.solver.certify_samples);
    let cert = certify(&spec, &samples)?;
    let constants = find_constants(&ConstantInputs {
        geometry: spec.geometry,
        mu1_at_0: coefficients_at(&spec, 0.0).mu1,
        mu1_inf: cert.mu1_inf,
        beta: spec.weights.beta,
        d: spec.delay.d,
        xi_bar: spec.xi_bar(),
    });
    Ok((cert, constants))
}

/// Grids and step plan for a configuration.
pub fn plan(config: &Config, backend: Option<Backend>) -> Result<(SpatialGrid, RhoGrid, SolverConfig)> {
    let spec = config.problem();
    let s = &config.solver;
    let (grid, rho) = build_grid(&spec.geometry, s.target_h, s.n_rho)?;
    let dt = s
        .dt
        .unwrap_or_else(|| compute_dt(&spec.geometry, &grid, &rho, &spec.delay, s.cfl));
    let cfg = SolverConfig::covering(s.t_final, dt, backend.unwrap_or(s.backend))?;
    Ok((grid, rho, cfg))
}

/// Steps the solver over `[0, t_final]`, recording diagnostics at every level
/// and writing snapshot CSVs into `snapshot_dir` when a stride is configured.
pub fn run(config: &Config, opts: &RunOptions, snapshot_dir: Option<&Path>) -> Result<RunOutput> {
    let spec = config.problem();
    let (certificate, constants) = certify_config(config)?;
    if !certificate.passed() && !(opts.override_certificate || config.exploratory) {
        return Err(Error::Uncertified(failed_hypotheses(&certificate)));
    }
    let (grid, rho, plan) = plan(config, opts.backend)?;
    let mut solver = Solver::new(&spec, grid.clone(), rho.clone(), plan)?;
    let mut diag = Diagnostics::new(&grid, &rho, &spec.geometry);
    let stride = config.solver.snapshot_stride;
    let mut records = Vec::with_capacity(plan.n_steps + 1);
    for n in 0..=plan.n_steps {
        let state = solver.step()?;
        records.push(diag.record(state, &spec, constants.as_ref()));
        if let (Some(dir), true) = (snapshot_dir, stride > 0 && n % stride.max(1) == 0) {
            state.write_csv(&grid, &dir.join(format!("snapshot_{n:07}.csv")))?;
        }
    }
    Ok(RunOutput {
        spec,
        grid,
        rho,
        solver: plan,
        certificate,
        constants,
        records,
    })
}

pub fn failed_hypotheses(cert: &Certificate) -> String {
    let mut names = Vec::new();
    for (ok, name) in [
        (cert.geometry_ok, "geometry"),
        (cert.h1_ok, "mu1"),
        (cert.h2_ok, "mu2"),
        (cert.delay_ok, "delay"),
        (cert.xi_ok, "xi_bar"),
    ] {
        if !ok {
            names.push(name);
        }
    }
    names.join(", ")
}

/// Post-run quantities. Inequality assertions are only meaningful when
/// `certified` is true.
#[derive(Debug, Clone, Serialize)]
pub struct Analysis {
    pub certified: bool,
    pub tol_scheme: f64,
    pub dissipation: Option<ResidualSeries>,
    pub j_inequality: Option<ResidualSeries>,
    /// `max_n E(tₙ₊₁) - E(tₙ)`.
    pub max_energy_increase: f64,
    /// Records whose corrector or J bound is violated beyond rounding.
    pub bound_violations: usize,
    pub decay_fit: Option<DecayFit>,
    pub equivalence: Option<Equivalence>,
    pub alpha: Option<AlphaPrediction>,
    /// Reasons for any quantity above that could not be computed.
    pub notes: Vec<String>,
}

struct Keep<'a>(&'a mut Vec<String>);

impl Keep<'_> {
    fn ok<T>(&mut self, r: Result<T>, what: &str) -> Option<T> {
        r.map_err(|e| self.0.push(format!("{what}: {e}"))).ok()
    }
}

pub fn analyze(out: &RunOutput, config: &Config) -> Analysis {
    let mut notes = Vec::new();
    let mut keep = Keep(&mut notes);
    let e0 = out.e0();
    let tol = tol_scheme(
        config.diagnostics.tol_constant,
        out.solver.dt,
        out.grid.h_max(),
        out.rho.d_rho,
        e0,
    );
    let dissipation = keep.ok(check_dissipation(&out.records, &out.spec), "dissipation");
    let j_inequality = keep.ok(check_j_inequality(&out.records, &out.spec), "J inequality");
    let max_energy_increase = out
        .records
        .windows(2)
        .map(|w| w[1].energy.total - w[0].energy.total)
        .fold(f64::NEG_INFINITY, f64::max);
    let bound_violations = out
        .records
        .iter()
        .filter(|r| !corrector_bound_slack(r, &out.spec).holds(1e-12 * e0))
        .count();
    let floor = config.diagnostics.decay_floor;
    let decay_fit = keep.ok(
        fit_decay(&out.energy_series(), config.fit_window(), floor),
        "decay fit",
    );
    let (equivalence, alpha) = if out.constants.is_some() {
        let eq = keep.ok(empirical_equivalence(&out.records, floor), "equivalence");
        let alpha = match &eq {
            Some(eq) => keep.ok(predict_alpha(&out.records, eq, floor), "alpha prediction"),
            None => None,
        };
        (eq, alpha)
    } else {
        keep.ok::<()>(Err(Error::InsufficientData("no admissible constant set".into())), "lyapunov");
        (None, None)
    };
    Analysis {
        certified: out.certificate.passed(),
        tol_scheme: tol,
        dissipation,
        j_inequality,
        max_energy_increase,
        bound_violations,
        decay_fit,
        equivalence,
        alpha,
        notes,
    }
}
