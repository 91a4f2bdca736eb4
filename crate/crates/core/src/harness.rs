//! Orchestration behind the command-line verbs. Every number in a report
//! comes from the library modules; this layer only sequences runs and writes
//! artifacts.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::{set_scalar, Config};
use crate::diagnostics::{DecayFit, Diagnostics, DiagnosticsRecord};
use crate::discretization::{SpatialGrid, StateSnapshot};
use crate::error::{Error, Result};
use crate::lyapunov::{AlphaPrediction, ConstantSet, Equivalence};
use crate::model::{Certificate, Mu1Family, Mu2Family, SpaceFunction};
use crate::simulation::{analyze, certify_config, plan, run, Analysis, RunOptions, RunOutput};
use crate::solver::{Backend, Solver, SolverConfig};

#[derive(Debug, Clone, Serialize)]
pub struct Discretization {
    pub backend: Backend,
    pub dt: f64,
    pub n_steps: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub d_rho: f64,
    pub spatial_nodes: usize,
    pub rho_nodes: usize,
}

impl Discretization {
    fn of(out: &RunOutput) -> Self {
        Self {
            backend: out.solver.backend,
            dt: out.solver.dt,
            n_steps: out.solver.n_steps,
            h_min: out.grid.h_min(),
            h_max: out.grid.h_max(),
            d_rho: out.rho.d_rho,
            spatial_nodes: out.grid.omega_len() + out.grid.middle.len() - 2,
            rho_nodes: out.rho.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LyapunovSummary {
    pub constants: Option<ConstantSet>,
    pub equivalence: Option<Equivalence>,
    pub prediction: Option<AlphaPrediction>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Residuals {
    pub tol_scheme: f64,
    pub dissipation_max: Option<f64>,
    pub j_inequality_max: Option<f64>,
    pub max_energy_increase: f64,
    pub bound_violations: usize,
    /// False when the certificate failed and the inequalities were not asserted.
    pub asserted: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnergySummary {
    pub initial: f64,
    pub final_value: f64,
    pub relative_change: f64,
}

/// Self-contained summary of one run; contains no wall-clock data, so
/// re-running the echoed config reproduces it exactly.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: Config,
    pub certificate: Certificate,
    pub discretization: Discretization,
    pub energy: EnergySummary,
    pub decay_fit: Option<DecayFit>,
    pub lyapunov: LyapunovSummary,
    pub residuals: Residuals,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(config: &Config, out: &RunOutput, a: &Analysis) -> Self {
        let e0 = out.e0();
        let e_t = out.records.last().map_or(0.0, |r| r.energy.total);
        let mut config = config.clone();
        config.solver.backend = out.solver.backend;
        Self {
            config,
            certificate: out.certificate.clone(),
            discretization: Discretization::of(out),
            energy: EnergySummary {
                initial: e0,
                final_value: e_t,
                relative_change: if e0 > 0.0 { (e_t - e0) / e0 } else { 0.0 },
            },
            decay_fit: a.decay_fit,
            lyapunov: LyapunovSummary {
                constants: out.constants,
                equivalence: a.equivalence,
                prediction: a.alpha,
            },
            residuals: Residuals {
                tol_scheme: a.tol_scheme,
                dissipation_max: a.dissipation.as_ref().map(|d| d.max),
                j_inequality_max: a.j_inequality.as_ref().map(|d| d.max),
                max_energy_increase: a.max_energy_increase,
                bound_violations: a.bound_violations,
                asserted: a.certified,
            },
            notes: a.notes.clone(),
        }
    }

    pub fn alpha_hat(&self) -> Option<f64> {
        self.decay_fit.map(|f| f.alpha_hat)
    }
}

/// Trajectory columns, in file order.
pub const TRAJECTORY_HEADER: [&str; 12] = [
    "t",
    "E1",
    "E2",
    "Edelay",
    "E",
    "I1",
    "I2",
    "I3",
    "J",
    "L",
    "residual_dissipation",
    "residual_J",
];

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:e}"))
}

/// Writes every `stride`-th record; residuals refer to the step starting at
/// that record and are blank on the last one.
pub fn write_trajectory(path: &Path, records: &[DiagnosticsRecord], a: &Analysis, stride: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    let diss = a.dissipation.as_ref().map(|d| &d.residuals);
    let jres = a.j_inequality.as_ref().map(|d| &d.residuals);
    for (n, r) in records.iter().enumerate().step_by(stride.max(1)) {
        let e = &r.energy;
        let l = &r.lyapunov;
        w.write_record([
            format!("{}", e.t),
            format!("{:e}", e.e1),
            format!("{:e}", e.e2),
            format!("{:e}", e.e_delay),
            format!("{:e}", e.total),
            format!("{:e}", l.i1),
            format!("{:e}", l.i2),
            format!("{:e}", l.i3),
            format!("{:e}", l.j),
            opt(l.l),
            opt(diss.and_then(|d| d.get(n).copied())),
            opt(jres.and_then(|d| d.get(n).copied())),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Run, analyze and (when `out_dir` is given) write `trajectory.csv`,
/// `report.json` and snapshot CSVs.
pub fn simulate_config(config: &Config, opts: &RunOptions, out_dir: Option<&Path>) -> Result<RunReport> {
    let snap_dir = match out_dir {
        Some(dir) if config.solver.snapshot_stride > 0 => {
            let d = dir.join("snapshots");
            std::fs::create_dir_all(&d)?;
            Some(d)
        }
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            None
        }
        None => None,
    };
    let out = run(config, opts, snap_dir.as_deref())?;
    let analysis = analyze(&out, config);
    let report = RunReport::new(config, &out, &analysis);
    if let Some(dir) = out_dir {
        write_trajectory(&dir.join("trajectory.csv"), &out.records, &analysis, config.solver.record_stride)?;
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

pub fn cmd_simulate(config_path: &Path, opts: &RunOptions, out_dir: Option<&Path>) -> Result<RunReport> {
    simulate_config(&Config::load(config_path)?, opts, out_dir)
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub passed: bool,
    pub certificate: Certificate,
    pub constants: Option<ConstantSet>,
}

pub fn cmd_certify(config_path: &Path) -> Result<CertifyReport> {
    let config = Config::load(config_path)?;
    let (certificate, constants) = certify_config(&config)?;
    Ok(CertifyReport {
        passed: certificate.passed(),
        certificate,
        constants,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub value: f64,
    /// `ok`, `uncertified` or the error that stopped the run.
    pub status: String,
    pub certified: Option<bool>,
    pub alpha_hat: Option<f64>,
    pub r_squared: Option<f64>,
    pub alpha_pred: Option<f64>,
    pub max_residual_dissipation: Option<f64>,
    pub max_residual_j: Option<f64>,
    #[serde(skip)]
    pub report: Option<RunReport>,
}

/// Independent runs with `axis` set to each value, executed concurrently.
/// Failed certificates do not stop a sweep when the config is exploratory or
/// the override is set; such rows are marked uncertified.
pub fn cmd_sweep(
    config_path: &Path,
    axis: &str,
    values: &[f64],
    opts: &RunOptions,
    out_dir: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::Usage("sweep needs at least one value".into()));
    }
    let text = std::fs::read_to_string(config_path).map_err(|e| Error::Config(format!("{}: {e}", config_path.display())))?;
    let base: toml::Value = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    Config::from_value(base.clone())?;
    let configs = values
        .iter()
        .map(|&x| {
            let mut v = base.clone();
            set_scalar(&mut v, axis, x)?;
            Ok((x, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<SweepRow> = configs
        .into_par_iter()
        .map(|(value, v)| {
            let outcome = Config::from_value(v).and_then(|c| simulate_config(&c, opts, None));
            sweep_row(value, outcome)
        })
        .collect();

    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("sweep.csv"))?;
        for row in &rows {
            w.serialize(row)?;
        }
        w.flush()?;
        for (i, row) in rows.iter().enumerate() {
            if let Some(r) = &row.report {
                write_json(&dir.join(format!("report_{i:03}.json")), r)?;
            }
        }
    }
    Ok(rows)
}

fn sweep_row(value: f64, outcome: Result<RunReport>) -> SweepRow {
    match outcome {
        Ok(r) => SweepRow {
            value,
            status: if r.certificate.passed() { "ok" } else { "uncertified" }.into(),
            certified: Some(r.certificate.passed()),
            alpha_hat: r.alpha_hat(),
            r_squared: r.decay_fit.map(|f| f.r_squared),
            alpha_pred: r.lyapunov.prediction.map(|p| p.alpha_pred),
            max_residual_dissipation: r.residuals.dissipation_max,
            max_residual_j: r.residuals.j_inequality_max,
            report: Some(r),
        },
        Err(e) => SweepRow {
            value,
            status: e.to_string(),
            certified: matches!(e, Error::Uncertified(_)).then_some(false),
            alpha_hat: None,
            r_squared: None,
            alpha_pred: None,
            max_residual_dissipation: None,
            max_residual_j: None,
            report: None,
        },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub dt: f64,
    pub n_steps: usize,
    /// `sup_t ‖(u, v)_aug - (u, v)_hist‖ / sup_t ‖(u, v)_aug‖` (trapezoidal L²).
    pub field_difference: f64,
    /// `sup_t |E_aug - E_hist| / E_aug(0)`.
    pub energy_difference: f64,
}

fn l2_sq(grid: &SpatialGrid, w_omega: &[f64], w_mid: &[f64], u: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(u.len(), grid.omega_len());
    let a: f64 = u.iter().zip(w_omega).map(|(x, w)| w * x * x).sum();
    let b: f64 = v.iter().zip(w_mid).map(|(x, w)| w * x * x).sum();
    a + b
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Runs both delay backends in lockstep on one grid and time step.
pub fn compare_backends(config: &Config) -> Result<ComparisonReport> {
    let spec = config.problem();
    let (grid, rho, base) = plan(config, None)?;
    let make = |backend| {
        Solver::new(
            &spec,
            grid.clone(),
            rho.clone(),
            SolverConfig { backend, ..base },
        )
    };
    let mut aug = make(Backend::Augmented)?;
    let mut hist = make(Backend::History)?;
    let mut d_aug = Diagnostics::new(&grid, &rho, &spec.geometry);
    let mut d_hist = d_aug.clone();
    let w_omega = grid.omega_weights();
    let w_mid = grid.middle.weights();

    let (mut sup_diff, mut sup_norm, mut sup_e, mut e0) = (0.0f64, 0.0f64, 0.0f64, 0.0);
    for n in 0..=base.n_steps {
        let a: &StateSnapshot = aug.step()?;
        let h: &StateSnapshot = hist.step()?;
        let norm = l2_sq(&grid, &w_omega, &w_mid, &a.u, &a.v).sqrt();
        let dif = l2_sq(&grid, &w_omega, &w_mid, &diff(&a.u, &h.u), &diff(&a.v, &h.v)).sqrt();
        sup_norm = sup_norm.max(norm);
        sup_diff = sup_diff.max(dif);
        let ea = d_aug.record(a, &spec, None).energy.total;
        let eh = d_hist.record(h, &spec, None).energy.total;
        if n == 0 {
            e0 = ea;
        }
        sup_e = sup_e.max((ea - eh).abs());
    }
    let rel = |x: f64, s: f64| if s > 0.0 { x / s } else { 0.0 };
    Ok(ComparisonReport {
        dt: base.dt,
        n_steps: base.n_steps,
        field_difference: rel(sup_diff, sup_norm),
        energy_difference: rel(sup_e, e0),
    })
}

pub fn cmd_compare_backends(config_path: &Path) -> Result<ComparisonReport> {
    compare_backends(&Config::load(config_path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// Errors against the exact standing wave.
    Exact,
    /// Errors against a reference run two halvings finer than the finest level.
    SelfConvergence,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceLevel {
    pub h: f64,
    pub dt: f64,
    pub n_rho: usize,
    /// Error against the exact or the refined reference solution.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub mode: ConvergenceMode,
    pub levels: Vec<ConvergenceLevel>,
    /// `log₂(eₖ / eₖ₊₁)` for consecutive errors.
    pub orders: Vec<f64>,
    /// Self mode only: `log₂(dₖ / dₖ₊₁)` with `dₖ = ‖Uₖ - Uₖ₊₁‖`, which does not
    /// depend on the reference.
    pub richardson_orders: Vec<f64>,
    /// Order from the two finest errors; `None` when undefined.
    pub observed_order: Option<f64>,
    pub flagged: Option<String>,
}

/// Exact solution `A sin(kπx/L3) cos(kπ√a t/L3)` when the problem is the
/// undamped, equal-speed standing wave.
fn standing_wave(config: &Config) -> Option<(f64, f64)> {
    let undamped = matches!(config.weights.mu1, Mu1Family::Constant { value } if value == 0.0)
        && matches!(
            config.weights.mu2,
            Mu2Family::Constant { value: 0.0 } | Mu2Family::Scaled { factor: 0.0 } | Mu2Family::Modulated { factor: 0.0, .. }
        );
    let g = &config.geometry;
    let i = &config.initial;
    match (&i.u0, &i.v0) {
        (SpaceFunction::StandingWave { amplitude, mode }, v0)
            if undamped
                && g.a == g.b
                && v0 == &i.u0
                && i.u1 == SpaceFunction::Zero
                && i.v1 == SpaceFunction::Zero =>
        {
            Some((*amplitude, *mode))
        }
        _ => None,
    }
}

/// Checkpoints shared by every level, as step indices of the coarsest one.
const CHECKPOINTS: usize = 20;

fn checkpoints(n0: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=CHECKPOINTS).map(|i| (i * n0 + CHECKPOINTS / 2) / CHECKPOINTS).collect();
    idx.dedup();
    idx
}

struct LevelResult {
    grid: SpatialGrid,
    /// `(t, u, v)` at the checkpoints.
    states: Vec<(f64, Vec<f64>, Vec<f64>)>,
    level: ConvergenceLevel,
}

fn run_level(config: &Config, k: u32, n0: usize) -> Result<LevelResult> {
    let spec = config.problem();
    let s = &config.solver;
    let scale = 2usize.pow(k);
    let h = s.target_h / scale as f64;
    let n_rho = (s.n_rho - 1) * scale + 1;
    let (grid, rho) = crate::discretization::build_grid(&spec.geometry, h, n_rho)?;
    let n_steps = n0 * scale;
    let cfg = SolverConfig {
        dt: s.t_final / n_steps as f64,
        n_steps,
        backend: s.backend,
    };
    let marks: Vec<usize> = checkpoints(n0).into_iter().map(|j| j * scale).collect();
    let mut solver = Solver::new(&spec, grid.clone(), rho, cfg)?;
    let mut states = Vec::with_capacity(marks.len());
    for n in 0..=n_steps {
        let st = solver.step()?;
        if marks.contains(&n) {
            states.push((st.t, st.u.clone(), st.v.clone()));
        }
    }
    Ok(LevelResult {
        level: ConvergenceLevel {
            h: grid.h_max(),
            dt: cfg.dt,
            n_rho,
            error: None,
        },
        grid,
        states,
    })
}

/// Coarse-node restriction of a field from a grid refined by `m`.
fn restrict(fine: &[f64], m: usize) -> impl Iterator<Item = f64> + '_ {
    fine.iter().step_by(m).copied()
}

/// Halvings between the finest studied level and the self-convergence reference.
const SELF_REFERENCE_GAP: usize = 2;

/// Largest checkpoint L² distance between a level and one refined by `m`.
fn level_distance(coarse: &LevelResult, fine: &LevelResult, m: usize) -> f64 {
    let g = &coarse.grid;
    let (wo, wm) = (g.omega_weights(), g.middle.weights());
    coarse
        .states
        .iter()
        .zip(&fine.states)
        .map(|((_, uc, vc), (_, uf, vf))| {
            let (lf, rf) = fine.grid.split(uf);
            let fine_u: Vec<f64> = restrict(lf, m).chain(restrict(rf, m)).collect();
            let fine_v: Vec<f64> = restrict(vf, m).collect();
            l2_sq(g, &wo, &wm, &diff(uc, &fine_u), &diff(vc, &fine_v)).sqrt()
        })
        .fold(0.0, f64::max)
}

/// Successive halving of (h, dt, Δρ) from the configured base resolution.
/// Errors are the largest L² discrepancy over 20 common checkpoints in time,
/// measured against the exact standing wave when the problem is one and
/// against a much finer run otherwise.
pub fn convergence(config: &Config, levels: usize) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::Usage(format!("convergence needs at least 3 levels, got {levels}")));
    }
    let (_, _, base) = plan(config, None)?;
    let results = (0..levels as u32)
        .into_par_iter()
        .map(|k| run_level(config, k, base.n_steps))
        .collect::<Result<Vec<_>>>()?;

    let l3 = config.geometry.l3;
    let a = config.geometry.a;
    let sup = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let mut richardson_orders = Vec::new();
    let (mode, errors): (ConvergenceMode, Vec<f64>) = match standing_wave(config) {
        Some((amp, mode)) => {
            let k = mode * std::f64::consts::PI / l3;
            let errs = results
                .iter()
                .map(|r| {
                    let g = &r.grid;
                    let (wo, wm) = (g.omega_weights(), g.middle.weights());
                    sup(&mut r.states.iter().map(|(t, u, v)| {
                        let exact = |x: f64| amp * (k * x).sin() * (k * a.sqrt() * t).cos();
                        let eu: Vec<f64> = g.omega_nodes().zip(u).map(|(x, u)| u - exact(x)).collect();
                        let ev: Vec<f64> = g.middle.nodes.iter().zip(v).map(|(x, v)| v - exact(*x)).collect();
                        l2_sq(g, &wo, &wm, &eu, &ev).sqrt()
                    }))
                })
                .collect();
            (ConvergenceMode::Exact, errs)
        }
        None => {
            let reference = run_level(config, (levels + SELF_REFERENCE_GAP - 1) as u32, base.n_steps)?;
            let gap = |k: usize| 2usize.pow((levels + SELF_REFERENCE_GAP - 1 - k) as u32);
            let errs: Vec<f64> = results
                .iter()
                .enumerate()
                .map(|(k, r)| level_distance(r, &reference, gap(k)))
                .collect();
            let diffs: Vec<f64> = results.windows(2).map(|w| level_distance(&w[0], &w[1], 2)).collect();
            richardson_orders = diffs.windows(2).map(|d| (d[0] / d[1]).log2()).collect();
            (ConvergenceMode::SelfConvergence, errs)
        }
    };

    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    let distinct = results.windows(2).all(|w| w[1].grid.h_max() < w[0].grid.h_max());
    let flagged = if !distinct {
        Some("levels do not refine the grid; order undefined".to_string())
    } else if orders.iter().any(|p| !p.is_finite()) {
        Some("zero or non-finite errors; order undefined".to_string())
    } else {
        None
    };
    let observed_order = if flagged.is_none() { orders.last().copied() } else { None };
    let mut out_levels: Vec<ConvergenceLevel> = results.into_iter().map(|r| r.level).collect();
    for (lvl, e) in out_levels.iter_mut().zip(&errors) {
        lvl.error = Some(*e);
    }
    Ok(ConvergenceReport {
        mode,
        levels: out_levels,
        orders,
        richardson_orders,
        observed_order,
        flagged,
    })
}

pub fn cmd_convergence(config_path: &Path, levels: usize) -> Result<ConvergenceReport> {
    convergence(&Config::load(config_path)?, levels)
}
