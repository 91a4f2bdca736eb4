use std::path::PathBuf;

use delaywave::config::Config;
use delaywave::harness::{compare_backends, convergence, simulate_config, ConvergenceMode};
use delaywave::model::SpaceFunction;
use delaywave::simulation::RunOptions;
use delaywave::solver::Backend;
use delaywave::Error;

fn load(name: &str) -> Config {
    Config::load(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

fn coarse_reference() -> Config {
    let mut c = load("reference.toml");
    c.solver.target_h = 0.02;
    c.solver.n_rho = 16;
    c.solver.t_final = 10.0;
    c.diagnostics.fit_window = Some([1.0, 9.0]);
    c
}

#[test]
fn report_reproduces_from_its_echoed_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = coarse_reference();
    let first = simulate_config(&config, &RunOptions::default(), Some(dir.path())).unwrap();
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();

    let echoed: serde_json::Value = serde_json::from_str(&json).unwrap();
    let toml_value: toml::Value = serde_json::from_value(echoed["config"].clone()).unwrap();
    let again_cfg = Config::from_value(toml_value).unwrap();
    assert_eq!(again_cfg, config);
    let again = simulate_config(&again_cfg, &RunOptions::default(), None).unwrap();
    assert_eq!(serde_json::to_string_pretty(&again).unwrap(), json.trim_end());
    assert_eq!(first.alpha_hat(), again.alpha_hat());
}

#[test]
fn backend_override_is_echoed() {
    let config = coarse_reference();
    let opts = RunOptions {
        backend: Some(Backend::History),
        ..Default::default()
    };
    let r = simulate_config(&config, &opts, None).unwrap();
    assert_eq!(r.config.solver.backend, Backend::History);
    assert_eq!(r.discretization.backend, Backend::History);
}

#[test]
fn snapshots_follow_stride() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = coarse_reference();
    config.solver.t_final = 1.0;
    config.solver.snapshot_stride = 20;
    let r = simulate_config(&config, &RunOptions::default(), Some(dir.path())).unwrap();
    let n = std::fs::read_dir(dir.path().join("snapshots")).unwrap().count();
    assert_eq!(n, r.discretization.n_steps / 20 + 1);
}

#[test]
fn zero_data_backends_agree_exactly() {
    let mut config = coarse_reference();
    config.initial.u0 = SpaceFunction::Zero;
    let c = compare_backends(&config).unwrap();
    assert_eq!(c.field_difference, 0.0);
    assert_eq!(c.energy_difference, 0.0);
}

#[test]
fn degenerate_levels_are_flagged() {
    let mut config = load("damped_convergence.toml");
    assert!(matches!(convergence(&config, 2), Err(Error::Usage(_))));
    config.initial.u0 = SpaceFunction::Zero;
    config.solver.t_final = 0.5;
    let r = convergence(&config, 3).unwrap();
    assert_eq!(r.mode, ConvergenceMode::SelfConvergence);
    assert!(r.levels.iter().all(|l| l.error == Some(0.0)));
    assert!(r.observed_order.is_none());
    assert!(r.flagged.is_some());
}
