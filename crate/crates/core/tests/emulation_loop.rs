use active_emu::acquisition::{acquisition_value, AcquisitionVariant};
use active_emu::emulation::{baseline_run, run, run_strategy, InitialDesign, LoopConfig, Strategy};
use active_emu::harness::ExperimentConfig;
use active_emu::samplers::grid_design;
use active_emu::simulators::{Simulator, SimulatorSpec};
use active_emu::{Bounds, Error};

fn toy1d() -> (LoopConfig, Simulator) {
    let mut c = ExperimentConfig::toy1d().emulation;
    c.seed = 3;
    (c, Simulator::from_spec(&SimulatorSpec::ToyLog1d {}).unwrap())
}

#[test]
fn first_point_maximizes_the_acquisition() {
    let (mut cfg, sim) = toy1d();
    cfg.budget = 5;
    let mut first_model = None;
    let r = run_strategy(Strategy::Amogape(cfg.variant), &cfg, &sim, &mut |o| {
        if first_model.is_none() {
            first_model = Some(o.model.clone());
        }
    })
    .unwrap();
    let model = first_model.unwrap();
    let spec = cfg.acquisition(cfg.variant);
    let chosen = r.trace[0].point.clone().unwrap();
    let a_chosen = acquisition_value(&spec, &model, &chosen, 1).unwrap();
    let grid_best = (0..=20_000)
        .map(|i| 0.1 + 9.9 * i as f64 / 20_000.0)
        .map(|x| acquisition_value(&spec, &model, &[x], 1).unwrap())
        .fold(0.0, f64::max);
    assert!(a_chosen >= grid_best * (1.0 - 1e-6), "{a_chosen} < {grid_best}");
    for x in [0.1, 3.4, 6.7, 10.0] {
        assert!((chosen[0] - x).abs() > 1e-6);
    }
}

#[test]
fn chosen_points_never_repeat_nodes() {
    let (cfg, sim) = toy1d();
    let r = run(&cfg, &sim).unwrap();
    let xs: Vec<f64> = (0..r.dataset.len()).map(|i| r.dataset.input(i)[0]).collect();
    for (i, a) in xs.iter().enumerate() {
        for b in &xs[i + 1..] {
            assert!(((a - b) / 9.9).abs() > 1e-12);
        }
    }
    assert!(r.trace.iter().all(|e| e.beta.is_some() && e.log_acquisition.is_some()));
}

#[test]
fn grid_baseline_replaces_its_nodes() {
    let (cfg, sim) = toy1d();
    let mut sets: Vec<Vec<f64>> = Vec::new();
    baseline_run(Strategy::Grid, &cfg, &sim)
        .map(|_| ())
        .unwrap();
    let sim2 = Simulator::from_spec(&SimulatorSpec::ToyLog1d {}).unwrap();
    run_strategy(Strategy::Grid, &cfg, &sim2, &mut |o| {
        sets.push((0..o.dataset.len()).map(|i| o.dataset.input(i)[0]).collect());
    })
    .unwrap();
    let b = Bounds::cube(0.1, 10.0, 1).unwrap();
    for s in &sets {
        let lattice: Vec<f64> = grid_design(&b, s.len()).unwrap().into_iter().map(|p| p[0]).collect();
        assert_eq!(s, &lattice);
    }
    // interior nodes of the 4-point lattice are gone at 5 points
    assert!(!sets[1].contains(&3.4) && !sets[1].contains(&6.7));
}

#[test]
fn random_baseline_stays_in_the_box() {
    let (cfg, sim) = toy1d();
    let r = baseline_run(Strategy::Random, &cfg, &sim).unwrap();
    for e in &r.trace {
        let x = e.point.as_ref().unwrap()[0];
        assert!((0.1..=10.0).contains(&x));
    }
    assert!(matches!(
        baseline_run(Strategy::Amogape(AcquisitionVariant::SD), &cfg, &sim).unwrap_err().error,
        Error::InvalidArgument(_)
    ));
}

#[test]
fn simulator_failure_keeps_the_partial_run() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("flaky.py");
    std::fs::write(
        &script,
        r#"
import sys, json, math
for n, line in enumerate(sys.stdin):
    if n == 6:
        sys.exit(1)
    r = json.loads(line)
    x = r["x"][0]
    print(json.dumps({"id": r["id"], "y": [math.log(x), 0.5 * math.log(3 * x)]}), flush=True)
"#,
    )
    .unwrap();
    let sim = Simulator::from_spec(&SimulatorSpec::External {
        command: vec!["python3".into(), script.to_string_lossy().into_owned()],
        bounds: Bounds::cube(0.1, 10.0, 1).unwrap(),
        output_dim: 2,
        timeout_secs: 30.0,
    })
    .unwrap();
    let (cfg, _) = toy1d();
    let failure = run(&cfg, &sim).unwrap_err();
    assert!(failure.error.is_simulator_failure());
    assert_eq!(failure.dataset.as_ref().unwrap().len(), 6);
    assert_eq!(failure.trace.len(), 2);
    assert!(failure.model.is_some());
}

#[test]
fn two_dimensional_prior_run() {
    let mut c = ExperimentConfig::fixture().emulation;
    c.initial = InitialDesign::Prior { m0: 10 };
    c.budget = 14;
    let sim = Simulator::from_spec(&ExperimentConfig::fixture().simulator).unwrap();
    let r = run(&c, &sim).unwrap();
    assert_eq!(r.dataset.len(), 14);
    assert_eq!(r.model.output_dim(), 9);
    assert!(r.trace.iter().all(|e| e.beta == Some(1.0)));
}
