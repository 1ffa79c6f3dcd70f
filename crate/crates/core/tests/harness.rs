use active_emu::emulation::Strategy;
use active_emu::harness::{run_experiment, ExperimentConfig};

#[test]
fn sequential_curves_decrease_on_average() {
    // below ten nodes each refit of the length scales can move the error either way
    const FROM: usize = 10;
    let mut c = ExperimentConfig::toy1d();
    c.strategies = vec![
        Strategy::Amogape(active_emu::acquisition::AcquisitionVariant::PDxPG),
        Strategy::Random,
        Strategy::Sobol,
        Strategy::SeqLhs,
    ];
    c.runs = 20;
    let r = run_experiment(&c).unwrap();
    for s in &c.strategies {
        let rows: Vec<_> = r.rows.iter().filter(|row| row.strategy == *s && row.m >= FROM).collect();
        for w in rows.windows(2) {
            let se = w[0].rmse_stderr.hypot(w[1].rmse_stderr);
            let rise = w[1].rmse_mean - w[0].rmse_mean;
            assert!(rise < 2.0 * se + 0.01 * w[0].rmse_mean, "{s} at m={}: +{rise:e}", w[1].m);
        }
        let (first, last) = (rows[0].rmse_mean, rows[rows.len() - 1].rmse_mean);
        assert!(last < 0.5 * first, "{s}: {first} -> {last}");
    }
}

#[test]
fn results_are_reproducible_and_written() {
    let mut c = ExperimentConfig::toy1d();
    c.runs = 3;
    c.emulation.budget = 10;
    let dir = tempfile::tempdir().unwrap();
    let a = run_experiment(&c).unwrap();
    let b = run_experiment(&c).unwrap();
    a.write_all(&dir.path().join("a"), None).unwrap();
    b.write_all(&dir.path().join("b"), None).unwrap();
    let ra = std::fs::read_to_string(dir.path().join("a/results.csv")).unwrap();
    let rb = std::fs::read_to_string(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(ra, rb);
    assert!(ra.starts_with("strategy,m,rmse_mean,rmse_stderr,evals_used\n"));
    assert_eq!(ra.lines().count(), 1 + 6 * 7);
    let grid_final = ra.lines().find(|l| l.starts_with("grid,10,")).unwrap();
    assert!(grid_final.ends_with(",55"));
}

#[test]
fn two_dimensional_experiments_write_density_maps() {
    let mut c = ExperimentConfig::toy2d();
    c.runs = 2;
    c.strategies = vec![Strategy::Sobol, Strategy::Random];
    c.emulation.budget = 28;
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&c).unwrap();
    let written = r.write_all(dir.path(), c.density.as_ref()).unwrap();
    assert_eq!(written.len(), 4);
    let text = std::fs::read_to_string(dir.path().join("density_sobol.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 40 * 40);
}
