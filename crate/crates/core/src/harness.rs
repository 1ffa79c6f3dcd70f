//! Multi-run comparisons of node selection strategies: RMSE-versus-node-count curves,
//! averaged over independent runs, plus kernel density maps of final node sets.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::acquisition::{AcquisitionVariant, DiversityVariance, TemperingSchedule};
use crate::emulation::{derive_seed, run_strategy, InitialDesign, LoopConfig, Strategy};
use crate::error::{Error, Result};
use crate::gp::{HyperConfig, HyperStrategy, NuggetPolicy};
use crate::multi_output::MultiGpModel;
use crate::optimize::{AscentConfig, OptimizerConfig, OptimizerStrategy};
use crate::prior::{InputPrior, TruncatedGaussian};
use crate::samplers::sample_truncated_gaussian;
use crate::simulators::{Simulator, SimulatorSpec};
use crate::space::Bounds;

/// `sqrt(mean_i mean_p (y_pi - yhat_pi)^2)` over already computed predictions.
pub fn rmse(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::invalid("RMSE needs a nonempty test set"));
    }
    if predictions.len() != targets.len() {
        return Err(Error::invalid("prediction and target counts differ"));
    }
    let mut total = 0.0;
    for (p, y) in predictions.iter().zip(targets) {
        if p.len() != y.len() || y.is_empty() {
            return Err(Error::invalid("prediction and target output counts differ"));
        }
        let sq: f64 = p.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        total += sq / y.len() as f64;
    }
    Ok((total / targets.len() as f64).sqrt())
}

/// Multi-output RMSE of an emulator over a test set.
pub fn multi_output_rmse(model: &MultiGpModel, test_inputs: &[Vec<f64>], test_outputs: &[Vec<f64>]) -> Result<f64> {
    if test_inputs.len() != test_outputs.len() {
        return Err(Error::invalid("test inputs and outputs differ in length"));
    }
    if test_inputs.iter().any(|x| x.len() != model.input_dim()) {
        return Err(Error::invalid("test input dimension does not match the emulator"));
    }
    if test_outputs.iter().any(|y| y.len() != model.output_dim()) {
        return Err(Error::invalid("test output dimension does not match the emulator"));
    }
    let predictions: Vec<Vec<f64>> = test_inputs.iter().map(|x| model.predict_means(x)).collect();
    rmse(&predictions, test_outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestSet {
    /// Every axis stepped from its lower bound by `step` while inside the box.
    Grid { step: f64 },
    /// Draws from the experiment's input prior.
    Prior { size: usize, seed: u64 },
}

impl TestSet {
    pub fn inputs(&self, bounds: &Bounds, prior: Option<&InputPrior>) -> Result<Vec<Vec<f64>>> {
        match self {
            TestSet::Grid { step } => {
                if !(*step > 0.0 && step.is_finite()) {
                    return Err(Error::Config(format!("test grid step must be positive, got {step}")));
                }
                let axes: Vec<Vec<f64>> = (0..bounds.dim())
                    .map(|d| {
                        let n = (bounds.width(d) / step * (1.0 + 1e-12)).floor() as usize;
                        (0..=n).map(|i| bounds.low(d) + i as f64 * step).collect()
                    })
                    .collect();
                let mut pts = vec![Vec::new()];
                for axis in &axes {
                    pts = pts
                        .into_iter()
                        .flat_map(|p: Vec<f64>| {
                            axis.iter().map(move |v| {
                                let mut q = p.clone();
                                q.push(*v);
                                q
                            })
                        })
                        .collect();
                }
                Ok(pts)
            }
            TestSet::Prior { size, seed } => {
                let prior = prior.ok_or_else(|| Error::Config("a prior test set needs an input prior".into()))?;
                if *size == 0 {
                    return Err(Error::Config("test set must be nonempty".into()));
                }
                Ok(sample_truncated_gaussian(prior, *size, *seed))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySettings {
    /// Kernel bandwidth as a fraction of each box width.
    pub bandwidth: f64,
    /// Grid cells per axis.
    pub cells: usize,
}

impl Default for DensitySettings {
    fn default() -> Self {
        Self {
            bandwidth: 0.05,
            cells: 50,
        }
    }
}

fn default_eval_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub simulator: SimulatorSpec,
    pub strategies: Vec<Strategy>,
    pub runs: usize,
    /// Base seed; run `r` uses a seed derived from it and `r`, shared by all strategies.
    pub seed: u64,
    pub test_set: TestSet,
    /// Settings of every run; its own seed is replaced by the per-run seed.
    pub emulation: LoopConfig,
    /// Record RMSE every this many nodes (the final node count is always recorded).
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    /// Density maps of the final nodes, written for two-dimensional inputs.
    #[serde(default)]
    pub density: Option<DensitySettings>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Config("at least one strategy is required".into()));
        }
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if let Some(d) = &self.density {
            if !(d.bandwidth > 0.0) || d.cells == 0 {
                return Err(Error::Config("density needs a positive bandwidth and cell count".into()));
            }
        }
        Ok(())
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        derive_seed(self.seed, &[run as u64])
    }

    /// One-dimensional log toy: four fixed start nodes, 20 added, 50 runs.
    pub fn toy1d() -> Self {
        Self {
            simulator: SimulatorSpec::ToyLog1d {},
            strategies: vec![
                Strategy::Amogape(AcquisitionVariant::PDxPG),
                Strategy::Random,
                Strategy::Sobol,
                Strategy::SeqLhs,
                Strategy::Grid,
                Strategy::Lhs,
            ],
            runs: 50,
            seed: 2024,
            test_set: TestSet::Grid { step: 0.01 },
            emulation: LoopConfig {
                initial: InitialDesign::Points {
                    points: vec![vec![0.1], vec![3.4], vec![6.7], vec![10.0]],
                },
                budget: 24,
                convergence: None,
                variant: AcquisitionVariant::PDxPG,
                tempering: TemperingSchedule::OneMinusInverseT,
                diversity_variance: DiversityVariance::NoiseFree,
                prior: None,
                prior_weighting: true,
                optimizer: OptimizerConfig {
                    n_random: Some(100),
                    ..OptimizerConfig::default()
                },
                hyper: toy_hyper(0.02),
                seed: 0,
            },
            eval_every: 1,
            density: None,
        }
    }

    /// Two-dimensional log toy: 5x5 start lattice, 30 added, 25 runs.
    pub fn toy2d() -> Self {
        let mut c = Self::toy1d();
        c.simulator = SimulatorSpec::ToyLog2d {};
        c.strategies = vec![
            Strategy::Amogape(AcquisitionVariant::PDxPG),
            Strategy::Random,
            Strategy::Sobol,
            Strategy::SeqLhs,
            Strategy::Grid,
            Strategy::Lhs,
        ];
        c.runs = 25;
        c.test_set = TestSet::Grid { step: 0.3 };
        c.emulation.initial = InitialDesign::Grid { m0: 25 };
        c.emulation.budget = 55;
        c.density = Some(DensitySettings {
            bandwidth: 0.05,
            cells: 40,
        });
        c
    }

    /// Nine-band fixture over (Chl, LAI) with truncated Gaussian priors and beta = 1.
    pub fn fixture() -> Self {
        let prior = InputPrior::new(vec![
            TruncatedGaussian::new(45.0, 30.0, 20.0, 90.0).expect("valid prior"),
            TruncatedGaussian::new(3.5, 4.5, 0.0, 10.0).expect("valid prior"),
        ])
        .expect("valid prior");
        Self {
            simulator: SimulatorSpec::Fixture9band {
                input_dim: 2,
                fixture: None,
            },
            strategies: vec![
                Strategy::Amogape(AcquisitionVariant::SD),
                Strategy::Amogape(AcquisitionVariant::SDxSG),
                Strategy::Random,
            ],
            runs: 10,
            seed: 2024,
            test_set: TestSet::Prior { size: 2000, seed: 99 },
            emulation: LoopConfig {
                initial: InitialDesign::Prior { m0: 30 },
                budget: 130,
                convergence: None,
                variant: AcquisitionVariant::SDxSG,
                tempering: TemperingSchedule::Constant { beta: 1.0 },
                diversity_variance: DiversityVariance::NoiseFree,
                prior: Some(prior),
                prior_weighting: true,
                optimizer: OptimizerConfig::default(),
                hyper: toy_hyper(1e-6),
                seed: 0,
            },
            eval_every: 10,
            density: Some(DensitySettings::default()),
        }
    }
}

fn toy_hyper(nugget: f64) -> HyperConfig {
    HyperConfig {
        strategy: HyperStrategy::MarginalLikelihood {
            optimizer: OptimizerConfig {
                strategy: OptimizerStrategy::RandomThenAscent,
                n_random: Some(20),
                ascent: AscentConfig::default(),
                ..OptimizerConfig::default()
            },
        },
        nugget: NuggetPolicy::Fixed(nugget),
    }
}

/// One RMSE measurement of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub nodes: usize,
    pub rmse: f64,
    pub evaluations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub strategy: Strategy,
    pub run: usize,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    /// Final node inputs.
    pub nodes: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunFailureRecord {
    pub strategy: Strategy,
    pub run: usize,
    pub seed: u64,
    pub message: String,
    pub simulator_failure: bool,
}

/// Mean and standard error over runs at one node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub strategy: Strategy,
    pub m: usize,
    pub rmse_mean: f64,
    pub rmse_stderr: f64,
    /// Mean cumulative simulator evaluations.
    pub evals_used: f64,
    pub runs: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailureRecord>,
    pub bounds: Bounds,
}

impl ExperimentResult {
    pub fn row(&self, strategy: Strategy, m: usize) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.strategy == strategy && r.m == m)
    }

    pub fn write_results_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "strategy,m,rmse_mean,rmse_stderr,evals_used")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{:?},{:?},{}",
                r.strategy, r.m, r.rmse_mean, r.rmse_stderr, r.evals_used
            )?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_failures_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "strategy,run,seed,simulator_failure,message")?;
        for f in &self.failures {
            let msg = f.message.replace('"', "\"\"");
            writeln!(w, "{},{},{},{},\"{msg}\"", f.strategy, f.run, f.seed, f.simulator_failure)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Pooled density maps of the final nodes, one per strategy. Empty unless D = 2.
    pub fn density_maps(&self, settings: &DensitySettings) -> Result<Vec<(Strategy, DensityGrid)>> {
        if self.bounds.dim() != 2 {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for s in strategies_in_order(&self.runs) {
            let nodes: Vec<Vec<f64>> = self
                .runs
                .iter()
                .filter(|r| r.strategy == s)
                .flat_map(|r| r.nodes.iter().cloned())
                .collect();
            out.push((s, density_report(&nodes, &self.bounds, settings.bandwidth, settings.cells)?));
        }
        Ok(out)
    }

    /// Writes `results.csv`, `failures.csv` and, for D = 2, `density_<strategy>.csv`.
    pub fn write_all(&self, dir: &Path, density: Option<&DensitySettings>) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = vec![dir.join("results.csv"), dir.join("failures.csv")];
        self.write_results_csv(&written[0])?;
        self.write_failures_csv(&written[1])?;
        if let Some(settings) = density {
            for (s, grid) in self.density_maps(settings)? {
                let name = s.to_string().replace(':', "_");
                let path = dir.join(format!("density_{name}.csv"));
                grid.write_csv(&path)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

fn strategies_in_order(runs: &[RunRecord]) -> Vec<Strategy> {
    let mut seen = Vec::new();
    for r in runs {
        if !seen.contains(&r.strategy) {
            seen.push(r.strategy);
        }
    }
    seen
}

/// Runs every strategy `runs` times. Runs execute in parallel; the merge order is
/// (strategy as configured, run index), so results do not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let probe = Simulator::from_spec(&config.simulator)?;
    let bounds = probe.bounds().clone();
    config.emulation.validate(probe.input_dim())?;
    let test_inputs = config.test_set.inputs(&bounds, config.emulation.prior.as_ref())?;
    let test_outputs: Vec<Vec<f64>> = test_inputs
        .iter()
        .map(|x| probe.evaluate(x))
        .collect::<Result<_>>()?;
    drop(probe);

    let jobs: Vec<(Strategy, usize)> = config
        .strategies
        .iter()
        .flat_map(|s| (0..config.runs).map(move |r| (*s, r)))
        .collect();
    let outcomes: Vec<std::result::Result<RunRecord, RunFailureRecord>> = jobs
        .par_iter()
        .map(|&(strategy, run)| one_run(config, strategy, run, &test_inputs, &test_outputs))
        .collect();

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => runs.push(r),
            Err(f) => {
                log::warn!("{} run {} failed: {}", f.strategy, f.run, f.message);
                failures.push(f);
            }
        }
    }
    let rows = aggregate(&config.strategies, &runs);
    Ok(ExperimentResult {
        rows,
        runs,
        failures,
        bounds,
    })
}

fn one_run(
    config: &ExperimentConfig,
    strategy: Strategy,
    run: usize,
    test_inputs: &[Vec<f64>],
    test_outputs: &[Vec<f64>],
) -> std::result::Result<RunRecord, RunFailureRecord> {
    let seed = config.run_seed(run);
    let failure = |e: &dyn std::fmt::Display, sim_fail: bool| RunFailureRecord {
        strategy,
        run,
        seed,
        message: e.to_string(),
        simulator_failure: sim_fail,
    };
    let sim = Simulator::from_spec(&config.simulator).map_err(|e| failure(&e, e.is_simulator_failure()))?;
    let mut loop_config = config.emulation.clone();
    loop_config.seed = seed;
    let m0 = loop_config.m0();
    let budget = loop_config.budget;
    let mut curve = Vec::new();
    let mut rmse_error = None;
    let result = run_strategy(strategy, &loop_config, &sim, &mut |o| {
        let due = o.nodes >= m0 && ((o.nodes - m0) % config.eval_every == 0 || o.nodes == budget);
        if !due || rmse_error.is_some() {
            return;
        }
        match multi_output_rmse(o.model, test_inputs, test_outputs) {
            Ok(rmse) => curve.push(CurvePoint {
                nodes: o.nodes,
                rmse,
                evaluations: o.evaluations,
            }),
            Err(e) => rmse_error = Some(e),
        }
    });
    if let Some(e) = rmse_error {
        return Err(failure(&e, false));
    }
    match result {
        Ok(r) => Ok(RunRecord {
            strategy,
            run,
            seed,
            curve,
            nodes: (0..r.dataset.len()).map(|i| r.dataset.input(i).to_vec()).collect(),
        }),
        Err(f) => Err(failure(&f, f.error.is_simulator_failure())),
    }
}

fn aggregate(strategies: &[Strategy], runs: &[RunRecord]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &s in strategies {
        let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.strategy == s).collect();
        let mut ms: Vec<usize> = mine.iter().flat_map(|r| r.curve.iter().map(|c| c.nodes)).collect();
        ms.sort_unstable();
        ms.dedup();
        for m in ms {
            let points: Vec<&CurvePoint> = mine
                .iter()
                .filter_map(|r| r.curve.iter().find(|c| c.nodes == m))
                .collect();
            let n = points.len() as f64;
            let mean = points.iter().map(|c| c.rmse).sum::<f64>() / n;
            let stderr = if points.len() > 1 {
                let var = points.iter().map(|c| (c.rmse - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            rows.push(ResultRow {
                strategy: s,
                m,
                rmse_mean: mean,
                rmse_stderr: stderr,
                evals_used: points.iter().map(|c| c.evaluations as f64).sum::<f64>() / n,
                runs: points.len(),
            });
        }
    }
    rows
}

/// `sqrt(se_a^2 + se_b^2)`, the standard error of a difference of two means.
pub fn pooled_stderr(a: &ResultRow, b: &ResultRow) -> f64 {
    a.rmse_stderr.hypot(b.rmse_stderr)
}

/// Gaussian kernel density on a regular grid of cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `values[i][j]` at `(x[i], y[j])`; integrates to one over the box.
    pub values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x1,x2,density")?;
        for (i, x) in self.x.iter().enumerate() {
            for (j, y) in self.y.iter().enumerate() {
                writeln!(w, "{x:?},{y:?},{:?}", self.values[i][j])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Kernel density of two-dimensional nodes. The estimate at each cell is divided by
/// the kernel mass that falls inside the box, which removes the edge deficit.
pub fn density_report(nodes: &[Vec<f64>], bounds: &Bounds, bandwidth: f64, cells: usize) -> Result<DensityGrid> {
    if bounds.dim() != 2 {
        return Err(Error::UnsupportedDimension(bounds.dim()));
    }
    if nodes.is_empty() || !(bandwidth > 0.0) || cells == 0 {
        return Err(Error::invalid("density needs nodes, a positive bandwidth and cells"));
    }
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let units: Vec<Vec<f64>> = nodes.iter().map(|x| bounds.normalize(x)).collect();
    let centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) / cells as f64).collect();
    let inside = |c: f64| n.cdf((1.0 - c) / bandwidth) - n.cdf(-c / bandwidth);
    let mut values = vec![vec![0.0; cells]; cells];
    for (i, cx) in centers.iter().enumerate() {
        for (j, cy) in centers.iter().enumerate() {
            let raw: f64 = units
                .iter()
                .map(|u| n.pdf((cx - u[0]) / bandwidth) * n.pdf((cy - u[1]) / bandwidth))
                .sum();
            values[i][j] = raw / (inside(*cx) * inside(*cy));
        }
    }
    let cell_area = bounds.width(0) * bounds.width(1) / (cells * cells) as f64;
    let total: f64 = values.iter().flatten().sum::<f64>() * cell_area;
    if total > 0.0 {
        for v in values.iter_mut().flatten() {
            *v /= total;
        }
    }
    Ok(DensityGrid {
        x: centers.iter().map(|c| bounds.low(0) + c * bounds.width(0)).collect(),
        y: centers.iter().map(|c| bounds.low(1) + c * bounds.width(1)).collect(),
        values,
    })
}
