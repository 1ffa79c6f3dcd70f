//! The active emulation loop: fit, maximize the acquisition, evaluate the simulator,
//! append the node, repeat until the node budget is spent or successive emulators stop
//! changing.
//!
//! Baseline strategies share the same loop but take their next point from a sampler.
//! The non-sequential ones (`grid`, `lhs`) regenerate the whole design at every size
//! and pay for every regenerated node.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionSpec, AcquisitionVariant, DiversityVariance, LogAcquisition, TemperingSchedule};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gp::{HyperConfig, Hyperparameters};
use crate::multi_output::MultiGpModel;
use crate::optimize::{maximize, Objective, OptimizerConfig};
use crate::prior::InputPrior;
use crate::samplers::{grid_design, lhs_design_seeded, sample_truncated_gaussian, Sampler};
use crate::simulators::Simulator;
use crate::sobol::SobolSequence;
use crate::space::Bounds;

/// Acquisition re-runs with a bumped seed before falling back to uniform probes.
pub const DUPLICATE_RETRIES: usize = 5;
/// Size of the fixed low-discrepancy probe set used by the convergence test.
pub const CONVERGENCE_PROBES: usize = 1000;

/// SplitMix64 finalizer over a base seed and a path of stream indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut z = base;
    for &p in path {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

// stream tags for derive_seed
const STREAM_INITIAL: u64 = 1;
const STREAM_HYPER: u64 = 2;
const STREAM_ACQUISITION: u64 = 3;
const STREAM_SAMPLER: u64 = 4;
const STREAM_FALLBACK: u64 = 5;

/// How the next node is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    /// Acquisition maximization with the given variant.
    Amogape(AcquisitionVariant),
    /// Uniform draws, or prior draws when an input prior is configured.
    Random,
    Sobol,
    /// One-shot LHS regenerated at every size.
    Lhs,
    /// A pre-generated LHS pool emitted without replacement.
    SeqLhs,
    /// The regular lattice regenerated at every size.
    Grid,
}

impl Strategy {
    /// Whether earlier nodes are kept from one step to the next.
    pub fn is_sequential(self) -> bool {
        !matches!(self, Strategy::Lhs | Strategy::Grid)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Amogape(v) => write!(f, "amogape:{}", v.name()),
            Strategy::Random => f.write_str("random"),
            Strategy::Sobol => f.write_str("sobol"),
            Strategy::Lhs => f.write_str("lhs"),
            Strategy::SeqLhs => f.write_str("seq-lhs"),
            Strategy::Grid => f.write_str("grid"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(v) = s.strip_prefix("amogape:") {
            return Ok(Strategy::Amogape(v.parse()?));
        }
        match s {
            "random" => Ok(Strategy::Random),
            "sobol" => Ok(Strategy::Sobol),
            "lhs" => Ok(Strategy::Lhs),
            "seq-lhs" => Ok(Strategy::SeqLhs),
            "grid" => Ok(Strategy::Grid),
            _ => Err(Error::Config(format!(
                "unknown strategy `{s}` (expected random, sobol, lhs, seq-lhs, grid or amogape:<variant>)"
            ))),
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

/// The nodes the loop starts from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialDesign {
    Points { points: Vec<Vec<f64>> },
    Grid { m0: usize },
    Lhs { m0: usize },
    Sobol { m0: usize },
    Uniform { m0: usize },
    /// Draws from the configured input prior.
    Prior { m0: usize },
}

impl InitialDesign {
    pub fn size(&self) -> usize {
        match self {
            InitialDesign::Points { points } => points.len(),
            InitialDesign::Grid { m0 }
            | InitialDesign::Lhs { m0 }
            | InitialDesign::Sobol { m0 }
            | InitialDesign::Uniform { m0 }
            | InitialDesign::Prior { m0 } => *m0,
        }
    }

    /// Generates the design; deterministic in `seed`.
    pub fn points(&self, bounds: &Bounds, prior: Option<&InputPrior>, seed: u64) -> Result<Vec<Vec<f64>>> {
        let pts = match self {
            InitialDesign::Points { points } => {
                for p in points {
                    if p.len() != bounds.dim() {
                        return Err(Error::Config(format!(
                            "initial point {p:?} does not have {} coordinates",
                            bounds.dim()
                        )));
                    }
                    if !bounds.contains(p) {
                        return Err(Error::Config(format!("initial point {p:?} lies outside the bounds")));
                    }
                }
                points.clone()
            }
            InitialDesign::Grid { m0 } => grid_design(bounds, *m0)?,
            InitialDesign::Lhs { m0 } => lhs_design_seeded(bounds, *m0, seed)?,
            InitialDesign::Sobol { m0 } => {
                let mut s = Sampler::sobol(bounds.clone())?;
                (0..*m0).map(|_| s.next_point()).collect::<Result<_>>()?
            }
            InitialDesign::Uniform { m0 } => {
                let mut s = Sampler::uniform(bounds.clone(), seed);
                (0..*m0).map(|_| s.next_point()).collect::<Result<_>>()?
            }
            InitialDesign::Prior { m0 } => {
                let prior = prior.ok_or_else(|| {
                    Error::Config("a prior initial design needs an input prior".into())
                })?;
                sample_truncated_gaussian(prior, *m0, seed)
            }
        };
        Ok(pts)
    }
}

fn default_variant() -> AcquisitionVariant {
    AcquisitionVariant::PDxPG
}

fn default_true() -> bool {
    true
}

/// Settings of one emulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    pub initial: InitialDesign,
    /// Node budget `M`.
    pub budget: usize,
    /// Stop once the RMS change of the predictive means drops to this value.
    #[serde(default)]
    pub convergence: Option<f64>,
    #[serde(default = "default_variant")]
    pub variant: AcquisitionVariant,
    #[serde(default)]
    pub tempering: TemperingSchedule,
    #[serde(default)]
    pub diversity_variance: DiversityVariance,
    /// Input prior used by the `random` strategy and the prior initial design.
    #[serde(default)]
    pub prior: Option<InputPrior>,
    /// Multiply the acquisition by the prior density when a prior is set.
    #[serde(default = "default_true")]
    pub prior_weighting: bool,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub hyper: HyperConfig,
    #[serde(default)]
    pub seed: u64,
}

impl LoopConfig {
    pub fn m0(&self) -> usize {
        self.initial.size()
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        let m0 = self.m0();
        if m0 < 1 {
            return Err(Error::Config("the initial design needs at least one node".into()));
        }
        if self.budget <= m0 {
            return Err(Error::Config(format!(
                "budget {} must exceed the initial design size {m0}",
                self.budget
            )));
        }
        if let Some(eps) = self.convergence {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::Config(format!("convergence threshold must be positive, got {eps}")));
            }
        }
        if let Some(p) = &self.prior {
            if p.dim() != input_dim {
                return Err(Error::Config(format!(
                    "input prior has {} dimensions, simulator has {input_dim}",
                    p.dim()
                )));
            }
        }
        self.tempering.validate().map_err(config_error)?;
        self.optimizer.validate().map_err(config_error)?;
        self.hyper.validate().map_err(config_error)?;
        Ok(())
    }

    /// The acquisition used for `variant`.
    pub fn acquisition(&self, variant: AcquisitionVariant) -> AcquisitionSpec {
        let mut spec = AcquisitionSpec::new(variant, self.tempering);
        spec.diversity_variance = self.diversity_variance;
        if self.prior_weighting {
            spec.prior = self.prior.clone();
        }
        spec
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

/// A single run as read from a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub simulator: crate::simulators::SimulatorSpec,
    /// Defaults to `amogape:<emulation.variant>`.
    #[serde(default)]
    pub strategy: Option<Strategy>,
    pub emulation: LoopConfig,
}

impl RunConfig {
    pub fn strategy(&self) -> Strategy {
        self.strategy.unwrap_or(Strategy::Amogape(self.emulation.variant))
    }

    /// Builds the simulator and runs the configured strategy.
    pub fn execute(&self) -> RunResult {
        let sim = Simulator::from_spec(&self.simulator)?;
        run_strategy(self.strategy(), &self.emulation, &sim, &mut |_| {})
    }
}

/// One loop iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// Iteration index `t`, starting at 1.
    pub iteration: usize,
    /// Node count after the iteration.
    pub nodes: usize,
    /// Cumulative simulator evaluations.
    pub evaluations: u64,
    /// The added node; absent for replace-all strategies.
    pub point: Option<Vec<f64>>,
    pub log_acquisition: Option<f64>,
    pub beta: Option<f64>,
    /// Maximizer runs rejected for landing on an existing node.
    pub duplicate_retries: usize,
    /// Hyperparameters of the emulator the point was chosen with.
    pub hyperparameters: Vec<Hyperparameters>,
    /// RMS change of the predictive means against the previous emulator.
    pub mean_change: Option<f64>,
    pub wall_seconds: f64,
}

/// What the observer sees after every fit.
pub struct Observation<'a> {
    pub nodes: usize,
    pub evaluations: u64,
    pub dataset: &'a Dataset,
    pub model: &'a MultiGpModel,
}

#[derive(Debug, Clone)]
pub struct EmulationResult {
    pub strategy: Strategy,
    /// The final node set (the lookup table).
    pub dataset: Dataset,
    pub model: MultiGpModel,
    pub trace: Vec<TraceEntry>,
    pub evaluations: u64,
    /// Whether the convergence test ended the run before the budget.
    pub converged: bool,
}

impl EmulationResult {
    pub fn write_lut_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.dataset.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_trace_ndjson(&self, path: &Path) -> Result<()> {
        write_trace(&self.trace, path)
    }
}

pub fn write_trace(trace: &[TraceEntry], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for e in trace {
        serde_json::to_writer(&mut w, e)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

/// An aborted run with whatever it had produced.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    /// Nodes evaluated before the failure, if the run got that far.
    pub dataset: Option<Dataset>,
    /// The last successfully fitted emulator.
    pub model: Option<MultiGpModel>,
    pub trace: Vec<TraceEntry>,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (after {} iterations)", self.error, self.trace.len())
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self {
            error,
            dataset: None,
            model: None,
            trace: Vec::new(),
        }
    }
}

pub type RunResult = std::result::Result<EmulationResult, RunFailure>;

/// Active emulation with the configured acquisition variant.
pub fn run(config: &LoopConfig, sim: &Simulator) -> RunResult {
    run_strategy(Strategy::Amogape(config.variant), config, sim, &mut |_| {})
}

/// A baseline strategy through the same loop.
pub fn baseline_run(strategy: Strategy, config: &LoopConfig, sim: &Simulator) -> RunResult {
    if matches!(strategy, Strategy::Amogape(_)) {
        return Err(Error::invalid("baseline_run expects a sampler strategy").into());
    }
    run_strategy(strategy, config, sim, &mut |_| {})
}

/// Runs any strategy, calling `observe` after every emulator fit.
pub fn run_strategy(
    strategy: Strategy,
    config: &LoopConfig,
    sim: &Simulator,
    observe: &mut dyn FnMut(&Observation<'_>),
) -> RunResult {
    config.validate(sim.input_dim())?;
    if strategy.is_sequential() {
        Sequential::new(strategy, config, sim)?.run(observe)
    } else {
        replace_all(strategy, config, sim, observe)
    }
}

fn fit(dataset: &Dataset, config: &LoopConfig, iteration: usize) -> Result<MultiGpModel> {
    MultiGpModel::fit_all(
        dataset,
        &config.hyper,
        derive_seed(config.seed, &[STREAM_HYPER, iteration as u64]),
    )
}

fn evaluate_design(sim: &Simulator, points: &[Vec<f64>], output_dim: usize) -> Result<Dataset> {
    let mut ds = Dataset::new(sim.bounds().clone(), output_dim)?;
    for x in points {
        if ds.find_duplicate(x).is_some() {
            return Err(Error::Config(format!("design contains a duplicate node at {x:?}")));
        }
        let y = sim.evaluate(x)?;
        ds.push(x, &y)?;
    }
    Ok(ds)
}

/// RMS over probes and outputs of the change in predictive means.
fn mean_change(probes: &[Vec<f64>], previous: &[Vec<f64>], model: &MultiGpModel) -> (f64, Vec<Vec<f64>>) {
    let current: Vec<Vec<f64>> = probes.iter().map(|x| model.predict_means(x)).collect();
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in current.iter().zip(previous) {
        for (p, q) in a.iter().zip(b) {
            sum += (p - q) * (p - q);
            n += 1;
        }
    }
    ((sum / n.max(1) as f64).sqrt(), current)
}

fn convergence_probes(bounds: &Bounds) -> Result<Vec<Vec<f64>>> {
    let mut s = SobolSequence::new(bounds.dim())?;
    Ok(s.take(CONVERGENCE_PROBES).iter().map(|u| bounds.denormalize(u)).collect())
}

struct Sequential<'a> {
    strategy: Strategy,
    config: &'a LoopConfig,
    sim: &'a Simulator,
    sampler: Option<Sampler>,
    acquisition: Option<AcquisitionSpec>,
}

impl<'a> Sequential<'a> {
    fn new(strategy: Strategy, config: &'a LoopConfig, sim: &'a Simulator) -> Result<Self> {
        let bounds = sim.bounds().clone();
        let seed = derive_seed(config.seed, &[STREAM_SAMPLER]);
        let added = config.budget - config.m0();
        let mut acquisition = None;
        let sampler = match strategy {
            Strategy::Amogape(v) => {
                let spec = config.acquisition(v);
                spec.validate(sim.input_dim()).map_err(config_error)?;
                acquisition = Some(spec);
                None
            }
            Strategy::Random => Some(match &config.prior {
                Some(p) => Sampler::prior(bounds, p.clone(), seed)?,
                None => Sampler::uniform(bounds, seed),
            }),
            Strategy::Sobol => Some(Sampler::sobol(bounds)?),
            Strategy::SeqLhs => Some(Sampler::lhs_sequential(bounds, added, seed)?),
            Strategy::Lhs | Strategy::Grid => unreachable!("replace-all strategies"),
        };
        Ok(Self {
            strategy,
            config,
            sim,
            sampler,
            acquisition,
        })
    }

    fn run(mut self, observe: &mut dyn FnMut(&Observation<'_>)) -> RunResult {
        let cfg = self.config;
        let sim = self.sim;
        let start_evals = sim.evaluations();
        let used = |sim: &Simulator| sim.evaluations() - start_evals;
        let init = cfg
            .initial
            .points(sim.bounds(), cfg.prior.as_ref(), derive_seed(cfg.seed, &[STREAM_INITIAL]))?;
        let mut dataset = evaluate_design(sim, &init, sim.output_dim())?;
        let mut model = match fit(&dataset, cfg, 0) {
            Ok(m) => m,
            Err(error) => {
                return Err(RunFailure {
                    error,
                    dataset: Some(dataset),
                    model: None,
                    trace: Vec::new(),
                })
            }
        };
        observe(&Observation {
            nodes: dataset.len(),
            evaluations: used(sim),
            dataset: &dataset,
            model: &model,
        });
        let probes = match cfg.convergence {
            Some(_) => convergence_probes(sim.bounds())?,
            None => Vec::new(),
        };
        let mut previous_means: Vec<Vec<f64>> = probes.iter().map(|x| model.predict_means(x)).collect();
        let mut trace = Vec::new();
        let mut converged = false;
        let mut t = 0;
        while dataset.len() < cfg.budget {
            t += 1;
            let clock = Instant::now();
            let step = self.step(t, &dataset, &model).and_then(|choice| {
                let y = sim.evaluate(&choice.x)?;
                dataset.push(&choice.x, &y)?;
                let next = fit(&dataset, cfg, t)?;
                Ok((choice, next))
            });
            let (choice, next) = match step {
                Ok(v) => v,
                Err(error) => {
                    return Err(RunFailure {
                        error,
                        dataset: Some(dataset),
                        model: Some(model),
                        trace,
                    })
                }
            };
            let hyperparameters = model.hyperparameters();
            model = next;
            observe(&Observation {
                nodes: dataset.len(),
                evaluations: used(sim),
                dataset: &dataset,
                model: &model,
            });
            let change = cfg.convergence.map(|_| {
                let (delta, current) = mean_change(&probes, &previous_means, &model);
                previous_means = current;
                delta
            });
            trace.push(TraceEntry {
                iteration: t,
                nodes: dataset.len(),
                evaluations: used(sim),
                point: Some(choice.x),
                log_acquisition: choice.log_acquisition,
                beta: choice.beta,
                duplicate_retries: choice.retries,
                hyperparameters,
                mean_change: change,
                wall_seconds: clock.elapsed().as_secs_f64(),
            });
            if let (Some(eps), Some(delta)) = (cfg.convergence, change) {
                if delta <= eps {
                    converged = true;
                    break;
                }
            }
        }
        Ok(EmulationResult {
            strategy: self.strategy,
            evaluations: used(sim),
            dataset,
            model,
            trace,
            converged,
        })
    }

    fn step(&mut self, t: usize, dataset: &Dataset, model: &MultiGpModel) -> Result<Choice> {
        match (&mut self.sampler, &self.acquisition) {
            (Some(sampler), _) => {
                // a sampler can repeat an existing node (a Sobol point on an initial
                // lattice, say); such points are skipped without an evaluation
                loop {
                    let x = sampler.next_point()?;
                    if dataset.find_duplicate(&x).is_none() {
                        return Ok(Choice {
                            x,
                            log_acquisition: None,
                            beta: None,
                            retries: 0,
                        });
                    }
                }
            }
            (None, Some(spec)) => choose_by_acquisition(spec, self.config, t, dataset, model),
            (None, None) => unreachable!("either a sampler or an acquisition"),
        }
    }
}

struct Choice {
    x: Vec<f64>,
    log_acquisition: Option<f64>,
    beta: Option<f64>,
    retries: usize,
}

fn choose_by_acquisition(
    spec: &AcquisitionSpec,
    config: &LoopConfig,
    t: usize,
    dataset: &Dataset,
    model: &MultiGpModel,
) -> Result<Choice> {
    let objective = LogAcquisition::new(spec, model, t)?;
    let cube = Bounds::unit(dataset.input_dim());
    let bounds = dataset.bounds();
    for attempt in 0..=DUPLICATE_RETRIES {
        let seed = derive_seed(config.seed, &[STREAM_ACQUISITION, t as u64, attempt as u64]);
        let best = maximize(&objective, &cube, &config.optimizer.with_seed(seed))?;
        let mut x = bounds.denormalize(&best.x);
        bounds.clamp(&mut x);
        if dataset.find_duplicate(&x).is_none() {
            return Ok(Choice {
                x,
                log_acquisition: Some(best.value),
                beta: Some(objective.beta()),
                retries: attempt,
            });
        }
    }
    // every maximizer run landed on a node: take the best uniform probe that does not
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_FALLBACK, t as u64]));
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..config.optimizer.random_probes(cube.dim()) {
        let u = cube.sample_uniform(&mut rng);
        let mut x = bounds.denormalize(&u);
        bounds.clamp(&mut x);
        if dataset.find_duplicate(&x).is_some() {
            continue;
        }
        let v = objective.value(&u);
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    let (x, v) = best.ok_or_else(|| Error::invalid("no admissible point left to add"))?;
    Ok(Choice {
        x,
        log_acquisition: Some(v),
        beta: Some(objective.beta()),
        retries: DUPLICATE_RETRIES + 1,
    })
}

/// Grid and one-shot LHS: every size from 1 to `M` gets a fresh design, paid in full.
/// Emulators are fitted from the initial design size onward.
fn replace_all(
    strategy: Strategy,
    config: &LoopConfig,
    sim: &Simulator,
    observe: &mut dyn FnMut(&Observation<'_>),
) -> RunResult {
    let start_evals = sim.evaluations();
    let bounds = sim.bounds();
    let mut trace = Vec::new();
    let mut last: Option<(Dataset, MultiGpModel)> = None;
    let mut t = 0;
    for m in 1..=config.budget {
        let design = match strategy {
            Strategy::Grid => match grid_design(bounds, m) {
                Ok(d) => d,
                // only lattice sizes exist in more than one dimension
                Err(_) if bounds.dim() > 1 => continue,
                Err(e) => return Err(e.into()),
            },
            Strategy::Lhs => lhs_design_seeded(
                bounds,
                m,
                derive_seed(config.seed, &[STREAM_SAMPLER, m as u64]),
            )?,
            _ => unreachable!("sequential strategies"),
        };
        let clock = Instant::now();
        let fail = |error, last: Option<(Dataset, MultiGpModel)>, trace| {
            let (dataset, model) = last.map_or((None, None), |(d, m)| (Some(d), Some(m)));
            RunFailure {
                error,
                dataset,
                model,
                trace,
            }
        };
        let dataset = match evaluate_design(sim, &design, sim.output_dim()) {
            Ok(d) => d,
            Err(e) => return Err(fail(e, last, trace)),
        };
        if m < config.m0() {
            continue;
        }
        t += 1;
        let model = match fit(&dataset, config, t) {
            Ok(model) => model,
            Err(e) => return Err(fail(e, last, trace)),
        };
        let evaluations = sim.evaluations() - start_evals;
        observe(&Observation {
            nodes: m,
            evaluations,
            dataset: &dataset,
            model: &model,
        });
        trace.push(TraceEntry {
            iteration: t,
            nodes: m,
            evaluations,
            point: None,
            log_acquisition: None,
            beta: None,
            duplicate_retries: 0,
            hyperparameters: model.hyperparameters(),
            mean_change: None,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        last = Some((dataset, model));
    }
    let (dataset, model) = last.ok_or_else(|| {
        RunFailure::from(Error::Config(format!(
            "no lattice of at least {} nodes fits within the budget {}",
            config.m0(),
            config.budget
        )))
    })?;
    Ok(EmulationResult {
        strategy,
        evaluations: sim.evaluations() - start_evals,
        dataset,
        model,
        trace,
        converged: false,
    })
}
