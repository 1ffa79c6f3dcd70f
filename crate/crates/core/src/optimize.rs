//! Bounded maximization: random search followed by projected gradient ascent, or
//! simulated annealing.
//!
//! Both strategies are deterministic given the configured seed. Every objective value
//! is checked for finiteness; a non-finite value aborts with
//! [`Error::OptimizerFailure`] carrying the offending point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::Bounds;

/// A real-valued function to maximize, optionally with an analytic gradient.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    /// Analytic gradient. `None` makes the ascent fall back to central differences.
    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

/// Adapts a closure into an [`Objective`] without a gradient.
pub struct FnObjective<F>(pub F);

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// Adapts a value closure and a gradient closure into an [`Objective`].
pub struct FnGradObjective<F, G> {
    pub value: F,
    pub gradient: G,
}

impl<F, G> Objective for FnGradObjective<F, G>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some((self.gradient)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerStrategy {
    RandomThenAscent,
    SimulatedAnnealing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AscentConfig {
    /// First trial step of each line search, in box widths.
    pub initial_step: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            max_iterations: 200,
            gradient_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealingConfig {
    pub iterations: usize,
    /// Geometric cooling factor applied after every proposal.
    pub cooling: f64,
    /// Standard deviation of the Gaussian proposal, in box widths.
    pub proposal_scale: f64,
    /// Uniform probes used to pick the start point and the initial temperature.
    pub temperature_probes: usize,
    /// Overrides the probe-spread initial temperature.
    pub initial_temperature: Option<f64>,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            iterations: 2000,
            cooling: 0.995,
            proposal_scale: 0.1,
            temperature_probes: 20,
            initial_temperature: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub strategy: OptimizerStrategy,
    /// Uniform probes before the ascent; `None` means `10^D`.
    pub n_random: Option<usize>,
    pub ascent: AscentConfig,
    pub annealing: AnnealingConfig,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            strategy: OptimizerStrategy::RandomThenAscent,
            n_random: None,
            ascent: AscentConfig::default(),
            annealing: AnnealingConfig::default(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn annealing() -> Self {
        Self {
            strategy: OptimizerStrategy::SimulatedAnnealing,
            ..Self::default()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }

    pub fn random_probes(&self, dim: usize) -> usize {
        self.n_random
            .unwrap_or_else(|| 10usize.saturating_pow(dim as u32))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_random == Some(0) {
            return Err(Error::invalid("n_random must be at least 1"));
        }
        let a = &self.ascent;
        if !(a.initial_step > 0.0) || a.max_iterations == 0 || !(a.gradient_tolerance >= 0.0) {
            return Err(Error::invalid("invalid ascent settings"));
        }
        let s = &self.annealing;
        if !(s.cooling > 0.0 && s.cooling < 1.0) {
            return Err(Error::invalid(format!(
                "cooling factor must lie in (0, 1), got {}",
                s.cooling
            )));
        }
        if s.iterations == 0 || s.temperature_probes == 0 || !(s.proposal_scale > 0.0) {
            return Err(Error::invalid("invalid annealing settings"));
        }
        if let Some(t) = s.initial_temperature {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::invalid("initial temperature must be positive"));
            }
        }
        Ok(())
    }
}

/// Best point found by [`maximize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Counted<'a> {
    objective: &'a dyn Objective,
    evaluations: usize,
}

impl Counted<'_> {
    fn value(&mut self, x: &[f64]) -> Result<f64> {
        self.evaluations += 1;
        let v = self.objective.value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::OptimizerFailure { point: x.to_vec() })
        }
    }
}

pub fn maximize(
    objective: &dyn Objective,
    bounds: &Bounds,
    config: &OptimizerConfig,
) -> Result<Maximum> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut f = Counted {
        objective,
        evaluations: 0,
    };
    let (x, value) = match config.strategy {
        OptimizerStrategy::RandomThenAscent => random_then_ascent(&mut f, bounds, config, &mut rng)?,
        OptimizerStrategy::SimulatedAnnealing => annealing(&mut f, bounds, config, &mut rng)?,
    };
    Ok(Maximum {
        x,
        value,
        evaluations: f.evaluations,
    })
}

fn random_search(
    f: &mut Counted<'_>,
    bounds: &Bounds,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let x = bounds.sample_uniform(rng);
        let v = f.value(&x)?;
        values.push(v);
        // strict comparison: the first of equal maxima wins
        if best.as_ref().map_or(true, |(_, b)| v > *b) {
            best = Some((x, v));
        }
    }
    let (x, v) = best.expect("at least one probe");
    Ok((x, v, values))
}

fn random_then_ascent(
    f: &mut Counted<'_>,
    bounds: &Bounds,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let n = config.random_probes(bounds.dim());
    let (x0, v0, _) = random_search(f, bounds, n, rng)?;
    gradient_ascent(f, bounds, &config.ascent, x0, v0)
}

fn gradient(f: &mut Counted<'_>, bounds: &Bounds, x: &[f64]) -> Result<Vec<f64>> {
    if let Some(g) = f.objective.gradient(x) {
        if g.iter().all(|v| v.is_finite()) {
            return Ok(g);
        }
        return Err(Error::OptimizerFailure { point: x.to_vec() });
    }
    let mut g = vec![0.0; x.len()];
    for d in 0..x.len() {
        let h = 1e-6 * bounds.width(d);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[d] = (x[d] + h).min(bounds.high(d));
        xm[d] = (x[d] - h).max(bounds.low(d));
        g[d] = (f.value(&xp)? - f.value(&xm)?) / (xp[d] - xm[d]);
    }
    Ok(g)
}

fn gradient_ascent(
    f: &mut Counted<'_>,
    bounds: &Bounds,
    cfg: &AscentConfig,
    mut x: Vec<f64>,
    mut fx: f64,
) -> Result<(Vec<f64>, f64)> {
    let dim = bounds.dim();
    let mut step = cfg.initial_step;
    for _ in 0..cfg.max_iterations {
        let g = gradient(f, bounds, &x)?;
        // project out components pushing against an active bound
        let mut projected = g.clone();
        for d in 0..dim {
            if (x[d] <= bounds.low(d) && g[d] < 0.0) || (x[d] >= bounds.high(d) && g[d] > 0.0) {
                projected[d] = 0.0;
            }
        }
        let gnorm = crate::space::norm(&projected);
        if gnorm < cfg.gradient_tolerance || gnorm == 0.0 {
            break;
        }
        // ascent direction in box-width units
        let scaled: Vec<f64> = (0..dim).map(|d| projected[d] * bounds.width(d)).collect();
        let snorm = crate::space::norm(&scaled);
        let mut improved = false;
        while step > 1e-12 {
            let mut trial: Vec<f64> = (0..dim)
                .map(|d| x[d] + step * bounds.width(d) * scaled[d] / snorm)
                .collect();
            bounds.clamp(&mut trial);
            let ft = f.value(&trial)?;
            if ft > fx {
                x = trial;
                fx = ft;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
        step = (2.0 * step).min(cfg.initial_step);
    }
    Ok((x, fx))
}

/// Folds `v` back into `[lo, hi]` by mirror reflection at the walls.
fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut t = (v - lo).rem_euclid(2.0 * w);
    if t > w {
        t = 2.0 * w - t;
    }
    lo + t
}

fn annealing(
    f: &mut Counted<'_>,
    bounds: &Bounds,
    config: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64)> {
    let cfg = &config.annealing;
    let (mut x, mut fx, probes) = random_search(f, bounds, cfg.temperature_probes, rng)?;
    let mut temperature = cfg.initial_temperature.unwrap_or_else(|| {
        let max = probes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = probes.iter().cloned().fold(f64::INFINITY, f64::min);
        let spread = max - min;
        if spread > 0.0 && spread.is_finite() {
            spread
        } else {
            1.0
        }
    });
    let initial_temperature = temperature;
    let mut best = (x.clone(), fx);
    for _ in 0..cfg.iterations {
        // proposals narrow as the chain cools so the final phase can refine
        let scale = cfg.proposal_scale * (temperature / initial_temperature).sqrt().max(1e-3);
        let proposal: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(d, v)| {
                let z: f64 = rng.sample(StandardNormal);
                reflect(
                    v + scale * bounds.width(d) * z,
                    bounds.low(d),
                    bounds.high(d),
                )
            })
            .collect();
        let fp = f.value(&proposal)?;
        let accept = fp >= fx || rng.random::<f64>() < ((fp - fx) / temperature).exp();
        if accept {
            x = proposal;
            fx = fp;
            if fx > best.1 {
                best = (x.clone(), fx);
            }
        }
        temperature *= cfg.cooling;
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: Vec<f64>) -> impl Objective {
        let c2 = c.clone();
        FnGradObjective {
            value: move |x: &[f64]| -x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>(),
            gradient: move |x: &[f64]| x.iter().zip(&c2).map(|(a, b)| -2.0 * (a - b)).collect(),
        }
    }

    #[test]
    fn both_strategies_find_an_interior_quadratic_maximum() {
        let bounds = Bounds::new(vec![[-1.0, 2.0], [0.0, 5.0]]).unwrap();
        let c = vec![0.3, 3.7];
        for cfg in [OptimizerConfig::default(), OptimizerConfig::annealing()] {
            let m = maximize(&quadratic(c.clone()), &bounds, &cfg.with_seed(11)).unwrap();
            let err = crate::space::norm(&[m.x[0] - c[0], m.x[1] - c[1]]);
            assert!(err < 1e-3, "{:?}: {:?}", cfg.strategy, m.x);
        }
    }

    #[test]
    fn ascent_without_gradient_uses_finite_differences() {
        let bounds = Bounds::cube(0.0, 1.0, 2).unwrap();
        let obj = FnObjective(|x: &[f64]| -(x[0] - 0.25).powi(2) - (x[1] - 0.6).powi(2));
        let m = maximize(&obj, &bounds, &OptimizerConfig::default()).unwrap();
        assert!((m.x[0] - 0.25).abs() < 1e-3 && (m.x[1] - 0.6).abs() < 1e-3);
    }

    #[test]
    fn constant_objective_returns_in_box_point() {
        let bounds = Bounds::cube(-3.0, 3.0, 3).unwrap();
        let obj = FnObjective(|_: &[f64]| 4.5);
        for cfg in [OptimizerConfig::default(), OptimizerConfig::annealing()] {
            let m = maximize(&obj, &bounds, &cfg).unwrap();
            assert_eq!(m.value, 4.5);
            assert!(bounds.contains(&m.x));
        }
    }

    #[test]
    fn non_finite_objective_is_reported_with_point() {
        let bounds = Bounds::cube(0.0, 1.0, 1).unwrap();
        let obj = FnObjective(|x: &[f64]| if x[0] > 0.5 { f64::NAN } else { x[0] });
        match maximize(&obj, &bounds, &OptimizerConfig::default()) {
            Err(Error::OptimizerFailure { point }) => assert!(point[0] > 0.5),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn boundary_maximum_is_reached_by_projection() {
        let bounds = Bounds::cube(0.0, 1.0, 2).unwrap();
        let m = maximize(&quadratic(vec![1.5, 0.5]), &bounds, &OptimizerConfig::default()).unwrap();
        assert_eq!(m.x[0], 1.0);
        assert!((m.x[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn seed_determinism() {
        let bounds = Bounds::cube(0.0, 1.0, 2).unwrap();
        let obj = FnObjective(|x: &[f64]| (13.0 * x[0]).sin() * (7.0 * x[1]).cos());
        for cfg in [OptimizerConfig::default(), OptimizerConfig::annealing()] {
            let a = maximize(&obj, &bounds, &cfg.with_seed(5)).unwrap();
            let b = maximize(&obj, &bounds, &cfg.with_seed(5)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bounds = Bounds::unit(1);
        let obj = FnObjective(|x: &[f64]| x[0]);
        let mut cfg = OptimizerConfig::annealing();
        cfg.annealing.cooling = 1.0;
        assert!(maximize(&obj, &bounds, &cfg).is_err());
        let cfg = OptimizerConfig {
            n_random: Some(0),
            ..OptimizerConfig::default()
        };
        assert!(maximize(&obj, &bounds, &cfg).is_err());
    }

    #[test]
    fn reflection_stays_in_box() {
        for v in [-2.7, -0.3, 0.4, 1.3, 5.9] {
            let r = reflect(v, 0.0, 1.0);
            assert!((0.0..=1.0).contains(&r), "{v} -> {r}");
        }
        assert!((reflect(1.25, 0.0, 1.0) - 0.75).abs() < 1e-15);
        assert!((reflect(-0.25, 0.0, 1.0) - 0.25).abs() < 1e-15);
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn result_in_box_and_beats_probes(seed in 0u64..1000, a in 1.0f64..20.0) {
            let bounds = Bounds::new(vec![[-1.0, 1.0], [2.0, 3.0]]).unwrap();
            let obj = FnObjective(move |x: &[f64]| (a * x[0]).sin() + (a * x[1]).cos());
            let cfg = OptimizerConfig { n_random: Some(30), ..OptimizerConfig::default() }.with_seed(seed);
            let m = maximize(&obj, &bounds, &cfg).unwrap();
            prop_assert!(bounds.contains(&m.x));
            // replay the probes drawn by the same seed
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..30 {
                let p = bounds.sample_uniform(&mut rng);
                prop_assert!(m.value >= obj.value(&p));
            }
            let s = maximize(&obj, &bounds, &OptimizerConfig::annealing().with_seed(seed)).unwrap();
            prop_assert!(bounds.contains(&s.x));
        }
    }
}
