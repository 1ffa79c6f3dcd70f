//! Kernel bandwidth and nugget selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelParams};
use crate::optimize::{maximize, Objective, OptimizerConfig};
use crate::space::{squared_distance, Bounds};

/// Bandwidth search range in unit-cube coordinates.
pub const BANDWIDTH_RANGE: [f64; 2] = [1e-2, 1e1];
/// Search range of a learned nugget.
pub const NUGGET_RANGE: [f64; 2] = [1e-8, 1e-1];
pub const DEFAULT_CONDITION_BOUND: f64 = 1e6;

const GRID_POINTS: usize = 50;
// Upper bandwidth limit for likelihood fits of pure interpolators.
const INTERPOLATION_CONDITION_CAP: f64 = 1e10;
// Log-likelihood assigned where the kernel matrix cannot be factorized.
const UNFACTORIZABLE_SCORE: f64 = -1e300;

/// Kernel bandwidth plus nugget for one output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub kernel: KernelParams,
    pub nugget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HyperStrategy {
    /// Maximize the log marginal likelihood over log-bandwidth (and log-nugget).
    MarginalLikelihood {
        #[serde(default = "OptimizerConfig::annealing")]
        optimizer: OptimizerConfig,
    },
    /// Largest grid bandwidth whose kernel matrix stays below a condition bound.
    MaxStableBandwidth {
        #[serde(default = "default_condition_bound")]
        condition_bound: f64,
    },
    /// A fixed bandwidth, in unit-cube coordinates.
    Fixed { bandwidth: f64 },
}

fn default_condition_bound() -> f64 {
    DEFAULT_CONDITION_BOUND
}

impl Default for HyperStrategy {
    fn default() -> Self {
        HyperStrategy::MarginalLikelihood {
            optimizer: OptimizerConfig::annealing(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NuggetPolicy {
    Fixed(f64),
    Learned,
}

impl Default for NuggetPolicy {
    fn default() -> Self {
        NuggetPolicy::Fixed(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct HyperConfig {
    pub strategy: HyperStrategy,
    pub nugget: NuggetPolicy,
}

impl HyperConfig {
    pub fn validate(&self) -> Result<()> {
        match &self.strategy {
            HyperStrategy::MarginalLikelihood { optimizer } => optimizer.validate()?,
            HyperStrategy::MaxStableBandwidth { condition_bound } => {
                if !(*condition_bound > 1.0) {
                    return Err(Error::invalid("condition bound must exceed 1"));
                }
            }
            HyperStrategy::Fixed { bandwidth } => {
                KernelParams::new(*bandwidth)?;
            }
        }
        if let NuggetPolicy::Fixed(v) = self.nugget {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("nugget must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// The 50-point log-spaced bandwidth grid over [`BANDWIDTH_RANGE`], ascending.
pub fn bandwidth_grid() -> Vec<f64> {
    let (lo, hi) = (BANDWIDTH_RANGE[0].ln(), BANDWIDTH_RANGE[1].ln());
    (0..GRID_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).exp())
        .collect()
}

/// Spectral condition number `lambda_max / lambda_min` of a symmetric matrix.
///
/// Infinite when the matrix is not positive definite.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let eig = a.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 || !min.is_finite() {
        return f64::INFINITY;
    }
    max / min
}

/// Largest grid bandwidth for which `cond(K + nugget I) <= bound`.
pub fn max_stable_bandwidth(inputs: &DMatrix<f64>, nugget: f64, bound: f64) -> Result<f64> {
    if inputs.ncols() < 2 {
        return Err(Error::invalid("bandwidth selection needs at least 2 nodes"));
    }
    let mut smallest = f64::INFINITY;
    for &delta in bandwidth_grid().iter().rev() {
        let k = kernel_matrix(inputs, &KernelParams::new(delta)?, nugget);
        let c = condition_estimate(&k);
        if c <= bound {
            return Ok(delta);
        }
        smallest = c;
    }
    Err(Error::IllConditioned {
        condition_estimate: smallest,
    })
}

/// Picks hyperparameters for one output from unit-cube `inputs` (`D x m`).
pub fn select_hyperparameters(
    inputs: &DMatrix<f64>,
    outputs: &DVector<f64>,
    config: &HyperConfig,
    seed: u64,
) -> Result<Hyperparameters> {
    let m = inputs.ncols();
    if m < 2 {
        return Err(Error::invalid(format!(
            "hyperparameter selection needs at least 2 nodes, got {m}"
        )));
    }
    if outputs.len() != m {
        return Err(Error::invalid(format!("{} outputs for {m} nodes", outputs.len())));
    }
    match (&config.strategy, config.nugget) {
        (HyperStrategy::Fixed { bandwidth }, NuggetPolicy::Fixed(nugget)) => Ok(Hyperparameters {
            kernel: KernelParams::new(*bandwidth)?,
            nugget,
        }),
        (HyperStrategy::MaxStableBandwidth { condition_bound }, NuggetPolicy::Fixed(nugget)) => {
            Ok(Hyperparameters {
                kernel: KernelParams::new(max_stable_bandwidth(inputs, nugget, *condition_bound)?)?,
                nugget,
            })
        }
        (HyperStrategy::MaxStableBandwidth { condition_bound }, NuggetPolicy::Learned) => {
            // the smallest nugget leaves the most room for the bandwidth
            let nugget = NUGGET_RANGE[0];
            Ok(Hyperparameters {
                kernel: KernelParams::new(max_stable_bandwidth(inputs, nugget, *condition_bound)?)?,
                nugget,
            })
        }
        (HyperStrategy::Fixed { bandwidth }, NuggetPolicy::Learned) => {
            let objective = LogLikelihood::new(inputs, outputs, None, Some(bandwidth.ln()));
            let cfg = OptimizerConfig::annealing().with_seed(seed);
            let bounds = Bounds::new(vec![[NUGGET_RANGE[0].ln(), NUGGET_RANGE[1].ln()]])?;
            let best = maximize(&objective, &bounds, &cfg)?;
            Ok(Hyperparameters {
                kernel: KernelParams::new(*bandwidth)?,
                nugget: best.x[0].exp(),
            })
        }
        (HyperStrategy::MarginalLikelihood { optimizer }, policy) => {
            let fixed = match policy {
                NuggetPolicy::Fixed(v) => Some(v),
                NuggetPolicy::Learned => None,
            };
            let upper = match fixed {
                Some(v) if v == 0.0 => max_stable_bandwidth(inputs, 0.0, INTERPOLATION_CONDITION_CAP)?,
                _ => BANDWIDTH_RANGE[1],
            };
            let mut intervals = vec![[BANDWIDTH_RANGE[0].ln(), upper.ln()]];
            if upper <= BANDWIDTH_RANGE[0] {
                // only the smallest bandwidth is stable
                return Ok(Hyperparameters {
                    kernel: KernelParams::new(BANDWIDTH_RANGE[0])?,
                    nugget: fixed.unwrap_or(NUGGET_RANGE[0]),
                });
            }
            if fixed.is_none() {
                intervals.push([NUGGET_RANGE[0].ln(), NUGGET_RANGE[1].ln()]);
            }
            let objective = LogLikelihood::new(inputs, outputs, fixed, None);
            let best = maximize(&objective, &Bounds::new(intervals)?, &optimizer.with_seed(seed))?;
            Ok(Hyperparameters {
                kernel: KernelParams::new(best.x[0].exp())?,
                nugget: fixed.unwrap_or_else(|| best.x[1].exp()),
            })
        }
    }
}

/// Log marginal likelihood over `theta = (ln delta, ln nugget)`, with either
/// coordinate optionally pinned.
pub(crate) struct LogLikelihood<'a> {
    outputs: &'a DVector<f64>,
    sqdist: DMatrix<f64>,
    fixed_nugget: Option<f64>,
    fixed_log_bandwidth: Option<f64>,
}

impl<'a> LogLikelihood<'a> {
    pub(crate) fn new(
        inputs: &DMatrix<f64>,
        outputs: &'a DVector<f64>,
        fixed_nugget: Option<f64>,
        fixed_log_bandwidth: Option<f64>,
    ) -> Self {
        let m = inputs.ncols();
        let d = inputs.nrows();
        let data = inputs.as_slice();
        let sqdist = DMatrix::from_fn(m, m, |i, j| {
            squared_distance(&data[i * d..(i + 1) * d], &data[j * d..(j + 1) * d])
        });
        Self {
            outputs,
            sqdist,
            fixed_nugget,
            fixed_log_bandwidth,
        }
    }

    fn unpack(&self, theta: &[f64]) -> (f64, f64) {
        let mut it = theta.iter();
        let log_delta = self
            .fixed_log_bandwidth
            .unwrap_or_else(|| *it.next().expect("bandwidth coordinate"));
        let nugget = self
            .fixed_nugget
            .unwrap_or_else(|| it.next().expect("nugget coordinate").exp());
        (log_delta.exp(), nugget)
    }

    fn matrices(&self, delta: f64, nugget: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let s = -0.5 / (delta * delta);
        let k = self.sqdist.map(|r2| (s * r2).exp());
        let mut a = k.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += nugget;
        }
        (k, a)
    }

    /// Log likelihood and its gradient with respect to the free coordinates.
    pub(crate) fn evaluate(&self, theta: &[f64], with_gradient: bool) -> Option<(f64, Vec<f64>)> {
        let (delta, nugget) = self.unpack(theta);
        let (k, a) = self.matrices(delta, nugget);
        let chol = a.cholesky()?;
        let alpha = chol.solve(self.outputs);
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let m = self.outputs.len() as f64;
        let value = -0.5 * self.outputs.dot(&alpha)
            - logdet
            - 0.5 * m * (2.0 * std::f64::consts::PI).ln();
        if !value.is_finite() {
            return None;
        }
        if !with_gradient {
            return Some((value, Vec::new()));
        }
        let inv = chol.inverse();
        let mut grad = Vec::with_capacity(2);
        if self.fixed_log_bandwidth.is_none() {
            // dK/d ln delta = K o r^2 / delta^2
            let inv_d2 = 1.0 / (delta * delta);
            let mut g = 0.0;
            for j in 0..k.ncols() {
                for i in 0..k.nrows() {
                    let dk = k[(i, j)] * self.sqdist[(i, j)] * inv_d2;
                    g += (alpha[i] * alpha[j] - inv[(i, j)]) * dk;
                }
            }
            grad.push(0.5 * g);
        }
        if self.fixed_nugget.is_none() {
            // dK/d ln nugget = nugget I
            let g = alpha.dot(&alpha) - inv.trace();
            grad.push(0.5 * nugget * g);
        }
        Some((value, grad))
    }
}

impl Objective for LogLikelihood<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta, false)
            .map_or(UNFACTORIZABLE_SCORE, |(v, _)| v)
    }

    fn gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        Some(
            self.evaluate(theta, true)
                .map_or_else(|| vec![0.0; theta.len()], |(_, g)| g),
        )
    }
}
