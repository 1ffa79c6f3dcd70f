//! One independent GP per output over a shared node set.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gp::{select_hyperparameters, GpModel, HyperConfig, Hyperparameters, NuggetPolicy};
use crate::kernel::KernelParams;
use crate::space::Bounds;

// Used when a single node leaves nothing to tune against.
const SINGLE_NODE_BANDWIDTH: f64 = 0.25;

/// P fitted GPs sharing the same unit-cube training inputs.
#[derive(Debug, Clone)]
pub struct MultiGpModel {
    bounds: Bounds,
    models: Vec<GpModel>,
}

/// Per-output predictions at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiPrediction {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub gradient_norms: Vec<f64>,
}

/// Per-output seed derived from a base seed.
pub(crate) fn output_seed(seed: u64, p: usize) -> u64 {
    seed ^ (p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

impl MultiGpModel {
    /// Selects hyperparameters for every output independently, then fits.
    pub fn fit_all(dataset: &Dataset, config: &HyperConfig, seed: u64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid("cannot fit an emulator without nodes"));
        }
        let inputs = dataset.normalized_matrix();
        let hypers: Vec<Hyperparameters> = (0..dataset.output_dim())
            .into_par_iter()
            .map(|p| {
                if dataset.len() < 2 {
                    return Ok(Hyperparameters {
                        kernel: KernelParams::new(SINGLE_NODE_BANDWIDTH)?,
                        nugget: match config.nugget {
                            NuggetPolicy::Fixed(v) => v,
                            NuggetPolicy::Learned => crate::gp::NUGGET_RANGE[0],
                        },
                    });
                }
                select_hyperparameters(&inputs, &dataset.output_row(p), config, output_seed(seed, p))
                    .map_err(|e| Error::OutputFit {
                        output: p,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        Self::fit_with(dataset, &hypers)
    }

    /// Fits output `p` with `hypers[p]`.
    pub fn fit_with(dataset: &Dataset, hypers: &[Hyperparameters]) -> Result<Self> {
        if hypers.len() != dataset.output_dim() {
            return Err(Error::invalid(format!(
                "{} hyperparameter sets for {} outputs",
                hypers.len(),
                dataset.output_dim()
            )));
        }
        let inputs = dataset.normalized_matrix();
        let models = hypers
            .par_iter()
            .enumerate()
            .map(|(p, h)| {
                GpModel::fit(inputs.clone(), dataset.output_row(p), h.kernel, h.nugget).map_err(
                    |e| Error::OutputFit {
                        output: p,
                        source: Box::new(e),
                    },
                )
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            bounds: dataset.bounds().clone(),
            models,
        })
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn models(&self) -> &[GpModel] {
        &self.models
    }

    pub fn output_dim(&self) -> usize {
        self.models.len()
    }

    pub fn input_dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn hyperparameters(&self) -> Vec<Hyperparameters> {
        self.models
            .iter()
            .map(|m| Hyperparameters {
                kernel: m.params(),
                nugget: m.nugget(),
            })
            .collect()
    }

    /// Predictions at a point of the input box.
    pub fn predict_all(&self, x: &[f64]) -> MultiPrediction {
        self.predict_all_normalized(&self.bounds.normalize(x))
    }

    /// Predictions at a unit-cube point. Gradient norms are taken with respect to
    /// unit-cube coordinates.
    pub fn predict_all_normalized(&self, u: &[f64]) -> MultiPrediction {
        MultiPrediction {
            means: self.models.iter().map(|m| m.predict_mean(u)).collect(),
            variances: self.models.iter().map(|m| m.predict_variance(u)).collect(),
            gradient_norms: self.models.iter().map(|m| m.mean_gradient_norm(u)).collect(),
        }
    }

    /// Predictive means at a point of the input box.
    pub fn predict_means(&self, x: &[f64]) -> Vec<f64> {
        let u = self.bounds.normalize(x);
        self.models.iter().map(|m| m.predict_mean(&u)).collect()
    }
}
