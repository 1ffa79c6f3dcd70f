//! Acquisition `A_t(x) = G_t(x)^beta_t * D_t(x) * psi(x)`.
//!
//! `D_t` combines the per-output predictive variances and `G_t` the per-output
//! gradient norms of the predictive means, each by a sum or a product. `psi` is an
//! optional input-prior density. Everything is evaluated in log space so products of
//! many small factors do not underflow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multi_output::MultiGpModel;
use crate::optimize::Objective;
use crate::prior::InputPrior;
use crate::space::norm;

/// Gradient norms below this count as zero when differentiating the norm.
const FLAT_GRADIENT: f64 = 1e-12;

/// Log-acquisition reported to the optimizer where `A_t = 0`.
pub const LOG_FLOOR: f64 = -1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    Sum,
    Product,
}

/// The six diversity/geometry combinations.
#[allow(non_camel_case_types)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum AcquisitionVariant {
    SD,
    PD,
    SDxSG,
    SDxPG,
    PDxSG,
    PDxPG,
}

impl AcquisitionVariant {
    pub const ALL: [AcquisitionVariant; 6] = [
        AcquisitionVariant::SD,
        AcquisitionVariant::PD,
        AcquisitionVariant::SDxSG,
        AcquisitionVariant::SDxPG,
        AcquisitionVariant::PDxSG,
        AcquisitionVariant::PDxPG,
    ];

    pub fn diversity_op(self) -> Combine {
        use AcquisitionVariant::*;
        match self {
            SD | SDxSG | SDxPG => Combine::Sum,
            PD | PDxSG | PDxPG => Combine::Product,
        }
    }

    /// `None` for the pure-diversity variants.
    pub fn geometry_op(self) -> Option<Combine> {
        use AcquisitionVariant::*;
        match self {
            SD | PD => None,
            SDxSG | PDxSG => Some(Combine::Sum),
            SDxPG | PDxPG => Some(Combine::Product),
        }
    }

    pub fn name(self) -> &'static str {
        use AcquisitionVariant::*;
        match self {
            SD => "SD",
            PD => "PD",
            SDxSG => "SDxSG",
            SDxPG => "SDxPG",
            PDxSG => "PDxSG",
            PDxPG => "PDxPG",
        }
    }
}

impl fmt::Display for AcquisitionVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AcquisitionVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown acquisition variant `{s}` (expected SD, PD, SDxSG, SDxPG, PDxSG or PDxPG)"
                ))
            })
    }
}

impl TryFrom<String> for AcquisitionVariant {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<AcquisitionVariant> for String {
    fn from(v: AcquisitionVariant) -> String {
        v.name().to_string()
    }
}

/// Exponent `beta_t` on the geometry term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TemperingSchedule {
    Constant { beta: f64 },
    OneMinusInverseT,
    OneMinusExp { gamma: f64 },
}

impl Default for TemperingSchedule {
    fn default() -> Self {
        TemperingSchedule::OneMinusInverseT
    }
}

impl TemperingSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TemperingSchedule::Constant { beta } if !(0.0..=1.0).contains(&beta) => Err(
                Error::invalid(format!("constant beta must lie in [0, 1], got {beta}")),
            ),
            TemperingSchedule::OneMinusExp { gamma } if !(gamma >= 0.0 && gamma.is_finite()) => {
                Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

pub fn beta_at(schedule: &TemperingSchedule, t: usize) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("tempering index t starts at 1"));
    }
    let t = t as f64;
    Ok(match *schedule {
        TemperingSchedule::Constant { beta } => beta,
        TemperingSchedule::OneMinusInverseT => 1.0 - 1.0 / t,
        TemperingSchedule::OneMinusExp { gamma } => 1.0 - (-gamma * t).exp(),
    })
}

/// Which variance feeds the diversity term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DiversityVariance {
    /// `k(x,x) - k_x^T K^{-1} k_x` with the nugget left out of `K`; vanishes at every
    /// node even when the model regresses.
    #[default]
    NoiseFree,
    /// `k(x,x) - k_x^T (K + v2 I)^{-1} k_x`.
    Latent,
    /// Full predictive variance including the nugget.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcquisitionSpec {
    pub variant: AcquisitionVariant,
    #[serde(default)]
    pub tempering: TemperingSchedule,
    #[serde(default)]
    pub prior: Option<InputPrior>,
    #[serde(default)]
    pub diversity_variance: DiversityVariance,
}

impl AcquisitionSpec {
    pub fn new(variant: AcquisitionVariant, tempering: TemperingSchedule) -> Self {
        Self {
            variant,
            tempering,
            prior: None,
            diversity_variance: DiversityVariance::NoiseFree,
        }
    }

    pub fn with_prior(mut self, prior: InputPrior) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn diversity_op(&self) -> Combine {
        self.variant.diversity_op()
    }

    pub fn geometry_op(&self) -> Option<Combine> {
        self.variant.geometry_op()
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        self.tempering.validate()?;
        if let Some(p) = &self.prior {
            if p.dim() != input_dim {
                return Err(Error::Config(format!(
                    "input prior has {} dimensions, simulator has {input_dim}",
                    p.dim()
                )));
            }
        }
        Ok(())
    }
}

fn combine(values: &[f64], op: Combine) -> f64 {
    match op {
        Combine::Sum => values.iter().sum(),
        Combine::Product => values.iter().product(),
    }
}

fn variances(model: &MultiGpModel, u: &[f64], kind: DiversityVariance) -> Vec<f64> {
    model
        .models()
        .iter()
        .map(|m| match kind {
            DiversityVariance::NoiseFree => m.noise_free_variance(u),
            DiversityVariance::Latent => m.latent_variance(u),
            DiversityVariance::Full => m.predict_variance(u),
        })
        .collect()
}

/// `D_t(x)`: per-output variances combined by `op`.
pub fn diversity(model: &MultiGpModel, x: &[f64], op: Combine, kind: DiversityVariance) -> f64 {
    combine(&variances(model, &model.bounds().normalize(x), kind), op)
}

/// `G_t(x)`: per-output gradient norms (unit-cube coordinates) combined by `op`.
pub fn geometry(model: &MultiGpModel, x: &[f64], op: Combine) -> f64 {
    combine(&model.predict_all(x).gradient_norms, op)
}

/// `A_t(x)` at a point of the input box.
pub fn acquisition_value(
    spec: &AcquisitionSpec,
    model: &MultiGpModel,
    x: &[f64],
    t: usize,
) -> Result<f64> {
    let beta = beta_at(&spec.tempering, t)?;
    let (log_a, _) = log_acquisition(spec, model, beta, x, false);
    Ok(log_a.exp())
}

/// Gradient of `A_t` with respect to the input-box coordinates. Zero where `A_t = 0`.
pub fn acquisition_gradient(
    spec: &AcquisitionSpec,
    model: &MultiGpModel,
    x: &[f64],
    t: usize,
) -> Result<Vec<f64>> {
    let beta = beta_at(&spec.tempering, t)?;
    let (log_a, grad) = log_acquisition(spec, model, beta, x, true);
    let a = log_a.exp();
    let grad = grad.expect("gradient requested");
    if a == 0.0 {
        return Ok(vec![0.0; x.len()]);
    }
    let bounds = model.bounds();
    Ok(grad
        .iter()
        .enumerate()
        .map(|(d, g)| a * g / bounds.width(d))
        .collect())
}

/// `ln A_t` at input-box point `x` and, on request, its gradient with respect to
/// unit-cube coordinates. Returns negative infinity (and a zero gradient) where any
/// factor vanishes.
fn log_acquisition(
    spec: &AcquisitionSpec,
    model: &MultiGpModel,
    beta: f64,
    x: &[f64],
    with_gradient: bool,
) -> (f64, Option<Vec<f64>>) {
    let bounds = model.bounds();
    let dim = bounds.dim();
    let zero = || (f64::NEG_INFINITY, with_gradient.then(|| vec![0.0; dim]));

    let mut log_a = 0.0;
    let mut grad = vec![0.0; dim];

    if let Some(prior) = &spec.prior {
        let lp = prior.log_density(x);
        if lp == f64::NEG_INFINITY {
            return zero();
        }
        log_a += lp;
        if with_gradient {
            for (d, g) in prior.log_density_gradient(x).into_iter().enumerate() {
                grad[d] += g * bounds.width(d);
            }
        }
    }

    let u = bounds.normalize(x);
    let use_geometry = spec.geometry_op().is_some() && beta > 0.0;
    let kind = spec.diversity_variance;

    let mut vars = Vec::with_capacity(model.output_dim());
    let mut var_grads = Vec::new();
    let mut norms = Vec::new();
    let mut norm_grads = Vec::new();
    for m in model.models() {
        if with_gradient {
            let local = m.local(&u);
            match kind {
                DiversityVariance::NoiseFree => {
                    let (v, g) = m.noise_free_local(&u, true);
                    vars.push(v);
                    var_grads.push(g);
                }
                DiversityVariance::Latent | DiversityVariance::Full => {
                    let extra = if kind == DiversityVariance::Full { m.nugget() } else { 0.0 };
                    vars.push(local.latent_variance + extra);
                    var_grads.push(local.variance_gradient);
                }
            }
            if use_geometry {
                let g = norm(&local.mean_gradient);
                norms.push(g);
                // grad |g| = H g / |g|
                let ng = if g < FLAT_GRADIENT {
                    vec![0.0; dim]
                } else {
                    let hg = &local.mean_hessian
                        * nalgebra::DVector::from_column_slice(&local.mean_gradient);
                    hg.iter().map(|v| v / g).collect()
                };
                norm_grads.push(ng);
            }
        } else {
            vars.push(match kind {
                DiversityVariance::NoiseFree => m.noise_free_variance(&u),
                DiversityVariance::Latent => m.latent_variance(&u),
                DiversityVariance::Full => m.predict_variance(&u),
            });
            if use_geometry {
                norms.push(m.mean_gradient_norm(&u));
            }
        }
    }

    match add_log_combination(&vars, &var_grads, spec.diversity_op(), 1.0, &mut grad) {
        Some(l) => log_a += l,
        None => return zero(),
    }
    if use_geometry {
        let op = spec.geometry_op().expect("geometry present");
        match add_log_combination(&norms, &norm_grads, op, beta, &mut grad) {
            Some(l) => log_a += beta * l,
            None => return zero(),
        }
    }
    (log_a, with_gradient.then_some(grad))
}

/// Log of the combined factor; accumulates `weight * grad log` into `grad` when
/// per-output gradients are supplied. `None` when the combination is zero.
fn add_log_combination(
    values: &[f64],
    grads: &[Vec<f64>],
    op: Combine,
    weight: f64,
    grad: &mut [f64],
) -> Option<f64> {
    match op {
        Combine::Sum => {
            let s: f64 = values.iter().sum();
            if s <= 0.0 {
                return None;
            }
            for g in grads {
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += weight * v / s;
                }
            }
            Some(s.ln())
        }
        Combine::Product => {
            if values.iter().any(|v| *v <= 0.0) {
                return None;
            }
            for (g, val) in grads.iter().zip(values) {
                for (acc, v) in grad.iter_mut().zip(g) {
                    *acc += weight * v / val;
                }
            }
            Some(values.iter().map(|v| v.ln()).sum())
        }
    }
}

/// `ln A_t` over the unit cube, floored at [`LOG_FLOOR`], for the optimizer.
pub struct LogAcquisition<'a> {
    spec: &'a AcquisitionSpec,
    model: &'a MultiGpModel,
    beta: f64,
}

impl<'a> LogAcquisition<'a> {
    pub fn new(spec: &'a AcquisitionSpec, model: &'a MultiGpModel, t: usize) -> Result<Self> {
        Ok(Self {
            spec,
            model,
            beta: beta_at(&spec.tempering, t)?,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

impl Objective for LogAcquisition<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let x = self.model.bounds().denormalize(u);
        let (l, _) = log_acquisition(self.spec, self.model, self.beta, &x, false);
        l.max(LOG_FLOOR)
    }

    fn gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        let x = self.model.bounds().denormalize(u);
        let (l, g) = log_acquisition(self.spec, self.model, self.beta, &x, true);
        if l <= LOG_FLOOR {
            return Some(vec![0.0; u.len()]);
        }
        g
    }
}
