//! Truncated Gaussian input priors.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::space::Bounds;

/// `N_T(x | mean, std, min, max)`: a Gaussian restricted and renormalized to `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedGaussian {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl TruncatedGaussian {
    pub fn new(mean: f64, std: f64, min: f64, max: f64) -> Result<Self> {
        let t = Self { mean, std, min, max };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.std > 0.0 && self.std.is_finite() && self.mean.is_finite()) {
            return Err(Error::invalid(format!(
                "truncated Gaussian needs a finite mean and positive std, got ({}, {})",
                self.mean, self.std
            )));
        }
        if !(self.min < self.max && self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::invalid(format!(
                "truncation interval [{}, {}] is empty",
                self.min, self.max
            )));
        }
        if self.mass() <= 0.0 {
            return Err(Error::invalid("truncation interval carries no probability mass"));
        }
        Ok(())
    }

    fn standardized(&self) -> (f64, f64) {
        (
            (self.min - self.mean) / self.std,
            (self.max - self.mean) / self.std,
        )
    }

    /// Probability mass of the untruncated Gaussian inside `[min, max]`.
    fn mass(&self) -> f64 {
        let n = standard_normal();
        let (a, b) = self.standardized();
        n.cdf(b) - n.cdf(a)
    }

    pub fn density(&self, x: f64) -> f64 {
        if x < self.min || x > self.max {
            return 0.0;
        }
        let z = (x - self.mean) / self.std;
        standard_normal().pdf(z) / (self.std * self.mass())
    }

    pub fn log_density(&self, x: f64) -> f64 {
        if x < self.min || x > self.max {
            return f64::NEG_INFINITY;
        }
        let z = (x - self.mean) / self.std;
        -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() - (self.std * self.mass()).ln()
    }

    /// Derivative of the log density inside the truncation interval.
    pub fn log_density_derivative(&self, x: f64) -> f64 {
        -(x - self.mean) / (self.std * self.std)
    }

    /// Mean of the truncated distribution.
    pub fn truncated_mean(&self) -> f64 {
        let n = standard_normal();
        let (a, b) = self.standardized();
        self.mean + self.std * (n.pdf(a) - n.pdf(b)) / self.mass()
    }

    /// Variance of the truncated distribution.
    pub fn truncated_variance(&self) -> f64 {
        let n = standard_normal();
        let (a, b) = self.standardized();
        let z = self.mass();
        let (pa, pb) = (n.pdf(a), n.pdf(b));
        let r = (pa - pb) / z;
        self.std * self.std * (1.0 + (a * pa - b * pb) / z - r * r)
    }

    /// Inverse-CDF draw restricted to `[min, max]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let n = standard_normal();
        let (a, b) = self.standardized();
        let (ca, cb) = (n.cdf(a), n.cdf(b));
        let p = ca + rng.random::<f64>() * (cb - ca);
        let p = p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        (self.mean + self.std * n.inverse_cdf(p)).clamp(self.min, self.max)
    }
}

/// Independent truncated Gaussians, one per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TruncatedGaussian>", into = "Vec<TruncatedGaussian>")]
pub struct InputPrior {
    dims: Vec<TruncatedGaussian>,
}

impl InputPrior {
    pub fn new(dims: Vec<TruncatedGaussian>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::invalid("input prior needs at least one dimension"));
        }
        for d in &dims {
            d.validate()?;
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[TruncatedGaussian] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// The truncation box.
    pub fn support(&self) -> Bounds {
        Bounds::new(self.dims.iter().map(|d| [d.min, d.max]).collect())
            .expect("validated intervals")
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.dims.iter().zip(x).map(|(d, v)| d.density(*v)).product()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.dims.iter().zip(x).map(|(d, v)| d.log_density(*v)).sum()
    }

    /// Gradient of the log density at a point inside the support.
    pub fn log_density_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.dims
            .iter()
            .zip(x)
            .map(|(d, v)| d.log_density_derivative(*v))
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dims.iter().map(|d| d.sample(rng)).collect()
    }
}

impl TryFrom<Vec<TruncatedGaussian>> for InputPrior {
    type Error = Error;
    fn try_from(dims: Vec<TruncatedGaussian>) -> Result<Self> {
        InputPrior::new(dims)
    }
}

impl From<InputPrior> for Vec<TruncatedGaussian> {
    fn from(p: InputPrior) -> Self {
        p.dims
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn density_integrates_to_one() {
        let t = TruncatedGaussian::new(3.5, 4.5, 0.0, 10.0).unwrap();
        let n = 100_000;
        let h = 10.0 / n as f64;
        let integral: f64 = (0..n).map(|i| t.density((i as f64 + 0.5) * h) * h).sum();
        assert!((integral - 1.0).abs() < 1e-8);
        assert_eq!(t.density(-0.1), 0.0);
        assert_eq!(t.density(10.1), 0.0);
        assert!((t.log_density(2.0) - t.density(2.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn moments_match_quadrature() {
        let t = TruncatedGaussian::new(45.0, 30.0, 20.0, 90.0).unwrap();
        let n = 200_000;
        let h = 70.0 / n as f64;
        let (mut m1, mut m2) = (0.0, 0.0);
        for i in 0..n {
            let x = 20.0 + (i as f64 + 0.5) * h;
            let w = t.density(x) * h;
            m1 += x * w;
            m2 += x * x * w;
        }
        assert!((t.truncated_mean() - m1).abs() < 1e-6);
        assert!((t.truncated_variance() - (m2 - m1 * m1)).abs() < 1e-4);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TruncatedGaussian::new(0.0, 0.0, 0.0, 1.0).is_err());
        assert!(TruncatedGaussian::new(0.0, 1.0, 1.0, 1.0).is_err());
        assert!(InputPrior::new(vec![]).is_err());
        let json = r#"[{"mean": 1.0, "std": 1.0, "min": 0.0, "max": 2.0, "extra": 1}]"#;
        assert!(serde_json::from_str::<InputPrior>(json).is_err());
    }

    #[test]
    fn samples_stay_in_support() {
        let t = TruncatedGaussian::new(45.0, 30.0, 20.0, 90.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let x = t.sample(&mut rng);
            assert!((20.0..=90.0).contains(&x));
        }
    }
}
