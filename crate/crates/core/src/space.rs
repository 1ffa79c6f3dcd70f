//! Axis-aligned input boxes and the affine map to the unit hypercube.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pairwise distance (in unit-cube coordinates) below which two nodes are the same node.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;

/// A closed box `[low_d, high_d]` per input dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Bounds {
    intervals: Vec<[f64; 2]>,
}

impl Bounds {
    pub fn new(intervals: Vec<[f64; 2]>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::invalid("bounds need at least one dimension"));
        }
        for (d, [lo, hi]) in intervals.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::invalid(format!(
                    "dimension {d}: bounds [{lo}, {hi}] are not a nonempty finite interval"
                )));
            }
        }
        Ok(Self { intervals })
    }

    /// The unit hypercube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            intervals: vec![[0.0, 1.0]; dim.max(1)],
        }
    }

    /// The same interval repeated over `dim` dimensions.
    pub fn cube(low: f64, high: f64, dim: usize) -> Result<Self> {
        Self::new(vec![[low, high]; dim])
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[[f64; 2]] {
        &self.intervals
    }

    pub fn low(&self, d: usize) -> f64 {
        self.intervals[d][0]
    }

    pub fn high(&self, d: usize) -> f64 {
        self.intervals[d][1]
    }

    pub fn width(&self, d: usize) -> f64 {
        self.intervals[d][1] - self.intervals[d][0]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.intervals).all(|(v, [lo, hi])| {
                // tolerate round-off from the normalize/denormalize round trip
                let slack = 1e-12 * (hi - lo);
                *v >= lo - slack && *v <= hi + slack
            })
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "point has dimension {}, bounds have {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(Error::OutOfBounds { point: x.to_vec() });
        }
        Ok(())
    }

    /// Maps a point of the box onto `[0, 1]^D`.
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.intervals)
            .map(|(v, [lo, hi])| (v - lo) / (hi - lo))
            .collect()
    }

    /// Inverse of [`Bounds::normalize`].
    pub fn denormalize(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.intervals)
            .map(|(v, [lo, hi])| lo + v * (hi - lo))
            .collect()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, [lo, hi]) in x.iter_mut().zip(&self.intervals) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.intervals
            .iter()
            .map(|[lo, hi]| lo + rng.random::<f64>() * (hi - lo))
            .collect()
    }
}

impl TryFrom<Vec<[f64; 2]>> for Bounds {
    type Error = Error;

    fn try_from(intervals: Vec<[f64; 2]>) -> Result<Self> {
        Bounds::new(intervals)
    }
}

impl From<Bounds> for Vec<[f64; 2]> {
    fn from(b: Bounds) -> Self {
        b.intervals
    }
}

pub(crate) fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    x.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_round_trip() {
        let b = Bounds::new(vec![[20.0, 90.0], [0.0, 10.0]]).unwrap();
        let x = [45.0, 3.5];
        let u = b.normalize(&x);
        assert!((u[0] - 25.0 / 70.0).abs() < 1e-15);
        let back = b.denormalize(&u);
        assert!((back[0] - 45.0).abs() < 1e-12 && (back[1] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_interval() {
        assert!(Bounds::new(vec![[1.0, 1.0]]).is_err());
        assert!(Bounds::new(vec![]).is_err());
    }

    #[test]
    fn check_reports_out_of_bounds() {
        let b = Bounds::cube(0.1, 10.0, 1).unwrap();
        assert!(matches!(b.check(&[10.5]), Err(Error::OutOfBounds { .. })));
        assert!(b.check(&[10.0]).is_ok());
        assert!(matches!(b.check(&[1.0, 2.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn deserializes_from_pairs() {
        let b: Bounds = serde_json::from_str("[[0.1, 10.0], [0.1, 10.0]]").unwrap();
        assert_eq!(b.dim(), 2);
        assert!(serde_json::from_str::<Bounds>("[[1.0, 0.0]]").is_err());
    }
}
