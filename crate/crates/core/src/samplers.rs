//! Baseline point selection: uniform random, prior sampling, sequential Sobol,
//! Latin hypercube designs and regular lattices.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::prior::InputPrior;
use crate::sobol::SobolSequence;
use crate::space::Bounds;

/// One point per stratum in every dimension of the unit cube mapped onto `bounds`.
pub fn lhs_design<R: Rng + ?Sized>(bounds: &Bounds, n: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::invalid("an LHS design needs at least one point"));
    }
    let dim = bounds.dim();
    let mut pts = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, p) in pts.iter_mut().enumerate() {
            let u = (perm[i] as f64 + rng.random::<f64>()) / n as f64;
            p[d] = bounds.low(d) + u * bounds.width(d);
        }
    }
    Ok(pts)
}

/// Seeded variant of [`lhs_design`].
pub fn lhs_design_seeded(bounds: &Bounds, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    lhs_design(bounds, n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Equally spaced lattice with `m^(1/D)` points per axis, box endpoints included.
///
/// A single point per axis sits at the box center.
pub fn grid_design(bounds: &Bounds, m: usize) -> Result<Vec<Vec<f64>>> {
    let dim = bounds.dim();
    if m == 0 {
        return Err(Error::invalid("a grid needs at least one point"));
    }
    let per_axis = (m as f64).powf(1.0 / dim as f64).round() as usize;
    if per_axis.checked_pow(dim as u32) != Some(m) {
        return Err(Error::invalid(format!(
            "{m} points do not form a lattice in {dim} dimensions"
        )));
    }
    let axis = |d: usize, i: usize| {
        if per_axis == 1 {
            bounds.low(d) + 0.5 * bounds.width(d)
        } else if i == per_axis - 1 {
            bounds.high(d)
        } else {
            bounds.low(d) + bounds.width(d) * i as f64 / (per_axis - 1) as f64
        }
    };
    let mut pts = Vec::with_capacity(m);
    for flat in 0..m {
        let mut rest = flat;
        let mut p = vec![0.0; dim];
        for d in (0..dim).rev() {
            p[d] = axis(d, rest % per_axis);
            rest /= per_axis;
        }
        pts.push(p);
    }
    Ok(pts)
}

/// `n` independent draws from the input prior.
pub fn sample_truncated_gaussian(prior: &InputPrior, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| prior.sample(&mut rng)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    Prior,
    Sobol,
    LhsOneShot,
    LhsSequential,
    Grid,
}

#[derive(Debug, Clone)]
enum State {
    Uniform(ChaCha8Rng),
    Prior(InputPrior, ChaCha8Rng),
    Sobol(SobolSequence),
    Pool { points: Vec<Vec<f64>>, next: usize },
}

/// A stateful point emitter over a box.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
    bounds: Bounds,
    state: State,
}

impl Sampler {
    pub fn uniform(bounds: Bounds, seed: u64) -> Self {
        Self {
            kind: SamplerKind::Uniform,
            bounds,
            state: State::Uniform(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    /// Independent draws from `prior`, clipped to `bounds`.
    pub fn prior(bounds: Bounds, prior: InputPrior, seed: u64) -> Result<Self> {
        if prior.dim() != bounds.dim() {
            return Err(Error::invalid("prior and bounds dimensions differ"));
        }
        Ok(Self {
            kind: SamplerKind::Prior,
            bounds,
            state: State::Prior(prior, ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    /// The Sobol sequence; independent of any seed.
    pub fn sobol(bounds: Bounds) -> Result<Self> {
        let seq = SobolSequence::new(bounds.dim())?;
        Ok(Self {
            kind: SamplerKind::Sobol,
            bounds,
            state: State::Sobol(seq),
        })
    }

    /// A pre-generated LHS pool of `pool` points emitted in random order.
    pub fn lhs_sequential(bounds: Bounds, pool: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = lhs_design(&bounds, pool, &mut rng)?;
        points.shuffle(&mut rng);
        Ok(Self {
            kind: SamplerKind::LhsSequential,
            bounds,
            state: State::Pool { points, next: 0 },
        })
    }

    /// The points of one LHS design of size `n`.
    pub fn lhs_oneshot(bounds: Bounds, n: usize, seed: u64) -> Result<Self> {
        let points = lhs_design_seeded(&bounds, n, seed)?;
        Ok(Self {
            kind: SamplerKind::LhsOneShot,
            bounds,
            state: State::Pool { points, next: 0 },
        })
    }

    /// The points of the `m`-point lattice.
    pub fn grid(bounds: Bounds, m: usize) -> Result<Self> {
        let points = grid_design(&bounds, m)?;
        Ok(Self {
            kind: SamplerKind::Grid,
            bounds,
            state: State::Pool { points, next: 0 },
        })
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    /// Points left in a finite pool; `None` for unbounded samplers.
    pub fn remaining(&self) -> Option<usize> {
        match &self.state {
            State::Pool { points, next } => Some(points.len() - next),
            _ => None,
        }
    }

    pub fn next_point(&mut self) -> Result<Vec<f64>> {
        let mut x = match &mut self.state {
            State::Uniform(rng) => self.bounds.sample_uniform(rng),
            State::Prior(prior, rng) => prior.sample(rng),
            State::Sobol(seq) => self.bounds.denormalize(&seq.next_point()),
            State::Pool { points, next } => {
                let p = points.get(*next).cloned().ok_or(Error::PoolExhausted {
                    size: points.len(),
                })?;
                *next += 1;
                p
            }
        };
        self.bounds.clamp(&mut x);
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prior::TruncatedGaussian;
    use proptest::prelude::*;

    fn strata(points: &[Vec<f64>], bounds: &Bounds, d: usize) -> Vec<usize> {
        let n = points.len();
        let mut counts = vec![0; n];
        for p in points {
            let u = (p[d] - bounds.low(d)) / bounds.width(d);
            counts[((u * n as f64) as usize).min(n - 1)] += 1;
        }
        counts
    }

    #[test]
    fn lhs_stratification() {
        for (dim, n) in [(1, 4), (2, 20), (3, 50)] {
            let b = Bounds::cube(0.0, 1.0, dim).unwrap();
            let pts = lhs_design_seeded(&b, n, 42).unwrap();
            for d in 0..dim {
                assert!(strata(&pts, &b, d).iter().all(|c| *c == 1));
            }
        }
        let b = Bounds::cube(0.0, 1.0, 2).unwrap();
        assert_ne!(lhs_design_seeded(&b, 20, 1).unwrap(), lhs_design_seeded(&b, 20, 2).unwrap());
        assert!(lhs_design_seeded(&b, 0, 1).is_err());
    }

    #[test]
    fn grid_examples() {
        let b = Bounds::cube(0.1, 10.0, 1).unwrap();
        let g: Vec<f64> = grid_design(&b, 4).unwrap().into_iter().map(|p| p[0]).collect();
        let expected = [0.1, 3.4, 6.7, 10.0];
        for (a, e) in g.iter().zip(expected) {
            assert!((a - e).abs() < 1e-12);
        }
        assert_eq!(g[3], 10.0);
        let two: Vec<f64> = grid_design(&b, 2).unwrap().into_iter().map(|p| p[0]).collect();
        assert_eq!(two, vec![0.1, 10.0]);

        let b2 = Bounds::cube(0.1, 10.0, 2).unwrap();
        let g2 = grid_design(&b2, 25).unwrap();
        assert_eq!(g2.len(), 25);
        let axis = [0.1, 2.575, 5.05, 7.525, 10.0];
        for p in &g2 {
            for v in p {
                assert!(axis.iter().any(|a| (a - v).abs() < 1e-12));
            }
        }
        assert!(matches!(grid_design(&b2, 24), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn sobol_sampler_scales_to_the_box() {
        let mut s = Sampler::sobol(Bounds::cube(0.0, 10.0, 1).unwrap()).unwrap();
        let pts: Vec<f64> = (0..3).map(|_| s.next_point().unwrap()[0]).collect();
        assert_eq!(pts, vec![5.0, 7.5, 2.5]);
    }

    #[test]
    fn sequential_lhs_emits_its_pool_once() {
        let b = Bounds::cube(0.1, 10.0, 1).unwrap();
        let mut s = Sampler::lhs_sequential(b.clone(), 20, 9).unwrap();
        let mut emitted: Vec<Vec<f64>> = (0..20).map(|_| s.next_point().unwrap()).collect();
        assert!(matches!(s.next_point(), Err(Error::PoolExhausted { size: 20 })));
        let mut pool = lhs_design(&b, 20, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let key = |p: &Vec<f64>| p[0];
        emitted.sort_by(|a, c| key(a).total_cmp(&key(c)));
        pool.sort_by(|a, c| key(a).total_cmp(&key(c)));
        assert_eq!(emitted, pool);
        assert!(strata(&emitted, &b, 0).iter().all(|c| *c == 1));
    }

    #[test]
    fn uniform_is_reproducible() {
        let b = Bounds::cube(0.1, 10.0, 2).unwrap();
        let mut a = Sampler::uniform(b.clone(), 5);
        let mut c = Sampler::uniform(b.clone(), 5);
        for _ in 0..100 {
            let p = a.next_point().unwrap();
            assert!(b.contains(&p));
            assert_eq!(p, c.next_point().unwrap());
        }
    }

    #[test]
    fn truncated_gaussian_examples() {
        let chl = InputPrior::new(vec![TruncatedGaussian::new(45.0, 30.0, 20.0, 90.0).unwrap()]).unwrap();
        assert!(sample_truncated_gaussian(&chl, 5000, 1)
            .iter()
            .all(|p| (20.0..=90.0).contains(&p[0])));

        let narrow = InputPrior::new(vec![TruncatedGaussian::new(5.0, 1e-6, 0.0, 10.0).unwrap()]).unwrap();
        let xs: Vec<f64> = sample_truncated_gaussian(&narrow, 1000, 2).into_iter().map(|p| p[0]).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        assert!(sd < 1e-4 * 10.0 && (mean - 5.0).abs() < 1e-4);

        let lai = TruncatedGaussian::new(3.5, 4.5, 0.0, 10.0).unwrap();
        let prior = InputPrior::new(vec![lai]).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = sample_truncated_gaussian(&prior, n, 3).into_iter().map(|p| p[0]).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = (lai.truncated_variance() / n as f64).sqrt();
        assert!((mean - lai.truncated_mean()).abs() < 3.0 * se);
    }

    /// Largest gap between the empirical CDF and the uniform CDF over a test lattice.
    fn discrepancy_proxy(points: &[Vec<f64>]) -> f64 {
        let dim = points[0].len();
        let steps: usize = 16;
        let mut worst: f64 = 0.0;
        let corners = steps.pow(dim as u32);
        for c in 0..corners {
            let mut rest = c;
            let mut corner = vec![0.0; dim];
            for v in corner.iter_mut() {
                *v = ((rest % steps) + 1) as f64 / steps as f64;
                rest /= steps;
            }
            let volume: f64 = corner.iter().product();
            let inside = points
                .iter()
                .filter(|p| p.iter().zip(&corner).all(|(a, b)| a < b))
                .count() as f64
                / points.len() as f64;
            worst = worst.max((inside - volume).abs());
        }
        worst
    }

    #[test]
    fn sobol_discrepancy_decreases() {
        for dim in 1..=3 {
            let mut s = SobolSequence::new(dim).unwrap();
            let pts = s.take(1023);
            let mut prev = f64::INFINITY;
            for k in [4, 6, 8, 10] {
                let d = discrepancy_proxy(&pts[..(1 << k) - 1]);
                assert!(d < prev, "dim {dim}, 2^{k}: {d} >= {prev}");
                prev = d;
            }
        }
    }

    proptest! {
        #[test]
        fn every_sampler_stays_in_bounds(seed in 0u64..1000, dim in 1usize..4) {
            let b = Bounds::new((0..dim).map(|d| [d as f64 - 1.0, d as f64 + 2.5]).collect()).unwrap();
            let prior = InputPrior::new(
                (0..dim).map(|d| TruncatedGaussian::new(d as f64, 1.0, d as f64 - 1.0, d as f64 + 2.5).unwrap()).collect(),
            ).unwrap();
            let mut samplers = vec![
                Sampler::uniform(b.clone(), seed),
                Sampler::prior(b.clone(), prior, seed).unwrap(),
                Sampler::sobol(b.clone()).unwrap(),
                Sampler::lhs_sequential(b.clone(), 30, seed).unwrap(),
                Sampler::lhs_oneshot(b.clone(), 30, seed).unwrap(),
                Sampler::grid(b.clone(), 3usize.pow(dim as u32)).unwrap(),
            ];
            for s in samplers.iter_mut() {
                while s.remaining() != Some(0) {
                    let p = s.next_point().unwrap();
                    prop_assert!(b.contains(&p));
                    if s.remaining().is_none() && s.kind() != SamplerKind::Grid {
                        // unbounded samplers: a handful of draws suffices
                        for _ in 0..30 {
                            prop_assert!(b.contains(&s.next_point().unwrap()));
                        }
                        break;
                    }
                }
            }
        }
    }
}
