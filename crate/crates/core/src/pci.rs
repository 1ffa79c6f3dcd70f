//! Optimal node placement for piecewise-constant interpolation of a monotone 1D
//! function under the sup-norm cost.
//!
//! With nodes `x_1 < ... < x_M` the interpolant is `f(a)` up to `x_1` and `f(x_j)` on
//! `(x_j, x_{j+1}]`, so the worst error is the largest increment of `f` between
//! consecutive points of `a, x_1, ..., x_M, b`. Equalizing the increments is optimal and
//! gives `x_m = f^{-1}(f(a) + m (f(b) - f(a)) / (M + 1))`: nodes cluster where `|f'|`
//! is large.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

type Map = Box<dyn Fn(f64) -> f64 + Send + Sync>;

const MONOTONE_GRID: usize = 10_000;
const INVERSE_PROBES: usize = 1000;
const INVERSE_TOLERANCE: f64 = 1e-9;
const BISECTION_TOLERANCE: f64 = 1e-12;

/// Strictly monotone `f` on `[a, b]` with an optional analytic inverse.
pub struct MonotoneFunction1D {
    name: String,
    forward: Map,
    inverse: Option<Map>,
    a: f64,
    b: f64,
    /// +1 for increasing, -1 for decreasing.
    sign: f64,
}

impl fmt::Debug for MonotoneFunction1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneFunction1D")
            .field("name", &self.name)
            .field("interval", &[self.a, self.b])
            .field("increasing", &(self.sign > 0.0))
            .field("analytic_inverse", &self.inverse.is_some())
            .finish()
    }
}

impl MonotoneFunction1D {
    /// A function without an inverse; node placement falls back to bisection.
    pub fn new(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        Self::build(name.into(), Box::new(forward), None, a, b)
    }

    pub fn with_inverse(
        name: impl Into<String>,
        forward: impl Fn(f64) -> f64 + Send + Sync + 'static,
        inverse: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a: f64,
        b: f64,
    ) -> Result<Self> {
        Self::build(name.into(), Box::new(forward), Some(Box::new(inverse)), a, b)
    }

    fn build(name: String, forward: Map, inverse: Option<Map>, a: f64, b: f64) -> Result<Self> {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(Error::invalid(format!("interval [{a}, {b}] is empty")));
        }
        let (fa, fb) = (forward(a), forward(b));
        if !(fa.is_finite() && fb.is_finite()) || fa == fb {
            return Err(Error::invalid(format!("{name} is not strictly monotone on [{a}, {b}]")));
        }
        let sign = if fb > fa { 1.0 } else { -1.0 };
        let mut prev = sign * fa;
        for i in 1..=MONOTONE_GRID {
            let x = a + (b - a) * i as f64 / MONOTONE_GRID as f64;
            let v = sign * forward(x);
            if !(v > prev) {
                return Err(Error::invalid(format!(
                    "{name} is not strictly monotone on [{a}, {b}] (near x = {x})"
                )));
            }
            prev = v;
        }
        if let Some(inv) = &inverse {
            for i in 0..=INVERSE_PROBES {
                let x = a + (b - a) * i as f64 / INVERSE_PROBES as f64;
                let back = inv(forward(x));
                if !((back - x).abs() <= INVERSE_TOLERANCE * x.abs().max(1.0)) {
                    return Err(Error::invalid(format!(
                        "inverse of {name} is inconsistent at x = {x} (got {back})"
                    )));
                }
            }
        }
        Ok(Self {
            name,
            forward,
            inverse,
            a,
            b,
            sign,
        })
    }

    pub fn log(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::invalid("log needs a positive interval"));
        }
        Self::with_inverse("log", f64::ln, f64::exp, a, b)
    }

    pub fn exp(a: f64, b: f64) -> Result<Self> {
        Self::with_inverse("exp", f64::exp, f64::ln, a, b)
    }

    /// `slope * x + intercept`.
    pub fn linear(slope: f64, intercept: f64, a: f64, b: f64) -> Result<Self> {
        Self::with_inverse(
            "linear",
            move |x| slope * x + intercept,
            move |y| (y - intercept) / slope,
            a,
            b,
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.forward)(x)
    }

    /// `f^{-1}(y)` for `y` between `f(a)` and `f(b)`.
    pub fn invert(&self, y: f64) -> f64 {
        match &self.inverse {
            Some(inv) => inv(y).clamp(self.a, self.b),
            None => self.bisect(y),
        }
    }

    fn bisect(&self, y: f64) -> f64 {
        let target = self.sign * y;
        let (mut lo, mut hi) = (self.a, self.b);
        while hi - lo > BISECTION_TOLERANCE * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sign * self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn check_nodes(&self, nodes: &[f64]) -> Result<()> {
        if nodes.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::invalid("nodes must be sorted in increasing order"));
        }
        if nodes.iter().any(|x| !(self.a..=self.b).contains(x)) {
            return Err(Error::invalid(format!("nodes must lie in [{}, {}]", self.a, self.b)));
        }
        Ok(())
    }
}

/// The left-anchored step interpolant at `x`.
pub fn pci_evaluate(nodes: &[f64], f: &MonotoneFunction1D, x: f64) -> Result<f64> {
    f.check_nodes(nodes)?;
    let j = nodes.partition_point(|n| *n < x);
    Ok(if j == 0 { f.eval(f.a) } else { f.eval(nodes[j - 1]) })
}

/// The sup-norm error of the interpolant: the largest absolute increment of `f` over
/// the segments cut by the nodes.
pub fn cinf_cost(nodes: &[f64], f: &MonotoneFunction1D) -> Result<f64> {
    f.check_nodes(nodes)?;
    Ok(increments(nodes, f).into_iter().fold(0.0, f64::max))
}

/// `|f(x_1) - f(a)|, |f(x_2) - f(x_1)|, ..., |f(b) - f(x_M)|`.
pub fn increments(nodes: &[f64], f: &MonotoneFunction1D) -> Vec<f64> {
    let mut values = Vec::with_capacity(nodes.len() + 2);
    values.push(f.eval(f.a));
    values.extend(nodes.iter().map(|x| f.eval(*x)));
    values.push(f.eval(f.b));
    values.windows(2).map(|w| (w[1] - w[0]).abs()).collect()
}

/// The `m` nodes whose images split `[f(a), f(b)]` uniformly.
pub fn optimal_nodes(f: &MonotoneFunction1D, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::invalid("at least one node is required"));
    }
    let (fa, fb) = (f.eval(f.a), f.eval(f.b));
    Ok((1..=m)
        .map(|k| f.invert(fa + k as f64 * (fb - fa) / (m + 1) as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCheck {
    /// Bin edges, `bins + 1` values.
    pub edges: Vec<f64>,
    /// Fraction of optimal nodes per bin.
    pub node_fractions: Vec<f64>,
    /// Mass of the normalized `|f'|` per bin.
    pub gradient_mass: Vec<f64>,
    /// Total-variation distance between the two.
    pub tv_distance: f64,
}

/// Compares the histogram of [`optimal_nodes`] with the density proportional to `|f'|`,
/// with `f'` taken by central differences.
pub fn node_density_check(f: &MonotoneFunction1D, m: usize, bins: usize) -> Result<DensityCheck> {
    if bins == 0 {
        return Err(Error::invalid("at least one bin is required"));
    }
    let nodes = optimal_nodes(f, m)?;
    let (a, b) = (f.a, f.b);
    let width = (b - a) / bins as f64;
    let edges: Vec<f64> = (0..=bins).map(|i| a + i as f64 * width).collect();
    let mut counts = vec![0usize; bins];
    for x in &nodes {
        let i = (((x - a) / width) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let node_fractions: Vec<f64> = counts.iter().map(|c| *c as f64 / m as f64).collect();

    const SUB: usize = 200;
    let h = width / SUB as f64;
    let step = 1e-6 * (b - a);
    let derivative = |x: f64| {
        let lo = (x - step).max(a);
        let hi = (x + step).min(b);
        ((f.eval(hi) - f.eval(lo)) / (hi - lo)).abs()
    };
    let mut gradient_mass: Vec<f64> = (0..bins)
        .map(|i| (0..SUB).map(|k| derivative(edges[i] + (k as f64 + 0.5) * h) * h).sum())
        .collect();
    let total: f64 = gradient_mass.iter().sum();
    for g in &mut gradient_mass {
        *g /= total;
    }
    let tv_distance = 0.5
        * node_fractions
            .iter()
            .zip(&gradient_mass)
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>();
    Ok(DensityCheck {
        edges,
        node_fractions,
        gradient_mass,
        tv_distance,
    })
}
