//! Single-output Gaussian-process interpolation and regression.
//!
//! The model is zero-mean with a unit-amplitude exponentiated quadratic kernel and an
//! optional nugget `v2` on the diagonal. With `v2 = 0` the predictive mean interpolates
//! the training outputs and the predictive variance vanishes at every node.

mod hyper;

pub use hyper::{
    bandwidth_grid, condition_estimate, max_stable_bandwidth, select_hyperparameters,
    HyperConfig, HyperStrategy, Hyperparameters, NuggetPolicy, BANDWIDTH_RANGE,
    DEFAULT_CONDITION_BOUND, NUGGET_RANGE,
};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{kernel_matrix, KernelParams};
use crate::space::{squared_distance, DUPLICATE_TOLERANCE};

/// Round-off band below zero in which latent variances are clamped silently.
pub const VARIANCE_ROUNDOFF: f64 = 1e-12;

/// Factorizations whose diagonal-ratio condition estimate exceeds this are rejected.
const MAX_FACTOR_CONDITION: f64 = 1e13;

/// Diagonal-ratio limit accepted for the nugget-free factor.
const NOISE_FREE_CONDITION: f64 = 1e12;

/// A fitted single-output GP. Immutable after [`GpModel::fit`].
#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    nugget: f64,
    inputs: DMatrix<f64>,
    outputs: DVector<f64>,
    // lower Cholesky factor of K + nugget I
    factor: DMatrix<f64>,
    alpha: DVector<f64>,
    // factor of the nugget-free K (plus the smallest stabilizing jitter); `None` when
    // the model has no nugget and `factor` already is that factor
    noise_free: Option<NoiseFreeFactor>,
}

#[derive(Debug, Clone)]
struct NoiseFreeFactor {
    factor: DMatrix<f64>,
    jitter: f64,
}

/// Everything the acquisition needs at one query point.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPrediction {
    pub mean: f64,
    /// `k(x,x) - k_x^T (K + v2 I)^{-1} k_x`, clamped at zero.
    pub latent_variance: f64,
    pub mean_gradient: Vec<f64>,
    /// Gradient of the latent variance; the nugget is a constant offset.
    pub variance_gradient: Vec<f64>,
    /// Hessian of the predictive mean, `D x D`.
    pub mean_hessian: DMatrix<f64>,
}

impl GpModel {
    /// Fits the model on `inputs` (`D x m`, one node per column) and one output row.
    pub fn fit(
        inputs: DMatrix<f64>,
        outputs: DVector<f64>,
        params: KernelParams,
        nugget: f64,
    ) -> Result<Self> {
        let m = inputs.ncols();
        if m == 0 || inputs.nrows() == 0 {
            return Err(Error::invalid("cannot fit a GP without nodes"));
        }
        if outputs.len() != m {
            return Err(Error::invalid(format!(
                "{} outputs for {m} nodes",
                outputs.len()
            )));
        }
        if !(nugget >= 0.0 && nugget.is_finite()) {
            return Err(Error::invalid(format!("nugget must be >= 0, got {nugget}")));
        }
        let k = kernel_matrix(&inputs, &params, nugget);
        let factor = match k.clone().cholesky() {
            Some(c) => c.unpack(),
            None => {
                return Err(Error::IllConditioned {
                    condition_estimate: condition_estimate(&k),
                })
            }
        };
        let ratio = diagonal_ratio_estimate(&factor);
        if ratio > MAX_FACTOR_CONDITION {
            return Err(Error::IllConditioned {
                condition_estimate: ratio,
            });
        }
        let mut alpha = outputs.clone();
        solve_lower_in_place(&factor, alpha.as_mut_slice());
        solve_upper_transposed_in_place(&factor, alpha.as_mut_slice());
        // one step of iterative refinement
        let mut resid = &outputs - &k * &alpha;
        solve_lower_in_place(&factor, resid.as_mut_slice());
        solve_upper_transposed_in_place(&factor, resid.as_mut_slice());
        alpha += resid;
        let noise_free = if nugget > 0.0 {
            Some(noise_free_factor(&k, nugget))
        } else {
            None
        };
        Ok(Self {
            params,
            nugget,
            inputs,
            outputs,
            factor,
            alpha,
            noise_free,
        })
    }

    pub fn params(&self) -> KernelParams {
        self.params
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DVector<f64> {
        &self.outputs
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Lower Cholesky factor `L` with `L L^T = K + v2 I`.
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn len(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn node(&self, i: usize) -> &[f64] {
        let d = self.input_dim();
        &self.inputs.as_slice()[i * d..(i + 1) * d]
    }

    fn kernel_vector(&self, x: &[f64]) -> (Vec<f64>, bool) {
        let tol = DUPLICATE_TOLERANCE * DUPLICATE_TOLERANCE;
        let mut at_node = false;
        let k = (0..self.len())
            .map(|i| {
                let sq = squared_distance(x, self.node(i));
                at_node |= sq < tol;
                self.params.eval_sq(sq)
            })
            .collect();
        (k, at_node)
    }

    fn snaps_latent(&self, near_node: bool) -> bool {
        near_node && self.nugget == 0.0
    }

    /// `k_x^T alpha`.
    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        let (k, _) = self.kernel_vector(x);
        k.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum()
    }

    fn raw_latent_variance(&self, x: &[f64]) -> (f64, bool) {
        let (mut k, near) = self.kernel_vector(x);
        solve_lower_in_place(&self.factor, &mut k);
        (1.0 - k.iter().map(|v| v * v).sum::<f64>(), self.snaps_latent(near))
    }

    /// Variance of the latent function, `k(x,x) - k_x^T (K + v2 I)^{-1} k_x`.
    ///
    /// Exactly zero at training nodes of an interpolating model.
    pub fn latent_variance(&self, x: &[f64]) -> f64 {
        let (v, at_node) = self.raw_latent_variance(x);
        if at_node {
            0.0
        } else {
            v.max(0.0)
        }
    }

    /// Predictive variance `v2 + k(x,x) - k_x^T (K + v2 I)^{-1} k_x`.
    pub fn predict_variance(&self, x: &[f64]) -> f64 {
        self.nugget + self.latent_variance(x)
    }

    /// As [`GpModel::predict_variance`], but reports negative latent variances beyond
    /// the round-off band instead of clamping them.
    pub fn predict_variance_checked(&self, x: &[f64]) -> Result<f64> {
        let (v, at_node) = self.raw_latent_variance(x);
        if !at_node && v < -VARIANCE_ROUNDOFF {
            return Err(Error::NegativeVariance { value: v });
        }
        Ok(self.predict_variance(x))
    }

    /// Gradient of the predictive mean, `sum_i alpha_i grad k(x, x_i)`.
    pub fn mean_gradient(&self, x: &[f64]) -> Vec<f64> {
        let d = self.input_dim();
        let delta2 = self.params.bandwidth() * self.params.bandwidth();
        let mut g = vec![0.0; d];
        for i in 0..self.len() {
            let xi = self.node(i);
            let c = -(self.alpha[i] * self.params.eval_sq(squared_distance(x, xi))) / delta2;
            for (gd, (a, b)) in g.iter_mut().zip(x.iter().zip(xi)) {
                *gd += c * (a - b);
            }
        }
        g
    }

    pub fn mean_gradient_norm(&self, x: &[f64]) -> f64 {
        crate::space::norm(&self.mean_gradient(x))
    }

    /// Gradient of the predictive variance, `-2 (dk_x/dx)^T (K + v2 I)^{-1} k_x`.
    pub fn variance_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.local(x).variance_gradient
    }

    /// Mean, latent variance and their derivatives at `x` in one pass.
    pub fn local(&self, x: &[f64]) -> LocalPrediction {
        let d = self.input_dim();
        let m = self.len();
        let delta2 = self.params.bandwidth() * self.params.bandwidth();
        let (k, near) = self.kernel_vector(x);
        let at_node = self.snaps_latent(near);

        let mut v = k.clone();
        solve_lower_in_place(&self.factor, &mut v);
        let raw = 1.0 - v.iter().map(|a| a * a).sum::<f64>();
        let latent_variance = if at_node { 0.0 } else { raw.max(0.0) };
        // w = (K + v2 I)^{-1} k_x
        solve_upper_transposed_in_place(&self.factor, &mut v);
        let w = v;

        let mut mean = 0.0;
        let mut mean_gradient = vec![0.0; d];
        let mut variance_gradient = vec![0.0; d];
        let mut mean_hessian = DMatrix::<f64>::zeros(d, d);
        let mut diff = vec![0.0; d];
        for i in 0..m {
            let xi = self.node(i);
            for (dd, (a, b)) in diff.iter_mut().zip(x.iter().zip(xi)) {
                *dd = a - b;
            }
            let ak = self.alpha[i] * k[i];
            mean += ak;
            let cm = -ak / delta2;
            let cv = 2.0 * w[i] * k[i] / delta2;
            for j in 0..d {
                mean_gradient[j] += cm * diff[j];
                variance_gradient[j] += cv * diff[j];
            }
            let ch = ak / delta2;
            for c in 0..d {
                for r in 0..d {
                    let outer = diff[r] * diff[c] / delta2;
                    let eye = if r == c { 1.0 } else { 0.0 };
                    mean_hessian[(r, c)] += ch * (outer - eye);
                }
            }
        }
        if at_node || raw <= 0.0 {
            variance_gradient.iter_mut().for_each(|g| *g = 0.0);
        }
        LocalPrediction {
            mean,
            latent_variance,
            mean_gradient,
            variance_gradient,
            mean_hessian,
        }
    }

    /// Jitter added to the nugget-free kernel matrix to factorize it (0 when exact).
    pub fn noise_free_jitter(&self) -> f64 {
        self.noise_free.as_ref().map_or(0.0, |n| n.jitter)
    }

    /// `k(x,x) - k_x^T K^{-1} k_x` with the nugget left out of `K`, and its gradient.
    ///
    /// Vanishes at every node whatever the nugget. Equals the latent variance of an
    /// interpolating model.
    pub fn noise_free_local(&self, x: &[f64], with_gradient: bool) -> (f64, Vec<f64>) {
        let d = self.input_dim();
        let (k, near) = self.kernel_vector(x);
        if near {
            return (0.0, vec![0.0; d]);
        }
        let factor = self.noise_free.as_ref().map_or(&self.factor, |n| &n.factor);
        let mut v = k.clone();
        solve_lower_in_place(factor, &mut v);
        let raw = 1.0 - v.iter().map(|a| a * a).sum::<f64>();
        if raw <= 0.0 {
            return (0.0, vec![0.0; d]);
        }
        let mut grad = vec![0.0; d];
        if with_gradient {
            solve_upper_transposed_in_place(factor, &mut v);
            let delta2 = self.params.bandwidth() * self.params.bandwidth();
            for i in 0..self.len() {
                let c = 2.0 * v[i] * k[i] / delta2;
                for (g, (a, b)) in grad.iter_mut().zip(x.iter().zip(self.node(i))) {
                    *g += c * (a - b);
                }
            }
        }
        (raw, grad)
    }

    pub fn noise_free_variance(&self, x: &[f64]) -> f64 {
        self.noise_free_local(x, false).0
    }

    /// Log marginal likelihood `-y^T alpha / 2 - sum log L_ii - m log(2 pi) / 2`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let fit = self.outputs.dot(&self.alpha);
        let logdet: f64 = self.factor.diagonal().iter().map(|v| v.ln()).sum();
        -0.5 * fit - logdet - 0.5 * self.len() as f64 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Factor of `K_with_nugget - nugget I`, adding the smallest jitter from a decade
/// ladder that makes it factorizable with a moderate diagonal ratio.
fn noise_free_factor(k_with_nugget: &DMatrix<f64>, nugget: f64) -> NoiseFreeFactor {
    let mut jitter = 0.0;
    loop {
        let mut k = k_with_nugget.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter - nugget;
        }
        if let Some(c) = k.cholesky() {
            let factor = c.unpack();
            if diagonal_ratio_estimate(&factor) <= NOISE_FREE_CONDITION || jitter >= nugget {
                return NoiseFreeFactor { factor, jitter };
            }
        }
        if jitter >= nugget {
            // the nugget itself is always factorizable
            let factor = k_with_nugget.clone().cholesky().expect("fitted matrix").unpack();
            return NoiseFreeFactor { factor, jitter: nugget };
        }
        jitter = if jitter == 0.0 { 1e-12 } else { (jitter * 10.0).min(nugget) };
    }
}

/// `(max L_ii / min L_ii)^2`, a cheap lower bound on the condition number of `L L^T`.
pub(crate) fn diagonal_ratio_estimate(factor: &DMatrix<f64>) -> f64 {
    let diag = factor.diagonal();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    (max / min).powi(2)
}

/// Solves `L y = b` in place for lower-triangular `L` (column oriented).
pub(crate) fn solve_lower_in_place(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for j in 0..n {
        let col = &data[j * n..(j + 1) * n];
        let yj = b[j] / col[j];
        b[j] = yj;
        for i in (j + 1)..n {
            b[i] -= col[i] * yj;
        }
    }
}

/// Solves `L^T y = b` in place for lower-triangular `L`.
pub(crate) fn solve_upper_transposed_in_place(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    let data = l.as_slice();
    for i in (0..n).rev() {
        let col = &data[i * n..(i + 1) * n];
        let s: f64 = ((i + 1)..n).map(|j| col[j] * b[j]).sum();
        b[i] = (b[i] - s) / col[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model_1d(xs: &[f64], ys: &[f64], delta: f64, nugget: f64) -> Result<GpModel> {
        GpModel::fit(
            DMatrix::from_row_slice(1, xs.len(), xs),
            DVector::from_row_slice(ys),
            KernelParams::new(delta).unwrap(),
            nugget,
        )
    }

    /// Random nodes and outputs; interpolating models get a stable bandwidth, and
    /// node sets too clustered for any grid bandwidth are redrawn.
    fn random_model(rng: &mut ChaCha8Rng, d: usize, m: usize, nugget: f64) -> GpModel {
        loop {
            let x = DMatrix::from_fn(d, m, |_, _| rng.random::<f64>());
            let y = DVector::from_fn(m, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let mut delta = 0.08 + 0.12 * rng.random::<f64>();
            if nugget == 0.0 {
                match max_stable_bandwidth(&x, 0.0, DEFAULT_CONDITION_BOUND) {
                    Ok(stable) => delta = delta.min(stable),
                    Err(_) => continue,
                }
            }
            return GpModel::fit(x, y, KernelParams::new(delta).unwrap(), nugget).unwrap();
        }
    }

    fn fd<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|d| {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[d] += h;
                xm[d] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        diff / crate::space::norm(a).max(crate::space::norm(b)).max(floor)
    }

    #[test]
    fn single_node_fit() {
        let g = model_1d(&[0.3], &[5.0], 1.0, 0.0).unwrap();
        assert_eq!(g.alpha().as_slice(), &[5.0]);
        assert_eq!(g.mean_gradient_norm(&[0.3]), 0.0);
    }

    #[test]
    fn two_node_fit_matches_hand_solve() {
        let g = model_1d(&[0.0, 2f64.sqrt()], &[1.0, 1.0], 1.0, 0.0).unwrap();
        let expected = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((expected - 0.731059).abs() < 1e-6);
        for a in g.alpha().iter() {
            assert!((a - expected).abs() < 1e-12);
        }
        assert!((g.predict_mean(&[0.0]) - 1.0).abs() < 1e-12);
        // midpoint of a symmetric configuration
        let mid = [2f64.sqrt() / 2.0];
        assert!(g.mean_gradient_norm(&mid) < 1e-10);
        assert!(g.variance_gradient(&mid)[0].abs() < 1e-10);
    }

    #[test]
    fn coincident_nodes_are_ill_conditioned() {
        match model_1d(&[0.5, 0.5], &[1.0, 2.0], 1.0, 0.0) {
            Err(Error::IllConditioned { condition_estimate }) => {
                assert!(condition_estimate > 1e13)
            }
            other => panic!("expected ill-conditioned error, got {other:?}"),
        }
    }

    #[test]
    fn shape_errors() {
        assert!(model_1d(&[], &[], 1.0, 0.0).is_err());
        assert!(model_1d(&[0.1, 0.2], &[1.0], 1.0, 0.0).is_err());
        assert!(model_1d(&[0.1], &[1.0], 1.0, -0.1).is_err());
    }

    #[test]
    fn variance_examples() {
        let g = model_1d(&[0.4], &[1.0], 0.2, 0.02).unwrap();
        let expected: f64 = 0.02 + 1.0 - 1.0 / 1.02;
        assert!((expected - 0.039608).abs() < 1e-6);
        assert!((g.predict_variance(&[0.4]) - expected).abs() < 1e-14);
        // far away: prior variance and mean reversion
        assert!((g.predict_variance(&[40.0]) - 1.02).abs() < 1e-6);
        assert!(g.predict_mean(&[40.0]).abs() < 1e-6);

        let interp = model_1d(&[0.1, 0.5, 0.9], &[1.0, -1.0, 2.0], 0.3, 0.0).unwrap();
        for x in [0.1, 0.5, 0.9] {
            assert_eq!(interp.predict_variance(&[x]), 0.0);
            assert_eq!(interp.variance_gradient(&[x]), vec![0.0]);
        }
    }

    #[test]
    fn alpha_and_factor_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let g = random_model(&mut rng, 2, 25, 0.01);
            let k = kernel_matrix(g.inputs(), &g.params(), g.nugget());
            let resid = &k * g.alpha() - g.outputs();
            assert!(resid.norm() < 1e-8 * g.outputs().norm());
            let rec = g.factor() * g.factor().transpose();
            assert!((rec - &k).norm() / k.norm() < 1e-10);
        }
    }

    #[test]
    fn interpolation_exactness() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 1..=3 {
            let x = DMatrix::from_fn(d, 12, |_, _| rng.random::<f64>());
            let y = DVector::from_fn(12, |_, _| rng.random::<f64>() * 4.0 - 2.0);
            let delta = max_stable_bandwidth(&x, 0.0, DEFAULT_CONDITION_BOUND).unwrap();
            let g = GpModel::fit(x, y, KernelParams::new(delta).unwrap(), 0.0).unwrap();
            for i in 0..g.len() {
                let xi = g.node(i).to_vec();
                let yi = g.outputs()[i];
                assert!((g.predict_mean(&xi) - yi).abs() <= 1e-8 * (1.0 + yi.abs()));
                assert!(g.predict_variance(&xi) <= 1e-8);
            }
        }
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut probes = 0;
        while probes < 120 {
            let d = 1 + probes % 3;
            let g = random_model(&mut rng, d, 8, if probes % 2 == 0 { 0.0 } else { 0.02 });
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            let local = g.local(&x);
            let fd_mean = fd(|z| g.predict_mean(z), &x, 1e-6);
            let e = rel_err(&local.mean_gradient, &fd_mean, 1e-3);
            assert!(e < 1e-5, "{e} {:?} {:?} delta {} alpha {}", local.mean_gradient, fd_mean, g.params().bandwidth(), g.alpha().amax());
            assert_eq!(local.mean_gradient, g.mean_gradient(&x));
            assert!((local.mean - g.predict_mean(&x)).abs() < 1e-12);
            if local.latent_variance > 1e-6 {
                let fd_var = fd(|z| g.predict_variance(z), &x, 1e-6);
                let e = rel_err(&local.variance_gradient, &fd_var, 1e-3);
                assert!(e < 1e-5, "{e} {:?} {:?} var {} nug {} delta {}", local.variance_gradient, fd_var, local.latent_variance, g.nugget(), g.params().bandwidth());
            }
            // Hessian columns against differences of the analytic gradient
            for c in 0..d {
                let col = fd(|z| g.mean_gradient(z)[c], &x, 1e-5);
                let h: Vec<f64> = (0..d).map(|r| local.mean_hessian[(r, c)]).collect();
                assert!(rel_err(&h, &col, 1e-2) < 1e-5);
            }
            probes += 1;
        }
    }

    #[test]
    fn adding_a_node_never_increases_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for case in 0..40 {
            let d = 1 + case % 2;
            let m = 6;
            let pts: Vec<f64> = (0..d * (m + 1)).map(|_| rng.random::<f64>()).collect();
            let delta = KernelParams::new(0.1 + 0.2 * rng.random::<f64>()).unwrap();
            let y: Vec<f64> = (0..=m).map(|_| rng.random::<f64>()).collect();
            let small = GpModel::fit(
                DMatrix::from_vec(d, m, pts[..d * m].to_vec()),
                DVector::from_vec(y[..m].to_vec()),
                delta,
                0.0,
            );
            let large = GpModel::fit(
                DMatrix::from_vec(d, m + 1, pts.clone()),
                DVector::from_vec(y.clone()),
                delta,
                0.0,
            );
            let (Ok(small), Ok(large)) = (small, large) else { continue };
            for _ in 0..50 {
                let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                assert!(large.predict_variance(&x) <= small.predict_variance(&x) + 1e-9);
            }
        }
    }

    #[test]
    fn variance_is_nonnegative_and_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_model(&mut rng, 2, 30, 0.0);
        for _ in 0..500 {
            let x = [rng.random::<f64>() * 1.4 - 0.2, rng.random::<f64>() * 1.4 - 0.2];
            assert!(g.predict_variance(&x) >= 0.0);
            assert!(g.predict_variance_checked(&x).is_ok());
        }
    }

    #[test]
    fn noise_free_variance_vanishes_at_nodes_under_a_nugget() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let reg = random_model(&mut rng, 2, 10, 0.02);
        let interp = GpModel::fit(reg.inputs().clone(), reg.outputs().clone(), reg.params(), 0.0).unwrap();
        assert_eq!(reg.noise_free_jitter(), 0.0);
        for i in 0..reg.len() {
            assert_eq!(reg.noise_free_variance(reg.node(i)), 0.0);
            assert!(reg.latent_variance(reg.node(i)) > 0.0);
        }
        for _ in 0..100 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let (v, g) = reg.noise_free_local(&x, true);
            assert!((v - interp.latent_variance(&x)).abs() < 1e-9);
            if v > 1e-6 {
                let fd = fd(|z| reg.noise_free_variance(z), &x, 1e-6);
                assert!(rel_err(&g, &fd, 1e-3) < 1e-5);
            }
        }
    }

    #[test]
    fn noise_free_factor_jitters_when_needed() {
        // nearly coincident nodes: singular without the nugget
        let g = model_1d(&[0.5, 0.5 + 1e-9, 0.9], &[1.0, 1.0, 0.0], 0.3, 0.02).unwrap();
        assert!(g.noise_free_jitter() > 0.0 && g.noise_free_jitter() <= 0.02);
        assert!(g.noise_free_variance(&[0.7]) >= 0.0);
    }

    #[test]
    fn marginal_likelihood_of_single_node() {
        let g = model_1d(&[0.0], &[2.0], 1.0, 0.0).unwrap();
        let expected = -0.5 * 4.0 - 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((g.log_marginal_likelihood() - expected).abs() < 1e-12);
    }

    #[test]
    fn triangular_solves_agree_with_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_model(&mut rng, 2, 10, 0.01);
        let b: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
        let mut ours = b.clone();
        solve_lower_in_place(g.factor(), &mut ours);
        solve_upper_transposed_in_place(g.factor(), &mut ours);
        let k = kernel_matrix(g.inputs(), &g.params(), g.nugget());
        let theirs = k.cholesky().unwrap().solve(&DVector::from_vec(b));
        for (a, b) in ours.iter().zip(theirs.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
