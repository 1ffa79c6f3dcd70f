//! Exponentiated quadratic kernel `k(x, z) = exp(-|x - z|^2 / (2 delta^2))`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::squared_distance;

/// Bandwidth of the exponentiated quadratic kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct KernelParams {
    bandwidth: f64,
}

impl KernelParams {
    pub fn new(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::invalid(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    #[inline]
    pub(crate) fn eval_sq(&self, squared_distance: f64) -> f64 {
        (-squared_distance / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }
}

impl TryFrom<f64> for KernelParams {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        KernelParams::new(v)
    }
}

impl From<KernelParams> for f64 {
    fn from(p: KernelParams) -> f64 {
        p.bandwidth
    }
}

fn check_dims(x: &[f64], z: &[f64]) -> Result<()> {
    if x.len() != z.len() {
        return Err(Error::invalid(format!(
            "kernel arguments have dimensions {} and {}",
            x.len(),
            z.len()
        )));
    }
    Ok(())
}

pub fn kernel_eval(x: &[f64], z: &[f64], params: &KernelParams) -> Result<f64> {
    check_dims(x, z)?;
    Ok(params.eval_sq(squared_distance(x, z)))
}

/// Gradient of `k(x, z)` with respect to `x`: `-(k(x, z) / delta^2) (x - z)`.
pub fn kernel_gradient(x: &[f64], z: &[f64], params: &KernelParams) -> Result<Vec<f64>> {
    check_dims(x, z)?;
    let k = params.eval_sq(squared_distance(x, z));
    let scale = -k / (params.bandwidth * params.bandwidth);
    Ok(x.iter().zip(z).map(|(a, b)| scale * (a - b)).collect())
}

/// `K + nugget * I` for the columns of `inputs` (one node per column).
pub fn kernel_matrix(inputs: &DMatrix<f64>, params: &KernelParams, nugget: f64) -> DMatrix<f64> {
    let m = inputs.ncols();
    let d = inputs.nrows();
    let data = inputs.as_slice();
    let mut k = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let xj = &data[j * d..(j + 1) * d];
        k[(j, j)] = 1.0 + nugget;
        for i in (j + 1)..m {
            let v = params.eval_sq(squared_distance(&data[i * d..(i + 1) * d], xj));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}
