//! ARD squared-exponential kernel and its hyperparameter derivatives.
//!
//! k(x, x') = sigma_f^2 * exp(-0.5 * sum_d (x_d - x'_d)^2 / l_d^2)
//!
//! One length scale per input dimension (automatic relevance determination).
//! All hyperparameters are stored and optimized in log space so positivity
//! never needs an explicit constraint.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{Cholesky, UPLO};
use serde::{Deserialize, Serialize};

/// ARD-SE kernel hyperparameters, in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArdSeKernel {
    /// Per-dimension log length scales (log of input units).
    pub log_lengthscales: Vec<f64>,
    /// Log signal variance, log(sigma_f^2).
    pub log_signal_variance: f64,
}

impl ArdSeKernel {
    pub fn new(log_lengthscales: Vec<f64>, log_signal_variance: f64) -> Result<Self> {
        if log_lengthscales.is_empty() {
            return Err(Error::invalid("kernel needs at least one input dimension"));
        }
        if !log_lengthscales.iter().all(|v| v.is_finite()) || !log_signal_variance.is_finite() {
            return Err(Error::invalid("kernel hyperparameters must be finite"));
        }
        Ok(Self {
            log_lengthscales,
            log_signal_variance,
        })
    }

    /// Isotropic unit kernel in `dim` dimensions: all length scales 1, sigma_f^2 = 1.
    pub fn unit(dim: usize) -> Self {
        Self {
            log_lengthscales: vec![0.0; dim],
            log_signal_variance: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.log_lengthscales.len()
    }

    /// Number of hyperparameters (dim length scales + signal variance).
    pub fn n_params(&self) -> usize {
        self.dim() + 1
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    fn lengthscales(&self) -> Vec<f64> {
        self.log_lengthscales.iter().map(|v| v.exp()).collect()
    }

    /// Pack hyperparameters as `[log l_1, .., log l_d, log sigma_f^2]`.
    pub fn to_params(&self) -> Vec<f64> {
        let mut p = self.log_lengthscales.clone();
        p.push(self.log_signal_variance);
        p
    }

    /// Inverse of [`to_params`](Self::to_params).
    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.len() < 2 {
            return Err(Error::invalid("kernel parameter vector too short"));
        }
        let (ls, sv) = params.split_at(params.len() - 1);
        Self::new(ls.to_vec(), sv[0])
    }

    fn check_dim(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::invalid(format!(
                "input dimension {} does not match kernel dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Evaluate k(x, x2).
    pub fn eval(&self, x: ArrayView1<f64>, x2: ArrayView1<f64>) -> Result<f64> {
        self.check_dim(x)?;
        self.check_dim(x2)?;
        let ls = self.lengthscales();
        let mut sq = 0.0;
        for d in 0..self.dim() {
            let diff = (x[d] - x2[d]) / ls[d];
            sq += diff * diff;
        }
        Ok(self.signal_variance() * (-0.5 * sq).exp())
    }

    /// Gram matrix `[K]_ij = k(x_i, x_j)` for the rows of `x`.
    pub fn gram(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::invalid(format!(
                "input dimension {} does not match kernel dimension {}",
                x.ncols(),
                self.dim()
            )));
        }
        let n = x.nrows();
        let sf2 = self.signal_variance();
        let scaled = self.scale_inputs(x);
        let mut k = Array2::zeros((n, n));
        for i in 0..n {
            k[[i, i]] = sf2;
            let xi = scaled.row(i);
            for j in 0..i {
                let xj = scaled.row(j);
                let mut sq = 0.0;
                for d in 0..self.dim() {
                    let diff = xi[d] - xj[d];
                    sq += diff * diff;
                }
                let v = sf2 * (-0.5 * sq).exp();
                k[[i, j]] = v;
                k[[j, i]] = v;
            }
        }
        Ok(k)
    }

    /// Cross-covariance vector `[k_*]_i = k(x_i, xstar)`.
    pub fn cross(&self, x: ArrayView2<f64>, xstar: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(xstar)?;
        let mut out = Array1::zeros(x.nrows());
        for (i, row) in x.rows().into_iter().enumerate() {
            out[i] = self.eval(row, xstar)?;
        }
        Ok(out)
    }

    /// Derivative of the Gram matrix with respect to log hyperparameter
    /// `param_index` (indices `0..dim` address log length scales, `dim`
    /// addresses log sigma_f^2).
    ///
    /// In log space: dK/d(log l_d) = K .* (x_d - x'_d)^2 / l_d^2 and
    /// dK/d(log sigma_f^2) = K.
    pub fn gram_grad(&self, x: ArrayView2<f64>, param_index: usize) -> Result<Array2<f64>> {
        if param_index >= self.n_params() {
            return Err(Error::invalid(format!(
                "kernel parameter index {} out of range ({} parameters)",
                param_index,
                self.n_params()
            )));
        }
        let k = self.gram(x)?;
        if param_index == self.dim() {
            return Ok(k);
        }
        let l = self.log_lengthscales[param_index].exp();
        let n = x.nrows();
        let mut g = k;
        for i in 0..n {
            for j in 0..n {
                let diff = (x[[i, param_index]] - x[[j, param_index]]) / l;
                g[[i, j]] *= diff * diff;
            }
        }
        Ok(g)
    }

    /// Inner products `tr(W * dK/dtheta_j)` for every hyperparameter `j`,
    /// computed in one pass. `weights` must be symmetric and `k` the Gram
    /// matrix of `x` under this kernel. This is the hot path of marginal
    /// likelihood and bound gradients.
    pub fn grad_dots(
        &self,
        x: ArrayView2<f64>,
        k: &Array2<f64>,
        weights: &Array2<f64>,
    ) -> Vec<f64> {
        let n = x.nrows();
        let d = self.dim();
        let ls = self.lengthscales();
        let mut dots = vec![0.0; d + 1];
        for i in 0..n {
            for j in 0..n {
                let wk = weights[[i, j]] * k[[i, j]];
                for (dd, dot) in dots.iter_mut().take(d).enumerate() {
                    let diff = (x[[i, dd]] - x[[j, dd]]) / ls[dd];
                    *dot += wk * diff * diff;
                }
                dots[d] += wk;
            }
        }
        dots
    }

    fn scale_inputs(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let ls = self.lengthscales();
        let mut scaled = x.to_owned();
        for mut row in scaled.rows_mut() {
            for d in 0..ls.len() {
                row[d] /= ls[d];
            }
        }
        scaled
    }
}

/// Cholesky factorization with the crate-wide jitter policy: add
/// `1e-8 * scale` to the diagonal, escalate by 10x on failure up to
/// `1e-4 * scale`, then report a conditioning error.
///
/// Returns the lower factor and the jitter that was applied.
pub fn cholesky_with_jitter(mat: &Array2<f64>, scale: f64) -> Result<(Array2<f64>, f64)> {
    let n = mat.nrows();
    // 1e-8 * scale, escalating by 10x to 1e-4 * scale (5 attempts total).
    for attempt in 0..5 {
        let jitter = 1e-8 * scale * 10f64.powi(attempt);
        let mut m = mat.clone();
        for i in 0..n {
            m[[i, i]] += jitter;
        }
        if let Ok(l) = m.cholesky(UPLO::Lower) {
            return Ok((l, jitter));
        }
    }
    Err(Error::Conditioning(format!(
        "Cholesky failed for {n}x{n} matrix even with jitter {:.3e}",
        1e-4 * scale
    )))
}
