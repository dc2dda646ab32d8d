//! Homoscedastic Gaussian process regression.
//!
//! Training maximizes the marginal likelihood over the ARD-SE kernel
//! hyperparameters and a constant noise variance; prediction uses the
//! closed form
//!
//!   a_* = k_*^T (K + sigma^2 I)^-1 y
//!   c_*^2 = k_** - k_*^T (K + sigma^2 I)^-1 k_*
//!
//! with total predictive variance c_*^2 + sigma^2.

use crate::error::{Error, Result};
use crate::kernels::{cholesky_with_jitter, ArdSeKernel};
use crate::optim::{minimize, MinimizeResult, OptimConfig};
use crate::standardize::Standardizer;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Diag, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Noise variance floor, as a fraction of the target variance.
pub const NOISE_VARIANCE_FLOOR: f64 = 1e-10;

/// Serializable description of a trained model; factorizations are
/// rebuilt deterministically by [`GpModel::from_parts`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GpParams {
    pub kernel: ArdSeKernel,
    /// Raw log noise variance; the effective noise variance is
    /// `noise_floor + exp(log_noise_variance)`.
    pub log_noise_variance: f64,
    pub noise_floor: f64,
    /// Training inputs in standardized units, row-major `n x d`.
    pub x_train: Vec<Vec<f64>>,
    /// Training targets in standardized units.
    pub y_train: Vec<f64>,
    pub standardizer: Standardizer,
}

/// A trained GP. Immutable after construction; safe to share across threads
/// for concurrent prediction.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: ArdSeKernel,
    log_noise_variance: f64,
    noise_floor: f64,
    x_train: Array2<f64>,
    y_train: Array1<f64>,
    standardizer: Standardizer,
    chol: Array2<f64>,
    alpha: Array1<f64>,
    jitter: f64,
    final_nlml: f64,
}

/// Prediction in original units.
#[derive(Debug, Clone, Copy)]
pub struct GpPrediction {
    pub mean: f64,
    /// Latent variance c_*^2 (regression uncertainty).
    pub latent_variance: f64,
    /// Constant process noise sigma^2.
    pub noise_variance: f64,
    /// c_*^2 + sigma^2.
    pub total_variance: f64,
}

/// Negative log marginal likelihood and its gradient, for hyperparameters
/// packed as `[log l_1 .. log l_d, log sigma_f^2, log sigma^2]`.
///
/// value = 1/2 y^T (K + s^2 I)^-1 y + 1/2 log det(K + s^2 I) + n/2 log 2pi
///
/// The effective noise variance is floored at `NOISE_VARIANCE_FLOOR` times
/// the target variance so noiseless data cannot drive the factorization
/// singular.
pub fn nlml(
    params: &Array1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    let n = x.nrows();
    let d = x.ncols();
    if params.len() != d + 2 {
        return Err(Error::invalid(format!(
            "expected {} hyperparameters, got {}",
            d + 2,
            params.len()
        )));
    }
    if n < 1 || y.len() != n {
        return Err(Error::invalid("inputs and targets must be non-empty and aligned"));
    }
    let kernel = ArdSeKernel::from_params(&params.as_slice().unwrap()[..d + 1])?;
    let log_s2 = params[d + 1];
    let floor = NOISE_VARIANCE_FLOOR * target_variance(y);
    let s2 = floor + log_s2.exp();

    let k = kernel.gram(x)?;
    let mut ky = k.clone();
    for i in 0..n {
        ky[[i, i]] += s2;
    }
    let (l, _jitter) = cholesky_with_jitter(&ky, kernel.signal_variance())?;
    let linv = l
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &Array2::eye(n))
        .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
    let w = linv.t().dot(&linv);
    let alpha = w.dot(&y);
    let log_det = 2.0 * l.diag().mapv(f64::ln).sum();
    let value = 0.5 * y.dot(&alpha) + 0.5 * log_det + 0.5 * n as f64 * (2.0 * PI).ln();

    // dNLML/dtheta = -1/2 tr((alpha alpha^T - W) dK/dtheta)
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            m[[i, j]] = alpha[i] * alpha[j] - w[[i, j]];
        }
    }
    let kernel_dots = kernel.grad_dots(x, &k, &m);
    let mut grad = Array1::zeros(d + 2);
    for (j, dot) in kernel_dots.iter().enumerate() {
        grad[j] = -0.5 * dot;
    }
    let trace_m: f64 = m.diag().sum();
    grad[d + 1] = -0.5 * trace_m * log_s2.exp();
    Ok((value, grad))
}

fn target_variance(y: ArrayView1<f64>) -> f64 {
    let n = y.len() as f64;
    let mean = y.sum() / n;
    y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n
}

impl GpModel {
    /// Fit by marginal-likelihood maximization. Inputs and targets are in
    /// original units; they are standardized internally and predictions are
    /// reported back in original units.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &OptimConfig) -> Result<Self> {
        config.validate()?;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::invalid("GP fit needs at least 2 samples"));
        }
        if y.len() != n {
            return Err(Error::invalid("inputs and targets must be aligned"));
        }
        if !x.iter().all(|v| v.is_finite()) || !y.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("training data must be finite"));
        }
        let standardizer = Standardizer::fit(x, y)?;
        let xs = standardizer.transform_inputs(x);
        let ys = standardizer.transform_targets(y);

        let x0 = initial_params(xs.view(), ys.view());
        let result = minimize(
            |p| eval_or_infinity(p, xs.view(), ys.view()),
            &x0,
            config,
        )?;
        Self::build(xs, ys, &result, standardizer)
    }

    fn build(
        xs: Array2<f64>,
        ys: Array1<f64>,
        result: &MinimizeResult,
        standardizer: Standardizer,
    ) -> Result<Self> {
        let d = xs.ncols();
        let kernel = ArdSeKernel::from_params(&result.x.as_slice().unwrap()[..d + 1])?;
        let log_noise_variance = result.x[d + 1];
        let noise_floor = NOISE_VARIANCE_FLOOR * target_variance(ys.view());
        let mut model = GpModel {
            kernel,
            log_noise_variance,
            noise_floor,
            x_train: xs,
            y_train: ys,
            standardizer,
            chol: Array2::zeros((0, 0)),
            alpha: Array1::zeros(0),
            jitter: 0.0,
            final_nlml: result.value,
        };
        model.rebuild_caches()?;
        Ok(model)
    }

    /// Construct a model from explicit parameters (inverse of [`params`](Self::params)).
    /// Inputs/targets in `parts` are interpreted as standardized units.
    pub fn from_parts(parts: GpParams) -> Result<Self> {
        let n = parts.x_train.len();
        if n == 0 || parts.y_train.len() != n {
            return Err(Error::invalid("model parts have empty or misaligned training data"));
        }
        let d = parts.kernel.dim();
        if parts.x_train.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("training rows do not match kernel dimension"));
        }
        let mut xs = Array2::zeros((n, d));
        for (i, row) in parts.x_train.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                xs[[i, j]] = *v;
            }
        }
        let mut model = GpModel {
            kernel: parts.kernel,
            log_noise_variance: parts.log_noise_variance,
            noise_floor: parts.noise_floor,
            x_train: xs,
            y_train: Array1::from_vec(parts.y_train),
            standardizer: parts.standardizer,
            chol: Array2::zeros((0, 0)),
            alpha: Array1::zeros(0),
            jitter: 0.0,
            final_nlml: f64::NAN,
        };
        model.rebuild_caches()?;
        Ok(model)
    }

    pub fn params(&self) -> GpParams {
        GpParams {
            kernel: self.kernel.clone(),
            log_noise_variance: self.log_noise_variance,
            noise_floor: self.noise_floor,
            x_train: self
                .x_train
                .axis_iter(Axis(0))
                .map(|r| r.to_vec())
                .collect(),
            y_train: self.y_train.to_vec(),
            standardizer: self.standardizer.clone(),
        }
    }

    fn rebuild_caches(&mut self) -> Result<()> {
        let n = self.x_train.nrows();
        let k = self.kernel.gram(self.x_train.view())?;
        let s2 = self.noise_variance_standardized();
        let mut ky = k;
        for i in 0..n {
            ky[[i, i]] += s2;
        }
        let (l, jitter) = cholesky_with_jitter(&ky, self.kernel.signal_variance())?;
        let z = l
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &self.y_train)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        let alpha = l
            .t()
            .to_owned()
            .solve_triangular(UPLO::Upper, Diag::NonUnit, &z)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        self.chol = l;
        self.alpha = alpha;
        self.jitter = jitter;
        Ok(())
    }

    /// Predictive distribution at `xstar` (original units).
    pub fn predict(&self, xstar: ArrayView1<f64>) -> Result<GpPrediction> {
        let xq = self.standardizer.transform_input(xstar);
        let kstar = self.kernel.cross(self.x_train.view(), xq.view())?;
        let mean_std = kstar.dot(&self.alpha);
        let v = self
            .chol
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &kstar)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        let latent_std = (self.kernel.signal_variance() - v.dot(&v)).max(0.0);
        let s2 = self.noise_variance_standardized();
        Ok(GpPrediction {
            mean: self.standardizer.mean_to_original(mean_std),
            latent_variance: self.standardizer.variance_to_original(latent_std),
            noise_variance: self.standardizer.variance_to_original(s2),
            total_variance: self.standardizer.variance_to_original(latent_std + s2),
        })
    }

    /// Gaussian log predictive density of `ystar` at `xstar` (original units).
    pub fn log_density(&self, xstar: ArrayView1<f64>, ystar: f64) -> Result<f64> {
        let p = self.predict(xstar)?;
        let resid = ystar - p.mean;
        Ok(-0.5 * (2.0 * PI * p.total_variance).ln() - 0.5 * resid * resid / p.total_variance)
    }

    /// Effective noise variance in standardized units (floor included).
    pub fn noise_variance_standardized(&self) -> f64 {
        self.noise_floor + self.log_noise_variance.exp()
    }

    /// Effective noise variance in original units.
    pub fn noise_variance(&self) -> f64 {
        self.standardizer
            .variance_to_original(self.noise_variance_standardized())
    }

    pub fn kernel(&self) -> &ArdSeKernel {
        &self.kernel
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    /// Final negative log marginal likelihood reached by `fit` (standardized
    /// units); NaN for models built via `from_parts`.
    pub fn final_nlml(&self) -> f64 {
        self.final_nlml
    }

    /// Residual of the solved training system `(K + s^2 I + jitter I) alpha
    /// = y`, infinity norm relative to `|y|`. Kept as a cheap internal
    /// consistency check.
    pub fn alpha_residual(&self) -> Result<f64> {
        let k = self.kernel.gram(self.x_train.view())?;
        let s2 = self.noise_variance_standardized() + self.jitter;
        let mut r = k.dot(&self.alpha);
        for i in 0..r.len() {
            r[i] += s2 * self.alpha[i] - self.y_train[i];
        }
        let ynorm = self.y_train.iter().fold(1e-30f64, |m, v| m.max(v.abs()));
        Ok(r.iter().fold(0.0f64, |m, v| m.max(v.abs())) / ynorm)
    }
}

/// Scale-aware initialization: log l_d from the input spread, signal variance
/// from the target variance, noise at 1% of the target variance.
fn initial_params(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let mut p = Array1::zeros(d + 2);
    for j in 0..d {
        let col = x.column(j);
        let mean = col.sum() / n;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        p[j] = if sd > 1e-12 { sd.ln() } else { 0.0 };
    }
    let var_y = {
        let v = target_variance(y);
        if v > 0.0 {
            v
        } else {
            1.0
        }
    };
    p[d] = var_y.ln();
    p[d + 1] = (0.01 * var_y).ln();
    p
}

fn eval_or_infinity(
    params: &Array1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> (f64, Array1<f64>) {
    match nlml(params, x, y) {
        Ok((v, g)) => (v, g),
        Err(_) => (f64::INFINITY, Array1::zeros(params.len())),
    }
}
