//! Variational heteroscedastic Gaussian process regression.
//!
//! Two latent processes are regressed jointly: the mean f(x) and the log
//! noise variance g(x) = log sigma^2(x), each under its own ARD-SE kernel.
//! Training maximizes the marginal variational lower bound
//!
//!   F = log N(y | 0, K_f + R) - 1/4 tr(Sigma) - KL(N(mu, Sigma) || N(mu0 1, K_g))
//!
//! with mu = K_g (Lambda - 1/2 I) 1 + mu0 1, Sigma = (K_g^-1 + Lambda)^-1 and
//! [R]_ii = exp(mu_i - Sigma_ii / 2). Lambda is a positive diagonal
//! variational parameter, optimized in log space together with the kernel
//! hyperparameters and mu0. Prediction follows the closed form
//!
//!   a_*   = k_f*^T (K_f + R)^-1 y
//!   c_*^2 = k_f** - k_f*^T (K_f + R)^-1 k_f*
//!   b_*   = k_g*^T (Lambda - 1/2 I) 1 + mu0
//!   d_*^2 = k_g** - k_g*^T (K_g + Lambda^-1)^-1 k_g*
//!
//! with total predictive variance c_*^2 + exp(b_* + d_*^2 / 2).
//!
//! K_g^-1 is never formed: Sigma and d_*^2 go through the Cholesky factor of
//! A = I + Lambda^1/2 K_g Lambda^1/2, which is always well conditioned.

use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernels::{cholesky_with_jitter, ArdSeKernel};
use crate::optim::{minimize, OptimConfig};
use crate::standardize::Standardizer;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::{Cholesky, Diag, SolveTriangular, UPLO};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Floor keeping Lambda entries strictly positive so Lambda^-1 stays defined.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Exponent cap for the predictive noise term exp(b_* + d_*^2/2); hitting it
/// flags the prediction instead of overflowing.
pub const LOG_NOISE_EXPONENT_CAP: f64 = 700.0;

/// Serializable description of a trained model; caches are rebuilt by
/// [`VhgpModel::from_parts`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VhgpParams {
    pub kernel_f: ArdSeKernel,
    pub kernel_g: ArdSeKernel,
    /// Prior mean of the log noise variance (standardized target units).
    pub mu0: f64,
    /// Diagonal of Lambda; all entries strictly positive.
    pub lambda: Vec<f64>,
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<f64>,
    pub standardizer: Standardizer,
}

/// A trained VHGP. Immutable; safe for concurrent prediction.
#[derive(Debug, Clone)]
pub struct VhgpModel {
    kernel_f: ArdSeKernel,
    kernel_g: ArdSeKernel,
    mu0: f64,
    lambda: Array1<f64>,
    x_train: Array2<f64>,
    y_train: Array1<f64>,
    standardizer: Standardizer,
    // cached factorizations
    chol_ky: Array2<f64>, // lower factor of K_f + R (+ jitter)
    alpha: Array1<f64>,
    chol_a: Array2<f64>, // lower factor of I + Lambda^1/2 K_g Lambda^1/2
    q: Array1<f64>,      // lambda - 1/2
    sqrt_lambda: Array1<f64>,
    final_bound: f64,
}

/// Prediction in original units. `log_noise_mean`/`log_noise_variance` are
/// the posterior mean and variance of g(x_*) (the mean is shifted so that
/// `exp(log_noise_mean)` is a variance in original squared units).
#[derive(Debug, Clone, Copy)]
pub struct VhgpPrediction {
    pub mean: f64,
    pub latent_variance: f64,
    pub log_noise_mean: f64,
    pub log_noise_variance: f64,
    /// exp(b_* + d_*^2 / 2), the expected process noise at the query.
    pub noise_variance: f64,
    pub total_variance: f64,
    /// Set when the noise exponent hit [`LOG_NOISE_EXPONENT_CAP`].
    pub clamped: bool,
}

/// Parameter vector layout for [`bound`]: `[log l_f (d), log sigma_f^2,
/// log l_g (d), log sigma_g^2, mu0, log lambda (n)]`.
pub fn n_bound_params(dim: usize, n: usize) -> usize {
    2 * (dim + 1) + 1 + n
}

/// Packs an initial parameter vector for [`bound`] from its pieces.
pub fn pack_params(
    kernel_f: &ArdSeKernel,
    kernel_g: &ArdSeKernel,
    mu0: f64,
    log_lambda: &Array1<f64>,
) -> Array1<f64> {
    let mut p = Vec::with_capacity(n_bound_params(kernel_f.dim(), log_lambda.len()));
    p.extend_from_slice(&kernel_f.to_params());
    p.extend_from_slice(&kernel_g.to_params());
    p.push(mu0);
    p.extend(log_lambda.iter());
    Array1::from_vec(p)
}

struct BoundPieces {
    value: f64,
    grad: Array1<f64>,
}

/// Variational lower bound and its gradient. Larger is better; training
/// minimizes the negation.
pub fn bound(
    params: &Array1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>)> {
    let p = evaluate_bound(params, x, y)?;
    Ok((p.value, p.grad))
}

fn evaluate_bound(
    params: &Array1<f64>,
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
) -> Result<BoundPieces> {
    let n = x.nrows();
    let d = x.ncols();
    if n < 2 {
        return Err(Error::invalid("VHGP bound needs at least 2 samples"));
    }
    if params.len() != n_bound_params(d, n) {
        return Err(Error::invalid(format!(
            "expected {} parameters, got {}",
            n_bound_params(d, n),
            params.len()
        )));
    }
    let ps = params.as_slice().unwrap();
    let kernel_f = ArdSeKernel::from_params(&ps[..d + 1])?;
    let kernel_g = ArdSeKernel::from_params(&ps[d + 1..2 * d + 2])?;
    let mu0 = ps[2 * d + 2];
    let rho = &ps[2 * d + 3..];
    let exp_rho = Array1::from_iter(rho.iter().map(|r| r.exp()));
    let lambda = exp_rho.mapv(|v| LAMBDA_FLOOR + v);
    if !lambda.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("Lambda overflowed".into()));
    }

    let kf = kernel_f.gram(x)?;
    let kg = kernel_g.gram(x)?;
    let q = lambda.mapv(|v| v - 0.5);
    let mu = kg.dot(&q) + mu0;
    let sqrt_lambda = lambda.mapv(f64::sqrt);

    // A = I + Lambda^1/2 K_g Lambda^1/2
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            a[[i, j]] = sqrt_lambda[i] * kg[[i, j]] * sqrt_lambda[j];
        }
        a[[i, i]] += 1.0;
    }
    let chol_a = a
        .cholesky(UPLO::Lower)
        .map_err(|e| Error::Conditioning(format!("factorization of A failed: {e}")))?;

    // Sigma = K_g - V^T V with V = L_A^-1 Lambda^1/2 K_g
    let mut slk = kg.clone();
    for (i, mut row) in slk.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v * sqrt_lambda[i]);
    }
    let v = chol_a
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &slk)
        .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
    let sigma = &kg - &v.t().dot(&v);
    let sigma_diag = sigma.diag().to_owned();

    let r = Array1::<f64>::from_shape_fn(n, |i| (mu[i] - 0.5 * sigma_diag[i]).exp());
    if !r.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("noise matrix R overflowed".into()));
    }

    let mut ky = kf.clone();
    for i in 0..n {
        ky[[i, i]] += r[i];
    }
    let (chol_ky, _) = cholesky_with_jitter(&ky, kernel_f.signal_variance())?;
    let linv = chol_ky
        .solve_triangular(UPLO::Lower, Diag::NonUnit, &Array2::eye(n))
        .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
    let w = linv.t().dot(&linv);
    let alpha = w.dot(&y);

    let log_det_ky = 2.0 * chol_ky.diag().mapv(f64::ln).sum();
    let log_lik = -0.5 * y.dot(&alpha) - 0.5 * log_det_ky - 0.5 * n as f64 * (2.0 * PI).ln();

    // tr(A^-1) = n - sum_i Sigma_ii lambda_i, log det A from its factor.
    let tr_a_inv = n as f64 - sigma_diag.dot(&lambda);
    let log_det_a = 2.0 * chol_a.diag().mapv(f64::ln).sum();
    let kl = 0.5 * (tr_a_inv + q.dot(&kg.dot(&q)) - n as f64 + log_det_a);
    let value = log_lik - 0.25 * sigma_diag.sum() - kl;
    if !value.is_finite() {
        return Err(Error::Numerical("bound evaluated to a non-finite value".into()));
    }

    // ---- gradient ----
    let mut grad = Array1::zeros(params.len());

    // Mean-kernel block: 1/2 tr((alpha alpha^T - W) dK_f).
    let mut mf = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            mf[[i, j]] = alpha[i] * alpha[j] - w[[i, j]];
        }
    }
    for (j, dot) in kernel_f.grad_dots(x, &kf, &mf).iter().enumerate() {
        grad[j] = 0.5 * dot;
    }

    // u_i = dF/dmu_i = 1/2 ((alpha_i)^2 - W_ii) * r_i
    let u = Array1::<f64>::from_shape_fn(n, |i| 0.5 * (alpha[i] * alpha[i] - w[[i, i]]) * r[i]);

    // Log-noise-kernel block: dF = tr(M_g dK_g) with
    // M_g = q u^T + C^T D C + 1/2 Lambda C C - 1/2 Lambda C - 1/2 q q^T,
    // C = I - Sigma Lambda, D = diag(-1/2 u - 1/4).
    let mut c = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            c[[i, j]] = -sigma[[i, j]] * lambda[j];
        }
        c[[i, i]] += 1.0;
    }
    let mut dc = c.clone();
    for (i, mut row) in dc.rows_mut().into_iter().enumerate() {
        let di = -0.5 * u[i] - 0.25;
        row.mapv_inplace(|v| v * di);
    }
    let ctdc = c.t().dot(&dc);
    let cc = c.dot(&c);
    let mut mg = ctdc;
    for i in 0..n {
        for j in 0..n {
            mg[[i, j]] += q[i] * u[j] + 0.5 * lambda[i] * cc[[i, j]]
                - 0.5 * lambda[i] * c[[i, j]]
                - 0.5 * q[i] * q[j];
        }
    }
    for (j, dot) in kernel_g.grad_dots(x, &kg, &mg).iter().enumerate() {
        grad[d + 1 + j] = *dot;
    }

    // mu0
    grad[2 * d + 2] = u.sum();

    // Lambda block (chain rule through lambda = floor + exp(rho)):
    // dF/dlambda = K_g (u - q) + (Sigma .* Sigma) (u/2 + 1/4 - lambda/2)
    let umq = &u - &q;
    let kg_umq = kg.dot(&umq);
    let coeff = Array1::<f64>::from_shape_fn(n, |i| 0.5 * u[i] + 0.25 - 0.5 * lambda[i]);
    let sigma2 = sigma.mapv(|v| v * v);
    let s2c = sigma2.dot(&coeff);
    for i in 0..n {
        grad[2 * d + 3 + i] = (kg_umq[i] + s2c[i]) * exp_rho[i];
    }

    Ok(BoundPieces { value, grad })
}

impl VhgpModel {
    /// Fit one output by maximizing the variational bound.
    ///
    /// Initialization starts at the homoscedastic solution: the mean kernel
    /// and mu0 come from a GP fit, Lambda = 1/2 I (the flat-noise fixed
    /// point), and the g-kernel starts with doubled length scales and unit
    /// signal variance. Data is standardized internally.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>, config: &OptimConfig) -> Result<Self> {
        config.validate()?;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::invalid("VHGP fit needs at least 2 samples"));
        }
        if y.len() != n {
            return Err(Error::invalid("inputs and targets must be aligned"));
        }
        let warm = GpModel::fit(x, y, config)?;
        Self::fit_warm(x, y, &warm, config)
    }

    /// Fit reusing an already-trained homoscedastic model for initialization.
    pub fn fit_warm(
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        warm: &GpModel,
        config: &OptimConfig,
    ) -> Result<Self> {
        let n = x.nrows();
        let d = x.ncols();
        let standardizer = Standardizer::fit(x, y)?;
        let xs = standardizer.transform_inputs(x);
        let ys = standardizer.transform_targets(y);

        let kernel_f0 = warm.kernel().clone();
        let kernel_g0 = ArdSeKernel::new(
            kernel_f0
                .log_lengthscales
                .iter()
                .map(|l| l + (2.0f64).ln())
                .collect(),
            0.0,
        )?;
        let mu0_init = warm.noise_variance_standardized().ln();
        let log_lambda0 = Array1::from_elem(n, (0.5f64 - LAMBDA_FLOOR).ln());
        let p0 = pack_params(&kernel_f0, &kernel_g0, mu0_init, &log_lambda0);

        let result = minimize(
            |p| match evaluate_bound(p, xs.view(), ys.view()) {
                Ok(b) => (-b.value, -b.grad),
                Err(_) => (f64::INFINITY, Array1::zeros(p.len())),
            },
            &p0,
            config,
        )?;

        let ps = result.x.as_slice().unwrap();
        let kernel_f = ArdSeKernel::from_params(&ps[..d + 1])?;
        let kernel_g = ArdSeKernel::from_params(&ps[d + 1..2 * d + 2])?;
        let mu0 = ps[2 * d + 2];
        let lambda = Array1::from_iter(ps[2 * d + 3..].iter().map(|r| LAMBDA_FLOOR + r.exp()));

        let mut model = VhgpModel {
            kernel_f,
            kernel_g,
            mu0,
            lambda,
            x_train: xs,
            y_train: ys,
            standardizer,
            chol_ky: Array2::zeros((0, 0)),
            alpha: Array1::zeros(0),
            chol_a: Array2::zeros((0, 0)),
            q: Array1::zeros(0),
            sqrt_lambda: Array1::zeros(0),
            final_bound: -result.value,
        };
        model.rebuild_caches()?;
        Ok(model)
    }

    /// Construct from explicit parameters; training data in `parts` is in
    /// standardized units.
    pub fn from_parts(parts: VhgpParams) -> Result<Self> {
        let n = parts.x_train.len();
        if n == 0 || parts.y_train.len() != n || parts.lambda.len() != n {
            return Err(Error::invalid("model parts are empty or misaligned"));
        }
        if parts.lambda.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::invalid("Lambda entries must be strictly positive"));
        }
        let d = parts.kernel_f.dim();
        if parts.kernel_g.dim() != d || parts.x_train.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("kernel and input dimensions disagree"));
        }
        let mut xs = Array2::zeros((n, d));
        for (i, row) in parts.x_train.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                xs[[i, j]] = *v;
            }
        }
        let mut model = VhgpModel {
            kernel_f: parts.kernel_f,
            kernel_g: parts.kernel_g,
            mu0: parts.mu0,
            lambda: Array1::from_vec(parts.lambda),
            x_train: xs,
            y_train: Array1::from_vec(parts.y_train),
            standardizer: parts.standardizer,
            chol_ky: Array2::zeros((0, 0)),
            alpha: Array1::zeros(0),
            chol_a: Array2::zeros((0, 0)),
            q: Array1::zeros(0),
            sqrt_lambda: Array1::zeros(0),
            final_bound: f64::NAN,
        };
        model.rebuild_caches()?;
        Ok(model)
    }

    pub fn params(&self) -> VhgpParams {
        VhgpParams {
            kernel_f: self.kernel_f.clone(),
            kernel_g: self.kernel_g.clone(),
            mu0: self.mu0,
            lambda: self.lambda.to_vec(),
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
        let kg = self.kernel_g.gram(self.x_train.view())?;
        self.q = self.lambda.mapv(|v| v - 0.5);
        self.sqrt_lambda = self.lambda.mapv(f64::sqrt);

        let mut a = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                a[[i, j]] = self.sqrt_lambda[i] * kg[[i, j]] * self.sqrt_lambda[j];
            }
            a[[i, i]] += 1.0;
        }
        self.chol_a = a
            .cholesky(UPLO::Lower)
            .map_err(|e| Error::Conditioning(format!("factorization of A failed: {e}")))?;

        // Sigma_ii and mu_i feed the noise matrix R.
        let mut slk = kg.clone();
        for (i, mut row) in slk.rows_mut().into_iter().enumerate() {
            row.mapv_inplace(|v| v * self.sqrt_lambda[i]);
        }
        let v = self
            .chol_a
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &slk)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        let mu = kg.dot(&self.q) + self.mu0;
        let mut ky = self.kernel_f.gram(self.x_train.view())?;
        for i in 0..n {
            let sigma_ii = kg[[i, i]] - v.column(i).dot(&v.column(i));
            let r = (mu[i] - 0.5 * sigma_ii).exp();
            if !r.is_finite() {
                return Err(Error::Numerical("noise matrix R overflowed".into()));
            }
            ky[[i, i]] += r;
        }
        let (chol_ky, _) = cholesky_with_jitter(&ky, self.kernel_f.signal_variance())?;
        let z = chol_ky
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &self.y_train)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        self.alpha = chol_ky
            .t()
            .to_owned()
            .solve_triangular(UPLO::Upper, Diag::NonUnit, &z)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        self.chol_ky = chol_ky;
        Ok(())
    }

    /// Predictive distribution at `xstar` (original units).
    pub fn predict(&self, xstar: ArrayView1<f64>) -> Result<VhgpPrediction> {
        let xq = self.standardizer.transform_input(xstar);
        let kf_star = self.kernel_f.cross(self.x_train.view(), xq.view())?;
        let mean_std = kf_star.dot(&self.alpha);
        let vf = self
            .chol_ky
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &kf_star)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        let latent_std = (self.kernel_f.signal_variance() - vf.dot(&vf)).max(0.0);

        let kg_star = self.kernel_g.cross(self.x_train.view(), xq.view())?;
        let b_std = kg_star.dot(&self.q) + self.mu0;
        let scaled = Array1::<f64>::from_shape_fn(kg_star.len(), |i| kg_star[i] * self.sqrt_lambda[i]);
        let vg = self
            .chol_a
            .solve_triangular(UPLO::Lower, Diag::NonUnit, &scaled)
            .map_err(|e| Error::Numerical(format!("triangular solve failed: {e}")))?;
        let d2 = (self.kernel_g.signal_variance() - vg.dot(&vg)).max(0.0);

        // back to original units
        let out_var = self.standardizer.output_scale * self.standardizer.output_scale;
        let b_orig = b_std + out_var.ln();
        let mut exponent = b_orig + 0.5 * d2;
        let clamped = exponent > LOG_NOISE_EXPONENT_CAP;
        if clamped {
            exponent = LOG_NOISE_EXPONENT_CAP;
        }
        let noise_variance = exponent.exp();
        let latent = self.standardizer.variance_to_original(latent_std);
        Ok(VhgpPrediction {
            mean: self.standardizer.mean_to_original(mean_std),
            latent_variance: latent,
            log_noise_mean: b_orig,
            log_noise_variance: d2,
            noise_variance,
            total_variance: latent + noise_variance,
            clamped,
        })
    }

    /// Gaussian log predictive density of `ystar` at `xstar` (original units).
    pub fn log_density(&self, xstar: ArrayView1<f64>, ystar: f64) -> Result<f64> {
        let p = self.predict(xstar)?;
        let resid = ystar - p.mean;
        Ok(-0.5 * (2.0 * PI * p.total_variance).ln() - 0.5 * resid * resid / p.total_variance)
    }

    pub fn kernel_f(&self) -> &ArdSeKernel {
        &self.kernel_f
    }

    pub fn kernel_g(&self) -> &ArdSeKernel {
        &self.kernel_g
    }

    pub fn mu0(&self) -> f64 {
        self.mu0
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn n_train(&self) -> usize {
        self.x_train.nrows()
    }

    /// Final bound value reached by `fit`; NaN for `from_parts` models.
    pub fn final_bound(&self) -> f64 {
        self.final_bound
    }
}

/// Gaussian log density with the given mean and variance, in the units of
/// its arguments.
pub fn gaussian_log_density(y: f64, mean: f64, variance: f64) -> f64 {
    let resid = y - mean;
    -0.5 * (2.0 * PI * variance).ln() - 0.5 * resid * resid / variance
}
