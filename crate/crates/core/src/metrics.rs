//! Evaluation metrics: NMSE, NLPD, and Gaussian KL divergence.
//!
//!   NMSE = sum_j (y_j - yhat_j)^2 / sum_j (y_j - ybar)^2
//!   NLPD = -(1/m) sum_j log p(y_j | D)
//!   KL(p || q) = 1/2 (log(s2_q / s2_p) + (s2_p + (m_p - m_q)^2) / s2_q - 1)
//!
//! ybar is the training-set mean. Per-sample joint log densities are the sum
//! of the three per-output Gaussian log densities; the total NMSE of a model
//! is the sum of its per-output NMSEs.

use crate::data::RepeatedPushGroup;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A one-dimensional Gaussian by mean and variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }
}

/// Per-output empirical variance floors for KL validation, as standard
/// deviations: the pose-tracking resolution (mm, mm, rad).
pub const EMPIRICAL_STD_FLOOR: [f64; 3] = [0.05, 0.05, 0.002];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub nmse_per_output: [f64; 3],
    pub nmse_total: f64,
    pub nlpd_total: f64,
    pub n_test: usize,
}

impl EvalReport {
    pub fn new(nmse_per_output: [f64; 3], nlpd_total: f64, n_test: usize) -> Result<Self> {
        if n_test < 1 {
            return Err(Error::invalid("evaluation needs at least one test sample"));
        }
        if nmse_per_output.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("NMSE values must be non-negative"));
        }
        Ok(Self {
            nmse_per_output,
            nmse_total: nmse_per_output.iter().sum(),
            nlpd_total,
            n_test,
        })
    }
}

/// Normalized mean squared error against the training-set mean `train_mean`.
pub fn nmse(predictions: &[f64], observations: &[f64], train_mean: f64) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != observations.len() {
        return Err(Error::invalid("predictions and observations must be non-empty and aligned"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (p, y) in predictions.iter().zip(observations.iter()) {
        num += (y - p) * (y - p);
        den += (y - train_mean) * (y - train_mean);
    }
    if den <= 0.0 {
        return Err(Error::invalid(
            "NMSE undefined: observations have zero variance about the training mean",
        ));
    }
    Ok(num / den)
}

/// Negative mean log predictive density over per-sample joint log densities.
pub fn nlpd(log_densities: &[f64]) -> Result<f64> {
    if log_densities.is_empty() {
        return Err(Error::invalid("NLPD needs at least one sample"));
    }
    for (i, d) in log_densities.iter().enumerate() {
        if !d.is_finite() {
            return Err(Error::Numerical(format!("non-finite log density at sample {i}")));
        }
    }
    Ok(-log_densities.iter().sum::<f64>() / log_densities.len() as f64)
}

/// KL divergence between two univariate Gaussians, KL(p || q). Always
/// non-negative, zero iff p = q.
pub fn kl_gauss(p: &Gaussian, q: &Gaussian) -> Result<f64> {
    if !(p.variance > 0.0) || !(q.variance > 0.0) {
        return Err(Error::invalid("KL divergence needs positive variances"));
    }
    let dm = p.mean - q.mean;
    Ok(0.5 * ((q.variance / p.variance).ln() + (p.variance + dm * dm) / q.variance - 1.0))
}

#[derive(Debug, Clone, Copy)]
pub struct KlPushResult {
    /// Sum of the three per-output divergences.
    pub total: f64,
    pub per_output: [f64; 3],
    /// Set when an empirical variance was raised to the sensor floor.
    pub variance_floored: bool,
}

/// Per-push KL divergence between the empirical outcome distribution and the
/// model's prediction, summed over the three independent outputs. The
/// direction is KL(empirical || predicted): a model that assigns low density
/// to observed behavior is penalized. Near-degenerate empirical variances
/// are floored at the sensor resolution and flagged.
pub fn kl_push(predicted: &[Gaussian; 3], empirical: &RepeatedPushGroup) -> Result<KlPushResult> {
    let std = empirical.empirical_std.ok_or_else(|| {
        Error::invalid("empirical std undefined: group needs at least 2 repetitions")
    })?;
    let means = empirical.empirical_mean.to_array();
    let mut per_output = [0.0; 3];
    let mut floored = false;
    for d in 0..3 {
        let floor = EMPIRICAL_STD_FLOOR[d] * EMPIRICAL_STD_FLOOR[d];
        let mut var = std[d] * std[d];
        if var < floor {
            var = floor;
            floored = true;
        }
        per_output[d] = kl_gauss(&Gaussian::new(means[d], var), &predicted[d])?;
    }
    Ok(KlPushResult {
        total: per_output.iter().sum(),
        per_output,
        variance_floored: floored,
    })
}
