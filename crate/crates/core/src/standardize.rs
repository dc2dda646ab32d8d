//! Input/output standardization applied before fitting.
//!
//! Inputs are shifted to zero mean and unit scale per dimension, targets to
//! zero mean and unit variance. Models carry the transform so predictions
//! and densities are reported in original units.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub input_means: Vec<f64>,
    pub input_scales: Vec<f64>,
    pub output_mean: f64,
    pub output_scale: f64,
}

impl Standardizer {
    /// Fit the transform to raw training data. Constant input dimensions and
    /// constant targets get scale 1 so the transform stays invertible.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::invalid("input/target row counts differ"));
        }
        if x.nrows() == 0 {
            return Err(Error::invalid("cannot standardize an empty dataset"));
        }
        let n = x.nrows() as f64;
        let mut input_means = Vec::with_capacity(x.ncols());
        let mut input_scales = Vec::with_capacity(x.ncols());
        for col in x.columns() {
            let mean = col.sum() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let scale = var.sqrt();
            input_means.push(mean);
            input_scales.push(if scale > 1e-12 { scale } else { 1.0 });
        }
        let output_mean = y.sum() / n;
        let var = y.iter().map(|v| (v - output_mean) * (v - output_mean)).sum::<f64>() / n;
        let scale = var.sqrt();
        Ok(Self {
            input_means,
            input_scales,
            output_mean,
            output_scale: if scale > 1e-12 { scale } else { 1.0 },
        })
    }

    /// Identity transform in `dim` input dimensions (used by tests and
    /// callers that already work in normalized units).
    pub fn identity(dim: usize) -> Self {
        Self {
            input_means: vec![0.0; dim],
            input_scales: vec![1.0; dim],
            output_mean: 0.0,
            output_scale: 1.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_means.len()
    }

    pub fn transform_inputs(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for d in 0..self.input_means.len() {
                row[d] = (row[d] - self.input_means[d]) / self.input_scales[d];
            }
        }
        out
    }

    pub fn transform_input(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(
            x.iter()
                .enumerate()
                .map(|(d, v)| (v - self.input_means[d]) / self.input_scales[d]),
        )
    }

    pub fn transform_targets(&self, y: ArrayView1<f64>) -> Array1<f64> {
        y.mapv(|v| (v - self.output_mean) / self.output_scale)
    }

    pub fn mean_to_original(&self, standardized_mean: f64) -> f64 {
        self.output_mean + self.output_scale * standardized_mean
    }

    pub fn variance_to_original(&self, standardized_variance: f64) -> f64 {
        standardized_variance * self.output_scale * self.output_scale
    }
}
