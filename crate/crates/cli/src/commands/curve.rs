//! `pushgp learning-curve`: NMSE/NLPD of the analytical baseline, GP, and
//! VHGP as a function of the training-set size.
//!
//! A fixed holdout test set is carved out once (so curves are comparable
//! across sizes and seeds); each (size, seed) cell trains on a seeded
//! subsample of the remaining pool.

use crate::artifact::{InputMode, ModelKind};
use crate::commands::{
    evaluate_probabilistic, fit_triple, load_dataset, loaded_from_triple, optim_config,
    train_means,
};
use crate::output::{csv_writer, opt_cell, write_sidecar};
use pushgp::data::{split, OutputIndex, PushDataset};
use pushgp::metrics;
use pushgp::pushmodel::{analytical_push, ObjectParams};
use pushgp::{Error, Result};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CurveModel {
    Analytical,
    Gp,
    Vhgp,
}

impl std::fmt::Display for CurveModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CurveModel::Analytical => "analytical",
            CurveModel::Gp => "gp",
            CurveModel::Vhgp => "vhgp",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveOptions {
    pub data: PathBuf,
    pub models: Vec<CurveModel>,
    pub sizes: Vec<usize>,
    /// Number of training resamples per size.
    pub seeds: u64,
    pub seed: u64,
    /// Fraction of the dataset held out once as the fixed test set.
    pub test_fraction: f64,
    pub holdout_seed: u64,
    /// Analytical-baseline object; miscalibrate it deliberately to study the
    /// crossover against the learned models.
    pub object: ObjectParams,
    pub restarts: usize,
    pub max_iterations: usize,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveRow {
    pub model: String,
    pub n_train: usize,
    pub seed: u64,
    pub nmse_per_output: [f64; 3],
    pub nmse_total: f64,
    /// None for the analytical model: a deterministic predictor has no
    /// predictive density to score.
    pub nlpd_total: Option<f64>,
}

pub fn cmd_learning_curve(opts: &CurveOptions) -> Result<Vec<CurveRow>> {
    if opts.sizes.is_empty() || opts.models.is_empty() || opts.seeds == 0 {
        return Err(Error::invalid("learning curve needs models, sizes, and seeds"));
    }
    if !(0.0..1.0).contains(&opts.test_fraction) || opts.test_fraction <= 0.0 {
        return Err(Error::invalid("test fraction must be in (0, 1)"));
    }
    let ds = load_dataset(&opts.data)?;
    let n_test = ((ds.len() as f64 * opts.test_fraction).round() as usize).max(1);
    if n_test >= ds.len() {
        return Err(Error::invalid("test fraction leaves no training pool"));
    }
    let pool_n = ds.len() - n_test;
    let max_size = *opts.sizes.iter().max().unwrap();
    if max_size >= pool_n {
        return Err(Error::invalid(format!(
            "largest size {max_size} must stay below the training pool {pool_n}"
        )));
    }
    let (pool, test) = split(&ds, pool_n, opts.holdout_seed)?;

    let mut rows = Vec::new();
    for seed_idx in 0..opts.seeds {
        let seed = opts.seed + seed_idx;
        for &size in &opts.sizes {
            let (train, _) = split(&pool, size, seed)?;
            let means = train_means(&train);
            for model in &opts.models {
                let row = match model {
                    CurveModel::Analytical => {
                        let report = evaluate_analytical(&opts.object, &train, &test, &means)?;
                        CurveRow {
                            model: model.to_string(),
                            n_train: size,
                            seed,
                            nmse_per_output: report.nmse_per_output,
                            nmse_total: report.nmse_total,
                            nlpd_total: None,
                        }
                    }
                    CurveModel::Gp | CurveModel::Vhgp => {
                        let kind = if *model == CurveModel::Gp {
                            ModelKind::Gp
                        } else {
                            ModelKind::Vhgp
                        };
                        let config = optim_config(opts.restarts, opts.max_iterations, seed);
                        let (triple, _) =
                            fit_triple(&train, kind, InputMode::SpeedContactAngle, &config)?;
                        let loaded = loaded_from_triple(
                            triple,
                            kind,
                            InputMode::SpeedContactAngle,
                            train.samples[0].dt,
                            seed,
                            size,
                        );
                        let report = evaluate_probabilistic(&loaded, &test, &means)?;
                        CurveRow {
                            model: model.to_string(),
                            n_train: size,
                            seed,
                            nmse_per_output: report.nmse_per_output,
                            nmse_total: report.nmse_total,
                            nlpd_total: Some(report.nlpd_total),
                        }
                    }
                };
                rows.push(row);
            }
        }
    }

    let mut w = csv_writer(&opts.out)?;
    w.write_record([
        "model", "n_train", "seed", "nmse_dx", "nmse_dy", "nmse_dtheta", "nmse_total",
        "nlpd_total",
    ])
    .map_err(|e| Error::Format(e.to_string()))?;
    for r in &rows {
        w.write_record([
            r.model.clone(),
            r.n_train.to_string(),
            r.seed.to_string(),
            r.nmse_per_output[0].to_string(),
            r.nmse_per_output[1].to_string(),
            r.nmse_per_output[2].to_string(),
            r.nmse_total.to_string(),
            opt_cell(r.nlpd_total),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    write_sidecar(&opts.out, "learning-curve", opts)?;
    Ok(rows)
}

/// NMSE of the deterministic quasi-static baseline (no NLPD: the model
/// carries no distribution).
pub fn evaluate_analytical(
    obj: &ObjectParams,
    train: &PushDataset,
    test: &PushDataset,
    train_means: &[f64; 3],
) -> Result<metrics::EvalReport> {
    let _ = train;
    let mut preds = vec![[0.0; 3]; test.len()];
    for (i, s) in test.samples.iter().enumerate() {
        let r = analytical_push(&s.input, obj, s.dt)?;
        preds[i] = r.outcome.to_array();
    }
    let mut nmse3 = [0.0; 3];
    for (d, output) in OutputIndex::ALL.iter().enumerate() {
        let p: Vec<f64> = preds.iter().map(|r| r[d]).collect();
        let o: Vec<f64> = test.samples.iter().map(|s| output.of(&s.outcome)).collect();
        nmse3[d] = metrics::nmse(&p, &o, train_means[d])?;
    }
    // NLPD column stays empty for deterministic models; 0.0 placeholder is
    // never surfaced.
    metrics::EvalReport::new(nmse3, 0.0, test.len())
}
