//! `pushgp quasistatic`: how far does the quasi-static assumption carry?
//!
//! Samples from different speeds are time-scaled to a reference speed
//! (displacements kept, window duration rescaled by v / v_ref), pooled into
//! velocity brackets, and a velocity-free model on (c, beta) is trained per
//! bracket. Evaluation uses a fixed holdout from the slowest speed, so a
//! rising NMSE after some bracket marks where pooling faster pushes stops
//! helping.

use crate::artifact::{InputMode, ModelKind};
use crate::commands::{
    evaluate_probabilistic, fit_triple, load_dataset, loaded_from_triple, optim_config,
    train_means,
};
use crate::output::{csv_writer, write_sidecar};
use pushgp::data::{split, PushDataset, PushSample};
use pushgp::{Error, Result};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize)]
pub struct QuasistaticOptions {
    pub data: PathBuf,
    /// Maximum speeds defining the brackets, ascending (mm/s).
    pub brackets: Vec<f64>,
    /// Speed all samples are time-scaled to (mm/s).
    pub reference_speed: f64,
    pub model: ModelKind,
    /// Fraction of the slowest-speed slice held out as the fixed test set.
    pub test_fraction: f64,
    pub holdout_seed: u64,
    /// Cap on the per-bracket training size (0 = unlimited).
    pub max_train: usize,
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketRow {
    pub max_speed: f64,
    pub n_train: usize,
    pub nmse_per_output: [f64; 3],
    pub nmse_total: f64,
}

/// Quasi-static time scaling: a push at speed v over dt has the same
/// displacements as one at v_ref over dt * v / v_ref.
fn time_scale(sample: &PushSample, v_ref: f64) -> PushSample {
    let mut s = sample.clone();
    s.dt = sample.dt * sample.input.speed / v_ref;
    s.input.speed = v_ref;
    s
}

pub fn cmd_quasistatic(opts: &QuasistaticOptions) -> Result<Vec<BracketRow>> {
    if opts.brackets.is_empty() {
        return Err(Error::invalid("need at least one velocity bracket"));
    }
    if !(opts.reference_speed > 0.0) {
        return Err(Error::invalid("reference speed must be positive"));
    }
    let mut brackets = opts.brackets.clone();
    brackets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let ds = load_dataset(&opts.data)?;
    if ds.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let speeds: Vec<f64> = ds.samples.iter().map(|s| s.input.speed).collect();
    let v_min = speeds.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = speeds.iter().cloned().fold(0.0f64, f64::max);
    if v_min >= v_max {
        return Err(Error::invalid("dataset must span multiple speeds"));
    }

    // after scaling, all samples must share the window duration (constant
    // push length); otherwise the pooled regression mixes push lengths
    let scaled: Vec<PushSample> = ds
        .samples
        .iter()
        .map(|s| time_scale(s, opts.reference_speed))
        .collect();
    let dt0 = scaled[0].dt;
    if scaled.iter().any(|s| (s.dt - dt0).abs() > 1e-9 * dt0.max(1.0)) {
        return Err(Error::invalid(
            "time scaling produced unequal window durations; the study needs constant push length (dt = length / speed per sample)",
        ));
    }

    // fixed test set from the slowest slice
    let slow_idx: Vec<usize> = (0..ds.len())
        .filter(|&i| (speeds[i] - v_min).abs() <= 1e-9 * v_min.max(1.0))
        .collect();
    let slow = PushDataset::new(
        slow_idx.iter().map(|&i| scaled[i].clone()).collect(),
        ds.provenance.clone(),
    );
    let n_test = ((slow.len() as f64 * opts.test_fraction).round() as usize).max(1);
    if n_test >= slow.len() {
        return Err(Error::invalid("test fraction leaves no slow-speed training data"));
    }
    let (slow_train, test) = split(&slow, slow.len() - n_test, opts.holdout_seed)?;

    let mut rows = Vec::new();
    for &bracket in &brackets {
        // training pool: scaled samples with original speed in the bracket,
        // slow-speed holdout removed (it is identified by the slow split)
        let mut train_samples: Vec<PushSample> = (0..ds.len())
            .filter(|&i| speeds[i] <= bracket + 1e-9 && (speeds[i] - v_min).abs() > 1e-9 * v_min.max(1.0))
            .map(|i| scaled[i].clone())
            .collect();
        train_samples.extend(slow_train.samples.iter().cloned());
        if opts.max_train > 0 && train_samples.len() > opts.max_train {
            let pool = PushDataset::new(train_samples, ds.provenance.clone());
            let (capped, _) = split(&pool, opts.max_train, opts.seed)?;
            train_samples = capped.samples;
        }
        if train_samples.len() < 2 {
            return Err(Error::invalid(format!(
                "bracket {bracket} mm/s holds fewer than 2 training samples"
            )));
        }
        let train = PushDataset::new(train_samples, ds.provenance.clone());
        let config = optim_config(opts.restarts, opts.max_iterations, opts.seed);
        let (triple, _) = fit_triple(&train, opts.model, InputMode::ContactAngle, &config)?;
        let loaded = loaded_from_triple(
            triple,
            opts.model,
            InputMode::ContactAngle,
            dt0,
            opts.seed,
            train.len(),
        );
        let means = train_means(&train);
        let report = evaluate_probabilistic(&loaded, &test, &means)?;
        rows.push(BracketRow {
            max_speed: bracket,
            n_train: train.len(),
            nmse_per_output: report.nmse_per_output,
            nmse_total: report.nmse_total,
        });
    }

    let mut w = csv_writer(&opts.out)?;
    w.write_record(["max_speed_mm_s", "n_train", "nmse_dx", "nmse_dy", "nmse_dtheta", "nmse_total"])
        .map_err(|e| Error::Format(e.to_string()))?;
    for r in &rows {
        w.write_record([
            r.max_speed.to_string(),
            r.n_train.to_string(),
            r.nmse_per_output[0].to_string(),
            r.nmse_per_output[1].to_string(),
            r.nmse_per_output[2].to_string(),
            r.nmse_total.to_string(),
        ])
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))?;
    write_sidecar(&opts.out, "quasistatic", opts)?;
    Ok(rows)
}
