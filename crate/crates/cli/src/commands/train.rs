//! `pushgp train`: fit the three per-output models and write the artifact.

use crate::artifact::{self, InputMode, ModelKind};
use crate::commands::{fit_triple, load_dataset, optim_config, triple_to_artifact};
use crate::output::write_sidecar;
use pushgp::{Error, Result};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize)]
pub struct TrainOptions {
    pub data: PathBuf,
    pub model: ModelKind,
    pub out: PathBuf,
    /// Train on (c, beta) only, ignoring the pusher speed.
    pub velocity_free: bool,
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub n_train: usize,
    /// Final objective per output: NLML for GP, negative bound for VHGP.
    pub objectives: [f64; 3],
}

pub fn cmd_train(opts: &TrainOptions) -> Result<TrainSummary> {
    let ds = load_dataset(&opts.data)?;
    if ds.len() < 2 {
        return Err(Error::invalid("training needs at least 2 samples"));
    }
    let mode = if opts.velocity_free {
        InputMode::ContactAngle
    } else {
        InputMode::SpeedContactAngle
    };
    let config = optim_config(opts.restarts, opts.max_iterations, opts.seed);
    let (triple, objectives) = fit_triple(&ds, opts.model, mode, &config)?;
    let dt = ds.uniform_dt().unwrap_or(ds.samples[0].dt);
    let file = triple_to_artifact(
        &triple,
        opts.model,
        mode,
        dt,
        opts.seed,
        ds.len(),
        ds.provenance.clone(),
    );
    artifact::save(&file, &opts.out)?;
    write_sidecar(&opts.out, "train", opts)?;
    Ok(TrainSummary {
        n_train: ds.len(),
        objectives,
    })
}
