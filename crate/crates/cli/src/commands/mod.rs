//! One module per subcommand, plus shared fitting/evaluation helpers.

pub mod curve;
pub mod grid;
pub mod kl;
pub mod predict;
pub mod quasistatic;
pub mod synth;
pub mod train;

use crate::artifact::{InputMode, LoadedArtifact, ModelKind, ModelTriple};
use ndarray::{Array1, Array2};
use pushgp::data::{DataFormat, OutputIndex, PushDataset};
use pushgp::gp::GpModel;
use pushgp::metrics;
use pushgp::optim::OptimConfig;
use pushgp::vhgp::VhgpModel;
use pushgp::{Error, Result};
use std::path::Path;

pub fn load_dataset(path: &Path) -> Result<PushDataset> {
    let format = DataFormat::from_path(path)?;
    pushgp::data::load(path, format)
}

pub fn design_matrix(ds: &PushDataset, mode: InputMode) -> Array2<f64> {
    match mode {
        InputMode::SpeedContactAngle => ds.design_matrix(),
        InputMode::ContactAngle => ds.design_matrix_contact_angle(),
    }
}

/// Fit the three per-output models. For VHGP each output is warm-started
/// from its own homoscedastic fit. Returns the models with the final
/// objective value per output (NLML for GP, negative bound for VHGP).
pub fn fit_triple(
    ds: &PushDataset,
    kind: ModelKind,
    mode: InputMode,
    config: &OptimConfig,
) -> Result<(ModelTriple, [f64; 3])> {
    if ds.len() < 2 {
        return Err(Error::invalid("training needs at least 2 samples"));
    }
    let x = design_matrix(ds, mode);
    let mut objectives = [0.0; 3];
    match kind {
        ModelKind::Gp => {
            let mut models = Vec::with_capacity(3);
            for (i, output) in OutputIndex::ALL.iter().enumerate() {
                let y = ds.targets(*output);
                let m = GpModel::fit(x.view(), y.view(), config)?;
                objectives[i] = m.final_nlml();
                models.push(m);
            }
            let arr: [GpModel; 3] = models.try_into().map_err(|_| {
                Error::Numerical("internal: expected exactly 3 models".into())
            })?;
            Ok((ModelTriple::Gp(arr), objectives))
        }
        ModelKind::Vhgp => {
            let mut models = Vec::with_capacity(3);
            for (i, output) in OutputIndex::ALL.iter().enumerate() {
                let y = ds.targets(*output);
                let warm = GpModel::fit(x.view(), y.view(), config)?;
                let m = VhgpModel::fit_warm(x.view(), y.view(), &warm, config)?;
                objectives[i] = -m.final_bound();
                models.push(m);
            }
            let arr: [VhgpModel; 3] = models.try_into().map_err(|_| {
                Error::Numerical("internal: expected exactly 3 models".into())
            })?;
            Ok((ModelTriple::Vhgp(arr), objectives))
        }
    }
}

pub fn triple_to_artifact(
    triple: &ModelTriple,
    kind: ModelKind,
    mode: InputMode,
    dt: f64,
    seed: u64,
    n_train: usize,
    provenance: String,
) -> crate::artifact::ArtifactFile {
    let models = match triple {
        ModelTriple::Gp(ms) => {
            crate::artifact::ModelTripleParams::Gp(ms.iter().map(|m| m.params()).collect())
        }
        ModelTriple::Vhgp(ms) => {
            crate::artifact::ModelTripleParams::Vhgp(ms.iter().map(|m| m.params()).collect())
        }
    };
    crate::artifact::ArtifactFile {
        format_version: crate::artifact::ARTIFACT_VERSION,
        model: kind,
        input_mode: mode,
        dt_s: dt,
        outputs: crate::artifact::output_labels(),
        seed,
        n_train,
        provenance,
        models,
    }
}

pub fn loaded_from_triple(
    triple: ModelTriple,
    kind: ModelKind,
    mode: InputMode,
    dt: f64,
    seed: u64,
    n_train: usize,
) -> LoadedArtifact {
    LoadedArtifact {
        model: kind,
        input_mode: mode,
        dt_s: dt,
        seed,
        n_train,
        provenance: String::new(),
        models: triple,
    }
}

/// NMSE per output and total NLPD of a probabilistic model on a test set.
/// `train_means` are the per-output training-set means that normalize NMSE.
pub fn evaluate_probabilistic(
    artifact: &LoadedArtifact,
    test: &PushDataset,
    train_means: &[f64; 3],
) -> Result<metrics::EvalReport> {
    let n = test.len();
    if n == 0 {
        return Err(Error::invalid("empty test set"));
    }
    let mut preds = vec![[0.0; 3]; n];
    let mut joint = vec![0.0; n];
    for (i, s) in test.samples.iter().enumerate() {
        let g = artifact.predict(&s.input)?;
        for d in 0..3 {
            preds[i][d] = g[d].mean;
        }
        joint[i] = artifact.joint_log_density(&s.input, &s.outcome)?;
    }
    let mut nmse3 = [0.0; 3];
    for (d, output) in OutputIndex::ALL.iter().enumerate() {
        let p: Vec<f64> = preds.iter().map(|r| r[d]).collect();
        let o: Vec<f64> = test.samples.iter().map(|s| output.of(&s.outcome)).collect();
        nmse3[d] = metrics::nmse(&p, &o, train_means[d])?;
    }
    let nlpd = metrics::nlpd(&joint)?;
    metrics::EvalReport::new(nmse3, nlpd, n)
}

/// Per-output training-set means (the NMSE normalizer).
pub fn train_means(train: &PushDataset) -> [f64; 3] {
    let mut means = [0.0; 3];
    for (d, output) in OutputIndex::ALL.iter().enumerate() {
        let y = train.targets(*output);
        means[d] = y.sum() / y.len() as f64;
    }
    means
}

/// Evenly spaced values including both endpoints, computed by index so the
/// endpoints are exact.
pub fn linspace_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || max < min {
        return Err(Error::invalid("grid needs step > 0 and max >= min"));
    }
    let count = ((max - min) / step).round() as usize + 1;
    let span = max - min;
    Ok((0..count)
        .map(|i| {
            if count == 1 {
                min
            } else {
                min + span * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

pub fn optim_config(restarts: usize, max_iter: usize, seed: u64) -> OptimConfig {
    OptimConfig::default()
        .with_restarts(restarts)
        .with_max_iterations(max_iter)
        .with_seed(seed)
}

pub fn query_vector(mode: InputMode, speed: f64, contact: f64, angle: f64) -> Array1<f64> {
    match mode {
        InputMode::SpeedContactAngle => Array1::from_vec(vec![speed, contact, angle]),
        InputMode::ContactAngle => Array1::from_vec(vec![contact, angle]),
    }
}
