//! Versioned model artifact: three per-output models plus their
//! standardizers and training metadata, serialized as JSON. Factorizations
//! are rebuilt deterministically on load, so a save/load round trip
//! reproduces predictions bitwise.

use ndarray::Array1;
use pushgp::data::OutputIndex;
use pushgp::gp::{GpModel, GpParams};
use pushgp::metrics::Gaussian;
use pushgp::pushmodel::{PushInput, PushOutcome};
use pushgp::vhgp::{VhgpModel, VhgpParams};
use pushgp::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gp,
    Vhgp,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gp => "gp",
            ModelKind::Vhgp => "vhgp",
        })
    }
}

/// Which action coordinates the models take as inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// (v_p, c, beta)
    SpeedContactAngle,
    /// (c, beta), for the velocity-free quasi-static study
    ContactAngle,
}

impl InputMode {
    pub fn vector(&self, input: &PushInput) -> Array1<f64> {
        match self {
            InputMode::SpeedContactAngle => {
                Array1::from_vec(vec![input.speed, input.contact, input.angle])
            }
            InputMode::ContactAngle => Array1::from_vec(vec![input.contact, input.angle]),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InputMode::SpeedContactAngle => 3,
            InputMode::ContactAngle => 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModelTripleParams {
    Gp(Vec<GpParams>),
    Vhgp(Vec<VhgpParams>),
}

/// On-disk form of a trained model triple.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactFile {
    pub format_version: u32,
    pub model: ModelKind,
    pub input_mode: InputMode,
    /// Window duration the training data used, seconds.
    pub dt_s: f64,
    pub outputs: [String; 3],
    pub seed: u64,
    pub n_train: usize,
    pub provenance: String,
    pub models: ModelTripleParams,
}

/// Trained per-output models, ready for prediction.
pub enum ModelTriple {
    Gp([GpModel; 3]),
    Vhgp([VhgpModel; 3]),
}

pub struct LoadedArtifact {
    pub model: ModelKind,
    pub input_mode: InputMode,
    pub dt_s: f64,
    pub seed: u64,
    pub n_train: usize,
    pub provenance: String,
    pub models: ModelTriple,
}

impl LoadedArtifact {
    /// Per-output predictive Gaussians (mean, total variance) at `input`.
    pub fn predict(&self, input: &PushInput) -> Result<[Gaussian; 3]> {
        let x = self.input_mode.vector(input);
        let mut out = [Gaussian::new(0.0, 1.0); 3];
        match &self.models {
            ModelTriple::Gp(models) => {
                for (i, m) in models.iter().enumerate() {
                    let p = m.predict(x.view())?;
                    out[i] = Gaussian::new(p.mean, p.total_variance);
                }
            }
            ModelTriple::Vhgp(models) => {
                for (i, m) in models.iter().enumerate() {
                    let p = m.predict(x.view())?;
                    out[i] = Gaussian::new(p.mean, p.total_variance);
                }
            }
        }
        Ok(out)
    }

    /// Joint log predictive density of an outcome: the sum of the three
    /// per-output Gaussian log densities.
    pub fn joint_log_density(&self, input: &PushInput, outcome: &PushOutcome) -> Result<f64> {
        let x = self.input_mode.vector(input);
        let ys = outcome.to_array();
        let mut total = 0.0;
        match &self.models {
            ModelTriple::Gp(models) => {
                for (i, m) in models.iter().enumerate() {
                    total += m.log_density(x.view(), ys[i])?;
                }
            }
            ModelTriple::Vhgp(models) => {
                for (i, m) in models.iter().enumerate() {
                    total += m.log_density(x.view(), ys[i])?;
                }
            }
        }
        Ok(total)
    }
}

pub fn save(file: &ArtifactFile, path: &Path) -> Result<()> {
    let f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(f, file)
        .map_err(|e| Error::Format(format!("artifact write failed: {e}")))
}

pub fn load(path: &Path) -> Result<LoadedArtifact> {
    let f = std::fs::File::open(path)?;
    let file: ArtifactFile = serde_json::from_reader(f)
        .map_err(|e| Error::Format(format!("artifact parse failed: {e}")))?;
    if file.format_version != ARTIFACT_VERSION {
        return Err(Error::Format(format!(
            "unsupported artifact version {} (expected {ARTIFACT_VERSION})",
            file.format_version
        )));
    }
    let models = match file.models {
        ModelTripleParams::Gp(params) => {
            let v = build_three(params, GpModel::from_parts)?;
            ModelTriple::Gp(v)
        }
        ModelTripleParams::Vhgp(params) => {
            let v = build_three(params, VhgpModel::from_parts)?;
            ModelTriple::Vhgp(v)
        }
    };
    Ok(LoadedArtifact {
        model: file.model,
        input_mode: file.input_mode,
        dt_s: file.dt_s,
        seed: file.seed,
        n_train: file.n_train,
        provenance: file.provenance,
        models,
    })
}

fn build_three<P, M>(params: Vec<P>, build: impl Fn(P) -> Result<M>) -> Result<[M; 3]> {
    if params.len() != 3 {
        return Err(Error::Format(format!(
            "artifact must hold exactly 3 per-output models, found {}",
            params.len()
        )));
    }
    let mut it = params.into_iter();
    Ok([
        build(it.next().unwrap())?,
        build(it.next().unwrap())?,
        build(it.next().unwrap())?,
    ])
}

pub fn output_labels() -> [String; 3] {
    [
        OutputIndex::Dx.label().to_string(),
        OutputIndex::Dy.label().to_string(),
        OutputIndex::Dtheta.label().to_string(),
    ]
}
