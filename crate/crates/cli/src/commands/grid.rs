//! `pushgp grid`: predictive mean and total std over a (c, beta) grid at a
//! fixed pusher speed, one CSV row per grid point.

use crate::artifact::{self, LoadedArtifact};
use crate::commands::linspace_grid;
use crate::output::{csv_writer, write_sidecar};
use pushgp::pushmodel::PushInput;
use pushgp::Result;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    pub c_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    /// Fixed pusher speed for the sweep, mm/s.
    pub speed: f64,
}

impl GridSpec {
    /// The default sweep: c in 0..1 step 0.05, beta in -1.5..1.5 step 0.1,
    /// at 20 mm/s.
    pub fn default_sweep() -> Result<Self> {
        Ok(Self {
            c_values: linspace_grid(0.0, 1.0, 0.05)?,
            beta_values: linspace_grid(-1.5, 1.5, 0.1)?,
            speed: 20.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() || self.beta_values.is_empty() {
            return Err(pushgp::Error::invalid("grid value lists must be non-empty"));
        }
        for &c in &self.c_values {
            PushInput::new(self.speed, c, 0.0).validate()?;
        }
        for &b in &self.beta_values {
            PushInput::new(self.speed, 0.0, b).validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOptions {
    pub model_file: PathBuf,
    pub spec: GridSpec,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy)]
pub struct GridRow {
    pub c: f64,
    pub beta: f64,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

pub fn cmd_grid(opts: &GridOptions) -> Result<Vec<GridRow>> {
    opts.spec.validate()?;
    let model = artifact::load(&opts.model_file)?;
    let rows = evaluate_grid(&model, &opts.spec)?;
    let mut w = csv_writer(&opts.out)?;
    w.write_record([
        "c", "beta_rad", "mean_dx_mm", "mean_dy_mm", "mean_dtheta_rad", "std_dx_mm", "std_dy_mm",
        "std_dtheta_rad",
    ])
    .map_err(|e| pushgp::Error::Format(e.to_string()))?;
    for r in &rows {
        w.write_record([
            r.c.to_string(),
            r.beta.to_string(),
            r.mean[0].to_string(),
            r.mean[1].to_string(),
            r.mean[2].to_string(),
            r.std[0].to_string(),
            r.std[1].to_string(),
            r.std[2].to_string(),
        ])
        .map_err(|e| pushgp::Error::Format(e.to_string()))?;
    }
    w.flush().map_err(|e| pushgp::Error::Format(e.to_string()))?;
    write_sidecar(&opts.out, "grid", opts)?;
    Ok(rows)
}

/// Grid evaluation against an already-loaded artifact (shared with the
/// acceptance suite).
pub fn evaluate_grid(model: &LoadedArtifact, spec: &GridSpec) -> Result<Vec<GridRow>> {
    let mut rows = Vec::with_capacity(spec.c_values.len() * spec.beta_values.len());
    for &c in &spec.c_values {
        for &beta in &spec.beta_values {
            let g = model.predict(&PushInput::new(spec.speed, c, beta))?;
            rows.push(GridRow {
                c,
                beta,
                mean: [g[0].mean, g[1].mean, g[2].mean],
                std: [
                    g[0].variance.sqrt(),
                    g[1].variance.sqrt(),
                    g[2].variance.sqrt(),
                ],
            });
        }
    }
    Ok(rows)
}
