//! `pushgp synth`: synthetic dataset generation wrapping the quasi-static
//! model plus the configurable noise field.

use crate::commands::linspace_grid;
use crate::output::write_sidecar;
use pushgp::data::{save, DataFormat};
use pushgp::pushmodel::{
    synth_generate, synth_generate_repeats, synth_generate_speed_study, NoiseField, ObjectParams,
    SamplingSpec, Shape, SpeedEffect,
};
use pushgp::{Error, Result};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SynthMode {
    /// Cycle a (c, beta) grid at fixed speed.
    Grid,
    /// Uniform random actions.
    Random,
    /// Repeated pushes on the validation grid, with repetition ids.
    Repeats,
    /// Constant push length across a list of speeds, optionally with a
    /// speed-dependent distortion.
    SpeedStudy,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthOptions {
    pub object: ObjectParams,
    pub noise: NoiseField,
    pub mode: SynthMode,
    pub n: usize,
    pub reps: usize,
    pub speed: f64,
    pub dt: f64,
    pub c_step: f64,
    pub beta_step: f64,
    /// speed-study parameters
    pub speeds: Vec<f64>,
    pub push_length: f64,
    pub n_per_speed: usize,
    pub dynamics: Option<SpeedEffect>,
    pub seed: u64,
    pub out: PathBuf,
}

impl SynthOptions {
    pub fn new(object: ObjectParams, out: PathBuf) -> Self {
        Self {
            object,
            noise: NoiseField::default_heteroscedastic(),
            mode: SynthMode::Grid,
            n: 800,
            reps: 100,
            speed: 20.0,
            dt: 0.2,
            c_step: 0.05,
            beta_step: 0.1,
            speeds: vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0],
            push_length: 4.0,
            n_per_speed: 200,
            dynamics: None,
            seed: 0,
            out,
        }
    }
}

pub fn cmd_synth(opts: &SynthOptions) -> Result<usize> {
    let ds = match opts.mode {
        SynthMode::Grid => {
            let sampling = SamplingSpec::Grid {
                c_values: linspace_grid(0.0, 1.0, opts.c_step)?,
                beta_values: linspace_grid(-1.5, 1.5, opts.beta_step)?,
                speed: opts.speed,
            };
            synth_generate(&opts.object, &opts.noise, &sampling, opts.n, opts.dt, opts.seed)?
        }
        SynthMode::Random => {
            let sampling = SamplingSpec::Random {
                speed: (opts.speed, opts.speed),
                contact: (0.0, 1.0),
                angle: (-1.5, 1.5),
            };
            synth_generate(&opts.object, &opts.noise, &sampling, opts.n, opts.dt, opts.seed)?
        }
        SynthMode::Repeats => synth_generate_repeats(
            &opts.object,
            &opts.noise,
            &linspace_grid(0.0, 1.0, 0.1)?,
            &linspace_grid(-1.5, 1.5, 0.1)?,
            opts.speed,
            opts.reps,
            opts.dt,
            opts.seed,
        )?,
        SynthMode::SpeedStudy => synth_generate_speed_study(
            &opts.object,
            &opts.noise,
            &opts.speeds,
            opts.push_length,
            opts.n_per_speed,
            opts.dynamics,
            opts.seed,
        )?,
    };
    let format = DataFormat::from_path(&opts.out)?;
    save(&ds, &opts.out, format)?;
    write_sidecar(&opts.out, "synth", opts)?;
    Ok(ds.len())
}

/// Parse "square:90", "circle:45", or "ellipse:65,45".
pub fn parse_shape(s: &str) -> Result<Shape> {
    let (kind, dims) = s
        .split_once(':')
        .ok_or_else(|| Error::invalid(format!("shape `{s}` should look like square:90")))?;
    let nums: Vec<f64> = dims
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad shape dimension `{t}`: {e}")))
        })
        .collect::<Result<_>>()?;
    match (kind, nums.as_slice()) {
        ("square", [side]) => Ok(Shape::Square { side: *side }),
        ("circle", [radius]) => Ok(Shape::Circle { radius: *radius }),
        ("ellipse", [a, b]) => Ok(Shape::Ellipse { a: *a, b: *b }),
        _ => Err(Error::invalid(format!(
            "shape `{s}` not recognized (square:SIDE, circle:RADIUS, ellipse:A,B)"
        ))),
    }
}

/// Parse "default", "none", or "constant:0.2,0.1,0.003".
pub fn parse_noise(s: &str) -> Result<NoiseField> {
    match s {
        "default" => Ok(NoiseField::default_heteroscedastic()),
        "none" => Ok(NoiseField::zero()),
        other => {
            let rest = other.strip_prefix("constant:").ok_or_else(|| {
                Error::invalid(format!(
                    "noise `{other}` not recognized (default, none, constant:SX,SY,STH)"
                ))
            })?;
            let nums: Vec<f64> = rest
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::invalid(format!("bad noise std `{t}`: {e}")))
                })
                .collect::<Result<_>>()?;
            if nums.len() != 3 || nums.iter().any(|v| *v < 0.0) {
                return Err(Error::invalid("constant noise needs 3 non-negative stds"));
            }
            Ok(NoiseField::constant([nums[0], nums[1], nums[2]]))
        }
    }
}
