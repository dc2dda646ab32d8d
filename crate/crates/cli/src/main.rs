use clap::{Parser, Subcommand};
use pushgp::pushmodel::{ObjectParams, SpeedEffect};
use pushgp::Result;
use pushgp_cli::commands::curve::{cmd_learning_curve, CurveModel, CurveOptions};
use pushgp_cli::commands::grid::{cmd_grid, GridOptions, GridSpec};
use pushgp_cli::commands::kl::{cmd_validate_kl, KlOptions};
use pushgp_cli::commands::predict::{cmd_predict, PredictOptions};
use pushgp_cli::commands::quasistatic::{cmd_quasistatic, QuasistaticOptions};
use pushgp_cli::commands::synth::{cmd_synth, parse_noise, parse_shape, SynthMode, SynthOptions};
use pushgp_cli::commands::train::{cmd_train, TrainOptions};
use pushgp_cli::commands::{linspace_grid, parse_list};
use pushgp_cli::ModelKind;
use std::path::PathBuf;

/// Probabilistic models of planar pushing: train GP/VHGP models on push
/// datasets, reproduce the evaluation studies, and emit plot-ready tables.
#[derive(Parser)]
#[command(name = "pushgp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit per-output models on a dataset and write a model artifact.
    Train {
        /// Dataset path (.csv or .json, canonical schema).
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        out: PathBuf,
        /// Train on (c, beta) only, ignoring pusher speed.
        #[arg(long)]
        velocity_free: bool,
        #[arg(long, default_value_t = 3)]
        restarts: usize,
        #[arg(long, default_value_t = 300)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Predict per-output (mean, std) at one action.
    Predict {
        #[arg(long)]
        model_file: PathBuf,
        /// Pusher speed, mm/s.
        #[arg(long)]
        speed: f64,
        /// Contact coordinate in [0, 1].
        #[arg(long)]
        contact: f64,
        /// Push angle, rad.
        #[arg(long, allow_negative_numbers = true)]
        angle: f64,
    },
    /// Sweep predictions over a (c, beta) grid at fixed speed.
    Grid {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        speed: f64,
        #[arg(long, default_value_t = 0.05)]
        c_step: f64,
        #[arg(long, default_value_t = 0.1)]
        beta_step: f64,
    },
    /// NMSE/NLPD versus training-set size for a set of models.
    LearningCurve {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated subset of analytical,gp,vhgp.
        #[arg(long, value_delimiter = ',', default_values_t = vec![CurveModel::Analytical, CurveModel::Gp, CurveModel::Vhgp])]
        models: Vec<CurveModel>,
        /// Comma-separated training sizes.
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.25)]
        test_fraction: f64,
        #[arg(long, default_value_t = 7777)]
        holdout_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Analytical-baseline object, e.g. square:90.
        #[arg(long, default_value = "square:90")]
        object: String,
        /// Analytical-baseline limit-surface ratio (mm); default:
        /// uniform-pressure value for the shape.
        #[arg(long)]
        ls_ratio: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        friction: f64,
        #[arg(long, default_value_t = 2)]
        restarts: usize,
        #[arg(long, default_value_t = 150)]
        max_iter: usize,
    },
    /// Per-group KL divergence against a repeated-push dataset.
    ValidateKl {
        #[arg(long)]
        model_file: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Velocity-bracket study of the quasi-static assumption.
    Quasistatic {
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated max speeds (mm/s).
        #[arg(long)]
        brackets: String,
        #[arg(long, default_value_t = 10.0)]
        reference_speed: f64,
        #[arg(long, value_enum, default_value_t = ModelKind::Gp)]
        model: ModelKind,
        #[arg(long, default_value_t = 0.3)]
        test_fraction: f64,
        #[arg(long, default_value_t = 7777)]
        holdout_seed: u64,
        /// Cap on per-bracket training size (0 = unlimited).
        #[arg(long, default_value_t = 0)]
        max_train: usize,
        #[arg(long, default_value_t = 1)]
        restarts: usize,
        #[arg(long, default_value_t = 120)]
        max_iter: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate synthetic push datasets.
    Synth {
        /// Object shape, e.g. square:90, circle:45, ellipse:65,45.
        #[arg(long, default_value = "square:90")]
        object: String,
        /// Limit-surface ratio override (mm).
        #[arg(long)]
        ls_ratio: Option<f64>,
        #[arg(long, default_value_t = 0.25)]
        friction: f64,
        /// Noise field: default, none, or constant:SX,SY,STH.
        #[arg(long, default_value = "default")]
        noise: String,
        #[arg(long, value_enum, default_value_t = SynthMode::Grid)]
        mode: SynthMode,
        #[arg(long, default_value_t = 800)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 20.0)]
        speed: f64,
        #[arg(long, default_value_t = 0.2)]
        dt: f64,
        /// Speed list for --mode speed-study.
        #[arg(long, default_value = "10,20,30,40,50,60,70,80,90,100")]
        speeds: String,
        /// Push length (mm) for --mode speed-study.
        #[arg(long, default_value_t = 4.0)]
        push_length: f64,
        #[arg(long, default_value_t = 200)]
        n_per_speed: usize,
        /// Speed-effect activation threshold (mm/s) for --mode speed-study.
        #[arg(long)]
        dynamics_threshold: Option<f64>,
        #[arg(long, default_value_t = 0.8)]
        dynamics_gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    // PUSH_VHGP_THREADS caps the linear-algebra thread pool. The default is
    // single-threaded BLAS: at the matrix sizes this tool works with, thread
    // spin-up costs more than it saves, and results stay reproducible across
    // machines with different core counts.
    if std::env::var("OPENBLAS_NUM_THREADS").is_err() {
        let threads = std::env::var("PUSH_VHGP_THREADS").unwrap_or_else(|_| "1".to_string());
        std::env::set_var("OPENBLAS_NUM_THREADS", threads);
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            let code = if e.use_stderr() { 1 } else { 0 };
            std::process::exit(code);
        }
    };
    match run(cli) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(pushgp_cli::exit_code(&e));
        }
    }
}

fn object_from_flags(shape: &str, ls_ratio: Option<f64>, friction: f64) -> Result<ObjectParams> {
    let shape = parse_shape(shape)?;
    match ls_ratio {
        Some(r) => ObjectParams::new(shape, r, friction),
        None => ObjectParams::with_uniform_pressure(shape, friction),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { data, model, out, velocity_free, restarts, max_iter, seed } => {
            let summary = cmd_train(&TrainOptions {
                data,
                model,
                out,
                velocity_free,
                restarts,
                max_iterations: max_iter,
                seed,
            })?;
            println!("trained on {} samples", summary.n_train);
            for (label, obj) in ["dx_mm", "dy_mm", "dtheta_rad"].iter().zip(summary.objectives) {
                println!("{label}: final objective {obj:.6}");
            }
            Ok(())
        }
        Command::Predict { model_file, speed, contact, angle } => {
            let p = cmd_predict(&PredictOptions { model_file, speed, contact, angle })?;
            print!("{}", p.render());
            Ok(())
        }
        Command::Grid { model_file, out, speed, c_step, beta_step } => {
            let spec = GridSpec {
                c_values: linspace_grid(0.0, 1.0, c_step)?,
                beta_values: linspace_grid(-1.5, 1.5, beta_step)?,
                speed,
            };
            let rows = cmd_grid(&GridOptions { model_file, spec, out })?;
            println!("wrote {} grid rows", rows.len());
            Ok(())
        }
        Command::LearningCurve {
            data,
            models,
            sizes,
            seeds,
            seed,
            test_fraction,
            holdout_seed,
            out,
            object,
            ls_ratio,
            friction,
            restarts,
            max_iter,
        } => {
            let rows = cmd_learning_curve(&CurveOptions {
                data,
                models,
                sizes,
                seeds,
                seed,
                test_fraction,
                holdout_seed,
                object: object_from_flags(&object, ls_ratio, friction)?,
                restarts,
                max_iterations: max_iter,
                out,
            })?;
            println!("wrote {} learning-curve rows", rows.len());
            Ok(())
        }
        Command::ValidateKl { model_file, data, out } => {
            let (rows, summary) = cmd_validate_kl(&KlOptions { model_file, data, out })?;
            println!(
                "{} groups scored ({} excluded): average KL {:.4}, median KL {:.4}",
                rows.len(),
                summary.excluded,
                summary.average,
                summary.median
            );
            Ok(())
        }
        Command::Quasistatic {
            data,
            brackets,
            reference_speed,
            model,
            test_fraction,
            holdout_seed,
            max_train,
            restarts,
            max_iter,
            seed,
            out,
        } => {
            let rows = cmd_quasistatic(&QuasistaticOptions {
                data,
                brackets: parse_list(&brackets)?,
                reference_speed,
                model,
                test_fraction,
                holdout_seed,
                max_train,
                restarts,
                max_iterations: max_iter,
                seed,
                out,
            })?;
            for r in &rows {
                println!("<= {} mm/s: n = {}, NMSE {:.4}", r.max_speed, r.n_train, r.nmse_total);
            }
            Ok(())
        }
        Command::Synth {
            object,
            ls_ratio,
            friction,
            noise,
            mode,
            n,
            reps,
            speed,
            dt,
            speeds,
            push_length,
            n_per_speed,
            dynamics_threshold,
            dynamics_gain,
            seed,
            out,
        } => {
            let mut opts = SynthOptions::new(object_from_flags(&object, ls_ratio, friction)?, out);
            opts.noise = parse_noise(&noise)?;
            opts.mode = mode;
            opts.n = n;
            opts.reps = reps;
            opts.speed = speed;
            opts.dt = dt;
            opts.speeds = parse_list(&speeds)?;
            opts.push_length = push_length;
            opts.n_per_speed = n_per_speed;
            opts.dynamics = dynamics_threshold.map(|threshold| SpeedEffect {
                threshold,
                gain: dynamics_gain,
            });
            opts.seed = seed;
            let n_written = cmd_synth(&opts)?;
            println!("wrote {n_written} samples to {}", opts.out.display());
            Ok(())
        }
    }
}
