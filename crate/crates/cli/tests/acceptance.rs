//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//!
//! The real-robot reference numbers are not reproducible without the lab
//! dataset, so the criteria here are property-based against synthetic
//! oracles, with qualitative pattern checks; criterion 11 runs against a
//! real dataset when `PUSHGP_REAL_DATASET` points at one.

use ndarray::{Array1, Array2, Axis};
use pushgp::data::{split, PushDataset, RepeatedPushGroup};
use pushgp::gp::{nlml, GpModel, GpParams};
use pushgp::kernels::ArdSeKernel;
use pushgp::metrics::{kl_gauss, kl_push, nlpd, nmse, Gaussian};
use pushgp::optim::{grad_check, OptimConfig};
use pushgp::pushmodel::{
    analytical_push, synth_generate, synth_generate_repeats, synth_generate_speed_study,
    NoiseField, ObjectParams, PushInput, SamplingSpec, Shape, SpeedEffect,
};
use pushgp::standardize::Standardizer;
use pushgp::vhgp::{bound, n_bound_params, VhgpModel, VhgpParams};
use pushgp_cli::artifact::{InputMode, ModelKind};
use pushgp_cli::commands::curve::{cmd_learning_curve, CurveModel, CurveOptions};
use pushgp_cli::commands::kl::{cmd_validate_kl, KlOptions};
use pushgp_cli::commands::quasistatic::{cmd_quasistatic, QuasistaticOptions};
use pushgp_cli::commands::train::{cmd_train, TrainOptions};
use pushgp_cli::commands::{fit_triple, loaded_from_triple};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::sync::Once;
use std::time::Instant;

fn init() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        if std::env::var("OPENBLAS_NUM_THREADS").is_err() {
            std::env::set_var("OPENBLAS_NUM_THREADS", "1");
        }
    });
}

/// Prints exactly one line per criterion, even on failure.
struct Criterion {
    label: &'static str,
    start: Instant,
    passed: bool,
}

impl Criterion {
    fn begin(label: &'static str) -> Self {
        init();
        Self { label, start: Instant::now(), passed: false }
    }

    fn pass(mut self) {
        self.passed = true;
        println!(
            "[acceptance] {}: PASS ({:.1} s)",
            self.label,
            self.start.elapsed().as_secs_f64()
        );
    }

    fn skip(mut self, reason: &str) {
        self.passed = true;
        println!("[acceptance] {}: SKIP ({reason})", self.label);
    }
}

impl Drop for Criterion {
    fn drop(&mut self) {
        if !self.passed {
            println!(
                "[acceptance] {}: FAIL ({:.1} s)",
                self.label,
                self.start.elapsed().as_secs_f64()
            );
        }
    }
}

fn solve_dense(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = vec![vec![0.0f64; n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[[i, j]];
        }
        m[i][n] = b[i];
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| m[p][col].abs().partial_cmp(&m[q][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        for j in col..=n {
            m[col][j] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                for j in col..=n {
                    m[row][j] -= f * m[col][j];
                }
            }
        }
    }
    Array1::from_iter((0..n).map(|i| m[i][n]))
}

fn grid_dataset(n: usize, seed: u64) -> PushDataset {
    let obj = ObjectParams::default_square();
    let sampling = SamplingSpec::Grid {
        c_values: (0..=20).map(|i| i as f64 / 20.0).collect(),
        beta_values: (0..=30).map(|i| (i as f64 - 15.0) / 10.0).collect(),
        speed: 20.0,
    };
    synth_generate(&obj, &NoiseField::default_heteroscedastic(), &sampling, n, 0.2, seed).unwrap()
}

// -------------------------------------------------------------------------
// 1. Oracle equivalence (GP)
// -------------------------------------------------------------------------
#[test]
fn criterion_01_gp_oracle_equivalence() {
    let c = Criterion::begin("criterion 01 gp-oracle-equivalence");
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    for case in 0..50 {
        let n = rng.random_range(2..=20usize);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.5..1.5));
        let kernel = ArdSeKernel::new(
            (0..3).map(|_| rng.random_range(-0.5..0.8)).collect(),
            rng.random_range(-0.5..0.5),
        )
        .unwrap();
        let s2: f64 = rng.random_range(0.01..0.5);
        let model = GpModel::from_parts(GpParams {
            kernel: kernel.clone(),
            log_noise_variance: s2.ln(),
            noise_floor: 0.0,
            x_train: x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect(),
            y_train: y.to_vec(),
            standardizer: Standardizer::identity(3),
        })
        .unwrap();
        let mut ky = kernel.gram(x.view()).unwrap();
        for i in 0..n {
            ky[[i, i]] += s2 + 1e-8 * kernel.signal_variance();
        }
        for _ in 0..3 {
            let xstar = Array1::from_shape_fn(3, |_| rng.random_range(-2.5..2.5));
            let kstar = kernel.cross(x.view(), xstar.view()).unwrap();
            let a_naive = kstar.dot(&solve_dense(&ky, &y));
            let c2_naive = kernel.signal_variance() - kstar.dot(&solve_dense(&ky, &kstar));
            let p = model.predict(xstar.view()).unwrap();
            assert!((p.mean - a_naive).abs() < 1e-8, "case {case}: mean");
            assert!((p.latent_variance - c2_naive.max(0.0)).abs() < 1e-8, "case {case}: var");
        }
    }
    assert!(c.start.elapsed().as_secs_f64() < 10.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 2. Oracle equivalence (VHGP)
// -------------------------------------------------------------------------
#[test]
fn criterion_02_vhgp_oracle_equivalence() {
    let c = Criterion::begin("criterion 02 vhgp-oracle-equivalence");
    let mut rng = ChaCha8Rng::seed_from_u64(9002);
    for case in 0..50 {
        let n = rng.random_range(2..=20usize);
        let d = 3;
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.5..1.5));
        let kernel_f = ArdSeKernel::new(
            (0..d).map(|_| rng.random_range(-0.4..0.7)).collect(),
            rng.random_range(-0.5..0.5),
        )
        .unwrap();
        let kernel_g = ArdSeKernel::new(
            (0..d).map(|_| rng.random_range(0.0..1.0)).collect(),
            rng.random_range(-1.0..0.3),
        )
        .unwrap();
        let mu0 = rng.random_range(-3.0..-0.5);
        let lambda = Array1::from_shape_fn(n, |_| rng.random_range(0.3..3.0));

        let model = VhgpModel::from_parts(VhgpParams {
            kernel_f: kernel_f.clone(),
            kernel_g: kernel_g.clone(),
            mu0,
            lambda: lambda.to_vec(),
            x_train: x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect(),
            y_train: y.to_vec(),
            standardizer: Standardizer::identity(d),
        })
        .unwrap();

        // naive path: explicit (K_g + Lambda^-1) and (K_f + R) solves
        let kg = kernel_g.gram(x.view()).unwrap();
        let q = lambda.mapv(|v| v - 0.5);
        let mut kg_li = kg.clone();
        for i in 0..n {
            kg_li[[i, i]] += 1.0 / lambda[i];
        }
        let mu = kg.dot(&q) + mu0;
        let mut ky = kernel_f.gram(x.view()).unwrap();
        for i in 0..n {
            let kg_i = kg.column(i).to_owned();
            let sigma_ii = kg[[i, i]] - kg_i.dot(&solve_dense(&kg_li, &kg_i));
            ky[[i, i]] += (mu[i] - 0.5 * sigma_ii).exp() + 1e-8 * kernel_f.signal_variance();
        }
        for _ in 0..2 {
            let xstar = Array1::from_shape_fn(d, |_| rng.random_range(-2.5..2.5));
            let kf_star = kernel_f.cross(x.view(), xstar.view()).unwrap();
            let kg_star = kernel_g.cross(x.view(), xstar.view()).unwrap();
            let a = kf_star.dot(&solve_dense(&ky, &y));
            let c2 = kernel_f.signal_variance() - kf_star.dot(&solve_dense(&ky, &kf_star));
            let b = kg_star.dot(&q) + mu0;
            let d2 = kernel_g.signal_variance() - kg_star.dot(&solve_dense(&kg_li, &kg_star));
            let p = model.predict(xstar.view()).unwrap();
            assert!((p.mean - a).abs() < 1e-8, "case {case}: a");
            assert!((p.latent_variance - c2.max(0.0)).abs() < 1e-8, "case {case}: c2");
            assert!((p.log_noise_mean - b).abs() < 1e-8, "case {case}: b");
            assert!((p.log_noise_variance - d2.max(0.0)).abs() < 1e-8, "case {case}: d2");
        }
    }
    assert!(c.start.elapsed().as_secs_f64() < 30.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 3. Gradient correctness
// -------------------------------------------------------------------------
#[test]
fn criterion_03_gradient_correctness() {
    let c = Criterion::begin("criterion 03 gradient-correctness");
    let mut rng = ChaCha8Rng::seed_from_u64(9003);
    for case in 0..20 {
        let n = rng.random_range(3..=15usize);
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.5..1.5));
        let params = Array1::from_shape_fn(5, |_| rng.random_range(-0.8..0.8));
        let err = grad_check(
            |p| match nlml(p, x.view(), y.view()) {
                Ok(v) => v,
                Err(_) => (f64::NAN, Array1::zeros(p.len())),
            },
            &params,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "NLML case {case}: {err}");
    }
    for case in 0..20 {
        let n = rng.random_range(3..=10usize);
        let d = 3;
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.5..1.5));
        let y = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
        let mut p0 = Array1::from_shape_fn(n_bound_params(d, n), |_| rng.random_range(-0.6..0.6));
        for i in 2 * d + 3..p0.len() {
            p0[i] += (0.5f64).ln();
        }
        let err = grad_check(
            |p| match bound(p, x.view(), y.view()) {
                Ok(v) => v,
                Err(_) => (f64::NAN, Array1::zeros(p.len())),
            },
            &p0,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-4, "bound case {case}: {err}");
    }
    assert!(c.start.elapsed().as_secs_f64() < 60.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 4. Heteroscedastic recovery
// -------------------------------------------------------------------------
#[test]
fn criterion_04_heteroscedastic_recovery() {
    let c = Criterion::begin("criterion 04 heteroscedastic-recovery");
    let mut rng = ChaCha8Rng::seed_from_u64(9004);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 500;
    let x = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.0..1.0));
    let y = Array1::from_shape_fn(n, |i| {
        let xi = x[[i, 0]];
        2.0 * (2.0 * std::f64::consts::PI * xi).sin()
            + (0.05 + 0.25 * xi) * normal.sample(&mut rng)
    });
    let config = OptimConfig::default().with_restarts(1).with_max_iterations(300);
    let gp = GpModel::fit(x.view(), y.view(), &config).unwrap();
    let vhgp = VhgpModel::fit_warm(x.view(), y.view(), &gp, &config).unwrap();
    let mut vhgp_hits = 0;
    let mut gp_hits = 0;
    for i in 0..100 {
        let xi = i as f64 / 99.0;
        let truth = 0.05 + 0.25 * xi;
        let q = ndarray::array![xi];
        if (vhgp.predict(q.view()).unwrap().noise_variance.sqrt() - truth).abs() <= 0.3 * truth {
            vhgp_hits += 1;
        }
        if (gp.predict(q.view()).unwrap().noise_variance.sqrt() - truth).abs() <= 0.3 * truth {
            gp_hits += 1;
        }
    }
    assert!(vhgp_hits >= 90, "VHGP hit only {vhgp_hits}/100 grid points");
    assert!(gp_hits < 60, "constant-noise GP unexpectedly hit {gp_hits}/100");
    assert!(c.start.elapsed().as_secs_f64() < 120.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 5. Metric identities
// -------------------------------------------------------------------------
#[test]
fn criterion_05_metric_identities() {
    let c = Criterion::begin("criterion 05 metric-identities");
    let obs = [0.4, -1.2, 2.2, 0.9, -0.3];
    assert_eq!(nmse(&obs, &obs, 0.1).unwrap(), 0.0);
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    let mean_pred = [mean; 5];
    assert!((nmse(&mean_pred, &obs, mean).unwrap() - 1.0).abs() <= 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(9005);
    for _ in 0..100_000 {
        let p = Gaussian::new(rng.random_range(-20.0..20.0), rng.random_range(1e-6..1e3));
        let q = Gaussian::new(rng.random_range(-20.0..20.0), rng.random_range(1e-6..1e3));
        let kl = kl_gauss(&p, &q).unwrap();
        assert!(kl >= 0.0, "negative KL {kl} for {p:?} {q:?}");
    }

    // NLPD additivity across outputs
    let per_output = [[-0.9, -1.1, -0.5], [-1.3, -0.7, -0.2], [-0.4, -0.6, -1.8], [-2.0, -0.1, -0.9]];
    let joint: Vec<f64> = per_output.iter().map(|s| s.iter().sum()).collect();
    let total = nlpd(&joint).unwrap();
    let mut parts = 0.0;
    for d in 0..3 {
        let col: Vec<f64> = per_output.iter().map(|s| s[d]).collect();
        parts += nlpd(&col).unwrap();
    }
    assert!((total - parts).abs() <= 1e-12);
    c.pass();
}

// -------------------------------------------------------------------------
// 6. Paper-pattern NLPD ordering
// -------------------------------------------------------------------------
#[test]
fn criterion_06_nlpd_ordering() {
    let c = Criterion::begin("criterion 06 nlpd-ordering");
    let ds = grid_dataset(1100, 42);
    let (train, test) = split(&ds, 800, 3).unwrap();
    let means = pushgp_cli::commands::train_means(&train);

    let gp_config = OptimConfig::default().with_restarts(1).with_max_iterations(100);
    let (gp_triple, _) = fit_triple(&train, ModelKind::Gp, InputMode::SpeedContactAngle, &gp_config).unwrap();
    let gp = loaded_from_triple(gp_triple, ModelKind::Gp, InputMode::SpeedContactAngle, 0.2, 0, 800);
    let gp_report = pushgp_cli::commands::evaluate_probabilistic(&gp, &test, &means).unwrap();

    let vh_config = OptimConfig::default().with_restarts(1).with_max_iterations(70);
    let (vh_triple, _) = fit_triple(&train, ModelKind::Vhgp, InputMode::SpeedContactAngle, &vh_config).unwrap();
    let vh = loaded_from_triple(vh_triple, ModelKind::Vhgp, InputMode::SpeedContactAngle, 0.2, 0, 800);
    let vh_report = pushgp_cli::commands::evaluate_probabilistic(&vh, &test, &means).unwrap();

    println!(
        "[acceptance]   NLPD at n=800: GP {:.4}, VHGP {:.4}",
        gp_report.nlpd_total, vh_report.nlpd_total
    );
    assert!(
        vh_report.nlpd_total < gp_report.nlpd_total - 0.1,
        "VHGP NLPD {} should beat GP {} by at least 0.1 nats",
        vh_report.nlpd_total,
        gp_report.nlpd_total
    );
    assert!(c.start.elapsed().as_secs_f64() < 300.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 7. Paper-pattern crossover and saturation
// -------------------------------------------------------------------------
#[test]
fn criterion_07_crossover_and_saturation() {
    let c = Criterion::begin("criterion 07 crossover-and-saturation");
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("curve.csv");
    let ds = grid_dataset(2100, 77);
    pushgp::data::save(&ds, &data_path, pushgp::data::DataFormat::CanonicalCsv).unwrap();

    // deliberately miscalibrated analytical baseline
    let bad_object = ObjectParams::new(Shape::Square { side: 90.0 }, 0.55 * 90.0, 0.1).unwrap();

    let rows_small = cmd_learning_curve(&CurveOptions {
        data: data_path.clone(),
        models: vec![CurveModel::Analytical, CurveModel::Gp, CurveModel::Vhgp],
        sizes: vec![50, 100, 200, 400],
        seeds: 1,
        seed: 0,
        test_fraction: 0.2,
        holdout_seed: 7777,
        object: bad_object.clone(),
        restarts: 1,
        max_iterations: 60,
        out: dir.path().join("curve_small.csv"),
    })
    .unwrap();

    let nmse_of = |rows: &[pushgp_cli::commands::curve::CurveRow], model: &str, size: usize| {
        rows.iter()
            .find(|r| r.model == model && r.n_train == size)
            .map(|r| r.nmse_total)
            .unwrap()
    };
    let mut crossover = None;
    for size in [50, 100, 200, 400] {
        let a = nmse_of(&rows_small, "analytical", size);
        let g = nmse_of(&rows_small, "gp", size);
        let v = nmse_of(&rows_small, "vhgp", size);
        println!("[acceptance]   n={size}: analytical {a:.3}, gp {g:.3}, vhgp {v:.3}");
        if g < a && v < a {
            crossover = Some(size);
            break;
        }
    }
    assert!(
        crossover.is_some(),
        "learned models never crossed below the analytical baseline by n = 400"
    );

    let rows_big = cmd_learning_curve(&CurveOptions {
        data: data_path,
        models: vec![CurveModel::Vhgp],
        sizes: vec![800, 1500],
        seeds: 1,
        seed: 0,
        test_fraction: 0.2,
        holdout_seed: 7777,
        object: bad_object,
        restarts: 1,
        max_iterations: 40,
        out: dir.path().join("curve_big.csv"),
    })
    .unwrap();
    let v800 = nmse_of(&rows_big, "vhgp", 800);
    let v1500 = nmse_of(&rows_big, "vhgp", 1500);
    println!("[acceptance]   saturation: vhgp n=800 {v800:.4}, n=1500 {v1500:.4}");
    assert!(
        (v800 - v1500).abs() <= 0.10 * v800.max(v1500),
        "VHGP NMSE not flat between 800 ({v800}) and 1500 ({v1500})"
    );
    println!(
        "[acceptance]   criterion 07 ran in {:.0} s (crossover at n = {})",
        c.start.elapsed().as_secs_f64(),
        crossover.unwrap()
    );
    c.pass();
}

// -------------------------------------------------------------------------
// 8. KL validation self-consistency and ordering
// -------------------------------------------------------------------------
#[test]
fn criterion_08_kl_validation() {
    let c = Criterion::begin("criterion 08 kl-validation");
    let dir = tempfile::tempdir().unwrap();
    let train_path = dir.path().join("train.csv");
    let ds = grid_dataset(500, 11);
    pushgp::data::save(&ds, &train_path, pushgp::data::DataFormat::CanonicalCsv).unwrap();

    let gp_art = dir.path().join("gp.json");
    let vh_art = dir.path().join("vhgp.json");
    cmd_train(&TrainOptions {
        data: train_path.clone(),
        model: ModelKind::Gp,
        out: gp_art.clone(),
        velocity_free: false,
        restarts: 1,
        max_iterations: 100,
        seed: 0,
    })
    .unwrap();
    cmd_train(&TrainOptions {
        data: train_path,
        model: ModelKind::Vhgp,
        out: vh_art.clone(),
        velocity_free: false,
        restarts: 1,
        max_iterations: 70,
        seed: 0,
    })
    .unwrap();

    // (a) self-consistency: empirical groups drawn from the model's own
    // predictive distributions score a small median KL
    let vhgp = pushgp_cli::artifact::load(&vh_art).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9008);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut kls = Vec::new();
    for k in 0..40 {
        let input = PushInput::new(20.0, (k % 8) as f64 / 7.0, ((k % 5) as f64 - 2.0) * 0.5);
        let predicted = vhgp.predict(&input).unwrap();
        let reps = 100;
        let mut sums = [0.0f64; 3];
        let mut draws = vec![[0.0f64; 3]; reps];
        for draw in draws.iter_mut() {
            for d in 0..3 {
                draw[d] = predicted[d].mean + predicted[d].variance.sqrt() * normal.sample(&mut rng);
                sums[d] += draw[d];
            }
        }
        let mean = [sums[0] / reps as f64, sums[1] / reps as f64, sums[2] / reps as f64];
        let mut var = [0.0f64; 3];
        for draw in &draws {
            for d in 0..3 {
                var[d] += (draw[d] - mean[d]).powi(2) / (reps as f64 - 1.0);
            }
        }
        let group = RepeatedPushGroup {
            input,
            empirical_mean: pushgp::pushmodel::PushOutcome::new(mean[0], mean[1], mean[2]),
            empirical_std: Some([var[0].sqrt(), var[1].sqrt(), var[2].sqrt()]),
            count: reps,
        };
        kls.push(kl_push(&predicted, &group).unwrap().total);
    }
    kls.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = kls[kls.len() / 2];
    println!("[acceptance]   self-consistency median KL: {median:.4}");
    assert!(median < 0.2, "median self-consistency KL {median} too large");

    // (b) ordering: VHGP average KL below GP average KL on a heteroscedastic
    // validation grid generated by the ground-truth process
    let repeats_path = dir.path().join("repeats.csv");
    let repeats = synth_generate_repeats(
        &ObjectParams::default_square(),
        &NoiseField::default_heteroscedastic(),
        &(0..=10).map(|i| i as f64 / 10.0).collect::<Vec<_>>(),
        &(0..=10).map(|i| (i as f64 - 5.0) * 0.3).collect::<Vec<_>>(),
        20.0,
        100,
        0.2,
        23,
    )
    .unwrap();
    pushgp::data::save(&repeats, &repeats_path, pushgp::data::DataFormat::CanonicalCsv).unwrap();

    let (_, gp_summary) = cmd_validate_kl(&KlOptions {
        model_file: gp_art,
        data: repeats_path.clone(),
        out: dir.path().join("kl_gp.csv"),
    })
    .unwrap();
    let (_, vh_summary) = cmd_validate_kl(&KlOptions {
        model_file: vh_art,
        data: repeats_path,
        out: dir.path().join("kl_vhgp.csv"),
    })
    .unwrap();
    println!(
        "[acceptance]   average KL: GP {:.3}, VHGP {:.3} (medians {:.3} / {:.3})",
        gp_summary.average, vh_summary.average, gp_summary.median, vh_summary.median
    );
    assert!(
        vh_summary.average < gp_summary.average,
        "VHGP average KL {} should be below GP {}",
        vh_summary.average,
        gp_summary.average
    );
    assert!(c.start.elapsed().as_secs_f64() < 300.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 9. Analytical-model invariants
// -------------------------------------------------------------------------
#[test]
fn criterion_09_analytical_invariants() {
    let c = Criterion::begin("criterion 09 analytical-invariants");
    let obj = ObjectParams::default_square();
    let (vp, dt) = (20.0, 0.2);

    // v_p = 0 gives the zero outcome
    let r = analytical_push(&PushInput::new(0.0, 0.4, 0.3), &obj, dt).unwrap();
    assert_eq!(r.outcome.to_array(), [0.0, 0.0, 0.0]);

    // mirror antisymmetry and the quasi-static speed bound on the 651 grid
    let mut count = 0;
    for ci in 0..=20 {
        let cc = ci as f64 / 20.0;
        for bi in 0..=30 {
            let b = (bi as f64 - 15.0) / 10.0;
            let o = analytical_push(&PushInput::new(vp, cc, b), &obj, dt).unwrap().outcome;
            assert!(o.dx.hypot(o.dy) <= vp * dt + 1e-9, "speed bound at ({cc}, {b})");
            let m = analytical_push(&PushInput::new(vp, 1.0 - cc, -b), &obj, dt)
                .unwrap()
                .outcome;
            assert!((o.dx - m.dx).abs() < 1e-9, "mirror dx at ({cc}, {b})");
            assert!((o.dy + m.dy).abs() < 1e-9, "mirror dy at ({cc}, {b})");
            assert!((o.dtheta + m.dtheta).abs() < 1e-9, "mirror dtheta at ({cc}, {b})");
            count += 1;
        }
    }
    assert_eq!(count, 651);

    // circle: outcome independent of the contact coordinate
    let circle = ObjectParams::with_uniform_pressure(Shape::Circle { radius: 45.0 }, 0.25).unwrap();
    let reference = analytical_push(&PushInput::new(vp, 0.5, 0.7), &circle, dt).unwrap().outcome;
    for cc in [0.0, 0.2, 0.45, 0.8, 0.99] {
        let o = analytical_push(&PushInput::new(vp, cc, 0.7), &circle, dt).unwrap().outcome;
        assert!((o.dx - reference.dx).abs() < 1e-9);
        assert!((o.dy - reference.dy).abs() < 1e-9);
        assert!((o.dtheta - reference.dtheta).abs() < 1e-9);
    }
    c.pass();
}

// -------------------------------------------------------------------------
// 10. Quasi-static study shape
// -------------------------------------------------------------------------
#[test]
fn criterion_10_quasistatic_study() {
    let c = Criterion::begin("criterion 10 quasistatic-study");
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("speeds.csv");
    let ds = synth_generate_speed_study(
        &ObjectParams::default_square(),
        &NoiseField::default_heteroscedastic(),
        &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0],
        4.0,
        120,
        Some(SpeedEffect { threshold: 60.0, gain: 0.8 }),
        101,
    )
    .unwrap();
    pushgp::data::save(&ds, &data_path, pushgp::data::DataFormat::CanonicalCsv).unwrap();

    let rows = cmd_quasistatic(&QuasistaticOptions {
        data: data_path,
        brackets: vec![20.0, 40.0, 60.0, 80.0, 100.0],
        reference_speed: 10.0,
        model: ModelKind::Gp,
        test_fraction: 0.35,
        holdout_seed: 7777,
        max_train: 350,
        restarts: 1,
        max_iterations: 80,
        seed: 0,
        out: dir.path().join("qs.csv"),
    })
    .unwrap();
    for r in &rows {
        println!(
            "[acceptance]   bracket <= {} mm/s: n = {}, NMSE {:.4}",
            r.max_speed, r.n_train, r.nmse_total
        );
    }
    let argmin = rows
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.nmse_total.partial_cmp(&b.1.nmse_total).unwrap())
        .unwrap()
        .0;
    let best_speed = rows[argmin].max_speed;
    assert!(
        (40.0..=80.0).contains(&best_speed),
        "NMSE minimum at bracket {best_speed} mm/s, expected within [40, 80]"
    );
    for w in rows[argmin..].windows(2) {
        assert!(
            w[1].nmse_total >= w[0].nmse_total - 0.02 * w[0].nmse_total,
            "NMSE should not improve past the quasi-static regime: {} -> {}",
            w[0].nmse_total,
            w[1].nmse_total
        );
    }
    let last = rows.last().unwrap().nmse_total;
    assert!(
        last > 1.1 * rows[argmin].nmse_total,
        "including fast pushes should clearly degrade NMSE ({last} vs {})",
        rows[argmin].nmse_total
    );
    assert!(c.start.elapsed().as_secs_f64() < 300.0, "runtime budget exceeded");
    c.pass();
}

// -------------------------------------------------------------------------
// 11. Real dataset, when provided
// -------------------------------------------------------------------------
#[test]
fn criterion_11_real_dataset_orderings() {
    let c = Criterion::begin("criterion 11 real-dataset-orderings");
    let Ok(path) = std::env::var("PUSHGP_REAL_DATASET") else {
        c.skip("set PUSHGP_REAL_DATASET to a canonical CSV/JSON dataset to run");
        return;
    };
    let ds = pushgp_cli::commands::load_dataset(std::path::Path::new(&path)).unwrap();
    assert!(ds.len() > 300, "real dataset too small to evaluate");
    let n_test = (ds.len() / 4).max(100);
    let (pool, test) = split(&ds, ds.len() - n_test, 7777).unwrap();
    let n_train = pool.len().min(800).max(200);
    let (train, _) = split(&pool, n_train, 0).unwrap();
    let means = pushgp_cli::commands::train_means(&train);

    let config = OptimConfig::default().with_restarts(2).with_max_iterations(150);
    let (gp_triple, _) = fit_triple(&train, ModelKind::Gp, InputMode::SpeedContactAngle, &config).unwrap();
    let gp = loaded_from_triple(gp_triple, ModelKind::Gp, InputMode::SpeedContactAngle, 0.2, 0, n_train);
    let gp_report = pushgp_cli::commands::evaluate_probabilistic(&gp, &test, &means).unwrap();

    let vh_config = OptimConfig::default().with_restarts(1).with_max_iterations(100);
    let (vh_triple, _) = fit_triple(&train, ModelKind::Vhgp, InputMode::SpeedContactAngle, &vh_config).unwrap();
    let vh = loaded_from_triple(vh_triple, ModelKind::Vhgp, InputMode::SpeedContactAngle, 0.2, 0, n_train);
    let vh_report = pushgp_cli::commands::evaluate_probabilistic(&vh, &test, &means).unwrap();

    let baseline = pushgp_cli::commands::curve::evaluate_analytical(
        &ObjectParams::default_square(),
        &train,
        &test,
        &means,
    )
    .unwrap();

    println!(
        "[acceptance]   real data NMSE: analytical {:.3}, GP {:.3}, VHGP {:.3}; NLPD GP {:.3}, VHGP {:.3}",
        baseline.nmse_total,
        gp_report.nmse_total,
        vh_report.nmse_total,
        gp_report.nlpd_total,
        vh_report.nlpd_total
    );
    assert!(vh_report.nmse_total <= gp_report.nmse_total + 0.05);
    assert!(vh_report.nlpd_total < gp_report.nlpd_total);
    assert!(gp_report.nmse_total < baseline.nmse_total);
    assert!(vh_report.nmse_total < baseline.nmse_total);
    c.pass();
}
