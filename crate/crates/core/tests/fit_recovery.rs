//! End-to-end recovery checks on synthetic data where the generator is the
//! oracle: the VHGP must track an input-dependent noise profile that a
//! homoscedastic GP structurally cannot represent.

use ndarray::{Array1, Array2};
use pushgp::gp::GpModel;
use pushgp::optim::OptimConfig;
use pushgp::vhgp::VhgpModel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// y = 2 sin(2 pi x) + eps(x), sigma(x) = 0.05 + 0.25 x on [0, 1].
fn heteroscedastic_1d(n: usize, seed: u64) -> (Array2<f64>, Array1<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let x = Array2::from_shape_fn((n, 1), |_| rng.random_range(0.0..1.0));
    let y = Array1::from_shape_fn(n, |i| {
        let xi = x[[i, 0]];
        let sigma = 0.05 + 0.25 * xi;
        2.0 * (2.0 * std::f64::consts::PI * xi).sin() + sigma * normal.sample(&mut rng)
    });
    (x, y)
}

#[test]
fn vhgp_recovers_noise_ramp_where_gp_cannot() {
    let (x, y) = heteroscedastic_1d(500, 7);
    let config = OptimConfig::default()
        .with_restarts(1)
        .with_max_iterations(300);
    let gp = GpModel::fit(x.view(), y.view(), &config).unwrap();
    let vhgp = VhgpModel::fit_warm(x.view(), y.view(), &gp, &config).unwrap();

    let mut vhgp_hits = 0usize;
    let mut gp_hits = 0usize;
    let grid_len = 100;
    for i in 0..grid_len {
        let xi = i as f64 / (grid_len - 1) as f64;
        let truth = 0.05 + 0.25 * xi;
        let q = ndarray::array![xi];
        let pv = vhgp.predict(q.view()).unwrap();
        if (pv.noise_variance.sqrt() - truth).abs() <= 0.3 * truth {
            vhgp_hits += 1;
        }
        let pg = gp.predict(q.view()).unwrap();
        if (pg.noise_variance.sqrt() - truth).abs() <= 0.3 * truth {
            gp_hits += 1;
        }
    }
    assert!(
        vhgp_hits >= 90,
        "VHGP tracked the noise ramp on only {vhgp_hits}/100 grid points"
    );
    assert!(
        gp_hits < 60,
        "a constant-noise GP should not track the ramp, but hit {gp_hits}/100"
    );
}

#[test]
fn vhgp_bound_trace_is_monotone_under_fit() {
    // The accepted optimizer iterates must never decrease the bound; checked
    // through the negated objective trace of a short fit.
    let (x, y) = heteroscedastic_1d(120, 11);
    let config = OptimConfig::default()
        .with_restarts(1)
        .with_max_iterations(60);
    let gp = GpModel::fit(x.view(), y.view(), &config).unwrap();
    let xs = gp.standardizer().transform_inputs(x.view());
    let ys = gp.standardizer().transform_targets(y.view());
    let kernel_g = pushgp::kernels::ArdSeKernel::new(
        gp.kernel().log_lengthscales.iter().map(|l| l + (2f64).ln()).collect(),
        0.0,
    )
    .unwrap();
    let p0 = pushgp::vhgp::pack_params(
        gp.kernel(),
        &kernel_g,
        gp.noise_variance_standardized().ln(),
        &Array1::from_elem(120, (0.5f64).ln()),
    );
    let res = pushgp::optim::minimize(
        |p| match pushgp::vhgp::bound(p, xs.view(), ys.view()) {
            Ok((v, g)) => (-v, -g),
            Err(_) => (f64::INFINITY, Array1::zeros(p.len())),
        },
        &p0,
        &config,
    )
    .unwrap();
    for w in res.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-10, "bound decreased along accepted iterates");
    }
}
