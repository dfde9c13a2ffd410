//! Limit-theory properties: kernel identities, positive-definiteness, the
//! potential operator, Wiener covariances, and the moment oracles against
//! Monte Carlo.

mod common;

use approx::{assert_abs_diff_eq, assert_relative_eq};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use occufluct::grid::Grid;
use occufluct::measure::ThetaLaw;
use occufluct::numerics::{adaptive_simpson, symmetric_eigenvalues};
use occufluct::rng::replica_rng;
use occufluct::stable::StableParams;
use occufluct::system::{simulate_census, SimOptions, SystemConfig};
use occufluct::testfn::TestFunction;
use occufluct::theory::{
    classify_regime, increment_cov, moment_oracle, pairing_fourier, potential_constant,
    subfbm_cov, theta_cov, wiener_cov, xi_cov, CovarianceModel, OracleOptions,
    PotentialOperator, WienerKind, WienerOptions,
};

#[test]
fn additive_identity_at_equal_times() {
    // C^H(t,t) + Q^H(t,t) = t^{2H} for H > 1/2:
    // (2 - 2^{2H-1}) + (2^{2H-1} - 1) = 1.
    for &h in &[0.55, 2.0 / 3.0, 0.75, 5.0 / 6.0] {
        for &t in &[0.3, 1.0, 2.7] {
            let total = subfbm_cov(h, t, t) + theta_cov(h, t, t);
            assert_abs_diff_eq!(total, t.powf(2.0 * h), epsilon = 1e-12);
        }
    }
}

#[test]
fn theta_variance_is_nonnegative_for_all_h() {
    // Q^H(t,t) = |2^{2H-1} - 1| t^{2H} >= 0 on both sides of H = 1/2.
    for &h in &[0.2, 0.4, 0.5, 0.6, 0.9] {
        for &t in &[0.5, 1.0, 3.0] {
            let q = theta_cov(h, t, t);
            let expect = (2.0f64.powf(2.0 * h - 1.0) - 1.0).abs() * t.powf(2.0 * h);
            assert_abs_diff_eq!(q, expect, epsilon = 1e-12);
            assert!(q >= 0.0);
        }
    }
}

#[test]
fn kernels_are_self_similar() {
    for &h in &[0.6, 0.75, 5.0 / 6.0] {
        for &a in &[0.5, 3.0] {
            for &(s, t) in &[(0.5, 1.0), (1.0, 2.0), (0.7, 0.7)] {
                assert_relative_eq!(
                    subfbm_cov(h, a * s, a * t),
                    a.powf(2.0 * h) * subfbm_cov(h, s, t),
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
                assert_relative_eq!(
                    theta_cov(h, a * s, a * t),
                    a.powf(2.0 * h) * theta_cov(h, s, t),
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }
}

#[test]
fn covariance_models_are_positive_semidefinite() {
    // Minimum eigenvalue >= -1e-10 * max eigenvalue on random grids in (0, 5].
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let phi = TestFunction::gaussian_unit_mass(0.0, 1.0);
    let psi = TestFunction::gaussian(0.4, 0.8, 1.0).unwrap();
    let opts = WienerOptions { fine_nodes: 1 << 11, wide_nodes: 1 << 10, ..Default::default() };
    let models = vec![
        CovarianceModel::SubFbm { h: 0.55 },
        CovarianceModel::SubFbm { h: 0.75 },
        CovarianceModel::ThetaProc { h: 2.0 / 3.0 },
        CovarianceModel::ThetaProc { h: 0.3 },
        CovarianceModel::Xi { e_theta: 1.0, var_theta: 2.0, h: 5.0 / 6.0 },
        CovarianceModel::Brownian { scale: 1.3 },
        CovarianceModel::wiener_nb(StableParams::new(0.6).unwrap(), 1.0, &phi, &psi, &opts)
            .unwrap(),
        CovarianceModel::wiener_b(StableParams::new(0.4).unwrap(), 1.0, 1.0, &phi, &psi, &opts)
            .unwrap(),
    ];
    use rand::Rng;
    for model in &models {
        for _ in 0..3 {
            let mut grid: Vec<f64> = (0..12).map(|_| rng.gen::<f64>() * 5.0).collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
            let n = grid.len();
            let mut k = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    k[i * n + j] = model.eval(grid[i], grid[j]);
                }
            }
            let eig = symmetric_eigenvalues(&k, n);
            let max = eig.iter().cloned().fold(f64::MIN, f64::max);
            let min = eig.iter().cloned().fold(f64::MAX, f64::min);
            assert!(
                min >= -1e-10 * max.abs(),
                "{}: min eigenvalue {min} vs max {max}",
                model.name()
            );
        }
    }
}

#[test]
fn fbm_recovery_on_dense_grid() {
    // xi with E theta = Var theta = m equals (m/2)(s^2H + t^2H - |s-t|^2H)
    // to 1e-12 on a 20 x 20 grid.
    let h = 0.75;
    let m = 2.5;
    for i in 1..=20 {
        for j in 1..=20 {
            let (s, t) = (0.25 * i as f64, 0.25 * j as f64);
            let expect =
                0.5 * m * (s.powf(2.0 * h) + t.powf(2.0 * h) - (s - t).abs().powf(2.0 * h));
            assert_abs_diff_eq!(xi_cov(m, m, h, s, t), expect, epsilon = 1e-12);
        }
    }
}

#[test]
fn potential_decay_bound() {
    // |G phi(x)| <= C / (1 + |x|^{1-alpha}): the normalized sup over a wide
    // grid is finite and stable under refinement.
    let alpha = 0.5;
    let op = PotentialOperator::new(StableParams::new(alpha).unwrap()).unwrap();
    let phi = TestFunction::gaussian_unit_mass(0.0, 1.0);
    let sup = |nodes: usize| -> f64 {
        let grid = Grid::symmetric(1024.0, nodes);
        let g = op.apply_to_test_fn(&phi, grid);
        grid.xs()
            .zip(&g.values)
            .map(|(x, v)| v.abs() * (1.0 + x.abs().powf(1.0 - alpha)))
            .fold(0.0, f64::max)
    };
    // dx = 1/16 and 1/32: the bump must stay resolved for the sup to settle.
    let coarse = sup(1 << 15);
    let fine = sup(1 << 16);
    assert!(coarse.is_finite() && fine.is_finite());
    assert_relative_eq!(coarse, fine, max_relative = 1e-3);
}

#[test]
fn potential_value_at_zero_against_brute_force() {
    // G phi(0) for a unit Gaussian bump, alpha = 1/2. Closed form:
    // C_alpha int e^{-y^2/2} |y|^{alpha-1} dy = C_alpha 2^{alpha/2} Gamma(alpha/2),
    // and an independent brute-force quadrature with substituted nodes.
    let alpha = 0.5;
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let closed = potential_constant(alpha)
        * 2.0f64.powf(alpha / 2.0)
        * statrs::function::gamma::gamma(alpha / 2.0);
    // Brute force: y = w^{1/alpha} flattens the |y|^{alpha-1} singularity.
    let brute = 2.0 * potential_constant(alpha)
        * adaptive_simpson(
            &|w: f64| {
                if w <= 0.0 {
                    return 0.0;
                }
                let y = w.powf(1.0 / alpha);
                (-0.5 * y * y).exp() / alpha
            },
            0.0,
            40.0f64.powf(alpha),
            1e-12,
        );
    assert_relative_eq!(brute, closed, epsilon = 1e-9);

    let op = PotentialOperator::new(StableParams::new(alpha).unwrap()).unwrap();
    let grid = Grid::symmetric(32.0, 1 << 14);
    let g = op.apply_to_test_fn(&phi, grid);
    let at_zero = g.values[grid.nearest(0.0)];
    assert_relative_eq!(at_zero, brute, max_relative = 1e-6);
}

#[test]
fn wiener_cov_min_structure_and_symmetry() {
    let alpha = StableParams::new(0.5).unwrap();
    let phi = TestFunction::gaussian_unit_mass(0.0, 1.0);
    let psi = TestFunction::gaussian(0.7, 1.3, 0.8).unwrap();
    let opts = WienerOptions { fine_nodes: 1 << 12, ..Default::default() };
    let c22 = wiener_cov(WienerKind::NonBranching, alpha, 1.5, 0.0, &phi, &psi, 2.0, 2.0, &opts)
        .unwrap();
    let c23 = wiener_cov(WienerKind::NonBranching, alpha, 1.5, 0.0, &phi, &psi, 2.0, 3.0, &opts)
        .unwrap();
    let c11 = wiener_cov(WienerKind::NonBranching, alpha, 1.5, 0.0, &phi, &psi, 1.0, 1.0, &opts)
        .unwrap();
    // Covariance scales exactly as min(s, t).
    assert_abs_diff_eq!(c23, c22, epsilon = 1e-14);
    assert_relative_eq!(c22, 2.0 * c11, epsilon = 1e-12, max_relative = 1e-12);

    // int phi G psi = int psi G phi: the bilinear assembly is symmetric by
    // construction, so the difference is exactly zero.
    let op = PotentialOperator::new(alpha).unwrap();
    let grid = Grid::symmetric(32.0, 1 << 12);
    let ab = op.pairing(&phi, &psi, grid);
    let ba = op.pairing(&psi, &phi, grid);
    assert!((ab - ba).abs() <= 1e-8 * ab.abs().max(1.0), "asymmetry {}", ab - ba);
}

#[test]
fn wiener_pairing_cross_scheme() {
    // Grid scheme (exact piecewise-linear bilinear form + Richardson) against
    // the Fourier-side quadrature; two genuinely different routes.
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    for &alpha in &[0.4, 0.5, 0.6] {
        let params = StableParams::new(alpha).unwrap();
        let op = PotentialOperator::new(params).unwrap();
        let grid = Grid::symmetric(32.0, 1 << 13);
        let grid_side = op.pairing_refined(&phi, &phi, grid);
        let fourier_side = pairing_fourier(alpha, &phi, &phi).unwrap();
        assert_relative_eq!(grid_side, fourier_side, max_relative = 1e-6);
    }
}

#[test]
fn wiener_cov_rejects_regime_mismatch() {
    let phi = TestFunction::gaussian_unit_mass(0.0, 1.0);
    let opts = WienerOptions::default();
    assert!(wiener_cov(
        WienerKind::NonBranching,
        StableParams::new(1.2).unwrap(),
        1.0,
        0.0,
        &phi,
        &phi,
        1.0,
        1.0,
        &opts
    )
    .is_err());
    assert!(wiener_cov(
        WienerKind::Branching,
        StableParams::new(0.6).unwrap(),
        1.0,
        1.0,
        &phi,
        &phi,
        1.0,
        1.0,
        &opts
    )
    .is_err());
}

#[test]
fn lrd_exponents_from_kernels() {
    // Increment-covariance decay: theta process like tau^{2H-2} (slope within
    // 0.1), sub-fBm like tau^{2H-3} (slope within 0.25).
    let lags: Vec<f64> = (3..=9).map(|k| (1u64 << k) as f64).collect();
    for &h in &[2.0 / 3.0, 0.75, 5.0 / 6.0] {
        let theta_curve: Vec<f64> =
            lags.iter().map(|&tau| increment_cov(|s, t| theta_cov(h, s, t), 0.0, tau)).collect();
        let slope_theta = common::loglog_slope(&lags, &theta_curve);
        assert!(
            (slope_theta - (2.0 * h - 2.0)).abs() < 0.1,
            "H {h}: theta slope {slope_theta} vs {}",
            2.0 * h - 2.0
        );

        let sub_curve: Vec<f64> =
            lags.iter().map(|&tau| increment_cov(|s, t| subfbm_cov(h, s, t), 0.0, tau)).collect();
        let slope_sub = common::loglog_slope(&lags, &sub_curve);
        assert!(
            (slope_sub - (2.0 * h - 3.0)).abs() < 0.25,
            "H {h}: sub-fBm slope {slope_sub} vs {}",
            2.0 * h - 3.0
        );
    }
}

#[test]
fn moment_oracle_against_branching_monte_carlo() {
    // alpha = 0.75, V = 1, single ancestor at 0: the exact mixed moment
    // E<N_1, phi><N_2, phi> against the census simulator.
    let alpha = 0.75;
    let params = StableParams::new(alpha).unwrap();
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let oracle = moment_oracle(
        params,
        true,
        1.0,
        0.0,
        1.0,
        2.0,
        &phi,
        &phi,
        &OracleOptions::default(),
    )
    .unwrap();

    let config = SystemConfig {
        stable: params,
        branching: true,
        rate_v: 1.0,
        horizon_t: 1.0,
        tau: 2.0,
        step_delta: Some(0.05),
    };
    let opts = SimOptions::default();
    let n = 30_000;
    let products: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = replica_rng(515, i as u64);
            let w = simulate_census(&config, 0.0, &[1.0, 2.0], &[phi], &mut rng, &opts).unwrap();
            w[0][0] * w[1][0]
        })
        .collect();
    let (mean, se) = common::mean_and_se(&products);
    assert!(
        (mean - oracle).abs() < 3.0 * se,
        "MC {mean} +/- {se} vs oracle {oracle}"
    );
}

#[test]
fn classification_examples() {
    let theta = ThetaLaw::poisson(1.0).unwrap();
    let r = classify_regime(1.5, false, &theta, 0.0).unwrap();
    assert_abs_diff_eq!(r.hurst.unwrap(), 2.0 / 3.0, epsilon = 1e-15);
    let r = classify_regime(0.75, true, &theta, 1.0).unwrap();
    assert_abs_diff_eq!(r.hurst.unwrap(), 5.0 / 6.0, epsilon = 1e-15);
    // Branching at alpha >= 1 is out of theorem range, explicitly flagged.
    let r = classify_regime(1.2, true, &theta, 1.0).unwrap();
    assert!(!r.is_supported());
}
