//! Simulator properties: occupation means and second moments against
//! semigroup oracles, far-field stepping, step-size consistency, subtree
//! independence, and the full fluctuation pipeline against a deterministic
//! finite-horizon variance.

mod common;

use occufluct::grid::GridFn;
use occufluct::measure::{PlacementRule, PointMeasure, ThetaLaw, Window};
use occufluct::rng::replica_rng;
use occufluct::stable::{semigroup_apply, StableParams};
use occufluct::system::{simulate_occupation, FluctuationRunner, SimOptions, SystemConfig};
use occufluct::testfn::TestFunction;
use occufluct::theory::{moment_oracle, occupation_variance_poisson, OracleOptions};

fn single_particle_config(alpha: f64, horizon: f64, delta: f64) -> SystemConfig {
    SystemConfig {
        stable: StableParams::new(alpha).unwrap(),
        branching: false,
        rate_v: 0.0,
        horizon_t: horizon,
        tau: 1.0,
        step_delta: Some(delta),
    }
}

/// `int_0^H T_s phi(start) ds` by Simpson over the semigroup.
fn occupation_mean_oracle(alpha: f64, start: f64, horizon: f64, phi: &TestFunction) -> f64 {
    let params = StableParams::new(alpha).unwrap();
    let (grid, tol) = occufluct::theory::oracle_grid(alpha);
    let phi_f = GridFn::sample(grid, |x| phi.eval(x));
    let panels = 128;
    let h = horizon / panels as f64;
    let mut acc = 0.0;
    for k in 0..=panels {
        let w = if k == 0 || k == panels {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let moved = semigroup_apply(params, k as f64 * h, &phi_f, tol).unwrap();
        acc += w * moved.interp_cubic(start);
    }
    acc * h / 3.0
}

#[test]
fn occupation_mean_matches_semigroup_quadrature() {
    // Single particle at 0, alpha = 2, V = 0 over [0, 1].
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let oracle = occupation_mean_oracle(2.0, 0.0, 1.0, &phi);
    let config = single_particle_config(2.0, 1.0, 0.002);
    let opts = SimOptions::default();
    let measure = PointMeasure { window: Window::new(0, 1).unwrap(), atoms: vec![0.0] };
    let n = 30_000;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = replica_rng(61, i as u64);
            simulate_occupation(&config, &measure, &[phi], &[1.0], &mut rng, &opts).unwrap()[0]
                [0]
        })
        .collect();
    let (mean, se) = common::mean_and_se(&samples);
    assert!(
        (mean - oracle).abs() < 3.0 * se,
        "MC {mean} +/- {se} vs oracle {oracle}"
    );
}

#[test]
fn far_start_occupation_respects_far_field_stepping() {
    // A particle starting 30 units away only reaches the bump through the
    // far-field schedule; its mean occupation must still match the oracle.
    let alpha = 0.75;
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let oracle = occupation_mean_oracle(alpha, 30.0, 10.0, &phi);
    let config = single_particle_config(alpha, 10.0, 0.05);
    let opts = SimOptions::default(); // far-field stepping on
    let measure = PointMeasure { window: Window::new(30, 31).unwrap(), atoms: vec![30.0] };
    let n = 400_000;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = replica_rng(67, i as u64);
            simulate_occupation(&config, &measure, &[phi], &[1.0], &mut rng, &opts).unwrap()[0]
                [0]
        })
        .collect();
    let (mean, se) = common::mean_and_se(&samples);
    assert!(
        (mean - oracle).abs() < 3.0 * se,
        "MC {mean} +/- {se} vs oracle {oracle} (far-field bias?)"
    );
}

#[test]
fn occupation_second_moment_matches_double_oracle() {
    // E[(int_0^1 phi(eta_s) ds)^2] = 2 int int_{r<r'} oracle(r, r'), i.e. the
    // Simpson double integral of the exact mixed moment over the square.
    let alpha = 2.0;
    let params = StableParams::new(alpha).unwrap();
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let opts = OracleOptions::default();
    let panels = 16;
    let h = 1.0 / panels as f64;
    let mut double = 0.0;
    for i in 0..=panels {
        for j in 0..=panels {
            let wi = if i == 0 || i == panels {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let wj = if j == 0 || j == panels {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let (r, rp) = (i as f64 * h, j as f64 * h);
            let v = moment_oracle(params, false, 0.0, 0.0, r, rp, &phi, &phi, &opts).unwrap();
            double += wi * wj * v;
        }
    }
    double *= h * h / 9.0;

    let config = single_particle_config(alpha, 1.0, 0.002);
    let sim_opts = SimOptions::default();
    let measure = PointMeasure { window: Window::new(0, 1).unwrap(), atoms: vec![0.0] };
    let n = 30_000;
    let squares: Vec<f64> = (0..n)
        .map(|i| {
            let mut rng = replica_rng(71, i as u64);
            let v = simulate_occupation(&config, &measure, &[phi], &[1.0], &mut rng, &sim_opts)
                .unwrap()[0][0];
            v * v
        })
        .collect();
    let (mean, se) = common::mean_and_se(&squares);
    assert!(
        (mean - double).abs() < 3.0 * se,
        "MC {mean} +/- {se} vs 2D oracle {double}"
    );
}

#[test]
fn distant_subtrees_are_uncorrelated() {
    // Occupation contributions of atoms at -30 and +30 against bumps at the
    // respective sites: covariance within 3 SE of zero.
    let config = single_particle_config(2.0, 4.0, 0.01);
    let opts = SimOptions::default();
    let phi_l = TestFunction::gaussian(-30.0, 1.0, 1.0).unwrap();
    let phi_r = TestFunction::gaussian(30.0, 1.0, 1.0).unwrap();
    let measure = PointMeasure {
        window: Window::new(-31, 31).unwrap(),
        atoms: vec![-30.0, 30.0],
    };
    let n = 8_000;
    let mut left = Vec::with_capacity(n);
    let mut right = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = replica_rng(73, i as u64);
        let raw =
            simulate_occupation(&config, &measure, &[phi_l, phi_r], &[1.0], &mut rng, &opts)
                .unwrap();
        left.push(raw[0][0]);
        right.push(raw[0][1]);
    }
    let (cov, se) = common::covariance_and_se(&left, &right);
    assert!(cov.abs() < 3.0 * se, "cov {cov} +/- {se}");
}

#[test]
fn halving_delta_keeps_the_mean_within_one_se() {
    // Riemann-step consistency at the default step (which scales with the
    // horizon precisely so that the left-endpoint bias stays below the
    // Monte Carlo resolution).
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let measure = PointMeasure { window: Window::new(0, 1).unwrap(), atoms: vec![0.0] };
    let opts = SimOptions::default();
    let n = 20_000;
    let base = single_particle_config(1.5, 2.0, 0.05);
    let default_delta = SystemConfig { step_delta: None, ..base }.delta();
    let mean_at = |delta: f64, seed: u64| {
        let config = SystemConfig { step_delta: Some(delta), ..base };
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let mut rng = replica_rng(seed, i as u64);
                simulate_occupation(&config, &measure, &[phi], &[1.0], &mut rng, &opts)
                    .unwrap()[0][0]
            })
            .collect();
        common::mean_and_se(&samples)
    };
    let (m_full, se_full) = mean_at(default_delta, 79);
    let (m_half, _) = mean_at(default_delta / 2.0, 83);
    assert!(
        (m_full - m_half).abs() < se_full,
        "halving delta moved the mean {m_full} -> {m_half} (se {se_full})"
    );
}

#[test]
fn far_field_stepping_preserves_the_variance() {
    // A/B guard: identical configuration with far-field stepping on and off
    // at a horizon where the exact schedule is still affordable.
    let alpha = 0.5;
    let theta = ThetaLaw::poisson(1.0).unwrap();
    let t_horizon = 15.0;
    let n = 2_500;
    let run = |far: f64, seed: u64| {
        let runner = FluctuationRunner::new(
            SystemConfig {
                stable: StableParams::new(alpha).unwrap(),
                branching: false,
                rate_v: 0.0,
                horizon_t: t_horizon,
                tau: 1.0,
                step_delta: None,
            },
            theta.clone(),
            PlacementRule::IidUniform,
            vec![TestFunction::gaussian(0.0, 1.0, 1.0).unwrap()],
            vec![1.0],
            SimOptions { far_miss_prob: far, ..SimOptions::default() },
            seed,
            None,
        )
        .unwrap();
        let vals: Vec<f64> =
            (0..n).map(|i| runner.run_replica(i as u64).unwrap().values[0][0]).collect();
        common::variance_and_se(&vals)
    };
    let (v_exact, se_exact) = run(0.0, 103);
    let (v_far, se_far) = run(SimOptions::default().far_miss_prob, 107);
    let band = 3.0 * (se_exact * se_exact + se_far * se_far).sqrt();
    assert!(
        (v_exact - v_far).abs() < band,
        "far-field changed the variance: {v_exact} vs {v_far} (band {band})"
    );
}

fn runner_for(
    alpha: f64,
    theta: ThetaLaw,
    horizon_t: f64,
    opts: SimOptions,
    seed: u64,
) -> FluctuationRunner {
    FluctuationRunner::new(
        SystemConfig {
            stable: StableParams::new(alpha).unwrap(),
            branching: false,
            rate_v: 0.0,
            horizon_t,
            tau: 1.0,
            step_delta: None,
        },
        theta,
        PlacementRule::IidUniform,
        vec![TestFunction::gaussian(0.0, 1.0, 1.0).unwrap()],
        vec![1.0],
        opts,
        seed,
        None,
    )
    .unwrap()
}

#[test]
fn fluctuation_pipeline_matches_exact_finite_horizon_variance() {
    // Poisson initial law, uniform placement, alpha = 2, T = 20: the variance
    // of the raw occupation integral is exactly
    // E theta * 2 int_0^T (T-u) int phi T_u phi du (full line).
    let alpha = 2.0;
    let t_horizon = 20.0;
    let phi = TestFunction::gaussian(0.0, 1.0, 1.0).unwrap();
    let params = StableParams::new(alpha).unwrap();
    let exact = occupation_variance_poisson(
        params,
        1.0,
        t_horizon,
        &phi,
        occufluct::grid::Grid::symmetric(64.0, 1 << 12),
        1e-8,
    )
    .unwrap();

    let runner = runner_for(alpha, ThetaLaw::poisson(1.0).unwrap(), t_horizon,
        SimOptions::default(), 91);
    let n = 3_000;
    let raws: Vec<f64> = (0..n).map(|i| runner.run_replica_raw(i as u64).unwrap()[0][0]).collect();
    let (var, var_se) = common::variance_and_se(&raws);
    assert!(
        (var - exact).abs() < 3.0 * var_se,
        "pipeline variance {var} +/- {var_se} vs exact {exact}"
    );

    // Centering check: normalized samples have mean 0 within 3 SE.
    let samples: Vec<f64> = (0..n)
        .map(|i| runner.run_replica(i as u64).unwrap().values[0][0])
        .collect();
    let (mean, se) = common::mean_and_se(&samples);
    assert!(mean.abs() < 3.0 * se, "normalized mean {mean} +/- {se}");
}

#[test]
fn window_doubling_shifts_variance_less_than_one_se() {
    // The design rule's window is big enough that doubling it moves the
    // variance estimate by less than one standard error.
    let alpha = 0.75;
    let theta = ThetaLaw::poisson(1.0).unwrap();
    let n = 900;
    let base = runner_for(alpha, theta.clone(), 20.0, SimOptions::default(), 97);
    let doubled = FluctuationRunner::new(
        *base.config(),
        theta,
        PlacementRule::IidUniform,
        base.phis().to_vec(),
        base.obs_times().to_vec(),
        SimOptions::default(),
        97,
        Some(Window::symmetric(2 * base.window().hi)),
    )
    .unwrap();
    let var_of = |runner: &FluctuationRunner| {
        let vals: Vec<f64> =
            (0..n).map(|i| runner.run_replica(i as u64).unwrap().values[0][0]).collect();
        common::variance_and_se(&vals)
    };
    let (v1, se1) = var_of(&base);
    let (v2, _) = var_of(&doubled);
    assert!(
        (v1 - v2).abs() < se1,
        "window doubling moved the variance {v1} -> {v2} (se {se1})"
    );
}
