//! Acceptance gate: one test per criterion, shared campaigns behind `Lazy`
//! so a full run (`cargo test --test acceptance`) computes each expensive
//! artifact once. Expect the suite to take tens of minutes on one core; the
//! maximum-likelihood campaign dominates.

use nalgebra::{DVector, Matrix2};
use once_cell::sync::Lazy;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::path::Path;
use std::process::Command;

use botlab::dependence::{clt_experiment, Functional};
use botlab::estimate::{gauss_hermite, lse, mle, OptimizerConfig};
use botlab::geometry::{
    bearing_of_trajectory, bearing_residual, build_observer_path, default_maneuvering_spec,
    grad_theta_bearing, grad_x_bearing, hess_theta_bearing, uniform_linear_theta, Segment,
    TrajectoryModel,
};
use botlab::harness::{
    coverage_study, default_scenario, run_montecarlo, EstimatorKind, IntervalKind,
    MonteCarloSummary,
};
use botlab::inference::{
    check_mean_preservation, compute_info_matrices, confidence_intervals, conservative_a2,
    conservative_intervals, max_expected_sq_shift, InfoMatrices, CONSERVATIVE_CONSTANT,
};
use botlab::noise::TrajectoryNoise;
use botlab::sim::{simulate, validate_scenario, Scenario};
use botlab::stats::ks_to_gaussian;

const GRID: usize = 400;

fn scenario_iso() -> Scenario {
    default_scenario()
}

fn scenario_aniso() -> Scenario {
    let mut s = default_scenario();
    // diag(36, 1) in units of 1e-4 km^2: 60 m x 10 m standard deviations
    s.traj_noise =
        TrajectoryNoise::Anisotropic { cov: Matrix2::new(36e-4, 0.0, 0.0, 1e-4) };
    s
}

fn scenario_ar1() -> Scenario {
    let mut s = default_scenario();
    s.traj_noise = TrajectoryNoise::Ar1 { phi: 0.6, sigma_eta: 0.008 };
    s
}

fn reference(s: &Scenario) -> InfoMatrices {
    compute_info_matrices(
        &s.model,
        &s.theta_star,
        &s.path,
        &s.traj_noise,
        &s.obs_noise,
        &gauss_hermite(12).unwrap(),
        GRID,
    )
    .unwrap()
}

static REF_ISO: Lazy<InfoMatrices> = Lazy::new(|| reference(&scenario_iso()));
static REF_ANISO: Lazy<InfoMatrices> = Lazy::new(|| reference(&scenario_aniso()));

static CAMPAIGN_LSE_ISO: Lazy<MonteCarloSummary> = Lazy::new(|| {
    run_montecarlo(
        &scenario_iso(),
        EstimatorKind::Lse,
        1000,
        2024,
        &REF_ISO,
        &OptimizerConfig::default(),
    )
    .unwrap()
});

static CAMPAIGN_MLE_ISO: Lazy<MonteCarloSummary> = Lazy::new(|| {
    // looser simplex tolerance: the likelihood surface is quadrature-smooth
    // and 1e-6 in parameter space is far below the Monte Carlo noise floor
    let cfg = OptimizerConfig { x_tol: 1e-6, ..OptimizerConfig::default() };
    run_montecarlo(&scenario_iso(), EstimatorKind::Mle, 200, 2024, &REF_ISO, &cfg).unwrap()
});

static CAMPAIGN_LSE_AR1: Lazy<MonteCarloSummary> = Lazy::new(|| {
    let s = scenario_ar1();
    let r = reference(&s);
    run_montecarlo(&s, EstimatorKind::Lse, 1000, 77, &r, &OptimizerConfig::default()).unwrap()
});

fn frobenius_rel(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn criterion_01_lse_gaussian_adequacy() {
    let c = &*CAMPAIGN_LSE_ISO;
    assert!(!c.flagged_invalid, "campaign invalid: {} non-converged", c.nonconverged);
    let rel = frobenius_rel(&c.cov, &REF_ISO.i_m_inv);
    assert!(rel < 0.20, "LSE covariance Frobenius error {rel:.3} vs I_M^-1");
    for (i, &ks) in c.ks.iter().enumerate() {
        assert!(ks < 0.05, "LSE coordinate {i} KS {ks:.4}");
    }
}

#[test]
fn criterion_02_mle_gaussian_adequacy_and_efficiency() {
    let mle = &*CAMPAIGN_MLE_ISO;
    let lse = &*CAMPAIGN_LSE_ISO;
    assert!(!mle.flagged_invalid, "campaign invalid: {} non-converged", mle.nonconverged);
    let rel = frobenius_rel(&mle.cov, &REF_ISO.i_inv);
    assert!(rel < 0.25, "MLE covariance Frobenius error {rel:.3} vs I^-1");
    for i in 0..4 {
        let (vm, vl) = (mle.cov[(i, i)], lse.cov[(i, i)]);
        assert!(vm <= vl * 1.15, "coordinate {i}: MLE var {vm:.4e} > 1.15 x LSE var {vl:.4e}");
    }
    // anisotropic noise widens the asymptotic efficiency gap; the trace
    // ratio of the two limiting covariances is deterministic
    let gap_iso = REF_ISO.i_m_inv.trace() / REF_ISO.i_inv.trace();
    let gap_aniso = REF_ANISO.i_m_inv.trace() / REF_ANISO.i_inv.trace();
    assert!(
        gap_aniso > gap_iso,
        "efficiency gap did not widen: iso {gap_iso:.4}, aniso {gap_aniso:.4}"
    );
}

#[test]
fn criterion_03_interval_coverage() {
    let s = scenario_iso();
    let c = &*CAMPAIGN_LSE_ISO;
    let ic1 = coverage_study(&s, c, 0.95, IntervalKind::Ic1, &REF_ISO, GRID).unwrap();
    let ic2 = coverage_study(&s, c, 0.95, IntervalKind::Ic2, &REF_ISO, GRID).unwrap();
    let ic3 = coverage_study(&s, c, 0.95, IntervalKind::Ic3, &REF_ISO, GRID).unwrap();
    assert!((0.93..=0.97).contains(&ic1), "IC1 coverage {ic1:.3}");
    assert!(ic2 >= 0.94, "IC2 coverage {ic2:.3}");
    assert!((0.93..=0.97).contains(&ic3), "IC3 coverage {ic3:.3}");
}

#[test]
fn criterion_04_conservative_bound() {
    let quad = gauss_hermite(12).unwrap();
    for s in [scenario_iso(), scenario_aniso(), scenario_ar1()] {
        assert!(validate_scenario(&s).pass());
        let a2 = conservative_a2(s.r_min, s.traj_noise.second_moment()).unwrap();
        let worst = max_expected_sq_shift(
            &s.model,
            &s.theta_star,
            &s.path,
            &s.traj_noise,
            &quad,
            200,
        )
        .unwrap();
        assert!(
            worst <= a2,
            "bound violated: max E(dPsi)^2 = {worst:.3e} > A^2 = {a2:.3e} ({:?})",
            s.traj_noise
        );
    }

    // width ratio IC2 / IC1 on the reference scenario, ~10.5 +/- 35%
    let s = scenario_iso();
    let a2 = conservative_a2(s.r_min, s.traj_noise.second_moment()).unwrap();
    let center = s.theta_star.clone();
    let ic1 = confidence_intervals(&center, &REF_ISO.i_m_inv, s.n, 0.95).unwrap();
    let ic2 =
        conservative_intervals(&center, &REF_ISO.i_r, a2, s.obs_noise.sigma, s.n, 0.95).unwrap();
    let ratio: f64 = ic2
        .widths
        .iter()
        .zip(&ic1.widths)
        .map(|(w2, w1)| w2 / w1)
        .sum::<f64>()
        / 4.0;
    assert!(
        (6.825..=14.175).contains(&ratio),
        "IC2/IC1 mean width ratio {ratio:.2} outside 10.5 +/- 35%"
    );

    assert!(
        (CONSERVATIVE_CONSTANT - 31.12).abs() <= 0.01,
        "pi^2 (1 + pi^(-2/3))^3 = {CONSERVATIVE_CONSTANT:.6}, outside 31.12 +/- 0.01"
    );
}

#[test]
fn criterion_05_isotropic_mean_preservation() {
    let quad = gauss_hermite(12).unwrap();
    let model = TrajectoryModel::uniform_linear(20.0);
    let path = build_observer_path(default_maneuvering_spec()).unwrap();
    let t_grid: Vec<f64> = (1..=40).map(|k| k as f64 / 40.0).collect();
    let mut rng = StdRng::seed_from_u64(555);
    for trial in 0..20 {
        let theta = uniform_linear_theta(
            rng.gen_range(2.0..4.0),
            rng.gen_range(3.0..5.0),
            rng.gen_range(0.1..0.3),
            rng.gen_range(-0.3..-0.05),
        );
        let noise = TrajectoryNoise::Isotropic { sigma: rng.gen_range(0.005..0.02) };
        let dev =
            check_mean_preservation(&model, &theta, &path, &noise, &quad, &t_grid).unwrap();
        assert!(dev < 1e-8, "trial {trial}: max bearing-mean shift {dev:.3e} rad");
    }
}

#[test]
fn criterion_06_degenerations_without_trajectory_noise() {
    let mut s = scenario_iso();
    s.traj_noise = TrajectoryNoise::None;
    let r = reference(&s);
    let sigma2 = s.obs_noise.sigma * s.obs_noise.sigma;
    let ir_inv = r.i_r.clone().try_inverse().unwrap();
    assert!(frobenius_rel(&r.i_m_inv, &(ir_inv * sigma2)) < 1e-8);
    assert!(frobenius_rel(&r.i, &(&r.i_r / sigma2)) < 1e-8);

    let data = simulate(&s, 123).unwrap();
    let cfg = OptimizerConfig::default();
    let quad = gauss_hermite(12).unwrap();
    let a = lse(&data, &s.model, &s.path, &cfg, None).unwrap();
    let b = mle(
        &data,
        &s.model,
        &s.path,
        &s.traj_noise,
        &s.obs_noise,
        &quad,
        &cfg,
        None,
    )
    .unwrap();
    let gap = (a.theta - b.theta).amax();
    assert!(gap < 1e-6, "MLE differs from LSE by {gap:.3e} without trajectory noise");
}

#[test]
fn criterion_07_observability_dichotomy() {
    let model = TrajectoryModel::uniform_linear(20.0);
    let theta = scenario_iso().theta_star;

    let mut straight = default_maneuvering_spec();
    straight.segments = vec![Segment { start_s: 0.0, end_s: 20.0, turn_rate_rad_s: 0.0 }];
    let path = build_observer_path(straight).unwrap();
    let ir = botlab::inference::info_ir(&model, &theta, &path, GRID).unwrap();
    let cond = {
        let sv = ir.singular_values();
        sv.max() / sv.min()
    };
    assert!(cond > 1e8, "straight-line observer cond(I_R) = {cond:.3e}");

    assert!(
        REF_ISO.cond_i_r < 1e8,
        "maneuvering observer cond(I_R) = {:.3e}",
        REF_ISO.cond_i_r
    );
}

#[test]
fn criterion_08_derivative_correctness() {
    let model = TrajectoryModel::uniform_linear(20.0);
    let path = build_observer_path(default_maneuvering_spec()).unwrap();
    let mut rng = StdRng::seed_from_u64(314);
    for _ in 0..100 {
        let theta = uniform_linear_theta(
            rng.gen_range(2.0..4.0),
            rng.gen_range(3.0..5.0),
            rng.gen_range(0.1..0.3),
            rng.gen_range(-0.3..-0.05),
        );
        let t = rng.gen_range(0.0..1.0);

        let grad = grad_theta_bearing(&model, &theta, t, &path).unwrap();
        let h = 1e-6;
        for i in 0..4 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let fd = bearing_residual(
                bearing_of_trajectory(&model, &tp, t, &path).unwrap(),
                bearing_of_trajectory(&model, &tm, t, &path).unwrap(),
            ) / (2.0 * h);
            let err = (grad[i] - fd).abs() / fd.abs().max(1e-4);
            assert!(err < 1e-6, "gradient entry {i}: relative error {err:.3e}");
        }

        let hess = hess_theta_bearing(&model, &theta, t, &path).unwrap();
        let h = 1e-5;
        for i in 0..4 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[i] += h;
            tm[i] -= h;
            let gp = grad_theta_bearing(&model, &tp, t, &path).unwrap();
            let gm = grad_theta_bearing(&model, &tm, t, &path).unwrap();
            for j in 0..4 {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                let err = (hess[(i, j)] - fd).abs() / fd.abs().max(1e-4);
                assert!(err < 1e-6, "hessian entry ({i},{j}): relative error {err:.3e}");
            }
        }

        let x = model.position(&theta, t).unwrap();
        let o = path.position(t);
        let g = grad_x_bearing(x, o, t).unwrap();
        let unit = g.norm() * (x - o).norm();
        assert!((unit - 1.0).abs() < 1e-12, "|grad_x Psi| r = {unit}");
    }
}

#[test]
fn criterion_09_dependent_noise_clt_and_lse_adequacy() {
    // closed form: gamma^2 = sigma_eta^2 / (1 - phi^2) * (1 + phi) / (1 - phi)
    let gamma2 = 4e-4;
    let noise = TrajectoryNoise::Ar1 { phi: 0.6, sigma_eta: 0.008 };
    let summary =
        clt_experiment(&Functional::Coordinate(0), &noise, 10_000, 2000, 99, Some(gamma2))
            .unwrap();
    let rel = (summary.emp_var / gamma2 - 1.0).abs();
    assert!(rel < 0.10, "empirical variance off by {rel:.3} from gamma^2 = 4e-4");
    let ks = summary.ks.unwrap();
    assert!(ks < 0.04, "KS vs N(0, gamma^2) = {ks:.4}");

    // LSE under AR(1) noise stays Gaussian-adequate: per-coordinate KS
    // against the fitted Gaussian of the normalized errors
    let c = &*CAMPAIGN_LSE_AR1;
    assert!(!c.flagged_invalid);
    for i in 0..4 {
        let coord: Vec<f64> = c.samples.iter().map(|s| s[i]).collect();
        let (mean, var) = botlab::stats::mean_var(&coord).unwrap();
        let ks = ks_to_gaussian(&coord, mean, var.sqrt()).unwrap();
        assert!(ks < 0.05, "AR(1) LSE coordinate {i} KS {ks:.4}");
    }
}

#[test]
fn criterion_10_campaign_determinism_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = botlab::harness::default_config();
    cfg.run.n = 300;
    let scenario_path = dir.path().join("scenario.toml");
    std::fs::write(&scenario_path, toml::to_string(&cfg).unwrap()).unwrap();

    let run = |threads: &str, out: &Path| {
        std::fs::create_dir_all(out).unwrap();
        let status = Command::new(env!("CARGO_BIN_EXE_botlab"))
            .env("RAYON_NUM_THREADS", threads)
            .args(["montecarlo", "--seed", "42", "--reps", "16", "--grid", "100"])
            .arg("--scenario")
            .arg(&scenario_path)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    };
    let serial = dir.path().join("serial");
    let parallel = dir.path().join("parallel");
    run("1", &serial);
    run("4", &parallel);

    for name in ["summary.csv", "samples.csv", "histograms.csv", "ecdfs.csv"] {
        let a = std::fs::read(serial.join(name)).unwrap();
        let b = std::fs::read(parallel.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between worker counts");
    }
}

// keep the reference-scale sanity used by several criteria honest: the
// normalized mean must be near zero relative to the marginal scales
#[test]
fn campaign_bias_is_negligible() {
    for c in [&*CAMPAIGN_LSE_ISO, &*CAMPAIGN_MLE_ISO] {
        let scale = DVector::from_iterator(4, (0..4).map(|i| REF_ISO.i_m_inv[(i, i)].sqrt()));
        for i in 0..4 {
            let z = c.mean[i].abs() / (scale[i] / (c.samples.len() as f64).sqrt());
            assert!(z < 5.0, "{} coordinate {i} bias z-score {z:.2}", c.estimator);
        }
    }
}
