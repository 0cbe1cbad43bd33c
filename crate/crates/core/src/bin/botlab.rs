//! Command-line surface for the bearings-only tracking laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;

use botlab::dependence::{clt_experiment, write_clt_csv, Functional};
use botlab::estimate::{gauss_hermite, lse, mle, EstimateResult, OptimizerConfig};
use botlab::harness::montecarlo::{
    coverage_study, run_montecarlo, EstimatorKind, IntervalKind,
};
use botlab::harness::report::{
    write_ecdfs_csv, write_estimate_csv, write_histograms_csv, write_samples_csv,
    write_summary_csv,
};
use botlab::harness::{default_config, load_config, ScenarioConfig};
use botlab::inference::{
    compute_info_matrices, confidence_intervals, conservative_a2, conservative_intervals,
    write_intervals_csv, write_matrix_csv, InfoMatrices,
};
use botlab::sim::{simulate_with_latent, validate_scenario, write_dataset_csv, Scenario};
use botlab::Result;

#[derive(Parser)]
#[command(name = "botlab", about = "Bearings-only tracking estimation laboratory", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EstimatorArg {
    Lse,
    Mle,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Lse => EstimatorKind::Lse,
            EstimatorArg::Mle => EstimatorKind::Mle,
        }
    }
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Scenario config file; the built-in maneuvering scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one dataset and write it as dataset.csv.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Also record the latent noisy positions.
        #[arg(long)]
        latent: bool,
    },
    /// Simulate one dataset and estimate theta; writes estimate.csv.
    Estimate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Lse)]
        estimator: EstimatorArg,
    },
    /// Information matrices at theta*; writes one CSV per matrix.
    Fisher {
        #[command(flatten)]
        common: CommonArgs,
        /// Time-grid size for the Riemann averages.
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Estimate, then write IC_1/IC_2/IC_3 confidence intervals.
    Intervals {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Lse)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// Seeded Monte Carlo campaign with summaries and coverage rates.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value_t = EstimatorArg::Lse)]
        estimator: EstimatorArg,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
    /// LLN/CLT experiment on the scenario's trajectory noise.
    Cltcheck {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 2000)]
        reps: usize,
        /// Number of noise terms per replication.
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Scenario validity report plus the information matrices.
    Report {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
}

fn load_scenario(common: &CommonArgs) -> Result<(ScenarioConfig, Scenario)> {
    let config = match &common.scenario {
        Some(path) => load_config(path)?,
        None => default_config(),
    };
    let scenario = config.to_scenario()?;
    Ok((config, scenario))
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

fn estimate_once(
    scenario: &Scenario,
    estimator: EstimatorArg,
    seed: u64,
) -> Result<EstimateResult> {
    let data = botlab::sim::simulate(scenario, seed)?;
    let cfg = OptimizerConfig::default();
    match estimator {
        EstimatorArg::Lse => lse(&data, &scenario.model, &scenario.path, &cfg, None),
        EstimatorArg::Mle => {
            let quad = gauss_hermite(12)?;
            mle(
                &data,
                &scenario.model,
                &scenario.path,
                &scenario.traj_noise,
                &scenario.obs_noise,
                &quad,
                &cfg,
                None,
            )
        }
    }
}

fn write_matrices(out: &Path, bundle: &InfoMatrices) -> Result<()> {
    write_matrix_csv(&out.join("i_r.csv"), &bundle.i_r)?;
    write_matrix_csv(&out.join("i_psi.csv"), &bundle.i_psi)?;
    write_matrix_csv(&out.join("i_m_inv.csv"), &bundle.i_m_inv)?;
    write_matrix_csv(&out.join("i.csv"), &bundle.i)?;
    write_matrix_csv(&out.join("i_inv.csv"), &bundle.i_inv)?;
    Ok(())
}

fn info_bundle(scenario: &Scenario, theta: &DVector<f64>, grid: usize) -> Result<InfoMatrices> {
    let quad = gauss_hermite(12)?;
    compute_info_matrices(
        &scenario.model,
        theta,
        &scenario.path,
        &scenario.traj_noise,
        &scenario.obs_noise,
        &quad,
        grid,
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, latent } => {
            let (_, scenario) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let data = simulate_with_latent(&scenario, common.seed, latent)?;
            let path = common.out.join("dataset.csv");
            write_dataset_csv(&data, &path)?;
            println!("dataset,{}", path.display());
            println!("fingerprint,{}", data.fingerprint);
        }
        Command::Estimate { common, estimator } => {
            let (_, scenario) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let res = estimate_once(&scenario, estimator, common.seed)?;
            let path = common.out.join("estimate.csv");
            write_estimate_csv(&path, &res)?;
            let reported = scenario.model.report_order(&res.theta);
            println!("estimate,{}", path.display());
            for (i, v) in reported.iter().enumerate() {
                println!("theta_report_{i},{v:.16e}");
            }
            println!("criterion,{:.16e}", res.value);
            println!("converged,{}", res.converged);
        }
        Command::Fisher { common, grid } => {
            let (_, scenario) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let bundle = info_bundle(&scenario, &scenario.theta_star, grid)?;
            write_matrices(&common.out, &bundle)?;
            println!("cond_i_r,{:.6e}", bundle.cond_i_r);
            println!("cond_i,{:.6e}", bundle.cond_i);
            println!("grid,{grid}");
        }
        Command::Intervals { common, estimator, level, grid } => {
            let (_, scenario) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let res = estimate_once(&scenario, estimator, common.seed)?;
            let bundle = info_bundle(&scenario, &res.theta, grid)?;
            let a2 = conservative_a2(scenario.r_min, scenario.traj_noise.second_moment())?;
            let ic1 = confidence_intervals(&res.theta, &bundle.i_m_inv, scenario.n, level)?;
            let ic2 = conservative_intervals(
                &res.theta,
                &bundle.i_r,
                a2,
                scenario.obs_noise.sigma,
                scenario.n,
                level,
            )?;
            let ic3 = confidence_intervals(&res.theta, &bundle.i_inv, scenario.n, level)?;
            write_intervals_csv(&common.out.join("intervals_ic1.csv"), &ic1)?;
            write_intervals_csv(&common.out.join("intervals_ic2.csv"), &ic2)?;
            write_intervals_csv(&common.out.join("intervals_ic3.csv"), &ic3)?;
            println!("level,{level}");
            println!("a2,{a2:.16e}");
        }
        Command::Montecarlo { common, estimator, reps, level, grid } => {
            let (_, scenario) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let reference = info_bundle(&scenario, &scenario.theta_star, grid)?;
            let cfg = OptimizerConfig::default();
            let summary = run_montecarlo(
                &scenario,
                estimator.into(),
                reps,
                common.seed,
                &reference,
                &cfg,
            )?;
            let mut coverage = Vec::new();
            for (name, kind) in
                [("ic1", IntervalKind::Ic1), ("ic2", IntervalKind::Ic2), ("ic3", IntervalKind::Ic3)]
            {
                let rate = coverage_study(&scenario, &summary, level, kind, &reference, grid)?;
                coverage.push((name.to_string(), rate));
            }
            write_summary_csv(&common.out.join("summary.csv"), &summary, &coverage)?;
            write_samples_csv(&common.out.join("samples.csv"), &summary)?;
            write_histograms_csv(&common.out.join("histograms.csv"), &summary, 30)?;
            write_ecdfs_csv(&common.out.join("ecdfs.csv"), &summary)?;
            println!("reps,{}", summary.reps);
            println!("wall_clock_s,{:.3}", summary.wall_clock_s);
            println!("nonconverged,{}", summary.nonconverged);
            println!("flagged_invalid,{}", summary.flagged_invalid);
            for (name, rate) in &coverage {
                println!("coverage_{name},{rate:.4}");
            }
        }
        Command::Cltcheck { common, reps, n } => {
            let (config, _) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let noise = config.noise.trajectory.to_noise()?;
            let summary =
                clt_experiment(&Functional::Coordinate(0), &noise, n, reps, common.seed, None)?;
            write_clt_csv(&common.out.join("clt.csv"), &summary)?;
            println!("gamma2,{:.16e}", summary.gamma2);
            println!("emp_var,{:.16e}", summary.emp_var);
            println!(
                "ks,{}",
                summary.ks.map_or("nan".to_string(), |k| format!("{k:.6}"))
            );
        }
        Command::Report { common, grid } => {
            let (_, scenario) = load_scenario(&common)?;
            ensure_out(&common.out)?;
            let validity = validate_scenario(&scenario);
            let bundle = info_bundle(&scenario, &scenario.theta_star, grid)?;
            write_matrices(&common.out, &bundle)?;
            println!("min_range_km,{:.6}", validity.min_range);
            println!("bearing_span_rad,{:.6}", validity.bearing_span);
            println!("valid,{}", validity.pass());
            println!("observability_risk,{}", validity.observability_risk);
            println!("cond_i_r,{:.6e}", bundle.cond_i_r);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error,{e}");
            ExitCode::FAILURE
        }
    }
}
