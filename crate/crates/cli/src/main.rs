//! Command-line front end: regime classification, replica simulation,
//! statistical verification against the limit theory, finite-time oracle
//! checks, and exact sampling of the limit processes.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 unsupported regime,
//! 3 input inconsistency (bad flags, invalid config, fingerprint mismatch).

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use occufluct::error::Error as CoreError;
use occufluct::gaussian::{build_model, paths_to_csv, sample_xi, GaussianPathModel};
use occufluct::measure::{ThetaLaw, Window};
use occufluct::rng::replica_rng;
use occufluct::stable::StableParams;
use occufluct::system::{simulate_census, FluctuationRunner, FluctuationSample};
use occufluct::testfn::TestFunction;
use occufluct::theory::{
    classify_regime, increment_cov, moment_oracle, CovarianceModel, OracleOptions, RegimeLabel,
};
use occufluct::verify::{build_report, estimate_cov, McReport, ReportEntry};

use config::{ConfigError, RunConfig};

// ---------------------------------------------------------------------------
// Errors and exit codes
// ---------------------------------------------------------------------------

#[derive(Debug)]
enum AppError {
    Core(CoreError),
    Config(ConfigError),
    Io(std::io::Error),
    Json(serde_json::Error),
    Input(String),
    Runtime(String),
}

impl std::fmt::Display for AppError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AppError::Core(e) => write!(f, "{e}"),
            AppError::Config(e) => write!(f, "{e}"),
            AppError::Io(e) => write!(f, "{e}"),
            AppError::Json(e) => write!(f, "{e}"),
            AppError::Input(m) | AppError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        Self::Core(e)
    }
}
impl From<ConfigError> for AppError {
    fn from(e: ConfigError) -> Self {
        Self::Config(e)
    }
}
impl From<std::io::Error> for AppError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}
impl From<serde_json::Error> for AppError {
    fn from(e: serde_json::Error) -> Self {
        Self::Json(e)
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Core(CoreError::UnsupportedRegime) => 2,
            Self::Core(
                CoreError::InvalidParameter { .. }
                | CoreError::Inconsistent(_)
                | CoreError::MissingOffsets { .. },
            ) => 3,
            Self::Config(_) | Self::Json(_) | Self::Input(_) => 3,
            _ => 1,
        }
    }
}

type AppResult<T> = Result<T, AppError>;

// ---------------------------------------------------------------------------
// CLI definition
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "occufluct",
    version,
    about = "Occupation-time fluctuations of alpha-stable particle systems: \
             simulation and verification against their Gaussian limits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ThetaArgs {
    /// Count law: poisson, deterministic or categorical.
    #[arg(long, default_value = "poisson")]
    theta_kind: String,
    /// Mean of the Poisson count law.
    #[arg(long, default_value_t = 1.0)]
    theta_mean: f64,
    /// Value of the deterministic count law.
    #[arg(long, default_value_t = 1)]
    theta_k: u32,
    /// Comma-separated probabilities of the categorical count law.
    #[arg(long)]
    theta_probs: Option<String>,
}

impl ThetaArgs {
    fn build(&self) -> AppResult<ThetaLaw> {
        match self.theta_kind.as_str() {
            "poisson" => Ok(ThetaLaw::poisson(self.theta_mean)?),
            "deterministic" => Ok(ThetaLaw::deterministic(self.theta_k)),
            "categorical" => {
                let text = self.theta_probs.as_ref().ok_or_else(|| {
                    AppError::Input("categorical law needs --theta-probs".into())
                })?;
                Ok(ThetaLaw::categorical(parse_f64_list(text)?)?)
            }
            other => Err(AppError::Input(format!("unknown theta kind `{other}`"))),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the limit regime (label, Hurst parameter, norming, constant).
    Classify {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = false)]
        branching: bool,
        /// Branching rate V.
        #[arg(long = "V", visible_alias = "rate-v", default_value_t = 0.0)]
        rate_v: f64,
        #[command(flatten)]
        theta: ThetaArgs,
    },
    /// Run the replica simulation described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: logical cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory override.
        #[arg(long)]
        out: Option<String>,
        /// Replica count override.
        #[arg(long)]
        replicas: Option<usize>,
    },
    /// Estimate covariances from a replica CSV and compare to the limit.
    Verify {
        /// Directory holding replicas.csv / paths.csv and meta.json.
        #[arg(long, default_value = "out")]
        out: String,
        /// Optional explicit CSV path.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Optional explicit meta path.
        #[arg(long)]
        meta: Option<PathBuf>,
        /// Cross-check this config's fingerprint against the meta.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare the exact finite-time moment oracles against Monte Carlo.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        /// Single-ancestor replicas for the Monte Carlo side.
        #[arg(long, default_value_t = 100_000)]
        replicas: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
        /// Write the comparison table as JSON into this directory.
        #[arg(long)]
        out: Option<String>,
    },
    /// Sample limit-process paths exactly (Cholesky) for self-consistency runs.
    SampleLimits {
        /// Process: subfbm, theta_proc, xi or brownian.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 0.75)]
        hurst: f64,
        #[arg(long, default_value_t = 1.0)]
        e_theta: f64,
        #[arg(long, default_value_t = 1.0)]
        var_theta: f64,
        /// Variance rate of the Brownian kind.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Comma-separated time grid.
        #[arg(long, default_value = "0.25,0.5,0.75,1.0,1.25,1.5,1.75,2.0")]
        grid: String,
        #[arg(long, default_value_t = 200_000)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: String,
    },
}

fn parse_f64_list(text: &str) -> AppResult<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| AppError::Input(format!("bad number `{s}`: {e}")))
        })
        .collect()
}

fn build_pool(threads: Option<usize>) -> AppResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| AppError::Runtime(e.to_string()))
}

// ---------------------------------------------------------------------------
// Metadata sidecars
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct SimulationMeta {
    schema_version: u32,
    kind: String,
    config_fingerprint: String,
    config: RunConfig,
    window: Window,
    step_delta: f64,
    norming: f64,
    regime: serde_json::Value,
    centering: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LimitMeta {
    schema_version: u32,
    kind: String,
    model_kind: String,
    hurst: Option<f64>,
    e_theta: Option<f64>,
    var_theta: Option<f64>,
    scale: Option<f64>,
    grid: Vec<f64>,
    paths: usize,
    seed: u64,
    fingerprint: String,
}

fn write_out(path: &Path, bytes: &str) -> AppResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------------

fn cmd_classify(alpha: f64, branching: bool, rate_v: f64, theta: &ThetaArgs) -> AppResult<ExitCode> {
    let law = theta.build()?;
    let regime = classify_regime(alpha, branching, &law, rate_v)?;
    println!("{}", serde_json::to_string_pretty(&regime.export_json())?);
    if regime.label == RegimeLabel::BUnsupported {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn make_runner(cfg: &RunConfig) -> AppResult<FluctuationRunner> {
    Ok(FluctuationRunner::new(
        cfg.system_config(),
        cfg.theta.clone(),
        cfg.placement.clone(),
        cfg.test_functions.clone(),
        cfg.obs_times.clone(),
        cfg.sim_options(),
        cfg.master_seed,
        cfg.window_halfwidth.map(Window::symmetric),
    )?)
}

fn replicas_csv(raws: &[Vec<Vec<f64>>]) -> String {
    let mut s = String::from("replica,t_index,phi_index,value\n");
    for (r, raw) in raws.iter().enumerate() {
        for (i, row) in raw.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                s.push_str(&format!("{r},{i},{j},{v}\n"));
            }
        }
    }
    s
}

fn cmd_simulate(
    config_path: &Path,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<String>,
    replicas: Option<usize>,
) -> AppResult<ExitCode> {
    let mut cfg = RunConfig::from_json(&fs::read_to_string(config_path)?)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(r) = replicas {
        cfg.replicas = r;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    let pool = build_pool(threads)?;
    let runner = make_runner(&cfg)?;

    let raws: Result<Vec<Vec<Vec<f64>>>, CoreError> = pool.install(|| {
        (0..cfg.replicas)
            .into_par_iter()
            .map(|i| runner.run_replica_raw(i as u64))
            .collect()
    });
    let raws = raws?;

    let out_dir = PathBuf::from(&cfg.out_dir);
    write_out(&out_dir.join("replicas.csv"), &replicas_csv(&raws))?;
    let meta = SimulationMeta {
        schema_version: config::SCHEMA_VERSION,
        kind: "simulation".into(),
        config_fingerprint: cfg.fingerprint(),
        config: cfg.clone(),
        window: runner.window(),
        step_delta: runner.config().delta(),
        norming: runner.norming(),
        regime: runner.regime().export_json(),
        centering: runner.centering().to_vec(),
    };
    write_out(&out_dir.join("meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    eprintln!(
        "simulated {} replicas on window [{}, {}) -> {}",
        cfg.replicas,
        runner.window().lo,
        runner.window().hi,
        out_dir.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn parse_replica_csv(text: &str, n_times: usize, n_phis: usize) -> AppResult<Vec<Vec<Vec<f64>>>> {
    let mut raws: Vec<Vec<Vec<f64>>> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let mut next = |name: &str| -> AppResult<&str> {
            parts
                .next()
                .ok_or_else(|| AppError::Input(format!("line {lineno}: missing {name}")))
        };
        let r: usize = next("replica")?.parse().map_err(bad_line(lineno))?;
        let i: usize = next("t_index")?.parse().map_err(bad_line(lineno))?;
        let j: usize = next("phi_index")?.parse().map_err(bad_line(lineno))?;
        let v: f64 = next("value")?.parse().map_err(bad_line(lineno))?;
        if i >= n_times || j >= n_phis {
            return Err(AppError::Input(format!(
                "line {lineno}: index ({i}, {j}) outside configured shape"
            )));
        }
        if r >= raws.len() {
            raws.resize_with(r + 1, || vec![vec![f64::NAN; n_phis]; n_times]);
        }
        raws[r][i][j] = v;
    }
    if raws.iter().flatten().flatten().any(|v| v.is_nan()) {
        return Err(AppError::Input("replica CSV has missing entries".into()));
    }
    Ok(raws)
}

fn bad_line<E: std::fmt::Display>(lineno: usize) -> impl Fn(E) -> AppError {
    move |e| AppError::Input(format!("line {lineno}: {e}"))
}

fn lag_decay_csv<K: Fn(f64, f64) -> f64>(kernel: K) -> String {
    let mut s = String::from("lag,abs_increment_cov\n");
    for k in 0..10 {
        let tau = (1u64 << k) as f64;
        let c = increment_cov(&kernel, 0.0, tau).abs();
        s.push_str(&format!("{tau},{c}\n"));
    }
    s
}

fn cmd_verify(
    out: &str,
    csv: Option<PathBuf>,
    meta: Option<PathBuf>,
    config: Option<PathBuf>,
    threads: Option<usize>,
) -> AppResult<ExitCode> {
    let _pool = build_pool(threads)?;
    let out_dir = PathBuf::from(out);
    let meta_path = meta.unwrap_or_else(|| out_dir.join("meta.json"));
    let meta_text = fs::read_to_string(&meta_path)?;
    let generic: serde_json::Value = serde_json::from_str(&meta_text)?;
    match generic.get("kind").and_then(|k| k.as_str()) {
        Some("simulation") => {
            let meta: SimulationMeta = serde_json::from_str(&meta_text)?;
            verify_simulation(&out_dir, csv, config, meta)
        }
        Some("gaussian_limit") => {
            let meta: LimitMeta = serde_json::from_str(&meta_text)?;
            verify_gaussian_limit(&out_dir, csv, meta)
        }
        other => Err(AppError::Input(format!(
            "meta kind {other:?} is not verifiable"
        ))),
    }
}

fn verify_simulation(
    out_dir: &Path,
    csv: Option<PathBuf>,
    config: Option<PathBuf>,
    meta: SimulationMeta,
) -> AppResult<ExitCode> {
    // Fingerprint consistency: the stored config must hash to the stored
    // fingerprint, and any externally supplied config must match it.
    if meta.config.fingerprint() != meta.config_fingerprint {
        return Err(AppError::Input(
            "meta.json fingerprint does not match its embedded config".into(),
        ));
    }
    if let Some(path) = config {
        let external = RunConfig::from_json(&fs::read_to_string(path)?)?;
        if external.fingerprint() != meta.config_fingerprint {
            return Err(AppError::Input(
                "config fingerprint mismatch against meta.json".into(),
            ));
        }
    }
    let cfg = &meta.config;
    let runner = make_runner(cfg)?;
    if runner.window() != meta.window {
        return Err(AppError::Input(
            "window in meta.json does not match the config's window rule".into(),
        ));
    }

    let csv_path = csv.unwrap_or_else(|| out_dir.join("replicas.csv"));
    let text = fs::read_to_string(&csv_path)?;
    let raws = parse_replica_csv(&text, cfg.obs_times.len(), cfg.test_functions.len())?;
    if raws.len() != cfg.replicas {
        return Err(AppError::Input(format!(
            "CSV carries {} replicas, config says {}",
            raws.len(),
            cfg.replicas
        )));
    }
    let samples: Vec<FluctuationSample> =
        raws.iter().map(|raw| runner.normalize(raw)).collect();
    let report = build_report(&samples, runner.regime(), &cfg.theta, &meta.config_fingerprint)?;
    write_report_files(out_dir, &report, |s, t| {
        runner
            .regime()
            .scalar_limit_cov(s, t)
            .unwrap_or_else(|| if s.min(t) > 0.0 { s.min(t) } else { 0.0 })
    })?;
    summarize_report(&report);
    Ok(ExitCode::SUCCESS)
}

fn verify_gaussian_limit(
    out_dir: &Path,
    csv: Option<PathBuf>,
    meta: LimitMeta,
) -> AppResult<ExitCode> {
    let model = limit_model(&meta)?;
    let csv_path = csv.unwrap_or_else(|| out_dir.join("paths.csv"));
    let text = fs::read_to_string(&csv_path)?;
    let n_times = meta.grid.len();
    let mut paths: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate().skip(1) {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_times + 1 {
            return Err(AppError::Input(format!(
                "line {lineno}: expected {} columns",
                n_times + 1
            )));
        }
        let row: Result<Vec<f64>, _> = cells[1..].iter().map(|c| c.parse::<f64>()).collect();
        paths.push(row.map_err(bad_line(lineno))?);
    }
    if paths.len() != meta.paths {
        return Err(AppError::Input(format!(
            "CSV carries {} paths, meta says {}",
            paths.len(),
            meta.paths
        )));
    }

    // Wrap the paths as samples with a dummy test function.
    let phi = TestFunction::gaussian_unit_mass(0.0, 1.0);
    let samples: Vec<FluctuationSample> = paths
        .iter()
        .map(|p| FluctuationSample {
            times: meta.grid.clone(),
            test_functions: vec![phi],
            values: p.iter().map(|&v| vec![v]).collect(),
            norming: 1.0,
        })
        .collect();
    let est = estimate_cov(&samples)?;
    let entries: Vec<ReportEntry> = est
        .pairs
        .iter()
        .map(|p| {
            let (t_i, t_j) = (p.col_a, p.col_b);
            let theory = model.cov().eval(meta.grid[t_i], meta.grid[t_j]);
            let z = if p.se > 0.0 { (p.cov - theory) / p.se } else { 0.0 };
            ReportEntry {
                t_i,
                t_j,
                phi_k: 0,
                phi_l: 0,
                estimate: p.cov,
                se: p.se,
                theory,
                z,
                within_band: z.abs() <= 3.0,
            }
        })
        .collect();
    let all_within = entries.iter().all(|e| e.within_band);
    let report = McReport {
        config_fingerprint: meta.fingerprint.clone(),
        replicas: paths.len(),
        regime_label: format!("limit:{}", meta.model_kind),
        entries,
        marginals: Vec::new(),
        all_within_band: all_within,
        escalation_recommended: !all_within,
    };
    let kernel = model.cov().clone();
    write_report_files(out_dir, &report, move |s, t| kernel.eval(s, t))?;
    summarize_report(&report);
    Ok(ExitCode::SUCCESS)
}

fn limit_model(meta: &LimitMeta) -> AppResult<GaussianPathModel> {
    let cov = match meta.model_kind.as_str() {
        "subfbm" => CovarianceModel::SubFbm { h: meta.hurst.unwrap_or(0.75) },
        "theta_proc" => CovarianceModel::ThetaProc { h: meta.hurst.unwrap_or(0.75) },
        "xi" => CovarianceModel::Xi {
            e_theta: meta.e_theta.unwrap_or(1.0),
            var_theta: meta.var_theta.unwrap_or(1.0),
            h: meta.hurst.unwrap_or(0.75),
        },
        "brownian" => CovarianceModel::Brownian { scale: meta.scale.unwrap_or(1.0) },
        other => return Err(AppError::Input(format!("unknown model kind `{other}`"))),
    };
    Ok(build_model(cov, &meta.grid)?)
}

fn write_report_files<K: Fn(f64, f64) -> f64>(
    out_dir: &Path,
    report: &McReport,
    kernel: K,
) -> AppResult<()> {
    write_out(&out_dir.join("report.json"), &serde_json::to_string_pretty(report)?)?;
    write_out(&out_dir.join("plots/theory_vs_empirical.csv"), &report.to_csv())?;
    write_out(&out_dir.join("plots/lag_decay.csv"), &lag_decay_csv(kernel))?;
    Ok(())
}

fn summarize_report(report: &McReport) {
    let n_ok = report.entries.iter().filter(|e| e.within_band).count();
    eprintln!(
        "report: {}/{} covariance entries within the 3-SE band{}",
        n_ok,
        report.entries.len(),
        if report.escalation_recommended {
            " (escalation to a larger horizon recommended)"
        } else {
            ""
        }
    );
}

fn cmd_oracle_check(
    config_path: &Path,
    replicas: usize,
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<String>,
) -> AppResult<ExitCode> {
    let cfg = RunConfig::from_json(&fs::read_to_string(config_path)?)?;
    let pool = build_pool(threads)?;
    let params = StableParams::new(cfg.stable.alpha)?;
    let system = cfg.system_config();
    let rate = system.effective_rate();
    let phi = cfg.test_functions[0];
    let master = seed.unwrap_or(cfg.master_seed);
    let opts = cfg.sim_options();

    #[derive(Serialize)]
    struct OracleRow {
        r: f64,
        r_prime: f64,
        oracle: f64,
        monte_carlo: f64,
        se: f64,
        z: f64,
    }

    let mut rows = Vec::new();
    for (r, rp) in [(1.0, 1.0), (1.0, 2.0)] {
        let oracle = moment_oracle(
            params,
            system.branching,
            rate,
            0.0,
            r,
            rp,
            &phi,
            &phi,
            &OracleOptions::default(),
        )?;
        let times: Vec<f64> = if r == rp { vec![r] } else { vec![r, rp] };
        let census_cfg = occufluct::system::SystemConfig {
            tau: *times.last().unwrap(),
            horizon_t: 1.0,
            ..system
        };
        let products: Result<Vec<f64>, CoreError> = pool.install(|| {
            (0..replicas)
                .into_par_iter()
                .map(|i| {
                    let mut rng = replica_rng(master, i as u64);
                    let w = simulate_census(&census_cfg, 0.0, &times, &[phi], &mut rng, &opts)?;
                    Ok(if r == rp { w[0][0] * w[0][0] } else { w[0][0] * w[1][0] })
                })
                .collect()
        });
        let products = products?;
        let n = products.len() as f64;
        let mean = products.iter().sum::<f64>() / n;
        let var =
            products.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        let z = if se > 0.0 { (mean - oracle) / se } else { 0.0 };
        rows.push(OracleRow { r, r_prime: rp, oracle, monte_carlo: mean, se, z });
    }

    println!(
        "{:>5} {:>7} {:>14} {:>14} {:>12} {:>8}",
        "r", "r'", "oracle", "monte_carlo", "se", "z"
    );
    for row in &rows {
        println!(
            "{:>5} {:>7} {:>14.8} {:>14.8} {:>12.3e} {:>8.2}",
            row.r, row.r_prime, row.oracle, row.monte_carlo, row.se, row.z
        );
    }
    if let Some(dir) = out {
        write_out(
            &PathBuf::from(dir).join("oracle_check.json"),
            &serde_json::to_string_pretty(&rows)?,
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sample_limits(
    kind: &str,
    hurst: f64,
    e_theta: f64,
    var_theta: f64,
    scale: f64,
    grid_text: &str,
    n_paths: usize,
    seed: u64,
    out: &str,
) -> AppResult<ExitCode> {
    let grid = parse_f64_list(grid_text)?;
    let mut rng = replica_rng(seed, 0);
    let paths = match kind {
        "xi" => sample_xi(e_theta, var_theta, hurst, &grid, n_paths, &mut rng)?,
        _ => {
            let cov = match kind {
                "subfbm" => CovarianceModel::SubFbm { h: hurst },
                "theta_proc" => CovarianceModel::ThetaProc { h: hurst },
                "brownian" => CovarianceModel::Brownian { scale },
                other => {
                    return Err(AppError::Input(format!("unknown model kind `{other}`")))
                }
            };
            build_model(cov, &grid)?.sample_paths(n_paths, &mut rng)
        }
    };
    let meta = LimitMeta {
        schema_version: config::SCHEMA_VERSION,
        kind: "gaussian_limit".into(),
        model_kind: kind.to_string(),
        hurst: Some(hurst),
        e_theta: Some(e_theta),
        var_theta: Some(var_theta),
        scale: Some(scale),
        grid: grid.clone(),
        paths: n_paths,
        seed,
        fingerprint: {
            use sha2::{Digest, Sha256};
            let key = format!("{kind}|{hurst}|{e_theta}|{var_theta}|{scale}|{grid:?}|{seed}");
            let mut h = Sha256::new();
            h.update(key.as_bytes());
            h.finalize().iter().map(|b| format!("{b:02x}")).collect()
        },
    };
    let out_dir = PathBuf::from(out);
    write_out(&out_dir.join("paths.csv"), &paths_to_csv(&grid, &paths))?;
    write_out(&out_dir.join("meta.json"), &serde_json::to_string_pretty(&meta)?)?;
    eprintln!("sampled {n_paths} paths of {kind} -> {}", out_dir.display());
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> AppResult<ExitCode> {
    match cli.command {
        Command::Classify { alpha, branching, rate_v, theta } => {
            cmd_classify(alpha, branching, rate_v, &theta)
        }
        Command::Simulate { config, seed, threads, out, replicas } => {
            cmd_simulate(&config, seed, threads, out, replicas)
        }
        Command::Verify { out, csv, meta, config, threads } => {
            cmd_verify(&out, csv, meta, config, threads)
        }
        Command::OracleCheck { config, replicas, seed, threads, out } => {
            cmd_oracle_check(&config, replicas, seed, threads, out)
        }
        Command::SampleLimits {
            kind,
            hurst,
            e_theta,
            var_theta,
            scale,
            grid,
            paths,
            seed,
            out,
        } => cmd_sample_limits(
            &kind, hurst, e_theta, var_theta, scale, &grid, paths, seed, &out,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
