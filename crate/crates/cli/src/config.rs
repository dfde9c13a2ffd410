//! Run configuration: a single JSON document (schema v1) mirroring the
//! simulation, initial-measure and verification inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use occufluct::measure::{PlacementRule, ThetaLaw};
use occufluct::stable::StableParams;
use occufluct::system::{SimOptions, SystemConfig};
use occufluct::testfn::TestFunction;

pub const SCHEMA_VERSION: u32 = 1;

/// Error carrying the JSON path of the offending field.
#[derive(Debug)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config field `{}`: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn missing(path: &str) -> ConfigError {
    ConfigError { path: path.to_string(), message: "missing field".to_string() }
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { path: path.to_string(), message: message.into() }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStable {
    alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Option<u32>,
    stable: Option<RawStable>,
    branching: Option<bool>,
    rate_v: Option<f64>,
    horizon_t: Option<f64>,
    tau: Option<f64>,
    step_delta: Option<f64>,
    theta: Option<ThetaLaw>,
    placement: Option<PlacementRule>,
    test_functions: Option<Vec<TestFunction>>,
    obs_times: Option<Vec<f64>>,
    replicas: Option<usize>,
    master_seed: Option<u64>,
    window_halfwidth: Option<i64>,
    window_scale: Option<f64>,
    far_miss_prob: Option<f64>,
    step_budget: Option<u64>,
    out_dir: Option<String>,
}

/// Fully validated run configuration; round-trips losslessly through JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub schema_version: u32,
    pub stable: StableSection,
    pub branching: bool,
    pub rate_v: f64,
    pub horizon_t: f64,
    pub tau: f64,
    pub step_delta: Option<f64>,
    pub theta: ThetaLaw,
    pub placement: PlacementRule,
    pub test_functions: Vec<TestFunction>,
    pub obs_times: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    pub window_halfwidth: Option<i64>,
    pub window_scale: f64,
    pub far_miss_prob: f64,
    pub step_budget: u64,
    pub out_dir: String,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct StableSection {
    pub alpha: f64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_str(text)
            .map_err(|e| invalid("<document>", e.to_string()))?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self, ConfigError> {
        let schema_version = raw.schema_version.ok_or_else(|| missing("schema_version"))?;
        if schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {schema_version}, expected {SCHEMA_VERSION}"),
            ));
        }
        let stable = raw.stable.ok_or_else(|| missing("stable"))?;
        let alpha = stable.alpha.ok_or_else(|| missing("stable.alpha"))?;
        StableParams::new(alpha).map_err(|e| invalid("stable.alpha", e.to_string()))?;
        let branching = raw.branching.unwrap_or(false);
        let rate_v = raw.rate_v.unwrap_or(0.0);
        if rate_v < 0.0 {
            return Err(invalid("rate_v", "must be nonnegative"));
        }
        if branching && rate_v == 0.0 {
            return Err(invalid("rate_v", "branching systems need a positive rate"));
        }
        let horizon_t = raw.horizon_t.ok_or_else(|| missing("horizon_t"))?;
        if !(horizon_t > 1.0) {
            return Err(invalid("horizon_t", "must exceed 1 (normings use log T)"));
        }
        let tau = raw.tau.unwrap_or(1.0);
        if !(tau > 0.0) {
            return Err(invalid("tau", "must be positive"));
        }
        if let Some(d) = raw.step_delta {
            if !(d > 0.0 && d <= horizon_t * tau) {
                return Err(invalid("step_delta", "must satisfy 0 < delta <= T tau"));
            }
        }
        let theta = raw.theta.ok_or_else(|| missing("theta"))?;
        theta.validate().map_err(|e| invalid("theta", e.to_string()))?;
        let placement = raw.placement.unwrap_or(PlacementRule::IidUniform);
        placement.validate().map_err(|e| invalid("placement", e.to_string()))?;
        let test_functions = raw.test_functions.ok_or_else(|| missing("test_functions"))?;
        if test_functions.is_empty() {
            return Err(invalid("test_functions", "need at least one test function"));
        }
        let obs_times = raw.obs_times.ok_or_else(|| missing("obs_times"))?;
        if obs_times.is_empty() {
            return Err(invalid("obs_times", "need at least one observation time"));
        }
        if obs_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("obs_times", "must be strictly increasing"));
        }
        if obs_times[0] < 0.0 || *obs_times.last().unwrap() > tau {
            return Err(invalid("obs_times", format!("must lie in [0, tau = {tau}]")));
        }
        let replicas = raw.replicas.ok_or_else(|| missing("replicas"))?;
        if replicas == 0 {
            return Err(invalid("replicas", "must be positive"));
        }
        let far_miss_prob = raw.far_miss_prob.unwrap_or(0.1);
        if !(0.0..=0.5).contains(&far_miss_prob) {
            return Err(invalid("far_miss_prob", "must lie in [0, 0.5]"));
        }
        let window_scale = raw.window_scale.unwrap_or(12.0);
        if !(window_scale > 0.0) {
            return Err(invalid("window_scale", "must be positive"));
        }
        Ok(Self {
            schema_version,
            stable: StableSection { alpha },
            branching,
            rate_v,
            horizon_t,
            tau,
            step_delta: raw.step_delta,
            theta,
            placement,
            test_functions,
            obs_times,
            replicas,
            master_seed: raw.master_seed.unwrap_or(0),
            window_halfwidth: raw.window_halfwidth,
            window_scale,
            far_miss_prob,
            step_budget: raw.step_budget.unwrap_or(2_000_000_000),
            out_dir: raw.out_dir.unwrap_or_else(|| "out".to_string()),
        })
    }

    pub fn system_config(&self) -> SystemConfig {
        SystemConfig {
            stable: StableParams::new(self.stable.alpha).expect("validated"),
            branching: self.branching,
            rate_v: self.rate_v,
            horizon_t: self.horizon_t,
            tau: self.tau,
            step_delta: self.step_delta,
        }
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            far_miss_prob: self.far_miss_prob,
            step_budget: self.step_budget,
            window_scale: self.window_scale,
            ..SimOptions::default()
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
