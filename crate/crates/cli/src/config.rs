//! Run configuration: one TOML file with a section per command, overridden
//! by flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crowdnav::data::{EpisodeSampling, LoadOptions, SegmentParams, Setting, SyntheticConfig};
use crowdnav::policy::{ObsConfig, SacConfig};
use crowdnav::sim::SimParams;
use serde::{Deserialize, Serialize};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "CROWDNAV_OUT_DIR";
pub const FALLBACK_OUT_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub sim: SimParams,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Recorded `frame_id ped_id x y` file; synthetic corridor data when unset.
    pub input: Option<PathBuf>,
    pub load: LoadOptions,
    pub synthetic: SyntheticConfig,
    pub segment: SegmentParams,
    pub sampling: EpisodeSampling,
    /// Evaluation episodes written to the test manifest.
    pub episodes: usize,
    /// Training episodes written to the training manifest.
    pub train_episodes: usize,
    pub setting: Setting,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            input: None,
            load: LoadOptions::default(),
            synthetic: SyntheticConfig::default(),
            segment: SegmentParams::default(),
            sampling: EpisodeSampling::default(),
            episodes: 50,
            train_episodes: 200,
            setting: Setting::Online,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub setting: Setting,
    pub sac: SacConfig,
    pub obs: ObsConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { setting: Setting::Online, sac: SacConfig::default(), obs: ObsConfig::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PlannerKind {
    Hicrowd,
    Mpc,
    Orca,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Hicrowd => "hicrowd",
            PlannerKind::Mpc => "mpc",
            PlannerKind::Orca => "orca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyMode {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub planner: PlannerKind,
    pub checkpoint: Option<PathBuf>,
    pub mode: PolicyMode,
    pub jobs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { planner: PlannerKind::Hicrowd, checkpoint: None, mode: PolicyMode::Deterministic, jobs: 1 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Parse { path: PathBuf, source: toml::de::Error },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Parse { path: path.into(), source })
    }

    /// Flag, then config file, then environment, then `./runs`.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .or_else(|| self.out_dir.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
    }
}

/// Keys whose defaults are stated in the paper; every other key is a
/// recorded design decision.
const PAPER_KEYS: &[&str] = &[
    "sim.dt",
    "sim.r_obs",
    "sim.collision_distance",
    "sim.timeout_factor",
    "sim.ped_max_speed",
    "sim.reward.lambda_d",
    "sim.reward.lambda_f",
    "sim.reward.sigma_v",
    "sim.reward.sigma_theta",
    "sim.grouping.eps_p",
    "sim.grouping.eps_theta",
    "sim.grouping.eps_v",
    "sim.mpc.horizon",
    "sim.mpc.beta",
    "sim.mpc.d_c",
    "sim.mpc.dt",
    "sim.mpc.r_obs",
    "train.sac.gamma",
    "train.sac.batch",
    "train.sac.lr_actor",
    "train.sac.lr_critic",
    "train.sac.lr_alpha",
    "train.sac.total_transitions",
    "train.obs.r_obs",
    "data.synthetic.group_size_min",
    "data.synthetic.group_size_max",
    "data.synthetic.mean_speed",
    "data.synthetic.speed_noise",
    "data.segment.min_peds",
];

/// Keys without a default value.
const OPTIONAL_KEYS: &[(&str, &str)] = &[
    ("out_dir", "unset: $CROWDNAV_OUT_DIR, else ./runs"),
    ("data.input", "unset: synthetic corridor data"),
    ("eval.checkpoint", "unset: required for the hicrowd planner"),
];

pub fn provenance(key: &str) -> &'static str {
    if PAPER_KEYS.contains(&key) {
        "paper"
    } else {
        "decision"
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Every config key with its default, sorted by key.
pub fn default_keys() -> Vec<(String, String)> {
    let v = toml::Value::try_from(RunConfig::default()).expect("default config serializes");
    let mut out = Vec::new();
    flatten("", &v, &mut out);
    out.extend(OPTIONAL_KEYS.iter().map(|(k, d)| (k.to_string(), format!("({d})"))));
    out.sort();
    out
}

pub fn key_table() -> String {
    let keys = default_keys();
    let w = keys.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (TOML; flags win over the file):\n");
    for (k, d) in keys {
        let _ = writeln!(s, "  {k:<w$}  [{:<8}]  {d}", provenance(&k));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_keys_exist() {
        let keys: Vec<String> = default_keys().into_iter().map(|(k, _)| k).collect();
        for k in PAPER_KEYS {
            assert!(keys.iter().any(|x| x == k), "{k}");
        }
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RunConfig = toml::from_str("seed = 4\n[sim.reward]\nlambda_f = 5.0\n").unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.sim.reward.lambda_f, 5.0);
        assert_eq!(c.sim.reward.lambda_d, 1.0);
        assert_eq!(c.train, TrainConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 4").is_err());
        assert!(toml::from_str::<RunConfig>("[sim.mpc]\nhorizon = 10\nhorizn = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[eval]\nplanner = \"sarl\"").is_err());
    }

    #[test]
    fn defaults_round_trip() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        assert_eq!(toml::from_str::<RunConfig>(&text).unwrap(), RunConfig::default());
    }

    #[test]
    fn table_lists_paper_values() {
        let t = key_table();
        assert!(t.contains("sim.mpc.horizon"));
        assert!(t.lines().any(|l| l.contains("train.sac.gamma") && l.contains("paper") && l.contains("0.99")));
        assert!(t.lines().any(|l| l.contains("sim.reward.goal_radius") && l.contains("decision")));
    }
}
