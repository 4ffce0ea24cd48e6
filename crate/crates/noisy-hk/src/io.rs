//! Config loading, CSV/JSON emission and run manifests.
//!
//! Configs are TOML:
//!
//! ```toml
//! n = 20
//! epsilon = 0.2
//! horizon = 100000
//! master_seed = 42
//! detection_window = 1000   # optional
//!
//! [noise]
//! kind = "uniform"          # zero | uniform | truncated_gaussian | discrete
//! delta = 0.02
//!
//! [initial]
//! kind = "uniform_random"   # uniform_random | all_equal | explicit
//! ```
//!
//! All CSV files start with a header row. Floats are written in Rust's
//! shortest round-trip notation; missing values are empty fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use noisy_hk_core::dynamics::Trajectory;
use noisy_hk_core::walk::{lil_statistic, BoundaryHitLog, WalkRecord};
use noisy_hk_core::SimulationConfig;

use crate::ensemble::{Scenario, SweepRow};

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("simulation failed: {0}")]
    Simulation(#[from] noisy_hk_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// 1 for usage and config errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) | AppError::Usage(_) => 1,
            _ => 2,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        AppError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub fn parse_config(text: &str) -> Result<SimulationConfig, AppError> {
    let config: SimulationConfig =
        toml::from_str(text).map_err(|e| AppError::Config(e.to_string()))?;
    config
        .validate()
        .map_err(|e| AppError::Config(e.to_string()))?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<SimulationConfig, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn config_to_toml(config: &SimulationConfig) -> Result<String, AppError> {
    toml::to_string(config).map_err(|e| AppError::Config(e.to_string()))
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, AppError> {
    writer
        .into_inner()
        .map_err(|e| AppError::Csv(e.into_error().into()))
}

/// `t, d_v, n_clusters, min, max` plus `x1..xn` when states were recorded.
pub fn trajectory_csv(traj: &Trajectory) -> Result<Vec<u8>, AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let n = traj.initial.len();
    let mut header: Vec<String> = ["t", "d_v", "n_clusters", "min", "max"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if traj.states.is_some() {
        header.extend((1..=n).map(|i| format!("x{i}")));
    }
    w.write_record(&header)?;
    for t in 0..traj.diameters.len() {
        let mut row = vec![
            t.to_string(),
            fmt_f64(traj.diameters[t]),
            traj.cluster_counts[t].to_string(),
            fmt_f64(traj.minima[t]),
            fmt_f64(traj.maxima[t]),
        ];
        if let Some(states) = &traj.states {
            row.extend(states[t].iter().map(|&v| fmt_f64(v)));
        }
        w.write_record(&row)?;
    }
    finish(w)
}

pub const SWEEP_COLUMNS: [&str; 10] = [
    "ratio",
    "n",
    "epsilon",
    "replicates",
    "qc_freq",
    "mean_T",
    "median_T",
    "div_freq",
    "mean_first_div_t",
    "master_seed",
];

pub fn sweep_csv(rows: &[SweepRow]) -> Result<Vec<u8>, AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_f64(r.ratio),
            r.n.to_string(),
            fmt_f64(r.epsilon),
            r.replicates.to_string(),
            fmt_f64(r.qc_freq),
            fmt_opt(r.mean_t),
            fmt_opt(r.median_t),
            fmt_f64(r.div_freq),
            fmt_opt(r.mean_first_div_t),
            r.master_seed.to_string(),
        ])?;
    }
    finish(w)
}

/// `t, eta, S, s2, lil_stat`; `eta` is empty at `t = 0` and `lil_stat` is
/// empty where `log log s_t <= 0`.
pub fn walk_csv(record: &WalkRecord) -> Result<Vec<u8>, AppError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "eta", "S", "s2", "lil_stat"])?;
    for (t, &s) in record.partial_sums.iter().enumerate() {
        let eta = if t == 0 {
            String::new()
        } else {
            fmt_f64(record.eta[t - 1])
        };
        w.write_record([
            t.to_string(),
            eta,
            fmt_f64(s),
            fmt_f64(record.s2(t as u64)),
            fmt_opt(lil_statistic(record, t as u64).ok()),
        ])?;
    }
    finish(w)
}

/// `t, agent, boundary` for every clamp event, ordered by time then agent.
/// Agents are numbered from 1 as in the state columns.
pub fn boundary_events_csv(log: &BoundaryHitLog) -> Result<Vec<u8>, AppError> {
    let mut events: Vec<(u64, usize, &str)> = Vec::new();
    for (agent, hits) in log.lower.iter().enumerate() {
        events.extend(hits.iter().map(|&t| (t, agent + 1, "lower")));
    }
    for (agent, hits) in log.upper.iter().enumerate() {
        events.extend(hits.iter().map(|&t| (t, agent + 1, "upper")));
    }
    events.sort_unstable();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "agent", "boundary"])?;
    for (t, agent, side) in events {
        w.write_record([t.to_string(), agent.to_string(), side.to_string()])?;
    }
    finish(w)
}

/// The command a manifest replays, with every option that affects output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CommandSpec {
    Run { record_states: bool },
    Sweep { ratios: Vec<f64>, replicates: u64 },
    Walk { identity_check: bool },
    Reproduce { scenario: Scenario },
}

impl CommandSpec {
    pub fn stem(&self) -> &'static str {
        match self {
            CommandSpec::Run { .. } => "run",
            CommandSpec::Sweep { .. } => "sweep",
            CommandSpec::Walk { .. } => "walk",
            CommandSpec::Reproduce { scenario } => scenario.name(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub command: CommandSpec,
    /// Fully resolved config (seed and horizon overrides applied).
    pub config: SimulationConfig,
    pub master_seed: u64,
    pub started_at: String,
    pub finished_at: String,
    /// Output files, relative to the manifest's directory.
    pub outputs: Vec<String>,
}

pub fn load_manifest(path: &Path) -> Result<RunManifest, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    manifest
        .config
        .validate()
        .map_err(|e| AppError::Config(e.to_string()))?;
    Ok(manifest)
}

/// Files produced by one command, written together once all are ready.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn add(&mut self, name: impl Into<String>, contents: Vec<u8>) {
        self.files.push((name.into(), contents));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) -> Result<(), AppError> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.add(name, bytes);
        Ok(())
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, AppError> {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, contents)| {
                let path = dir.join(name);
                fs::write(&path, contents).map_err(|e| AppError::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use noisy_hk_core::{InitialCondition, NoiseModel};

    const EXAMPLE: &str = r#"
n = 20
epsilon = 0.2
horizon = 100
master_seed = 42

[noise]
kind = "uniform"
delta = 0.02

[initial]
kind = "uniform_random"
"#;

    #[test]
    fn parses_documented_example() {
        let c = parse_config(EXAMPLE).unwrap();
        assert_eq!(c.n, 20);
        assert_eq!(c.noise, NoiseModel::uniform(0.02));
        assert_eq!(c.initial, InitialCondition::UniformRandom);
        assert_eq!(c.detection_window, noisy_hk_core::DEFAULT_DETECTION_WINDOW);
        assert_eq!(parse_config(&config_to_toml(&c).unwrap()).unwrap(), c);
    }

    #[test]
    fn rejects_malformed_configs() {
        for bad in [
            "n = 3",
            &EXAMPLE.replace("epsilon = 0.2", "epsilon = 1.5"),
            &EXAMPLE.replace("uniform_random", "gaussian"),
            &EXAMPLE.replace("delta = 0.02", "delta = -0.02"),
            &EXAMPLE.replace("horizon = 100", "horizon = 0"),
            &EXAMPLE.replace("n = 20", "n = 20\nbogus = 1"),
        ] {
            assert!(matches!(parse_config(bad), Err(AppError::Config(_))), "{bad}");
        }
        let explicit = EXAMPLE.replace(
            "kind = \"uniform_random\"",
            "kind = \"explicit\"\nvalues = [0.1, 0.2]",
        );
        assert!(parse_config(&explicit).is_err());
    }

    #[test]
    fn other_noise_kinds_parse() {
        for (snippet, model) in [
            ("kind = \"zero\"", NoiseModel::Zero),
            (
                "kind = \"truncated_gaussian\"\nsigma = 0.05\nbound = 0.1",
                NoiseModel::TruncatedGaussian { sigma: 0.05, bound: 0.1 },
            ),
            (
                "kind = \"discrete\"\ndelta = 0.05\nmass = 0.5",
                NoiseModel::Discrete { delta: 0.05, mass: 0.5 },
            ),
        ] {
            let text = EXAMPLE.replace("kind = \"uniform\"\ndelta = 0.02", snippet);
            assert_eq!(parse_config(&text).unwrap().noise, model);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(AppError::Config("x".into()).exit_code(), 1);
        assert_eq!(AppError::Usage("x".into()).exit_code(), 1);
        assert_eq!(AppError::Simulation(noisy_hk_core::Error::EmptyState).exit_code(), 2);
    }
}
