//! Command implementations shared by the binary and the tests.

use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;

use noisy_hk_core::dynamics::RecordOptions;
use noisy_hk_core::walk::{run_unclamped, walk_variance_bounds, WalkRecordOptions};
use noisy_hk_core::{
    boundary_recurrence, certify_theorem2, certify_theorem3, run_trajectory, NoiseModel, Refusal,
    SimulationConfig, StreamSeed, Theorem2Certificate, Theorem3Certificate,
};

use crate::ensemble::{
    reproduce_scenario, sweep_critical, verdict_from_trajectory, Execution, ReplicateVerdict,
    Scenario, SweepRow,
};
use crate::io::{
    boundary_events_csv, load_manifest, sweep_csv, trajectory_csv, walk_csv, AppError,
    CommandSpec, OutputSet, RunManifest,
};

pub const DEFAULT_REPLICATES: u64 = 100;
pub const DEFAULT_RATIOS: [f64; 7] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8];

/// Result of a command: the files written and a JSON summary for stdout.
#[derive(Debug)]
pub struct CommandReport {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    verdict: &'a ReplicateVerdict,
    clamp_events: usize,
}

#[derive(Debug, Serialize)]
struct WalkSummary {
    horizon: u64,
    synchronized_steps: u64,
    max_closed_form_residual: Option<f64>,
    partial_sum_sign_changes: u64,
    final_partial_sum: f64,
    s2_analytic: f64,
    s2_bracket: Option<(f64, f64)>,
    lower_hits: Vec<usize>,
    upper_hits: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct ScenarioSummary<'a> {
    scenario: Scenario,
    seed: u64,
    verdict: &'a ReplicateVerdict,
    final_clusters: usize,
    cluster_means: Vec<f64>,
}

/// Executes `command` with `config` and writes its outputs plus a manifest
/// into `out_dir`. Output bytes depend only on `(command, config)`.
pub fn execute(
    command: &CommandSpec,
    config: &SimulationConfig,
    out_dir: &Path,
    execution: Execution,
) -> Result<CommandReport, AppError> {
    let started_at = now();
    let stem = command.stem();
    let seed = StreamSeed::replicate(config.master_seed, 0);
    let mut out = OutputSet::default();
    let mut config = config.clone();
    let summary = match command {
        CommandSpec::Run { record_states } => {
            let traj = run_trajectory(&config, seed, RecordOptions { states: *record_states })?;
            let verdict = verdict_from_trajectory(&config, 0, &traj);
            out.add(format!("{stem}_trajectory.csv"), trajectory_csv(&traj)?);
            let summary = RunSummary {
                verdict: &verdict,
                clamp_events: traj.clamp_events.len(),
            };
            out.add_json(format!("{stem}_summary.json"), &summary)?;
            serde_json::to_value(&summary)?
        }
        CommandSpec::Sweep { ratios, replicates } => {
            let rows = sweep_critical(ratios, &config, *replicates, execution)?;
            out.add(format!("{stem}.csv"), sweep_csv(&rows)?);
            serde_json::to_value::<&[SweepRow]>(&rows)?
        }
        CommandSpec::Walk { identity_check } => {
            let run = run_unclamped(&config, seed, WalkRecordOptions::default())?;
            let log = boundary_recurrence(&config, seed, config.horizon)?;
            out.add(format!("{stem}.csv"), walk_csv(&run.record)?);
            out.add(format!("{stem}_events.csv"), boundary_events_csv(&log)?);
            let summary = WalkSummary {
                horizon: config.horizon,
                synchronized_steps: run.synchronized_steps,
                max_closed_form_residual: identity_check.then_some(run.max_closed_form_residual),
                partial_sum_sign_changes: log.partial_sum_sign_changes,
                final_partial_sum: *run.record.partial_sums.last().expect("S_0 recorded"),
                s2_analytic: run.record.s2(config.horizon),
                s2_bracket: walk_variance_bounds(&config.noise, config.n, config.horizon).ok(),
                lower_hits: log.lower.iter().map(Vec::len).collect(),
                upper_hits: log.upper.iter().map(Vec::len).collect(),
            };
            out.add_json(format!("{stem}_summary.json"), &summary)?;
            serde_json::to_value(&summary)?
        }
        CommandSpec::Reproduce { scenario } => {
            let outcome =
                reproduce_scenario(*scenario, config.master_seed, Some(config.horizon))?;
            let partition = noisy_hk_core::clusters(&outcome.trajectory.final_state, outcome.config.epsilon);
            out.add(format!("{stem}_trajectory.csv"), trajectory_csv(&outcome.trajectory)?);
            let summary = ScenarioSummary {
                scenario: *scenario,
                seed: outcome.seed,
                verdict: &outcome.verdict,
                final_clusters: partition.len(),
                cluster_means: partition.groups.iter().map(|g| g.mean).collect(),
            };
            out.add_json(format!("{stem}_summary.json"), &summary)?;
            let value = serde_json::to_value(&summary)?;
            config = outcome.config;
            value
        }
    };
    let manifest_name = format!("{stem}_manifest.json");
    let mut outputs = out.names();
    let manifest = RunManifest {
        software_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.clone(),
        master_seed: config.master_seed,
        config,
        started_at,
        finished_at: now(),
        outputs: outputs.clone(),
    };
    out.add_json(manifest_name.clone(), &manifest)?;
    outputs.push(manifest_name);
    let files = out.write_all(out_dir)?;
    Ok(CommandReport { files, summary })
}

/// Re-executes the command recorded in a manifest.
pub fn replay(
    manifest_path: &Path,
    out_dir: &Path,
    execution: Execution,
) -> Result<CommandReport, AppError> {
    let manifest = load_manifest(manifest_path)?;
    execute(&manifest.command, &manifest.config, out_dir, execution)
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum CertificateOutcome<T> {
    Certified(T),
    Refused { refusal: Refusal, explanation: String },
}

impl<T> From<Result<T, Refusal>> for CertificateOutcome<T> {
    fn from(r: Result<T, Refusal>) -> Self {
        match r {
            Ok(c) => CertificateOutcome::Certified(c),
            Err(refusal) => CertificateOutcome::Refused {
                explanation: refusal.to_string(),
                refusal,
            },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CertificateReport {
    pub epsilon: f64,
    pub noise: NoiseModel,
    pub theorem2: CertificateOutcome<Theorem2Certificate>,
    pub theorem3: CertificateOutcome<Theorem3Certificate>,
    pub warnings: Vec<String>,
}

/// Largest threshold for which the divergence result is stated directly.
pub const DIVERGENCE_EPS_LIMIT: f64 = 1.0 / 3.0;

pub fn divergence_warning(eps: f64) -> String {
    format!(
        "epsilon = {eps} exceeds 1/3, outside the range where divergence under super-critical noise is proven"
    )
}

pub fn certify(config: &SimulationConfig) -> CertificateReport {
    let eps = config.epsilon;
    let theorem3 = certify_theorem3(&config.noise, eps);
    let mut warnings = Vec::new();
    if theorem3.is_ok() && eps.value() > DIVERGENCE_EPS_LIMIT {
        warnings.push(divergence_warning(eps.value()));
    }
    CertificateReport {
        epsilon: eps.value(),
        noise: config.noise,
        theorem2: certify_theorem2(&config.noise, eps).into(),
        theorem3: theorem3.into(),
        warnings,
    }
}
