//! Monte Carlo ensembles, critical-noise sweeps and the reference scenarios.
//!
//! Replicate `r` of an ensemble always uses the stream
//! `StreamSeed::replicate(master_seed, r)`; row `k` of a sweep uses
//! `StreamSeed::sweep_row(master_seed, k, r)`. Results are collected in
//! replicate order and aggregated by counting, so they do not depend on how
//! many workers ran them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use noisy_hk_core::dynamics::{RecordOptions, Simulation, Trajectory};
use noisy_hk_core::metrics::{
    absorption_violations, cluster_count, detect_quasi_consensus, diameter_of,
    divergence_detected, escape_time, ConsensusVerdict, DetectionRule,
};
use noisy_hk_core::{
    run_trajectory, ConfidenceThreshold, Error, InitialCondition, NoiseModel, SimulationConfig,
    StreamSeed,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// Outcome of one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateVerdict {
    pub replicate: u64,
    pub consensus: ConsensusVerdict,
    /// First step with `d > eps`.
    pub first_divergence: Option<u64>,
    /// First step leaving a merged state (`d(t-1) <= eps < d(t)`).
    pub escape: Option<u64>,
    /// Steps with `d > eps` after the first step with `d <= eps`.
    pub absorption_violations: usize,
    pub final_clusters: usize,
}

impl ReplicateVerdict {
    /// Counted as quasi-consensus: a validated verdict and no escape.
    pub fn reached_consensus(&self) -> bool {
        self.consensus.is_consensus() && self.escape.is_none()
    }

    /// Counted as divergence: the group left a merged state.
    pub fn diverged(&self) -> bool {
        self.escape.is_some()
    }
}

fn verdict_from_series(
    config: &SimulationConfig,
    replicate: u64,
    diameters: &[f64],
    final_clusters: usize,
) -> ReplicateVerdict {
    let eps = config.epsilon;
    let rule = DetectionRule::for_model(&config.noise, eps, config.detection_window);
    ReplicateVerdict {
        replicate,
        consensus: detect_quasi_consensus(diameters, eps, rule),
        first_divergence: divergence_detected(diameters, eps),
        escape: escape_time(diameters, eps),
        absorption_violations: absorption_violations(diameters, eps),
        final_clusters,
    }
}

pub fn verdict_from_trajectory(
    config: &SimulationConfig,
    replicate: u64,
    traj: &Trajectory,
) -> ReplicateVerdict {
    let final_clusters = *traj.cluster_counts.last().expect("trajectory has t = 0");
    verdict_from_series(config, replicate, &traj.diameters, final_clusters)
}

/// Runs one replicate keeping only the diameter series.
pub fn replicate_verdict(
    config: &SimulationConfig,
    replicate: u64,
    seed: StreamSeed,
) -> Result<ReplicateVerdict, Error> {
    let mut sim = Simulation::new(config, seed)?;
    let mut diameters = Vec::with_capacity(config.horizon as usize + 1);
    diameters.push(diameter_of(sim.state().values()));
    for _ in 0..config.horizon {
        diameters.push(diameter_of(sim.advance().state.values()));
    }
    let clusters = cluster_count(sim.state().values(), config.epsilon, &mut Vec::new());
    Ok(verdict_from_series(config, replicate, &diameters, clusters))
}

fn run_replicates<F>(
    config: &SimulationConfig,
    replicates: u64,
    execution: Execution,
    seed: F,
) -> Result<Vec<ReplicateVerdict>, Error>
where
    F: Fn(u64) -> StreamSeed + Sync,
{
    let one = |r| replicate_verdict(config, r, seed(r));
    match execution {
        Execution::Serial => (0..replicates).map(one).collect(),
        Execution::Parallel => (0..replicates).into_par_iter().map(one).collect(),
    }
}

pub fn run_ensemble(
    config: &SimulationConfig,
    replicates: u64,
    execution: Execution,
) -> Result<Vec<ReplicateVerdict>, Error> {
    config.validate()?;
    let master = config.master_seed;
    run_replicates(config, replicates, execution, |r| {
        StreamSeed::replicate(master, r)
    })
}

/// One sweep grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub n: usize,
    pub epsilon: f64,
    pub replicates: u64,
    pub qc_freq: f64,
    pub mean_t: Option<f64>,
    pub median_t: Option<f64>,
    pub div_freq: f64,
    pub mean_first_div_t: Option<f64>,
    pub master_seed: u64,
    pub qc_count: u64,
    pub div_count: u64,
}

fn mean(values: &[u64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<u64>() as f64 / values.len() as f64)
}

fn median(values: &mut [u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid] as f64
    } else {
        (values[mid - 1] + values[mid]) as f64 / 2.0
    })
}

pub fn summarize(
    ratio: f64,
    config: &SimulationConfig,
    verdicts: &[ReplicateVerdict],
) -> SweepRow {
    let replicates = verdicts.len() as u64;
    let mut qc_times: Vec<u64> = verdicts
        .iter()
        .filter(|v| v.reached_consensus())
        .filter_map(|v| v.consensus.time())
        .collect();
    let div_times: Vec<u64> = verdicts.iter().filter_map(|v| v.escape).collect();
    let freq = |count: usize| {
        if replicates == 0 {
            0.0
        } else {
            count as f64 / replicates as f64
        }
    };
    SweepRow {
        ratio,
        n: config.n,
        epsilon: config.epsilon.value(),
        replicates,
        qc_freq: freq(qc_times.len()),
        mean_t: mean(&qc_times),
        median_t: median(&mut qc_times),
        div_freq: freq(div_times.len()),
        mean_first_div_t: mean(&div_times),
        master_seed: config.master_seed,
        qc_count: qc_times.len() as u64,
        div_count: div_times.len() as u64,
    }
}

/// Noise for sweep ratio `delta / eps`; ratio 0 is the noise-free model.
pub fn sweep_noise(ratio: f64, eps: ConfidenceThreshold) -> NoiseModel {
    if ratio == 0.0 {
        NoiseModel::Zero
    } else {
        NoiseModel::uniform(ratio * eps.value())
    }
}

/// Runs `replicates` replicates of `Uniform(ratio * eps)` noise for every
/// ratio, keeping `n`, `eps` and the initial condition of `base`.
pub fn sweep_critical(
    ratios: &[f64],
    base: &SimulationConfig,
    replicates: u64,
    execution: Execution,
) -> Result<Vec<SweepRow>, Error> {
    base.validate()?;
    ratios
        .iter()
        .enumerate()
        .map(|(k, &ratio)| {
            if !(ratio.is_finite() && ratio >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "ratio",
                    value: ratio,
                });
            }
            let mut config = base.clone();
            config.noise = sweep_noise(ratio, base.epsilon);
            let master = base.master_seed;
            let verdicts = run_replicates(&config, replicates, execution, |r| {
                StreamSeed::sweep_row(master, k as u64, r)
            })?;
            Ok(summarize(ratio, &config, &verdicts))
        })
        .collect()
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// The reference scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Noise-free run, 20 agents, `eps = 0.2`, fragmenting into 3 clusters.
    Fig1,
    /// Same initials as `Fig1` with `Uniform(0.1 eps)` noise.
    Fig2,
    /// 10 agents at 0.5, `eps = 0.01`, `Uniform(0.6 eps)` noise.
    Fig3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Fig1, Scenario::Fig2, Scenario::Fig3];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Fig1 => "fig1",
            Scenario::Fig2 => "fig2",
            Scenario::Fig3 => "fig3",
        }
    }

    pub fn default_horizon(self) -> u64 {
        match self {
            Scenario::Fig1 => 200,
            Scenario::Fig2 => 20_000,
            Scenario::Fig3 => 1_000,
        }
    }

    pub fn config(self, seed: u64, horizon: u64) -> SimulationConfig {
        let eps = |v| ConfidenceThreshold::new(v).expect("valid threshold");
        let (n, epsilon, noise, initial) = match self {
            Scenario::Fig1 => (20, eps(0.2), NoiseModel::Zero, InitialCondition::UniformRandom),
            Scenario::Fig2 => (
                20,
                eps(0.2),
                NoiseModel::uniform(0.1 * 0.2),
                InitialCondition::UniformRandom,
            ),
            Scenario::Fig3 => (
                10,
                eps(0.01),
                NoiseModel::uniform(0.6 * 0.01),
                InitialCondition::AllEqual { value: 0.5 },
            ),
        };
        SimulationConfig {
            n,
            epsilon,
            noise,
            initial,
            horizon,
            master_seed: seed,
            detection_window: noisy_hk_core::DEFAULT_DETECTION_WINDOW,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownScenario(pub String);

impl fmt::Display for UnknownScenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = Scenario::ALL.iter().map(|s| s.name()).collect();
        write!(
            f,
            "unknown scenario `{}`; valid names: {}",
            self.0,
            names.join(", ")
        )
    }
}

impl std::error::Error for UnknownScenario {}

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

/// Number of seeds tried when looking for a 3-cluster noise-free outcome.
pub const FRAGMENTATION_SEARCH_LIMIT: u64 = 10_000;
pub const TARGET_CLUSTERS: usize = 3;

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub config: SimulationConfig,
    /// Seed actually used; for fig1/fig2 the first seed at or after the
    /// requested one whose noise-free run ends in 3 clusters.
    pub seed: u64,
    pub trajectory: Trajectory,
    pub verdict: ReplicateVerdict,
}

fn stream(seed: u64) -> StreamSeed {
    StreamSeed::replicate(seed, 0)
}

/// First seed `>= start` whose noise-free fig1 run ends in 3 clusters.
pub fn find_fragmenting_seed(start: u64) -> Result<u64, Error> {
    let horizon = Scenario::Fig1.default_horizon();
    for seed in start..start.saturating_add(FRAGMENTATION_SEARCH_LIMIT) {
        let config = Scenario::Fig1.config(seed, horizon);
        let traj = run_trajectory(&config, stream(seed), RecordOptions::default())?;
        if traj.cluster_counts.last() == Some(&TARGET_CLUSTERS) {
            return Ok(seed);
        }
    }
    Err(Error::InvalidConfig(format!(
        "no seed in [{start}, {start} + {FRAGMENTATION_SEARCH_LIMIT}) fragments into {TARGET_CLUSTERS} clusters"
    )))
}

pub fn reproduce_scenario(
    scenario: Scenario,
    seed: u64,
    horizon: Option<u64>,
) -> Result<ScenarioOutcome, Error> {
    let seed = match scenario {
        Scenario::Fig1 | Scenario::Fig2 => find_fragmenting_seed(seed)?,
        Scenario::Fig3 => seed,
    };
    let config = scenario.config(seed, horizon.unwrap_or(scenario.default_horizon()));
    let trajectory = run_trajectory(&config, stream(seed), RecordOptions { states: true })?;
    let verdict = verdict_from_trajectory(&config, 0, &trajectory);
    Ok(ScenarioOutcome {
        scenario,
        config,
        seed,
        trajectory,
        verdict,
    })
}
