//! Opinion diameter, cluster structure and finite-horizon consensus verdicts.
//!
//! `d(t) = max_i x_i(t) - min_i x_i(t)`. The group is in quasi-consensus from
//! time `T` when `d(t) <= eps` for all `t >= T`; a finite record can only
//! approximate "for all", so detection either asks for a trailing window of
//! at least `W` steps or, when the noise is certified sub-critical (which
//! makes `d <= eps` absorbing), takes the first hitting time.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ConfidenceThreshold, OpinionState};
use crate::noise::{certify_theorem2, NoiseModel};

pub(crate) fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

pub fn diameter(state: &OpinionState) -> f64 {
    diameter_of(state.values())
}

pub fn diameter_of(values: &[f64]) -> f64 {
    let (lo, hi) = min_max(values);
    hi - lo
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "window", rename_all = "snake_case")]
pub enum DetectionRule {
    /// `d <= eps` must hold on `[T, horizon]` with `horizon - T >= W`.
    TrailingWindow(u64),
    /// `T` is the first step with `d <= eps`; valid only when `d <= eps`
    /// cannot be left again.
    Absorbing,
}

impl DetectionRule {
    /// `Absorbing` if `noise` is certified sub-critical at `eps`, else a
    /// trailing window of `window` steps.
    pub fn for_model(noise: &NoiseModel, eps: ConfidenceThreshold, window: u64) -> Self {
        if certify_theorem2(noise, eps).is_ok() {
            DetectionRule::Absorbing
        } else {
            DetectionRule::TrailingWindow(window)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConsensusStatus {
    QuasiConsensus { t: u64 },
    NotDetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsensusVerdict {
    pub status: ConsensusStatus,
    pub rule: DetectionRule,
}

impl ConsensusVerdict {
    pub fn time(&self) -> Option<u64> {
        match self.status {
            ConsensusStatus::QuasiConsensus { t } => Some(t),
            ConsensusStatus::NotDetected => None,
        }
    }

    pub fn is_consensus(&self) -> bool {
        self.time().is_some()
    }
}

/// Quasi-consensus verdict over a diameter series indexed `t = 0..=horizon`.
pub fn detect_quasi_consensus(
    diameters: &[f64],
    eps: ConfidenceThreshold,
    rule: DetectionRule,
) -> ConsensusVerdict {
    let eps = eps.value();
    let t = match rule {
        DetectionRule::Absorbing => diameters.iter().position(|&d| d <= eps),
        DetectionRule::TrailingWindow(window) => {
            let start = match diameters.iter().rposition(|&d| d > eps) {
                Some(last_bad) => last_bad + 1,
                None => 0,
            };
            // horizon - T = len - 1 - T
            (start < diameters.len() && (diameters.len() - 1 - start) as u64 >= window)
                .then_some(start)
        }
    };
    ConsensusVerdict {
        status: match t {
            Some(t) => ConsensusStatus::QuasiConsensus { t: t as u64 },
            None => ConsensusStatus::NotDetected,
        },
        rule,
    }
}

/// Earliest recorded step with `d(t) > eps`.
pub fn divergence_detected(diameters: &[f64], eps: ConfidenceThreshold) -> Option<u64> {
    diameters
        .iter()
        .position(|&d| d > eps.value())
        .map(|t| t as u64)
}

/// Earliest step `t >= 1` that leaves a merged state: `d(t - 1) <= eps` and
/// `d(t) > eps`.
pub fn escape_time(diameters: &[f64], eps: ConfidenceThreshold) -> Option<u64> {
    let eps = eps.value();
    diameters
        .windows(2)
        .position(|w| w[0] <= eps && w[1] > eps)
        .map(|k| k as u64 + 1)
}

/// Number of steps with `d > eps` after the first step with `d <= eps`.
pub fn absorption_violations(diameters: &[f64], eps: ConfidenceThreshold) -> usize {
    let eps = eps.value();
    match diameters.iter().position(|&d| d <= eps) {
        Some(first) => diameters[first..].iter().filter(|&&d| d > eps).count(),
        None => 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    /// Agent indices, ordered by opinion (ties by index).
    pub members: Vec<usize>,
    pub mean: f64,
}

/// Groups of agents split wherever the sorted opinion gap exceeds the
/// threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPartition {
    pub groups: Vec<Cluster>,
    pub threshold: f64,
}

impl ClusterPartition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

pub fn clusters(state: &OpinionState, eps: ConfidenceThreshold) -> ClusterPartition {
    let values = state.values();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut groups = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    for &i in &order {
        if let Some(&last) = current.last() {
            if values[i] - values[last] > eps.value() {
                groups.push(finish_cluster(core::mem::take(&mut current), values));
            }
        }
        current.push(i);
    }
    if !current.is_empty() {
        groups.push(finish_cluster(current, values));
    }
    ClusterPartition {
        groups,
        threshold: eps.value(),
    }
}

fn finish_cluster(members: Vec<usize>, values: &[f64]) -> Cluster {
    let mut sum = crate::sum::CompensatedSum::new();
    sum.extend(members.iter().map(|&i| values[i]));
    let mean = sum.total() / members.len() as f64;
    Cluster { members, mean }
}

/// Cluster count without building the partition; `scratch` is reused.
pub fn cluster_count(values: &[f64], eps: ConfidenceThreshold, scratch: &mut Vec<f64>) -> usize {
    scratch.clear();
    scratch.extend_from_slice(values);
    scratch.sort_unstable_by(f64::total_cmp);
    1 + scratch
        .windows(2)
        .filter(|w| w[1] - w[0] > eps.value())
        .count()
}
