//! Simulation core for the noisy Hegselmann-Krause (HK) bounded-confidence
//! opinion model.
//!
//! Agents hold opinions in `[0, 1]`. At every step each agent averages the
//! opinions lying within the confidence threshold `eps` of its own, adds an
//! independent zero-mean noise draw and is projected back onto `[0, 1]`.
//! Noise bounded by `eps / 2` drives the group into quasi-consensus in finite
//! time; noise with tail mass beyond `eps / 2` keeps splitting it apart.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. Agent indices
//! are zero-based throughout.
//!
//! Modules:
//! - [`dynamics`]: neighbour sets, local averages, the clamped update and
//!   trajectory recording.
//! - [`noise`]: bounded zero-mean noise models and their analytic certificates.
//! - [`metrics`]: diameter, clusters, quasi-consensus and divergence detection.
//! - [`walk`]: the unclamped model, the aggregated noise walk and boundary
//!   recurrence counters.
//! - [`rng`]: the seeded, position-addressable random streams.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod config;
pub mod dynamics;
mod error;
pub mod metrics;
pub mod noise;
pub mod rng;
pub mod sum;
pub mod walk;

pub use config::{InitialCondition, SimulationConfig, DEFAULT_DETECTION_WINDOW};
pub use dynamics::{
    clamp, local_average, neighbor_set, run_trajectory, step, Boundary, ClampEvent,
    ConfidenceThreshold, OpinionState, PreClampState, RecordOptions, Simulation, Trajectory,
};
pub use error::Error;
pub use metrics::{
    clusters, detect_quasi_consensus, diameter, divergence_detected, ClusterPartition,
    ConsensusStatus, ConsensusVerdict, DetectionRule,
};
pub use noise::{
    certify_theorem2, certify_theorem3, sample_vector, NoiseModel, Refusal, Theorem2Certificate,
    Theorem3Certificate,
};
pub use rng::{ReplicateStream, StreamSeed};
pub use walk::{
    boundary_recurrence, lil_statistic, run_unclamped, walk_variance_bounds, BoundaryHitLog,
    UnclampedRun, WalkRecord,
};

pub type Result<T, E = Error> = core::result::Result<T, E>;
