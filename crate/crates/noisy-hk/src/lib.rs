//! Ensemble runner, file formats and command-line front end for
//! [`noisy_hk_core`].

pub mod app;
pub mod ensemble;
pub mod io;

pub use app::{certify, execute, replay, CommandReport};
pub use ensemble::{
    reproduce_scenario, run_ensemble, sweep_critical, Execution, ReplicateVerdict, Scenario,
    SweepRow,
};
pub use io::{load_config, AppError, CommandSpec, RunManifest};
