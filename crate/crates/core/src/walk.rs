//! Random-walk diagnostics for the synchronised cluster.
//!
//! While every pair of agents is within `eps`, each agent's average is the
//! global mean, so the unclamped model `y_i(t+1) = avg_i(y(t)) + xi_i(t+1)`
//! solves in closed form:
//!
//! ```text
//! y_i(t+1) = mean(y(0)) + S_t + xi_i(t+1),   S_t = sum_{k=1..t} eta_k,
//! eta_k = (1/n) sum_j xi_j(k).
//! ```
//!
//! `eta_k` has variance `Var(xi)/n`, which for bounded noise lies in
//! `[c/n, d^2/n]` (`c` the per-draw variance, `d` the support bound), so
//! `s_t^2 = E S_t^2 = t Var(xi) / n`. The walk `S_t` is unbounded in both
//! directions, which is what drives the clamped cluster to both boundaries
//! over and over.

use alloc::vec;
use alloc::vec::Vec;

use crate::config::SimulationConfig;
use crate::dynamics::{
    initial_values, local_averages_into, Boundary, ConfidenceThreshold, Simulation,
};
use crate::metrics::diameter_of;
use crate::noise::NoiseModel;
use crate::rng::{ReplicateStream, StreamSeed};
use crate::sum::{compensated_sum, CompensatedSum};
use crate::Error;

/// The aggregated noise walk of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkRecord {
    /// `eta[k - 1] = eta_k` for `k = 1..=horizon`.
    pub eta: Vec<f64>,
    /// `partial_sums[t] = S_t` for `t = 0..=horizon`, with `S_0 = 0`.
    pub partial_sums: Vec<f64>,
    /// Analytic `E eta_k^2 = Var(xi) / n`.
    pub eta_variance: f64,
    pub y0_mean: f64,
}

impl WalkRecord {
    pub fn horizon(&self) -> u64 {
        self.eta.len() as u64
    }

    /// Analytic `s_t^2 = t E eta^2`.
    pub fn s2(&self, t: u64) -> f64 {
        t as f64 * self.eta_variance
    }
}

/// Result of [`run_unclamped`].
#[derive(Debug, Clone, PartialEq)]
pub struct UnclampedRun {
    pub record: WalkRecord,
    pub diameters: Vec<f64>,
    /// `y(t)` for `t = 0..=horizon`, when requested.
    pub states: Option<Vec<Vec<f64>>>,
    /// `xi(t)` for `t = 1..=horizon`, when requested.
    pub noise: Option<Vec<Vec<f64>>>,
    /// Number of leading updates made from a synchronised state, i.e. the
    /// largest `m` with `d(y(t)) <= eps` for all `t < m`.
    pub synchronized_steps: u64,
    /// Largest `|y_i(t+1) - mean(y(0)) - S_t - xi_i(t+1)|` over those updates.
    pub max_closed_form_residual: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WalkRecordOptions {
    pub states: bool,
    pub noise: bool,
}

/// Runs the unclamped model with the same neighbour rule and the same noise
/// stream positions as the clamped model, so both see identical draws for a
/// given seed.
pub fn run_unclamped(
    config: &SimulationConfig,
    seed: StreamSeed,
    options: WalkRecordOptions,
) -> Result<UnclampedRun, Error> {
    config.noise.validate()?;
    let n = config.n;
    let mut stream = ReplicateStream::new(seed);
    let mut y = initial_values(&config.initial, n, &mut stream);
    if y.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: y.len(),
        });
    }
    let eps = config.epsilon;
    let horizon = usize::try_from(config.horizon).unwrap_or(usize::MAX);
    let y0_mean = compensated_sum(&y) / n as f64;

    let mut eta = Vec::with_capacity(horizon);
    let mut partial_sums = Vec::with_capacity(horizon.saturating_add(1));
    let mut diameters = Vec::with_capacity(horizon.saturating_add(1));
    let mut states = options.states.then(|| vec![y.clone()]);
    let mut noise_log = options.noise.then(Vec::new);

    partial_sums.push(0.0);
    diameters.push(diameter_of(&y));
    let mut walk = CompensatedSum::new();
    let mut noise = vec![0.0; n];
    let mut averages = vec![0.0; n];
    let mut in_sync = true;
    let mut synchronized_steps = 0u64;
    let mut max_residual = 0.0f64;

    for t in 0..config.horizon {
        config.noise.sample_into(stream.at_step(t + 1), &mut noise);
        let s_t = walk.total();
        in_sync = in_sync && diameters[t as usize] <= eps.value();
        local_averages_into(&y, eps, &mut averages);
        for ((yi, avg), xi) in y.iter_mut().zip(&averages).zip(&noise) {
            *yi = avg + xi;
        }
        if in_sync {
            synchronized_steps += 1;
            for (yi, xi) in y.iter().zip(&noise) {
                max_residual = max_residual.max((yi - (y0_mean + s_t + xi)).abs());
            }
        }
        let eta_k = compensated_sum(&noise) / n as f64;
        walk.add(eta_k);
        eta.push(eta_k);
        partial_sums.push(walk.total());
        diameters.push(diameter_of(&y));
        if let Some(s) = states.as_mut() {
            s.push(y.clone());
        }
        if let Some(log) = noise_log.as_mut() {
            log.push(noise.clone());
        }
    }

    Ok(UnclampedRun {
        record: WalkRecord {
            eta,
            partial_sums,
            eta_variance: config.noise.variance() / n as f64,
            y0_mean,
        },
        diameters,
        states,
        noise: noise_log,
        synchronized_steps,
        max_closed_form_residual: max_residual,
    })
}

/// Bracket `[t c / n, t d^2 / n]` for `s_t^2`, with `c` the per-draw variance
/// and `d` the support bound.
pub fn walk_variance_bounds(model: &NoiseModel, n: usize, t: u64) -> Result<(f64, f64), Error> {
    if model.is_degenerate() || model.variance() <= 0.0 {
        return Err(Error::DegenerateNoise);
    }
    let scale = t as f64 / n as f64;
    let d = model.support_bound();
    Ok((scale * model.variance(), scale * d * d))
}

/// `S_t / (s_t sqrt(log log s_t))` with the analytic `s_t`.
pub fn lil_statistic(record: &WalkRecord, t: u64) -> Result<f64, Error> {
    let s2 = record.s2(t);
    let s = libm::sqrt(s2);
    let loglog = libm::log(libm::log(s));
    // also rejects NaN from s <= 1
    if loglog.is_nan() || loglog <= 0.0 {
        return Err(Error::LilDomain { s2 });
    }
    let s_t = *record
        .partial_sums
        .get(t as usize)
        .ok_or(Error::InvalidParameter {
            name: "t",
            value: t as f64,
        })?;
    Ok(s_t / (s * libm::sqrt(loglog)))
}

/// Steps at which the clamp fired, per agent and boundary.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BoundaryHitLog {
    pub lower: Vec<Vec<u64>>,
    pub upper: Vec<Vec<u64>>,
    /// Sign changes of the noise walk `S_t` over the same run (zeros skipped).
    pub partial_sum_sign_changes: u64,
}

impl BoundaryHitLog {
    pub fn is_empty(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(Vec::is_empty)
    }

    /// Every agent hit both boundaries at least once.
    pub fn all_agents_hit_both(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|hits| !hits.is_empty())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct SignChangeCounter {
    last: i8,
    changes: u64,
}

impl SignChangeCounter {
    fn push(&mut self, v: f64) {
        let sign = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            return;
        };
        if self.last != 0 && self.last != sign {
            self.changes += 1;
        }
        self.last = sign;
    }
}

pub fn count_sign_changes(values: &[f64]) -> u64 {
    let mut counter = SignChangeCounter::default();
    for &v in values {
        counter.push(v);
    }
    counter.changes
}

/// Runs the clamped model for `horizon` steps (overriding
/// `config.horizon`) and logs every clamp event.
pub fn boundary_recurrence(
    config: &SimulationConfig,
    seed: StreamSeed,
    horizon: u64,
) -> Result<BoundaryHitLog, Error> {
    config.noise.validate()?;
    let mut sim = Simulation::new(config, seed)?;
    let mut log = BoundaryHitLog {
        lower: vec![Vec::new(); config.n],
        upper: vec![Vec::new(); config.n],
        partial_sum_sign_changes: 0,
    };
    let n = config.n as f64;
    let mut walk = CompensatedSum::new();
    let mut signs = SignChangeCounter::default();
    for _ in 0..horizon {
        let view = sim.advance();
        for ev in view.clamp_events() {
            match ev.boundary {
                Boundary::Lower => log.lower[ev.agent].push(ev.t),
                Boundary::Upper => log.upper[ev.agent].push(ev.t),
            }
        }
        walk.add(compensated_sum(view.noise) / n);
        signs.push(walk.total());
    }
    log.partial_sum_sign_changes = signs.changes;
    Ok(log)
}

/// Convenience: recurrence experiment defaults (3 agents, `eps = 0.5`,
/// `Uniform(eps / 2)`, all opinions at 0.5).
pub fn recurrence_config(horizon: u64, master_seed: u64) -> SimulationConfig {
    let eps = ConfidenceThreshold::new(0.5).expect("valid threshold");
    SimulationConfig {
        n: 3,
        epsilon: eps,
        noise: NoiseModel::uniform(eps.half()),
        initial: crate::config::InitialCondition::AllEqual { value: 0.5 },
        horizon,
        master_seed,
        detection_window: crate::config::DEFAULT_DETECTION_WINDOW,
    }
}
