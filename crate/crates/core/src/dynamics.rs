//! The HK update with and without noise.
//!
//! Each agent `i` averages the opinions of its neighbour set
//! `N(i, x) = { j : |x_j - x_i| <= eps }` (which always contains `i`), adds
//! its noise draw for the destination step and is clamped onto `[0, 1]`.
//! Updates are synchronous: every agent reads the time-`t` state.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{InitialCondition, SimulationConfig};
use crate::metrics::{cluster_count, min_max};
use crate::rng::{unit_f64, ReplicateStream, StreamSeed};
use crate::sum::CompensatedSum;
use crate::Error;

/// Confidence threshold (interaction radius), `0 < eps <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ConfidenceThreshold(f64);

impl ConfidenceThreshold {
    pub fn new(eps: f64) -> Result<Self, Error> {
        if eps > 0.0 && eps <= 1.0 {
            Ok(Self(eps))
        } else {
            Err(Error::InvalidThreshold(eps))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The critical noise strength `eps / 2`.
    pub fn half(self) -> f64 {
        self.0 / 2.0
    }
}

impl TryFrom<f64> for ConfidenceThreshold {
    type Error = Error;

    fn try_from(eps: f64) -> Result<Self, Error> {
        Self::new(eps)
    }
}

impl From<ConfidenceThreshold> for f64 {
    fn from(eps: ConfidenceThreshold) -> f64 {
        eps.0
    }
}

/// Opinions of all agents at one time step; every value lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState {
    values: Vec<f64>,
    t: u64,
}

impl OpinionState {
    pub fn new(values: Vec<f64>, t: u64) -> Result<Self, Error> {
        if values.is_empty() {
            return Err(Error::EmptyState);
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OpinionOutOfRange { index, value });
        }
        Ok(Self { values, t })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// The unclamped intermediate `x*_i(t) = avg_i(t) + xi_i(t+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreClampState {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

/// A step where the clamp fired: the pre-clamp value left `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClampEvent {
    /// Time of the clamped value.
    pub t: u64,
    pub agent: usize,
    pub boundary: Boundary,
}

fn check_index(n: usize, i: usize) -> Result<(), Error> {
    if i < n {
        Ok(())
    } else {
        Err(Error::AgentOutOfRange { index: i, n })
    }
}

pub fn neighbor_set(
    state: &OpinionState,
    i: usize,
    eps: ConfidenceThreshold,
) -> Result<Vec<usize>, Error> {
    check_index(state.len(), i)?;
    let xi = state.values[i];
    Ok(state
        .values
        .iter()
        .enumerate()
        .filter(|(_, &xj)| (xj - xi).abs() <= eps.value())
        .map(|(j, _)| j)
        .collect())
}

pub fn local_average(state: &OpinionState, i: usize, eps: ConfidenceThreshold) -> Result<f64, Error> {
    check_index(state.len(), i)?;
    Ok(neighbor_average(&state.values, i, eps.value()))
}

// Compensated sum in index order, then pinned to the neighbours' range so
// that rounding can never move an average outside the values it averages.
fn neighbor_average(values: &[f64], i: usize, eps: f64) -> f64 {
    let xi = values[i];
    let mut sum = CompensatedSum::new();
    let (mut count, mut lo, mut hi) = (0usize, xi, xi);
    for &xj in values {
        if (xj - xi).abs() <= eps {
            sum.add(xj);
            count += 1;
            lo = lo.min(xj);
            hi = hi.max(xj);
        }
    }
    (sum.total() / count as f64).clamp(lo, hi)
}

/// Writes every agent's local average into `out`. Values need not lie in
/// `[0, 1]`, which lets the unclamped model share this routine.
pub fn local_averages_into(values: &[f64], eps: ConfidenceThreshold, out: &mut [f64]) {
    debug_assert_eq!(values.len(), out.len());
    let (lo, hi) = min_max(values);
    if hi - lo <= eps.value() {
        // complete interaction graph: every neighbour set is the full index
        // set, so one average (computed exactly as below) serves everyone
        let mut sum = CompensatedSum::new();
        sum.extend(values.iter().copied());
        out.fill((sum.total() / values.len() as f64).clamp(lo, hi));
        return;
    }
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = neighbor_average(values, i, eps.value());
    }
}

pub fn clamp(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

pub fn step(
    state: &OpinionState,
    noise: &[f64],
    eps: ConfidenceThreshold,
) -> Result<OpinionState, Error> {
    step_detailed(state, noise, eps).map(|(_, next)| next)
}

/// Like [`step`], also returning the pre-clamp values.
pub fn step_detailed(
    state: &OpinionState,
    noise: &[f64],
    eps: ConfidenceThreshold,
) -> Result<(PreClampState, OpinionState), Error> {
    let n = state.len();
    if noise.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: noise.len(),
        });
    }
    let mut pre = vec![0.0; n];
    local_averages_into(&state.values, eps, &mut pre);
    for (p, xi) in pre.iter_mut().zip(noise) {
        *p += xi;
    }
    let values = pre.iter().copied().map(clamp).collect();
    Ok((
        PreClampState { values: pre },
        OpinionState {
            values,
            t: state.t + 1,
        },
    ))
}

/// Draws the initial opinions for a run. Random initials use step 0 of the
/// stream, which noise never touches.
pub fn initial_values(
    initial: &InitialCondition,
    n: usize,
    stream: &mut ReplicateStream,
) -> Vec<f64> {
    match initial {
        InitialCondition::UniformRandom => {
            let rng = stream.at_step(0);
            (0..n).map(|_| unit_f64(rng)).collect()
        }
        InitialCondition::AllEqual { value } => vec![*value; n],
        InitialCondition::Explicit { values } => values.clone(),
    }
}

/// Step-by-step driver of the clamped noisy model.
#[derive(Debug, Clone)]
pub struct Simulation<'c> {
    config: &'c SimulationConfig,
    stream: ReplicateStream,
    state: OpinionState,
    noise: Vec<f64>,
    pre: Vec<f64>,
}

/// Everything produced by one call of [`Simulation::advance`].
#[derive(Debug)]
pub struct StepView<'a> {
    /// `xi(t + 1)`, indexed by destination step.
    pub noise: &'a [f64],
    pub pre_clamp: &'a [f64],
    pub state: &'a OpinionState,
}

impl StepView<'_> {
    pub fn clamp_events(&self) -> impl Iterator<Item = ClampEvent> + '_ {
        let t = self.state.t;
        self.pre_clamp.iter().enumerate().filter_map(move |(agent, &v)| {
            let boundary = if v > 1.0 {
                Boundary::Upper
            } else if v < 0.0 {
                Boundary::Lower
            } else {
                return None;
            };
            Some(ClampEvent { t, agent, boundary })
        })
    }
}

impl<'c> Simulation<'c> {
    pub fn new(config: &'c SimulationConfig, seed: StreamSeed) -> Result<Self, Error> {
        let mut stream = ReplicateStream::new(seed);
        let state = OpinionState::new(initial_values(&config.initial, config.n, &mut stream), 0)?;
        if state.len() != config.n {
            return Err(Error::LengthMismatch {
                expected: config.n,
                found: state.len(),
            });
        }
        Ok(Self {
            config,
            stream,
            state,
            noise: vec![0.0; config.n],
            pre: vec![0.0; config.n],
        })
    }

    pub fn state(&self) -> &OpinionState {
        &self.state
    }

    pub fn config(&self) -> &SimulationConfig {
        self.config
    }

    pub fn advance(&mut self) -> StepView<'_> {
        let next_t = self.state.t + 1;
        self.config
            .noise
            .sample_into(self.stream.at_step(next_t), &mut self.noise);
        local_averages_into(&self.state.values, self.config.epsilon, &mut self.pre);
        for ((p, xi), x) in self
            .pre
            .iter_mut()
            .zip(&self.noise)
            .zip(self.state.values.iter_mut())
        {
            *p += xi;
            *x = clamp(*p);
        }
        self.state.t = next_t;
        StepView {
            noise: &self.noise,
            pre_clamp: &self.pre,
            state: &self.state,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RecordOptions {
    /// Keep the full state at every step.
    pub states: bool,
}

/// Per-step record of a clamped run, indexed by `t = 0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: OpinionState,
    pub final_state: OpinionState,
    pub diameters: Vec<f64>,
    pub minima: Vec<f64>,
    pub maxima: Vec<f64>,
    pub cluster_counts: Vec<usize>,
    pub clamp_events: Vec<ClampEvent>,
    pub states: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    pub fn horizon(&self) -> u64 {
        self.final_state.t
    }
}

/// Runs the clamped model for `config.horizon` steps. The result depends
/// only on `(config, seed)`.
pub fn run_trajectory(
    config: &SimulationConfig,
    seed: StreamSeed,
    options: RecordOptions,
) -> Result<Trajectory, Error> {
    let mut sim = Simulation::new(config, seed)?;
    let cap = usize::try_from(config.horizon).unwrap_or(usize::MAX).saturating_add(1);
    let initial = sim.state().clone();
    let mut scratch = Vec::with_capacity(config.n);
    let mut traj = Trajectory {
        initial: initial.clone(),
        final_state: initial,
        diameters: Vec::with_capacity(cap),
        minima: Vec::with_capacity(cap),
        maxima: Vec::with_capacity(cap),
        cluster_counts: Vec::with_capacity(cap),
        clamp_events: Vec::new(),
        states: options.states.then(Vec::new),
    };
    let mut record = |traj: &mut Trajectory, state: &OpinionState| {
        let (lo, hi) = min_max(state.values());
        traj.diameters.push(hi - lo);
        traj.minima.push(lo);
        traj.maxima.push(hi);
        traj.cluster_counts
            .push(cluster_count(state.values(), config.epsilon, &mut scratch));
        if let Some(states) = traj.states.as_mut() {
            states.push(state.values().to_vec());
        }
    };
    record(&mut traj, sim.state());
    for _ in 0..config.horizon {
        let view = sim.advance();
        traj.clamp_events.extend(view.clamp_events());
        let state = view.state;
        record(&mut traj, state);
    }
    traj.final_state = sim.state().clone();
    Ok(traj)
}
