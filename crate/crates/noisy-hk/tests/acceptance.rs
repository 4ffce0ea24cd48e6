//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p noisy-hk --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rayon::prelude::*;

use noisy_hk::ensemble::{run_ensemble, sweep_critical, Execution};
use noisy_hk_core::dynamics::Simulation;
use noisy_hk_core::metrics::diameter_of;
use noisy_hk_core::rng::{unit_f64, ReplicateStream};
use noisy_hk_core::walk::{
    boundary_recurrence, recurrence_config, run_unclamped, walk_variance_bounds,
    WalkRecordOptions,
};
use noisy_hk_core::{
    ConfidenceThreshold, InitialCondition, NoiseModel, SimulationConfig, StreamSeed,
};

const REPLICATES: u64 = 100;
const HORIZON: u64 = 100_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn eps(v: f64) -> ConfidenceThreshold {
    ConfidenceThreshold::new(v).unwrap()
}

fn config(n: usize, e: f64, noise: NoiseModel, initial: InitialCondition, horizon: u64) -> SimulationConfig {
    SimulationConfig {
        n,
        epsilon: eps(e),
        noise,
        initial,
        horizon,
        master_seed: 20_240_601,
        detection_window: 1_000,
    }
}

fn subcritical_config() -> SimulationConfig {
    config(20, 0.2, NoiseModel::uniform(0.1 * 0.2), InitialCondition::UniformRandom, HORIZON)
}

fn supercritical_config(ratio: f64) -> SimulationConfig {
    config(
        10,
        0.01,
        NoiseModel::uniform(ratio * 0.01),
        InitialCondition::AllEqual { value: 0.5 },
        HORIZON,
    )
}

// 1 and 2 share the same ensemble
fn consensus_and_absorption() -> (Outcome, Outcome) {
    let cfg = subcritical_config();
    let start = Instant::now();
    let verdicts = run_ensemble(&cfg, REPLICATES, Execution::Parallel).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let qc = verdicts.iter().filter(|v| v.consensus.is_consensus()).count();
    let freq = qc as f64 / REPLICATES as f64;
    let max_t = verdicts.iter().filter_map(|v| v.consensus.time()).max();
    let first = outcome(
        freq >= 0.99 && secs <= 300.0,
        format!("qc_freq = {freq} (>= 0.99), max T = {max_t:?}, runtime {secs:.1}s (<= 300s)"),
    );
    let violations: usize = verdicts.iter().map(|v| v.absorption_violations).sum();
    let second = outcome(
        violations == 0,
        format!("{violations} steps with d_V > eps after first d_V <= eps, over {REPLICATES} replicates x {HORIZON} steps"),
    );
    (first, second)
}

fn supercritical_divergence() -> Outcome {
    let verdicts = run_ensemble(&supercritical_config(0.6), REPLICATES, Execution::Parallel).unwrap();
    let diverged = verdicts.iter().filter(|v| v.first_divergence.is_some()).count();
    let freq = diverged as f64 / REPLICATES as f64;
    let latest = verdicts.iter().filter_map(|v| v.first_divergence).max();
    outcome(
        freq >= 0.99,
        format!("divergence freq = {freq} (>= 0.99), latest first divergence t = {latest:?}"),
    )
}

fn critical_sweep() -> Outcome {
    let ratios = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8];
    let rows = sweep_critical(&ratios, &supercritical_config(0.6), REPLICATES, Execution::Parallel)
        .unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &rows {
        let ok = if row.ratio <= 0.5 {
            row.div_freq == 0.0
        } else {
            row.div_freq >= 0.95
        };
        pass &= ok;
        parts.push(format!("{}:{}", row.ratio, row.div_freq));
    }
    outcome(
        pass,
        format!("div_freq by ratio [{}] (0 for <= 0.5, >= 0.95 for >= 0.6)", parts.join(" ")),
    )
}

#[derive(Default)]
struct NoiseFreeTally {
    order: usize,
    min: usize,
    max: usize,
    not_constant: usize,
}

fn noise_free_instance(index: u64) -> NoiseFreeTally {
    let mut stream = ReplicateStream::new(StreamSeed::replicate(0xC0FFEE, index));
    let rng = stream.at_step(0);
    let n = 1 + (unit_f64(rng) * 50.0) as usize;
    let e = 0.05 + 0.95 * unit_f64(rng);
    let values: Vec<f64> = (0..n).map(|_| unit_f64(rng)).collect();
    let cfg = config(n, e, NoiseModel::Zero, InitialCondition::Explicit { values }, 2_000);
    let mut sim = Simulation::new(&cfg, StreamSeed::replicate(0, index)).unwrap();
    let mut tally = NoiseFreeTally::default();
    let mut order: Vec<usize> = (0..n).collect();
    let mut prev = sim.state().values().to_vec();
    let mut tail_reference = None;
    for t in 1..=cfg.horizon {
        order.sort_by(|&a, &b| prev[a].total_cmp(&prev[b]).then(a.cmp(&b)));
        let next = sim.advance().state.values().to_vec();
        if order.windows(2).any(|w| next[w[0]] > next[w[1]]) {
            tally.order += 1;
        }
        let (lo0, hi0) = min_max(&prev);
        let (lo1, hi1) = min_max(&next);
        tally.min += usize::from(lo1 < lo0);
        tally.max += usize::from(hi1 > hi0);
        if t == cfg.horizon - 100 {
            tail_reference = Some(next.clone());
        } else if let Some(reference) = &tail_reference {
            tally.not_constant += usize::from(reference != &next);
        }
        prev = next;
    }
    tally
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

fn noise_free_properties() -> Outcome {
    let tallies: Vec<NoiseFreeTally> = (0..1_000u64).into_par_iter().map(noise_free_instance).collect();
    let sum = |f: fn(&NoiseFreeTally) -> usize| tallies.iter().map(f).sum::<usize>();
    let (order, min, max, constant) = (
        sum(|t| t.order),
        sum(|t| t.min),
        sum(|t| t.max),
        sum(|t| t.not_constant),
    );
    outcome(
        order + min + max + constant == 0,
        format!("1000 instances x 2000 steps: order breaks {order}, min decreases {min}, max increases {max}, tail changes {constant}"),
    )
}

fn consensus_closed_form() -> Outcome {
    let mut setups = vec![
        (subcritical_config(), 8u64),
        (supercritical_config(0.6), 8),
        (supercritical_config(0.8), 8),
        (recurrence_config(HORIZON, 3), 8),
    ];
    let mut tg = subcritical_config();
    tg.noise = NoiseModel::TruncatedGaussian { sigma: 0.05, bound: 0.1 };
    setups.push((tg, 4));
    let results: Vec<(f64, u64)> = setups
        .par_iter()
        .flat_map(|(cfg, reps)| (0..*reps).into_par_iter().map(move |r| (cfg, r)))
        .map(|(cfg, r)| {
            let mut sim = Simulation::new(cfg, StreamSeed::replicate(cfg.master_seed, r)).unwrap();
            let (mut worst, mut checked) = (0.0f64, 0u64);
            for _ in 0..cfg.horizon {
                let before = sim.state().values().to_vec();
                let synced = diameter_of(&before) <= cfg.epsilon.value();
                let mean = before.iter().sum::<f64>() / before.len() as f64;
                let view = sim.advance();
                if synced {
                    checked += 1;
                    for (p, xi) in view.pre_clamp.iter().zip(view.noise) {
                        worst = worst.max((p - (mean + xi)).abs());
                    }
                }
            }
            (worst, checked)
        })
        .collect();
    let worst = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let checked: u64 = results.iter().map(|r| r.1).sum();
    outcome(
        worst <= 1e-12 && checked > 0,
        format!("max |x*_i - (mean + xi_i)| = {worst:e} over {checked} synchronised steps (<= 1e-12)"),
    )
}

fn walk_identity() -> Outcome {
    let setups = [
        config(10, 0.2, NoiseModel::uniform(0.1), InitialCondition::AllEqual { value: 0.5 }, 10_000),
        config(
            4,
            0.3,
            NoiseModel::TruncatedGaussian { sigma: 0.1, bound: 0.15 },
            InitialCondition::Explicit { values: vec![0.1, 0.2, 0.3, 0.25] },
            10_000,
        ),
        config(
            25,
            0.05,
            NoiseModel::Discrete { delta: 0.02, mass: 0.7 },
            InitialCondition::AllEqual { value: 0.9 },
            10_000,
        ),
    ];
    let mut worst = 0.0f64;
    let mut all_synced = true;
    for cfg in &setups {
        for r in 0..5 {
            let run = run_unclamped(
                cfg,
                StreamSeed::replicate(cfg.master_seed, r),
                WalkRecordOptions { states: true, noise: true },
            )
            .unwrap();
            all_synced &= run.synchronized_steps == cfg.horizon;
            let states = run.states.unwrap();
            let noise = run.noise.unwrap();
            let n = cfg.n as f64;
            let y0 = states[0].iter().sum::<f64>() / n;
            let mut s = 0.0;
            let synced = run.synchronized_steps as usize;
            for (t, xi) in noise.iter().enumerate().take(synced) {
                for (y, x) in states[t + 1].iter().zip(xi) {
                    worst = worst.max((y - (y0 + s + x)).abs());
                }
                s += xi.iter().sum::<f64>() / n;
            }
            worst = worst.max(run.max_closed_form_residual);
        }
    }
    outcome(
        worst <= 1e-12 && all_synced,
        format!("max residual {worst:e} (<= 1e-12) over 10^4 synchronised steps; all runs stayed synchronised: {all_synced}"),
    )
}

const VARIANCE_REPLICATES: u64 = 2_000;

fn walk_variance() -> Outcome {
    let (n, delta, t) = (5usize, 0.1, 10_000u64);
    let cfg = config(n, 0.2, NoiseModel::uniform(delta), InitialCondition::AllEqual { value: 0.5 }, t);
    let finals: Vec<f64> = (0..VARIANCE_REPLICATES)
        .into_par_iter()
        .map(|r| {
            let run = run_unclamped(&cfg, StreamSeed::replicate(99, r), WalkRecordOptions::default())
                .unwrap();
            run.record.partial_sums[t as usize]
        })
        .collect();
    let m = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / m;
    let var = finals.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (m - 1.0);
    let analytic = delta * delta / (3.0 * n as f64);
    let rel = (var / t as f64 - analytic).abs() / analytic;
    let s2 = t as f64 * cfg.noise.variance() / n as f64;
    let (lo, hi) = walk_variance_bounds(&cfg.noise, n, t).unwrap();
    let bracket = lo <= s2 * (1.0 + 1e-12) && s2 <= hi;
    outcome(
        rel <= 0.10 && bracket,
        format!(
            "Var(S_t)/t = {:.4e} vs delta^2/(3n) = {analytic:.4e}, rel. error {:.2}% (<= 10%, {VARIANCE_REPLICATES} replicates); s_t^2 = {s2:.4} in [{lo:.4}, {hi:.4}]",
            var / t as f64,
            rel * 100.0
        ),
    )
}

fn boundary_recurrence_proxy() -> Outcome {
    let horizon = 1_000_000;
    let cfg = recurrence_config(horizon, 7);
    let logs: Vec<_> = (0..20u64)
        .into_par_iter()
        .map(|r| boundary_recurrence(&cfg, StreamSeed::replicate(cfg.master_seed, r), horizon).unwrap())
        .collect();
    let both = logs.iter().filter(|l| l.all_agents_hit_both()).count();
    let min_changes = logs.iter().map(|l| l.partial_sum_sign_changes).min().unwrap();
    let frac = both as f64 / logs.len() as f64;
    outcome(
        frac >= 0.95 && min_changes >= 10,
        format!("{both}/20 replicates with every agent clamped at 0 and at 1 (>= 95%); min S_t sign changes {min_changes} (>= 10)"),
    )
}

const CONFIG: &str = r#"
n = 12
epsilon = 0.2
horizon = 400
master_seed = 5
detection_window = 50

[noise]
kind = "uniform"
delta = 0.03

[initial]
kind = "uniform_random"
"#;

fn cli(args: &[&str], dir: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_noisy-hk"))
        .args(args)
        .current_dir(dir)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with("_manifest.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    fs::write(root.join("hk.toml"), CONFIG).unwrap();
    let commands: [&[&str]; 5] = [
        &["run", "hk.toml", "--record-states", "--out-dir", "a"],
        &["sweep", "hk.toml", "--ratios", "0.2,0.6", "--replicates", "10", "--out-dir", "a"],
        &["walk", "hk.toml", "--identity-check", "--out-dir", "a"],
        &["reproduce", "fig3", "--seed", "3", "--out-dir", "a"],
        &["reproduce", "fig1", "--out-dir", "a"],
    ];
    let mut ok = commands.iter().all(|c| cli(c, root));
    let mut replays = 0;
    for stem in ["run", "sweep", "walk", "fig3", "fig1"] {
        let manifest = format!("a/{stem}_manifest.json");
        ok &= cli(&["replay", &manifest, "--out-dir", "b"], root);
        ok &= cli(&["replay", &manifest, "--out-dir", "c", "--serial"], root);
        replays += 1;
    }
    let a = data_files(&root.join("a"));
    let b = data_files(&root.join("b"));
    let c = data_files(&root.join("c"));
    let identical = !a.is_empty() && a == b && a == c;
    outcome(
        ok && identical,
        format!("{} data files from {replays} manifests replayed twice (parallel and serial): byte-identical = {identical}", a.len()),
    )
}

fn main() {
    let start = Instant::now();
    let (c1, c2) = consensus_and_absorption();
    let results = vec![
        ("1 sub-critical consensus", c1),
        ("2 absorption", c2),
        ("3 super-critical divergence", supercritical_divergence()),
        ("4 critical sweep", critical_sweep()),
        ("5 noise-free properties", noise_free_properties()),
        ("6 consensus-phase closed form", consensus_closed_form()),
        ("7 walk identity", walk_identity()),
        ("8 walk variance", walk_variance()),
        ("9 boundary recurrence", boundary_recurrence_proxy()),
        ("10 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
