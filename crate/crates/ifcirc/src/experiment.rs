//! Configuration-driven experiment runner: flat key=value configs with two
//! built-in presets, shot-sampled population trajectories with multi-run
//! statistics, the path-sum oracle trajectory, deterministic CSV export, and
//! a self-check suite over every pipeline stage.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::algorithms::{
    assemble_probe_circuit, assemble_probe_circuit_with, combine, estimate_populations,
    exact_success_probability_with_cap, extend_to_readout, operator_count, resource_counts,
    Algorithm, AlgorithmError, CompactOperator, ExperimentPlan, ResourceReport,
};
use crate::bath::{
    influence_coefficients, influence_coefficients_with, BathError, CoeffOptions, CoeffTable,
    OhmicBath,
};
use crate::circuit::{unitary_of, CircuitError, DEFAULT_SIM_QUBITS};
use crate::pathsum::{rdm_pathsum, PathsumError, SpinBosonModel};
use crate::synthesis::{
    dense_walsh_native_count, dilate, walsh_circuit_with_threshold, walsh_coefficients,
};
use crate::C64;

/// What a run produces: sampled trajectories from one or both algorithms, or
/// only the classical oracle trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    /// Algorithm One only.
    One,
    /// Algorithm Two only.
    Two,
    /// Both algorithms (enables the standard-deviation comparison export).
    Both,
    /// Classical path-sum trajectory only; no circuits, no sampling.
    PathsumOnly,
}

impl RunMode {
    fn parse(value: &str) -> Option<RunMode> {
        match value.to_ascii_lowercase().as_str() {
            "one" | "i" | "1" => Some(RunMode::One),
            "two" | "ii" | "2" => Some(RunMode::Two),
            "both" => Some(RunMode::Both),
            "pathsum-only" | "pathsum" => Some(RunMode::PathsumOnly),
            _ => None,
        }
    }

    /// Canonical config-file spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::One => "one",
            RunMode::Two => "two",
            RunMode::Both => "both",
            RunMode::PathsumOnly => "pathsum-only",
        }
    }
}

/// One row of the shot schedule: evolve `n_steps` time steps, estimate
/// populations from `shots` measurement shots, repeated `runs` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleStep {
    pub n_steps: usize,
    pub shots: u64,
    pub runs: usize,
}

/// Complete experiment configuration. Built from flat `key=value` text via
/// [`parse_config`]; [`RunConfig::default`] is the `fig8` preset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// System tunneling frequency Ω.
    pub omega: f64,
    /// Bath coupling strength ξ (Kondo parameter).
    pub xi: f64,
    /// Bath cutoff frequency ω_c.
    pub omega_c: f64,
    /// Inverse temperature β.
    pub beta: f64,
    /// Time step Δt (always recorded in output headers).
    pub dt: f64,
    /// System levels n (power of two; experiments target n = 2).
    pub n_levels: usize,
    /// Memory window L; `None` means full memory L = N at every step.
    pub memory: Option<usize>,
    /// What to run.
    pub algorithm: RunMode,
    /// Initial basis state (ρ(0) = |initial⟩⟨initial|).
    pub initial: usize,
    /// Basis state probed by the second circuit of each pair.
    pub probe: usize,
    /// Per-timestep shot schedule.
    pub schedule: Vec<ScheduleStep>,
    /// Master seed; every (algorithm, step, probe, run) draw derives its own.
    pub seed: u64,
    /// Statevector qubit cap for this run (default 26; step 5 of the presets
    /// at full memory needs 27, i.e. a 2 GiB state, and errors under the
    /// default — raise explicitly to run it).
    pub sim_qubits: usize,
}

/// Table-row shot counts shared by the presets (runs of 100 each).
const FIG8_SHOTS: [u64; 5] = [20_000, 30_000, 40_000, 250_000, 5_000_000];
const FIG9_SHOTS: [u64; 5] = [20_000, 75_000, 300_000, 5_000_000, 5_000_000];

fn preset_schedule(shots: &[u64; 5]) -> Vec<ScheduleStep> {
    shots
        .iter()
        .enumerate()
        .map(|(i, &s)| ScheduleStep {
            n_steps: i + 1,
            shots: s,
            runs: 100,
        })
        .collect()
}

/// A named built-in configuration: `fig8` (weak coupling ξ = 0.1, ω_c = 7.5,
/// β = 5) or `fig9` (strong coupling ξ = 1.2, ω_c = 2.5, β = 0.2), both with
/// Ω = 1, Δt = 0.25, full memory, and the published five-step shot schedule
/// at 100 runs per step.
pub fn preset(name: &str) -> Result<RunConfig, ExperimentError> {
    let base = RunConfig {
        omega: 1.0,
        xi: 0.1,
        omega_c: 7.5,
        beta: 5.0,
        dt: 0.25,
        n_levels: 2,
        memory: None,
        algorithm: RunMode::One,
        initial: 0,
        probe: 1,
        schedule: preset_schedule(&FIG8_SHOTS),
        seed: 12345,
        sim_qubits: DEFAULT_SIM_QUBITS,
    };
    match name {
        "fig8" => Ok(base),
        "fig9" => Ok(RunConfig {
            xi: 1.2,
            omega_c: 2.5,
            beta: 0.2,
            schedule: preset_schedule(&FIG9_SHOTS),
            ..base
        }),
        _ => Err(ExperimentError::InvalidValue {
            key: "preset".into(),
            value: name.into(),
            reason: "known presets are fig8 and fig9".into(),
        }),
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        preset("fig8").expect("built-in preset")
    }
}

/// Errors from configuration handling and experiment execution.
#[derive(Debug, Error)]
pub enum ExperimentError {
    /// A config line is not `key=value`.
    #[error("config line {line} is not of the form key=value: {text:?}")]
    MalformedLine { line: usize, text: String },
    /// A key is not recognized.
    #[error("unknown config key {key:?}")]
    UnknownKey { key: String },
    /// A value does not parse or is out of range.
    #[error("invalid value {value:?} for key {key:?}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    /// The assembled configuration is inconsistent.
    #[error("invalid config: {reason}")]
    InvalidConfig { reason: String },
    /// Propagated from bath-parameter validation or coefficient computation.
    #[error(transparent)]
    Bath(#[from] BathError),
    /// Propagated from model validation or the path-sum oracle.
    #[error(transparent)]
    Pathsum(#[from] PathsumError),
    /// Propagated from circuit assembly or estimation.
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    /// Propagated from simulation.
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    /// Propagated from diagonal-operator synthesis.
    #[error(transparent)]
    Synthesis(#[from] crate::synthesis::SynthesisError),
}

/// Parse a flat `key=value` configuration. Empty lines and lines starting
/// with `#` are skipped. A `preset=fig8|fig9` line (applied first, wherever
/// it appears) selects the base; all other keys override it in file order.
/// `n_steps=k` resizes the schedule to steps 1..=k (extending with the last
/// row's shots/runs); `shots=` and `runs=` apply to every scheduled step.
/// Recognized keys: preset, omega, xi, omega_c, beta, dt, n_levels, n_steps,
/// memory (integer or `full`), algorithm (one|two|both|pathsum-only),
/// initial, probe, shots, runs, seed, sim_qubits.
pub fn parse_config(text: &str) -> Result<RunConfig, ExperimentError> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ExperimentError::MalformedLine {
            line: i + 1,
            text: line.into(),
        })?;
        pairs.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    let mut config = RunConfig::default();
    if let Some((_, _, name)) = pairs.iter().find(|(_, k, _)| k == "preset") {
        config = preset(name)?;
    }
    for (_, key, value) in &pairs {
        apply_key(&mut config, key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ExperimentError> {
    value.parse().map_err(|_| ExperimentError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: format!("expected a {}", std::any::type_name::<T>()),
    })
}

fn apply_key(config: &mut RunConfig, key: &str, value: &str) -> Result<(), ExperimentError> {
    match key {
        "preset" => {} // applied up front
        "omega" => config.omega = parse_num(key, value)?,
        "xi" => config.xi = parse_num(key, value)?,
        "omega_c" => config.omega_c = parse_num(key, value)?,
        "beta" => config.beta = parse_num(key, value)?,
        "dt" => config.dt = parse_num(key, value)?,
        "n_levels" => config.n_levels = parse_num(key, value)?,
        "initial" => config.initial = parse_num(key, value)?,
        "probe" => config.probe = parse_num(key, value)?,
        "seed" => config.seed = parse_num(key, value)?,
        "sim_qubits" => config.sim_qubits = parse_num(key, value)?,
        "memory" => {
            config.memory = if value.eq_ignore_ascii_case("full") {
                None
            } else {
                Some(parse_num(key, value)?)
            };
        }
        "algorithm" => {
            config.algorithm =
                RunMode::parse(value).ok_or_else(|| ExperimentError::InvalidValue {
                    key: key.into(),
                    value: value.into(),
                    reason: "expected one, two, both, or pathsum-only".into(),
                })?;
        }
        "n_steps" => {
            let n: usize = parse_num(key, value)?;
            if n == 0 {
                return Err(ExperimentError::InvalidValue {
                    key: key.into(),
                    value: value.into(),
                    reason: "schedule needs at least one step".into(),
                });
            }
            let last = *config.schedule.last().expect("schedule never empty");
            config.schedule.resize(n, last);
            for (i, step) in config.schedule.iter_mut().enumerate() {
                step.n_steps = i + 1;
            }
        }
        "shots" => {
            let shots: u64 = parse_num(key, value)?;
            for step in &mut config.schedule {
                step.shots = shots;
            }
        }
        "runs" => {
            let runs: usize = parse_num(key, value)?;
            for step in &mut config.schedule {
                step.runs = runs;
            }
        }
        _ => return Err(ExperimentError::UnknownKey { key: key.into() }),
    }
    Ok(())
}

impl RunConfig {
    /// Check every range invariant: valid bath, positive Δt, power-of-two
    /// levels, basis states in range, strictly increasing schedule steps
    /// with positive shot/run counts, and a usable memory window.
    pub fn validate(&self) -> Result<(), ExperimentError> {
        OhmicBath::new(self.xi, self.omega_c, self.beta)?;
        if !self.dt.is_finite() || self.dt <= 0.0 {
            return Err(ExperimentError::InvalidConfig {
                reason: format!("dt must be positive and finite, got {}", self.dt),
            });
        }
        if !self.omega.is_finite() {
            return Err(ExperimentError::InvalidConfig {
                reason: format!("omega must be finite, got {}", self.omega),
            });
        }
        if self.n_levels < 2 || !self.n_levels.is_power_of_two() {
            return Err(ExperimentError::InvalidConfig {
                reason: format!("n_levels must be a power of two ≥ 2, got {}", self.n_levels),
            });
        }
        if self.initial >= self.n_levels || self.probe >= self.n_levels {
            return Err(ExperimentError::InvalidConfig {
                reason: format!(
                    "initial={} and probe={} must be below n_levels={}",
                    self.initial, self.probe, self.n_levels
                ),
            });
        }
        if self.schedule.is_empty() {
            return Err(ExperimentError::InvalidConfig {
                reason: "schedule has no steps".into(),
            });
        }
        let mut prev = 0usize;
        for step in &self.schedule {
            if step.n_steps <= prev {
                return Err(ExperimentError::InvalidConfig {
                    reason: format!(
                        "schedule timesteps must be strictly increasing (…{prev}, {})",
                        step.n_steps
                    ),
                });
            }
            if step.shots == 0 || step.runs == 0 {
                return Err(ExperimentError::InvalidConfig {
                    reason: format!(
                        "step {}: shots={} and runs={} must be positive",
                        step.n_steps, step.shots, step.runs
                    ),
                });
            }
            prev = step.n_steps;
        }
        if self.memory == Some(0) {
            return Err(ExperimentError::InvalidConfig {
                reason: "memory must be at least 1 (or full)".into(),
            });
        }
        Ok(())
    }

    /// Memory window for an evolution of `n_steps` steps: the configured L
    /// clipped to the step count, or the full window when unset.
    pub fn memory_for(&self, n_steps: usize) -> usize {
        self.memory.map_or(n_steps, |l| l.min(n_steps))
    }

    /// The system model this configuration describes. Levels beyond two use
    /// the symmetric odd-integer coordinate grid (n−1, n−3, …, −(n−1)).
    pub fn model(&self) -> Result<SpinBosonModel, ExperimentError> {
        let bath = OhmicBath::new(self.xi, self.omega_c, self.beta)?;
        if self.n_levels == 2 {
            return Ok(SpinBosonModel::two_level(self.omega, bath, self.dt)?);
        }
        let dvr: Vec<f64> = (0..self.n_levels)
            .map(|i| (self.n_levels - 1) as f64 - 2.0 * i as f64)
            .collect();
        Ok(SpinBosonModel::new(self.omega, dvr, bath, self.dt)?)
    }

    /// Deterministic `key=value` echo of this configuration, one per line —
    /// embedded as comments in every CSV header.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "omega={:.16e}", self.omega);
        let _ = writeln!(out, "xi={:.16e}", self.xi);
        let _ = writeln!(out, "omega_c={:.16e}", self.omega_c);
        let _ = writeln!(out, "beta={:.16e}", self.beta);
        let _ = writeln!(out, "dt={:.16e}", self.dt);
        let _ = writeln!(out, "n_levels={}", self.n_levels);
        let _ = writeln!(
            out,
            "memory={}",
            self.memory.map_or("full".to_string(), |l| l.to_string())
        );
        let _ = writeln!(out, "algorithm={}", self.algorithm.as_str());
        let _ = writeln!(out, "initial={}", self.initial);
        let _ = writeln!(out, "probe={}", self.probe);
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "sim_qubits={}", self.sim_qubits);
        for step in &self.schedule {
            let _ = writeln!(
                out,
                "schedule={} steps, {} shots, {} runs",
                step.n_steps, step.shots, step.runs
            );
        }
        out
    }
}

/// One classical-oracle trajectory point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OraclePoint {
    pub n_steps: usize,
    pub t: f64,
    pub p0: f64,
    pub p1: f64,
    pub rho01: C64,
}

/// One sampled trajectory point: run statistics plus the oracle value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub n_steps: usize,
    pub t: f64,
    pub shots: u64,
    pub runs: usize,
    pub p0_mean: f64,
    pub p0_std: f64,
    pub p1_mean: f64,
    pub p1_std: f64,
    pub exact_p0: f64,
}

/// A sampled population trajectory for one algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTrajectory {
    pub algorithm: Algorithm,
    pub points: Vec<TrajectoryPoint>,
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    /// Path-sum oracle trajectory over the scheduled steps (plus t = 0).
    pub oracle: Vec<OraclePoint>,
    /// Zero (pathsum-only), one, or two sampled trajectories.
    pub trajectories: Vec<PopulationTrajectory>,
}

/// SplitMix64 finalizer: decorrelates derived seeds.
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent deterministic seed for one (algorithm, step, probe, run) draw.
fn derive_seed(base: u64, algorithm: u64, step: u64, probe: u64, run: u64) -> u64 {
    let mut z = splitmix(base);
    for part in [algorithm, step, probe, run] {
        z = splitmix(z ^ part);
    }
    z
}

/// Classical path-sum trajectory over the scheduled steps, starting with the
/// exact t = 0 point. Each step uses its own coefficient table with the
/// config's memory window clipped to the step count.
pub fn oracle_trajectory(config: &RunConfig) -> Result<Vec<OraclePoint>, ExperimentError> {
    config.validate()?;
    let model = config.model()?;
    let bath = model.bath;
    let mut points = vec![OraclePoint {
        n_steps: 0,
        t: 0.0,
        p0: if config.initial == 0 { 1.0 } else { 0.0 },
        p1: if config.initial == 1 { 1.0 } else { 0.0 },
        rho01: C64::new(0.0, 0.0),
    }];
    for step in &config.schedule {
        let n = step.n_steps;
        let memory = config.memory_for(n);
        let table = influence_coefficients(&bath, config.dt, n, memory)?;
        let rho = rdm_pathsum(&model, &table, n, (config.initial, config.initial))?;
        points.push(OraclePoint {
            n_steps: n,
            t: n as f64 * config.dt,
            p0: rho.population(0),
            p1: rho.population(1),
            rho01: rho.entry(0, 1),
        });
    }
    Ok(points)
}

/// Sampled estimates of (p0, p1) for one schedule step of one algorithm:
/// build the probe pair once, read both exact success probabilities, then
/// draw each run's success counts from the matching binomial distribution —
/// the exact marginal of full measurement sampling — with per-run derived
/// seeds. Returns the per-run p0 values and the exact success-derived p0.
fn sampled_step(
    config: &RunConfig,
    algorithm: Algorithm,
    step: ScheduleStep,
) -> Result<(Vec<f64>, f64), ExperimentError> {
    let model = config.model()?;
    let n = step.n_steps;
    let memory = config.memory_for(n);
    let plan = ExperimentPlan {
        model,
        n_steps: n,
        memory,
        algorithm,
        initial: config.initial,
        probe: config.probe,
        shots: step.shots,
        runs: step.runs,
        seed: config.seed,
    };
    plan.validate()?;
    let table = influence_coefficients(&plan.model.bath, config.dt, n, memory)?;
    let operators = combine(&plan.model, &table, n, memory)?;
    let mut zero = assemble_probe_circuit(config.n_levels, n, &operators, config.initial, 0)?;
    let mut probe =
        assemble_probe_circuit(config.n_levels, n, &operators, config.initial, config.probe)?;
    if algorithm == Algorithm::Two {
        zero = extend_to_readout(&zero)?;
        probe = extend_to_readout(&probe)?;
    }
    let p_succ = [
        exact_success_probability_with_cap(&zero, config.sim_qubits)?,
        exact_success_probability_with_cap(&probe, config.sim_qubits)?,
    ];
    let alg_tag = match algorithm {
        Algorithm::One => 0u64,
        Algorithm::Two => 1u64,
    };
    let draw = |run: usize| -> Result<f64, ExperimentError> {
        let mut counts = [0u64; 2];
        for (probe_idx, &p) in p_succ.iter().enumerate() {
            let seed = derive_seed(config.seed, alg_tag, n as u64, probe_idx as u64, run as u64);
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let dist =
                Binomial::new(step.shots, p.clamp(0.0, 1.0)).expect("clamped probability is valid");
            counts[probe_idx] = dist.sample(&mut rng);
        }
        let (p0, _) = estimate_populations(counts[0] as f64, counts[1] as f64)?;
        Ok(p0)
    };
    #[cfg(feature = "parallel")]
    let per_run: Result<Vec<f64>, ExperimentError> = {
        use rayon::prelude::*;
        (0..step.runs).into_par_iter().map(draw).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_run: Result<Vec<f64>, ExperimentError> = (0..step.runs).map(draw).collect();
    let (exact_p0, _) = estimate_populations(p_succ[0], p_succ[1])?;
    Ok((per_run?, exact_p0))
}

fn mean_and_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_algorithm(
    config: &RunConfig,
    algorithm: Algorithm,
) -> Result<PopulationTrajectory, ExperimentError> {
    let mut points = Vec::with_capacity(config.schedule.len());
    for &step in &config.schedule {
        let (per_run, exact_p0) = sampled_step(config, algorithm, step)?;
        let (p0_mean, p0_std) = mean_and_std(&per_run);
        points.push(TrajectoryPoint {
            n_steps: step.n_steps,
            t: step.n_steps as f64 * config.dt,
            shots: step.shots,
            runs: step.runs,
            p0_mean,
            p0_std,
            // Computed as exact complements so p0_mean + p1_mean ≡ 1 and the
            // spreads agree bit for bit (each run's estimate satisfies
            // p1 = 1 − p0).
            p1_mean: 1.0 - p0_mean,
            p1_std: p0_std,
            exact_p0,
        });
    }
    Ok(PopulationTrajectory { algorithm, points })
}

/// Run the configured experiment: always computes the classical oracle
/// trajectory, and — unless the mode is pathsum-only — samples population
/// trajectories for the selected algorithm(s). Deterministic for a fixed
/// config and seed.
pub fn run_experiment(config: &RunConfig) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let oracle = oracle_trajectory(config)?;
    let algorithms: &[Algorithm] = match config.algorithm {
        RunMode::PathsumOnly => &[],
        RunMode::One => &[Algorithm::One],
        RunMode::Two => &[Algorithm::Two],
        RunMode::Both => &[Algorithm::One, Algorithm::Two],
    };
    let mut trajectories = Vec::with_capacity(algorithms.len());
    for &algorithm in algorithms {
        trajectories.push(run_algorithm(config, algorithm)?);
    }
    Ok(ExperimentOutput {
        oracle,
        trajectories,
    })
}

fn header_comment(title: &str, config: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {title}");
    for line in config.echo().lines() {
        let _ = writeln!(out, "# {line}");
    }
    out
}

/// CSV export of the oracle trajectory.
pub fn oracle_csv(config: &RunConfig, points: &[OraclePoint]) -> String {
    let mut out = header_comment("path-sum oracle trajectory", config);
    out.push_str("step,t,p0,p1,re_rho01,im_rho01\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.n_steps, p.t, p.p0, p.p1, p.rho01.re, p.rho01.im
        );
    }
    out
}

/// CSV export of one sampled trajectory.
pub fn trajectory_csv(config: &RunConfig, trajectory: &PopulationTrajectory) -> String {
    let title = match trajectory.algorithm {
        Algorithm::One => "sampled populations, algorithm one",
        Algorithm::Two => "sampled populations, algorithm two",
    };
    let mut out = header_comment(title, config);
    out.push_str("step,t,shots,runs,p0_mean,p0_std,p1_mean,p1_std,exact_p0\n");
    for p in &trajectory.points {
        let _ = writeln!(
            out,
            "{},{:.16e},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.n_steps, p.t, p.shots, p.runs, p.p0_mean, p.p0_std, p.p1_mean, p.p1_std, p.exact_p0
        );
    }
    out
}

/// CSV pairing the two algorithms' run spreads at matched shots. The
/// relative size of the spreads is reported, not asserted.
pub fn std_comparison_csv(
    config: &RunConfig,
    one: &PopulationTrajectory,
    two: &PopulationTrajectory,
) -> String {
    let mut out = header_comment(
        "run standard deviation by algorithm (observational)",
        config,
    );
    out.push_str("step,t,shots,runs,p0_std_one,p0_std_two\n");
    for (a, b) in one.points.iter().zip(&two.points) {
        let _ = writeln!(
            out,
            "{},{:.16e},{},{},{:.16e},{:.16e}",
            a.n_steps, a.t, a.shots, a.runs, a.p0_std, b.p0_std
        );
    }
    out
}

/// Outcome of one verification check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    /// Short stable identifier (e.g. `"factor-product"`).
    pub name: &'static str,
    pub passed: bool,
    /// Largest error the check measured.
    pub measured: f64,
    /// The bound `measured` must stay within.
    pub threshold: f64,
    /// Human-readable context (instance sizes, counts).
    pub detail: String,
}

/// Results of the full verification suite.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    /// True when every check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One line per check: `PASS/FAIL name: measured ≤ threshold (detail)`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} {:<22} measured {:.3e} (threshold {:.3e}) — {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.threshold,
                c.detail
            );
        }
        out
    }
}

/// The pieces the verification suite inspects. [`verify`] builds them
/// honestly from a config; building them by hand (e.g. with a corrupted
/// entry) lets fault-injection tests confirm the checks actually bite.
pub struct VerifyInputs<'a> {
    pub model: &'a SpinBosonModel,
    pub table: &'a CoeffTable,
    pub operators: &'a [CompactOperator],
    pub n_steps: usize,
    pub memory: usize,
}

/// Run the verification suite on a small honest instance derived from the
/// config (N capped at 3) and report every check.
pub fn verify(config: &RunConfig) -> Result<VerifyReport, ExperimentError> {
    config.validate()?;
    let model = config.model()?;
    let n_steps = config
        .schedule
        .iter()
        .map(|s| s.n_steps)
        .max()
        .unwrap_or(1)
        .min(3);
    let memory = config.memory_for(n_steps);
    let table = influence_coefficients(&model.bath, config.dt, n_steps, memory)?;
    let operators = combine(&model, &table, n_steps, memory)?;
    run_checks(&VerifyInputs {
        model: &model,
        table: &table,
        operators: &operators,
        n_steps,
        memory,
    })
}

/// Execute every verification check against the given pipeline pieces.
pub fn run_checks(inputs: &VerifyInputs<'_>) -> Result<VerifyReport, ExperimentError> {
    let checks = vec![
        check_quadrature_refinement(inputs)?,
        check_factor_product(inputs),
        check_dilation_blocks(inputs)?,
        check_walsh_reconstruction(inputs),
        check_gate_counts(inputs)?,
        check_oracle_equivalence(inputs)?,
    ];
    Ok(VerifyReport { checks })
}

/// The coefficient table must agree with a refined quadrature (tighter
/// tolerance, doubled frequency window) to 1e−6 relative.
fn check_quadrature_refinement(inputs: &VerifyInputs<'_>) -> Result<CheckResult, ExperimentError> {
    let refined_options = CoeffOptions {
        omega_max_factor: 100.0,
        rel_tol: 1e-12,
        ..CoeffOptions::default()
    };
    let refined = influence_coefficients_with(
        &inputs.model.bath,
        inputs.table.dt(),
        inputs.n_steps,
        inputs.memory,
        &refined_options,
    )?;
    let mut worst = 0.0f64;
    for (kp, k, alpha) in inputs.table.entries() {
        let better = refined.get(kp, k);
        let denom = better.norm().max(1e-300);
        worst = worst.max((alpha - better).norm() / denom);
    }
    let threshold = 1e-6;
    Ok(CheckResult {
        name: "quadrature-refinement",
        passed: worst <= threshold,
        measured: worst,
        threshold,
        detail: format!(
            "N={}, L={}, {} coefficients vs doubled window at rel 1e-12",
            inputs.n_steps,
            inputs.memory,
            inputs.table.entries().count()
        ),
    })
}

/// The compact operators, multiplied out over every path assignment, must
/// reproduce the direct product of propagator and influence factors.
fn check_factor_product(inputs: &VerifyInputs<'_>) -> CheckResult {
    let model = inputs.model;
    let table = inputs.table;
    let n = model.n_levels();
    let n_steps = inputs.n_steps;
    let u = crate::pathsum::bare_propagator(model);
    let s = &model.dvr_values;
    let slots = 2 * (n_steps + 1);
    let mut worst = 0.0f64;
    for assign in 0..n.pow(slots as u32) {
        let mut digits = vec![0usize; slots];
        let mut rest = assign;
        for d in (0..slots).rev() {
            digits[d] = rest % n;
            rest /= n;
        }
        let f = |k: usize| digits[2 * k];
        let b = |k: usize| digits[2 * k + 1];
        let mut lhs = C64::new(1.0, 0.0);
        for op in inputs.operators {
            let (k, kp) = op.pair();
            let idx = ((f(kp) * n + b(kp)) * n + f(k)) * n + b(k);
            lhs *= op.diagonal().entries()[idx] * op.scale();
        }
        let mut rhs = C64::new(1.0, 0.0);
        for k in 0..n_steps {
            rhs *= u[f(k + 1) * n + f(k)] * u[b(k + 1) * n + b(k)].conj();
        }
        for kp in 0..=n_steps {
            for k in kp.saturating_sub(inputs.memory)..=kp {
                rhs *= crate::pathsum::influence_factor(
                    kp,
                    k,
                    s[f(kp)],
                    s[b(kp)],
                    s[f(k)],
                    s[b(k)],
                    table,
                );
            }
        }
        worst = worst.max((lhs - rhs).norm());
    }
    let threshold = 1e-12;
    CheckResult {
        name: "factor-product",
        passed: worst <= threshold,
        measured: worst,
        threshold,
        detail: format!(
            "{} operators over {} path assignments",
            inputs.operators.len(),
            n.pow(slots as u32)
        ),
    }
}

/// Each compact operator synthesized on a fresh small register must encode
/// its rescaled diagonal in the upper-left block.
fn check_dilation_blocks(inputs: &VerifyInputs<'_>) -> Result<CheckResult, ExperimentError> {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for op in inputs.operators.iter().take(3) {
        let q = op.diagonal().q();
        let dim = op.diagonal().dim();
        let targets: Vec<usize> = (1..=q).collect();
        let standalone = crate::synthesis::DiagonalOp::new(
            op.diagonal()
                .entries()
                .iter()
                .map(|e| e * op.scale())
                .collect(),
            targets.clone(),
        )?;
        let circuit = crate::synthesis::synthesize_diagonal(&standalone, q + 1, &targets, 0);
        let unitary = unitary_of(&circuit)?;
        let full = 1usize << (q + 1);
        for i in 0..dim {
            for j in 0..dim {
                let got = unitary[i * full + j];
                let want = if i == j {
                    standalone.entries()[i]
                } else {
                    C64::new(0.0, 0.0)
                };
                worst = worst.max((got - want).norm());
            }
        }
        checked += 1;
    }
    let threshold = 1e-10;
    Ok(CheckResult {
        name: "dilation-block",
        passed: worst <= threshold,
        measured: worst,
        threshold,
        detail: format!("{checked} operators rebuilt standalone and read back via unitary"),
    })
}

/// Walsh coefficients of each dilated operator must reconstruct its phases.
fn check_walsh_reconstruction(inputs: &VerifyInputs<'_>) -> CheckResult {
    let mut worst = 0.0f64;
    for op in inputs.operators.iter().take(3) {
        let phases: Vec<f64> = dilate(op.diagonal()).iter().map(|e| e.arg()).collect();
        let spec = walsh_coefficients(&phases).expect("power-of-two dilated table");
        for (orig, rec) in phases.iter().zip(spec.reconstruct_phases()) {
            worst = worst.max((orig - rec).abs());
        }
    }
    let threshold = 1e-12;
    CheckResult {
        name: "walsh-reconstruction",
        passed: worst <= threshold,
        measured: worst,
        threshold,
        detail: "round trip phases → coefficients → phases on dilated operators".into(),
    }
}

/// Dense-path gate counts must equal the closed forms (including the
/// standalone dense Walsh network, 2^{q+1}−3 at q = 3).
fn check_gate_counts(inputs: &VerifyInputs<'_>) -> Result<CheckResult, ExperimentError> {
    let n = inputs.model.n_levels();
    let report: ResourceReport = resource_counts(n, inputs.n_steps, inputs.memory, Algorithm::One)?;
    let dense = assemble_probe_circuit_with(n, inputs.n_steps, inputs.operators, 0, 0, 0.0)?;
    let mut mismatch = 0usize;
    if dense.n_qubits() != report.qubits {
        mismatch += 1;
    }
    if dense.gate_counts().native() != report.native_gates {
        mismatch += 1;
    }
    let two = extend_to_readout(&dense)?;
    let report2 = resource_counts(n, inputs.n_steps, inputs.memory, Algorithm::Two)?;
    if two.gate_counts().toffoli != report2.toffolis || two.n_qubits() != report2.qubits {
        mismatch += 1;
    }
    // Standalone dense Walsh instance: 13 native gates on 3 qubits.
    let phases: Vec<f64> = (0..8).map(|k| 0.1 + 0.37 * k as f64).collect();
    let spec = walsh_coefficients(&phases).expect("power-of-two table");
    let walsh_count = walsh_circuit_with_threshold(&spec, 3, &[0, 1, 2], 0.0)
        .gate_counts()
        .native();
    if walsh_count != dense_walsh_native_count(3) {
        mismatch += 1;
    }
    Ok(CheckResult {
        name: "gate-counts",
        passed: mismatch == 0,
        measured: mismatch as f64,
        threshold: 0.0,
        detail: format!(
            "dense builds: {} qubits / {} native (algorithm one), {} toffolis \
             (algorithm two), {} native for the 3-qubit dense network (expect {})",
            dense.n_qubits(),
            dense.gate_counts().native(),
            two.gate_counts().toffoli,
            walsh_count,
            dense_walsh_native_count(3),
        ),
    })
}

/// Populations measured from the circuits must match the path-sum oracle.
fn check_oracle_equivalence(inputs: &VerifyInputs<'_>) -> Result<CheckResult, ExperimentError> {
    let n = inputs.model.n_levels();
    let rho = rdm_pathsum(inputs.model, inputs.table, inputs.n_steps, (0, 0))?;
    let zero = assemble_probe_circuit(n, inputs.n_steps, inputs.operators, 0, 0)?;
    let one = assemble_probe_circuit(n, inputs.n_steps, inputs.operators, 0, 1)?;
    let s0 = exact_success_probability_with_cap(&zero, DEFAULT_SIM_QUBITS)?;
    let s1 = exact_success_probability_with_cap(&one, DEFAULT_SIM_QUBITS)?;
    let (p0, p1) = estimate_populations(s0, s1)?;
    let worst = (p0 - rho.population(0))
        .abs()
        .max((p1 - rho.population(1)).abs());
    let threshold = 1e-8;
    Ok(CheckResult {
        name: "oracle-equivalence",
        passed: worst <= threshold,
        measured: worst,
        threshold,
        detail: format!(
            "algorithm-one populations vs path sum at N={}, L={}",
            inputs.n_steps, inputs.memory
        ),
    })
}

/// Closed-form resource table for the configured sizes, one row per
/// scheduled step: (step, algorithm-one report, algorithm-two report).
pub fn resource_table(
    config: &RunConfig,
) -> Result<Vec<(usize, ResourceReport, ResourceReport)>, ExperimentError> {
    config.validate()?;
    let mut rows = Vec::new();
    for step in &config.schedule {
        let n = step.n_steps;
        let memory = config.memory_for(n);
        rows.push((
            n,
            resource_counts(config.n_levels, n, memory, Algorithm::One)?,
            resource_counts(config.n_levels, n, memory, Algorithm::Two)?,
        ));
    }
    Ok(rows)
}

/// Number of compact operators at the largest scheduled step (a cheap size
/// hint for callers).
pub fn max_operator_count(config: &RunConfig) -> usize {
    config
        .schedule
        .iter()
        .map(|s| operator_count(s.n_steps, config.memory_for(s.n_steps)))
        .max()
        .unwrap_or(0)
}
