//! Ohmic bath spectral density and the discretized influence-functional
//! coefficients α_{k'k}.
//!
//! Every coefficient is a frequency integral of the spectral density against a
//! kernel fixed by the pair of time points it couples. The integrals are
//! defined over the whole real line with the odd extension J(−ω) = −J(ω); here
//! they are folded onto [0, ∞) by splitting the integrand into even and odd
//! parts (the odd part cancels), leaving one of two even one-sided forms:
//!
//! * diagonal pairs (k = k'), offset δ ∈ {Δt, Δt/2}:
//!   α = (1/π) ∫₀^∞ j(ω) · [coth(βω/2)·(1 − cos ωδ) + i·sin ωδ] dω
//! * off-diagonal pairs, sine weights (a, b) and phase time τ:
//!   α = (4/π) ∫₀^∞ j(ω) · sin(aω)·sin(bω) · [coth(βω/2)·cos ωτ − i·sin ωτ] dω
//!
//! with j(ω) = J(ω)/ω². The (a, b, τ) assignments are:
//!
//! * interior pair separation d = k'−k: a = b = Δt/2, τ = d·Δt
//! * first-row / last-column pairs (k, 0) and (N, N−k): a = Δt/4, b = Δt/2,
//!   τ = k·Δt − Δt/4 (the two families share one integral per separation)
//! * the corner pair (N, 0): a = b = Δt/4, τ = N·Δt − Δt/2
//!
//! All integrands have a removable singularity at ω = 0 (j ~ 1/ω, the thermal
//! factor ~ 1/ω, and the trigonometric weights supply ω²); the kernels below
//! return the analytic limit there, although the Gauss–Kronrod nodes used in
//! production never land on 0.

use std::fmt::Write as _;

use thiserror::Error;

use crate::quad::integrate_adaptive;
use crate::C64;

/// Errors from bath construction and coefficient evaluation.
#[derive(Debug, Error)]
pub enum BathError {
    /// A model or window parameter is out of range.
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// The (N, L) window is malformed.
    #[error("invalid coefficient window: n_steps = {n_steps}, memory = {memory} (need n_steps ≥ 1 and 1 ≤ memory ≤ n_steps)")]
    InvalidWindow { n_steps: usize, memory: usize },
    /// The adaptive quadrature exhausted its panel budget before reaching the
    /// tolerance for the entry (kp, k).
    #[error("quadrature for α({kp},{k}) did not converge: error estimate {achieved:.3e} on a value of modulus {magnitude:.3e}")]
    NotConverged {
        kp: usize,
        k: usize,
        achieved: f64,
        magnitude: f64,
    },
}

/// Ohmic bath J(ω) = (π/2)·ξ·ω·e^{−ω/ω_c} with inverse temperature β (ħ = 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicBath {
    /// Dimensionless Kondo parameter ξ ≥ 0.
    pub xi: f64,
    /// Cutoff frequency ω_c > 0.
    pub omega_c: f64,
    /// Inverse temperature β > 0 (units of 1/ω).
    pub beta: f64,
}

impl OhmicBath {
    /// Validating constructor.
    pub fn new(xi: f64, omega_c: f64, beta: f64) -> Result<Self, BathError> {
        let bath = OhmicBath { xi, omega_c, beta };
        bath.validate()?;
        Ok(bath)
    }

    /// Check the parameter invariants (also rejects NaN).
    pub fn validate(&self) -> Result<(), BathError> {
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(BathError::InvalidParameter {
                name: "xi",
                value: self.xi,
                reason: "Kondo parameter must be finite and ≥ 0",
            });
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(BathError::InvalidParameter {
                name: "omega_c",
                value: self.omega_c,
                reason: "cutoff frequency must be finite and > 0",
            });
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(BathError::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "inverse temperature must be finite and > 0",
            });
        }
        Ok(())
    }
}

/// Spectral density with odd extension: J(ω) = (π/2)·ξ·ω·e^{−|ω|/ω_c}.
///
/// The ω prefactor makes the odd symmetry J(−ω) = −J(ω) automatic.
pub fn spectral_density(omega: f64, bath: &OhmicBath) -> f64 {
    std::f64::consts::FRAC_PI_2 * bath.xi * omega * (-omega.abs() / bath.omega_c).exp()
}

/// Tuning knobs for the coefficient quadrature.
#[derive(Debug, Clone, Copy)]
pub struct CoeffOptions {
    /// Upper integration limit as a multiple of ω_c (the integrand carries
    /// e^{−ω/ω_c}, so 50 decay lengths is far past double precision).
    pub omega_max_factor: f64,
    /// Per-entry relative tolerance on the integral value.
    pub rel_tol: f64,
    /// Per-entry absolute tolerance; 0 keeps termination scale-invariant so
    /// that entries stay exactly linear in ξ.
    pub abs_tol: f64,
    /// Panel budget per entry before reporting non-convergence.
    pub max_panels: usize,
}

impl Default for CoeffOptions {
    fn default() -> Self {
        CoeffOptions {
            omega_max_factor: 50.0,
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_panels: 200_000,
        }
    }
}

/// Influence-functional coefficients α_{k'k} for a fixed (N, Δt, L, bath).
///
/// Stores every pair 0 ≤ k ≤ k' ≤ N with k'−k ≤ L; queries outside that
/// window return exactly 0, which is precisely the memory truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffTable {
    n_steps: usize,
    dt: f64,
    memory: usize,
    /// Dense row-major (N+1)×(N+1); only the in-window lower triangle is
    /// nonzero.
    data: Vec<C64>,
}

impl CoeffTable {
    /// Number of propagation steps N.
    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    /// Time step Δt.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Memory length L.
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// α_{k'k} for the pair (kp, k); exactly 0 outside the stored window
    /// (kp < k, kp > N, or kp − k > L).
    pub fn get(&self, kp: usize, k: usize) -> C64 {
        if kp > self.n_steps || k > kp || kp - k > self.memory {
            return C64::new(0.0, 0.0);
        }
        self.data[kp * (self.n_steps + 1) + k]
    }

    /// All stored (k', k, α) triples, ascending in k' then k.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        let n = self.n_steps;
        let l = self.memory;
        (0..=n)
            .flat_map(move |kp| (kp.saturating_sub(l)..=kp).map(move |k| (kp, k, self.get(kp, k))))
    }

    /// CSV dump: header plus one `kp,k,re_alpha,im_alpha` row per stored
    /// entry, floats at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kp,k,re_alpha,im_alpha\n");
        for (kp, k, v) in self.entries() {
            // Writing to a String cannot fail.
            let _ = writeln!(out, "{},{},{:.16e},{:.16e}", kp, k, v.re, v.im);
        }
        out
    }
}

/// One distinct frequency integral, shared by all table entries whose kernel
/// parameters coincide.
#[derive(Debug, Clone, Copy)]
enum Kernel {
    /// Diagonal form with trig offset δ.
    Diagonal { delta: f64 },
    /// Off-diagonal form sin(aω)·sin(bω) with phase time τ.
    OffDiagonal { a: f64, b: f64, tau: f64 },
}

impl Kernel {
    /// Even one-sided integrand value at frequency ω ≥ 0 (analytic limit at
    /// ω = 0, where the singularity is removable).
    fn eval(&self, bath: &OhmicBath, omega: f64) -> C64 {
        if omega == 0.0 {
            return match *self {
                Kernel::Diagonal { delta } => C64::new(
                    bath.xi * delta * delta / (2.0 * bath.beta),
                    bath.xi * delta / 2.0,
                ),
                Kernel::OffDiagonal { a, b, .. } => {
                    C64::new(4.0 * bath.xi * a * b / bath.beta, 0.0)
                }
            };
        }
        // j(ω) = J(ω)/ω²; coth computed as 1/tanh, which is overflow-safe at
        // large βω and accurate down to the smallest quadrature node.
        let j = spectral_density(omega, bath) / (omega * omega);
        let coth = 1.0 / (0.5 * bath.beta * omega).tanh();
        match *self {
            Kernel::Diagonal { delta } => {
                // 1 − cos(ωδ) written as 2·sin²(ωδ/2) to avoid cancellation.
                let one_minus_cos = 2.0 * (0.5 * omega * delta).sin().powi(2);
                C64::new(coth * one_minus_cos, (omega * delta).sin()) * (j / std::f64::consts::PI)
            }
            Kernel::OffDiagonal { a, b, tau } => {
                let w = (a * omega).sin() * (b * omega).sin();
                let (s, c) = (omega * tau).sin_cos();
                C64::new(coth * c, -s) * (4.0 / std::f64::consts::PI * j * w)
            }
        }
    }

    /// Characteristic oscillation time of the integrand, used to seed the
    /// adaptive subdivision with enough panels per period.
    fn oscillation_time(&self) -> f64 {
        match *self {
            Kernel::Diagonal { delta } => delta,
            Kernel::OffDiagonal { a, b, tau } => tau + a + b,
        }
    }
}

/// A distinct integral plus every table slot it populates.
#[derive(Debug)]
struct Job {
    kernel: Kernel,
    targets: Vec<(usize, usize)>,
}

/// Enumerate the distinct integrals for a window (N, L). Interior
/// off-diagonal entries depend only on the separation k'−k, and the first-row
/// and last-column families share one integral per separation, so the job
/// list is far shorter than the entry list.
fn build_jobs(dt: f64, n: usize, l: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    // Endpoint diagonals α_00 = α_NN (half-step offset).
    jobs.push(Job {
        kernel: Kernel::Diagonal { delta: 0.5 * dt },
        targets: vec![(0, 0), (n, n)],
    });
    // Interior diagonals α_kk, 0 < k < N.
    if n >= 2 {
        jobs.push(Job {
            kernel: Kernel::Diagonal { delta: dt },
            targets: (1..n).map(|k| (k, k)).collect(),
        });
    }
    // Interior off-diagonals 0 < k < k' < N, one integral per separation d.
    if n >= 3 {
        for d in 1..=l.min(n - 2) {
            jobs.push(Job {
                kernel: Kernel::OffDiagonal {
                    a: 0.5 * dt,
                    b: 0.5 * dt,
                    tau: d as f64 * dt,
                },
                targets: (1..n - d).map(|k| (k + d, k)).collect(),
            });
        }
    }
    // Edge pairs (m, 0) and (N, N−m), 0 < m < N: identical integrals.
    for m in 1..=l.min(n.saturating_sub(1)) {
        jobs.push(Job {
            kernel: Kernel::OffDiagonal {
                a: 0.25 * dt,
                b: 0.5 * dt,
                tau: m as f64 * dt - 0.25 * dt,
            },
            targets: vec![(m, 0), (n, n - m)],
        });
    }
    // Corner pair (N, 0), present only when the window spans the whole range.
    if n <= l {
        jobs.push(Job {
            kernel: Kernel::OffDiagonal {
                a: 0.25 * dt,
                b: 0.25 * dt,
                tau: n as f64 * dt - 0.5 * dt,
            },
            targets: vec![(n, 0)],
        });
    }
    jobs
}

/// Evaluate one job's integral over [0, ω_max].
fn solve_job(job: &Job, bath: &OhmicBath, opts: &CoeffOptions) -> Result<C64, BathError> {
    let omega_max = opts.omega_max_factor * bath.omega_c;
    let periods = omega_max * job.kernel.oscillation_time() / std::f64::consts::TAU;
    let init_panels = ((2.0 * periods).ceil() as usize).clamp(16, 8192);
    let f = |omega: f64| job.kernel.eval(bath, omega);
    let result = integrate_adaptive(
        &f,
        0.0,
        omega_max,
        opts.rel_tol,
        opts.abs_tol,
        init_panels,
        opts.max_panels,
    );
    if !result.converged {
        let (kp, k) = job.targets[0];
        return Err(BathError::NotConverged {
            kp,
            k,
            achieved: result.abs_error,
            magnitude: result.value.norm(),
        });
    }
    Ok(result.value)
}

fn validate_window(dt: f64, n_steps: usize, memory: usize) -> Result<(), BathError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(BathError::InvalidParameter {
            name: "dt",
            value: dt,
            reason: "time step must be finite and > 0",
        });
    }
    if n_steps < 1 || memory < 1 || memory > n_steps {
        return Err(BathError::InvalidWindow { n_steps, memory });
    }
    Ok(())
}

fn assemble(dt: f64, n_steps: usize, memory: usize, values: Vec<C64>, jobs: &[Job]) -> CoeffTable {
    let stride = n_steps + 1;
    let mut data = vec![C64::new(0.0, 0.0); stride * stride];
    for (job, value) in jobs.iter().zip(values) {
        for &(kp, k) in &job.targets {
            data[kp * stride + k] = value;
        }
    }
    CoeffTable {
        n_steps,
        dt,
        memory,
        data,
    }
}

/// Compute the coefficient table with default quadrature options.
pub fn influence_coefficients(
    bath: &OhmicBath,
    dt: f64,
    n_steps: usize,
    memory: usize,
) -> Result<CoeffTable, BathError> {
    influence_coefficients_with(bath, dt, n_steps, memory, &CoeffOptions::default())
}

/// Compute the coefficient table with explicit quadrature options. Distinct
/// integrals are evaluated in parallel when the `parallel` feature is on; the
/// per-integral algorithm is identical either way, so results are bitwise
/// reproducible.
pub fn influence_coefficients_with(
    bath: &OhmicBath,
    dt: f64,
    n_steps: usize,
    memory: usize,
    opts: &CoeffOptions,
) -> Result<CoeffTable, BathError> {
    bath.validate()?;
    validate_window(dt, n_steps, memory)?;
    if bath.xi == 0.0 {
        // J ≡ 0 kills every integrand; return exact zeros.
        return Ok(assemble(dt, n_steps, memory, Vec::new(), &[]));
    }
    let jobs = build_jobs(dt, n_steps, memory);
    #[cfg(feature = "parallel")]
    let values = {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|job| solve_job(job, bath, opts))
            .collect::<Result<Vec<_>, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values = jobs
        .iter()
        .map(|job| solve_job(job, bath, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(dt, n_steps, memory, values, &jobs))
}

/// Sequential twin of [`influence_coefficients_with`], available regardless
/// of the `parallel` feature; used for benchmarking and determinism checks.
pub fn influence_coefficients_seq(
    bath: &OhmicBath,
    dt: f64,
    n_steps: usize,
    memory: usize,
    opts: &CoeffOptions,
) -> Result<CoeffTable, BathError> {
    bath.validate()?;
    validate_window(dt, n_steps, memory)?;
    if bath.xi == 0.0 {
        return Ok(assemble(dt, n_steps, memory, Vec::new(), &[]));
    }
    let jobs = build_jobs(dt, n_steps, memory);
    let values = jobs
        .iter()
        .map(|job| solve_job(job, bath, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(assemble(dt, n_steps, memory, values, &jobs))
}
