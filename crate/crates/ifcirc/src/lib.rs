//! Influence-functional path-integral dynamics compiled to exact shallow
//! quantum circuits.
//!
//! The crate is organized as a pipeline:
//!
//! 1. [`bath`] — Ohmic spectral density and the discretized
//!    influence-functional coefficients α_{k'k}, computed by adaptive
//!    Gauss–Kronrod quadrature.
//! 2. [`pathsum`] — classical brute-force forward–backward path sum over the
//!    discretized influence functional; the exact oracle every circuit result
//!    is validated against.
//! 3. [`circuit`] — minimal gate IR (H, X, RZ, CNOT, TOFFOLI, GLOBAL_PHASE),
//!    a dense statevector simulator, a shot sampler, and small-circuit
//!    unitary extraction.
//! 4. [`synthesis`] — exact compilation of an arbitrary complex diagonal
//!    operator: rescale, unitary dilation, Walsh-series phase synthesis with
//!    Gray-code CNOT cancellation.
//! 5. [`algorithms`] — assembly of the two measurement algorithms from
//!    combined two-timepoint diagonal operators, population post-processing,
//!    and closed-form resource counts.
//! 6. [`experiment`] — configuration-driven experiment runner: shot
//!    schedules, multi-run statistics, CSV export, and the self-check
//!    report.
//!
//! With the default `parallel` feature the hot kernels (coefficient
//! quadrature, path enumeration, statevector gate application, sampling
//! runs) run on rayon; every parallel entry point has a sequential twin
//! (`*_seq`) that is bitwise-identical in output and serves as both the
//! fallback when the feature is disabled and the baseline for the bench
//! suite.

pub mod algorithms;
pub mod bath;
pub mod circuit;
pub mod experiment;
pub mod pathsum;
mod quad;
pub mod synthesis;

/// Complex double-precision scalar used throughout.
pub type C64 = num_complex::Complex64;
