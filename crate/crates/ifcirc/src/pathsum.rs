//! Classical brute-force path-sum engine.
//!
//! The reduced density matrix after N steps is the sum over all pairs of
//! forward/backward system paths (s_0^±, …, s_N^±) of
//!
//!   ⟨s_0^+|ρ(0)|s_0^−⟩ · Π_k ⟨s_{k+1}^+|U|s_k^+⟩⟨s_k^−|U†|s_{k+1}^−⟩
//!                       · Π_{k ≤ k', k'−k ≤ L} I_{k,k'}(s_{k'}^±, s_k^±)
//!
//! with the per-pair influence factor
//!
//!   I_{k,k'} = exp[−(s_{k'}^+ − s_{k'}^−)·(α_{k'k}·s_k^+ − α*_{k'k}·s_k^−)]
//!
//! (ħ = 1). This scales exponentially in N and is used as the exact oracle
//! that every quantum-circuit result is validated against.

use thiserror::Error;

use crate::bath::{BathError, CoeffTable, OhmicBath};
use crate::C64;

/// Default cap on N·log2(n); path enumeration costs n^(2N) = 4^(N·log2 n).
pub const DEFAULT_PATH_BUDGET: usize = 8;

/// Errors from model construction and path summation.
#[derive(Debug, Error)]
pub enum PathsumError {
    /// A model parameter is out of range.
    #[error("invalid model: {reason}")]
    InvalidModel { reason: &'static str },
    /// Bath parameters rejected by the bath module.
    #[error(transparent)]
    Bath(#[from] BathError),
    /// The requested enumeration exceeds the path budget.
    #[error("path enumeration budget exceeded: N·log2(n) = {cost} > cap {cap}")]
    BudgetExceeded { cost: usize, cap: usize },
    /// The coefficient table was built for a different discretization.
    #[error("coefficient table mismatch: table has N = {table_n}, Δt = {table_dt}; requested N = {n}, Δt = {dt}")]
    TableMismatch {
        table_n: usize,
        table_dt: f64,
        n: usize,
        dt: f64,
    },
    /// An initial/probe basis index is out of range.
    #[error("basis index {index} out of range for {n_levels} levels")]
    InvalidBasisIndex { index: usize, n_levels: usize },
}

/// System + bath + discretization parameters.
///
/// The system Hamiltonian is the symmetric off-diagonal coupling
/// H_s = −Ω·Σ_i (|i⟩⟨i+1| + |i+1⟩⟨i|), which for two levels is −Ω·σ_x; the
/// DVR eigenvalues s_i are the path coordinates the bath couples to (for two
/// levels, +1 and −1).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinBosonModel {
    /// Rabi frequency Ω of the off-diagonal system coupling.
    pub omega_rabi: f64,
    /// DVR eigenvalues s_i, one per system level, pairwise distinct.
    pub dvr_values: Vec<f64>,
    /// Bath parameters.
    pub bath: OhmicBath,
    /// Time step Δt.
    pub dt: f64,
}

impl SpinBosonModel {
    /// Validating constructor.
    pub fn new(
        omega_rabi: f64,
        dvr_values: Vec<f64>,
        bath: OhmicBath,
        dt: f64,
    ) -> Result<Self, PathsumError> {
        if !omega_rabi.is_finite() {
            return Err(PathsumError::InvalidModel {
                reason: "omega_rabi must be finite",
            });
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PathsumError::InvalidModel {
                reason: "dt must be finite and > 0",
            });
        }
        if dvr_values.len() < 2 {
            return Err(PathsumError::InvalidModel {
                reason: "need at least 2 DVR values",
            });
        }
        if dvr_values.iter().any(|s| !s.is_finite()) {
            return Err(PathsumError::InvalidModel {
                reason: "DVR values must be finite",
            });
        }
        for (i, a) in dvr_values.iter().enumerate() {
            if dvr_values[i + 1..].contains(a) {
                return Err(PathsumError::InvalidModel {
                    reason: "DVR values must be distinct",
                });
            }
        }
        bath.validate()?;
        Ok(SpinBosonModel {
            omega_rabi,
            dvr_values,
            bath,
            dt,
        })
    }

    /// The standard two-level model with DVR values (+1, −1).
    pub fn two_level(omega_rabi: f64, bath: OhmicBath, dt: f64) -> Result<Self, PathsumError> {
        SpinBosonModel::new(omega_rabi, vec![1.0, -1.0], bath, dt)
    }

    /// Number of system levels n.
    pub fn n_levels(&self) -> usize {
        self.dvr_values.len()
    }
}

/// The system's reduced density matrix, indexed by (s_N^+, s_N^−).
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedDensityMatrix {
    n: usize,
    entries: Vec<C64>,
}

impl ReducedDensityMatrix {
    fn new(n: usize, entries: Vec<C64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        ReducedDensityMatrix { n, entries }
    }

    /// Number of levels n.
    pub fn n_levels(&self) -> usize {
        self.n
    }

    /// Matrix element ⟨i|ρ|j⟩.
    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.n + j]
    }

    /// Population of level i (the real part of the diagonal entry).
    pub fn population(&self, i: usize) -> f64 {
        self.entry(i, i).re
    }

    /// Σ_i ⟨i|ρ|i⟩.
    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self.entry(i, i)).sum()
    }

    /// max_ij |ρ_ij − conj(ρ_ji)|.
    pub fn max_hermiticity_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                worst = worst.max((self.entry(i, j) - self.entry(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// Short-time bare propagator U = exp(−i·H_s·Δt), row-major n×n
/// (U[i·n + j] = ⟨i|U|j⟩).
///
/// Two levels use the closed form cos(ΩΔt)·I + i·sin(ΩΔt)·σ_x; larger n go
/// through an eigendecomposition of the real-symmetric H_s.
pub fn bare_propagator(model: &SpinBosonModel) -> Vec<C64> {
    let n = model.n_levels();
    if n == 2 {
        let (s, c) = (model.omega_rabi * model.dt).sin_cos();
        return vec![
            C64::new(c, 0.0),
            C64::new(0.0, s),
            C64::new(0.0, s),
            C64::new(c, 0.0),
        ];
    }
    // H_s = −Ω·(nearest-neighbor hopping), real symmetric.
    let mut h = vec![0.0; n * n];
    for i in 0..n - 1 {
        h[i * n + i + 1] = -model.omega_rabi;
        h[(i + 1) * n + i] = -model.omega_rabi;
    }
    let (eigvals, v) = sym_eigen(h, n);
    // U = V · diag(e^{−iλΔt}) · Vᵀ with V real orthogonal.
    let mut u = vec![C64::new(0.0, 0.0); n * n];
    for m in 0..n {
        let phase = C64::new(0.0, -eigvals[m] * model.dt).exp();
        for i in 0..n {
            for j in 0..n {
                u[i * n + j] += phase * v[i * n + m] * v[j * n + m];
            }
        }
    }
    u
}

/// Cyclic Jacobi eigendecomposition of a real symmetric matrix (row-major).
/// Returns (eigenvalues, V) with V's columns the corresponding eigenvectors.
fn sym_eigen(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..64 {
        let off: f64 = (0..n)
            .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i * n + p];
                    let aiq = a[i * n + q];
                    a[i * n + p] = c * aip - s * aiq;
                    a[i * n + q] = s * aip + c * aiq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let eig = (0..n).map(|i| a[i * n + i]).collect();
    (eig, v)
}

/// Per-pair influence factor
/// I_{k,k'} = exp[−(s_{k'}^+ − s_{k'}^−)·(α_{k'k}·s_k^+ − α*_{k'k}·s_k^−)].
///
/// Outside the table's memory window α = 0 and the factor is exactly 1.
pub fn influence_factor(
    kp: usize,
    k: usize,
    s_kp_plus: f64,
    s_kp_minus: f64,
    s_k_plus: f64,
    s_k_minus: f64,
    table: &CoeffTable,
) -> C64 {
    let alpha = table.get(kp, k);
    let ds = s_kp_plus - s_kp_minus;
    (-(alpha * s_k_plus - alpha.conj() * s_k_minus) * ds).exp()
}

/// Amplitude of one forward/backward path pair (DVR indices, length N+1
/// each). `initial` selects ⟨s_0^+|ρ(0)|s_0^−⟩ = δ: the amplitude is zero
/// unless the path starts at exactly that basis pair.
pub fn path_amplitude(
    forward: &[usize],
    backward: &[usize],
    model: &SpinBosonModel,
    table: &CoeffTable,
    initial: (usize, usize),
) -> C64 {
    assert_eq!(forward.len(), backward.len());
    assert!(!forward.is_empty());
    let n = model.n_levels();
    let n_steps = forward.len() - 1;
    if (forward[0], backward[0]) != initial {
        return C64::new(0.0, 0.0);
    }
    let u = bare_propagator(model);
    let mut amp = C64::new(1.0, 0.0);
    for k in 0..n_steps {
        // ⟨s_{k+1}^+|U|s_k^+⟩ · ⟨s_k^−|U†|s_{k+1}^−⟩
        amp *= u[forward[k + 1] * n + forward[k]] * u[backward[k + 1] * n + backward[k]].conj();
    }
    let s = &model.dvr_values;
    for kp in 0..=n_steps {
        for k in kp.saturating_sub(table.memory())..=kp {
            amp *= influence_factor(
                kp,
                k,
                s[forward[kp]],
                s[backward[kp]],
                s[forward[k]],
                s[backward[k]],
                table,
            );
        }
    }
    amp
}

/// Everything the inner enumeration loop needs, precomputed.
struct PathEngine {
    n: usize,
    n_steps: usize,
    u: Vec<C64>,
    /// In-window pairs (k', k) with a dense n⁴ factor table each, indexed
    /// (((s'⁺·n + s'⁻)·n + s⁺)·n + s⁻) over DVR indices.
    pairs: Vec<(usize, usize, Vec<C64>)>,
    initial: (usize, usize),
}

impl PathEngine {
    fn build(
        model: &SpinBosonModel,
        table: &CoeffTable,
        n_steps: usize,
        initial: (usize, usize),
    ) -> Self {
        let n = model.n_levels();
        let s = &model.dvr_values;
        let mut pairs = Vec::new();
        for kp in 0..=n_steps {
            for k in kp.saturating_sub(table.memory())..=kp {
                let mut fac = Vec::with_capacity(n * n * n * n);
                for spp in 0..n {
                    for spm in 0..n {
                        for sp in 0..n {
                            for sm in 0..n {
                                fac.push(influence_factor(
                                    kp, k, s[spp], s[spm], s[sp], s[sm], table,
                                ));
                            }
                        }
                    }
                }
                pairs.push((kp, k, fac));
            }
        }
        PathEngine {
            n,
            n_steps,
            u: bare_propagator(model),
            pairs,
            initial,
        }
    }

    /// Sum amplitudes for combined path indices in [start, end) into a local
    /// n×n accumulator. The combined index runs over the 2N interior+final
    /// digits (s_1^+.. s_N^+, s_1^−.. s_N^−), forward digits most
    /// significant.
    fn chunk_sum(&self, start: usize, end: usize) -> Vec<C64> {
        let n = self.n;
        let mut local = vec![C64::new(0.0, 0.0); n * n];
        let mut f = vec![0usize; self.n_steps + 1];
        let mut b = vec![0usize; self.n_steps + 1];
        f[0] = self.initial.0;
        b[0] = self.initial.1;
        for idx in start..end {
            let mut rem = idx;
            for k in (1..=self.n_steps).rev() {
                b[k] = rem % n;
                rem /= n;
            }
            for k in (1..=self.n_steps).rev() {
                f[k] = rem % n;
                rem /= n;
            }
            let mut amp = C64::new(1.0, 0.0);
            for k in 0..self.n_steps {
                amp *= self.u[f[k + 1] * n + f[k]] * self.u[b[k + 1] * n + b[k]].conj();
            }
            for (kp, k, fac) in &self.pairs {
                amp *= fac[((f[*kp] * n + b[*kp]) * n + f[*k]) * n + b[*k]];
            }
            local[f[self.n_steps] * n + b[self.n_steps]] += amp;
        }
        local
    }
}

fn check_inputs(
    model: &SpinBosonModel,
    table: &CoeffTable,
    n_steps: usize,
    initial: (usize, usize),
    cap: usize,
) -> Result<(), PathsumError> {
    let n = model.n_levels();
    for index in [initial.0, initial.1] {
        if index >= n {
            return Err(PathsumError::InvalidBasisIndex { index, n_levels: n });
        }
    }
    if n_steps == 0 {
        return Ok(());
    }
    if table.n_steps() != n_steps || table.dt() != model.dt {
        return Err(PathsumError::TableMismatch {
            table_n: table.n_steps(),
            table_dt: table.dt(),
            n: n_steps,
            dt: model.dt,
        });
    }
    // n^(2N) paths; budget in units of N·log2(n).
    let cost = n_steps * (usize::BITS - (n - 1).leading_zeros()) as usize;
    if cost > cap {
        return Err(PathsumError::BudgetExceeded { cost, cap });
    }
    Ok(())
}

const CHUNK: usize = 1024;

fn rdm_core(
    model: &SpinBosonModel,
    table: &CoeffTable,
    n_steps: usize,
    initial: (usize, usize),
    cap: usize,
    parallel: bool,
) -> Result<ReducedDensityMatrix, PathsumError> {
    check_inputs(model, table, n_steps, initial, cap)?;
    let n = model.n_levels();
    if n_steps == 0 {
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        entries[initial.0 * n + initial.1] = C64::new(1.0, 0.0);
        return Ok(ReducedDensityMatrix::new(n, entries));
    }
    let engine = PathEngine::build(model, table, n_steps, initial);
    let total = n.pow(2 * n_steps as u32);
    let ranges: Vec<(usize, usize)> = (0..total)
        .step_by(CHUNK)
        .map(|start| (start, (start + CHUNK).min(total)))
        .collect();
    // Chunk partials are combined in index order whether or not the chunks
    // were computed in parallel, so the result is bitwise reproducible.
    let locals: Vec<Vec<C64>> = if parallel {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            ranges
                .par_iter()
                .map(|&(s, e)| engine.chunk_sum(s, e))
                .collect()
        }
        #[cfg(not(feature = "parallel"))]
        ranges
            .iter()
            .map(|&(s, e)| engine.chunk_sum(s, e))
            .collect()
    } else {
        ranges
            .iter()
            .map(|&(s, e)| engine.chunk_sum(s, e))
            .collect()
    };
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for local in locals {
        for (acc, x) in entries.iter_mut().zip(local) {
            *acc += x;
        }
    }
    Ok(ReducedDensityMatrix::new(n, entries))
}

/// Reduced density matrix after `n_steps` steps by brute-force path
/// summation, starting from the basis pair `initial` (a pure basis state is
/// `(i, i)`). Runs on the rayon pool when the `parallel` feature is enabled.
pub fn rdm_pathsum(
    model: &SpinBosonModel,
    table: &CoeffTable,
    n_steps: usize,
    initial: (usize, usize),
) -> Result<ReducedDensityMatrix, PathsumError> {
    rdm_core(model, table, n_steps, initial, DEFAULT_PATH_BUDGET, true)
}

/// [`rdm_pathsum`] with an explicit N·log2(n) budget cap.
pub fn rdm_pathsum_with_cap(
    model: &SpinBosonModel,
    table: &CoeffTable,
    n_steps: usize,
    initial: (usize, usize),
    cap: usize,
) -> Result<ReducedDensityMatrix, PathsumError> {
    rdm_core(model, table, n_steps, initial, cap, true)
}

/// Sequential twin of [`rdm_pathsum_with_cap`]: identical chunking and
/// combination order, bitwise-equal output; the bench baseline and the
/// fallback when the `parallel` feature is off.
pub fn rdm_pathsum_seq(
    model: &SpinBosonModel,
    table: &CoeffTable,
    n_steps: usize,
    initial: (usize, usize),
    cap: usize,
) -> Result<ReducedDensityMatrix, PathsumError> {
    rdm_core(model, table, n_steps, initial, cap, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{influence_coefficients, CoeffOptions, OhmicBath};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn fig8_model(dt: f64) -> SpinBosonModel {
        let bath = OhmicBath::new(0.1, 7.5, 5.0).unwrap();
        SpinBosonModel::two_level(1.0, bath, dt).unwrap()
    }

    fn fig9_model(dt: f64) -> SpinBosonModel {
        let bath = OhmicBath::new(1.2, 2.5, 0.2).unwrap();
        SpinBosonModel::two_level(1.0, bath, dt).unwrap()
    }

    fn free_model(dt: f64) -> SpinBosonModel {
        let bath = OhmicBath::new(0.0, 7.5, 5.0).unwrap();
        SpinBosonModel::two_level(1.0, bath, dt).unwrap()
    }

    // -----------------------------------------------------------------
    // Independent oracle: non-factorized evaluation. The influence part is
    // accumulated as a single exponent over ALL pairs 0 ≤ k ≤ k' ≤ N (the
    // out-of-window coefficients are zero, contributing nothing), then
    // exponentiated once — a second coding of the same mathematics that
    // shares no loop structure with the production path.
    // -----------------------------------------------------------------

    fn amplitude_direct(
        forward: &[usize],
        backward: &[usize],
        model: &SpinBosonModel,
        table: &CoeffTable,
        initial: (usize, usize),
    ) -> C64 {
        if (forward[0], backward[0]) != initial {
            return C64::new(0.0, 0.0);
        }
        let n = model.n_levels();
        let n_steps = forward.len() - 1;
        let u = bare_propagator(model);
        let mut kinetic = C64::new(1.0, 0.0);
        for k in 0..n_steps {
            kinetic *=
                u[forward[k + 1] * n + forward[k]] * u[backward[k + 1] * n + backward[k]].conj();
        }
        let s = &model.dvr_values;
        let mut exponent = C64::new(0.0, 0.0);
        for kp in 0..=n_steps {
            for k in 0..=kp {
                let alpha = table.get(kp, k);
                let ds = s[forward[kp]] - s[backward[kp]];
                exponent -= (alpha * s[forward[k]] - alpha.conj() * s[backward[k]]) * ds;
            }
        }
        kinetic * exponent.exp()
    }

    fn rdm_direct(
        model: &SpinBosonModel,
        table: &CoeffTable,
        n_steps: usize,
        initial: (usize, usize),
    ) -> Vec<C64> {
        let n = model.n_levels();
        let mut entries = vec![C64::new(0.0, 0.0); n * n];
        let total = n.pow(2 * n_steps as u32);
        let mut f = vec![initial.0; n_steps + 1];
        let mut b = vec![initial.1; n_steps + 1];
        for idx in 0..total {
            let mut rem = idx;
            for k in (1..=n_steps).rev() {
                b[k] = rem % n;
                rem /= n;
            }
            for k in (1..=n_steps).rev() {
                f[k] = rem % n;
                rem /= n;
            }
            entries[f[n_steps] * n + b[n_steps]] += amplitude_direct(&f, &b, model, table, initial);
        }
        entries
    }

    #[test]
    fn bare_propagator_closed_forms() {
        let bath = OhmicBath::new(0.1, 7.5, 5.0).unwrap();
        let m = SpinBosonModel::two_level(1.0, bath, std::f64::consts::FRAC_PI_4).unwrap();
        let u = bare_propagator(&m);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(u[0].re, r, epsilon = 1e-12);
        assert_abs_diff_eq!(u[0].im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1].im, r, epsilon = 1e-12);

        // Δt → 0 gives the identity; ΩΔt = π/2 a full i·σ_x swap.
        let m0 = SpinBosonModel::two_level(1.0, bath, 1e-300).unwrap();
        let u0 = bare_propagator(&m0);
        assert_abs_diff_eq!(u0[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u0[1].norm(), 0.0, epsilon = 1e-12);
        let mswap = SpinBosonModel::two_level(1.0, bath, std::f64::consts::FRAC_PI_2).unwrap();
        let uswap = bare_propagator(&mswap);
        assert_abs_diff_eq!(uswap[0].norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(uswap[1].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(uswap[1].im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn general_eigen_path_matches_two_level_closed_form() {
        // Route n = 2 through the Jacobi eigendecomposition and compare with
        // the closed form.
        let dt = 0.37;
        let omega: f64 = 1.3;
        let mut h = vec![0.0; 4];
        h[1] = -omega;
        h[2] = -omega;
        let (eig, v) = sym_eigen(h, 2);
        let mut u = [C64::new(0.0, 0.0); 4];
        for m in 0..2 {
            let phase = C64::new(0.0, -eig[m] * dt).exp();
            for i in 0..2 {
                for j in 0..2 {
                    u[i * 2 + j] += phase * v[i * 2 + m] * v[j * 2 + m];
                }
            }
        }
        let (s, c) = (omega * dt).sin_cos();
        assert_abs_diff_eq!(u[0].re, c, epsilon = 1e-12);
        assert_abs_diff_eq!(u[0].im, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1].re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1].im, s, epsilon = 1e-12);
    }

    #[test]
    fn propagator_unitary_for_four_levels() {
        let bath = OhmicBath::new(0.1, 7.5, 5.0).unwrap();
        let m = SpinBosonModel::new(0.9, vec![3.0, 1.0, -1.0, -3.0], bath, 0.31).unwrap();
        let u = bare_propagator(&m);
        let n = 4;
        for i in 0..n {
            for j in 0..n {
                let dot: C64 = (0..n).map(|k| u[k * n + i].conj() * u[k * n + j]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot.re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(dot.im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn influence_factor_examples() {
        let table = influence_coefficients(&fig8_model(0.25).bath, 0.25, 2, 2).unwrap();
        // Equal forward/backward endpoint values: factor is exactly 1.
        assert_eq!(
            influence_factor(1, 0, 1.0, 1.0, -1.0, 1.0, &table),
            C64::new(1.0, 0.0)
        );
        // (s'⁺, s'⁻, s⁺, s⁻) = (1, −1, 1, 1) → e^{−4i·Im α}, unit modulus.
        let alpha = table.get(1, 0);
        let v = influence_factor(1, 0, 1.0, -1.0, 1.0, 1.0, &table);
        let expect = C64::new(0.0, -4.0 * alpha.im).exp();
        assert_relative_eq!(v.re, expect.re, epsilon = 1e-14);
        assert_relative_eq!(v.im, expect.im, epsilon = 1e-14);
        assert_abs_diff_eq!(v.norm(), 1.0, epsilon = 1e-14);
        // (1, −1, 1, −1) → e^{−4·Re α}, real.
        let v2 = influence_factor(1, 0, 1.0, -1.0, 1.0, -1.0, &table);
        assert_relative_eq!(v2.re, (-4.0 * alpha.re).exp(), epsilon = 1e-14);
        assert_abs_diff_eq!(v2.im, 0.0, epsilon = 1e-14);
        // Outside the window the coefficient is 0 and the factor exactly 1.
        assert_eq!(
            influence_factor(9, 0, 1.0, -1.0, 1.0, -1.0, &table),
            C64::new(1.0, 0.0)
        );
    }

    #[test]
    fn path_amplitude_free_case() {
        // ξ = 0, N = 1, ΩΔt = π/4: the all-|s_1⟩ path has amplitude
        // |⟨0|U|0⟩|² = cos²(π/4) = 1/2.
        let m = free_model(std::f64::consts::FRAC_PI_4);
        let table = influence_coefficients(&m.bath, std::f64::consts::FRAC_PI_4, 1, 1).unwrap();
        let amp = path_amplitude(&[0, 0], &[0, 0], &m, &table, (0, 0));
        assert_abs_diff_eq!(amp.re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(amp.im, 0.0, epsilon = 1e-14);
        // Mismatched starting pair: the ρ(0) selector kills the amplitude.
        assert_eq!(
            path_amplitude(&[1, 0], &[0, 0], &m, &table, (0, 0)),
            C64::new(0.0, 0.0)
        );
    }

    #[test]
    fn factorized_equals_direct_per_path() {
        let m = fig9_model(0.25);
        let table = influence_coefficients(&m.bath, 0.25, 3, 2).unwrap();
        for idx in 0..4usize.pow(3) {
            // Decode 6 binary digits into the two interior/final paths.
            let f = [0, (idx >> 5) & 1, (idx >> 4) & 1, (idx >> 3) & 1];
            let b = [0, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1];
            let lhs = path_amplitude(&f, &b, &m, &table, (0, 0));
            let rhs = amplitude_direct(&f, &b, &m, &table, (0, 0));
            assert_abs_diff_eq!(lhs.re, rhs.re, epsilon = 1e-12);
            assert_abs_diff_eq!(lhs.im, rhs.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn rdm_matches_direct_coding() {
        for (model, l) in [(fig8_model(0.25), 3), (fig9_model(0.1), 2)] {
            let table = influence_coefficients(&model.bath, model.dt, 3, l).unwrap();
            let rdm = rdm_pathsum(&model, &table, 3, (0, 0)).unwrap();
            let direct = rdm_direct(&model, &table, 3, (0, 0));
            for i in 0..2 {
                for j in 0..2 {
                    let d = direct[i * 2 + j];
                    let p = rdm.entry(i, j);
                    assert_abs_diff_eq!(p.re, d.re, epsilon = 1e-12);
                    assert_abs_diff_eq!(p.im, d.im, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_steps_returns_initial_state() {
        let m = fig8_model(0.25);
        // The table is unused at N = 0; build any valid one.
        let table = influence_coefficients(&m.bath, 0.25, 1, 1).unwrap();
        let rdm = rdm_pathsum(&m, &table, 0, (1, 1)).unwrap();
        assert_eq!(rdm.entry(1, 1), C64::new(1.0, 0.0));
        assert_eq!(rdm.entry(0, 0), C64::new(0.0, 0.0));
        assert_eq!(rdm.entry(0, 1), C64::new(0.0, 0.0));
    }

    #[test]
    fn free_limit_reproduces_rabi_populations() {
        // ξ = 0 ⇒ populations follow cos²(ΩkΔt) exactly.
        let m = free_model(0.25);
        for n_steps in 1..=4usize {
            let table = influence_coefficients(&m.bath, 0.25, n_steps, n_steps).unwrap();
            let rdm = rdm_pathsum(&m, &table, n_steps, (0, 0)).unwrap();
            let expect = (1.0 * n_steps as f64 * 0.25).cos().powi(2);
            assert_abs_diff_eq!(rdm.population(0), expect, epsilon = 1e-12);
            assert_abs_diff_eq!(rdm.population(1), 1.0 - expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_one_and_hermitian() {
        for model in [fig8_model(0.25), fig9_model(0.25), fig8_model(0.1)] {
            for (n_steps, l) in [(1, 1), (3, 2), (4, 4), (5, 3)] {
                let table = influence_coefficients(&model.bath, model.dt, n_steps, l).unwrap();
                let rdm = rdm_pathsum(&model, &table, n_steps, (0, 0)).unwrap();
                let tr = rdm.trace();
                assert_abs_diff_eq!(tr.re, 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(tr.im, 0.0, epsilon = 1e-12);
                assert!(rdm.max_hermiticity_violation() < 1e-12);
            }
        }
    }

    #[test]
    fn four_level_trace_preserved() {
        let bath = OhmicBath::new(0.3, 2.5, 0.5).unwrap();
        let m = SpinBosonModel::new(0.8, vec![3.0, 1.0, -1.0, -3.0], bath, 0.2).unwrap();
        let table = influence_coefficients(&bath, 0.2, 2, 2).unwrap();
        let rdm = rdm_pathsum(&m, &table, 2, (0, 0)).unwrap();
        assert_abs_diff_eq!(rdm.trace().re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rdm.trace().im, 0.0, epsilon = 1e-12);
        assert!(rdm.max_hermiticity_violation() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_bitwise_identical() {
        let m = fig9_model(0.25);
        let table = influence_coefficients(&m.bath, 0.25, 4, 4).unwrap();
        let par = rdm_pathsum(&m, &table, 4, (0, 0)).unwrap();
        let seq = rdm_pathsum_seq(&m, &table, 4, (0, 0), DEFAULT_PATH_BUDGET).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(par.entry(i, j).re.to_bits(), seq.entry(i, j).re.to_bits());
                assert_eq!(par.entry(i, j).im.to_bits(), seq.entry(i, j).im.to_bits());
            }
        }
    }

    #[test]
    fn guard_rails() {
        let m = fig8_model(0.25);
        let table = influence_coefficients(&m.bath, 0.25, 9, 9).unwrap();
        assert!(matches!(
            rdm_pathsum(&m, &table, 9, (0, 0)),
            Err(PathsumError::BudgetExceeded { cost: 9, cap: 8 })
        ));
        // Raising the cap admits the same request.
        assert!(rdm_pathsum_with_cap(&m, &table, 9, (0, 0), 9).is_ok());
        let table3 = influence_coefficients(&m.bath, 0.25, 3, 3).unwrap();
        assert!(matches!(
            rdm_pathsum(&m, &table3, 2, (0, 0)),
            Err(PathsumError::TableMismatch { .. })
        ));
        assert!(matches!(
            rdm_pathsum(&m, &table3, 3, (0, 2)),
            Err(PathsumError::InvalidBasisIndex { index: 2, .. })
        ));
    }

    #[test]
    fn model_validation() {
        let bath = OhmicBath::new(0.1, 7.5, 5.0).unwrap();
        assert!(SpinBosonModel::new(1.0, vec![1.0], bath, 0.25).is_err());
        assert!(SpinBosonModel::new(1.0, vec![1.0, 1.0], bath, 0.25).is_err());
        assert!(SpinBosonModel::new(1.0, vec![1.0, -1.0], bath, 0.0).is_err());
        assert!(SpinBosonModel::new(f64::NAN, vec![1.0, -1.0], bath, 0.25).is_err());
        let m = SpinBosonModel::two_level(1.0, bath, 0.25).unwrap();
        assert_eq!(m.n_levels(), 2);
        assert_eq!(m.dvr_values, vec![1.0, -1.0]);
    }

    #[test]
    fn frozen_fig8_trajectory_populations() {
        // Golden fixture, frozen after the factorized and direct codings
        // agreed to 1e−12 (rdm_matches_direct_coding above).
        let m = fig8_model(0.25);
        let mut p0 = Vec::new();
        for n_steps in 1..=3usize {
            let table = influence_coefficients(&m.bath, 0.25, n_steps, n_steps).unwrap();
            let rdm = rdm_pathsum(&m, &table, n_steps, (0, 0)).unwrap();
            p0.push(rdm.population(0));
        }
        let expect = [FROZEN_P0_1, FROZEN_P0_2, FROZEN_P0_3];
        for (got, want) in p0.iter().zip(expect) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
    }

    // Populations for the ξ=0.1 parameter set at Δt = 0.25, N = 1..3, L = N.
    const FROZEN_P0_1: f64 = 9.387_912_809_451_863e-1;
    const FROZEN_P0_2: f64 = 7.870_336_069_534_21e-1;
    const FROZEN_P0_3: f64 = 5.906_497_664_089_326e-1;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn trace_and_hermiticity_hold_generically(
            omega in 0.2f64..2.0,
            xi in 0.0f64..1.5,
            omega_c in 0.5f64..8.0,
            beta in 0.1f64..6.0,
            dt in 0.05f64..0.4,
            n_steps in 1usize..=4,
            seed_initial in 0usize..2,
        ) {
            let bath = OhmicBath::new(xi, omega_c, beta).unwrap();
            let m = SpinBosonModel::two_level(omega, bath, dt).unwrap();
            let opts = CoeffOptions::default();
            let table = crate::bath::influence_coefficients_with(
                &bath, dt, n_steps, n_steps, &opts,
            ).unwrap();
            let rdm = rdm_pathsum(&m, &table, n_steps, (seed_initial, seed_initial)).unwrap();
            prop_assert!((rdm.trace().re - 1.0).abs() < 1e-11);
            prop_assert!(rdm.trace().im.abs() < 1e-11);
            prop_assert!(rdm.max_hermiticity_violation() < 1e-11);
            prop_assert!(rdm.population(0) >= -1e-11 && rdm.population(0) <= 1.0 + 1e-11);
        }
    }
}
