//! Assembly of the two measurement algorithms from combined diagonal
//! operators, population estimation from success statistics, and closed-form
//! resource accounting.
//!
//! The reduced-density-matrix element ρ_{probe,probe}(NΔt) is encoded as the
//! amplitude of one measurement outcome: every (forward, backward) pair of
//! time-point registers is prepared, the propagator and influence-functional
//! factors are folded into diagonal *compact operators* applied through
//! dilation + Walsh synthesis, and Hadamards on the intermediate time points
//! sum over paths. Algorithm One reads success off the all-zeros string;
//! Algorithm Two transfers that outcome onto a single readout qubit with an
//! open-control Toffoli chain.

use thiserror::Error;

use crate::bath::{BathError, CoeffTable};
use crate::circuit::{Circuit, CircuitError, Gate, Role};
use crate::pathsum::{bare_propagator, influence_factor, PathsumError, SpinBosonModel};
use crate::synthesis::{DiagonalOp, SynthesisError};

/// Hard cap on built register sizes; beyond this the circuit could never be
/// simulated and index arithmetic headroom runs out.
pub const MAX_BUILD_QUBITS: usize = 60;

/// Which measurement algorithm a plan drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Algorithm One: measure every qubit, success = all-zeros string.
    One,
    /// Algorithm Two: fold the all-zeros outcome onto one readout qubit.
    Two,
}

/// Errors from circuit assembly and population estimation.
#[derive(Debug, Error)]
pub enum AlgorithmError {
    /// A plan parameter is out of range.
    #[error("invalid plan: {reason}")]
    InvalidPlan { reason: String },
    /// The coefficient table does not span the requested evolution.
    #[error(
        "coefficient table (N={table_steps}, dt={table_dt}) inconsistent with \
         request (N={steps}, dt={dt})"
    )]
    InconsistentTable {
        table_steps: usize,
        table_dt: f64,
        steps: usize,
        dt: f64,
    },
    /// The register would exceed the build cap.
    #[error("{n_qubits} qubits exceeds the build cap of {cap}")]
    CapExceeded { n_qubits: usize, cap: usize },
    /// Both success statistics are zero: too few shots to form the ratio.
    #[error("both success statistics are zero; population ratio undefined")]
    InsufficientStatistics,
    /// A success statistic is negative or non-finite.
    #[error("success statistic {value} is not a finite non-negative number")]
    InvalidStatistic { value: f64 },
    /// Propagated from coefficient computation.
    #[error(transparent)]
    Bath(#[from] BathError),
    /// Propagated from model validation.
    #[error(transparent)]
    Pathsum(#[from] PathsumError),
    /// Propagated from diagonal-operator construction.
    #[error(transparent)]
    Synthesis(#[from] SynthesisError),
    /// Propagated from simulation.
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// One combined diagonal operator coupling time points (k, k'): the product
/// of the propagator matrix elements (nearest-neighbor pairs only) and the
/// influence-functional factors assigned to that pair, rescaled to modulus
/// ≤ 1 with the factor recorded.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactOperator {
    pair: (usize, usize),
    diagonal: DiagonalOp,
}

impl CompactOperator {
    /// Wrap a prepared diagonal as the operator for time-point pair
    /// `(k, k')`. The diagonal's recorded qubits must follow the register
    /// layout of [`assemble_probe_circuit`] (blocks of the k' point, then the
    /// k point, forward before backward, most significant first).
    pub fn from_parts(pair: (usize, usize), diagonal: DiagonalOp) -> Self {
        CompactOperator { pair, diagonal }
    }

    /// The coupled time points (k, k') with k < k'.
    pub fn pair(&self) -> (usize, usize) {
        self.pair
    }

    /// The rescaled diagonal over qubits (k'_f, k'_b, k_f, k_b).
    pub fn diagonal(&self) -> &DiagonalOp {
        &self.diagonal
    }

    /// The rescale factor divided out of the raw product.
    pub fn scale(&self) -> f64 {
        self.diagonal.scale()
    }
}

/// Log2 of a power-of-two level count.
fn level_bits(n_levels: usize) -> usize {
    n_levels.trailing_zeros() as usize
}

/// Qubits of the forward (or backward) block of time point k, most
/// significant first, in a register laid out `[f_0][b_0][f_1][b_1]…`.
fn time_block(k: usize, forward: bool, width: usize) -> Vec<usize> {
    let start = 2 * k * width + if forward { 0 } else { width };
    (start..start + width).collect()
}

/// Number of compact operators for an evolution of N steps with memory L.
pub fn operator_count(n_steps: usize, memory: usize) -> usize {
    (2 * n_steps - memory + 1) * memory / 2
}

fn check_window(n_steps: usize, memory: usize) -> Result<(), AlgorithmError> {
    if n_steps == 0 || memory == 0 || memory > n_steps {
        return Err(AlgorithmError::InvalidPlan {
            reason: format!("need 1 ≤ memory ≤ n_steps, got memory={memory}, n_steps={n_steps}"),
        });
    }
    Ok(())
}

fn check_levels(n_levels: usize) -> Result<(), AlgorithmError> {
    if n_levels < 2 || !n_levels.is_power_of_two() {
        return Err(AlgorithmError::InvalidPlan {
            reason: format!("level count {n_levels} must be a power of two ≥ 2"),
        });
    }
    Ok(())
}

/// Fold the propagator and influence-functional factors into one diagonal
/// operator per coupled time-point pair.
///
/// For k = 0 … N−1, the operator (k, k+1) carries
/// ⟨s_{k+1}⁺|U|s_k⁺⟩·⟨s_k⁻|U†|s_{k+1}⁻⟩·I_{kk}·I_{k,k+1}; for separations
/// 2 ≤ k'−k ≤ L the operator (k, k') carries I_{k,k'} alone; the final
/// self-interaction I_{NN} is folded into the operator (N−L, N) (for N = 1
/// this is the single nearest operator, which therefore absorbs I_{11}).
/// Operators are returned ascending in k, then k'; their count is
/// (2N−L+1)·L/2.
///
/// Diagonal index convention: bits ordered (k'_f, k'_b, k_f, k_b) most
/// significant first, each block holding a basis level v whose coordinate is
/// `dvr_values[v]` (for two levels, qubit 0 ↦ +1 and qubit 1 ↦ −1).
pub fn combine(
    model: &SpinBosonModel,
    table: &CoeffTable,
    n_steps: usize,
    memory: usize,
) -> Result<Vec<CompactOperator>, AlgorithmError> {
    check_window(n_steps, memory)?;
    let n = model.n_levels();
    check_levels(n)?;
    if table.n_steps() != n_steps || table.dt() != model.dt {
        return Err(AlgorithmError::InconsistentTable {
            table_steps: table.n_steps(),
            table_dt: table.dt(),
            steps: n_steps,
            dt: model.dt,
        });
    }
    let width = level_bits(n);
    let u = bare_propagator(model);
    let s = &model.dvr_values;
    let fold_pair = (n_steps - memory, n_steps);
    let dim = n * n * n * n;
    let mut operators = Vec::with_capacity(operator_count(n_steps, memory));
    for k in 0..n_steps {
        for kp in (k + 1)..=(k + memory).min(n_steps) {
            let mut entries = Vec::with_capacity(dim);
            for idx in 0..dim {
                let v_kb = idx % n;
                let v_kf = idx / n % n;
                let v_kpb = idx / (n * n) % n;
                let v_kpf = idx / (n * n * n);
                let mut value =
                    influence_factor(kp, k, s[v_kpf], s[v_kpb], s[v_kf], s[v_kb], table);
                if kp == k + 1 {
                    value *= u[v_kpf * n + v_kf]
                        * u[v_kpb * n + v_kb].conj()
                        * influence_factor(k, k, s[v_kf], s[v_kb], s[v_kf], s[v_kb], table);
                }
                if (k, kp) == fold_pair {
                    value *= influence_factor(
                        n_steps, n_steps, s[v_kpf], s[v_kpb], s[v_kpf], s[v_kpb], table,
                    );
                }
                entries.push(value);
            }
            let mut qubits = time_block(kp, true, width);
            qubits.extend(time_block(kp, false, width));
            qubits.extend(time_block(k, true, width));
            qubits.extend(time_block(k, false, width));
            operators.push(CompactOperator {
                pair: (k, kp),
                diagonal: DiagonalOp::new(entries, qubits)?,
            });
        }
    }
    debug_assert_eq!(operators.len(), operator_count(n_steps, memory));
    Ok(operators)
}

/// A complete experiment specification: model, evolution window, algorithm
/// choice, initial and probed basis states, and the sampling schedule.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub model: SpinBosonModel,
    pub n_steps: usize,
    pub memory: usize,
    pub algorithm: Algorithm,
    pub initial: usize,
    pub probe: usize,
    pub shots: u64,
    pub runs: usize,
    pub seed: u64,
}

impl ExperimentPlan {
    /// Check all range invariants (1 ≤ L ≤ N, positive shot/run counts,
    /// basis states within the level count, power-of-two levels).
    pub fn validate(&self) -> Result<(), AlgorithmError> {
        check_window(self.n_steps, self.memory)?;
        check_levels(self.model.n_levels())?;
        let n = self.model.n_levels();
        if self.initial >= n || self.probe >= n {
            return Err(AlgorithmError::InvalidPlan {
                reason: format!(
                    "initial={} and probe={} must be basis states below {n}",
                    self.initial, self.probe
                ),
            });
        }
        if self.shots == 0 || self.runs == 0 {
            return Err(AlgorithmError::InvalidPlan {
                reason: format!(
                    "shots={} and runs={} must be positive",
                    self.shots, self.runs
                ),
            });
        }
        Ok(())
    }
}

/// Apply X gates to a time block so it holds basis level `value`.
fn prepare_block(c: &mut Circuit, block: &[usize], value: usize) {
    let width = block.len();
    for (j, &q) in block.iter().enumerate() {
        if (value >> (width - 1 - j)) & 1 == 1 {
            c.push(Gate::X(q));
        }
    }
}

/// Assemble one Algorithm-One probe circuit from prepared compact operators.
///
/// Register layout: blocks `[f_0][b_0]…[f_N][b_N]` of `log2(n)` qubits each,
/// then one dilation ancilla per operator. The initial blocks (f_0, b_0) and
/// probe blocks (f_N, b_N) are set with X gates before the operators and
/// reset with matching X gates after, so the success outcome — whose
/// amplitude is proportional to ρ_{probe,probe}(NΔt) — is always the
/// all-zeros string; Hadamards open and close every intermediate time-point
/// qubit to sum over paths.
pub fn assemble_probe_circuit(
    n_levels: usize,
    n_steps: usize,
    operators: &[CompactOperator],
    initial: usize,
    probe: usize,
) -> Result<Circuit, AlgorithmError> {
    assemble_probe_circuit_with(
        n_levels,
        n_steps,
        operators,
        initial,
        probe,
        crate::synthesis::SPARSE_COEFF_EPS,
    )
}

/// [`assemble_probe_circuit`] with an explicit Walsh-term skip threshold;
/// 0 forces the dense synthesis path whose gate counts the closed forms of
/// [`resource_counts`] predict.
pub fn assemble_probe_circuit_with(
    n_levels: usize,
    n_steps: usize,
    operators: &[CompactOperator],
    initial: usize,
    probe: usize,
    threshold: f64,
) -> Result<Circuit, AlgorithmError> {
    check_levels(n_levels)?;
    if n_steps == 0 || initial >= n_levels || probe >= n_levels || operators.is_empty() {
        return Err(AlgorithmError::InvalidPlan {
            reason: format!(
                "need n_steps ≥ 1, operators, initial < {n_levels}, probe < {n_levels} \
                 (got n_steps={n_steps}, {} operators, initial={initial}, probe={probe})",
                operators.len()
            ),
        });
    }
    let width = level_bits(n_levels);
    let time_qubits = 2 * (n_steps + 1) * width;
    let n_qubits = time_qubits + operators.len();
    if n_qubits > MAX_BUILD_QUBITS {
        return Err(AlgorithmError::CapExceeded {
            n_qubits,
            cap: MAX_BUILD_QUBITS,
        });
    }
    let mut c = Circuit::new(n_qubits);
    for k in 0..=n_steps {
        for &q in &time_block(k, true, width) {
            c.set_role(q, Role::TimeForward(k));
        }
        for &q in &time_block(k, false, width) {
            c.set_role(q, Role::TimeBackward(k));
        }
    }
    for a in time_qubits..n_qubits {
        c.set_role(a, Role::DilationAncilla);
    }

    let f0 = time_block(0, true, width);
    let b0 = time_block(0, false, width);
    let fn_ = time_block(n_steps, true, width);
    let bn = time_block(n_steps, false, width);
    prepare_block(&mut c, &f0, initial);
    prepare_block(&mut c, &b0, initial);
    prepare_block(&mut c, &fn_, probe);
    prepare_block(&mut c, &bn, probe);
    for k in 1..n_steps {
        for q in 2 * k * width..2 * (k + 1) * width {
            c.push(Gate::H(q));
        }
    }
    for (i, op) in operators.iter().enumerate() {
        let ancilla = time_qubits + i;
        c.extend(&crate::synthesis::synthesize_diagonal_with_threshold(
            &op.diagonal,
            n_qubits,
            op.diagonal.qubits(),
            ancilla,
            threshold,
        ));
    }
    for k in 1..n_steps {
        for q in 2 * k * width..2 * (k + 1) * width {
            c.push(Gate::H(q));
        }
    }
    prepare_block(&mut c, &f0, initial);
    prepare_block(&mut c, &b0, initial);
    prepare_block(&mut c, &fn_, probe);
    prepare_block(&mut c, &bn, probe);
    Ok(c)
}

/// Everything needed to build circuits for a plan: the coefficient table is
/// computed once and the operators shared between both probe circuits.
fn plan_operators(plan: &ExperimentPlan) -> Result<Vec<CompactOperator>, AlgorithmError> {
    plan.validate()?;
    let table = crate::bath::influence_coefficients(
        &plan.model.bath,
        plan.model.dt,
        plan.n_steps,
        plan.memory,
    )?;
    combine(&plan.model, &table, plan.n_steps, plan.memory)
}

/// Build the Algorithm-One circuit pair: the first probes basis state 0, the
/// second probes `plan.probe` (for two levels, the populations' ratio
/// follows from these two success statistics via [`estimate_populations`]).
pub fn build_algorithm_one(plan: &ExperimentPlan) -> Result<(Circuit, Circuit), AlgorithmError> {
    let operators = plan_operators(plan)?;
    let n = plan.model.n_levels();
    let zero = assemble_probe_circuit(n, plan.n_steps, &operators, plan.initial, 0)?;
    let probe = assemble_probe_circuit(n, plan.n_steps, &operators, plan.initial, plan.probe)?;
    Ok((zero, probe))
}

/// Build one Algorithm-One probe circuit per basis level (the multi-level
/// generalization: populations are the normalized √-statistics of all n).
pub fn build_probe_circuits(plan: &ExperimentPlan) -> Result<Vec<Circuit>, AlgorithmError> {
    let operators = plan_operators(plan)?;
    let n = plan.model.n_levels();
    (0..n)
        .map(|probe| assemble_probe_circuit(n, plan.n_steps, &operators, plan.initial, probe))
        .collect()
}

/// Append an open-control multi-controlled-X: flips `readout` exactly when
/// all of `controls` are |0⟩, using `controls.len() − 2` clean work qubits
/// that are returned to |0⟩. Toffoli cost: 2·(#controls) − 3.
fn append_open_control_mcx(c: &mut Circuit, controls: &[usize], works: &[usize], readout: usize) {
    let q = controls.len();
    assert!(q >= 3, "chain decomposition needs at least 3 controls");
    assert_eq!(works.len(), q - 2, "need exactly #controls − 2 work qubits");
    for &ctrl in controls {
        c.push(Gate::X(ctrl));
    }
    let forward = |c: &mut Circuit| {
        c.push(Gate::Toffoli(controls[0], controls[1], works[0]));
        for j in 1..=q - 3 {
            c.push(Gate::Toffoli(controls[j + 1], works[j - 1], works[j]));
        }
    };
    forward(c);
    c.push(Gate::Toffoli(controls[q - 1], works[q - 3], readout));
    // Uncompute the work chain in reverse.
    for j in (1..=q - 3).rev() {
        c.push(Gate::Toffoli(controls[j + 1], works[j - 1], works[j]));
    }
    c.push(Gate::Toffoli(controls[0], controls[1], works[0]));
    for &ctrl in controls {
        c.push(Gate::X(ctrl));
    }
}

/// Build the Algorithm-Two circuit pair: each Algorithm-One circuit extended
/// with an open-control Toffoli chain that transfers the all-zeros outcome
/// onto a single readout qubit (the only one measured). With Q Algorithm-One
/// qubits this adds Q−2 work qubits plus the readout (2Q−1 total) and
/// 2·(Q−2)+1 Toffoli gates — one more than the nominal 2·(Q−2), since the
/// chain needs Q−1 conjunctions and uncomputes Q−2 of them.
pub fn build_algorithm_two(plan: &ExperimentPlan) -> Result<(Circuit, Circuit), AlgorithmError> {
    let (zero, probe) = build_algorithm_one(plan)?;
    Ok((extend_to_readout(&zero)?, extend_to_readout(&probe)?))
}

/// Wrap one Algorithm-One circuit into its Algorithm-Two form.
pub fn extend_to_readout(alg_one: &Circuit) -> Result<Circuit, AlgorithmError> {
    let q = alg_one.n_qubits();
    let n_qubits = 2 * q - 1;
    if n_qubits > MAX_BUILD_QUBITS {
        return Err(AlgorithmError::CapExceeded {
            n_qubits,
            cap: MAX_BUILD_QUBITS,
        });
    }
    let mut c = Circuit::new(n_qubits);
    for qubit in 0..q {
        if let Some(role) = alg_one.role(qubit) {
            c.set_role(qubit, role);
        }
    }
    for work in q..2 * q - 2 {
        c.set_role(work, Role::ChainAncilla);
    }
    let readout = 2 * q - 2;
    c.set_role(readout, Role::Readout);
    for gate in alg_one.gates() {
        c.push(*gate);
    }
    let controls: Vec<usize> = (0..q).collect();
    let works: Vec<usize> = (q..2 * q - 2).collect();
    append_open_control_mcx(&mut c, &controls, &works, readout);
    Ok(c)
}

/// Success probability of a built circuit, read from exact amplitudes: the
/// probability of readout = 1 when the circuit has a readout qubit
/// (Algorithm Two), else the probability of the all-zeros string.
pub fn exact_success_probability(circuit: &Circuit) -> Result<f64, AlgorithmError> {
    exact_success_probability_with_cap(circuit, crate::circuit::DEFAULT_SIM_QUBITS)
}

/// [`exact_success_probability`] with an explicit simulator qubit cap, for
/// registers past the default (each extra qubit doubles the state memory).
pub fn exact_success_probability_with_cap(
    circuit: &Circuit,
    cap: usize,
) -> Result<f64, AlgorithmError> {
    let state = crate::circuit::simulate_with_cap(circuit, 0, cap)?;
    Ok(match circuit.find_role(Role::Readout) {
        Some(q) => state.marginal(q, 1),
        None => state.probability(0),
    })
}

/// Success statistic from sampled counts: total shots with readout = 1 when
/// the circuit has a readout qubit, else the count of the all-zeros string.
pub fn success_statistic(
    circuit: &Circuit,
    counts: &std::collections::BTreeMap<String, u64>,
) -> u64 {
    match circuit.find_role(Role::Readout) {
        Some(q) => counts
            .iter()
            .filter(|(label, _)| label.as_bytes()[q] == b'1')
            .map(|(_, v)| v)
            .sum(),
        None => {
            let zeros = "0".repeat(circuit.n_qubits());
            counts.get(&zeros).copied().unwrap_or(0)
        }
    }
}

/// Populations from the two probes' success statistics (counts or
/// probabilities): p0 = √c0 / (√c0 + √c1), p1 = 1 − p0. Valid because both
/// circuits share identical compact operators — hence identical rescale
/// factors and path-sum normalization — so the statistics ratio is p0²/p1².
pub fn estimate_populations(success0: f64, success1: f64) -> Result<(f64, f64), AlgorithmError> {
    for value in [success0, success1] {
        if !value.is_finite() || value < 0.0 {
            return Err(AlgorithmError::InvalidStatistic { value });
        }
    }
    if success0 == 0.0 && success1 == 0.0 {
        return Err(AlgorithmError::InsufficientStatistics);
    }
    let r0 = success0.sqrt();
    let r1 = success1.sqrt();
    let p0 = r0 / (r0 + r1);
    Ok((p0, 1.0 - p0))
}

/// Closed-form resource report for an experiment size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ResourceReport {
    /// Total register size.
    pub qubits: usize,
    /// RZ + CNOT gates across all compact-operator syntheses.
    pub native_gates: usize,
    /// Toffoli gates (zero for Algorithm One).
    pub toffolis: usize,
    /// Number of compact operators (= dilation ancillas).
    pub compact_operators: usize,
}

/// Closed-form resource counts: with n levels, N steps, memory L, Algorithm
/// One uses `2(N+1)·log2(n) + (2N−L+1)L/2` qubits and `(4n⁴−3)` native gates
/// per compact operator; Algorithm Two doubles the register minus one
/// (Q−2 work qubits + readout) and adds `2(Q−2)+1` Toffolis. The Toffoli
/// figure is the count the chain construction actually needs, one above the
/// nominal `2(Q−2)`.
pub fn resource_counts(
    n_levels: usize,
    n_steps: usize,
    memory: usize,
    algorithm: Algorithm,
) -> Result<ResourceReport, AlgorithmError> {
    check_levels(n_levels)?;
    check_window(n_steps, memory)?;
    let width = level_bits(n_levels);
    let ops = operator_count(n_steps, memory);
    let q1 = 2 * (n_steps + 1) * width + ops;
    let n4 = n_levels.pow(4);
    let native = (4 * n4 - 3) * ops;
    Ok(match algorithm {
        Algorithm::One => ResourceReport {
            qubits: q1,
            native_gates: native,
            toffolis: 0,
            compact_operators: ops,
        },
        Algorithm::Two => ResourceReport {
            qubits: 2 * q1 - 1,
            native_gates: native,
            toffolis: 2 * (q1 - 2) + 1,
            compact_operators: ops,
        },
    })
}
