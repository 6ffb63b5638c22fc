//! Gate-level intermediate representation, dense statevector simulator, shot
//! sampler, and small-circuit unitary extraction.
//!
//! Bit convention, used everywhere: qubit 0 is the **most significant** bit
//! of a basis index. A measurement string therefore reads qubit 0 first, and
//! the bit position of qubit q inside an index is `n_qubits − 1 − q` from the
//! least-significant end.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

use crate::C64;

/// Default qubit cap for full statevector simulation (2^26 amplitudes = 1 GiB).
pub const DEFAULT_SIM_QUBITS: usize = 26;
/// Qubit cap for dense unitary extraction.
pub const UNITARY_QUBIT_CAP: usize = 12;

/// One gate. Operand order is (control…, target) for the entangling gates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    /// Hadamard.
    H(usize),
    /// Pauli X.
    X(usize),
    /// RZ(θ) = diag(e^{−iθ/2}, e^{+iθ/2}).
    Rz(usize, f64),
    /// Controlled-X: (control, target).
    Cnot(usize, usize),
    /// Doubly-controlled-X: (control, control, target).
    Toffoli(usize, usize, usize),
    /// Multiplies every amplitude by e^{iφ}.
    GlobalPhase(f64),
}

impl Gate {
    /// Operand qubits in declaration order.
    pub fn operands(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::X(q) | Gate::Rz(q, _) => vec![q],
            Gate::Cnot(c, t) => vec![c, t],
            Gate::Toffoli(c1, c2, t) => vec![c1, c2, t],
            Gate::GlobalPhase(_) => vec![],
        }
    }

    fn check(&self, n_qubits: usize) -> Result<(), CircuitError> {
        let ops = self.operands();
        for &q in &ops {
            if q >= n_qubits {
                return Err(CircuitError::MalformedGate {
                    gate: *self,
                    reason: "operand out of range",
                });
            }
        }
        for (i, &q) in ops.iter().enumerate() {
            if ops[i + 1..].contains(&q) {
                return Err(CircuitError::MalformedGate {
                    gate: *self,
                    reason: "duplicate operands",
                });
            }
        }
        if let Gate::Rz(_, theta) | Gate::GlobalPhase(theta) = *self {
            if !theta.is_finite() {
                return Err(CircuitError::MalformedGate {
                    gate: *self,
                    reason: "non-finite angle",
                });
            }
        }
        Ok(())
    }
}

/// What a qubit is for, in the assembled measurement circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Forward-path qubit of time point k.
    TimeForward(usize),
    /// Backward-path qubit of time point k.
    TimeBackward(usize),
    /// Dilation ancilla of one compact operator.
    DilationAncilla,
    /// Work qubit of the Toffoli chain.
    ChainAncilla,
    /// The single measured qubit of Algorithm II.
    Readout,
}

/// Errors from circuit construction and simulation.
#[derive(Debug, Error)]
pub enum CircuitError {
    /// The register exceeds the simulator (or unitary-extraction) cap.
    #[error("{n_qubits} qubits exceeds the cap of {cap}")]
    CapExceeded { n_qubits: usize, cap: usize },
    /// A gate fails validation.
    #[error("malformed gate {gate:?}: {reason}")]
    MalformedGate { gate: Gate, reason: &'static str },
    /// The initial basis index does not fit the register.
    #[error("initial basis index {index} out of range for {n_qubits} qubits")]
    InvalidInitialState { index: usize, n_qubits: usize },
}

/// An ordered gate list over a sized register with optional per-qubit roles.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    roles: Vec<Option<Role>>,
}

impl Circuit {
    /// Empty circuit over `n_qubits` qubits.
    pub fn new(n_qubits: usize) -> Self {
        Circuit {
            n_qubits,
            gates: Vec::new(),
            roles: vec![None; n_qubits],
        }
    }

    /// Register size.
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// The gate sequence.
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Append a gate. Panics if the gate is malformed for this register;
    /// circuits built through this method therefore always simulate cleanly.
    pub fn push(&mut self, gate: Gate) {
        if let Err(e) = gate.check(self.n_qubits) {
            panic!("{e}");
        }
        self.gates.push(gate);
    }

    /// Append all gates of `other` (same register size required).
    pub fn extend(&mut self, other: &Circuit) {
        assert_eq!(
            self.n_qubits, other.n_qubits,
            "cannot concatenate circuits over different registers"
        );
        self.gates.extend_from_slice(&other.gates);
    }

    /// Build from raw parts, validating every gate.
    pub fn from_parts(n_qubits: usize, gates: Vec<Gate>) -> Result<Self, CircuitError> {
        for gate in &gates {
            gate.check(n_qubits)?;
        }
        Ok(Circuit {
            n_qubits,
            gates,
            roles: vec![None; n_qubits],
        })
    }

    /// Assign a role to a qubit.
    pub fn set_role(&mut self, qubit: usize, role: Role) {
        self.roles[qubit] = Some(role);
    }

    /// The role of a qubit, if one was assigned.
    pub fn role(&self, qubit: usize) -> Option<Role> {
        self.roles[qubit]
    }

    /// First qubit carrying the given role.
    pub fn find_role(&self, role: Role) -> Option<usize> {
        self.roles.iter().position(|r| *r == Some(role))
    }

    /// Gate-kind histogram (h, x, rz, cnot, toffoli, global_phase).
    pub fn gate_counts(&self) -> GateCounts {
        let mut counts = GateCounts::default();
        for gate in &self.gates {
            match gate {
                Gate::H(_) => counts.h += 1,
                Gate::X(_) => counts.x += 1,
                Gate::Rz(..) => counts.rz += 1,
                Gate::Cnot(..) => counts.cnot += 1,
                Gate::Toffoli(..) => counts.toffoli += 1,
                Gate::GlobalPhase(_) => counts.global_phase += 1,
            }
        }
        counts
    }

    /// Text export: one gate per line, `KIND q0 [q1 [q2]] [θ]` with θ at 17
    /// significant digits.
    pub fn to_gate_list(&self) -> String {
        let mut out = String::new();
        for gate in &self.gates {
            let line = match *gate {
                Gate::H(q) => format!("H {q}"),
                Gate::X(q) => format!("X {q}"),
                Gate::Rz(q, theta) => format!("RZ {q} {theta:.16e}"),
                Gate::Cnot(c, t) => format!("CNOT {c} {t}"),
                Gate::Toffoli(c1, c2, t) => format!("TOFFOLI {c1} {c2} {t}"),
                Gate::GlobalPhase(phi) => format!("GLOBAL_PHASE {phi:.16e}"),
            };
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    /// OpenQASM-2-style export (h/x/rz/cx/ccx); the global phase, which QASM 2
    /// cannot express, is emitted as a comment.
    pub fn to_openqasm(&self) -> String {
        let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
        let _ = writeln!(out, "qreg q[{}];", self.n_qubits);
        for gate in &self.gates {
            match *gate {
                Gate::H(q) => {
                    let _ = writeln!(out, "h q[{q}];");
                }
                Gate::X(q) => {
                    let _ = writeln!(out, "x q[{q}];");
                }
                Gate::Rz(q, theta) => {
                    let _ = writeln!(out, "rz({theta:.16e}) q[{q}];");
                }
                Gate::Cnot(c, t) => {
                    let _ = writeln!(out, "cx q[{c}],q[{t}];");
                }
                Gate::Toffoli(c1, c2, t) => {
                    let _ = writeln!(out, "ccx q[{c1}],q[{c2}],q[{t}];");
                }
                Gate::GlobalPhase(phi) => {
                    let _ = writeln!(out, "// global phase: {phi:.16e} rad");
                }
            }
        }
        out
    }
}

/// Gate-kind histogram of a circuit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GateCounts {
    pub h: usize,
    pub x: usize,
    pub rz: usize,
    pub cnot: usize,
    pub toffoli: usize,
    pub global_phase: usize,
}

impl GateCounts {
    /// RZ + CNOT count — the "native gate" tally the synthesis cost
    /// formulas refer to (state preparation H/X gates and the simulator's
    /// native Toffolis are tallied separately).
    pub fn native(&self) -> usize {
        self.rz + self.cnot
    }
}

/// Dense state over `2^n_qubits` amplitudes; qubit 0 is the MSB of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<C64>,
}

impl Statevector {
    /// Computational basis state |index⟩.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self, CircuitError> {
        if index >= (1usize << n_qubits) {
            return Err(CircuitError::InvalidInitialState { index, n_qubits });
        }
        let mut amps = vec![C64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Statevector { n_qubits, amps })
    }

    /// Register size.
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Amplitude of basis index `index`.
    pub fn amp(&self, index: usize) -> C64 {
        self.amps[index]
    }

    /// All amplitudes, indexed by basis index.
    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    /// |amplitude|² of basis index `index`.
    pub fn probability(&self, index: usize) -> f64 {
        self.amps[index].norm_sqr()
    }

    /// L2 norm.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Total probability of all basis states with the given qubit equal to
    /// `value` (a single-qubit measurement marginal).
    pub fn marginal(&self, qubit: usize, value: u8) -> f64 {
        let bit = 1usize << (self.n_qubits - 1 - qubit);
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| ((i & bit) != 0) == (value != 0))
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }
}

/// Measurement string for a basis index: qubit 0 (the MSB) printed first.
pub fn basis_label(index: usize, n_qubits: usize) -> String {
    format!("{index:0n_qubits$b}")
}

/// Minimum amplitude count before gate kernels fan out to the rayon pool.
/// Each pool dispatch costs a worker wakeup (tens of microseconds), so the
/// threshold is set where a full pass over the register clearly exceeds it.
#[cfg(feature = "parallel")]
const PAR_MIN_AMPS: usize = 1 << 16;

/// Apply a 2×2 kernel over all index pairs (g, g + 2^p) whose bits include
/// `ctrl_mask`. Pure elementwise pair updates, so the parallel and
/// sequential paths are bitwise identical.
fn apply_pairs<F>(amps: &mut [C64], p: usize, ctrl_mask: usize, parallel: bool, f: F)
where
    F: Fn(C64, C64) -> (C64, C64) + Sync,
{
    let half = 1usize << p;
    let full = half << 1;
    let inner = |base: usize, chunk: &mut [C64]| {
        let (lo, hi) = chunk.split_at_mut(half);
        for i in 0..half {
            if (base + i) & ctrl_mask == ctrl_mask {
                let (a, b) = f(lo[i], hi[i]);
                lo[i] = a;
                hi[i] = b;
            }
        }
    };
    #[cfg(feature = "parallel")]
    if parallel && amps.len() >= PAR_MIN_AMPS {
        use rayon::prelude::*;
        // Keep every task at a few thousand amplitudes minimum so rayon's
        // dispatch cost stays negligible even when the pair stride is tiny.
        const TASK_MIN_AMPS: usize = 1 << 12;
        if amps.len() / full >= 8 {
            let slab = full * (TASK_MIN_AMPS / full).max(1);
            amps.par_chunks_mut(slab)
                .enumerate()
                .for_each(|(si, chunk)| {
                    for (ci, sub) in chunk.chunks_mut(full).enumerate() {
                        inner(si * slab + ci * full, sub);
                    }
                });
        } else {
            // Few but large chunks (target bit near the top): parallelize the
            // pair loop inside each chunk instead.
            for (ci, chunk) in amps.chunks_mut(full).enumerate() {
                let base = ci * full;
                let (lo, hi) = chunk.split_at_mut(half);
                lo.par_iter_mut()
                    .zip(hi.par_iter_mut())
                    .enumerate()
                    .with_min_len(TASK_MIN_AMPS)
                    .for_each(|(i, (a, b))| {
                        if (base + i) & ctrl_mask == ctrl_mask {
                            let (x, y) = f(*a, *b);
                            *a = x;
                            *b = y;
                        }
                    });
            }
        }
        return;
    }
    let _ = parallel;
    for (ci, chunk) in amps.chunks_mut(full).enumerate() {
        inner(ci * full, chunk);
    }
}

fn apply_gate(amps: &mut [C64], n_qubits: usize, gate: &Gate, parallel: bool) {
    let pos = |q: usize| n_qubits - 1 - q;
    match *gate {
        Gate::H(q) => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            apply_pairs(amps, pos(q), 0, parallel, |a, b| ((a + b) * s, (a - b) * s));
        }
        Gate::X(q) => {
            apply_pairs(amps, pos(q), 0, parallel, |a, b| (b, a));
        }
        Gate::Rz(q, theta) => {
            let lo = C64::new(0.0, -0.5 * theta).exp();
            let hi = C64::new(0.0, 0.5 * theta).exp();
            apply_pairs(amps, pos(q), 0, parallel, move |a, b| (a * lo, b * hi));
        }
        Gate::Cnot(c, t) => {
            let mask = 1usize << pos(c);
            apply_pairs(amps, pos(t), mask, parallel, |a, b| (b, a));
        }
        Gate::Toffoli(c1, c2, t) => {
            let mask = (1usize << pos(c1)) | (1usize << pos(c2));
            apply_pairs(amps, pos(t), mask, parallel, |a, b| (b, a));
        }
        Gate::GlobalPhase(phi) => {
            let w = C64::new(0.0, phi).exp();
            #[cfg(feature = "parallel")]
            if parallel && amps.len() >= PAR_MIN_AMPS {
                use rayon::prelude::*;
                amps.par_iter_mut()
                    .with_min_len(1 << 12)
                    .for_each(|a| *a *= w);
                return;
            }
            let _ = parallel;
            for a in amps.iter_mut() {
                *a *= w;
            }
        }
    }
}

fn simulate_core(
    circuit: &Circuit,
    initial: usize,
    cap: usize,
    parallel: bool,
) -> Result<Statevector, CircuitError> {
    if circuit.n_qubits > cap {
        return Err(CircuitError::CapExceeded {
            n_qubits: circuit.n_qubits,
            cap,
        });
    }
    for gate in &circuit.gates {
        gate.check(circuit.n_qubits)?;
    }
    let mut state = Statevector::basis(circuit.n_qubits, initial)?;
    for gate in &circuit.gates {
        apply_gate(&mut state.amps, circuit.n_qubits, gate, parallel);
    }
    Ok(state)
}

/// Run the circuit on basis state |initial⟩ (parallel kernels when the
/// `parallel` feature is enabled; default cap [`DEFAULT_SIM_QUBITS`]).
pub fn simulate(circuit: &Circuit, initial: usize) -> Result<Statevector, CircuitError> {
    simulate_core(circuit, initial, DEFAULT_SIM_QUBITS, true)
}

/// [`simulate`] with an explicit qubit cap.
pub fn simulate_with_cap(
    circuit: &Circuit,
    initial: usize,
    cap: usize,
) -> Result<Statevector, CircuitError> {
    simulate_core(circuit, initial, cap, true)
}

/// Sequential twin of [`simulate`]: single-threaded kernels, bitwise-equal
/// output; the bench baseline and the fallback when `parallel` is off.
pub fn simulate_seq(circuit: &Circuit, initial: usize) -> Result<Statevector, CircuitError> {
    simulate_core(circuit, initial, DEFAULT_SIM_QUBITS, false)
}

/// Run the circuit on an arbitrary prepared state (consumed and returned).
pub fn simulate_from(
    circuit: &Circuit,
    mut state: Statevector,
) -> Result<Statevector, CircuitError> {
    if circuit.n_qubits != state.n_qubits {
        return Err(CircuitError::InvalidInitialState {
            index: state.amps.len(),
            n_qubits: circuit.n_qubits,
        });
    }
    for gate in &circuit.gates {
        gate.check(circuit.n_qubits)?;
    }
    for gate in &circuit.gates {
        apply_gate(&mut state.amps, circuit.n_qubits, gate, true);
    }
    Ok(state)
}

/// Multinomial shot sampling: draws `shots` measurement outcomes from
/// |amplitude|² and returns counts keyed by measurement string (qubit 0
/// first). Deterministic for a fixed seed.
///
/// Sampling walks the outcomes once, drawing each count from the binomial
/// conditional on the shots still unassigned — an exact factorization of the
/// multinomial distribution, costing O(outcomes) RNG draws rather than
/// O(shots).
pub fn sample(state: &Statevector, shots: u64, seed: u64) -> BTreeMap<String, u64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let probs: Vec<f64> = state.amps.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = probs.iter().sum();
    let last_nonzero = probs.iter().rposition(|&p| p > 0.0);
    let mut counts = BTreeMap::new();
    let mut shots_left = shots;
    let mut prob_left = total;
    for (index, &p) in probs.iter().enumerate() {
        if p <= 0.0 || shots_left == 0 {
            continue;
        }
        let draw = if Some(index) == last_nonzero {
            shots_left
        } else {
            let cond = (p / prob_left).clamp(0.0, 1.0);
            Binomial::new(shots_left, cond)
                .expect("conditional probability in [0, 1]")
                .sample(&mut rng)
        };
        if draw > 0 {
            counts.insert(basis_label(index, state.n_qubits), draw);
            shots_left -= draw;
        }
        prob_left -= p;
    }
    counts
}

/// Dense unitary of the circuit (row-major, dim = 2^n): column j is
/// `simulate(circuit, j)`. Capped at [`UNITARY_QUBIT_CAP`] qubits.
pub fn unitary_of(circuit: &Circuit) -> Result<Vec<C64>, CircuitError> {
    if circuit.n_qubits > UNITARY_QUBIT_CAP {
        return Err(CircuitError::CapExceeded {
            n_qubits: circuit.n_qubits,
            cap: UNITARY_QUBIT_CAP,
        });
    }
    let dim = 1usize << circuit.n_qubits;
    let mut matrix = vec![C64::new(0.0, 0.0); dim * dim];
    for j in 0..dim {
        let state = simulate_with_cap(circuit, j, UNITARY_QUBIT_CAP)?;
        for i in 0..dim {
            matrix[i * dim + j] = state.amps[i];
        }
    }
    Ok(matrix)
}
