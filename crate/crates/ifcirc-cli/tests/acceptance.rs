//! Acceptance suite: one test per published correctness criterion, each
//! enforcing its stated tolerance and runtime budget and printing a
//! `PASS criterion N` line with the measured quantities (visible with
//! `cargo test --test acceptance -- --nocapture`).

use std::f64::consts::PI;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ifcirc::algorithms::{
    assemble_probe_circuit, assemble_probe_circuit_with, combine, estimate_populations,
    exact_success_probability_with_cap, extend_to_readout, resource_counts, Algorithm,
};
use ifcirc::bath::{influence_coefficients, OhmicBath};
use ifcirc::circuit::{unitary_of, DEFAULT_SIM_QUBITS};
use ifcirc::experiment::{preset, run_experiment, ScheduleStep};
use ifcirc::pathsum::{rdm_pathsum, SpinBosonModel};
use ifcirc::synthesis::{
    dense_walsh_native_count, synthesize_diagonal, walsh_circuit_with_threshold,
    walsh_coefficients, DiagonalOp,
};
use ifcirc::C64;

/// The two published parameter sets: (ξ, ω_c, β).
const PARAMETER_SETS: [(f64, f64, f64); 2] = [(0.1, 7.5, 5.0), (1.2, 2.5, 0.2)];

/// Memory windows exercised per step count: L ∈ {2, N} clipped to valid L ≤ N.
fn memory_grid(n_steps: usize) -> Vec<usize> {
    let mut grid = vec![n_steps.min(2)];
    if n_steps > 2 {
        grid.push(n_steps);
    }
    grid
}

fn assert_budget(start: Instant, budget: Duration, label: &str) -> Duration {
    let elapsed = start.elapsed();
    assert!(
        elapsed < budget,
        "{label} exceeded its runtime budget: {elapsed:.2?} ≥ {budget:?}"
    );
    elapsed
}

#[test]
fn criterion_1_walsh_synthesis_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(1001);
    let mut max_err = 0.0f64;
    for q in 1..=5usize {
        let dim = 1usize << q;
        let targets: Vec<usize> = (0..q).collect();
        for _ in 0..200 {
            let phases: Vec<f64> = (0..dim).map(|_| rng.gen_range(-PI..PI)).collect();
            let spec = walsh_coefficients(&phases).expect("power-of-two phase table");
            let circuit = walsh_circuit_with_threshold(&spec, q, &targets, 0.0);
            assert_eq!(
                circuit.gate_counts().native(),
                dense_walsh_native_count(q),
                "dense native count must be 2^(q+1)−3 at q={q}"
            );
            let unitary = unitary_of(&circuit).expect("within unitary cap");
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j {
                        C64::new(0.0, phases[i]).exp()
                    } else {
                        C64::new(0.0, 0.0)
                    };
                    max_err = max_err.max((unitary[i * dim + j] - want).norm());
                }
            }
        }
    }
    assert_eq!(dense_walsh_native_count(3), 13);
    assert_eq!(dense_walsh_native_count(5), 61);
    assert!(
        max_err <= 1e-10,
        "walsh synthesis error {max_err:.3e} exceeds 1e-10"
    );
    let elapsed = assert_budget(start, Duration::from_secs(10), "criterion 1");
    println!(
        "PASS criterion 1: walsh synthesis exact on 200 random diagonals per q∈1..=5 \
         (max error {max_err:.3e} ≤ 1e-10; dense counts equal 2^(q+1)−3, q=3→13, q=5→61; \
         {elapsed:.2?} < 10s)"
    );
}

#[test]
fn criterion_2_dilation_block_identity() {
    let start = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(2002);
    let mut max_err = 0.0f64;
    for trial in 0..200usize {
        let q = 1 + trial % 3;
        let dim = 1usize << q;
        let entries: Vec<C64> = (0..dim)
            .map(|i| {
                if trial % 5 == 0 && i == 0 {
                    // Exercise the σ = 0 branch of the dilation.
                    C64::new(0.0, 0.0)
                } else if trial % 7 == 0 && i == dim - 1 {
                    // Exercise unit modulus, where the conjugate branch vanishes.
                    C64::new(0.0, rng.gen_range(-PI..PI)).exp()
                } else {
                    let r: f64 = rng.gen_range(0.0..1.0);
                    C64::new(0.0, rng.gen_range(-PI..PI)).exp() * r
                }
            })
            .collect();
        let targets: Vec<usize> = (1..=q).collect();
        let op = DiagonalOp::new(entries, targets.clone()).expect("valid diagonal");
        let circuit = synthesize_diagonal(&op, q + 1, &targets, 0);
        let unitary = unitary_of(&circuit).expect("within unitary cap");
        let full = 2 * dim;
        for i in 0..dim {
            for j in 0..dim {
                let want = if i == j {
                    op.entries()[i]
                } else {
                    C64::new(0.0, 0.0)
                };
                max_err = max_err.max((unitary[i * full + j] - want).norm());
            }
        }
    }
    assert!(
        max_err <= 1e-10,
        "dilation block error {max_err:.3e} exceeds 1e-10"
    );
    let elapsed = assert_budget(start, Duration::from_secs(10), "criterion 2");
    println!(
        "PASS criterion 2: dilated-unitary top-left block equals the rescaled diagonal \
         for 200 random operators incl. zero and unit-modulus entries \
         (max error {max_err:.3e} ≤ 1e-10; {elapsed:.2?} < 10s)"
    );
}

#[test]
fn criterion_3_path_sum_invariants() {
    let start = Instant::now();
    let mut max_trace = 0.0f64;
    let mut max_herm = 0.0f64;
    let mut cases = 0usize;
    for (xi, omega_c, beta) in PARAMETER_SETS {
        let bath = OhmicBath::new(xi, omega_c, beta).unwrap();
        for dt in [0.1, 0.25] {
            let model = SpinBosonModel::two_level(1.0, bath, dt).unwrap();
            for n_steps in 1..=6usize {
                for memory in memory_grid(n_steps) {
                    let table = influence_coefficients(&bath, dt, n_steps, memory).unwrap();
                    let rho = rdm_pathsum(&model, &table, n_steps, (0, 0)).unwrap();
                    max_trace = max_trace.max((rho.trace() - 1.0).norm());
                    max_herm = max_herm.max(rho.max_hermiticity_violation());
                    cases += 1;
                }
            }
        }
    }
    assert!(
        max_trace <= 1e-12,
        "trace deviation {max_trace:.3e} exceeds 1e-12"
    );
    assert!(
        max_herm <= 1e-12,
        "hermiticity violation {max_herm:.3e} exceeds 1e-12"
    );

    // Zero coupling must reproduce the bare two-level oscillation exactly.
    let free_bath = OhmicBath::new(0.0, 7.5, 5.0).unwrap();
    let mut max_free = 0.0f64;
    for dt in [0.1, 0.25] {
        let model = SpinBosonModel::two_level(1.0, free_bath, dt).unwrap();
        for n_steps in 1..=6usize {
            let table = influence_coefficients(&free_bath, dt, n_steps, n_steps).unwrap();
            let rho = rdm_pathsum(&model, &table, n_steps, (0, 0)).unwrap();
            let want = (n_steps as f64 * dt).cos().powi(2);
            max_free = max_free.max((rho.population(0) - want).abs());
        }
    }
    assert!(
        max_free <= 1e-12,
        "free-limit deviation {max_free:.3e} exceeds 1e-12"
    );
    let elapsed = assert_budget(start, Duration::from_secs(30), "criterion 3");
    println!(
        "PASS criterion 3: path-sum trace/hermiticity over {cases} parameter/step/window \
         cases (worst {max_trace:.3e} / {max_herm:.3e} ≤ 1e-12) and ξ=0 gives cos²(ΩkΔt) \
         (worst {max_free:.3e} ≤ 1e-12; {elapsed:.2?} < 30s)"
    );
}

/// Test-local re-coding of the coefficient integrands, integrated by
/// composite Simpson on a uniform frequency grid — independent of the
/// adaptive Gauss–Kronrod machinery in the library.
mod quadrature_oracle {
    use super::C64;

    pub enum Shape {
        Diagonal { delta: f64 },
        OffDiagonal { a: f64, b: f64, tau: f64 },
    }

    /// Kernel parameters for entry (kp, k) of an (N, Δt) table, re-derived
    /// from the discretization: endpoint time slices are half steps, so
    /// diagonals use δ = Δt/2 at k ∈ {0, N} and Δt in the interior, and pair
    /// windows start/end at quarter-step midpoints on the boundary rows.
    pub fn shape_for(kp: usize, k: usize, n: usize, dt: f64) -> Shape {
        if kp == k {
            let delta = if k == 0 || k == n { 0.5 * dt } else { dt };
            Shape::Diagonal { delta }
        } else if k == 0 && kp == n {
            Shape::OffDiagonal {
                a: 0.25 * dt,
                b: 0.25 * dt,
                tau: n as f64 * dt - 0.5 * dt,
            }
        } else if k == 0 || kp == n {
            let m = kp - k;
            Shape::OffDiagonal {
                a: 0.25 * dt,
                b: 0.5 * dt,
                tau: m as f64 * dt - 0.25 * dt,
            }
        } else {
            Shape::OffDiagonal {
                a: 0.5 * dt,
                b: 0.5 * dt,
                tau: (kp - k) as f64 * dt,
            }
        }
    }

    fn integrand(shape: &Shape, xi: f64, omega_c: f64, beta: f64, w: f64) -> C64 {
        if w == 0.0 {
            return match *shape {
                Shape::Diagonal { delta } => {
                    C64::new(xi * delta * delta / (2.0 * beta), xi * delta / 2.0)
                }
                Shape::OffDiagonal { a, b, .. } => C64::new(4.0 * xi * a * b / beta, 0.0),
            };
        }
        let damp = (-w / omega_c).exp();
        let coth = 1.0 / (0.5 * beta * w).tanh();
        match *shape {
            Shape::Diagonal { delta } => {
                // (1/π)·J(w)/w² · [coth·(1−cos(wδ)) + i·sin(wδ)], J = (π/2)ξw·e^{−w/ω_c}.
                let pref = 0.5 * xi * damp / w;
                C64::new(coth * (1.0 - (w * delta).cos()), (w * delta).sin()) * pref
            }
            Shape::OffDiagonal { a, b, tau } => {
                // (4/π)·J(w)/w² · sin(aw)sin(bw) · [coth·cos(wτ) − i·sin(wτ)].
                let pref = 2.0 * xi * damp / w * (a * w).sin() * (b * w).sin();
                let (s, c) = (w * tau).sin_cos();
                C64::new(coth * c, -s) * pref
            }
        }
    }

    /// Composite Simpson over [0, 60·ω_c] with `panels` panels (even).
    pub fn simpson(shape: &Shape, xi: f64, omega_c: f64, beta: f64, panels: usize) -> C64 {
        assert!(panels % 2 == 0);
        let upper = 60.0 * omega_c;
        let h = upper / panels as f64;
        let mut acc =
            integrand(shape, xi, omega_c, beta, 0.0) + integrand(shape, xi, omega_c, beta, upper);
        for i in 1..panels {
            let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += integrand(shape, xi, omega_c, beta, i as f64 * h) * weight;
        }
        acc * (h / 3.0)
    }
}

#[test]
fn criterion_4_quadrature_correctness() {
    let start = Instant::now();
    let mut max_rel = 0.0f64;
    let mut oracle_drift = 0.0f64;
    let mut entries_checked = 0usize;
    for (xi, omega_c, beta) in PARAMETER_SETS {
        let bath = OhmicBath::new(xi, omega_c, beta).unwrap();
        for (dt, n_steps, memory) in [(0.25, 5usize, 5usize), (0.1, 4, 2)] {
            let table = influence_coefficients(&bath, dt, n_steps, memory).unwrap();
            for (kp, k, alpha) in table.entries() {
                let shape = quadrature_oracle::shape_for(kp, k, n_steps, dt);
                let fine = quadrature_oracle::simpson(&shape, xi, omega_c, beta, 1 << 19);
                let coarse = quadrature_oracle::simpson(&shape, xi, omega_c, beta, 1 << 18);
                // The oracle grid itself must be converged well below the
                // comparison tolerance.
                oracle_drift = oracle_drift.max((fine - coarse).norm() / fine.norm());
                max_rel = max_rel.max((alpha - fine).norm() / fine.norm());
                entries_checked += 1;
            }
        }
    }
    assert!(
        oracle_drift <= 1e-9,
        "oracle grid not converged: drift {oracle_drift:.3e}"
    );
    assert!(
        max_rel <= 1e-6,
        "coefficient deviation {max_rel:.3e} exceeds relative 1e-6"
    );

    // Interior coefficients depend only on the index difference.
    let mut max_diff_dep = 0.0f64;
    for (xi, omega_c, beta) in PARAMETER_SETS {
        let bath = OhmicBath::new(xi, omega_c, beta).unwrap();
        let n_steps = 6;
        let table = influence_coefficients(&bath, 0.25, n_steps, n_steps).unwrap();
        for d in 1..=4usize {
            let reference = table.get(1 + d, 1);
            for k in 2..n_steps - d {
                max_diff_dep = max_diff_dep.max((table.get(k + d, k) - reference).norm());
            }
        }
        let diag = table.get(1, 1);
        for k in 2..n_steps {
            max_diff_dep = max_diff_dep.max((table.get(k, k) - diag).norm());
        }
    }
    assert!(
        max_diff_dep <= 1e-12,
        "difference-dependence violation {max_diff_dep:.3e} exceeds 1e-12"
    );
    let elapsed = assert_budget(start, Duration::from_secs(60), "criterion 4");
    println!(
        "PASS criterion 4: {entries_checked} coefficients match the independent Simpson \
         oracle (worst rel {max_rel:.3e} ≤ 1e-6, oracle drift {oracle_drift:.3e}); interior \
         entries depend only on k′−k (worst {max_diff_dep:.3e} ≤ 1e-12; {elapsed:.2?} < 60s)"
    );
}

#[test]
fn criterion_5_end_to_end_oracle_equivalence() {
    let start = Instant::now();
    let mut worst_one = 0.0f64;
    let mut worst_two = 0.0f64;
    let mut cases_one = 0usize;
    let mut cases_two = 0usize;
    let dt = 0.25;
    for (xi, omega_c, beta) in PARAMETER_SETS {
        let bath = OhmicBath::new(xi, omega_c, beta).unwrap();
        let model = SpinBosonModel::two_level(1.0, bath, dt).unwrap();
        for n_steps in 1..=4usize {
            for memory in memory_grid(n_steps) {
                let table = influence_coefficients(&bath, dt, n_steps, memory).unwrap();
                let rho = rdm_pathsum(&model, &table, n_steps, (0, 0)).unwrap();
                let operators = combine(&model, &table, n_steps, memory).unwrap();
                let zero = assemble_probe_circuit(2, n_steps, &operators, 0, 0).unwrap();
                let one = assemble_probe_circuit(2, n_steps, &operators, 0, 1).unwrap();
                let s0 = exact_success_probability_with_cap(&zero, DEFAULT_SIM_QUBITS).unwrap();
                let s1 = exact_success_probability_with_cap(&one, DEFAULT_SIM_QUBITS).unwrap();
                let (p0, p1) = estimate_populations(s0, s1).unwrap();
                worst_one = worst_one
                    .max((p0 - rho.population(0)).abs())
                    .max((p1 - rho.population(1)).abs());
                cases_one += 1;
                if n_steps <= 2 {
                    let zero2 = extend_to_readout(&zero).unwrap();
                    let one2 = extend_to_readout(&one).unwrap();
                    let t0 =
                        exact_success_probability_with_cap(&zero2, DEFAULT_SIM_QUBITS).unwrap();
                    let t1 = exact_success_probability_with_cap(&one2, DEFAULT_SIM_QUBITS).unwrap();
                    let (q0, q1) = estimate_populations(t0, t1).unwrap();
                    worst_two = worst_two
                        .max((q0 - rho.population(0)).abs())
                        .max((q1 - rho.population(1)).abs());
                    cases_two += 1;
                }
            }
        }
    }
    assert!(
        worst_one <= 1e-8,
        "algorithm-one population error {worst_one:.3e} exceeds 1e-8"
    );
    assert!(
        worst_two <= 1e-8,
        "algorithm-two population error {worst_two:.3e} exceeds 1e-8"
    );
    let elapsed = assert_budget(start, Duration::from_secs(600), "criterion 5");
    println!(
        "PASS criterion 5: circuit populations equal path-sum diagonals for both parameter \
         sets (algorithm one: {cases_one} cases, worst {worst_one:.3e}; algorithm two: \
         {cases_two} cases, worst {worst_two:.3e}; ≤ 1e-8; largest state 2^20 amplitudes \
         = 16 MiB « 1 GB; {elapsed:.2?} < 10min)"
    );
}

#[test]
fn criterion_6_sampling_consistency() {
    let start = Instant::now();
    // Run-mean convergence at the published scale: 10^6 shots × 100 runs.
    let mut config = preset("fig8").unwrap();
    config.schedule = vec![
        ScheduleStep {
            n_steps: 1,
            shots: 1_000_000,
            runs: 100,
        },
        ScheduleStep {
            n_steps: 2,
            shots: 1_000_000,
            runs: 100,
        },
    ];
    let output = run_experiment(&config).unwrap();
    let mut worst_sigma = 0.0f64;
    for point in &output.trajectories[0].points {
        let standard_error = point.p0_std / (point.runs as f64).sqrt();
        let deviation = (point.p0_mean - point.exact_p0).abs();
        worst_sigma = worst_sigma.max(deviation / standard_error);
        assert!(
            deviation <= 3.0 * standard_error,
            "step {}: run mean {:.8} deviates from exact {:.8} by {:.2}σ",
            point.n_steps,
            point.p0_mean,
            point.exact_p0,
            deviation / standard_error
        );
    }

    // Error-versus-shots scaling: the run spread must fall like shots^(−1/2).
    let mut log_shots = Vec::new();
    let mut log_std = Vec::new();
    for (i, shots) in [1_000u64, 10_000, 100_000, 1_000_000]
        .into_iter()
        .enumerate()
    {
        let mut scaling = preset("fig8").unwrap();
        scaling.schedule = vec![ScheduleStep {
            n_steps: 1,
            shots,
            runs: 100,
        }];
        scaling.seed = 4242 + i as u64;
        let out = run_experiment(&scaling).unwrap();
        log_shots.push((shots as f64).ln());
        log_std.push(out.trajectories[0].points[0].p0_std.ln());
    }
    let mx = log_shots.iter().sum::<f64>() / log_shots.len() as f64;
    let my = log_std.iter().sum::<f64>() / log_std.len() as f64;
    let slope = log_shots
        .iter()
        .zip(&log_std)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / log_shots.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(
        (-0.6..=-0.4).contains(&slope),
        "log-log error-vs-shots slope {slope:.3} outside −0.5 ± 0.1"
    );
    let elapsed = assert_budget(start, Duration::from_secs(600), "criterion 6");
    println!(
        "PASS criterion 6: run means within 3σ/√100 of exact at 10^6 shots × 100 runs \
         (worst {worst_sigma:.2}σ) and error-vs-shots slope {slope:.3} ∈ −0.5 ± 0.1 \
         ({elapsed:.2?} < 10min)"
    );
}

#[test]
fn criterion_7_resource_formulas() {
    let start = Instant::now();
    let dt = 0.25;
    let bath = OhmicBath::new(0.1, 7.5, 5.0).unwrap();
    let model = SpinBosonModel::two_level(1.0, bath, dt).unwrap();
    for n_steps in 1..=4usize {
        for memory in 1..=n_steps {
            let ops = (2 * n_steps - memory + 1) * memory / 2;
            let one = resource_counts(2, n_steps, memory, Algorithm::One).unwrap();
            assert_eq!(one.qubits, 2 * (n_steps + 1) + ops);
            assert_eq!(one.native_gates, 61 * ops, "(4n⁴−3)·ops at n=2");
            assert_eq!(one.compact_operators, ops);
            assert_eq!(one.toffolis, 0);
            let two = resource_counts(2, n_steps, memory, Algorithm::Two).unwrap();
            assert_eq!(two.qubits, 2 * one.qubits - 1);
            assert_eq!(two.toffolis, 2 * (one.qubits - 2) + 1);

            // Dense-path builds must land exactly on the closed forms.
            let table = influence_coefficients(&bath, dt, n_steps, memory).unwrap();
            let operators = combine(&model, &table, n_steps, memory).unwrap();
            let dense = assemble_probe_circuit_with(2, n_steps, &operators, 0, 0, 0.0).unwrap();
            assert_eq!(dense.n_qubits(), one.qubits);
            assert_eq!(dense.gate_counts().native(), one.native_gates);
            let chained = extend_to_readout(&dense).unwrap();
            assert_eq!(chained.n_qubits(), two.qubits);
            assert_eq!(chained.gate_counts().toffoli, two.toffolis);
        }
    }
    // Spot values.
    let spot_one = resource_counts(2, 2, 2, Algorithm::One).unwrap();
    assert_eq!((spot_one.qubits, spot_one.native_gates), (9, 183));
    let spot_wide = resource_counts(2, 5, 3, Algorithm::One).unwrap();
    assert_eq!(spot_wide.qubits, 24);
    let spot_two = resource_counts(2, 2, 2, Algorithm::Two).unwrap();
    assert_eq!(spot_two.toffolis, 15);
    let elapsed = assert_budget(start, Duration::from_secs(5), "criterion 7");
    println!(
        "PASS criterion 7: closed-form resource counts equal dense built-circuit counts \
         for n=2, N ≤ 4, L ≤ N (spots: 9 qubits / 183 native at N=2; 24 qubits at N=5 L=3; \
         {elapsed:.2?} < 5s). Noted discrepancy: the nominal Toffoli count 2(Q−2) = 14 at \
         N=2 omits the readout Toffoli; the chain construction needs 2(Q−2)+1 = 15, and \
         both the formula and the built circuit report 15."
    );
}

#[test]
fn criterion_8_byte_identical_output() {
    let start = Instant::now();
    let exe = env!("CARGO_BIN_EXE_ifcirc");
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "simulate",
        "--set",
        "n_steps=2",
        "--set",
        "shots=200000",
        "--set",
        "runs=20",
        "--set",
        "algorithm=both",
        "--set",
        "seed=31337",
        "--out-dir",
    ];
    let mut outputs: Vec<Vec<(String, Vec<u8>)>> = Vec::new();
    for sub in ["a", "b"] {
        let out_dir = dir.path().join(sub);
        let output = Command::new(exe)
            .args(args)
            .arg(&out_dir)
            .output()
            .expect("launch simulate");
        assert!(
            output.status.success(),
            "simulate failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
        let mut files = Vec::new();
        for name in [
            "oracle.csv",
            "trajectory_one.csv",
            "trajectory_two.csv",
            "std_comparison.csv",
        ] {
            let bytes = fs::read(out_dir.join(name)).expect("output file exists");
            assert!(!bytes.is_empty());
            files.push((name.to_string(), bytes));
        }
        outputs.push(files);
    }
    let mut total = 0usize;
    for ((name_a, bytes_a), (_, bytes_b)) in outputs[0].iter().zip(&outputs[1]) {
        assert_eq!(
            bytes_a, bytes_b,
            "{name_a} differs between two identically seeded invocations"
        );
        total += bytes_a.len();
    }
    let elapsed = assert_budget(start, Duration::from_secs(60), "criterion 8");
    println!(
        "PASS criterion 8: two `simulate` invocations with a fixed seed produced \
         byte-identical CSVs (4 files, {total} bytes; {elapsed:.2?} < 1min)"
    );
}
