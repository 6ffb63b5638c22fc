//! Command-line front end: configuration-driven influence-functional
//! coefficient dumps, path-sum oracle trajectories, circuit export,
//! shot-sampled experiments, self-verification, and resource reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use ifcirc::algorithms::{assemble_probe_circuit, combine, extend_to_readout, Algorithm};
use ifcirc::bath::influence_coefficients;
use ifcirc::experiment::{
    oracle_csv, oracle_trajectory, parse_config, preset, resource_table, run_experiment,
    std_comparison_csv, trajectory_csv, verify, RunConfig, RunMode,
};

#[derive(Parser)]
#[command(
    name = "ifcirc",
    version,
    about = "Influence-functional quantum circuits for non-Markovian open-system dynamics",
    long_about = "Computes discretized influence-functional coefficients for an Ohmic bath, \
                  compiles them into exact diagonal quantum circuits via unitary dilation and \
                  Walsh synthesis, runs shot-sampled population experiments on a built-in \
                  statevector simulator, and cross-checks every stage against a classical \
                  path-sum oracle."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Configuration flags shared by every subcommand. Precedence, lowest to
/// highest: preset (default fig8), config file keys in file order, then
/// --set overrides in command-line order.
#[derive(Args)]
struct ConfigArgs {
    /// Built-in parameter set: fig8 (weak coupling) or fig9 (strong coupling).
    #[arg(long)]
    preset: Option<String>,
    /// Flat key=value configuration file (# comments allowed).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one key, e.g. --set xi=0.3 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        if let Some(name) = &self.preset {
            // Fail fast with the preset name list before assembling text.
            preset(name)?;
        }
        let mut text = String::new();
        if let Some(name) = &self.preset {
            text.push_str(&format!("preset={name}\n"));
        }
        if let Some(path) = &self.config {
            let body = fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            if self.preset.is_some() {
                // The command-line preset is the base; drop any preset line
                // in the file so the earlier key wins explicitly.
                for line in body.lines() {
                    if line.trim_start().starts_with("preset") {
                        continue;
                    }
                    text.push_str(line);
                    text.push('\n');
                }
            } else {
                text.push_str(&body);
                if !body.ends_with('\n') {
                    text.push('\n');
                }
            }
        }
        for pair in &self.set {
            if !pair.contains('=') {
                bail!("--set expects KEY=VALUE, got {pair:?}");
            }
            text.push_str(pair);
            text.push('\n');
        }
        Ok(parse_config(&text)?)
    }
}

#[derive(Args)]
struct OutputArg {
    /// Write to this file instead of stdout.
    #[arg(long, short, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Dump the influence-functional coefficient table as CSV.
    Coeffs {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of time steps N (default: largest scheduled step).
        #[arg(long)]
        steps: Option<usize>,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Compute the classical path-sum population trajectory as CSV.
    Pathsum {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Build one probe circuit and export its gate list.
    Circuit {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of time steps N (default: largest scheduled step).
        #[arg(long)]
        steps: Option<usize>,
        /// Probe basis state (default: the configured probe).
        #[arg(long)]
        probe: Option<usize>,
        /// Export OpenQASM 2.0 instead of the plain gate list.
        #[arg(long)]
        qasm: bool,
        #[command(flatten)]
        out: OutputArg,
    },
    /// Run the configured shot-sampling experiment and write CSV files.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for the CSV outputs (created if missing).
        #[arg(long, value_name = "DIR", default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run the self-verification suite (exit 1 if any check fails).
    Verify {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Report closed-form qubit and gate counts for the configured sizes.
    Resources {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutputArg,
    },
}

fn emit(out: &OutputArg, content: &str) -> Result<()> {
    match &out.output {
        Some(path) => {
            fs::write(path, content).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn max_scheduled_step(config: &RunConfig) -> usize {
    config.schedule.iter().map(|s| s.n_steps).max().unwrap_or(1)
}

fn cmd_coeffs(config: &RunConfig, steps: Option<usize>, out: &OutputArg) -> Result<()> {
    let n = steps.unwrap_or_else(|| max_scheduled_step(config));
    let memory = config.memory_for(n);
    let model = config.model()?;
    let table = influence_coefficients(&model.bath, config.dt, n, memory)?;
    let mut content = String::new();
    content.push_str(&format!(
        "# influence-functional coefficients (N={n}, L={memory})\n"
    ));
    for line in config.echo().lines() {
        content.push_str(&format!("# {line}\n"));
    }
    content.push_str(&table.to_csv());
    emit(out, &content)
}

fn cmd_pathsum(config: &RunConfig, out: &OutputArg) -> Result<()> {
    let points = oracle_trajectory(config)?;
    emit(out, &oracle_csv(config, &points))
}

fn cmd_circuit(
    config: &RunConfig,
    steps: Option<usize>,
    probe: Option<usize>,
    qasm: bool,
    out: &OutputArg,
) -> Result<()> {
    let algorithm = match config.algorithm {
        RunMode::One => Algorithm::One,
        RunMode::Two => Algorithm::Two,
        other => bail!(
            "circuit export needs algorithm=one or algorithm=two (got {})",
            other.as_str()
        ),
    };
    let n = steps.unwrap_or_else(|| max_scheduled_step(config));
    let probe = probe.unwrap_or(config.probe);
    let memory = config.memory_for(n);
    let model = config.model()?;
    let table = influence_coefficients(&model.bath, config.dt, n, memory)?;
    let operators = combine(&model, &table, n, memory)?;
    let mut circuit =
        assemble_probe_circuit(config.n_levels, n, &operators, config.initial, probe)?;
    if algorithm == Algorithm::Two {
        circuit = extend_to_readout(&circuit)?;
    }
    if qasm {
        emit(out, &circuit.to_openqasm())
    } else {
        let counts = circuit.gate_counts();
        let mut content = format!(
            "# probe circuit: algorithm {}, N={}, L={}, initial={}, probe={}\n\
             # qubits={} native_gates={} toffolis={}\n",
            match algorithm {
                Algorithm::One => "one",
                Algorithm::Two => "two",
            },
            n,
            memory,
            config.initial,
            probe,
            circuit.n_qubits(),
            counts.native(),
            counts.toffoli,
        );
        content.push_str(&circuit.to_gate_list());
        emit(out, &content)
    }
}

fn cmd_simulate(config: &RunConfig, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let output = run_experiment(config)?;
    let mut written = Vec::new();
    let oracle_path = out_dir.join("oracle.csv");
    fs::write(&oracle_path, oracle_csv(config, &output.oracle))
        .with_context(|| format!("writing {}", oracle_path.display()))?;
    written.push(oracle_path);
    for trajectory in &output.trajectories {
        let name = match trajectory.algorithm {
            Algorithm::One => "trajectory_one.csv",
            Algorithm::Two => "trajectory_two.csv",
        };
        let path = out_dir.join(name);
        fs::write(&path, trajectory_csv(config, trajectory))
            .with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    if let [one, two] = &output.trajectories[..] {
        let path = out_dir.join("std_comparison.csv");
        fs::write(&path, std_comparison_csv(config, one, two))
            .with_context(|| format!("writing {}", path.display()))?;
        written.push(path);
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_verify(config: &RunConfig) -> Result<ExitCode> {
    let report = verify(config)?;
    print!("{}", report.render());
    if report.all_passed() {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: verification failed");
        Ok(ExitCode::FAILURE)
    }
}

fn cmd_resources(config: &RunConfig, out: &OutputArg) -> Result<()> {
    let rows = resource_table(config)?;
    let mut content = String::from("# closed-form resource counts per scheduled step\n");
    for line in config.echo().lines() {
        content.push_str(&format!("# {line}\n"));
    }
    content.push_str("step,algorithm,qubits,native_gates,toffolis,compact_operators\n");
    for (n, one, two) in rows {
        content.push_str(&format!(
            "{},one,{},{},{},{}\n",
            n, one.qubits, one.native_gates, one.toffolis, one.compact_operators
        ));
        content.push_str(&format!(
            "{},two,{},{},{},{}\n",
            n, two.qubits, two.native_gates, two.toffolis, two.compact_operators
        ));
    }
    emit(out, &content)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Coeffs { config, steps, out } => {
            cmd_coeffs(&config.resolve()?, *steps, out)?;
        }
        Command::Pathsum { config, out } => {
            cmd_pathsum(&config.resolve()?, out)?;
        }
        Command::Circuit {
            config,
            steps,
            probe,
            qasm,
            out,
        } => {
            cmd_circuit(&config.resolve()?, *steps, *probe, *qasm, out)?;
        }
        Command::Simulate { config, out_dir } => {
            cmd_simulate(&config.resolve()?, out_dir)?;
        }
        Command::Verify { config } => {
            return cmd_verify(&config.resolve()?);
        }
        Command::Resources { config, out } => {
            cmd_resources(&config.resolve()?, out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
