//! `qfactor`: factor odd semiprimes with CVaR-VQE on a statevector
//! simulator, and reproduce the desk-scale benchmark studies.
//!
//! Every subcommand is deterministic for a fixed seed/config: rerunning
//! writes byte-identical JSON-lines and CSV files. Machine-readable errors
//! go to stderr as a single JSON object; the exit code is nonzero.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use qfactor::bench::{
    self, alpha_error_study, cost_function_study, difference_study, AlphaStudyConfig,
    CostStudyConfig, DiffStudyConfig, ExperimentConfig,
};
use qfactor::hamiltonian::{BooleanPolynomial, CostFunction, LogBase};
use qfactor::instance::{enumerate_instances_with, find_factors, FactoringInstance};
use qfactor::optimize::{Method, OptimizerConfig};
use qfactor::simulator::{prepare_state, AnsatzFamily, AnsatzSpec, InitialState};
use qfactor::vqe::{run_vqe, run_with_alpha_schedule, InitialParams, RunConfig};

#[derive(Parser)]
#[command(name = "qfactor", version, about = "CVaR-VQE factorization of odd semiprimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the qubit layout of one instance (factors filled when n is a
    /// desk-scale semiprime).
    Instance {
        n: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every instance requiring exactly N qubits.
    Enumerate {
        qubits: u32,
        /// Also admit squares p = q (default keeps distinct primes only).
        #[arg(long)]
        include_squares: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the instance Hamiltonian as Pauli-Z terms (coeff<TAB>Z/I line
    /// per term).
    Pauli {
        n: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run CVaR-VQE on one instance.
    Solve(SolveArgs),
    /// Run an experiment grid described by a JSON config file.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Admit grids beyond desk scale.
        #[arg(long)]
        long_run: bool,
    },
    /// Success rate against |p - q| over every instance at one qubit count.
    DiffStudy {
        qubits: u32,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        /// Comma-separated ansatz families.
        #[arg(long, default_value = "linear_cnot,parallel_cnot")]
        families: String,
        #[arg(long, default_value_t = 3)]
        layers: u32,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 0.1)]
        threshold: f64,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        include_squares: bool,
        #[arg(long)]
        long_run: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-evaluation CVaR and standard error across alpha and shot counts,
    /// starting from |+>^N.
    AlphaStudy {
        n: u64,
        #[arg(long, default_value = "0.01,0.1,0.25,0.5,0.75", value_name = "LIST")]
        alphas: String,
        #[arg(long, default_value = "1000,10000", value_name = "LIST")]
        shots_list: String,
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        #[arg(long, default_value_t = 3)]
        layers: u32,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        long_run: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success vs shots for the three cost shapes under COBYLA and NFT.
    CostStudy {
        n: u64,
        #[arg(long, default_value = "1000,10000", value_name = "LIST")]
        shots_list: String,
        #[arg(long, default_value_t = 50)]
        seeds: u64,
        #[arg(long, default_value_t = 3)]
        layers: u32,
        #[arg(long, default_value_t = 0.01)]
        alpha: f64,
        #[arg(long)]
        max_evals: Option<usize>,
        #[arg(long)]
        long_run: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolveArgs {
    n: u64,
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Shots per evaluation; omit for exact (infinite-shot) mode.
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long, default_value_t = 3)]
    layers: u32,
    #[arg(long, default_value = "linear_cnot")]
    ansatz: String,
    /// Cost shape: hamiltonian, logarithm or inverse.
    #[arg(long, default_value = "hamiltonian")]
    cost: String,
    /// Epsilon for the inverse cost.
    #[arg(long, default_value_t = 0.001)]
    epsilon: f64,
    /// Logarithm base: natural, two or ten.
    #[arg(long, default_value = "natural")]
    log_base: String,
    #[arg(long, default_value = "cobyla")]
    optimizer: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated alpha schedule; stages stop at the first success.
    #[arg(long)]
    alpha_schedule: Option<String>,
    #[arg(long, default_value_t = 0.01)]
    threshold: f64,
    #[arg(long, default_value = "zeros")]
    initial_state: String,
    /// Budget override; default is 50 * N * L.
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    stop_on_success: bool,
    #[arg(long)]
    long_run: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> std::process::ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            let payload = serde_json::json!({ "error": format!("{err:#}") });
            eprintln!("{payload}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Instance { n, out } => cmd_instance(n, out.as_deref()),
        Command::Enumerate { qubits, include_squares, out } => {
            cmd_enumerate(qubits, include_squares, out.as_deref())
        }
        Command::Pauli { n, out } => cmd_pauli(n, out.as_deref()),
        Command::Solve(args) => cmd_solve(args),
        Command::Sweep { config, out, long_run } => cmd_sweep(&config, out.as_deref(), long_run),
        Command::DiffStudy {
            qubits,
            seeds,
            families,
            layers,
            alpha,
            threshold,
            max_evals,
            include_squares,
            long_run,
            out,
        } => {
            let config = DiffStudyConfig {
                families: parse_list(&families, parse_family)?,
                layers,
                alpha,
                fidelity_threshold: threshold,
                seeds,
                seed_base: 0,
                max_evals,
                long_run,
                include_squares,
            };
            cmd_diff_study(qubits, &config, out.as_deref())
        }
        Command::AlphaStudy { n, alphas, shots_list, seeds, layers, max_evals, long_run, out } => {
            let config = AlphaStudyConfig {
                alphas: parse_list(&alphas, |s| {
                    s.parse::<f64>().map_err(|e| anyhow!("bad alpha '{s}': {e}"))
                })?,
                shots: parse_list(&shots_list, |s| {
                    s.parse::<u64>().map_err(|e| anyhow!("bad shot count '{s}': {e}"))
                })?,
                seeds,
                layers,
                seed_base: 0,
                max_evals,
                long_run,
            };
            cmd_alpha_study(n, &config, out.as_deref())
        }
        Command::CostStudy { n, shots_list, seeds, layers, alpha, max_evals, long_run, out } => {
            let config = CostStudyConfig {
                shots: parse_list(&shots_list, |s| {
                    s.parse::<u64>().map_err(|e| anyhow!("bad shot count '{s}': {e}"))
                })?,
                seeds,
                layers,
                alpha,
                seed_base: 0,
                max_evals,
                long_run,
                ..CostStudyConfig::default()
            };
            cmd_cost_study(n, &config, out.as_deref())
        }
    }
}

fn parse_list<T>(list: &str, parse: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse)
        .collect()
}

fn parse_family(s: &str) -> Result<AnsatzFamily> {
    s.parse().map_err(|e: String| anyhow!(e))
}

fn resolve_instance(n: u64) -> Result<FactoringInstance> {
    let instance = FactoringInstance::new(n)?;
    Ok(match find_factors(n) {
        Some((p, q)) => instance.with_factors(p, q)?,
        None => instance,
    })
}

fn ensure_out(out: Option<&Path>) -> Result<Option<PathBuf>> {
    match out {
        None => Ok(None),
        Some(dir) => {
            std::fs::create_dir_all(dir)
                .with_context(|| format!("creating output directory {}", dir.display()))?;
            Ok(Some(dir.to_path_buf()))
        }
    }
}

fn cmd_instance(n: u64, out: Option<&Path>) -> Result<()> {
    let instance = resolve_instance(n)?;
    println!(
        "n={} B={} Np={} Nq={} N={} qubits{}",
        instance.n(),
        instance.bits_n(),
        instance.bits_p(),
        instance.bits_q(),
        instance.qubits(),
        match instance.factors() {
            Some((p, q)) => format!(" (factors {p} x {q})"),
            None => String::new(),
        }
    );
    let json = serde_json::to_string(&instance)?;
    println!("{json}");
    if let Some(dir) = ensure_out(out)? {
        std::fs::write(dir.join("instance.json"), format!("{json}\n"))?;
    }
    Ok(())
}

fn cmd_enumerate(qubits: u32, include_squares: bool, out: Option<&Path>) -> Result<()> {
    let instances = enumerate_instances_with(qubits, include_squares)?;
    let mut lines = String::new();
    for instance in &instances {
        lines.push_str(&serde_json::to_string(instance)?);
        lines.push('\n');
    }
    print!("{lines}");
    eprintln!("{} instances at N={qubits}", instances.len());
    if let Some(dir) = ensure_out(out)? {
        std::fs::write(dir.join("instances.jsonl"), lines)?;
    }
    Ok(())
}

fn cmd_pauli(n: u64, out: Option<&Path>) -> Result<()> {
    let instance = FactoringInstance::new(n)?;
    let poly = BooleanPolynomial::build(&instance)?;
    let terms = qfactor::hamiltonian::to_pauli_terms(&poly);
    let text = qfactor::hamiltonian::export_pauli_text(&terms, instance.qubits());
    print!("{text}");
    if let Some(dir) = ensure_out(out)? {
        std::fs::write(dir.join("pauli.txt"), text)?;
    }
    Ok(())
}

fn build_run_config(args: &SolveArgs) -> Result<RunConfig> {
    let instance = resolve_instance(args.n)?;
    if instance.qubits() > 16 && !args.long_run {
        return Err(anyhow!(
            "n={} needs {} qubits; pass --long-run for instances beyond 16 qubits",
            args.n,
            instance.qubits()
        ));
    }
    let family: AnsatzFamily = parse_family(&args.ansatz)?;
    let ansatz = AnsatzSpec::new(family, instance.qubits(), args.layers);
    let cost = match args.cost.as_str() {
        "hamiltonian" => CostFunction::Hamiltonian,
        "logarithm" => CostFunction::Logarithm {
            base: match args.log_base.as_str() {
                "natural" | "e" => LogBase::Natural,
                "two" | "2" => LogBase::Two,
                "ten" | "10" => LogBase::Ten,
                other => return Err(anyhow!("unknown log base '{other}'")),
            },
        },
        "inverse" => CostFunction::Inverse { epsilon: args.epsilon },
        other => return Err(anyhow!("unknown cost function '{other}'")),
    };
    let method: Method = args.optimizer.parse().map_err(|e: String| anyhow!(e))?;
    let initial_state = match args.initial_state.as_str() {
        "zeros" => InitialState::Zeros,
        "plus" => InitialState::Plus,
        other => return Err(anyhow!("unknown initial state '{other}'")),
    };
    let alpha_schedule = match &args.alpha_schedule {
        None => None,
        Some(list) => Some(parse_list(list, |s| {
            s.parse::<f64>().map_err(|e| anyhow!("bad alpha '{s}': {e}"))
        })?),
    };
    let budget = args.max_evals.unwrap_or(50 * ansatz.parameter_count());
    Ok(RunConfig {
        instance,
        ansatz,
        alpha: args.alpha,
        shots: args.shots,
        cost,
        optimizer: OptimizerConfig {
            method,
            max_evals: budget,
            seed: args.seed,
            ..OptimizerConfig::default()
        },
        fidelity_threshold: args.threshold,
        seed: args.seed,
        initial_params: InitialParams::RandomUniform,
        initial_state,
        alpha_schedule,
        stop_on_success: args.stop_on_success,
    })
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let config = build_run_config(&args)?;
    let records = if config.alpha_schedule.is_some() {
        run_with_alpha_schedule(&config)?
    } else {
        vec![run_vqe(&config)?]
    };

    for record in &records {
        // Read out the answer the way a hardware run would: every observed
        // label is a candidate whose product is checked classically. In
        // exact mode, take the most probable label whose pair factors n.
        let instance = &record.config.instance;
        let state =
            prepare_state(&record.config.ansatz, &record.best_theta, record.config.initial_state)?;
        let solution = (0..(1u64 << instance.qubits()))
            .filter(|&i| {
                let (p, q) = instance.decode_index(i);
                p.checked_mul(q) == Some(instance.n())
            })
            .max_by(|&a, &b| state.probability_of(a).total_cmp(&state.probability_of(b)));
        let factors = solution.filter(|_| record.success).map(|index| {
            let (p, q) = instance.decode_index(index);
            serde_json::json!({ "p": p, "q": q, "label": instance.label(index) })
        });
        let summary = serde_json::json!({
            "n": args.n,
            "alpha": record.config.alpha,
            "shots": record.config.shots,
            "success": record.success,
            "max_fidelity": record.max_fidelity,
            "first_success_eval": record.first_success_eval,
            "evaluations": record.evaluations,
            "best_cost": record.best_cost,
            "factors": factors,
        });
        println!("{summary}");
        eprintln!("stage alpha={} took {:.3?}", record.config.alpha, record.wall_time);
    }

    if let Some(dir) = ensure_out(args.out.as_deref())? {
        bench::write_jsonl(records.iter(), &dir.join("runs.jsonl"))?;
    }
    Ok(())
}

fn write_experiment(
    output: &bench::ExperimentOutput,
    dir: &Path,
) -> Result<()> {
    bench::write_jsonl(output.records(), &dir.join("runs.jsonl"))?;
    output.runs_table().write_csv(&dir.join("runs.csv"))?;
    let cells = output.cells_table();
    cells.write_csv(&dir.join("cells.csv"))?;
    cells.write_plot_json(&dir.join("cells.plot.json"))?;
    Ok(())
}

fn cmd_sweep(config_path: &Path, out: Option<&Path>, long_run: bool) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let mut config: ExperimentConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", config_path.display()))?;
    config.long_run = config.long_run || long_run;
    let output = bench::run_experiment(&config)?;

    let cells = output.cells_table();
    print!("{}", cells.to_csv_string()?);
    if let Some(dir) = ensure_out(out)? {
        write_experiment(&output, &dir)?;
    }
    Ok(())
}

fn cmd_diff_study(qubits: u32, config: &DiffStudyConfig, out: Option<&Path>) -> Result<()> {
    let result = difference_study(qubits, config)?;
    print!("{}", result.regressions.to_csv_string()?);
    if let Some(dir) = ensure_out(out)? {
        bench::write_jsonl(result.output.records(), &dir.join("runs.jsonl"))?;
        result.per_instance.write_csv(&dir.join("per_instance.csv"))?;
        result.per_instance.write_plot_json(&dir.join("per_instance.plot.json"))?;
        result.regressions.write_csv(&dir.join("regressions.csv"))?;
        result.output.runs_table().write_csv(&dir.join("runs.csv"))?;
    }
    Ok(())
}

fn cmd_alpha_study(n: u64, config: &AlphaStudyConfig, out: Option<&Path>) -> Result<()> {
    let result = alpha_error_study(n, config)?;
    print!("{}", result.initial_std_errors.to_csv_string()?);
    if let Some(dir) = ensure_out(out)? {
        bench::write_jsonl(result.output.records(), &dir.join("runs.jsonl"))?;
        result.trajectories.write_csv(&dir.join("trajectories.csv"))?;
        result.trajectories.write_plot_json(&dir.join("trajectories.plot.json"))?;
        result.initial_std_errors.write_csv(&dir.join("initial_std_errors.csv"))?;
    }
    Ok(())
}

fn cmd_cost_study(n: u64, config: &CostStudyConfig, out: Option<&Path>) -> Result<()> {
    let output = cost_function_study(n, config)?;
    let cells = output.cells_table();
    print!("{}", cells.to_csv_string()?);
    if let Some(dir) = ensure_out(out)? {
        write_experiment(&output, &dir)?;
    }
    Ok(())
}
