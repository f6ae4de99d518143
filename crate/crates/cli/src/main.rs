use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dpbayes_core::bernoulli::{build_model, BernoulliModelSpec};
use dpbayes_core::eval::heatmap::{sidecar_path, write_heatmap_files};
use dpbayes_core::eval::{run_sweep, Method, Preset, SweepConfig};
use dpbayes_core::lp::write_lp_file;
use dpbayes_core::ubapp::{build_program, solve_program, write_kernel_csv_file, UbappSolveReport};
use dpbayes_core::{FiniteModel, SolveOptions};

/// Differentially private Bayes point estimation experiments
#[derive(Parser, Debug)]
#[command(name = "dpbayes", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate MSE over a grid of epsilon and trial counts, one CSV row per cell
    Sweep(SweepArgs),
    /// Solve one instance and export its kernel for heat-map plotting
    Heatmap(HeatmapArgs),
    /// Solve the optimal private estimator for one model and epsilon
    Solve(SolveArgs),
    /// Write a built-in model as JSON, for editing or for `solve --model-file`
    Model(ModelArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelKind {
    Bernoulli,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Pivot budget per program (default: 50 x (rows + columns))
    #[arg(long)]
    max_iters: Option<usize>,

    /// Simplex optimality and feasibility tolerance
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

impl SolverArgs {
    fn options(&self) -> anyhow::Result<SolveOptions> {
        if !(self.tol > 0.0 && self.tol < 1e-3) {
            bail!("--tol must lie in (0, 1e-3), got {}", self.tol);
        }
        Ok(SolveOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            ..SolveOptions::default()
        })
    }
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("eps").required(true).args(["preset", "epsilons"]))]
struct SweepArgs {
    #[arg(long, value_enum, default_value = "bernoulli")]
    model: ModelKind,

    /// Numbers of Bernoulli trials K, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    trials: Vec<usize>,

    /// Points in the parameter grid on [0, 1]
    #[arg(long, default_value_t = 101)]
    grid: usize,

    /// Named epsilon grid: high-privacy (0.001..0.010) or moderate-low (1..5)
    #[arg(long)]
    preset: Option<Preset>,

    /// Explicit epsilon values, comma separated
    #[arg(long, value_delimiter = ',')]
    epsilons: Option<Vec<f64>>,

    /// Methods to evaluate: ubapp, lbapp, nonprivate
    #[arg(long, value_delimiter = ',', default_value = "ubapp,lbapp")]
    methods: Vec<Method>,

    /// Monte-Carlo runs per LBaPP cell
    #[arg(long, default_value_t = dpbayes_core::eval::sweep::DEFAULT_RUNS)]
    runs: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// CSV output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write each UBaPP program in LP format; with several programs the
    /// trial count and epsilon index are added to the file name
    #[arg(long, value_name = "PATH")]
    dump_lp: Option<PathBuf>,

    /// Fill the wall_ms column (makes the output run-dependent)
    #[arg(long)]
    timing: bool,

    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct HeatmapArgs {
    #[arg(long, value_enum, default_value = "bernoulli")]
    model: ModelKind,

    #[arg(long)]
    trials: usize,

    #[arg(long, default_value_t = 101)]
    grid: usize,

    #[arg(long)]
    epsilon: f64,

    /// Kernel CSV path; metadata goes next to it as <stem>.meta.json
    #[arg(long)]
    out: PathBuf,

    #[arg(long, value_name = "PATH")]
    dump_lp: Option<PathBuf>,

    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model_file", "trials"]))]
struct SolveArgs {
    /// Model as JSON (see `dpbayes model` for the layout)
    #[arg(long)]
    model_file: Option<PathBuf>,

    /// Use the built-in Bernoulli model with this many trials
    #[arg(long)]
    trials: Option<usize>,

    #[arg(long, default_value_t = 101)]
    grid: usize,

    #[arg(long)]
    epsilon: f64,

    /// Also write the kernel CSV here
    #[arg(long)]
    out: Option<PathBuf>,

    #[arg(long, value_name = "PATH")]
    dump_lp: Option<PathBuf>,

    /// Print the summary as JSON
    #[arg(long)]
    json: bool,

    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "bernoulli")]
    model: ModelKind,

    #[arg(long)]
    trials: usize,

    #[arg(long, default_value_t = 101)]
    grid: usize,

    /// Output path (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Outcome {
    Complete,
    Partial,
}

fn bernoulli(kind: ModelKind, trials: usize, grid: usize) -> anyhow::Result<FiniteModel> {
    match kind {
        ModelKind::Bernoulli => Ok(build_model(&BernoulliModelSpec::new(trials, grid)?)?),
    }
}

fn solve_with_dump(
    model: &FiniteModel,
    epsilon: f64,
    options: &SolveOptions,
    dump: Option<&Path>,
    comment: &str,
) -> anyhow::Result<UbappSolveReport> {
    let program = build_program(model, epsilon)?;
    if let Some(path) = dump {
        write_lp_file(&program, comment, path)?;
        log::info!("wrote program to {}", path.display());
    }
    solve_program(model, epsilon, &program, options).with_context(|| format!("solving for epsilon = {epsilon}"))
}

fn sweep(args: SweepArgs) -> anyhow::Result<Outcome> {
    let ModelKind::Bernoulli = args.model;
    let epsilons = match (args.preset, args.epsilons) {
        (Some(p), None) => p.epsilons(),
        (None, Some(e)) => e,
        _ => bail!("give exactly one of --preset and --epsilons"),
    };
    let mut config = SweepConfig::new(args.grid, args.trials, epsilons, args.methods);
    config.runs = args.runs;
    config.seed = args.seed;
    config.solve_options = args.solver.options()?;
    config.record_timing = args.timing;
    config.dump_lp = args.dump_lp;
    config.validate()?;

    let result = run_sweep(&config)?;
    match &args.out {
        Some(path) => {
            result.write_csv_file(path)?;
            eprintln!("wrote {} rows to {}", result.rows.len(), path.display());
        }
        None => result.write_csv(std::io::stdout().lock())?,
    }
    let failed = result.num_failed();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see the status column", result.rows.len());
        return Ok(Outcome::Partial);
    }
    Ok(Outcome::Complete)
}

fn heatmap(args: HeatmapArgs) -> anyhow::Result<Outcome> {
    let ModelKind::Bernoulli = args.model;
    let spec = BernoulliModelSpec::new(args.trials, args.grid)?;
    let model = build_model(&spec)?;
    let options = args.solver.options()?;
    let comment = format!(
        "ubapp program: trials={} grid={} epsilon={}",
        args.trials, args.grid, args.epsilon
    );
    let report = solve_with_dump(&model, args.epsilon, &options, args.dump_lp.as_deref(), &comment)?;
    write_heatmap_files(&spec, args.epsilon, &report, &args.out)?;
    let side = sidecar_path(&args.out);
    eprintln!("wrote {} and {}", args.out.display(), side.display());
    Ok(Outcome::Complete)
}

fn solve(args: SolveArgs) -> anyhow::Result<Outcome> {
    let (model, name) = match (&args.model_file, args.trials) {
        (Some(path), None) => (FiniteModel::read_json(path)?, path.display().to_string()),
        (None, Some(k)) => (
            bernoulli(ModelKind::Bernoulli, k, args.grid)?,
            format!("bernoulli trials={k} grid={}", args.grid),
        ),
        _ => bail!("give exactly one of --model-file and --trials"),
    };
    let options = args.solver.options()?;
    let comment = format!("ubapp program: {name} epsilon={}", args.epsilon);
    let report = solve_with_dump(&model, args.epsilon, &options, args.dump_lp.as_deref(), &comment)?;
    if let Some(path) = &args.out {
        write_kernel_csv_file(&model, &report.kernel, path)?;
    }

    let argmax: Vec<f64> = report
        .kernel
        .argmax_readout()
        .into_iter()
        .map(|k| model.grid().point(k))
        .collect();
    let mut out = std::io::stdout().lock();
    if args.json {
        let summary = serde_json::json!({
            "model": name,
            "epsilon": args.epsilon,
            "status": report.solver_status.as_str(),
            "mse": report.mse,
            "iterations": report.iterations,
            "dp_residual": report.dp_residual,
            "argmax_estimates": argmax,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?;
    } else {
        writeln!(out, "model        {name}")?;
        writeln!(out, "epsilon      {}", args.epsilon)?;
        writeln!(out, "status       {}", report.solver_status)?;
        writeln!(out, "mse          {:.16e}", report.mse)?;
        writeln!(out, "iterations   {}", report.iterations)?;
        writeln!(out, "dp_residual  {:e}", report.dp_residual)?;
        let labels = model.observations().labels();
        for (label, est) in labels.iter().zip(&argmax) {
            writeln!(out, "argmax[{label}]  {est}")?;
        }
    }
    Ok(Outcome::Complete)
}

fn model(args: ModelArgs) -> anyhow::Result<Outcome> {
    let model = bernoulli(args.model, args.trials, args.grid)?;
    match &args.out {
        Some(path) => model.write_json(path)?,
        None => writeln!(std::io::stdout().lock(), "{}", model.to_json_string()?)?,
    }
    Ok(Outcome::Complete)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            // --help and --version also land here
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Heatmap(a) => heatmap(a),
        Command::Solve(a) => solve(a),
        Command::Model(a) => model(a),
    };
    match result {
        Ok(Outcome::Complete) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
