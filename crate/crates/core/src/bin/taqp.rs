use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use taqp::experiment::{self, plot, ExperimentConfig, ParameterPlan};
use taqp::generate::{Blocks, GenSpec, RLaw, Spectrum};
use taqp::{linalg, qp, Error, Result};

/// Asynchronous block-based quadratic programming: problem generation,
/// parameter planning, simulation and plotting.
#[derive(Parser)]
#[command(name = "taqp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a random problem with prescribed ||Q||_2, k_Q and ||r||_2 as JSON.
    Generate(GenerateArgs),
    /// Print stepsize and regularization intervals as key=value lines.
    Plan(PlanArgs),
    /// Run every [[runs]] entry of a config and write CSV traces.
    Run(RunArgs),
    /// Plot worst-agent distance curves from trace CSVs as SVG.
    Plot(PlotArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Take the spec from the config's [problem.generate] section.
    #[arg(long, conflicts_with_all = ["n", "agents", "norm2", "cond", "norm_r"])]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    agents: Option<usize>,
    #[arg(long, required_unless_present = "config")]
    norm2: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    cond: Option<f64>,
    #[arg(long, required_unless_present = "config")]
    norm_r: Option<f64>,
    #[arg(long, value_enum, default_value = "log-uniform")]
    spectrum: SpectrumArg,
    /// Generator seed (overrides the config's).
    #[arg(long)]
    seed: Option<u64>,
    /// Output problem file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SpectrumArg {
    LogUniform,
    Uniform,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, conflicts_with_all = ["problem", "norm2"])]
    config: Option<PathBuf>,
    /// Problem file to plan for.
    #[arg(long, conflicts_with = "norm2")]
    problem: Option<PathBuf>,
    /// ||Q||_2 (or an upper bound) when planning without a problem.
    #[arg(long, requires_all = ["cond", "norm_r"])]
    norm2: Option<f64>,
    #[arg(long)]
    cond: Option<f64>,
    #[arg(long)]
    norm_r: Option<f64>,
    /// Use Gershgorin/trace bounds instead of exact eigenvalues.
    #[arg(long)]
    bounds: bool,
    /// Error target for regularization.
    #[arg(long, requires = "kd")]
    epsilon: Option<f64>,
    /// Condition number target for regularization.
    #[arg(long, requires = "epsilon")]
    kd: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Experiment seed (overrides the config's).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for traces; defaults to the config's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Legend labels, one per trace; file stems otherwise.
    #[arg(long = "label")]
    labels: Vec<String>,
    /// Draw a reference line at this distance.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => ExperimentConfig::load(path)?
            .problem
            .generate
            .ok_or_else(|| Error::Config("config has no [problem.generate] section".into()))?,
        None => GenSpec {
            n: args.n.unwrap_or_default(),
            blocks: Blocks::Even(args.agents.unwrap_or_default()),
            norm2: args.norm2.unwrap_or_default(),
            cond: args.cond.unwrap_or_default(),
            spectrum: match args.spectrum {
                SpectrumArg::LogUniform => Spectrum::LogUniform,
                SpectrumArg::Uniform => Spectrum::Uniform,
            },
            r: RLaw::Norm(args.norm_r.unwrap_or_default()),
            seed: 0,
        },
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    spec.validate()?;
    let problem = taqp::generate::generate_problem(&spec)?;
    experiment::save_problem(&problem, &args.out)
}

fn plan(args: PlanArgs) -> Result<String> {
    let reg = args.epsilon.zip(args.kd);
    let plan = if let Some(path) = &args.config {
        let mut cfg = ExperimentConfig::load(path)?;
        if args.bounds {
            cfg.spectral = experiment::SpectralSource::Bounds;
        }
        match reg {
            Some((epsilon, k_d)) => {
                let problem = experiment::resolve_problem(&cfg)?;
                planner_inputs(&problem, args.bounds).and_then(|(n2, k, nr)| ParameterPlan::new(n2, k, nr, Some((epsilon, k_d))))?
            }
            None => experiment::plan_for_config(&cfg)?,
        }
    } else if let Some(path) = &args.problem {
        let problem = experiment::load_problem(path)?;
        let (n2, k, nr) = planner_inputs(&problem, args.bounds)?;
        ParameterPlan::new(n2, k, nr, reg)?
    } else {
        match (args.norm2, args.cond, args.norm_r) {
            (Some(n2), Some(k), Some(nr)) => ParameterPlan::new(n2, k, nr, reg)?,
            _ => return Err(Error::Config("plan needs --config, --problem, or --norm2/--cond/--norm-r".into())),
        }
    };
    Ok(plan.render())
}

fn planner_inputs(problem: &qp::QuadraticProblem, bounds: bool) -> Result<(f64, f64, f64)> {
    let info = if bounds { qp::spectral_bounds(problem.q()) } else { qp::spectral_exact(problem.q())? };
    if !info.lambda_min_usable() {
        return Err(Error::Infeasible(format!("no positive lower bound on lambda_min(Q) (got {})", info.lambda_min)));
    }
    Ok((info.norm2, info.cond, linalg::norm2(problem.r())))
}

fn run(args: RunArgs) -> Result<String> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = args.out.unwrap_or_else(|| cfg.base_dir.clone());
    experiment::cmd_run(&cfg, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a).map(|_| String::new()),
        Command::Plan(a) => plan(a),
        Command::Run(a) => run(a),
        Command::Plot(a) => {
            let traces: Vec<&std::path::Path> = a.traces.iter().map(PathBuf::as_path).collect();
            plot::plot_traces(&traces, &a.labels, a.epsilon, &a.out).map(|_| String::new())
        }
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("taqp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
