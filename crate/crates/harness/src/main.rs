use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crfmnes::{default_max_evals, BenchmarkName};
use crfmnes_harness::config::FlatConfig;
use crfmnes_harness::experiment::auto_lambdas;
use crfmnes_harness::timing::write_timing_csv;
use crfmnes_harness::{emit_plot, read_csv, run_experiment, success_metric, timing_bench, write_csv, ExperimentGrid};

/// Overrides the default output directory when `--out` is not given.
const OUT_DIR_ENV: &str = "CRFMNES_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "results";

#[derive(Parser)]
#[command(name = "crfmnes", version, about = "Benchmark runner for the CR-FM-NES optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a λ grid of trials on one benchmark and write records, metrics and a plot.
    Run(RunArgs),
    /// Time ask/tell iterations across dimensions on a constant objective.
    Time(TimeArgs),
    /// Render a metrics CSV as an SVG plot.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// sphere, ktablet, ellipsoid, rosenbrock or rastrigin
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    dim: Option<String>,
    /// Comma-separated even population sizes, or `auto`
    #[arg(long)]
    lambdas: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    target: Option<String>,
    /// Evaluation budget per trial, or `auto` for 5d × 10⁴
    #[arg(long)]
    max_evals: Option<String>,
    /// Base seed; trial i uses seed + i
    #[arg(long)]
    seed: Option<String>,
    /// Output directory (default: $CRFMNES_OUT_DIR, then `results`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Flat key = value file with defaults for the options above
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct TimeArgs {
    /// `start:end:step` or a comma-separated list
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    iters: Option<String>,
    #[arg(long)]
    repeats: Option<String>,
    /// Output CSV file (default: timing.csv in the output directory)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Looks up an option: command line first, then the config file, then the default.
struct Resolver {
    config: FlatConfig,
}

impl Resolver {
    fn new(path: Option<&Path>) -> Result<Self> {
        let config = match path {
            Some(p) => FlatConfig::load(p)?,
            None => FlatConfig::default(),
        };
        Ok(Self { config })
    }

    fn raw(&self, cli: &Option<String>, key: &str) -> Option<String> {
        cli.clone().or_else(|| self.config.get(key).map(str::to_string))
    }

    fn get<T: FromStr>(&self, cli: &Option<String>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(cli, key) {
            Some(s) => s.parse().map_err(|e| anyhow!("invalid --{key} '{s}': {e}")),
            None => Ok(default),
        }
    }

    fn out_dir(&self, cli: &Option<PathBuf>) -> PathBuf {
        cli.clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| self.config.get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

fn parse_lambdas(s: &str, function: BenchmarkName, dim: usize) -> Result<Vec<usize>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(auto_lambdas(function, dim));
    }
    s.split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("invalid λ '{p}'")))
        .collect()
}

fn parse_dims(s: &str) -> Result<Vec<usize>> {
    if let Some((start, rest)) = s.split_once(':') {
        let (end, step) = rest.split_once(':').unwrap_or((rest, "1"));
        let (start, end, step): (usize, usize, usize) = (start.parse()?, end.parse()?, step.parse()?);
        if step == 0 || start == 0 || end < start {
            bail!("invalid dimension range '{s}'");
        }
        return Ok((start..=end).step_by(step).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<usize>().with_context(|| format!("invalid dimension '{p}'")))
        .collect()
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let r = Resolver::new(args.config.as_deref())?;
    let function: BenchmarkName = r
        .raw(&args.function, "function")
        .ok_or_else(|| anyhow!("--function is required"))?
        .parse()?;
    let dim: usize = r.get(&args.dim, "dim", 0)?;
    if dim == 0 {
        bail!("--dim must be a positive integer");
    }
    let lambdas = parse_lambdas(&r.raw(&args.lambdas, "lambdas").unwrap_or("auto".into()), function, dim)?;
    let max_evals = match r.raw(&args.max_evals, "max_evals") {
        None => default_max_evals(dim),
        Some(s) if s.eq_ignore_ascii_case("auto") => default_max_evals(dim),
        Some(s) => s.parse().with_context(|| format!("invalid --max-evals '{s}'"))?,
    };
    let grid = ExperimentGrid {
        function,
        dim,
        lambdas,
        trials: r.get(&args.trials, "trials", 10)?,
        target_fval: r.get(&args.target, "target", 1e-10)?,
        max_evals,
        base_seed: r.get(&args.seed, "seed", 0)?,
    };
    grid.validate()?;

    let out = r.out_dir(&args.out);
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let stem = format!("{}-d{}", function, dim);
    let records_path = out.join(format!("{stem}-records.csv"));
    let metrics_path = out.join(format!("{stem}.csv"));
    let plot_path = out.join(format!("{stem}.svg"));

    eprintln!(
        "{function} d={dim}: λ ∈ {:?}, {} trials, budget {}, target {:e}",
        grid.lambdas, grid.trials, grid.max_evals, grid.target_fval
    );
    let records = run_experiment(&grid, Some(&records_path))?;
    let rows = success_metric(&records);
    write_csv(&rows, &metrics_path)?;
    emit_plot(&rows, &plot_path)?;
    for row in &rows {
        match row.sp_metric {
            Some(sp) => println!(
                "λ={:>6}  success {:>5.1}%  mean evals {:>12.1}  sp {:>12.1}",
                row.lambda,
                100.0 * row.success_rate,
                row.mean_evals_success.unwrap_or(f64::NAN),
                sp
            ),
            None => println!("λ={:>6}  success   0.0%  (no successful trial)", row.lambda),
        }
    }
    eprintln!(
        "wrote {}, {}, {}",
        records_path.display(),
        metrics_path.display(),
        plot_path.display()
    );
    Ok(())
}

fn cmd_time(args: TimeArgs) -> Result<()> {
    let r = Resolver::new(args.config.as_deref())?;
    let dims = parse_dims(&r.raw(&args.dims, "dims").unwrap_or("10:100:10".into()))?;
    let lambda: usize = r.get(&args.lambda, "lambda", 20)?;
    let iters: usize = r.get(&args.iters, "iters", 1000)?;
    let repeats: usize = r.get(&args.repeats, "repeats", 30)?;
    if lambda < 2 || !lambda.is_multiple_of(2) || iters == 0 || repeats == 0 {
        bail!("need an even λ ≥ 2 and positive --iters/--repeats");
    }
    let out = match &args.out {
        Some(p) => p.clone(),
        None => {
            let dir = r.out_dir(&None);
            std::fs::create_dir_all(&dir)?;
            dir.join("timing.csv")
        }
    };
    let rows = timing_bench(&dims, lambda, iters, repeats)?;
    for row in &rows {
        println!("d={:>5}  {:.4} s ± {:.4} s", row.d, row.mean_s, row.std_s);
    }
    write_timing_csv(&rows, &out)?;
    eprintln!("wrote {}", out.display());
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<()> {
    let rows = read_csv(&args.input)?;
    emit_plot(&rows, &args.out)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Time(a) => cmd_time(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
