use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cca_core::harness::{self, io, ArtifactPaths, DataFormat, ExperimentOptions, PlantedParams};
use cca_core::matrix::DataMatrix;
use cca_core::{SolverConfig, SolverKind};

#[derive(Parser)]
#[command(name = "cca", version, about = "Canonical correlation analysis solvers and experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one solver and write its report, trace and model.
    Run(RunArgs),
    /// Write a planted instance to disk.
    Generate(GenerateArgs),
    /// Run several solvers on the same data and print a summary table.
    Compare(CompareArgs),
}

/// Solver settings. Each flag overrides the matching key of `--config`.
#[derive(Args, Default)]
struct ConfigArgs {
    /// Key-value config file (`key = value` per line).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    oversample: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    /// constant | inverse-t[:t0] | inverse-sqrt-t[:t0]
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    /// with-replacement | without-replacement | sequential
    #[arg(long)]
    sampling: Option<String>,
    #[arg(long)]
    max_iters: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    holdout: Option<String>,
    /// linear | rbf:<sigma> | poly:<degree>[:<offset>]
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    pca_m: Option<String>,
    #[arg(long)]
    eval_every: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<SolverConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                SolverConfig::from_kv_str(&text).with_context(|| format!("in {}", path.display()))?
            }
            None => SolverConfig::default(),
        };
        let flags = [
            ("solver", &self.solver),
            ("k", &self.k),
            ("oversample", &self.oversample),
            ("lambda", &self.lambda),
            ("eta", &self.eta),
            ("schedule", &self.schedule),
            ("batch-size", &self.batch_size),
            ("sampling", &self.sampling),
            ("max-iters", &self.max_iters),
            ("tol", &self.tol),
            ("seed", &self.seed),
            ("holdout", &self.holdout),
            ("kernel", &self.kernel),
            ("pca-m", &self.pca_m),
            ("eval-every", &self.eval_every),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v).with_context(|| format!("--{key}"))?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct PlantedArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    p1: usize,
    #[arg(long, default_value_t = 100)]
    p2: usize,
    /// Planted correlations, strictly decreasing.
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.8,0.7,0.6,0.5")]
    correlations: Vec<f64>,
    /// Correlations of the pairs after the planted ones.
    #[arg(long, value_delimiter = ',')]
    tail: Vec<f64>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Ratio of largest to smallest feature scale.
    #[arg(long, default_value_t = 1.0)]
    span: f64,
    /// Draw i.i.d. rows instead of matching the correlations exactly.
    #[arg(long)]
    population: bool,
    /// Seed for the generator (defaults to the solver seed).
    #[arg(long)]
    data_seed: Option<u64>,
}

impl PlantedArgs {
    fn params(&self) -> PlantedParams {
        let mut p = PlantedParams::new(self.n, self.p1, self.p2, self.correlations.clone()).with_geometric_scales(self.span);
        p.tail = self.tail.clone();
        p.noise = self.noise;
        p.exact = !self.population;
        p
    }
}

/// Input views: files when `--x`/`--y` are given, otherwise a planted instance.
#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    x: Option<PathBuf>,
    #[arg(long)]
    y: Option<PathBuf>,
    /// csv | matrix-market (default: by extension)
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    planted: PlantedArgs,
}

impl DataArgs {
    fn load(&self, seed: u64) -> Result<(DataMatrix, DataMatrix)> {
        let format = self.format.as_deref().map(str::parse::<DataFormat>).transpose()?;
        match (&self.x, &self.y) {
            (Some(x), Some(y)) => {
                let a = io::load_dataset(x, format).with_context(|| format!("loading {}", x.display()))?;
                let b = io::load_dataset(y, format).with_context(|| format!("loading {}", y.display()))?;
                Ok((a, b))
            }
            (None, None) => {
                let inst = harness::generate_planted(&self.planted.params(), self.planted.data_seed.unwrap_or(seed))?;
                Ok((inst.x, inst.y))
            }
            _ => bail!("--x and --y must be given together"),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Line-delimited JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Two-column (flops, pcc) trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Learned directions as text matrices.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Record wall-clock seconds (makes reports non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Skip the exact spectral oracle; PCC is then not reported.
    #[arg(long)]
    no_oracle: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    planted: PlantedArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    x: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    format: Option<String>,
    /// Where to write the planted directions.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',', default_value = "spectral,appgrad,stochastic-appgrad,nw,dw,pca-cca")]
    solvers: Vec<String>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.6}"))
}

fn run(args: RunArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let (x, y) = args.data.load(config.seed)?;
    let options = ExperimentOptions { skip_oracle: args.no_oracle, timing: args.timing, ..Default::default() };
    let exp = harness::run_experiment(&config, &x, &y, &options)
        .with_context(|| format!("solver {} with k = {}, seed = {}", config.solver, config.k, config.seed))?;
    let paths = ArtifactPaths { report: args.report.as_deref(), trace: args.trace.as_deref(), model: args.model.as_deref() };
    harness::write_artifacts(&exp, paths, args.timing)?;
    let last = exp.report.last().context("run produced no records")?;
    println!(
        "{} k={} iterations={} converged={} flops={:.3e} tcc={:.6} pcc={}",
        config.solver,
        config.k,
        exp.report.iterations,
        exp.report.converged,
        exp.report.total_flops,
        last.tcc,
        fmt_opt(last.pcc)
    );
    if last.pcc_holdout.is_some() || last.tcc_holdout.is_some() {
        println!("holdout tcc={} pcc={}", fmt_opt(last.tcc_holdout), fmt_opt(last.pcc_holdout));
    }
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<()> {
    let format = args.format.as_deref().map(str::parse::<DataFormat>).transpose()?;
    let inst = harness::generate_planted(&args.planted.params(), args.seed)?;
    io::save_dataset(&args.x, &inst.x, format)?;
    io::save_dataset(&args.y, &inst.y, format)?;
    if let Some(path) = &args.model {
        io::save_model(path, &inst.planted)?;
    }
    let emp: Vec<String> = inst.empirical.correlations.iter().map(|c| format!("{c:.6}")).collect();
    println!("wrote {}x{} and {}x{}; empirical correlations {}", inst.x.nrows(), inst.x.ncols(), inst.y.nrows(), inst.y.ncols(), emp.join(","));
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let solvers: Vec<SolverKind> = args.solvers.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    let (x, y) = args.data.load(config.seed)?;
    println!("{:<20} {:>12} {:>10} {:>10} {:>12} {:>10}", "solver", "flops", "tcc", "pcc", "iterations", "converged");
    for (solver, result) in harness::compare(&config, &solvers, &x, &y, &ExperimentOptions::default()) {
        match result {
            Ok(exp) => {
                let last = exp.report.last().context("run produced no records")?;
                println!(
                    "{:<20} {:>12.3e} {:>10.6} {:>10} {:>12} {:>10}",
                    solver.name(),
                    exp.report.total_flops,
                    last.tcc,
                    fmt_opt(last.pcc),
                    exp.report.iterations,
                    exp.report.converged
                );
            }
            Err(e) => println!("{:<20} error: {e}", solver.name()),
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::Generate(a) => generate(a),
        Command::Compare(a) => compare(a),
    }
}
