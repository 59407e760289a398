//! Command-line front end. [`run`] parses arguments, executes one command
//! and returns the process exit code: 0 on success, 1 on usage, validation
//! or I/O errors, 2 when an optimization finished without converging.
//!
//! Any command accepts `--config FILE`, a flat `key = value` file whose keys
//! are long flag names without the leading dashes. Flags given on the command
//! line take precedence over the file.

use std::collections::HashSet;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};

use crate::affinity::{build_affinities, AffinityConfig, BandwidthMode, RepulsionWeights};
use crate::augmented::{make_mu_schedule, MuStrategy};
use crate::data_io::{
    generate_clusters, generate_rings, generate_swissroll, load_delimited, load_embedding,
    render_scatter, save_dataset, save_embedding, save_report, save_trace, RingsConfig,
};
use crate::error::{EmbedError, Result};
use crate::objectives::{objective, Method};
use crate::optimizer::{
    minimize, pp_optimize, random_embedding, restart_benchmark, MeanStd, OptimConfig,
};
use crate::pressure::{pressure, NewtonConfig};
use crate::types::{AffinityGraph, Dataset};

/// Worker-count environment variable for `benchmark`.
pub const THREADS_ENV: &str = "PRESSURE_EMBED_THREADS";

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pressure-embed",
    version,
    about = "Nonlinear embeddings with pressured-point diagnostics"
)]
pub struct Cli {
    /// Flat key=value file of flag defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build affinities and run spectral-direction descent from a random start.
    Embed(EmbedArgs),
    /// Compute per-point pressure of an existing embedding.
    Diagnose(DiagnoseArgs),
    /// Refine an embedding by pressured-point optimization.
    Pp(PpArgs),
    /// Random restarts: SD, then refinement from each SD result.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic dataset (label in the last column).
    #[command(subcommand)]
    Generate(GenerateCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ee,
    Sne,
    Tsne,
    Umap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PpMethodArg {
    Ee,
    Sne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Random,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MuStrategyArg {
    Mean,
    Max,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RepulsionArg {
    Sqdist,
    Uniform,
}

/// Input file and affinity construction.
#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Delimited numeric input, one point per row.
    pub input: PathBuf,
    /// Field delimiter of input and embedding files.
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Treat the last input column as an integer label.
    #[arg(long)]
    pub labels: bool,
    /// Target perplexity of the Gaussian affinities.
    #[arg(long, default_value_t = 20.0, conflicts_with = "sigma")]
    pub perplexity: f64,
    /// Fixed Gaussian bandwidth instead of perplexity calibration.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Repulsion strength (EE).
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Repulsive weights (EE): squared input distances or all ones.
    #[arg(long, value_enum, default_value_t = RepulsionArg::Sqdist)]
    pub repulsion: RepulsionArg,
}

/// Optimizer controls.
#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    /// Embedding dimension.
    #[arg(long, default_value_t = 2)]
    pub dim: usize,
    /// Seed of the random initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Iteration cap (per penalty value during refinement).
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    /// Stop when an iteration lowers the objective by less than this.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// No progress lines on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EmbedArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Ee)]
    pub method: MethodArg,
    /// UMAP curve parameter a.
    #[arg(long, default_value_t = 1.577)]
    pub umap_a: f64,
    /// UMAP curve parameter b.
    #[arg(long, default_value_t = 0.8951)]
    pub umap_b: f64,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Output embedding file.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration trace (JSON lines).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Embedding to analyse, one point per row.
    pub embedding: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Ee)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 1.577)]
    pub umap_a: f64,
    #[arg(long, default_value_t = 0.8951)]
    pub umap_b: f64,
    /// Per-point pressure report (JSON lines).
    #[arg(long)]
    pub out_report: Option<PathBuf>,
    /// Scatter plot with marker size proportional to pressure (2-D only).
    #[arg(long)]
    pub out_plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PpArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = PpMethodArg::Ee)]
    pub method: PpMethodArg,
    /// Start from a random embedding or from `--init-embedding`.
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub init: InitArg,
    /// Initial embedding for `--init file`.
    #[arg(long)]
    pub init_embedding: Option<PathBuf>,
    /// Penalty step: mean, max or min attraction degree.
    #[arg(long, value_enum, default_value_t = MuStrategyArg::Mean)]
    pub mu_strategy: MuStrategyArg,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Output embedding file.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration trace (JSON lines).
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value_t = PpMethodArg::Ee)]
    pub method: PpMethodArg,
    /// Number of random restarts; restart r uses seed + r.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = MuStrategyArg::Mean)]
    pub mu_strategy: MuStrategyArg,
    #[command(flatten)]
    pub optim: OptimArgs,
    /// Result table; standard output when absent.
    #[arg(long)]
    pub out_table: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Noisy swiss roll in 3-D.
    Swissroll {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (comma-delimited, label last).
        #[arg(long)]
        out: PathBuf,
    },
    /// Randomly oriented circles in 3-D.
    Rings {
        #[arg(long, default_value_t = 10)]
        n_objects: usize,
        #[arg(long, default_value_t = 72)]
        points_per_ring: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long, default_value_t = 3.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (comma-delimited, label last).
        #[arg(long)]
        out: PathBuf,
    },
    /// Isotropic Gaussian blobs.
    Clusters {
        #[arg(long, default_value_t = 3)]
        clusters: usize,
        #[arg(long, default_value_t = 50)]
        per_cluster: usize,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file (comma-delimited, label last).
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match apply_config(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_NOT_CONVERGED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

/// Appends `--key value` for every config entry whose flag is not already on
/// the command line.
fn apply_config(mut args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| EmbedError::io(&path, e))?;
    let mut cmd = Cli::command();
    for name in subcommand_path(&args) {
        match cmd.find_subcommand(&name) {
            Some(sub) => cmd = sub.clone(),
            None => break,
        }
    }
    let given: HashSet<String> = args
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_owned())
        .collect();

    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |reason: String| EmbedError::Parse {
            path: path.clone(),
            row: row + 1,
            reason,
        };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim().replace('_', "-"), value.trim());
        let arg = cmd
            .get_arguments()
            .find(|a| a.get_long() == Some(key.as_str()) && key != "config")
            .ok_or_else(|| parse_err(format!("unknown key {key:?} for `{}`", cmd.get_name())))?;
        if given.contains(&key) {
            continue;
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => args.push(format!("--{key}").into()),
                "false" => {}
                other => {
                    return Err(parse_err(format!(
                        "{key} expects true or false, got {other:?}"
                    )))
                }
            }
        } else {
            args.push(format!("--{key}").into());
            args.push(value.into());
        }
    }
    Ok(args)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_str()?;
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Leading subcommand names, e.g. `["generate", "rings"]`.
fn subcommand_path(args: &[OsString]) -> Vec<String> {
    let mut cmd = Cli::command();
    let mut path = Vec::new();
    for a in args.iter().skip(1).filter_map(|a| a.to_str()) {
        if let Some(sub) = cmd.find_subcommand(a) {
            path.push(a.to_owned());
            cmd = sub.clone();
        }
    }
    path
}

fn method_of(m: MethodArg, a: f64, b: f64) -> Result<Method> {
    Ok(match m {
        MethodArg::Ee => Method::ee(),
        MethodArg::Sne => Method::sne(),
        MethodArg::Tsne => Method::tsne(),
        MethodArg::Umap => Method::umap(a, b)?,
    })
}

fn pp_method_of(m: PpMethodArg) -> Method {
    match m {
        PpMethodArg::Ee => Method::ee(),
        PpMethodArg::Sne => Method::sne(),
    }
}

fn strategy_of(s: MuStrategyArg) -> MuStrategy {
    match s {
        MuStrategyArg::Mean => MuStrategy::MeanDegree,
        MuStrategyArg::Max => MuStrategy::MaxDegree,
        MuStrategyArg::Min => MuStrategy::MinDegree,
    }
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c).ok().filter(u8::is_ascii).ok_or_else(|| {
        EmbedError::Config(format!(
            "delimiter must be a single ASCII character, got {c:?}"
        ))
    })
}

fn load_graph(a: &InputArgs) -> Result<(Dataset, AffinityGraph)> {
    let data = load_delimited(&a.input, delimiter_byte(a.delimiter)?, a.labels)?;
    let cfg = AffinityConfig {
        mode: match a.sigma {
            Some(s) => BandwidthMode::FixedSigma(s),
            None => BandwidthMode::Perplexity(a.perplexity),
        },
        lambda: a.lambda,
        w_minus_mode: match a.repulsion {
            RepulsionArg::Sqdist => RepulsionWeights::Sqdist,
            RepulsionArg::Uniform => RepulsionWeights::Uniform,
        },
    };
    let g = build_affinities(&data, &cfg)?;
    Ok((data, g))
}

fn optim_config(a: &OptimArgs) -> Result<OptimConfig> {
    if a.dim == 0 {
        return Err(EmbedError::Config("--dim must be at least 1".into()));
    }
    let cfg = OptimConfig {
        max_iter: a.max_iter,
        conv_tol: a.tol,
        seed: a.seed,
        verbose: !a.quiet,
        ..OptimConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn threads_from_env() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(t) if t >= 1 => Ok(t),
            _ => Err(EmbedError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

fn report_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| EmbedError::io(path, e))
}

/// Returns whether the command converged.
fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Embed(a) => cmd_embed(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
        Command::Pp(a) => cmd_pp(&a),
        Command::Benchmark(a) => cmd_benchmark(&a),
        Command::Generate(g) => cmd_generate(&g),
    }
}

fn cmd_embed(a: &EmbedArgs) -> Result<bool> {
    let cfg = optim_config(&a.optim)?;
    let (_, g) = load_graph(&a.input)?;
    let m = method_of(a.method, a.umap_a, a.umap_b)?;
    let x0 = random_embedding(g.n(), a.optim.dim, a.optim.seed);
    let run = minimize(&m, &g, &x0, &cfg)?;
    report_warnings(&run.warnings);
    save_embedding(&a.out, &run.final_embedding)?;
    if let Some(p) = &a.trace_out {
        save_trace(p, &run.trace)?;
    }
    eprintln!(
        "{} after {} iterations: E = {:.10e}{}",
        m.tag,
        run.trace.len(),
        run.final_objective,
        if run.converged {
            ""
        } else {
            " (not converged)"
        }
    );
    Ok(run.converged)
}

fn cmd_diagnose(a: &DiagnoseArgs) -> Result<bool> {
    let (data, g) = load_graph(&a.input)?;
    let x = load_embedding(&a.embedding, delimiter_byte(a.input.delimiter)?)?;
    if x.n() != g.n() {
        return Err(EmbedError::Validation(format!(
            "embedding has {} rows but the input has {}",
            x.n(),
            g.n()
        )));
    }
    let m = method_of(a.method, a.umap_a, a.umap_b)?;
    let report = pressure(&m, &g, &x, &NewtonConfig::default())?;
    if let Some(p) = &a.out_report {
        save_report(p, &report)?;
    }
    if let Some(p) = &a.out_plot {
        render_scatter(p, &x, data.labels.as_deref(), Some(&report))?;
    }
    println!("pressured fraction: {:?}", report.fraction);
    println!(
        "pressured points: {} of {}",
        report.pressured_set.len(),
        g.n()
    );
    Ok(true)
}

fn cmd_pp(a: &PpArgs) -> Result<bool> {
    let cfg = optim_config(&a.optim)?;
    let (_, g) = load_graph(&a.input)?;
    let m = pp_method_of(a.method);
    let x0 = match (a.init, &a.init_embedding) {
        (InitArg::Random, _) => random_embedding(g.n(), a.optim.dim, a.optim.seed),
        (InitArg::File, Some(p)) => load_embedding(p, delimiter_byte(a.input.delimiter)?)?,
        (InitArg::File, None) => {
            return Err(EmbedError::Config(
                "--init file requires --init-embedding".into(),
            ))
        }
    };
    if x0.n() != g.n() {
        return Err(EmbedError::Validation(format!(
            "initial embedding has {} rows but the input has {}",
            x0.n(),
            g.n()
        )));
    }
    let sched = make_mu_schedule(&g, strategy_of(a.mu_strategy))?;
    let initial = objective(&m, &g, &x0)?.total;
    let run = pp_optimize(&m, &g, &x0, &sched, &cfg)?;
    report_warnings(&run.warnings);
    save_embedding(&a.out, &run.final_embedding)?;
    if let Some(p) = &a.trace_out {
        save_trace(p, &run.trace)?;
    }
    println!("initial objective: {initial:.17e}");
    println!("final objective: {:.17e}", run.final_objective);
    println!("mu steps: {} (step {:.6e})", run.mu_steps, sched.step);
    Ok(run.converged)
}

/// Tab-separated table, one row per restart, then `mean ± std` summaries.
pub fn format_benchmark_table(pairs: &[crate::optimizer::RestartPair]) -> String {
    let mut out = String::from("seed\tsd_final\tpp_final\timprovement\n");
    for p in pairs {
        let _ = writeln!(
            out,
            "{}\t{:.17e}\t{:.17e}\t{:.17e}",
            p.seed,
            p.sd.final_objective,
            p.pp.final_objective,
            p.improvement()
        );
    }
    let col = |f: &dyn Fn(&crate::optimizer::RestartPair) -> f64| -> MeanStd {
        MeanStd::of(&pairs.iter().map(f).collect::<Vec<_>>())
    };
    let _ = writeln!(out, "# sd_final {}", col(&|p| p.sd.final_objective));
    let _ = writeln!(out, "# pp_final {}", col(&|p| p.pp.final_objective));
    let _ = writeln!(out, "# improvement {}", col(&|p| p.improvement()));
    out
}

fn cmd_benchmark(a: &BenchmarkArgs) -> Result<bool> {
    let mut cfg = optim_config(&a.optim)?;
    // interleaved progress from parallel restarts is unreadable
    cfg.verbose = false;
    let threads = threads_from_env()?;
    let (_, g) = load_graph(&a.input)?;
    let m = pp_method_of(a.method);
    let sched = make_mu_schedule(&g, strategy_of(a.mu_strategy))?;
    let pairs = restart_benchmark(&m, &g, a.restarts, a.optim.dim, &sched, &cfg, threads)?;
    for p in &pairs {
        report_warnings(&p.sd.warnings);
        report_warnings(&p.pp.warnings);
        if !a.optim.quiet {
            eprintln!(
                "seed {}: SD {:.10e} -> PP {:.10e}",
                p.seed, p.sd.final_objective, p.pp.final_objective
            );
        }
    }
    let table = format_benchmark_table(&pairs);
    match &a.out_table {
        Some(p) => write_text(p, &table)?,
        None => print!("{table}"),
    }
    Ok(pairs.iter().all(|p| p.sd.converged && p.pp.converged))
}

fn cmd_generate(g: &GenerateCommand) -> Result<bool> {
    let (data, out) = match g {
        GenerateCommand::Swissroll {
            n,
            noise,
            seed,
            out,
        } => (generate_swissroll(*n, *noise, *seed)?, out),
        GenerateCommand::Rings {
            n_objects,
            points_per_ring,
            radius,
            separation,
            seed,
            out,
        } => {
            let cfg = RingsConfig {
                n_objects: *n_objects,
                points_per_ring: *points_per_ring,
                radius: *radius,
                separation: *separation,
            };
            (generate_rings(&cfg, *seed)?, out)
        }
        GenerateCommand::Clusters {
            clusters,
            per_cluster,
            dim,
            spread,
            seed,
            out,
        } => (
            generate_clusters(*clusters, *per_cluster, *dim, *spread, *seed)?,
            out,
        ),
    };
    save_dataset(out, &data, b',')?;
    Ok(true)
}
