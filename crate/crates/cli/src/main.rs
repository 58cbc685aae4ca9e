//! `pfch`: run benchmark problems, compute reference values, measure costs.

mod cache;
mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pfch::benchmarks::protocol::{
    compare_pgd_pagd, cost_protocol, reported_fft, write_table2, write_table3, CostRow, FieldCostRunner,
    SolverCostRow,
};
use pfch::benchmarks::{BenchmarkSpec, Problem};
use pfch::controller::{AdaptiveConfig, EstimatorKind, Stepper};
use pfch::snapshot::Snapshot;
use pfch::timing::Stopwatch;
use pfch::{SchemeKind, SolverKind};

use config::{resolved_toml, Manifest, RunSection, RunSettings, UserConfig};

const DEFAULT_ROOT: &str = "runs";

#[derive(Parser)]
#[command(name = "pfch", version, about = "Phase field crystal and functionalized Cahn-Hilliard benchmarks")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one problem with one scheme and write the step report and snapshots.
    Simulate(SimulateArgs),
    /// Compute (or fetch from cache) certified reference point values.
    Reference(ReferenceArgs),
    /// Cost protocol for each problem and scheme pair; writes table3.csv.
    Benchmark(BenchmarkArgs),
    /// Same runs with PGD and PAGD; writes table2.csv.
    CompareSolvers(CompareArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Config file: a complete problem definition, or `base = "<problem>"`
    /// plus overrides and an optional [run] table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (default: <output root>/<command-specific name>).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root for default output directories and the reference cache.
    #[arg(long, env = "PFCH_OUT", default_value = DEFAULT_ROOT)]
    out_root: PathBuf,
    /// Seed for randomized initial conditions.
    #[arg(long)]
    seed: Option<u64>,
    /// Grid points per edge, overriding the problem definition.
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    problem: Option<Problem>,
    #[arg(long)]
    scheme: Option<SchemeKind>,
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    /// Stepping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    /// Comma-separated times to store (0 stores the initial state).
    #[arg(long, value_delimiter = ',')]
    snapshot_times: Option<Vec<f64>>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    problem: Vec<Problem>,
    /// Smallest step tried is 0.1^max_level.
    #[arg(long, default_value_t = 8)]
    max_level: u32,
    /// Cache directory (default: <output root>/reference-cache).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    problem: Vec<Problem>,
    /// Schemes to measure (default: MP, BDF2, LMP, LBDF2).
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<SchemeKind>,
    #[arg(long)]
    solver: Option<SolverKind>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long, default_value_t = 8)]
    max_level: u32,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Independent runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    problem: Vec<Problem>,
    /// Overrides the per-problem comparison scheme.
    #[arg(long)]
    scheme: Option<SchemeKind>,
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

/// Log records go to stderr and to `run.log` in the output directory.
struct Tee {
    file: Option<Mutex<File>>,
}

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        if let Some(f) = &self.file {
            f.lock().unwrap().write_all(buf)?;
        }
        std::io::stderr().write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        if let Some(f) = &self.file {
            f.lock().unwrap().flush()?;
        }
        std::io::stderr().flush()
    }
}

fn init_logging(verbose: u8, out_dir: &Path) -> Result<()> {
    let level = match verbose {
        0 => log::LevelFilter::Info,
        1 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let file = File::create(out_dir.join("run.log")).context("creating run.log")?;
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("PFCH_LOG")
        .target(env_logger::Target::Pipe(Box::new(Tee {
            file: Some(Mutex::new(file)),
        })))
        .try_init()
        .ok();
    Ok(())
}

impl Common {
    fn user_config(&self) -> Result<UserConfig> {
        match &self.config {
            Some(p) => UserConfig::load(p),
            None => Ok(UserConfig::default()),
        }
    }

    fn out_dir(&self, default_name: &str) -> Result<PathBuf> {
        let dir = self.out.clone().unwrap_or_else(|| self.out_root.join(default_name));
        std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn apply(&self, mut spec: BenchmarkSpec) -> Result<BenchmarkSpec> {
        if let Some(n) = self.n {
            spec.domain.n = n;
            spec.grid()?;
        }
        Ok(spec)
    }

    fn specs(&self, problems: &[Problem]) -> Result<Vec<BenchmarkSpec>> {
        let cfg = self.user_config()?;
        let mut out = Vec::new();
        if problems.is_empty() {
            out.push(self.apply(cfg.spec_for(None)?)?);
        } else {
            for &p in problems {
                out.push(self.apply(cfg.spec_for(Some(p))?)?);
            }
        }
        Ok(out)
    }
}

fn manifest(common: &Common, command: &str, out_dir: &Path) -> Manifest {
    Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        config_path: common.config.clone(),
        out_dir: out_dir.to_path_buf(),
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, items.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                *slots[i].lock().unwrap() = Some(f(&items[i]));
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect()
}

#[derive(Serialize)]
struct Summary {
    name: String,
    scheme: SchemeKind,
    solver: SolverKind,
    estimator: EstimatorKind,
    tol: f64,
    final_time: f64,
    accepted_steps: usize,
    rejected_steps: usize,
    fft_tally: u64,
    fft: String,
    wall_seconds: f64,
    cpu_seconds: f64,
    mass_drift: f64,
    point_value: Option<f64>,
}

fn cmd_simulate(args: SimulateArgs, verbose: u8) -> Result<()> {
    let user = args.common.user_config()?;
    let spec = args.common.apply(user.spec_for(args.problem)?)?;
    let flags = RunSection {
        scheme: args.scheme,
        estimator: args.estimator,
        solver: args.solver,
        tol: args.tol,
        t_final: args.t_final,
        snapshot_times: args.snapshot_times,
        seed: args.common.seed,
    };
    let run = user.run.overlay(&flags).resolve(&spec);
    let default_name = format!("{}-{}-{}", spec.name, run.scheme, run.solver).to_ascii_lowercase();
    let out = args.common.out_dir(&default_name)?;
    init_logging(verbose, &out)?;
    let manifest = manifest(&args.common, "simulate", &out);
    std::fs::write(out.join("resolved_config.toml"), resolved_toml(&spec, &run, &manifest)?)?;
    simulate(&spec, &run, &out)
}

fn simulate(spec: &BenchmarkSpec, run: &RunSettings, out: &Path) -> Result<()> {
    let model = spec.model()?;
    let u0 = spec.initial_field(run.seed)?;
    let cfg = AdaptiveConfig {
        scheme: run.scheme,
        estimator: run.estimator,
        tol: run.tol,
        dt_min: spec.stepping.dt_min,
        dt_max: spec.stepping.dt_max,
        t_final: run.t_final,
        snapshot_times: run.snapshot_times.clone(),
        max_steps: 10_000_000,
        record_energy: true,
    };
    log::info!(
        "{}: {} with {} ({} estimator), tol {:e}, T = {}",
        spec.name,
        run.scheme,
        run.solver,
        run.estimator,
        run.tol,
        run.t_final
    );
    let clock = Stopwatch::start();
    let mut stepper = Stepper::new(model, spec.solver_config(run.solver), cfg, u0)?;
    let mut accepted = 0usize;
    while let Some(rec) = stepper.advance()? {
        if rec.accepted {
            accepted += 1;
            if accepted.is_multiple_of(100) {
                log::info!("t = {:.6e}, dt = {:.3e}, FFT tally {}", rec.t, rec.dt, rec.fft_cumulative);
            }
        }
    }
    let (wall, cpu) = (clock.wall_seconds(), clock.cpu_seconds());
    let report = stepper.finish();

    let mut w = BufWriter::new(File::create(out.join("report.csv"))?);
    report.write_csv(&mut w)?;
    w.flush()?;
    for (i, snap) in report.snapshots.iter().enumerate() {
        let stem = out.join(format!("snapshot_{i:03}"));
        snap.save(stem.with_extension("bin"))?;
        snap.save_csv(stem.with_extension("csv"))?;
    }
    let last = Snapshot::new(report.final_time, report.final_field.clone());
    last.save(out.join("final.bin"))?;
    last.save_csv(out.join("final.csv"))?;

    let point_value = (spec.reference.t == report.final_time)
        .then(|| spec.reference.sample(&report.final_field).ok())
        .flatten();
    let summary = Summary {
        name: spec.name.clone(),
        scheme: run.scheme,
        solver: run.solver,
        estimator: run.estimator,
        tol: run.tol,
        final_time: report.final_time,
        accepted_steps: report.accepted_count(),
        rejected_steps: report.rejected_count(),
        fft_tally: report.fft_count,
        fft: reported_fft(report.fft_count),
        wall_seconds: wall,
        cpu_seconds: cpu,
        mass_drift: report.final_field.mean() - report.initial_mass,
        point_value,
    };
    std::fs::write(out.join("summary.toml"), toml::to_string_pretty(&summary)?)?;
    println!(
        "{}: {} accepted, {} rejected steps, FFT {}, {:.3} s wall, {:.3} s CPU -> {}",
        spec.name,
        summary.accepted_steps,
        summary.rejected_steps,
        summary.fft,
        wall,
        cpu,
        out.display()
    );
    Ok(())
}

fn cmd_reference(args: ReferenceArgs, verbose: u8) -> Result<()> {
    let specs = args.common.specs(&args.problem)?;
    let out = args.common.out_dir("reference")?;
    init_logging(verbose, &out)?;
    let dir = args.cache_dir.clone().unwrap_or_else(|| args.common.out_root.join("reference-cache"));
    for spec in &specs {
        let (entry, hit) = cache::reference_value(spec, args.common.seed, args.max_level, &dir)?;
        let c = entry.certificate;
        println!(
            "{},{},{},{},{}",
            spec.name,
            float(c.value),
            float(c.dt),
            if c.certified { "certified" } else { "uncertified" },
            if hit { "cached" } else { "computed" }
        );
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs, verbose: u8) -> Result<Vec<String>> {
    let specs = args.common.specs(&args.problem)?;
    let out = args.common.out_dir("benchmark")?;
    init_logging(verbose, &out)?;
    let dir = args.cache_dir.clone().unwrap_or_else(|| args.common.out_root.join("reference-cache"));
    let schemes = if args.scheme.is_empty() {
        SchemeKind::PRODUCTION.to_vec()
    } else {
        args.scheme.clone()
    };
    let solver = args.solver.unwrap_or_default();

    let references = parallel_map(&specs, args.jobs, |spec| -> Result<f64> {
        match spec.reference.value {
            Some(v) => Ok(v),
            None => Ok(cache::reference_value(spec, args.common.seed, args.max_level, &dir)?
                .0
                .certificate
                .value),
        }
    });
    let mut failures = Vec::new();
    let mut pairs = Vec::new();
    for (spec, r) in specs.iter().zip(references) {
        match r {
            Ok(v) => {
                for &s in &schemes {
                    pairs.push((spec, s, v));
                }
            }
            Err(e) => failures.push(format!("{} reference: {e:#}", spec.name)),
        }
    }
    pairs.sort_by(|a, b| (&a.0.name, a.1).cmp(&(&b.0.name, b.1)));

    let results = parallel_map(&pairs, args.jobs, |&(spec, scheme, reference)| -> Result<CostRow> {
        let estimator = args.estimator.unwrap_or_else(|| config::estimator_for(&spec.name, scheme));
        let mut runner = FieldCostRunner::new(spec, scheme, estimator, solver, args.common.seed)?;
        Ok(cost_protocol(
            &spec.name,
            &scheme.to_string(),
            &mut runner,
            reference,
            spec.objective.tol,
            spec.objective.tol_floor,
        )?)
    });
    let mut rows = Vec::new();
    for ((spec, scheme, _), r) in pairs.iter().zip(results) {
        match r {
            Ok(row) => {
                if !row.met {
                    failures.push(format!("{} {scheme}: objective not met down to the tolerance floor", spec.name));
                }
                rows.push(row);
            }
            Err(e) => failures.push(format!("{} {scheme}: {e:#}", spec.name)),
        }
    }
    let path = out.join("table3.csv");
    let mut w = BufWriter::new(File::create(&path)?);
    write_table3(&rows, &mut w)?;
    w.flush()?;
    for row in &rows {
        println!("{}", row.csv_line());
    }
    Ok(failures)
}

fn cmd_compare(args: CompareArgs, verbose: u8) -> Result<Vec<String>> {
    let specs = args.common.specs(&args.problem)?;
    let out = args.common.out_dir("compare-solvers")?;
    init_logging(verbose, &out)?;
    let results = parallel_map(&specs, args.jobs, |spec| -> Result<[SolverCostRow; 2]> {
        let mut spec = spec.clone();
        if let Some(t) = args.t_final {
            spec.stepping.t_final = t;
        }
        if let Some(t) = args.tol {
            spec.stepping.tol = t;
        }
        let scheme = args.scheme.unwrap_or_else(|| config::comparison_scheme_for(&spec.name));
        let estimator = args.estimator.unwrap_or_else(|| config::estimator_for(&spec.name, scheme));
        Ok(compare_pgd_pagd(&spec, scheme, estimator, args.common.seed)?)
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (spec, r) in specs.iter().zip(results) {
        match r {
            Ok(pair) => {
                log::info!(
                    "{}: PAGD/PGD transform ratio {:.4}",
                    spec.name,
                    pair[1].fft_tally as f64 / pair[0].fft_tally as f64
                );
                rows.extend(pair);
            }
            Err(e) => failures.push(format!("{}: {e:#}", spec.name)),
        }
    }
    let mut w = BufWriter::new(File::create(out.join("table2.csv"))?);
    write_table2(&rows, &mut w)?;
    w.flush()?;
    for row in &rows {
        println!("{}", row.csv_line());
    }
    Ok(failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let v = cli.verbose;
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, v).map(|_| Vec::new()),
        Command::Reference(a) => cmd_reference(a, v).map(|_| Vec::new()),
        Command::Benchmark(a) => cmd_benchmark(a, v),
        Command::CompareSolvers(a) => cmd_compare(a, v),
    };
    match result {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("{} run(s) failed:", failures.len());
            for f in failures {
                eprintln!("  {f}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
