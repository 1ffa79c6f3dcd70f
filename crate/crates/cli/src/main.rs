use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use active_emu::emulation::RunConfig;
use active_emu::harness::{run_experiment, ExperimentConfig};
use active_emu::pci::{cinf_cost, node_density_check, optimal_nodes, MonotoneFunction1D};
use active_emu::Error;
use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "active-emu", version, about = "Active construction of multi-output GP emulators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One emulation run: writes lut.csv and trace.ndjson.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Multi-run strategy comparison: writes results.csv, failures.csv and density maps.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimal piecewise-constant node placement for a monotone 1D function.
    Oracle {
        #[arg(long, value_enum)]
        function: Function,
        /// Interval as `a,b`.
        #[arg(long, value_parser = parse_interval)]
        interval: (f64, f64),
        #[arg(long)]
        nodes: usize,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Function {
    Log,
    Exp,
    Linear,
}

fn parse_interval(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `a,b`, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("bad interval start: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("bad interval end: {e}"))?;
    Ok((a, b))
}

enum Failure {
    Config(String),
    Simulator(String),
    Other(String),
}

impl Failure {
    fn from_error(e: &Error, context: &str) -> Self {
        let msg = format!("{context}: {e}");
        match e {
            _ if e.is_simulator_failure() => Failure::Simulator(msg),
            Error::Config(_) | Error::Json(_) => Failure::Config(msg),
            _ => Failure::Other(msg),
        }
    }
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Other(format!("cannot create {}: {e}", dir.display())))
}

fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg: RunConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.emulation.seed = s;
    }
    create_dir(out)?;
    let result = match cfg.execute() {
        Ok(r) => r,
        Err(f) => {
            if let Some(ds) = &f.dataset {
                let partial = out.join("lut.partial.csv");
                if let Ok(file) = File::create(&partial) {
                    let _ = ds.write_csv(BufWriter::new(file));
                }
            }
            let _ = active_emu::emulation::write_trace(&f.trace, &out.join("trace.ndjson"));
            return Err(Failure::from_error(&f.error, "run failed"));
        }
    };
    let io = |e: Error| Failure::from_error(&e, "writing outputs");
    result.write_lut_csv(&out.join("lut.csv")).map_err(io)?;
    result.write_trace_ndjson(&out.join("trace.ndjson")).map_err(io)?;
    log::info!(
        "{}: {} nodes, {} evaluations{}",
        result.strategy,
        result.dataset.len(),
        result.evaluations,
        if result.converged { ", converged" } else { "" }
    );
    Ok(())
}

fn experiment(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Failure> {
    let mut cfg: ExperimentConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    create_dir(out)?;
    let result = run_experiment(&cfg).map_err(|e| Failure::from_error(&e, "experiment failed"))?;
    result
        .write_all(out, cfg.density.as_ref())
        .map_err(|e| Failure::from_error(&e, "writing outputs"))?;
    if !result.failures.is_empty() {
        log::warn!("{} runs failed; see failures.csv", result.failures.len());
        if result.runs.is_empty() && result.failures.iter().all(|f| f.simulator_failure) {
            return Err(Failure::Simulator("every run failed in the simulator".into()));
        }
    }
    Ok(())
}

fn oracle(function: Function, (a, b): (f64, f64), nodes: usize, bins: usize, out: &Path) -> Result<(), Failure> {
    let cfg = |e: Error| Failure::Config(e.to_string());
    let f = match function {
        Function::Log => MonotoneFunction1D::log(a, b),
        Function::Exp => MonotoneFunction1D::exp(a, b),
        Function::Linear => MonotoneFunction1D::linear(1.0, 0.0, a, b),
    }
    .map_err(cfg)?;
    let xs = optimal_nodes(&f, nodes).map_err(cfg)?;
    let cost = cinf_cost(&xs, &f).map_err(cfg)?;
    let check = node_density_check(&f, nodes, bins).map_err(cfg)?;
    let write = || -> std::io::Result<()> {
        if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut w = BufWriter::new(File::create(out)?);
        writeln!(w, "index,node,f_node,cinf_cost,tv_distance")?;
        for (i, x) in xs.iter().enumerate() {
            writeln!(w, "{},{x:?},{:?},{cost:?},{:?}", i + 1, f.eval(*x), check.tv_distance)?;
        }
        w.flush()
    };
    write().map_err(|e| Failure::Other(format!("cannot write {}: {e}", out.display())))?;
    println!("cinf_cost={cost:e} tv_distance={:.6}", check.tv_distance);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out, seed } => run(&config, &out, seed),
        Command::Experiment { config, out, seed } => experiment(&config, &out, seed),
        Command::Oracle {
            function,
            interval,
            nodes,
            bins,
            out,
        } => oracle(function, interval, nodes, bins, &out),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Simulator(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
