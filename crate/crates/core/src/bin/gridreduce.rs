use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gridreduce::ensemble::triangle_ensemble;
use gridreduce::grid::{preprocess_degree_zero, validate, ValidationMode};
use gridreduce::io::{generate_synthetic, load_dir, load_network, save_dir, SpecError, SyntheticSpec, TableError};
use gridreduce::ledger::{deserialize, expand, serialize, ExpansionTarget};
use gridreduce::metrics::{degree_distribution, wasserstein1, DistanceEntry, MetricsError, ReductionReport};
use gridreduce::service::{serve, Session};
use gridreduce::topo::{numeric_reduction_pipeline, topological_reduction, Stage, Thresholds};
use gridreduce::{LedgerError, Network, NetworkError, ReductionLedger, TopoError};
use thiserror::Error;

const LEDGER_FILE: &str = "ledger.json";
const REPORT_FILE: &str = "report.json";
const EQUIVALENT_DIR: &str = "equivalent";

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Topo(#[from] TopoError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, bytes).map_err(|source| CliError::Io { path: path.display().to_string(), source })
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

/// `--vthr` value: a voltage in kV or `none`.
#[derive(Clone, Copy, Debug)]
struct VoltageLimit(Option<f64>);

fn parse_vthr(s: &str) -> Result<VoltageLimit, String> {
    if s.eq_ignore_ascii_case("none") {
        return Ok(VoltageLimit(None));
    }
    s.parse::<f64>().map(|v| VoltageLimit(Some(v))).map_err(|_| format!("expected a voltage in kV or `none`, got {s:?}"))
}

#[derive(Parser)]
#[command(name = "gridreduce", version, about = "Reduce power-grid networks and expand them back")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct ThresholdArgs {
    /// Highest nominal voltage (kV) a collapsed bus may have, or `none`.
    #[arg(long, default_value = "none", value_parser = parse_vthr)]
    vthr: VoltageLimit,
    /// Buses of this degree or more are never collapsed.
    #[arg(long, default_value_t = 6)]
    dthr: usize,
}

impl ThresholdArgs {
    fn thresholds(self) -> Result<Thresholds, CliError> {
        Ok(Thresholds::new(self.dthr, self.vthr.0)?)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run reduction stages and write the reduced tables, ledger and report.
    Reduce {
        #[arg(long)]
        buses: PathBuf,
        #[arg(long)]
        lines: PathBuf,
        /// Comma-separated subset of d1,d2,tri in that order.
        #[arg(long, value_delimiter = ',', default_value = "d1,d2,tri")]
        stages: Vec<Stage>,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Require an inductive, balanced network and also write its
        /// power-flow equivalent.
        #[arg(long)]
        strict: bool,
    },
    /// Bring back part of a reduction.
    Expand {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        /// ALL, a field key such as t_b1, or KEY:MEMBER.
        #[arg(long)]
        target: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print the reduction report of a network directory.
    Stats {
        #[arg(long)]
        net: PathBuf,
        /// Ledger file; defaults to ledger.json inside --net when present.
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Second network to compare degree distributions with.
        #[arg(long)]
        compare: Option<PathBuf>,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic network from a JSON spec.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Repeat the triangle stage over consecutive seeds.
    Ensemble {
        #[arg(long)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Network directory (buses.csv and lines.csv).
        #[arg(long)]
        net: PathBuf,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        /// Also write every run as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a reduced network for interactive exploration.
    Serve {
        #[arg(long)]
        net: PathBuf,
        #[arg(long)]
        ledger: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn read_network(dir: &Path) -> Result<Network, CliError> {
    Ok(preprocess_degree_zero(&load_dir(dir)?)?)
}

fn read_ledger(path: &Path) -> Result<ReductionLedger, CliError> {
    deserialize(&read_file(path)?).map_err(|e| match e {
        LedgerError::Parse { line, column, message } => CliError::Usage(format!("{}:{line}:{column}: {message}", path.display())),
        other => other.into(),
    })
}

fn reduce(buses: &Path, lines: &Path, stages: &[Stage], thr: Thresholds, seed: u64, out_dir: &Path, strict: bool) -> Result<(), CliError> {
    let net = preprocess_degree_zero(&load_network(buses, lines)?)?;
    log::info!("input: {} buses, {} lines", net.bus_count(), net.line_count());
    let (reduced, ledger, report) = if strict {
        let out = numeric_reduction_pipeline(&net, stages, thr, seed)?;
        save_dir(&out.equivalent_network(&net)?, &out_dir.join(EQUIVALENT_DIR))?;
        (out.network, out.ledger, out.report)
    } else {
        for v in validate(&net, ValidationMode::Lenient)?.violations {
            log::warn!("{v}");
        }
        let out = topological_reduction(&net, stages, thr, seed)?;
        (out.network, out.ledger, out.report)
    };
    save_dir(&reduced, out_dir)?;
    write_file(&out_dir.join(LEDGER_FILE), &serialize(&ledger))?;
    write_file(&out_dir.join(REPORT_FILE), to_json(&report).as_bytes())?;
    print!("{}", report.table());
    Ok(())
}

fn expand_cmd(net: &Path, ledger: &Path, target: &str, out_dir: &Path) -> Result<(), CliError> {
    let target: ExpansionTarget = target.parse()?;
    let (net, ledger) = (read_network(net)?, read_ledger(ledger)?);
    let (expanded, rest, delta) = expand(&net, &ledger, &target)?;
    save_dir(&expanded, out_dir)?;
    write_file(&out_dir.join(LEDGER_FILE), &serialize(&rest))?;
    print!("{}", to_json(&delta));
    Ok(())
}

fn stats(net_dir: &Path, ledger: Option<&Path>, compare: Option<&Path>, json: bool) -> Result<(), CliError> {
    let net = read_network(net_dir)?;
    let default_ledger = net_dir.join(LEDGER_FILE);
    let ledger = match ledger {
        Some(path) => read_ledger(path)?,
        None if default_ledger.exists() => read_ledger(&default_ledger)?,
        None => ReductionLedger::new(),
    };
    let mut report = ReductionReport::for_state(&net, &ledger)?;
    if let Some(other) = compare {
        let other_net = read_network(other)?;
        let value = wasserstein1(&degree_distribution(&net)?, &degree_distribution(&other_net)?);
        report.wasserstein.push(DistanceEntry { from: net_dir.display().to_string(), to: other.display().to_string(), value });
    }
    if json {
        print!("{}", to_json(&report));
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn synth(spec_path: &Path, seed: Option<u64>, out_dir: &Path) -> Result<(), CliError> {
    let bytes = read_file(spec_path)?;
    let mut spec: SyntheticSpec = serde_json::from_slice(&bytes).map_err(|source| CliError::Json { path: spec_path.display().to_string(), source })?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    let net = generate_synthetic(&spec)?;
    save_dir(&net, out_dir)?;
    let prediction = to_json(&spec.predict());
    write_file(&out_dir.join("prediction.json"), prediction.as_bytes())?;
    print!("{prediction}");
    Ok(())
}

fn ensemble(runs: usize, seed: u64, net: &Path, thr: Thresholds, out: Option<&Path>) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Usage("--runs must be at least 1".into()));
    }
    let e = triangle_ensemble(&read_network(net)?, thr, seed, runs)?;
    println!("buses before triangle stage: {}", e.start);
    println!("{:>8} {:>6}", "|triN|", "runs");
    let hist: &BTreeMap<usize, usize> = &e.histogram;
    for (size, count) in hist {
        println!("{size:>8} {count:>6}");
    }
    println!("mean {:.3}", e.mean());
    if let Some(path) = out {
        write_file(path, to_json(&e).as_bytes())?;
    }
    Ok(())
}

fn serve_cmd(net: &Path, ledger: &Path, port: u16) -> Result<(), CliError> {
    let session = Session::new(read_network(net)?, read_ledger(ledger)?);
    let rt = tokio::runtime::Runtime::new().map_err(|source| CliError::Io { path: "runtime".into(), source })?;
    rt.block_on(serve(session, port)).map_err(|source| CliError::Io { path: format!("127.0.0.1:{port}"), source })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Reduce { buses, lines, stages, thresholds, seed, out_dir, strict } => reduce(&buses, &lines, &stages, thresholds.thresholds()?, seed, &out_dir, strict),
        Command::Expand { net, ledger, target, out_dir } => expand_cmd(&net, &ledger, &target, &out_dir),
        Command::Stats { net, ledger, compare, json } => stats(&net, ledger.as_deref(), compare.as_deref(), json),
        Command::Synth { spec, seed, out_dir } => synth(&spec, seed, &out_dir),
        Command::Ensemble { runs, seed, net, thresholds, out } => ensemble(runs, seed, &net, thresholds.thresholds()?, out.as_deref()),
        Command::Serve { net, ledger, port } => serve_cmd(&net, &ledger, port),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRIDREDUCE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
