//! Command-line harness for the htapstore engine: initialize a store
//! directory, load preset tables, drive workloads, sweep crash points,
//! and evaluate the data-transfer model.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use htapstore::bench::{self, CrashOffsets, SchemaPreset, WorkloadConfig, WorkloadMode};
use htapstore::perfmodel;
use htapstore::txn::{parse_script_text, Engine};

const DEFAULT_DIR: &str = "./htapstore-data";

#[derive(Parser)]
#[command(
    name = "htapstore",
    about = "Embedded HTAP storage engine with a mixed-format store",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Initialize a fresh store directory.
    Init {
        /// Store directory (defaults to ./htapstore-data).
        dir: Option<PathBuf>,
    },
    /// Create a preset table and fill it with deterministic rows.
    Load {
        #[arg(long, default_value = DEFAULT_DIR)]
        dir: PathBuf,
        /// customer-split | web-sales | sessions
        #[arg(long)]
        preset: String,
        #[arg(long)]
        rows: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Row groups per table.
        #[arg(long, default_value_t = 4)]
        groups: u32,
    },
    /// Run a workload and report throughput, latency, and freshness.
    Run(RunArgs),
    /// Truncate the log at byte offsets and verify recovery against the
    /// committed-prefix oracle.
    CrashSweep {
        /// Working directory for the sweep (created fresh).
        #[arg(long, default_value = "./htapstore-crash-sweep")]
        dir: PathBuf,
        /// Script file: statements one per line, blank lines separate
        /// transactions.
        #[arg(long)]
        script: PathBuf,
        /// `all`, or a sample size.
        #[arg(long, default_value = "all")]
        offsets: String,
        /// Print a verdict line for every offset, not only failures.
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate the analytic data-transfer model (decimal units:
    /// 1 GB = 10^9 bytes).
    Perfmodel {
        /// Number of applications sharing the external channel.
        #[arg(long, default_value_t = 50)]
        apps: u64,
        /// Data per application, e.g. 1GB.
        #[arg(long, default_value = "1GB")]
        data: String,
        /// Total external bandwidth, e.g. 500MB (per second).
        #[arg(long, default_value = "500MB")]
        ext_bw: String,
        /// Near-data bandwidth, e.g. 100GB (per second).
        #[arg(long, default_value = "100GB")]
        near_bw: String,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = DEFAULT_DIR)]
    dir: PathBuf,
    /// Base configuration file (flat key=value); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// oltp | olap | hybrid | mixed
    #[arg(long)]
    mode: Option<String>,
    /// Target operations/second across all threads (0 = unthrottled).
    #[arg(long)]
    rate: Option<f64>,
    /// Run duration in seconds (ignored when --ops is set).
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    threads: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// Exact number of operations to run (makes single-threaded runs
    /// fully deterministic).
    #[arg(long)]
    ops: Option<u64>,
    /// Simulated dual-format propagation delay in milliseconds:
    /// analytical reads see a snapshot at least this old.
    #[arg(long)]
    propagation_delay_ms: Option<u64>,
    /// Freshness probe interval in committed write transactions
    /// (0 disables probes).
    #[arg(long)]
    probe_every: Option<u64>,
    /// Check every analytical result against a naive full-row oracle
    /// (olap mode on a static table).
    #[arg(long)]
    verify: bool,
    /// Write the report as CSV (metric,value,unit).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write a checkpoint of the committed end state.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::Init { dir } => {
            let dir = dir.unwrap_or_else(|| PathBuf::from(DEFAULT_DIR));
            Engine::create(&dir)?;
            println!("initialized store at {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Load {
            dir,
            preset,
            rows,
            seed,
            groups,
        } => {
            let preset = SchemaPreset::parse(&preset).ok_or_else(|| {
                format!("unknown preset {preset:?} (customer-split, web-sales, sessions)")
            })?;
            let engine = Engine::open(&dir)?;
            bench::load(&engine, preset, rows, seed, groups)?;
            println!(
                "loaded {rows} rows into {} ({} groups, seed {seed})",
                preset.table_name(),
                groups
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(args) => run_command(args),
        Command::CrashSweep {
            dir,
            script,
            offsets,
            verbose,
        } => crash_sweep_command(&dir, &script, &offsets, verbose),
        Command::Perfmodel {
            apps,
            data,
            ext_bw,
            near_bw,
        } => {
            let scenario = perfmodel::TransferScenario::new(
                apps,
                perfmodel::parse_bytes(&data)?,
                perfmodel::parse_bytes(&ext_bw)?,
                perfmodel::parse_bytes(&near_bw)?,
            )?;
            let separate = perfmodel::separate_latency(&scenario);
            let near = perfmodel::neardata_latency(&scenario);
            let ratio = perfmodel::gap(&scenario);
            println!("scenario              separate_latency  neardata_latency  gap");
            println!(
                "{:<20}  {:<16}  {:<16}  {}",
                format!("N={apps} {data}@{ext_bw}|{near_bw}"),
                format!("{separate} s"),
                format!("{near} s"),
                ratio
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run_command(args: RunArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut config = match &args.config {
        Some(path) => WorkloadConfig::from_kv_text(&std::fs::read_to_string(path)?)?,
        None => WorkloadConfig::default(),
    };
    if let Some(mode) = &args.mode {
        config.mode =
            WorkloadMode::parse(mode).ok_or_else(|| format!("unknown mode {mode:?}"))?;
    }
    if let Some(rate) = args.rate {
        config.rate = rate;
    }
    if let Some(secs) = args.duration {
        config.duration = Duration::from_secs_f64(secs);
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(ops) = args.ops {
        config.total_ops = Some(ops);
    }
    if let Some(ms) = args.propagation_delay_ms {
        config.propagation_delay = (ms > 0).then(|| Duration::from_millis(ms));
    }
    if let Some(every) = args.probe_every {
        config.freshness_probe_every = every;
    }
    config.verify_olap |= args.verify;

    let engine = Engine::open(&args.dir)?;
    // The workload targets the preset tables; derive their sizes.
    let snap = engine.snapshot();
    config.customer_rows = engine.table("customer")?.visible_keys(&snap).len() as u64;
    config.sales_rows = engine.table("web_sales")?.visible_keys(&snap).len() as u64;

    let report = bench::run(&engine, &config)?;

    println!(
        "mode={} threads={} elapsed={:.3}s committed={} aborted={} errors={} throughput={:.1} txn/s",
        report.mode.name(),
        report.threads,
        report.elapsed.as_secs_f64(),
        report.committed_txns,
        report.aborted_txns,
        report.errors,
        report.throughput_tps(),
    );
    for (kind, lat) in &report.latencies {
        println!(
            "{kind:>8}: p50 {:.3} ms  p95 {:.3} ms  p99 {:.3} ms  ({} samples)",
            lat.p50.as_secs_f64() * 1e3,
            lat.p95.as_secs_f64() * 1e3,
            lat.p99.as_secs_f64() * 1e3,
            lat.count
        );
    }
    if let Some(freshness) = &report.freshness {
        println!(
            "freshness: {} probes, {} stale first reads, max lag {:.3} ms ({} polls)",
            freshness.probes,
            freshness.stale_first_reads,
            freshness.max_lag.as_secs_f64() * 1e3,
            freshness.max_lag_polls
        );
    }

    if let Some(path) = &args.report {
        std::fs::write(path, report.to_csv())?;
        println!("report written to {}", path.display());
    }
    if let Some(path) = &args.checkpoint {
        engine.checkpoint_to(path)?;
        println!("checkpoint written to {}", path.display());
    }
    Ok(if report.errors == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn crash_sweep_command(
    dir: &Path,
    script_path: &Path,
    offsets: &str,
    verbose: bool,
) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(script_path)?;
    let scripts = parse_script_text(&text)?;
    let offsets = match offsets {
        "all" => CrashOffsets::All,
        n => CrashOffsets::Sample(n.parse().map_err(|_| "offsets must be `all` or a count")?),
    };
    let _ = std::fs::remove_dir_all(dir);
    std::fs::create_dir_all(dir)?;

    let report = bench::crash_sweep(
        dir,
        &|engine| {
            engine.create_table(SchemaPreset::CustomerSplit.schema(), 2)?;
            engine.create_table(SchemaPreset::WebSales.schema(), 2)?;
            engine.create_table(SchemaPreset::Sessions.schema(), 2)?;
            Ok(())
        },
        &scripts,
        offsets,
    )?;

    if verbose {
        println!("log length: {} bytes", report.log_len);
    }
    for verdict in &report.mismatches {
        println!("offset {:>8}: FAIL  {}", verdict.offset, verdict.detail);
    }
    println!(
        "crash sweep: {} offsets tested over a {}-byte log, {} mismatches",
        report.offsets_tested,
        report.log_len,
        report.mismatches.len()
    );
    Ok(if report.all_match() {
        println!("all recovered states match the committed-prefix oracle");
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
