//! Benchmark harness: data loading, workload generation with rate
//! pacing, freshness and latency measurement, and crash-injection
//! sweeps.
//!
//! The harness runs in-process against the engine. Workloads are
//! deterministic functions of their seed: a fixed seed at one thread
//! produces a byte-identical operation stream and committed end state.

mod crash;
mod freshness;
mod run;

pub use crash::{crash_sweep, CrashOffsets, CrashSweepReport, OffsetVerdict};
pub use freshness::{freshness_trial, DualFormatSim, FreshnessTrial};
pub use run::run;

use std::collections::BTreeMap;
use std::time::Duration;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::schema::{ColumnDef, TableSchema};
use crate::txn::{Engine, Statement};
use crate::value::{Value, ValueType};

/// Built-in table presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaPreset {
    /// TPC-C-style CUSTOMER with the update set {c_id, c_balance,
    /// c_data}; every other attribute lives in the read-only partition.
    CustomerSplit,
    /// Sales fact table whose measure columns are all read-only.
    WebSales,
    /// Session-feedback table matching the default distill mapping.
    Sessions,
}

impl SchemaPreset {
    pub fn parse(s: &str) -> Option<SchemaPreset> {
        Some(match s {
            "customer-split" => SchemaPreset::CustomerSplit,
            "web-sales" => SchemaPreset::WebSales,
            "sessions" => SchemaPreset::Sessions,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemaPreset::CustomerSplit => "customer-split",
            SchemaPreset::WebSales => "web-sales",
            SchemaPreset::Sessions => "sessions",
        }
    }

    pub fn table_name(&self) -> &'static str {
        match self {
            SchemaPreset::CustomerSplit => "customer",
            SchemaPreset::WebSales => "web_sales",
            SchemaPreset::Sessions => "sessions",
        }
    }

    pub fn schema(&self) -> TableSchema {
        match self {
            SchemaPreset::CustomerSplit => TableSchema::new(
                "customer",
                vec![
                    ColumnDef::new("c_id", ValueType::Int64),
                    ColumnDef::new("c_balance", ValueType::Float64),
                    ColumnDef::new("c_data", ValueType::Utf8),
                    ColumnDef::new("c_first", ValueType::Utf8),
                    ColumnDef::new("c_last", ValueType::Utf8),
                    ColumnDef::new("c_city", ValueType::Utf8),
                    ColumnDef::new("c_credit_lim", ValueType::Float64),
                    ColumnDef::new("c_discount", ValueType::Float64),
                    ColumnDef::new("c_since", ValueType::Int64),
                ],
                "c_id",
                ["c_id", "c_balance", "c_data"].map(String::from),
            )
            .expect("preset schema is valid"),
            SchemaPreset::WebSales => TableSchema::new(
                "web_sales",
                vec![
                    ColumnDef::new("ws_id", ValueType::Int64),
                    ColumnDef::new("ws_item", ValueType::Int64),
                    ColumnDef::new("ws_quantity", ValueType::Int64),
                    ColumnDef::new("ws_price", ValueType::Float64),
                ],
                "ws_id",
                ["ws_id".to_string()],
            )
            .expect("preset schema is valid"),
            SchemaPreset::Sessions => TableSchema::new(
                "sessions",
                vec![
                    ColumnDef::new("customer_id", ValueType::Int64),
                    ColumnDef::new("t", ValueType::Int64),
                    ColumnDef::new("buy", ValueType::Bool),
                    ColumnDef::new("cart", ValueType::Bool),
                    ColumnDef::new("time_of_day", ValueType::Utf8),
                    ColumnDef::new("location", ValueType::Utf8),
                    ColumnDef::new("pv", ValueType::Bool),
                    ColumnDef::new("favorite", ValueType::Bool),
                    ColumnDef::new("duration", ValueType::Utf8),
                    ColumnDef::new("text_query", ValueType::Utf8),
                    ColumnDef::new("image_query", ValueType::Utf8),
                    ColumnDef::new("price_lo", ValueType::Float64),
                    ColumnDef::new("price_hi", ValueType::Float64),
                    ColumnDef::new("inventory", ValueType::Int64),
                    ColumnDef::new("commodity_id", ValueType::Int64),
                    ColumnDef::new("category", ValueType::Int64),
                    ColumnDef::new("subcategory", ValueType::Int64),
                    ColumnDef::new("style", ValueType::Utf8),
                ],
                "customer_id",
                ["customer_id", "t", "buy", "cart"].map(String::from),
            )
            .expect("preset schema is valid"),
        }
    }

    /// One deterministic synthetic row for key `id`.
    pub fn row(&self, id: i64, rng: &mut ChaCha8Rng) -> Vec<Value> {
        match self {
            SchemaPreset::CustomerSplit => vec![
                Value::Int(id),
                Value::Float((rng.random_range(0..1_000_000) as f64) / 100.0),
                Value::Str(format!("data-{:08x}", rng.random::<u32>())),
                Value::Str(format!("first{}", id % 997)),
                Value::Str(format!("last{}", id % 89)),
                Value::Str(format!("city{}", id % 19)),
                Value::Float(50_000.0),
                Value::Float((rng.random_range(0..5000) as f64) / 10_000.0),
                Value::Int(rng.random_range(1_500_000_000..1_700_000_000)),
            ],
            SchemaPreset::WebSales => vec![
                Value::Int(id),
                Value::Int(rng.random_range(0..10_000)),
                Value::Int(rng.random_range(0..1_000)),
                Value::Float((rng.random_range(0..12_800) as f64) / 100.0),
            ],
            SchemaPreset::Sessions => {
                let times = ["morning", "noon", "evening", "night"];
                let cities = ["hangzhou", "beijing", "shenzhen", "chengdu"];
                let queries = ["wool coat", "sneakers", "desk lamp", "tea set", ""];
                let styles = ["casual", "formal", "outdoor"];
                let price_lo = (rng.random_range(0..5_000) as f64) / 10.0;
                vec![
                    Value::Int(id),
                    Value::Int(rng.random_range(0..64)),
                    Value::Bool(rng.random_bool(0.3)),
                    Value::Bool(rng.random_bool(0.4)),
                    Value::Str(times[rng.random_range(0..times.len())].to_string()),
                    Value::Str(cities[rng.random_range(0..cities.len())].to_string()),
                    Value::Bool(rng.random_bool(0.9)),
                    Value::Bool(rng.random_bool(0.2)),
                    Value::Str(format!("{}", rng.random_range(0..600))),
                    Value::Str(queries[rng.random_range(0..queries.len())].to_string()),
                    Value::Str(String::new()),
                    Value::Float(price_lo),
                    Value::Float(price_lo + (rng.random_range(0..2_000) as f64) / 10.0),
                    Value::Int(rng.random_range(0..100_000)),
                    Value::Int(rng.random_range(0..1_000)),
                    Value::Int(rng.random_range(0..8)),
                    Value::Int(rng.random_range(0..16)),
                    Value::Str(styles[rng.random_range(0..styles.len())].to_string()),
                ]
            }
        }
    }
}

/// Creates a preset table and fills it with `rows` deterministic
/// synthetic rows through committed transactions.
pub fn load(engine: &Engine, preset: SchemaPreset, rows: u64, seed: u64, groups: u32) -> Result<()> {
    engine.create_table(preset.schema(), groups)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = preset.table_name().to_string();
    let mut inserted = 0u64;
    while inserted < rows {
        let batch = (rows - inserted).min(256);
        let mut txn = engine.begin();
        for _ in 0..batch {
            let id = inserted as i64;
            engine.exec_stmt(
                &mut txn,
                Statement::Insert {
                    table: table.clone(),
                    values: preset.row(id, &mut rng),
                },
            )?;
            inserted += 1;
        }
        engine.commit(&mut txn)?;
    }
    Ok(())
}

/// Workload kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkloadMode {
    /// Point transactions only.
    Oltp,
    /// Aggregate queries only.
    Olap,
    /// Hybrid transactions: aggregates in-between transactional
    /// statements, one transaction per script instance.
    Hybrid,
    /// Independent transactional and analytical streams interleaved.
    Mixed,
}

impl WorkloadMode {
    pub fn parse(s: &str) -> Option<WorkloadMode> {
        Some(match s {
            "oltp" => WorkloadMode::Oltp,
            "olap" => WorkloadMode::Olap,
            "hybrid" => WorkloadMode::Hybrid,
            "mixed" => WorkloadMode::Mixed,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            WorkloadMode::Oltp => "oltp",
            WorkloadMode::Olap => "olap",
            WorkloadMode::Hybrid => "hybrid",
            WorkloadMode::Mixed => "mixed",
        }
    }
}

/// Workload configuration. A fixed seed yields a byte-identical
/// operation stream; at one thread it also yields a byte-identical
/// committed end state.
#[derive(Debug, Clone)]
pub struct WorkloadConfig {
    pub mode: WorkloadMode,
    /// Target operations per second across all threads; 0 means
    /// unthrottled. Pacing is open-loop: issue slots are fixed at
    /// `i / rate` from the start of the run.
    pub rate: f64,
    pub duration: Duration,
    /// When set, run exactly this many operations instead of running
    /// for `duration`.
    pub total_ops: Option<u64>,
    pub threads: u32,
    pub seed: u64,
    /// Rows preloaded in the customer table (update targets).
    pub customer_rows: u64,
    /// Rows preloaded in the sales table (aggregate targets).
    pub sales_rows: u64,
    /// Analytical steps per transactional steps in one hybrid script.
    pub olap_per_oltp: (u32, u32),
    /// Simulated dual-format baseline: analytical reads see a snapshot
    /// at least this old, modeling row→column propagation delay. `None`
    /// is the native mixed-format behavior (zero delay).
    pub propagation_delay: Option<Duration>,
    /// Run a freshness probe after every Nth committed write
    /// transaction; 0 disables probing.
    pub freshness_probe_every: u64,
    /// Check every analytical result against a naive full-row oracle
    /// built at run start (the sales table must stay static, i.e. mode
    /// `olap`). Mismatches count as errors.
    pub verify_olap: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            mode: WorkloadMode::Hybrid,
            rate: 0.0,
            duration: Duration::from_secs(5),
            total_ops: None,
            threads: 1,
            seed: 42,
            customer_rows: 1_000,
            sales_rows: 1_000,
            olap_per_oltp: (1, 2),
            propagation_delay: None,
            freshness_probe_every: 16,
            verify_olap: false,
        }
    }
}

impl WorkloadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rate < 0.0 || !self.rate.is_finite() {
            return Err(Error::InvalidConfig("rate must be finite and >= 0".into()));
        }
        if self.total_ops.is_none() && self.duration.is_zero() {
            return Err(Error::InvalidConfig(
                "duration must be positive (or set total_ops)".into(),
            ));
        }
        if self.threads == 0 {
            return Err(Error::InvalidConfig("threads must be >= 1".into()));
        }
        if self.olap_per_oltp.0 == 0 && self.olap_per_oltp.1 == 0 {
            return Err(Error::InvalidConfig("empty hybrid template".into()));
        }
        if self.customer_rows == 0 && matches!(self.mode, WorkloadMode::Oltp | WorkloadMode::Hybrid | WorkloadMode::Mixed) {
            return Err(Error::InvalidConfig(
                "transactional modes need customer rows".into(),
            ));
        }
        Ok(())
    }

    /// Parses the flat `key=value` config-file form. Unknown keys are
    /// rejected; missing keys keep their defaults.
    pub fn from_kv_text(text: &str) -> Result<WorkloadConfig> {
        let mut config = WorkloadConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key=value", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::InvalidConfig(format!("line {}: {what}", lineno + 1));
            match key {
                "mode" => {
                    config.mode =
                        WorkloadMode::parse(value).ok_or_else(|| bad("unknown mode"))?;
                }
                "rate" => config.rate = value.parse().map_err(|_| bad("bad rate"))?,
                "duration_secs" => {
                    config.duration =
                        Duration::from_secs_f64(value.parse().map_err(|_| bad("bad duration"))?)
                }
                "total_ops" => config.total_ops = Some(value.parse().map_err(|_| bad("bad ops"))?),
                "threads" => config.threads = value.parse().map_err(|_| bad("bad threads"))?,
                "seed" => config.seed = value.parse().map_err(|_| bad("bad seed"))?,
                "customer_rows" => {
                    config.customer_rows = value.parse().map_err(|_| bad("bad customer_rows"))?
                }
                "sales_rows" => {
                    config.sales_rows = value.parse().map_err(|_| bad("bad sales_rows"))?
                }
                "propagation_delay_ms" => {
                    let ms: u64 = value.parse().map_err(|_| bad("bad delay"))?;
                    config.propagation_delay =
                        (ms > 0).then(|| Duration::from_millis(ms));
                }
                "freshness_probe_every" => {
                    config.freshness_probe_every =
                        value.parse().map_err(|_| bad("bad probe interval"))?
                }
                "verify_olap" => {
                    config.verify_olap = value.parse().map_err(|_| bad("bad verify_olap"))?
                }
                other => return Err(bad(&format!("unknown key {other:?}"))),
            }
        }
        Ok(config)
    }
}

/// Latency percentiles for one step kind, nearest-rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencySummary {
    pub count: u64,
    pub p50: Duration,
    pub p95: Duration,
    pub p99: Duration,
}

pub(crate) fn summarize_latencies(mut nanos: Vec<u64>) -> Option<LatencySummary> {
    if nanos.is_empty() {
        return None;
    }
    nanos.sort_unstable();
    let rank = |p: f64| {
        let idx = ((p * nanos.len() as f64).ceil() as usize).clamp(1, nanos.len()) - 1;
        Duration::from_nanos(nanos[idx])
    };
    Some(LatencySummary {
        count: nanos.len() as u64,
        p50: rank(0.50),
        p95: rank(0.95),
        p99: rank(0.99),
    })
}

/// Freshness measurements: lag between a commit and its first
/// visibility to an analytical reader.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FreshnessSummary {
    pub probes: u64,
    /// Probes whose first read did not yet reflect the commit.
    pub stale_first_reads: u64,
    /// Worst-case polls before the commit became visible (0 = first
    /// read already reflected it).
    pub max_lag_polls: u64,
    pub max_lag: Duration,
}

/// Outcome of one workload run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub mode: WorkloadMode,
    pub threads: u32,
    pub rate: f64,
    pub seed: u64,
    pub elapsed: Duration,
    pub committed_txns: u64,
    pub aborted_txns: u64,
    pub errors: u64,
    pub olap_queries: u64,
    pub latencies: BTreeMap<&'static str, LatencySummary>,
    pub freshness: Option<FreshnessSummary>,
}

impl RunReport {
    pub fn throughput_tps(&self) -> f64 {
        if self.elapsed.is_zero() {
            return 0.0;
        }
        self.committed_txns as f64 / self.elapsed.as_secs_f64()
    }

    /// CSV form: `metric,value,unit` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,unit\n");
        let mut push = |metric: &str, value: String, unit: &str| {
            out.push_str(&format!("{metric},{value},{unit}\n"));
        };
        push("mode", self.mode.name().to_string(), "");
        push("threads", self.threads.to_string(), "count");
        push("rate_target", format!("{}", self.rate), "op/s");
        push("seed", self.seed.to_string(), "");
        push("elapsed", format!("{:.6}", self.elapsed.as_secs_f64()), "s");
        push("committed_txns", self.committed_txns.to_string(), "count");
        push("aborted_txns", self.aborted_txns.to_string(), "count");
        push("errors", self.errors.to_string(), "count");
        push("olap_queries", self.olap_queries.to_string(), "count");
        push(
            "throughput",
            format!("{:.3}", self.throughput_tps()),
            "txn/s",
        );
        for (kind, summary) in &self.latencies {
            let ms = |d: Duration| format!("{:.6}", d.as_secs_f64() * 1e3);
            push(&format!("p50_{kind}"), ms(summary.p50), "ms");
            push(&format!("p95_{kind}"), ms(summary.p95), "ms");
            push(&format!("p99_{kind}"), ms(summary.p99), "ms");
        }
        if let Some(f) = &self.freshness {
            push("freshness_probes", f.probes.to_string(), "count");
            push(
                "freshness_stale_first_reads",
                f.stale_first_reads.to_string(),
                "count",
            );
            push("freshness_max_lag_polls", f.max_lag_polls.to_string(), "polls");
            push(
                "freshness_max_lag",
                format!("{:.6}", f.max_lag.as_secs_f64() * 1e3),
                "ms",
            );
        }
        out
    }
}
