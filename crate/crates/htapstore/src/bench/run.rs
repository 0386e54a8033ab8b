//! Workload execution with open-loop rate pacing.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::query::AggFn;
use crate::storage::RangePredicate;
use crate::txn::{Engine, HybridScript, ScriptStep, Statement};
use crate::value::Value;

use super::freshness::{freshness_trial, DualFormatSim};
use super::{
    summarize_latencies, FreshnessSummary, RunReport, WorkloadConfig, WorkloadMode,
};

/// Per-thread metric sink, merged at the end of the run.
#[derive(Default)]
struct ThreadMetrics {
    committed: u64,
    aborted: u64,
    errors: u64,
    olap_queries: u64,
    oltp_nanos: Vec<u64>,
    olap_nanos: Vec<u64>,
    commit_nanos: Vec<u64>,
    freshness: FreshnessSummary,
}

struct Shared {
    engine: Engine,
    config: WorkloadConfig,
    start: Instant,
    deadline: Option<Instant>,
    ops_issued: AtomicU64,
    baseline: Option<DualFormatSim>,
    /// Key source for rows inserted during the run, disjoint from the
    /// preloaded key range.
    insert_cursor: AtomicU64,
    /// Full-row oracle for self-verifying analytical reads; built over
    /// the static sales table when `verify_olap` is set.
    olap_oracle: Option<OlapOracle>,
}

/// Naive materialized copy of the sales rows: every aggregate the
/// workload issues is recomputed row-at-a-time and compared.
struct OlapOracle {
    rows: Vec<(i64, f64)>, // (ws_quantity, ws_price)
}

impl OlapOracle {
    fn build(engine: &Engine) -> Result<OlapOracle> {
        let table = engine.table("web_sales")?;
        let snap = engine.snapshot();
        let schema = table.schema();
        let qty = schema.column_index("ws_quantity").expect("preset column");
        let price = schema.column_index("ws_price").expect("preset column");
        let mut rows = Vec::new();
        for key in table.visible_keys(&snap) {
            let row = table.point_get(key, &snap).expect("visible");
            rows.push((
                row[qty].as_int().expect("int column"),
                row[price].as_float().expect("float column"),
            ));
        }
        Ok(OlapOracle { rows })
    }

    fn expected(&self, agg: AggFn, column: &str, lo: f64, hi: f64) -> Option<crate::query::AggValue> {
        use crate::query::AggValue;
        let selected: Vec<(i64, f64)> = self
            .rows
            .iter()
            .copied()
            .filter(|(_, p)| (lo..=hi).contains(p))
            .collect();
        match (agg, column) {
            (AggFn::Count, _) => Some(AggValue::Int(selected.len() as i64)),
            _ if selected.is_empty() => None,
            (AggFn::Max, "ws_quantity") => {
                Some(AggValue::Int(selected.iter().map(|(q, _)| *q).max()?))
            }
            (AggFn::Min, "ws_quantity") => {
                Some(AggValue::Int(selected.iter().map(|(q, _)| *q).min()?))
            }
            (AggFn::Sum, "ws_quantity") => {
                Some(AggValue::Int(selected.iter().map(|(q, _)| *q).sum()))
            }
            (AggFn::Avg, "ws_price") => Some(AggValue::Float(
                selected.iter().map(|(_, p)| *p).sum::<f64>() / selected.len() as f64,
            )),
            _ => None,
        }
    }

    fn matches(&self, agg: AggFn, column: &str, lo: f64, hi: f64, got: &crate::query::AggResult) -> bool {
        use crate::query::AggValue;
        let want = self.expected(agg, column, lo, hi);
        match (&want, got) {
            (None, None) => true,
            (Some(AggValue::Int(a)), Some(AggValue::Int(b))) => a == b,
            (Some(AggValue::Float(a)), Some(AggValue::Float(b))) => {
                (a - b).abs() <= 1e-9 * a.abs().max(1.0)
            }
            _ => false,
        }
    }
}

const INSERT_KEY_BASE: i64 = 1 << 40;

/// Runs the configured workload. Tables must be loaded first
/// ([`super::load`]); the transactional side drives `customer`, the
/// analytical side reads `web_sales` and `customer`.
pub fn run(engine: &Engine, config: &WorkloadConfig) -> Result<RunReport> {
    config.validate()?;
    engine.table("customer")?;
    engine.table("web_sales")?;

    let shared = Arc::new(Shared {
        engine: engine.clone(),
        config: config.clone(),
        start: Instant::now(),
        deadline: config
            .total_ops
            .is_none()
            .then(|| Instant::now() + config.duration),
        ops_issued: AtomicU64::new(0),
        baseline: config
            .propagation_delay
            .map(|delay| DualFormatSim::new(engine, delay)),
        insert_cursor: AtomicU64::new(0),
        olap_oracle: config
            .verify_olap
            .then(|| OlapOracle::build(engine))
            .transpose()?,
    });

    let mut handles = Vec::new();
    for thread_id in 0..config.threads {
        let shared = Arc::clone(&shared);
        handles.push(std::thread::spawn(move || worker(shared, thread_id)));
    }
    let mut merged = ThreadMetrics::default();
    for handle in handles {
        let metrics = handle.join().expect("worker panicked");
        merged.committed += metrics.committed;
        merged.aborted += metrics.aborted;
        merged.errors += metrics.errors;
        merged.olap_queries += metrics.olap_queries;
        merged.oltp_nanos.extend(metrics.oltp_nanos);
        merged.olap_nanos.extend(metrics.olap_nanos);
        merged.commit_nanos.extend(metrics.commit_nanos);
        merged.freshness.probes += metrics.freshness.probes;
        merged.freshness.stale_first_reads += metrics.freshness.stale_first_reads;
        merged.freshness.max_lag_polls = merged
            .freshness
            .max_lag_polls
            .max(metrics.freshness.max_lag_polls);
        merged.freshness.max_lag = merged.freshness.max_lag.max(metrics.freshness.max_lag);
    }
    let elapsed = shared.start.elapsed();

    let mut latencies = std::collections::BTreeMap::new();
    if let Some(s) = summarize_latencies(merged.oltp_nanos) {
        latencies.insert("oltp", s);
    }
    if let Some(s) = summarize_latencies(merged.olap_nanos) {
        latencies.insert("olap", s);
    }
    if let Some(s) = summarize_latencies(merged.commit_nanos) {
        latencies.insert("commit", s);
    }
    Ok(RunReport {
        mode: config.mode,
        threads: config.threads,
        rate: config.rate,
        seed: config.seed,
        elapsed,
        committed_txns: merged.committed,
        aborted_txns: merged.aborted,
        errors: merged.errors,
        olap_queries: merged.olap_queries,
        latencies,
        freshness: (merged.freshness.probes > 0).then_some(merged.freshness),
    })
}

fn worker(shared: Arc<Shared>, thread_id: u32) -> ThreadMetrics {
    let config = &shared.config;
    let mut rng = ChaCha8Rng::seed_from_u64(
        config
            .seed
            .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(thread_id as u64 + 1)),
    );
    let mut metrics = ThreadMetrics::default();
    let mut own_keys: Vec<i64> = Vec::new();
    let mut writes_since_probe = 0u64;

    loop {
        let op_index = shared.ops_issued.fetch_add(1, Ordering::SeqCst);
        if let Some(limit) = config.total_ops {
            if op_index >= limit {
                break;
            }
        }
        if let Some(deadline) = shared.deadline {
            if Instant::now() >= deadline {
                break;
            }
        }
        pace(&shared, op_index);

        let result = match config.mode {
            WorkloadMode::Oltp => {
                run_oltp_txn(&shared, thread_id, &mut rng, &mut own_keys, &mut metrics)
            }
            WorkloadMode::Olap => run_olap_query(&shared, &mut rng, &mut metrics),
            WorkloadMode::Hybrid => run_hybrid_txn(&shared, &mut rng, &mut metrics),
            WorkloadMode::Mixed => {
                if rng.random_bool(0.5) {
                    run_oltp_txn(&shared, thread_id, &mut rng, &mut own_keys, &mut metrics)
                } else {
                    run_olap_query(&shared, &mut rng, &mut metrics)
                }
            }
        };
        let wrote = match result {
            Ok(wrote) => wrote,
            Err(Error::SecondWriterAborted { .. }) => {
                metrics.aborted += 1;
                false
            }
            Err(_) => {
                metrics.errors += 1;
                false
            }
        };

        if wrote && config.freshness_probe_every > 0 {
            writes_since_probe += 1;
            if writes_since_probe >= config.freshness_probe_every {
                writes_since_probe = 0;
                let key = probe_key(&shared, thread_id);
                if let Ok(trial) =
                    freshness_trial(&shared.engine, &mut rng, key, shared.baseline.as_ref())
                {
                    metrics.freshness.probes += 1;
                    if !trial.immediate {
                        metrics.freshness.stale_first_reads += 1;
                    }
                    metrics.freshness.max_lag_polls =
                        metrics.freshness.max_lag_polls.max(trial.lag_polls);
                    metrics.freshness.max_lag = metrics.freshness.max_lag.max(trial.lag);
                    metrics.committed += 1; // the probe's writer txn
                }
            }
        }
    }
    metrics
}

/// Open-loop pacing: operation i may not start before `i / rate`.
fn pace(shared: &Shared, op_index: u64) {
    let rate = shared.config.rate;
    if rate <= 0.0 {
        return;
    }
    let due = shared.start + Duration::from_secs_f64(op_index as f64 / rate);
    let now = Instant::now();
    if due > now {
        std::thread::sleep(due - now);
    }
}

fn probe_key(shared: &Shared, thread_id: u32) -> i64 {
    let n = shared.insert_cursor.fetch_add(1, Ordering::SeqCst);
    // Probe keys sit above the workload's own insert range.
    (INSERT_KEY_BASE << 1) + (thread_id as i64) * (1 << 30) + n as i64
}

fn fresh_insert_key(shared: &Shared, thread_id: u32) -> i64 {
    let n = shared.insert_cursor.fetch_add(1, Ordering::SeqCst);
    INSERT_KEY_BASE + (thread_id as i64) * (1 << 30) + n as i64
}

/// One transactional round: a few point statements, then commit.
/// Returns whether the transaction committed writes.
fn run_oltp_txn(
    shared: &Shared,
    thread_id: u32,
    rng: &mut ChaCha8Rng,
    own_keys: &mut Vec<i64>,
    metrics: &mut ThreadMetrics,
) -> Result<bool> {
    let engine = &shared.engine;
    let config = &shared.config;
    let mut txn = engine.begin();
    let statements = rng.random_range(1..4);
    let mut wrote = false;
    for _ in 0..statements {
        let t0 = Instant::now();
        let choice = rng.random_range(0..10);
        let stmt = if choice < 5 {
            Statement::Update {
                table: "customer".into(),
                key: rng.random_range(0..config.customer_rows as i64),
                assignments: vec![(
                    "c_balance".into(),
                    Value::Float((rng.random_range(0..1_000_000) as f64) / 100.0),
                )],
            }
        } else if choice < 7 {
            let key = fresh_insert_key(shared, thread_id);
            own_keys.push(key);
            Statement::Insert {
                table: "customer".into(),
                values: super::SchemaPreset::CustomerSplit.row(key, rng),
            }
        } else if choice < 8 {
            match own_keys.pop() {
                Some(key) => Statement::Delete {
                    table: "customer".into(),
                    key,
                },
                None => Statement::PointGet {
                    table: "customer".into(),
                    key: rng.random_range(0..config.customer_rows as i64),
                },
            }
        } else {
            Statement::PointGet {
                table: "customer".into(),
                key: rng.random_range(0..config.customer_rows as i64),
            }
        };
        let is_write = stmt.is_write();
        match engine.exec_stmt(&mut txn, stmt) {
            Ok(_) => {
                wrote |= is_write;
                metrics.oltp_nanos.push(t0.elapsed().as_nanos() as u64);
            }
            Err(e) => {
                let _ = engine.rollback(&mut txn);
                return Err(e);
            }
        }
    }
    let t0 = Instant::now();
    engine.commit(&mut txn)?;
    metrics.commit_nanos.push(t0.elapsed().as_nanos() as u64);
    metrics.committed += 1;
    if let (true, Some(sim)) = (wrote, shared.baseline.as_ref()) {
        sim.record_commit(engine);
    }
    Ok(wrote)
}

/// One standalone aggregate query.
fn run_olap_query(
    shared: &Shared,
    rng: &mut ChaCha8Rng,
    metrics: &mut ThreadMetrics,
) -> Result<bool> {
    let engine = &shared.engine;
    let t0 = Instant::now();
    let snap = match shared.baseline.as_ref() {
        Some(sim) => sim.olap_snapshot(),
        None => engine.snapshot(),
    };
    let (agg, column) = match rng.random_range(0..5) {
        0 => (AggFn::Max, "ws_quantity"),
        1 => (AggFn::Min, "ws_quantity"),
        2 => (AggFn::Sum, "ws_quantity"),
        3 => (AggFn::Avg, "ws_price"),
        _ => (AggFn::Count, "ws_id"),
    };
    let lo = (rng.random_range(0..11_200) as f64) / 100.0;
    let hi = lo + 16.0;
    let predicate = RangePredicate::new("ws_price", lo, hi);
    let got = engine.aggregate("web_sales", agg, column, Some(&predicate), &snap)?;
    metrics.olap_nanos.push(t0.elapsed().as_nanos() as u64);
    metrics.olap_queries += 1;
    if let Some(oracle) = shared.olap_oracle.as_ref() {
        if !oracle.matches(agg, column, lo, hi, &got) {
            return Err(Error::Integrity(format!(
                "{agg}({column}) over [{lo},{hi}] diverged from the row oracle"
            )));
        }
    }
    Ok(false)
}

/// One hybrid transaction from the template: aggregates in-between
/// balance updates, all in a single transaction.
fn run_hybrid_txn(
    shared: &Shared,
    rng: &mut ChaCha8Rng,
    metrics: &mut ThreadMetrics,
) -> Result<bool> {
    let engine = &shared.engine;
    let config = &shared.config;
    let (olap_steps, oltp_steps) = config.olap_per_oltp;
    let mut steps = Vec::with_capacity((olap_steps + oltp_steps) as usize);
    for _ in 0..olap_steps {
        let lo = (rng.random_range(0..11_200) as f64) / 100.0;
        steps.push(ScriptStep::Olap(Statement::Aggregate {
            table: "web_sales".into(),
            agg: AggFn::Max,
            column: "ws_quantity".into(),
            predicate: Some(RangePredicate::new("ws_price", lo, lo + 16.0)),
        }));
    }
    for _ in 0..oltp_steps {
        steps.push(ScriptStep::Oltp(Statement::Update {
            table: "customer".into(),
            key: rng.random_range(0..config.customer_rows as i64),
            assignments: vec![(
                "c_balance".into(),
                Value::Float((rng.random_range(0..1_000_000) as f64) / 100.0),
            )],
        }));
    }
    let script = HybridScript { steps };
    let outcome = engine.run_hybrid(&script)?;
    for step in &outcome.steps {
        let nanos = step.elapsed.as_nanos() as u64;
        match step.kind {
            crate::txn::StepKind::Olap => {
                metrics.olap_nanos.push(nanos);
                metrics.olap_queries += 1;
            }
            crate::txn::StepKind::Oltp => metrics.oltp_nanos.push(nanos),
        }
    }
    metrics.committed += 1;
    if let Some(sim) = shared.baseline.as_ref() {
        sim.record_commit(engine);
    }
    Ok(true)
}
