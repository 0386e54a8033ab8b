//! Transaction lifecycle and the engine facade.
//!
//! Transactions buffer their writes until commit (deferred apply): each
//! write statement is validated against the transaction's snapshot
//! overlaid with its own earlier writes, logged to the WAL immediately,
//! and recorded in a private overlay for read-your-writes. Nothing is
//! visible to any other snapshot until commit.
//!
//! Commit order: the commit record is made durable first, then effects
//! are applied group by group in ascending group id under each group's
//! exclusive latch, and each touched group's watermark advances to the
//! commit LSN. Readers therefore observe a transaction's effects on a
//! group all at once or not at all. Cross-group read atomicity is out
//! of scope: a reader may briefly observe groups at different
//! watermarks during a multi-group commit.
//!
//! Isolation is snapshot-at-begin with committed-read publication.
//! Write-write conflicts between concurrent transactions on the same
//! key resolve by first-committer-wins: the second committer aborts
//! with `SecondWriterAborted` and its rollback is logged. There are no
//! lock waits, hence no deadlocks.

mod script;

pub use script::{
    parse_script_text, parse_statement_line, HybridOutcome, HybridScript, ScriptStep, StepKind,
    StepResult,
};

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, Weak};

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::nearml::trigger::{ChangeTriggers, TriggerCallback, TriggerHandle};
use crate::query::{self, AggFn, AggResult, Aggregator};
use crate::schema::TableSchema;
use crate::storage::{self, RangePredicate, Snapshot, Table};
use crate::value::{Value, ValueType};
use crate::wal::{self, CompressionStats, Durability, RecoveryReport, Wal};

const WAL_FILE: &str = "wal.htwl";
const CATALOG_FILE: &str = "catalog.htcg";

/// Engine construction options.
#[derive(Debug, Clone, Copy, Default)]
pub struct EngineOptions {
    pub durability: Durability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnState {
    Active,
    Committed,
    RolledBack,
}

/// One logical statement, executable inside a transaction.
#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Insert {
        table: String,
        values: Vec<Value>,
    },
    Update {
        table: String,
        key: i64,
        assignments: Vec<(String, Value)>,
    },
    Delete {
        table: String,
        key: i64,
    },
    PointGet {
        table: String,
        key: i64,
    },
    Aggregate {
        table: String,
        agg: AggFn,
        column: String,
        predicate: Option<RangePredicate>,
    },
}

impl Statement {
    pub fn is_write(&self) -> bool {
        matches!(
            self,
            Statement::Insert { .. } | Statement::Update { .. } | Statement::Delete { .. }
        )
    }

    pub fn table(&self) -> &str {
        match self {
            Statement::Insert { table, .. }
            | Statement::Update { table, .. }
            | Statement::Delete { table, .. }
            | Statement::PointGet { table, .. }
            | Statement::Aggregate { table, .. } => table,
        }
    }
}

/// Result of one executed statement.
#[derive(Debug, Clone, PartialEq)]
pub enum StmtResult {
    None,
    Row(Option<Vec<Value>>),
    Agg(AggResult),
}

/// A buffered write, replayed against storage at commit.
#[derive(Debug, Clone)]
enum WriteOp {
    Insert {
        table: String,
        group: u32,
        key: i64,
        row: Vec<Value>,
    },
    Update {
        table: String,
        group: u32,
        key: i64,
        assignments: Vec<(String, Value)>,
    },
    Delete {
        table: String,
        group: u32,
        key: i64,
    },
}

/// Net effect of a transaction's own writes on one key, for
/// read-your-writes.
#[derive(Debug, Clone)]
enum RowPatch {
    Insert(Vec<Value>),
    Update(Vec<(String, Value)>),
    Delete,
}

/// An open transaction. Not shared across threads while active; the
/// engine handle it came from must outlive it. Dropping an active
/// transaction rolls it back.
pub struct Txn {
    id: u64,
    state: TxnState,
    snapshot: Snapshot,
    begin_lsn: u64,
    write_ops: Vec<WriteOp>,
    overlay: HashMap<String, BTreeMap<i64, RowPatch>>,
    write_keys: HashSet<(String, i64)>,
    table_write_counts: HashMap<String, u64>,
    engine: Weak<EngineInner>,
}

impl Txn {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn state(&self) -> TxnState {
        self.state
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    fn check_active(&self) -> Result<()> {
        if self.state == TxnState::Active {
            Ok(())
        } else {
            Err(Error::TxnNotActive(self.id))
        }
    }

    fn patch_for(&self, table: &str, key: i64) -> Option<&RowPatch> {
        self.overlay.get(table).and_then(|t| t.get(&key))
    }

    fn record_write(&mut self, table: &str, key: i64) {
        self.write_keys.insert((table.to_string(), key));
        *self.table_write_counts.entry(table.to_string()).or_insert(0) += 1;
    }
}

impl Drop for Txn {
    fn drop(&mut self) {
        if self.state == TxnState::Active {
            if let Some(inner) = self.engine.upgrade() {
                let _ = inner.finish_txn_rollback(self.id);
                self.state = TxnState::RolledBack;
            }
        }
    }
}

/// First-committer-wins bookkeeping, guarded by the commit lock.
#[derive(Default)]
struct CommitLedger {
    /// Write-key sets of committed transactions, kept while any live
    /// transaction began before them.
    committed: Vec<(u64, HashSet<(String, i64)>)>,
    /// txn id → begin LSN of transactions still active.
    active: BTreeMap<u64, u64>,
}

impl CommitLedger {
    fn prune(&mut self) {
        let floor = self.active.values().copied().min().unwrap_or(u64::MAX);
        self.committed.retain(|(lsn, _)| *lsn > floor);
    }
}

struct EngineInner {
    dir: PathBuf,
    catalog: Catalog,
    wal: Wal,
    next_txn_id: AtomicU64,
    commit_lock: Mutex<CommitLedger>,
    ddl_lock: Mutex<()>,
    triggers: ChangeTriggers,
}

impl EngineInner {
    fn catalog_path(&self) -> PathBuf {
        self.dir.join(CATALOG_FILE)
    }

    /// Rollback path shared by explicit rollback, conflict aborts, and
    /// drop of an active transaction.
    fn finish_txn_rollback(&self, txn_id: u64) -> Result<u64> {
        let lsn = self.wal.rollback(txn_id)?;
        let mut ledger = self.commit_lock.lock().unwrap();
        ledger.active.remove(&txn_id);
        ledger.prune();
        Ok(lsn)
    }
}

impl Drop for EngineInner {
    fn drop(&mut self) {
        self.triggers.shutdown();
    }
}

/// The engine: one directory holding the catalog manifest and the
/// write-ahead log, and the in-memory mixed-format tables. Cloneable
/// handle, safe to share across threads.
#[derive(Clone)]
pub struct Engine {
    inner: Arc<EngineInner>,
}

impl Engine {
    /// Initializes a fresh engine directory. Fails if one is already
    /// present.
    pub fn create(dir: impl AsRef<Path>) -> Result<Engine> {
        Engine::create_with(dir, EngineOptions::default())
    }

    pub fn create_with(dir: impl AsRef<Path>, options: EngineOptions) -> Result<Engine> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let wal_path = dir.join(WAL_FILE);
        if wal_path.exists() {
            return Err(Error::InvalidConfig(format!(
                "{} already holds an engine",
                dir.display()
            )));
        }
        let wal = Wal::create(&wal_path, options.durability)?;
        let catalog = Catalog::new();
        catalog.save(&dir.join(CATALOG_FILE))?;
        Ok(Engine {
            inner: Arc::new(EngineInner {
                dir,
                catalog,
                wal,
                next_txn_id: AtomicU64::new(1),
                commit_lock: Mutex::new(CommitLedger::default()),
                ddl_lock: Mutex::new(()),
                triggers: ChangeTriggers::new(),
            }),
        })
    }

    /// Opens an existing engine directory, replaying the log: exactly
    /// the transactions whose commit record survives are redone.
    pub fn open(dir: impl AsRef<Path>) -> Result<Engine> {
        Engine::open_with(dir, EngineOptions::default())
    }

    pub fn open_with(dir: impl AsRef<Path>, options: EngineOptions) -> Result<Engine> {
        let (engine, _) = Engine::open_reporting(dir, options)?;
        Ok(engine)
    }

    /// As `open_with`, also returning the recovery report.
    pub fn open_reporting(
        dir: impl AsRef<Path>,
        options: EngineOptions,
    ) -> Result<(Engine, RecoveryReport)> {
        let dir = dir.as_ref().to_path_buf();
        let catalog = Catalog::load(&dir.join(CATALOG_FILE))?;
        let (wal, scan) = Wal::open(dir.join(WAL_FILE), options.durability)?;
        let report = wal::replay(&scan, &catalog)?;
        let max_txn = scan.records.iter().map(|r| r.txn_id).max().unwrap_or(0);
        let engine = Engine {
            inner: Arc::new(EngineInner {
                dir,
                catalog,
                wal,
                next_txn_id: AtomicU64::new(max_txn + 1),
                commit_lock: Mutex::new(CommitLedger::default()),
                ddl_lock: Mutex::new(()),
                triggers: ChangeTriggers::new(),
            }),
        };
        Ok((engine, report))
    }

    pub fn dir(&self) -> &Path {
        &self.inner.dir
    }

    pub fn wal_path(&self) -> PathBuf {
        self.inner.dir.join(WAL_FILE)
    }

    pub fn catalog_path(&self) -> PathBuf {
        self.inner.catalog_path()
    }

    pub fn last_lsn(&self) -> u64 {
        self.inner.wal.last_lsn()
    }

    /// Creates a table and persists the catalog manifest.
    pub fn create_table(&self, schema: TableSchema, num_groups: u32) -> Result<Arc<Table>> {
        let _ddl = self.inner.ddl_lock.lock().unwrap();
        let table = self.inner.catalog.create_table(schema, num_groups)?;
        self.inner.catalog.save(&self.inner.catalog_path())?;
        Ok(table)
    }

    pub fn table(&self, name: &str) -> Result<Arc<Table>> {
        self.inner.catalog.get(name)
    }

    pub fn tables(&self) -> Vec<Arc<Table>> {
        self.inner.catalog.tables()
    }

    pub fn catalog(&self) -> &Catalog {
        &self.inner.catalog
    }

    /// Captures a read snapshot of the current committed state, without
    /// latching.
    pub fn snapshot(&self) -> Snapshot {
        self.inner.catalog.snapshot()
    }

    /// Starts a transaction: fresh id, snapshot captured at begin.
    pub fn begin(&self) -> Txn {
        let id = self.inner.next_txn_id.fetch_add(1, Ordering::SeqCst);
        // The ledger lock orders begin against concurrent commits, so a
        // snapshot taken here agrees with the begin LSN used for
        // conflict detection.
        let mut ledger = self.inner.commit_lock.lock().unwrap();
        let begin_lsn = self.inner.wal.last_lsn();
        ledger.active.insert(id, begin_lsn);
        let snapshot = self.inner.catalog.snapshot();
        drop(ledger);
        Txn {
            id,
            state: TxnState::Active,
            snapshot,
            begin_lsn,
            write_ops: Vec::new(),
            overlay: HashMap::new(),
            write_keys: HashSet::new(),
            table_write_counts: HashMap::new(),
            engine: Arc::downgrade(&self.inner),
        }
    }

    /// Executes one statement inside `txn`. Writes are logged and
    /// buffered; reads see the snapshot overlaid with the transaction's
    /// own writes.
    pub fn exec_stmt(&self, txn: &mut Txn, stmt: Statement) -> Result<StmtResult> {
        txn.check_active()?;
        match stmt {
            Statement::Insert { table, values } => {
                let handle = self.table(&table)?;
                let row = coerce_row(handle.schema(), values)?;
                handle.schema().check_row(&row)?;
                let key = handle.schema().row_key(&row)?;
                if self.effective_row(txn, &handle, key)?.is_some() {
                    return Err(Error::DuplicateKey(key));
                }
                let group = handle.partition_for_key(key);
                let (row_values, col_values) = split_row(handle.schema(), &row);
                self.inner
                    .wal
                    .log_insert(txn.id, &table, group, key, row_values, col_values)?;
                txn.write_ops.push(WriteOp::Insert {
                    table: table.clone(),
                    group,
                    key,
                    row: row.clone(),
                });
                txn.overlay
                    .entry(table.clone())
                    .or_default()
                    .insert(key, RowPatch::Insert(row));
                txn.record_write(&table, key);
                Ok(StmtResult::None)
            }
            Statement::Update {
                table,
                key,
                assignments,
            } => {
                let handle = self.table(&table)?;
                let assignments = coerce_assignments(handle.schema(), assignments)?;
                // Validates updatability and types without applying.
                handle.resolve_assignments(&assignments)?;
                let Some(_) = self.effective_row(txn, &handle, key)? else {
                    return Err(Error::KeyNotFound(key));
                };
                let group = handle.partition_for_key(key);
                self.inner
                    .wal
                    .log_update(txn.id, &table, group, key, assignments.clone())?;
                txn.write_ops.push(WriteOp::Update {
                    table: table.clone(),
                    group,
                    key,
                    assignments: assignments.clone(),
                });
                let patches = txn.overlay.entry(table.clone()).or_default();
                match patches.get_mut(&key) {
                    Some(RowPatch::Insert(row)) => {
                        apply_assignments(handle.schema(), row, &assignments);
                    }
                    Some(RowPatch::Update(existing)) => existing.extend(assignments),
                    Some(RowPatch::Delete) => unreachable!("checked visible above"),
                    None => {
                        patches.insert(key, RowPatch::Update(assignments));
                    }
                }
                txn.record_write(&table, key);
                Ok(StmtResult::None)
            }
            Statement::Delete { table, key } => {
                let handle = self.table(&table)?;
                if self.effective_row(txn, &handle, key)?.is_none() {
                    return Err(Error::KeyNotFound(key));
                }
                let group = handle.partition_for_key(key);
                self.inner.wal.log_delete(txn.id, &table, group, key)?;
                txn.write_ops.push(WriteOp::Delete {
                    table: table.clone(),
                    group,
                    key,
                });
                txn.overlay
                    .entry(table.clone())
                    .or_default()
                    .insert(key, RowPatch::Delete);
                txn.record_write(&table, key);
                Ok(StmtResult::None)
            }
            Statement::PointGet { table, key } => {
                let handle = self.table(&table)?;
                Ok(StmtResult::Row(self.effective_row(txn, &handle, key)?))
            }
            Statement::Aggregate {
                table,
                agg,
                column,
                predicate,
            } => {
                let handle = self.table(&table)?;
                let predicate = predicate
                    .map(|p| coerce_predicate(handle.schema(), p))
                    .transpose()?;
                let result =
                    self.aggregate_in_txn(txn, &handle, agg, &column, predicate.as_ref())?;
                Ok(StmtResult::Agg(result))
            }
        }
    }

    /// The row for `key` as this transaction sees it: its own writes
    /// overlaid on its snapshot.
    fn effective_row(
        &self,
        txn: &Txn,
        table: &Table,
        key: i64,
    ) -> Result<Option<Vec<Value>>> {
        let name = table.schema().table_name();
        match txn.patch_for(name, key) {
            Some(RowPatch::Insert(row)) => Ok(Some(row.clone())),
            Some(RowPatch::Delete) => Ok(None),
            Some(RowPatch::Update(assignments)) => {
                let base = table.point_get(key, &txn.snapshot);
                Ok(base.map(|mut row| {
                    apply_assignments(table.schema(), &mut row, assignments);
                    row
                }))
            }
            None => Ok(table.point_get(key, &txn.snapshot)),
        }
    }

    /// Aggregate inside a transaction: snapshot state with the
    /// transaction's own writes folded in (read-your-writes).
    fn aggregate_in_txn(
        &self,
        txn: &Txn,
        table: &Table,
        agg: AggFn,
        column: &str,
        predicate: Option<&RangePredicate>,
    ) -> Result<AggResult> {
        let name = table.schema().table_name();
        let overlay_empty = txn.overlay.get(name).is_none_or(|t| t.is_empty());
        if overlay_empty {
            return query::aggregate(table, agg, column, predicate, &txn.snapshot);
        }
        // Validate and route exactly as the plain path would.
        query::plan(table, agg, column, predicate)?;
        let schema = table.schema();
        let target_idx = schema
            .column_index(column)
            .ok_or_else(|| Error::UnknownColumn(column.to_string()))?;
        let pred_idx = predicate
            .map(|p| {
                schema
                    .column_index(&p.column)
                    .ok_or_else(|| Error::UnknownColumn(p.column.clone()))
            })
            .transpose()?;
        let ty = schema.columns()[target_idx].value_type;
        let mut acc = Aggregator::new(agg, ty)?;
        let overlay = txn.overlay.get(name).expect("checked non-empty");

        let mut feed = |row: &[Value]| -> Result<()> {
            if let (Some(idx), Some(p)) = (pred_idx, predicate) {
                if !p.matches_value(&row[idx]) {
                    return Ok(());
                }
            }
            acc.push(&row[target_idx])
        };
        for key in table.visible_keys(&txn.snapshot) {
            if overlay.contains_key(&key) {
                continue;
            }
            let row = table
                .point_get(key, &txn.snapshot)
                .expect("key listed as visible");
            feed(&row)?;
        }
        for key in overlay.keys() {
            if let Some(row) = self.effective_row(txn, table, *key)? {
                feed(&row)?;
            }
        }
        Ok(acc.finish())
    }

    /// Read-only aggregate against a snapshot, outside any transaction.
    pub fn aggregate(
        &self,
        table: &str,
        agg: AggFn,
        column: &str,
        predicate: Option<&RangePredicate>,
        snap: &Snapshot,
    ) -> Result<AggResult> {
        let handle = self.table(table)?;
        let predicate = predicate
            .cloned()
            .map(|p| coerce_predicate(handle.schema(), p))
            .transpose()?;
        query::aggregate(&handle, agg, column, predicate.as_ref(), snap)
    }

    /// Read-only point lookup against a snapshot.
    pub fn point_get(&self, table: &str, key: i64, snap: &Snapshot) -> Result<Option<Vec<Value>>> {
        Ok(self.table(table)?.point_get(key, snap))
    }

    /// Commits `txn`: conflict check, durable commit record, effects
    /// applied per group in ascending order, watermarks advanced,
    /// triggers notified. Returns the commit LSN.
    pub fn commit(&self, txn: &mut Txn) -> Result<u64> {
        txn.check_active()?;
        let mut ledger = self.inner.commit_lock.lock().unwrap();

        // First committer wins: abort if any transaction that committed
        // after this one began wrote an overlapping key.
        if !txn.write_keys.is_empty() {
            for (commit_lsn, keys) in &ledger.committed {
                if *commit_lsn > txn.begin_lsn {
                    if let Some((table, key)) =
                        txn.write_keys.iter().find(|k| keys.contains(*k))
                    {
                        let table = table.clone();
                        let key = *key;
                        drop(ledger);
                        txn.state = TxnState::RolledBack;
                        self.inner.finish_txn_rollback(txn.id)?;
                        return Err(Error::SecondWriterAborted {
                            txn_id: txn.id,
                            table,
                            key,
                        });
                    }
                }
            }
        }

        let commit_lsn = self.inner.wal.commit(txn.id)?;

        // Redo point reached: the commit record is durable. Apply
        // effects group by group; a failure here is an engine bug and
        // the state is redo-recoverable, so abort loudly.
        let mut by_group: BTreeMap<(String, u32), Vec<&WriteOp>> = BTreeMap::new();
        for op in &txn.write_ops {
            let (table, group) = match op {
                WriteOp::Insert { table, group, .. }
                | WriteOp::Update { table, group, .. }
                | WriteOp::Delete { table, group, .. } => (table.clone(), *group),
            };
            by_group.entry((table, group)).or_default().push(op);
        }
        for ((table, group), ops) in &by_group {
            let handle = self.table(table).expect("written table exists");
            for op in ops {
                let applied = match op {
                    WriteOp::Insert { key, row, .. } => {
                        handle.apply_insert(*key, row, commit_lsn).map(|_| ())
                    }
                    WriteOp::Update {
                        key, assignments, ..
                    } => handle.apply_update(*key, assignments),
                    WriteOp::Delete { key, .. } => handle.apply_delete(*key),
                };
                if let Err(e) = applied {
                    panic!("commit apply failed after durable commit record: {e}");
                }
            }
            handle.group(*group).publish_watermark(commit_lsn);
        }

        txn.state = TxnState::Committed;
        ledger.active.remove(&txn.id);
        if !txn.write_keys.is_empty() {
            ledger
                .committed
                .push((commit_lsn, std::mem::take(&mut txn.write_keys)));
        }
        ledger.prune();

        // Trigger accounting happens inside the commit section so the
        // snapshot a firing carries already includes this commit.
        if !txn.table_write_counts.is_empty() {
            let snap = self.inner.catalog.snapshot();
            for (table, writes) in &txn.table_write_counts {
                self.inner.triggers.notify_commit(table, *writes, &snap);
            }
        }
        drop(ledger);
        Ok(commit_lsn)
    }

    /// Rolls back `txn`; its logged writes will never be applied.
    pub fn rollback(&self, txn: &mut Txn) -> Result<()> {
        txn.check_active()?;
        txn.state = TxnState::RolledBack;
        self.inner.finish_txn_rollback(txn.id)?;
        Ok(())
    }

    /// Runs a hybrid script inside a single transaction; see
    /// [`HybridScript`].
    pub fn run_hybrid(&self, script: &HybridScript) -> Result<HybridOutcome> {
        script::run_hybrid(self, script)
    }

    /// Registers a change trigger on `table` firing once per
    /// `threshold` committed writes.
    pub fn register_trigger(
        &self,
        table: &str,
        threshold: u64,
        callback: TriggerCallback,
    ) -> Result<TriggerHandle> {
        if threshold == 0 {
            return Err(Error::InvalidThreshold(threshold));
        }
        if !self.inner.catalog.contains(table) {
            return Err(Error::UnknownTable(table.to_string()));
        }
        Ok(self
            .inner
            .triggers
            .register(table.to_string(), threshold, callback))
    }

    /// Waits until every enqueued trigger firing has run.
    pub fn quiesce_triggers(&self) {
        self.inner.triggers.quiesce();
    }

    /// Compresses the log in place. Requires quiescence: no active
    /// transactions.
    pub fn compress_wal(&self) -> Result<CompressionStats> {
        let ledger = self.inner.commit_lock.lock().unwrap();
        let active = ledger.active.len();
        if active > 0 {
            return Err(Error::ActiveTxns(active));
        }
        let stats = self.inner.wal.compress()?;
        drop(ledger);
        Ok(stats)
    }

    /// Writes a checkpoint of the current committed state. A given
    /// state always serializes to identical bytes.
    pub fn checkpoint_to(&self, path: &Path) -> Result<()> {
        let tables = self.inner.catalog.tables();
        storage::write_checkpoint(path, tables.iter().map(|t| t.as_ref()))
    }
}

/// Splits a full row into its update-partition and read-only-partition
/// values, each in schema order.
fn split_row(schema: &TableSchema, row: &[Value]) -> (Vec<Value>, Vec<Value>) {
    let row_values = schema.update_columns().map(|(i, _)| row[i].clone()).collect();
    let col_values = schema
        .readonly_columns()
        .map(|(i, _)| row[i].clone())
        .collect();
    (row_values, col_values)
}

fn apply_assignments(schema: &TableSchema, row: &mut [Value], assignments: &[(String, Value)]) {
    for (name, value) in assignments {
        if let Some(idx) = schema.column_index(name) {
            row[idx] = value.clone();
        }
    }
}

/// Integer literals widen to float64 where the column requires it; all
/// other mismatches are reported by the downstream type checks.
fn coerce(value: Value, ty: ValueType) -> Value {
    match (value, ty) {
        (Value::Int(v), ValueType::Float64) => Value::Float(v as f64),
        (v, _) => v,
    }
}

fn coerce_row(schema: &TableSchema, values: Vec<Value>) -> Result<Vec<Value>> {
    if values.len() != schema.columns().len() {
        return Err(Error::TypeMismatch(format!(
            "row has {} values, table {} declares {} columns",
            values.len(),
            schema.table_name(),
            schema.columns().len()
        )));
    }
    Ok(values
        .into_iter()
        .zip(schema.columns())
        .map(|(v, c)| coerce(v, c.value_type))
        .collect())
}

fn coerce_assignments(
    schema: &TableSchema,
    assignments: Vec<(String, Value)>,
) -> Result<Vec<(String, Value)>> {
    assignments
        .into_iter()
        .map(|(name, value)| {
            let col = schema
                .column(&name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            Ok((name, coerce(value, col.value_type)))
        })
        .collect()
}

fn coerce_predicate(schema: &TableSchema, p: RangePredicate) -> Result<RangePredicate> {
    let col = schema
        .column(&p.column)
        .ok_or_else(|| Error::UnknownColumn(p.column.clone()))?;
    Ok(RangePredicate {
        column: p.column,
        lo: coerce(p.lo, col.value_type),
        hi: coerce(p.hi, col.value_type),
    })
}
