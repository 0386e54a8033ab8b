//! Split write-ahead logging and redo recovery.
//!
//! The log records transaction behavior sequentially: update records
//! for the row-format update partition, insert and delete records split
//! into a row-part and a column-part item, and terminal commit/rollback
//! records. A transaction's logical insert or delete is complete only
//! when both parts are logged; `commit` refuses to seal a transaction
//! whose split is incomplete.
//!
//! The engine is redo-only: storage is mutated strictly after the
//! commit record is durable, so recovery replays exactly the
//! transactions whose commit record survives in the valid log prefix
//! and never needs undo. The scanner validates CRCs forward and stops
//! at the first torn or invalid record, which makes truncation at any
//! byte offset recover the longest committed prefix.
//!
//! Log compression drops the column-part records of rolled-back
//! transactions (their row log entries end in a rollback), easing
//! replay pressure on the column side; recovery over a compressed log
//! reaches a state identical to recovery over the original.

mod record;

pub use record::{LogRecord, Payload, RecordDraft, RecordKind, LOG_HEADER_LEN, LOG_MAGIC, LOG_VERSION};

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::catalog::Catalog;
use crate::error::{Error, Result};
use crate::value::Value;

use record::{decode_body, encode_record, MAX_RECORD_LEN};

/// Commit durability policy. `Fsync` forces commit and rollback records
/// to stable storage before they are acknowledged; `Buffered` leaves
/// them in the OS page cache (used by tests and benchmarks that do not
/// exercise durability).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    #[default]
    Fsync,
    Buffered,
}

/// Operation kind of a split pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SplitOp {
    Insert,
    Delete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxnOutcome {
    Active,
    Committed,
    RolledBack,
}

/// Per-transaction log bookkeeping: which split halves have been logged
/// and the transaction's terminal outcome.
#[derive(Debug, Clone)]
pub struct TxnLogState {
    row_parts_pending: BTreeSet<(String, i64, SplitOp)>,
    col_parts_pending: BTreeSet<(String, i64, SplitOp)>,
    outcome: TxnOutcome,
}

impl TxnLogState {
    fn new() -> Self {
        TxnLogState {
            row_parts_pending: BTreeSet::new(),
            col_parts_pending: BTreeSet::new(),
            outcome: TxnOutcome::Active,
        }
    }

    pub fn outcome(&self) -> TxnOutcome {
        self.outcome
    }
}

struct WalInner {
    file: File,
    next_lsn: u64,
    txns: HashMap<u64, TxnLogState>,
}

/// Append-only log writer. Appends are serialized through the inner
/// lock, giving a total LSN order.
pub struct Wal {
    path: PathBuf,
    durability: Durability,
    inner: Mutex<WalInner>,
}

impl Wal {
    /// Creates a fresh, empty log (header only).
    pub fn create(path: impl Into<PathBuf>, durability: Durability) -> Result<Wal> {
        let path = path.into();
        let mut file = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&path)?;
        file.write_all(LOG_MAGIC)?;
        file.write_all(&LOG_VERSION.to_le_bytes())?;
        file.sync_all()?;
        Ok(Wal {
            path,
            durability,
            inner: Mutex::new(WalInner {
                file,
                next_lsn: 1,
                txns: HashMap::new(),
            }),
        })
    }

    /// Opens an existing log: scans it, truncates any torn tail, and
    /// positions the writer after the last valid record. Transactions
    /// that were still open at the crash are marked rolled back (their
    /// effects were never applied and never will be).
    pub fn open(path: impl Into<PathBuf>, durability: Durability) -> Result<(Wal, LogScan)> {
        let path = path.into();
        let scan = scan_log(&path)?;
        let mut file = OpenOptions::new().read(true).write(true).open(&path)?;
        file.set_len(scan.valid_len)?;
        file.seek(SeekFrom::End(0))?;
        let mut txns = HashMap::new();
        for rec in &scan.records {
            let state = txns.entry(rec.txn_id).or_insert_with(TxnLogState::new);
            apply_record_to_state(state, rec);
        }
        for state in txns.values_mut() {
            if state.outcome == TxnOutcome::Active {
                state.outcome = TxnOutcome::RolledBack;
            }
        }
        let next_lsn = scan.max_lsn + 1;
        Ok((
            Wal {
                path,
                durability,
                inner: Mutex::new(WalInner {
                    file,
                    next_lsn,
                    txns,
                }),
            },
            scan,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// LSN of the most recently appended record (0 if none).
    pub fn last_lsn(&self) -> u64 {
        self.inner.lock().unwrap().next_lsn - 1
    }

    pub fn txn_outcome(&self, txn_id: u64) -> Option<TxnOutcome> {
        self.inner
            .lock()
            .unwrap()
            .txns
            .get(&txn_id)
            .map(|s| s.outcome)
    }

    /// Appends one record: assigns the next LSN, computes the CRC, and
    /// writes the frame before returning. Commit and rollback records
    /// are additionally fsynced under the `Fsync` policy.
    pub fn append(&self, draft: RecordDraft) -> Result<u64> {
        let mut inner = self.inner.lock().unwrap();
        append_locked(&mut inner, self.durability, draft)
    }

    /// Logs one insert as its split pair, row part first. Storage is
    /// not touched here; effects apply at commit.
    pub fn log_insert(
        &self,
        txn_id: u64,
        table: &str,
        group_id: u32,
        key: i64,
        row_values: Vec<Value>,
        col_values: Vec<Value>,
    ) -> Result<(u64, u64)> {
        let mut inner = self.inner.lock().unwrap();
        let lsn_row = append_locked(
            &mut inner,
            self.durability,
            RecordDraft {
                txn_id,
                kind: RecordKind::InsertRowPart,
                table: table.to_string(),
                group_id,
                key: Some(key),
                payload: Payload::Values(row_values),
            },
        )?;
        let lsn_col = append_locked(
            &mut inner,
            self.durability,
            RecordDraft {
                txn_id,
                kind: RecordKind::InsertColPart,
                table: table.to_string(),
                group_id,
                key: Some(key),
                payload: Payload::Values(col_values),
            },
        )?;
        Ok((lsn_row, lsn_col))
    }

    /// Logs one update as a single row-partition record.
    pub fn log_update(
        &self,
        txn_id: u64,
        table: &str,
        group_id: u32,
        key: i64,
        assignments: Vec<(String, Value)>,
    ) -> Result<u64> {
        self.append(RecordDraft {
            txn_id,
            kind: RecordKind::UpdateRow,
            table: table.to_string(),
            group_id,
            key: Some(key),
            payload: Payload::Assignments(assignments),
        })
    }

    /// Logs one delete as its split pair, row part first.
    pub fn log_delete(
        &self,
        txn_id: u64,
        table: &str,
        group_id: u32,
        key: i64,
    ) -> Result<(u64, u64)> {
        let mut inner = self.inner.lock().unwrap();
        let lsn_row = append_locked(
            &mut inner,
            self.durability,
            RecordDraft {
                txn_id,
                kind: RecordKind::DeleteRowPart,
                table: table.to_string(),
                group_id,
                key: Some(key),
                payload: Payload::None,
            },
        )?;
        let lsn_col = append_locked(
            &mut inner,
            self.durability,
            RecordDraft {
                txn_id,
                kind: RecordKind::DeleteColPart,
                table: table.to_string(),
                group_id,
                key: Some(key),
                payload: Payload::None,
            },
        )?;
        Ok((lsn_row, lsn_col))
    }

    /// Seals a transaction. Every pending row part must have its column
    /// counterpart logged; a missing half is an engine bug surfaced as
    /// `SplitIncomplete`. The commit record is durable when this
    /// returns.
    pub fn commit(&self, txn_id: u64) -> Result<u64> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(state) = inner.txns.get(&txn_id) {
            if state.outcome != TxnOutcome::Active {
                return Err(Error::TxnNotActive(txn_id));
            }
            for part in &state.row_parts_pending {
                if !state.col_parts_pending.contains(part) {
                    return Err(Error::SplitIncomplete {
                        txn_id,
                        detail: format!(
                            "{:?} of {}#{} has no column log item",
                            part.2, part.0, part.1
                        ),
                    });
                }
            }
        }
        append_locked(
            &mut inner,
            self.durability,
            RecordDraft::terminal(txn_id, RecordKind::TxnCommit),
        )
    }

    /// Appends the rollback record. No storage mutation ever happens
    /// for this transaction.
    pub fn rollback(&self, txn_id: u64) -> Result<u64> {
        self.append(RecordDraft::terminal(txn_id, RecordKind::TxnRollback))
    }

    /// Rewrites the log in place, dropping column-part records of
    /// rolled-back transactions. The caller must have quiesced the
    /// engine; LSNs of surviving records are preserved.
    pub fn compress(&self) -> Result<CompressionStats> {
        let mut inner = self.inner.lock().unwrap();
        inner.file.sync_all()?;
        let stats = compress_log_file(&self.path)?;
        // The rename replaced the inode under our handle; reopen.
        let mut file = OpenOptions::new().read(true).write(true).open(&self.path)?;
        file.seek(SeekFrom::End(0))?;
        inner.file = file;
        Ok(stats)
    }
}

fn apply_record_to_state(state: &mut TxnLogState, rec: &LogRecord) {
    match rec.kind {
        RecordKind::InsertRowPart => {
            state
                .row_parts_pending
                .insert((rec.table.clone(), rec.key.unwrap_or(0), SplitOp::Insert));
        }
        RecordKind::InsertColPart => {
            state
                .col_parts_pending
                .insert((rec.table.clone(), rec.key.unwrap_or(0), SplitOp::Insert));
        }
        RecordKind::DeleteRowPart => {
            state
                .row_parts_pending
                .insert((rec.table.clone(), rec.key.unwrap_or(0), SplitOp::Delete));
        }
        RecordKind::DeleteColPart => {
            state
                .col_parts_pending
                .insert((rec.table.clone(), rec.key.unwrap_or(0), SplitOp::Delete));
        }
        RecordKind::UpdateRow => {}
        RecordKind::TxnCommit => state.outcome = TxnOutcome::Committed,
        RecordKind::TxnRollback => state.outcome = TxnOutcome::RolledBack,
    }
}

fn append_locked(inner: &mut WalInner, durability: Durability, draft: RecordDraft) -> Result<u64> {
    let state = inner
        .txns
        .entry(draft.txn_id)
        .or_insert_with(TxnLogState::new);
    if state.outcome != TxnOutcome::Active {
        return Err(Error::TxnNotActive(draft.txn_id));
    }
    let lsn = inner.next_lsn;
    let bytes = encode_record(lsn, &draft);
    inner.file.write_all(&bytes)?;
    if draft.kind.is_terminal() && durability == Durability::Fsync {
        inner.file.sync_data()?;
    }
    let state = inner.txns.get_mut(&draft.txn_id).expect("inserted above");
    let rec = LogRecord {
        lsn,
        txn_id: draft.txn_id,
        kind: draft.kind,
        table: draft.table,
        group_id: draft.group_id,
        key: draft.key,
        payload: draft.payload,
    };
    apply_record_to_state(state, &rec);
    inner.next_lsn = lsn + 1;
    Ok(lsn)
}

/// Result of a forward scan: the valid record prefix and where it ends.
#[derive(Debug)]
pub struct LogScan {
    pub records: Vec<LogRecord>,
    /// Byte length of the valid prefix (header included).
    pub valid_len: u64,
    /// LSN of the last valid record, 0 if none.
    pub max_lsn: u64,
}

/// Scans a log file forward, validating structure, CRC, and LSN
/// monotonicity, and stops at the first torn or invalid record.
pub fn scan_log(path: &Path) -> Result<LogScan> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < LOG_HEADER_LEN as usize || &bytes[0..4] != LOG_MAGIC {
        return Err(Error::CorruptLogHeader("bad magic".into()));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != LOG_VERSION {
        return Err(Error::CorruptLogHeader(format!(
            "unsupported version {version}"
        )));
    }

    let mut records = Vec::new();
    let mut pos = LOG_HEADER_LEN as usize;
    let mut max_lsn = 0u64;
    while let Some(len_bytes) = bytes.get(pos..pos + 4) {
        let len = u32::from_le_bytes(len_bytes.try_into().unwrap());
        if len > MAX_RECORD_LEN {
            break;
        }
        let body_start = pos + 4;
        let crc_start = body_start + len as usize;
        let Some(body) = bytes.get(body_start..crc_start) else {
            break;
        };
        let Some(crc_bytes) = bytes.get(crc_start..crc_start + 4) else {
            break;
        };
        let crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        if crc32fast::hash(body) != crc {
            break;
        }
        let Ok(rec) = decode_body(body) else {
            break;
        };
        if rec.lsn <= max_lsn {
            break;
        }
        max_lsn = rec.lsn;
        records.push(rec);
        pos = crc_start + 4;
    }

    Ok(LogScan {
        records,
        valid_len: pos as u64,
        max_lsn,
    })
}

/// One logical operation of a committed transaction, recovered from its
/// log records.
#[derive(Debug, Clone, PartialEq)]
pub enum LogicalOp {
    Insert {
        table: String,
        key: i64,
        row_values: Vec<Value>,
        col_values: Vec<Value>,
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
}

/// Folds the records of one transaction into logical operations,
/// enforcing split coupling: an insert or delete contributes only if
/// both its row part and its column part are present. Operations are
/// ordered by the LSN of their primary (row-side) record.
pub fn logical_ops(records: &[&LogRecord]) -> Vec<LogicalOp> {
    let mut col_values: HashMap<(String, i64), Vec<Value>> = HashMap::new();
    let mut col_deletes: HashSet<(String, i64)> = HashSet::new();
    for rec in records {
        match rec.kind {
            RecordKind::InsertColPart => {
                if let Payload::Values(values) = &rec.payload {
                    col_values.insert((rec.table.clone(), rec.key.unwrap_or(0)), values.clone());
                }
            }
            RecordKind::DeleteColPart => {
                col_deletes.insert((rec.table.clone(), rec.key.unwrap_or(0)));
            }
            _ => {}
        }
    }
    let mut ops = Vec::new();
    for rec in records {
        let key = rec.key.unwrap_or(0);
        match rec.kind {
            RecordKind::UpdateRow => {
                if let Payload::Assignments(assignments) = &rec.payload {
                    ops.push(LogicalOp::Update {
                        table: rec.table.clone(),
                        key,
                        assignments: assignments.clone(),
                    });
                }
            }
            RecordKind::InsertRowPart => {
                let Payload::Values(row_values) = &rec.payload else {
                    continue;
                };
                if let Some(cols) = col_values.get(&(rec.table.clone(), key)) {
                    ops.push(LogicalOp::Insert {
                        table: rec.table.clone(),
                        key,
                        row_values: row_values.clone(),
                        col_values: cols.clone(),
                    });
                }
            }
            RecordKind::DeleteRowPart
                if col_deletes.contains(&(rec.table.clone(), key)) => {
                    ops.push(LogicalOp::Delete {
                        table: rec.table.clone(),
                        key,
                    });
                }
            _ => {}
        }
    }
    ops
}

impl LogRecord {
    fn to_draft(&self) -> RecordDraft {
        RecordDraft {
            txn_id: self.txn_id,
            kind: self.kind,
            table: self.table.clone(),
            group_id: self.group_id,
            key: self.key,
            payload: self.payload.clone(),
        }
    }
}

/// On-disk frame length of a record (length prefix and CRC included).
pub fn record_frame_len(rec: &LogRecord) -> u64 {
    encode_record(rec.lsn, &rec.to_draft()).len() as u64
}

/// Outcome of a recovery replay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecoveryReport {
    /// LSN of the last valid record in the log.
    pub max_lsn: u64,
    pub records_scanned: usize,
    pub committed_txns: usize,
}

/// Replays a scanned log into empty tables: exactly the transactions
/// whose commit record lies in the valid prefix take effect, in commit
/// order, and each touched group's watermark is set to the commit LSN
/// of the newest transaction applied to it.
pub fn replay(scan: &LogScan, catalog: &Catalog) -> Result<RecoveryReport> {
    let mut commits: BTreeMap<u64, u64> = BTreeMap::new(); // commit lsn → txn
    for rec in &scan.records {
        if rec.kind == RecordKind::TxnCommit {
            commits.insert(rec.lsn, rec.txn_id);
        }
    }
    let mut by_txn: HashMap<u64, Vec<&LogRecord>> = HashMap::new();
    for rec in &scan.records {
        by_txn.entry(rec.txn_id).or_default().push(rec);
    }

    for (&commit_lsn, &txn_id) in &commits {
        let records = by_txn.remove(&txn_id).unwrap_or_default();
        let mut touched: BTreeSet<(String, u32)> = BTreeSet::new();
        for op in logical_ops(&records) {
            match op {
                LogicalOp::Insert {
                    table,
                    key,
                    row_values,
                    col_values,
                } => {
                    let handle = catalog
                        .get(&table)
                        .map_err(|e| Error::RecoveryFailed(e.to_string()))?;
                    let row = compose_full_row(&handle, &row_values, &col_values)?;
                    handle
                        .apply_insert(key, &row, commit_lsn)
                        .map_err(|e| Error::RecoveryFailed(e.to_string()))?;
                    touched.insert((table, handle.partition_for_key(key)));
                }
                LogicalOp::Update {
                    table,
                    key,
                    assignments,
                } => {
                    let handle = catalog
                        .get(&table)
                        .map_err(|e| Error::RecoveryFailed(e.to_string()))?;
                    handle
                        .apply_update(key, &assignments)
                        .map_err(|e| Error::RecoveryFailed(e.to_string()))?;
                    touched.insert((table, handle.partition_for_key(key)));
                }
                LogicalOp::Delete { table, key } => {
                    let handle = catalog
                        .get(&table)
                        .map_err(|e| Error::RecoveryFailed(e.to_string()))?;
                    handle
                        .apply_delete(key)
                        .map_err(|e| Error::RecoveryFailed(e.to_string()))?;
                    touched.insert((table, handle.partition_for_key(key)));
                }
            }
        }
        for (table, group_id) in touched {
            let handle = catalog.get(&table).expect("checked above");
            handle.group(group_id).set_watermark_for_restore(commit_lsn);
        }
    }

    Ok(RecoveryReport {
        max_lsn: scan.max_lsn,
        records_scanned: scan.records.len(),
        committed_txns: commits.len(),
    })
}

/// Stitches split payloads back into a full row in schema order.
fn compose_full_row(
    table: &crate::storage::Table,
    row_values: &[Value],
    col_values: &[Value],
) -> Result<Vec<Value>> {
    let schema = table.schema();
    let n_update = schema.update_columns().count();
    let n_readonly = schema.readonly_columns().count();
    if row_values.len() != n_update || col_values.len() != n_readonly {
        return Err(Error::RecoveryFailed(format!(
            "split payload arity mismatch for table {}",
            schema.table_name()
        )));
    }
    let mut row = Vec::with_capacity(schema.columns().len());
    let mut u = 0;
    let mut r = 0;
    for col in schema.columns() {
        if schema.is_updatable(&col.name) {
            row.push(row_values[u].clone());
            u += 1;
        } else {
            row.push(col_values[r].clone());
            r += 1;
        }
    }
    Ok(row)
}

/// Scans a log, recovers the committed-prefix state into `catalog`, and
/// returns the report. The log may end in a torn record.
pub fn recover(path: &Path, catalog: &Catalog) -> Result<RecoveryReport> {
    let scan = scan_log(path)?;
    replay(&scan, catalog)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionStats {
    pub records_before: usize,
    pub records_removed: usize,
}

/// Rewrites a closed log segment, removing the column-part records of
/// transactions whose log ends in a rollback. All other records keep
/// their bytes and LSNs; recovery over the result is state-identical to
/// recovery over the input.
pub fn compress_log_file(path: &Path) -> Result<CompressionStats> {
    let scan = scan_log(path)?;
    let rolled_back: HashSet<u64> = scan
        .records
        .iter()
        .filter(|r| r.kind == RecordKind::TxnRollback)
        .map(|r| r.txn_id)
        .collect();

    let mut kept = 0usize;
    let tmp_path = path.with_extension("compress.tmp");
    {
        let mut tmp = File::create(&tmp_path)?;
        tmp.write_all(LOG_MAGIC)?;
        tmp.write_all(&LOG_VERSION.to_le_bytes())?;
        for rec in &scan.records {
            if rec.kind.is_col_part() && rolled_back.contains(&rec.txn_id) {
                continue;
            }
            tmp.write_all(&encode_record(rec.lsn, &rec.to_draft()))?;
            kept += 1;
        }
        tmp.sync_all()?;
    }
    std::fs::rename(&tmp_path, path)?;

    Ok(CompressionStats {
        records_before: scan.records.len(),
        records_removed: scan.records.len() - kept,
    })
}

#[cfg(test)]
mod tests;
