//! Crash-injection sweep: truncate the log at byte offsets and verify
//! that recovery lands exactly on the committed-prefix state.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::txn::{Engine, EngineOptions, HybridScript};
use crate::value::Value;
use crate::wal::{self, LogicalOp, RecordKind};

/// Which truncation points to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrashOffsets {
    /// Every byte offset of the log.
    All,
    /// A deterministic sample of this many offsets (commit-record
    /// boundaries are always included).
    Sample(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetVerdict {
    pub offset: u64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct CrashSweepReport {
    pub log_len: u64,
    pub offsets_tested: u64,
    pub mismatches: Vec<OffsetVerdict>,
}

impl CrashSweepReport {
    pub fn all_match(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Runs `scripts` (one transaction each) against a fresh engine in
/// `work_dir/base`, then for each chosen truncation offset copies the
/// catalog, truncates the log, recovers, and compares the recovered
/// state against the committed-prefix oracle.
///
/// `setup` prepares tables on the fresh engine before the scripts run.
pub fn crash_sweep(
    work_dir: &Path,
    setup: &dyn Fn(&Engine) -> Result<()>,
    scripts: &[HybridScript],
    offsets: CrashOffsets,
) -> Result<CrashSweepReport> {
    let base_dir = work_dir.join("base");
    let engine = Engine::create(&base_dir)?;
    setup(&engine)?;
    for script in scripts {
        // Scripts may legitimately fail (e.g. conflict experiments);
        // their rollback still lands in the log.
        let _ = engine.run_hybrid(script);
    }
    drop(engine);

    let wal_path = base_dir.join("wal.htwl");
    let catalog_path = base_dir.join("catalog.htcg");
    let log_bytes = std::fs::read(&wal_path)?;
    let log_len = log_bytes.len() as u64;

    let chosen: Vec<u64> = match offsets {
        CrashOffsets::All => (0..=log_len).collect(),
        CrashOffsets::Sample(n) => {
            let mut picks: Vec<u64> = commit_record_ends(&wal_path)?;
            picks.push(0);
            picks.push(log_len);
            let mut rest: Vec<u64> = (0..=log_len).filter(|o| !picks.contains(o)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(log_len);
            rest.shuffle(&mut rng);
            picks.extend(rest.into_iter().take(n as usize));
            picks.sort_unstable();
            picks.dedup();
            picks
        }
    };

    let scratch = work_dir.join("scratch");
    let mut mismatches = Vec::new();
    for &offset in &chosen {
        let verdict = check_offset(&scratch, &catalog_path, &log_bytes, offset)?;
        if !verdict.pass {
            mismatches.push(verdict);
        }
    }

    Ok(CrashSweepReport {
        log_len,
        offsets_tested: chosen.len() as u64,
        mismatches,
    })
}

/// Byte offsets at which each commit record's frame ends.
fn commit_record_ends(wal_path: &Path) -> Result<Vec<u64>> {
    let scan = wal::scan_log(wal_path)?;
    let mut ends = Vec::new();
    let mut offset = wal::LOG_HEADER_LEN;
    for rec in &scan.records {
        offset += wal::record_frame_len(rec);
        if rec.kind == RecordKind::TxnCommit {
            ends.push(offset);
        }
    }
    Ok(ends)
}

fn check_offset(
    scratch: &Path,
    catalog_path: &Path,
    log_bytes: &[u8],
    offset: u64,
) -> Result<OffsetVerdict> {
    let _ = std::fs::remove_dir_all(scratch);
    std::fs::create_dir_all(scratch)?;
    std::fs::copy(catalog_path, scratch.join("catalog.htcg"))?;
    std::fs::write(scratch.join("wal.htwl"), &log_bytes[..offset as usize])?;

    let opened = Engine::open_with(scratch, EngineOptions::default());
    if offset < wal::LOG_HEADER_LEN {
        return Ok(match opened {
            Err(Error::CorruptLogHeader(_)) => OffsetVerdict {
                offset,
                pass: true,
                detail: "torn header rejected".into(),
            },
            Err(other) => OffsetVerdict {
                offset,
                pass: false,
                detail: format!("expected CorruptLogHeader, got {other}"),
            },
            Ok(_) => OffsetVerdict {
                offset,
                pass: false,
                detail: "torn header accepted".into(),
            },
        });
    }
    let engine = opened?;

    // Oracle: recovery must equal a replay of exactly the transactions
    // whose commit record fits inside the prefix.
    let scan = wal::scan_log(&scratch.join("wal.htwl"))?;
    let expected = committed_prefix_rows(&scan, &engine)?;

    let snap = engine.snapshot();
    let mut mismatch = None;
    let mut live = 0u64;
    for table in engine.tables() {
        table.verify_integrity()?;
        for key in table.visible_keys(&snap) {
            live += 1;
            let name = table.schema().table_name().to_string();
            let got = table.point_get(key, &snap).expect("visible");
            match expected.get(&(name.clone(), key)) {
                Some(want) if *want == got => {}
                Some(_) => {
                    mismatch = Some(format!("{name}#{key}: row differs"));
                    break;
                }
                None => {
                    mismatch = Some(format!("{name}#{key}: unexpected live row"));
                    break;
                }
            }
        }
    }
    if mismatch.is_none() && live != expected.len() as u64 {
        mismatch = Some(format!(
            "live rows {live} != oracle rows {}",
            expected.len()
        ));
    }

    Ok(match mismatch {
        None => OffsetVerdict {
            offset,
            pass: true,
            detail: format!("{live} rows match"),
        },
        Some(detail) => OffsetVerdict {
            offset,
            pass: false,
            detail,
        },
    })
}

/// Expected full rows after replaying the committed prefix, using the
/// engine's schemas to compose and update rows.
fn committed_prefix_rows(
    scan: &wal::LogScan,
    engine: &Engine,
) -> Result<BTreeMap<(String, i64), Vec<Value>>> {
    let mut commits: BTreeMap<u64, u64> = BTreeMap::new();
    for rec in &scan.records {
        if rec.kind == RecordKind::TxnCommit {
            commits.insert(rec.lsn, rec.txn_id);
        }
    }
    let mut by_txn: BTreeMap<u64, Vec<&wal::LogRecord>> = BTreeMap::new();
    for rec in &scan.records {
        by_txn.entry(rec.txn_id).or_default().push(rec);
    }
    let mut state: BTreeMap<(String, i64), Vec<Value>> = BTreeMap::new();
    for (_, txn_id) in commits {
        let records = by_txn.remove(&txn_id).unwrap_or_default();
        for op in wal::logical_ops(&records) {
            match op {
                LogicalOp::Insert {
                    table,
                    key,
                    row_values,
                    col_values,
                } => {
                    let schema = engine.table(&table)?.schema().clone();
                    let mut row = Vec::with_capacity(schema.columns().len());
                    let (mut u, mut r) = (0, 0);
                    for col in schema.columns() {
                        if schema.is_updatable(&col.name) {
                            row.push(row_values[u].clone());
                            u += 1;
                        } else {
                            row.push(col_values[r].clone());
                            r += 1;
                        }
                    }
                    state.insert((table, key), row);
                }
                LogicalOp::Update {
                    table,
                    key,
                    assignments,
                } => {
                    let schema = engine.table(&table)?.schema().clone();
                    if let Some(row) = state.get_mut(&(table, key)) {
                        for (name, value) in assignments {
                            if let Some(idx) = schema.column_index(&name) {
                                row[idx] = value;
                            }
                        }
                    }
                }
                LogicalOp::Delete { table, key } => {
                    state.remove(&(table, key));
                }
            }
        }
    }
    Ok(state)
}
