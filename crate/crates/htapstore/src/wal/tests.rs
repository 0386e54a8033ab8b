use super::*;
use crate::schema::{ColumnDef, TableSchema};
use crate::value::ValueType;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::path::Path;

fn schema() -> TableSchema {
    TableSchema::new(
        "items",
        vec![
            ColumnDef::new("id", ValueType::Int64),
            ColumnDef::new("qty", ValueType::Int64),
            ColumnDef::new("label", ValueType::Utf8),
        ],
        "id",
        ["id", "qty"].map(String::from),
    )
    .unwrap()
}

fn fresh_catalog() -> Catalog {
    let catalog = Catalog::new();
    catalog.create_table(schema(), 3).unwrap();
    catalog
}

fn row_parts(key: i64, qty: i64) -> (Vec<Value>, Vec<Value>) {
    (
        vec![Value::Int(key), Value::Int(qty)],
        vec![Value::Str(format!("label-{key}"))],
    )
}

fn log_one_insert(wal: &Wal, txn: u64, key: i64, qty: i64) -> (u64, u64) {
    let (row, col) = row_parts(key, qty);
    wal.log_insert(txn, "items", 0, key, row, col).unwrap()
}

/// Live rows of every table, as (table, key, full row), for state
/// equality between two recovered catalogs.
fn state_of(catalog: &Catalog) -> Vec<(String, i64, Vec<Value>)> {
    let snap = catalog.snapshot();
    let mut out = Vec::new();
    for table in catalog.tables() {
        for key in table.visible_keys(&snap) {
            let row = table.point_get(key, &snap).unwrap();
            out.push((table.schema().table_name().to_string(), key, row));
        }
    }
    out
}

#[test]
fn first_append_gets_lsn_one() {
    let dir = tempfile::tempdir().unwrap();
    let wal = Wal::create(dir.path().join("wal"), Durability::Buffered).unwrap();
    let lsn = wal
        .append(RecordDraft {
            txn_id: 1,
            kind: RecordKind::UpdateRow,
            table: "items".into(),
            group_id: 0,
            key: Some(1),
            payload: Payload::Assignments(vec![("qty".into(), Value::Int(2))]),
        })
        .unwrap();
    assert_eq!(lsn, 1);
}

#[test]
fn lsns_strictly_increase_across_txns() {
    let dir = tempfile::tempdir().unwrap();
    let wal = Wal::create(dir.path().join("wal"), Durability::Buffered).unwrap();
    let a = log_one_insert(&wal, 1, 10, 1);
    let b = log_one_insert(&wal, 2, 20, 2);
    assert!(a.0 < a.1 && a.1 < b.0 && b.0 < b.1);
}

#[test]
fn insert_logs_split_pair_row_first() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 5, 50);
    wal.commit(1).unwrap();
    let scan = scan_log(&path).unwrap();
    let kinds: Vec<RecordKind> = scan.records.iter().map(|r| r.kind).collect();
    assert_eq!(
        kinds,
        vec![
            RecordKind::InsertRowPart,
            RecordKind::InsertColPart,
            RecordKind::TxnCommit
        ]
    );
}

#[test]
fn delete_logs_split_pair_row_first() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    wal.log_delete(1, "items", 0, 5).unwrap();
    let scan = scan_log(&path).unwrap();
    let kinds: Vec<RecordKind> = scan.records.iter().map(|r| r.kind).collect();
    assert_eq!(
        kinds,
        vec![RecordKind::DeleteRowPart, RecordKind::DeleteColPart]
    );
}

#[test]
fn commit_refuses_incomplete_split() {
    let dir = tempfile::tempdir().unwrap();
    let wal = Wal::create(dir.path().join("wal"), Durability::Buffered).unwrap();
    // Raw append of a lone row part simulates an engine bug.
    let (row, _) = row_parts(5, 50);
    wal.append(RecordDraft {
        txn_id: 1,
        kind: RecordKind::InsertRowPart,
        table: "items".into(),
        group_id: 0,
        key: Some(5),
        payload: Payload::Values(row),
    })
    .unwrap();
    let err = wal.commit(1).unwrap_err();
    assert!(matches!(err, Error::SplitIncomplete { txn_id: 1, .. }));
}

#[test]
fn append_after_terminal_record_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let wal = Wal::create(dir.path().join("wal"), Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 5, 50);
    wal.commit(1).unwrap();
    assert!(matches!(
        wal.log_update(1, "items", 0, 5, vec![("qty".into(), Value::Int(9))])
            .unwrap_err(),
        Error::TxnNotActive(1)
    ));
    // Rollback of an empty txn is valid and appends a single record.
    wal.rollback(2).unwrap();
    assert!(matches!(wal.rollback(2).unwrap_err(), Error::TxnNotActive(2)));
}

#[test]
fn recover_empty_log_is_empty_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    Wal::create(&path, Durability::Buffered).unwrap();
    let catalog = fresh_catalog();
    let report = recover(&path, &catalog).unwrap();
    assert_eq!(report.max_lsn, 0);
    assert_eq!(report.committed_txns, 0);
    assert!(state_of(&catalog).is_empty());
}

#[test]
fn recover_ignores_txn_without_commit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 5, 50);
    wal.commit(1).unwrap();
    log_one_insert(&wal, 2, 9, 90); // never committed
    drop(wal);
    let catalog = fresh_catalog();
    recover(&path, &catalog).unwrap();
    let snap = catalog.snapshot();
    let table = catalog.get("items").unwrap();
    assert!(table.point_get(5, &snap).is_some());
    assert!(table.point_get(9, &snap).is_none());
}

#[test]
fn recover_ignores_rolled_back_txn() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 5, 50);
    wal.rollback(1).unwrap();
    drop(wal);
    let catalog = fresh_catalog();
    recover(&path, &catalog).unwrap();
    assert!(state_of(&catalog).is_empty());
}

#[test]
fn recover_rejects_bad_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    std::fs::write(&path, b"NOPE\x01\x00").unwrap();
    assert!(matches!(
        scan_log(&path).unwrap_err(),
        Error::CorruptLogHeader(_)
    ));
}

/// Runs a fixed little workload and returns the final log path.
fn write_workload(path: &Path) -> Vec<(u64, bool)> {
    let wal = Wal::create(path, Durability::Buffered).unwrap();
    let mut rng = StdRng::seed_from_u64(99);
    let mut txns = Vec::new();
    for txn in 1..=8u64 {
        let key = txn as i64 * 3;
        log_one_insert(&wal, txn, key, rng.random_range(0..100));
        if txn % 2 == 0 {
            wal.log_update(txn, "items", 0, key, vec![("qty".into(), Value::Int(7))])
                .unwrap();
        }
        let commit = rng.random_bool(0.7);
        if commit {
            wal.commit(txn).unwrap();
        } else {
            wal.rollback(txn).unwrap();
        }
        txns.push((txn, commit));
    }
    txns
}

#[test]
fn truncation_sweep_recovers_committed_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    write_workload(&path);
    let full = std::fs::read(&path).unwrap();
    let full_scan = scan_log(&path).unwrap();

    // Committed-prefix oracle: a txn's effects exist iff its commit
    // record frame ends at or before the truncation point.
    let mut commit_ends: Vec<(u64, usize)> = Vec::new(); // (txn, end offset)
    {
        let mut offset = LOG_HEADER_LEN as usize;
        for rec in &full_scan.records {
            let frame = record::encode_record(
                rec.lsn,
                &RecordDraft {
                    txn_id: rec.txn_id,
                    kind: rec.kind,
                    table: rec.table.clone(),
                    group_id: rec.group_id,
                    key: rec.key,
                    payload: rec.payload.clone(),
                },
            );
            offset += frame.len();
            if rec.kind == RecordKind::TxnCommit {
                commit_ends.push((rec.txn_id, offset));
            }
        }
        assert_eq!(offset as u64, full_scan.valid_len);
    }

    let truncated = dir.path().join("truncated");
    for cut in 0..=full.len() {
        std::fs::write(&truncated, &full[..cut]).unwrap();
        if cut < LOG_HEADER_LEN as usize {
            assert!(scan_log(&truncated).is_err(), "cut {cut}");
            continue;
        }
        let catalog = fresh_catalog();
        recover(&truncated, &catalog).unwrap();
        let expected_commits: Vec<u64> = commit_ends
            .iter()
            .filter(|(_, end)| *end <= cut)
            .map(|(txn, _)| *txn)
            .collect();

        // Oracle: replay of the full log restricted to the transactions
        // whose commit record survived the cut.
        let oracle = fresh_catalog();
        let oracle_scan = scan_log(&path).unwrap();
        let filtered = LogScan {
            records: oracle_scan
                .records
                .into_iter()
                .filter(|r| expected_commits.contains(&r.txn_id))
                .collect(),
            valid_len: oracle_scan.valid_len,
            max_lsn: oracle_scan.max_lsn,
        };
        replay(&filtered, &oracle).unwrap();
        assert_eq!(
            state_of(&catalog),
            state_of(&oracle),
            "state mismatch at cut {cut}"
        );
        catalog.get("items").unwrap().verify_integrity().unwrap();
    }
}

#[test]
fn compression_removes_only_rolled_back_col_parts() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 3, 30);
    wal.commit(1).unwrap();
    log_one_insert(&wal, 2, 6, 60);
    wal.rollback(2).unwrap();
    drop(wal);

    // Scan oracle: count column items of rolled-back transactions.
    let scan = scan_log(&path).unwrap();
    let rolled: HashSet<u64> = scan
        .records
        .iter()
        .filter(|r| r.kind == RecordKind::TxnRollback)
        .map(|r| r.txn_id)
        .collect();
    let expected_removed = scan
        .records
        .iter()
        .filter(|r| r.kind.is_col_part() && rolled.contains(&r.txn_id))
        .count();
    assert_eq!(expected_removed, 1);

    let stats = compress_log_file(&path).unwrap();
    assert_eq!(stats.records_before, 6);
    assert_eq!(stats.records_removed, 1);
    let after = scan_log(&path).unwrap();
    assert!(!after
        .records
        .iter()
        .any(|r| r.kind == RecordKind::InsertColPart && r.txn_id == 2));
}

#[test]
fn compression_of_rollback_free_log_removes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 3, 30);
    wal.commit(1).unwrap();
    drop(wal);
    let before = std::fs::read(&path).unwrap();
    let stats = compress_log_file(&path).unwrap();
    assert_eq!(stats.records_removed, 0);
    assert_eq!(std::fs::read(&path).unwrap(), before);
}

#[test]
fn compression_preserves_recovered_state_on_random_mixes() {
    let mut rng = StdRng::seed_from_u64(2024);
    for round in 0..25 {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("wal");
        let wal = Wal::create(&path, Durability::Buffered).unwrap();
        let mut live: Vec<i64> = Vec::new();
        for txn in 1..=12u64 {
            let n_ops = rng.random_range(1..4);
            let mut inserted: Vec<i64> = Vec::new();
            let mut deleted: Vec<i64> = Vec::new();
            for _ in 0..n_ops {
                match rng.random_range(0..3) {
                    0 => {
                        let key = rng.random_range(0..64);
                        if !live.contains(&key) && !inserted.contains(&key) {
                            log_one_insert(&wal, txn, key, rng.random_range(0..100));
                            inserted.push(key);
                        }
                    }
                    1 => {
                        if let Some(&key) = live.iter().find(|k| !deleted.contains(k)) {
                            wal.log_update(
                                txn,
                                "items",
                                0,
                                key,
                                vec![("qty".into(), Value::Int(rng.random_range(0..100)))],
                            )
                            .unwrap();
                        }
                    }
                    _ => {
                        if let Some(&key) = live.iter().rev().find(|k| !deleted.contains(k)) {
                            wal.log_delete(txn, "items", 0, key).unwrap();
                            deleted.push(key);
                        }
                    }
                }
            }
            if rng.random_bool(0.6) {
                wal.commit(txn).unwrap();
                live.retain(|k| !deleted.contains(k));
                live.extend(inserted);
                live.sort_unstable();
            } else {
                wal.rollback(txn).unwrap();
            }
        }
        drop(wal);

        let original = fresh_catalog();
        recover(&path, &original).unwrap();

        compress_log_file(&path).unwrap();
        let compressed = fresh_catalog();
        recover(&path, &compressed).unwrap();

        assert_eq!(
            state_of(&original),
            state_of(&compressed),
            "round {round}: compression changed recovered state"
        );
    }
}

#[test]
fn reopened_wal_continues_lsns_and_rejects_stale_txns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("wal");
    let wal = Wal::create(&path, Durability::Buffered).unwrap();
    log_one_insert(&wal, 1, 3, 30);
    wal.commit(1).unwrap();
    log_one_insert(&wal, 2, 6, 60); // left open at "crash"
    let last = wal.last_lsn();
    drop(wal);

    let (wal, scan) = Wal::open(&path, Durability::Buffered).unwrap();
    assert_eq!(scan.max_lsn, last);
    assert_eq!(wal.txn_outcome(1), Some(TxnOutcome::Committed));
    // The interrupted txn is treated as rolled back after restart.
    assert_eq!(wal.txn_outcome(2), Some(TxnOutcome::RolledBack));
    assert!(wal.commit(2).is_err());
    let lsn = log_one_insert(&wal, 3, 9, 90).0;
    assert_eq!(lsn, last + 1);
}
