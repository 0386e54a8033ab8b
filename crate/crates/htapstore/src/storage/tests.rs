use super::*;
use crate::schema::ColumnDef;

use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn customer_schema() -> TableSchema {
    TableSchema::new(
        "customer",
        vec![
            ColumnDef::new("c_id", ValueType::Int64),
            ColumnDef::new("c_balance", ValueType::Float64),
            ColumnDef::new("c_data", ValueType::Utf8),
            ColumnDef::new("c_first", ValueType::Utf8),
            ColumnDef::new("c_credit_lim", ValueType::Float64),
            ColumnDef::new("c_since", ValueType::Int64),
        ],
        "c_id",
        ["c_id", "c_balance", "c_data"].map(String::from),
    )
    .unwrap()
}

fn customer_row(id: i64, balance: f64) -> Vec<Value> {
    vec![
        Value::Int(id),
        Value::Float(balance),
        Value::Str(format!("data-{id}")),
        Value::Str(format!("first-{id}")),
        Value::Float(50_000.0),
        Value::Int(id.wrapping_mul(7)),
    ]
}

fn snapshot_at(table: &Table, lsn: u64) -> Snapshot {
    let mut tables = BTreeMap::new();
    tables.insert(
        table.schema().table_name().to_string(),
        vec![lsn; table.num_groups() as usize],
    );
    Snapshot { tables }
}

fn current_snapshot(table: &Table) -> Snapshot {
    Snapshot::capture(std::iter::once(table))
}

#[test]
fn create_table_even_ranges_cover_key_space() {
    let table = Table::new(customer_schema(), 4);
    // Every sampled key maps to exactly one group, and that group's
    // range contains it.
    let mut rng = StdRng::seed_from_u64(7);
    let mut sample: Vec<i64> = (0..1000).map(|_| rng.random()).collect();
    sample.extend([i64::MIN, -1, 0, 1, i64::MAX]);
    for key in sample {
        let containing: Vec<u32> = (0..4)
            .filter(|&g| table.group(g).key_range().contains(key))
            .collect();
        assert_eq!(containing.len(), 1, "key {key} in {containing:?}");
        assert_eq!(containing[0], table.partition_for_key(key));
    }
    assert_eq!(table.group(0).key_range().lo, i64::MIN);
    assert_eq!(table.group(3).key_range().hi, None);
}

#[test]
fn partition_boundaries_are_half_open() {
    let table = Table::new(customer_schema(), 4);
    let range2 = table.group(2).key_range();
    assert_eq!(table.partition_for_key(range2.lo), 2);
    let hi = range2.hi.unwrap();
    assert_eq!(table.partition_for_key(hi), 3);
    assert_eq!(table.partition_for_key(hi - 1), 2);
}

#[test]
fn partition_histogram_matches_range_lookup_oracle() {
    let table = Table::new(customer_schema(), 5);
    let ranges: Vec<KeyRange> = (0..5).map(|g| table.group(g).key_range()).collect();
    // Brute-force oracle: linear scan over the ranges.
    let oracle = |key: i64| -> u32 {
        ranges
            .iter()
            .position(|r| r.contains(key))
            .expect("ranges cover the space") as u32
    };
    let mut rng = StdRng::seed_from_u64(42);
    let mut histogram = [0u32; 5];
    for _ in 0..10_000 {
        let key: i64 = rng.random();
        let g = table.partition_for_key(key);
        assert_eq!(g, oracle(key));
        histogram[g as usize] += 1;
    }
    // Even ranges over a uniform sample: each group near 2000.
    for count in histogram {
        assert!((1600..=2400).contains(&count), "skewed: {histogram:?}");
    }
}

#[test]
fn insert_into_empty_group_gets_position_zero() {
    let table = Table::new(customer_schema(), 2);
    let pos = table.apply_insert(5, &customer_row(5, 1.0), 1).unwrap();
    assert_eq!(pos, 0);
}

#[test]
fn insert_existing_key_is_duplicate() {
    let table = Table::new(customer_schema(), 2);
    table.apply_insert(5, &customer_row(5, 1.0), 1).unwrap();
    let err = table.apply_insert(5, &customer_row(5, 2.0), 2).unwrap_err();
    assert!(matches!(err, Error::DuplicateKey(5)));
}

#[test]
fn hundred_inserts_round_trip_through_point_get() {
    let table = Table::new(customer_schema(), 4);
    let mut rng = StdRng::seed_from_u64(3);
    let mut rows = Vec::new();
    for lsn in 1..=100u64 {
        let key: i64 = rng.random();
        if rows.iter().any(|(k, _)| *k == key) {
            continue;
        }
        let row = customer_row(key, rng.random::<f64>() * 100.0);
        table.apply_insert(key, &row, lsn).unwrap();
        for g in 0..table.num_groups() {
            table.group(g).publish_watermark(lsn);
        }
        rows.push((key, row));
    }
    let snap = current_snapshot(&table);
    for (key, row) in &rows {
        let got = table.point_get(*key, &snap).expect("inserted");
        assert_eq!(&got, row, "stitched row differs for key {key}");
    }
    table.verify_integrity().unwrap();
}

#[test]
fn update_changes_only_assigned_fields() {
    let table = Table::new(customer_schema(), 2);
    table.apply_insert(256, &customer_row(256, 10.0), 1).unwrap();
    table
        .apply_update(256, &[("c_balance".into(), Value::Float(1024.0))])
        .unwrap();
    table.group(0).publish_watermark(2);
    table.group(1).publish_watermark(2);
    let snap = current_snapshot(&table);
    let row = table.point_get(256, &snap).unwrap();
    let mut expected = customer_row(256, 10.0);
    expected[1] = Value::Float(1024.0);
    assert_eq!(row, expected);
}

#[test]
fn update_readonly_column_is_rejected_and_arrays_untouched() {
    let table = Table::new(customer_schema(), 1);
    table.apply_insert(1, &customer_row(1, 10.0), 1).unwrap();
    let before = {
        let data = table.group(0).data.read().unwrap();
        data.readonly.clone()
    };
    let err = table
        .apply_update(1, &[("c_first".into(), Value::Str("x".into()))])
        .unwrap_err();
    assert!(matches!(err, Error::NonUpdatableColumn(ref c) if c == "c_first"));
    // A legal update must also leave the read-only side bit-identical.
    table
        .apply_update(1, &[("c_balance".into(), Value::Float(0.5))])
        .unwrap();
    let after = {
        let data = table.group(0).data.read().unwrap();
        data.readonly.clone()
    };
    assert_eq!(before, after);
}

#[test]
fn update_missing_key_not_found() {
    let table = Table::new(customer_schema(), 2);
    let err = table
        .apply_update(9, &[("c_balance".into(), Value::Float(1.0))])
        .unwrap_err();
    assert!(matches!(err, Error::KeyNotFound(9)));
}

#[test]
fn delete_tombstones_position_and_hides_key() {
    let table = Table::new(customer_schema(), 1);
    table.apply_insert(1, &customer_row(1, 1.0), 1).unwrap();
    table.apply_insert(2, &customer_row(2, 2.0), 1).unwrap();
    table.group(0).publish_watermark(1);
    table.apply_delete(1).unwrap();
    let snap = current_snapshot(&table);
    assert!(table.point_get(1, &snap).is_none());
    assert!(table.point_get(2, &snap).is_some());
    // The tombstoned position is excluded from scans.
    let values = table.scan_column("c_since", None, &snap).unwrap();
    assert_eq!(values, vec![Value::Int(14)]);
    // Arrays keep their length: deletes are logical.
    let data = table.group(0).data.read().unwrap();
    assert_eq!(data.position_lsns.len(), 2);
    assert!(!data.validity.get(0));
    drop(data);
    table.verify_integrity().unwrap();
}

#[test]
fn delete_missing_key_not_found() {
    let table = Table::new(customer_schema(), 2);
    assert!(matches!(
        table.apply_delete(77).unwrap_err(),
        Error::KeyNotFound(77)
    ));
}

#[test]
fn point_get_respects_snapshot_watermark() {
    let table = Table::new(customer_schema(), 1);
    table.apply_insert(7, &customer_row(7, 7.0), 5).unwrap();
    table.group(0).publish_watermark(5);
    // A snapshot older than the insert's commit does not see it.
    assert!(table.point_get(7, &snapshot_at(&table, 4)).is_none());
    assert!(table.point_get(7, &snapshot_at(&table, 5)).is_some());
}

#[test]
fn point_get_on_empty_table_is_absent() {
    let table = Table::new(customer_schema(), 3);
    let snap = current_snapshot(&table);
    assert!(table.point_get(0, &snap).is_none());
}

#[test]
fn scan_unknown_column_errors() {
    let table = Table::new(customer_schema(), 1);
    let snap = current_snapshot(&table);
    assert!(matches!(
        table.scan_column("nope", None, &snap).unwrap_err(),
        Error::UnknownColumn(_)
    ));
}

#[test]
fn scan_with_unsatisfiable_predicate_is_empty() {
    let table = Table::new(customer_schema(), 2);
    table.apply_insert(1, &customer_row(1, 10.0), 1).unwrap();
    table.group(0).publish_watermark(1);
    table.group(1).publish_watermark(1);
    let snap = current_snapshot(&table);
    let pred = RangePredicate::new("c_balance", 900.0, 1000.0);
    let got = table.scan_column("c_since", Some(&pred), &snap).unwrap();
    assert!(got.is_empty());
}

/// Web-sales style table: scan target and predicate both columnar.
fn web_sales_schema() -> TableSchema {
    TableSchema::new(
        "web_sales",
        vec![
            ColumnDef::new("ws_id", ValueType::Int64),
            ColumnDef::new("ws_quantity", ValueType::Int64),
            ColumnDef::new("ws_price", ValueType::Float64),
        ],
        "ws_id",
        ["ws_id".to_string()],
    )
    .unwrap()
}

#[test]
fn scan_matches_row_store_oracle_on_random_rows() {
    let table = Table::new(web_sales_schema(), 4);
    let mut rng = StdRng::seed_from_u64(11);
    // Naive full-row oracle.
    let mut oracle: Vec<(i64, i64, f64)> = Vec::new();
    for lsn in 1..=1000u64 {
        let key = lsn as i64 * 13;
        let quantity = rng.random_range(0..500);
        let price = rng.random_range(0.0..128.0);
        table
            .apply_insert(
                key,
                &[Value::Int(key), Value::Int(quantity), Value::Float(price)],
                lsn,
            )
            .unwrap();
        for g in 0..table.num_groups() {
            table.group(g).publish_watermark(lsn);
        }
        oracle.push((key, quantity, price));
    }
    let snap = current_snapshot(&table);
    let pred = RangePredicate::new("ws_price", 64.0, 80.0);
    let mut got: Vec<i64> = table
        .scan_column("ws_quantity", Some(&pred), &snap)
        .unwrap()
        .into_iter()
        .map(|v| v.as_int().unwrap())
        .collect();
    let mut expected: Vec<i64> = oracle
        .iter()
        .filter(|(_, _, p)| (64.0..=80.0).contains(p))
        .map(|(_, q, _)| *q)
        .collect();
    got.sort_unstable();
    expected.sort_unstable();
    assert!(!expected.is_empty());
    assert_eq!(got, expected);
}

#[test]
fn scan_multiset_is_independent_of_column_partition() {
    // Same logical data, one schema keeps the value column read-only,
    // the other makes it updatable.
    let readonly_side = Table::new(web_sales_schema(), 3);
    let update_side = Table::new(
        TableSchema::new(
            "web_sales",
            vec![
                ColumnDef::new("ws_id", ValueType::Int64),
                ColumnDef::new("ws_quantity", ValueType::Int64),
                ColumnDef::new("ws_price", ValueType::Float64),
            ],
            "ws_id",
            ["ws_id", "ws_quantity", "ws_price"].map(String::from),
        )
        .unwrap(),
        3,
    );
    let mut rng = StdRng::seed_from_u64(5);
    for lsn in 1..=200u64 {
        let key: i64 = rng.random();
        let row = [
            Value::Int(key),
            Value::Int(rng.random_range(0..100)),
            Value::Float(rng.random_range(0.0..100.0)),
        ];
        if readonly_side.apply_insert(key, &row, lsn).is_err() {
            continue;
        }
        update_side.apply_insert(key, &row, lsn).unwrap();
        for g in 0..3 {
            readonly_side.group(g).publish_watermark(lsn);
            update_side.group(g).publish_watermark(lsn);
        }
    }
    let pred = RangePredicate::new("ws_price", 25.0, 75.0);
    let sort = |mut v: Vec<i64>| {
        v.sort_unstable();
        v
    };
    let a = sort(
        readonly_side
            .scan_column("ws_quantity", Some(&pred), &current_snapshot(&readonly_side))
            .unwrap()
            .into_iter()
            .map(|v| v.as_int().unwrap())
            .collect(),
    );
    let b = sort(
        update_side
            .scan_column("ws_quantity", Some(&pred), &current_snapshot(&update_side))
            .unwrap()
            .into_iter()
            .map(|v| v.as_int().unwrap())
            .collect(),
    );
    assert_eq!(a, b);
}

#[test]
fn checkpoint_round_trips_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.htsc");
    let table = Table::new(customer_schema(), 3);
    for (lsn, key) in [(1u64, 10i64), (2, -44), (3, 900_000)] {
        table
            .apply_insert(key, &customer_row(key, key as f64), lsn)
            .unwrap();
        for g in 0..3 {
            table.group(g).publish_watermark(lsn);
        }
    }
    table.apply_delete(-44).unwrap();
    table
        .apply_update(10, &[("c_balance".into(), Value::Float(3.5))])
        .unwrap();
    write_checkpoint(&path, std::iter::once(&table)).unwrap();

    let restored = read_checkpoint(&path).unwrap();
    assert_eq!(restored.len(), 1);
    let restored = &restored[0];
    assert_eq!(restored.schema(), table.schema());
    let snap = current_snapshot(&table);
    for key in [10i64, -44, 900_000] {
        assert_eq!(restored.point_get(key, &snap), table.point_get(key, &snap));
    }
    // Re-serializing the restored state reproduces the same bytes.
    let path2 = dir.path().join("state2.htsc");
    write_checkpoint(&path2, std::iter::once(restored)).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
}

#[test]
fn checkpoint_detects_corruption() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("state.htsc");
    let table = Table::new(customer_schema(), 1);
    table.apply_insert(1, &customer_row(1, 1.0), 1).unwrap();
    write_checkpoint(&path, std::iter::once(&table)).unwrap();
    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();
    assert!(read_checkpoint(&path).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Partition totality: every key belongs to exactly one group, for
    /// any group count.
    #[test]
    fn prop_partition_covers_every_key(key in any::<i64>(), groups in 1u32..64) {
        let p = Partitioning::new(groups);
        let g = p.group_of(key);
        prop_assert!(g < groups);
        prop_assert!(p.range_of(g).contains(key));
        let hits = (0..groups).filter(|&i| p.range_of(i).contains(key)).count();
        prop_assert_eq!(hits, 1);
    }

    /// Stitching correctness against a naive single-map row store, over
    /// random insert/update/delete sequences.
    #[test]
    fn prop_stitch_equals_row_store_oracle(ops in proptest::collection::vec((0u8..3, 0i64..32, any::<f64>()), 1..120)) {
        let table = Table::new(customer_schema(), 4);
        let mut oracle: BTreeMap<i64, Vec<Value>> = BTreeMap::new();
        let mut lsn = 0u64;
        for (op, key, num) in ops {
            lsn += 1;
            match op {
                0 => {
                    let row = customer_row(key, num);
                    if let std::collections::btree_map::Entry::Vacant(e) = oracle.entry(key) {
                        table.apply_insert(key, &row, lsn).unwrap();
                        e.insert(row);
                    } else {
                        prop_assert!(table.apply_insert(key, &row, lsn).is_err());
                    }
                }
                1 => {
                    let assign = vec![("c_balance".to_string(), Value::Float(num))];
                    if let Some(row) = oracle.get_mut(&key) {
                        table.apply_update(key, &assign).unwrap();
                        row[1] = Value::Float(num);
                    } else {
                        prop_assert!(table.apply_update(key, &assign).is_err());
                    }
                }
                _ => {
                    if oracle.remove(&key).is_some() {
                        table.apply_delete(key).unwrap();
                    } else {
                        prop_assert!(table.apply_delete(key).is_err());
                    }
                }
            }
            for g in 0..table.num_groups() {
                table.group(g).publish_watermark(lsn);
            }
        }
        table.verify_integrity().unwrap();
        let snap = current_snapshot(&table);
        for key in 0i64..32 {
            prop_assert_eq!(table.point_get(key, &snap), oracle.get(&key).cloned());
        }
    }
}
