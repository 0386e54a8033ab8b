//! Mixed-format table storage.
//!
//! A table is range-partitioned over the full int64 primary-key space
//! into row groups. Within each group the schema's columns are split by
//! the update set: updatable columns live in a row-format update
//! partition (an ordered map keyed by primary key), all remaining
//! columns live in a column-format read-only partition (per-column
//! contiguous arrays plus a validity bitmap). The two sides are joined
//! by a key→position map.
//!
//! Readers never see uncommitted data: mutation happens only on the
//! commit path, under the group's exclusive latch, and a per-group
//! commit watermark (the LSN of the newest visible transaction) is
//! published after the group's effects are in place. Snapshots capture
//! the watermarks without latching. Row insertion order equals commit
//! order, so a snapshot bounds the visible rows of a group by the
//! number of positions whose insert LSN is at or below its watermark.
//!
//! Visibility is single-version: inserts are exact against the snapshot
//! watermark (a row inserted by a later commit is invisible), while
//! updates and deletes follow committed-read semantics — the storage
//! keeps no history, so their latest committed effect is what any
//! reader observes. Uncommitted or rolled-back effects are never
//! observable at any point.

mod checkpoint;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub(crate) use checkpoint::{decode_schema as decode_schema_from, encode_schema as encode_schema_to};

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::RwLock;

use crate::error::{Error, Result};
use crate::schema::TableSchema;
use crate::value::{Value, ValueType};

const SIGN_FLIP: u64 = 1 << 63;

/// Half-open key range of one row group. The final group of a table has
/// `hi = None` and extends through `i64::MAX` inclusive, since the
/// exclusive bound `i64::MAX + 1` is not representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyRange {
    pub lo: i64,
    pub hi: Option<i64>,
}

impl KeyRange {
    pub fn contains(&self, key: i64) -> bool {
        key >= self.lo && self.hi.is_none_or(|hi| key < hi)
    }
}

/// Even split of the int64 key space into `num_groups` ranges.
///
/// Keys are mapped to unsigned offsets by flipping the sign bit, which
/// preserves order; the 2^64-wide offset space is divided into ranges
/// whose widths differ by at most one.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Partitioning {
    num_groups: u32,
    base: u128,
    rem: u128,
}

impl Partitioning {
    pub(crate) fn new(num_groups: u32) -> Self {
        assert!(num_groups >= 1);
        let total: u128 = 1 << 64;
        Partitioning {
            num_groups,
            base: total / num_groups as u128,
            rem: total % num_groups as u128,
        }
    }

    fn offset(key: i64) -> u64 {
        (key as u64) ^ SIGN_FLIP
    }

    pub(crate) fn group_of(&self, key: i64) -> u32 {
        let ofs = Self::offset(key) as u128;
        let wide = self.rem * (self.base + 1);
        let idx = if ofs < wide {
            ofs / (self.base + 1)
        } else {
            self.rem + (ofs - wide) / self.base
        };
        idx as u32
    }

    fn start_offset(&self, group: u32) -> u128 {
        let g = group as u128;
        if g <= self.rem {
            g * (self.base + 1)
        } else {
            self.rem * (self.base + 1) + (g - self.rem) * self.base
        }
    }

    pub(crate) fn range_of(&self, group: u32) -> KeyRange {
        let lo = (self.start_offset(group) as u64) ^ SIGN_FLIP;
        let hi = if group + 1 == self.num_groups {
            None
        } else {
            Some((self.start_offset(group + 1) as u64) ^ SIGN_FLIP)
        };
        KeyRange {
            lo: lo as i64,
            hi: hi.map(|h| h as i64),
        }
    }
}

/// One column of the read-only partition: a contiguous typed array.
/// Strings use an append-only byte heap addressed by offsets.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ColumnArray {
    Int(Vec<i64>),
    Float(Vec<f64>),
    Bool(Vec<bool>),
    Str(StrArray),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct StrArray {
    offsets: Vec<u32>,
    bytes: Vec<u8>,
}

impl StrArray {
    fn push(&mut self, s: &str) {
        if self.offsets.is_empty() {
            self.offsets.push(0);
        }
        self.bytes.extend_from_slice(s.as_bytes());
        self.offsets.push(self.bytes.len() as u32);
    }

    fn get(&self, pos: usize) -> &str {
        let start = self.offsets[pos] as usize;
        let end = self.offsets[pos + 1] as usize;
        std::str::from_utf8(&self.bytes[start..end]).expect("heap holds valid utf8")
    }

    fn len(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub(crate) fn from_parts(offsets: Vec<u32>, bytes: Vec<u8>) -> Self {
        StrArray { offsets, bytes }
    }

    pub(crate) fn parts(&self) -> (&[u32], &[u8]) {
        (&self.offsets, &self.bytes)
    }
}

impl ColumnArray {
    pub(crate) fn new(value_type: ValueType) -> Self {
        match value_type {
            ValueType::Int64 => ColumnArray::Int(Vec::new()),
            ValueType::Float64 => ColumnArray::Float(Vec::new()),
            ValueType::Bool => ColumnArray::Bool(Vec::new()),
            ValueType::Utf8 => ColumnArray::Str(StrArray::default()),
        }
    }

    pub(crate) fn len(&self) -> usize {
        match self {
            ColumnArray::Int(v) => v.len(),
            ColumnArray::Float(v) => v.len(),
            ColumnArray::Bool(v) => v.len(),
            ColumnArray::Str(v) => v.len(),
        }
    }

    fn push(&mut self, value: &Value) {
        match (self, value) {
            (ColumnArray::Int(v), Value::Int(x)) => v.push(*x),
            (ColumnArray::Float(v), Value::Float(x)) => v.push(*x),
            (ColumnArray::Bool(v), Value::Bool(x)) => v.push(*x),
            (ColumnArray::Str(v), Value::Str(x)) => v.push(x),
            _ => unreachable!("row type-checked before apply"),
        }
    }

    pub(crate) fn get(&self, pos: usize) -> Value {
        match self {
            ColumnArray::Int(v) => Value::Int(v[pos]),
            ColumnArray::Float(v) => Value::Float(v[pos]),
            ColumnArray::Bool(v) => Value::Bool(v[pos]),
            ColumnArray::Str(v) => Value::Str(v.get(pos).to_string()),
        }
    }
}

/// Validity bitmap over read-only positions: a cleared bit is a
/// delete tombstone.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Bitmap {
    words: Vec<u64>,
    len: usize,
}

impl Bitmap {
    pub(crate) fn push(&mut self, set: bool) {
        let bit = self.len;
        self.len += 1;
        if self.words.len() * 64 < self.len {
            self.words.push(0);
        }
        if set {
            self.words[bit / 64] |= 1 << (bit % 64);
        }
    }

    pub(crate) fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] & (1 << (bit % 64)) != 0
    }

    fn clear(&mut self, bit: usize) {
        self.words[bit / 64] &= !(1 << (bit % 64));
    }

    pub(crate) fn len(&self) -> usize {
        self.len
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn from_parts(words: Vec<u64>, len: usize) -> Self {
        Bitmap { words, len }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct PosEntry {
    pub(crate) pos: u32,
    pub(crate) insert_lsn: u64,
}

/// Mutable contents of one row group, guarded by the group latch.
#[derive(Debug)]
pub(crate) struct GroupData {
    /// Row-format update partition: update-set column values in schema
    /// order, keyed by primary key.
    pub(crate) update_rows: BTreeMap<i64, Vec<Value>>,
    /// Column-format read-only partition, one array per non-update
    /// column in schema order.
    pub(crate) readonly: Vec<ColumnArray>,
    pub(crate) validity: Bitmap,
    /// Primary key → read-only position.
    pub(crate) positions: BTreeMap<i64, PosEntry>,
    /// Insert (commit) LSN per position; nondecreasing because rows are
    /// appended in commit order.
    pub(crate) position_lsns: Vec<u64>,
}

impl GroupData {
    fn new(schema: &TableSchema) -> Self {
        GroupData {
            update_rows: BTreeMap::new(),
            readonly: schema
                .readonly_columns()
                .map(|(_, c)| ColumnArray::new(c.value_type))
                .collect(),
            validity: Bitmap::default(),
            positions: BTreeMap::new(),
            position_lsns: Vec::new(),
        }
    }

    /// Number of positions visible at `watermark`: rows append in commit
    /// order, so this is a prefix length.
    pub(crate) fn visible_len(&self, watermark: u64) -> usize {
        self.position_lsns.partition_point(|&lsn| lsn <= watermark)
    }
}

/// One range partition of a table.
pub struct RowGroup {
    group_id: u32,
    key_range: KeyRange,
    watermark: AtomicU64,
    pub(crate) data: RwLock<GroupData>,
}

impl RowGroup {
    pub fn group_id(&self) -> u32 {
        self.group_id
    }

    pub fn key_range(&self) -> KeyRange {
        self.key_range
    }

    /// LSN of the newest transaction visible to readers of this group.
    pub fn commit_watermark(&self) -> u64 {
        self.watermark.load(Ordering::Acquire)
    }

    pub(crate) fn publish_watermark(&self, lsn: u64) {
        // Commits are serialized, so the watermark only moves forward.
        self.watermark.store(lsn, Ordering::Release);
    }

    pub(crate) fn set_watermark_for_restore(&self, lsn: u64) {
        self.watermark.store(lsn, Ordering::Release);
    }
}

/// A read snapshot: per-table, per-group commit watermarks captured at
/// read start without latching.
#[derive(Debug, Clone, Default)]
pub struct Snapshot {
    tables: BTreeMap<String, Vec<u64>>,
}

impl Snapshot {
    pub(crate) fn capture<'a>(tables: impl Iterator<Item = &'a Table>) -> Self {
        let mut map = BTreeMap::new();
        for table in tables {
            map.insert(
                table.schema.table_name().to_string(),
                table.groups.iter().map(|g| g.commit_watermark()).collect(),
            );
        }
        Snapshot { tables: map }
    }

    /// Watermark for one group; 0 (nothing visible) for tables created
    /// after the snapshot.
    pub fn watermark(&self, table: &str, group_id: u32) -> u64 {
        self.tables
            .get(table)
            .and_then(|wms| wms.get(group_id as usize))
            .copied()
            .unwrap_or(0)
    }
}

/// Column access route resolved against a schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ColumnRoute {
    /// Index into the update-partition row (update-set order).
    Update(usize),
    /// Index into the read-only column arrays (read-only order).
    ReadOnly(usize),
}

pub(crate) fn resolve_column(schema: &TableSchema, name: &str) -> Result<ColumnRoute> {
    if schema.column(name).is_none() {
        return Err(Error::UnknownColumn(name.to_string()));
    }
    if schema.is_updatable(name) {
        let idx = schema
            .update_columns()
            .position(|(_, c)| c.name == name)
            .expect("checked above");
        Ok(ColumnRoute::Update(idx))
    } else {
        let idx = schema
            .readonly_columns()
            .position(|(_, c)| c.name == name)
            .expect("checked above");
        Ok(ColumnRoute::ReadOnly(idx))
    }
}

/// Inclusive range predicate over one column.
#[derive(Debug, Clone, PartialEq)]
pub struct RangePredicate {
    pub column: String,
    pub lo: Value,
    pub hi: Value,
}

impl RangePredicate {
    pub fn new(column: impl Into<String>, lo: impl Into<Value>, hi: impl Into<Value>) -> Self {
        RangePredicate {
            column: column.into(),
            lo: lo.into(),
            hi: hi.into(),
        }
    }

    /// Inclusive containment test; cross-type comparisons never match.
    pub fn matches_value(&self, value: &Value) -> bool {
        matches!(
            value.try_cmp(&self.lo),
            Some(std::cmp::Ordering::Greater | std::cmp::Ordering::Equal)
        ) && matches!(
            value.try_cmp(&self.hi),
            Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
        )
    }

    fn check_types(&self, schema: &TableSchema) -> Result<()> {
        let col = self
            .column_def(schema)
            .ok_or_else(|| Error::UnknownColumn(self.column.clone()))?;
        for bound in [&self.lo, &self.hi] {
            if bound.value_type() != col.value_type {
                return Err(Error::TypeMismatch(format!(
                    "predicate bound {} does not match column {} of type {}",
                    bound, col.name, col.value_type
                )));
            }
        }
        Ok(())
    }

    fn column_def<'a>(&self, schema: &'a TableSchema) -> Option<&'a crate::schema::ColumnDef> {
        schema.column(&self.column)
    }
}

/// A table handle: schema, partitioning, and its row groups. Safe to
/// share across threads; see the module docs for the latching contract.
pub struct Table {
    schema: TableSchema,
    partitioning: Partitioning,
    groups: Vec<RowGroup>,
}

impl Table {
    /// Builds an empty table. Tables used for transactional work are
    /// created through the engine catalog; a standalone table still
    /// serves reads, partitioning queries, and checkpoint restore.
    pub fn new(schema: TableSchema, num_groups: u32) -> Self {
        let partitioning = Partitioning::new(num_groups);
        let groups = (0..num_groups)
            .map(|gid| RowGroup {
                group_id: gid,
                key_range: partitioning.range_of(gid),
                watermark: AtomicU64::new(0),
                data: RwLock::new(GroupData::new(&schema)),
            })
            .collect();
        Table {
            schema,
            partitioning,
            groups,
        }
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn num_groups(&self) -> u32 {
        self.groups.len() as u32
    }

    pub fn group(&self, group_id: u32) -> &RowGroup {
        &self.groups[group_id as usize]
    }

    pub fn groups(&self) -> &[RowGroup] {
        &self.groups
    }

    /// The unique group whose range contains `key`. Total over int64, so
    /// this cannot fail.
    pub fn partition_for_key(&self, key: i64) -> u32 {
        self.partitioning.group_of(key)
    }

    /// Inserts a full row. Commit-path only: the caller holds the commit
    /// sequence and supplies the commit LSN that stamps the new position.
    pub(crate) fn apply_insert(&self, key: i64, row: &[Value], commit_lsn: u64) -> Result<u32> {
        self.schema.check_row(row)?;
        let gid = self.partition_for_key(key);
        let mut data = self.groups[gid as usize].data.write().unwrap();
        if data.positions.contains_key(&key) {
            return Err(Error::DuplicateKey(key));
        }
        let pos = data.position_lsns.len() as u32;
        let update_row: Vec<Value> = self
            .schema
            .update_columns()
            .map(|(i, _)| row[i].clone())
            .collect();
        for (slot, (i, _)) in self.schema.readonly_columns().enumerate() {
            data.readonly[slot].push(&row[i]);
        }
        data.validity.push(true);
        data.position_lsns.push(commit_lsn);
        data.update_rows.insert(key, update_row);
        data.positions.insert(
            key,
            PosEntry {
                pos,
                insert_lsn: commit_lsn,
            },
        );
        Ok(pos)
    }

    /// Replaces update-partition values for a live key. The read-only
    /// partition is never touched.
    pub(crate) fn apply_update(&self, key: i64, assignments: &[(String, Value)]) -> Result<()> {
        let resolved = self.resolve_assignments(assignments)?;
        let gid = self.partition_for_key(key);
        let mut data = self.groups[gid as usize].data.write().unwrap();
        if !data.positions.contains_key(&key) {
            return Err(Error::KeyNotFound(key));
        }
        let row = data.update_rows.get_mut(&key).expect("split invariant");
        for (idx, value) in resolved {
            row[idx] = value;
        }
        Ok(())
    }

    /// Validates update assignments against the schema and maps them to
    /// update-row slots. Rejects read-only and unknown columns and type
    /// mismatches.
    pub(crate) fn resolve_assignments(
        &self,
        assignments: &[(String, Value)],
    ) -> Result<Vec<(usize, Value)>> {
        let mut resolved = Vec::with_capacity(assignments.len());
        for (name, value) in assignments {
            let col = self
                .schema
                .column(name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            if !self.schema.is_updatable(name) {
                return Err(Error::NonUpdatableColumn(name.clone()));
            }
            if value.value_type() != col.value_type {
                return Err(Error::TypeMismatch(format!(
                    "column {} expects {}, got {}",
                    name,
                    col.value_type,
                    value.value_type()
                )));
            }
            let idx = self
                .schema
                .update_columns()
                .position(|(_, c)| c.name == *name)
                .expect("checked updatable");
            resolved.push((idx, value.clone()));
        }
        Ok(resolved)
    }

    /// Removes a live key: the update row goes away and the read-only
    /// position is tombstoned in the validity bitmap.
    pub(crate) fn apply_delete(&self, key: i64) -> Result<()> {
        let gid = self.partition_for_key(key);
        let mut data = self.groups[gid as usize].data.write().unwrap();
        let entry = data
            .positions
            .remove(&key)
            .ok_or(Error::KeyNotFound(key))?;
        data.validity.clear(entry.pos as usize);
        data.update_rows.remove(&key);
        Ok(())
    }

    /// Stitches the full row for `key` visible to `snap`, or `None`.
    pub fn point_get(&self, key: i64, snap: &Snapshot) -> Option<Vec<Value>> {
        let gid = self.partition_for_key(key);
        let wm = snap.watermark(self.schema.table_name(), gid);
        let data = self.groups[gid as usize].data.read().unwrap();
        let entry = data.positions.get(&key)?;
        if entry.insert_lsn > wm || !data.validity.get(entry.pos as usize) {
            return None;
        }
        Some(self.stitch(&data, key, entry.pos))
    }

    fn stitch(&self, data: &GroupData, key: i64, pos: u32) -> Vec<Value> {
        let update_row = &data.update_rows[&key];
        let mut out = Vec::with_capacity(self.schema.columns().len());
        let mut u = 0;
        let mut r = 0;
        for col in self.schema.columns() {
            if self.schema.is_updatable(&col.name) {
                out.push(update_row[u].clone());
                u += 1;
            } else {
                out.push(data.readonly[r].get(pos as usize));
                r += 1;
            }
        }
        out
    }

    /// Values of `column` over live, visible rows matching `predicate`.
    /// Read-only columns are read from their contiguous arrays; update
    /// columns from the row partition. The result multiset does not
    /// depend on where the columns are stored.
    pub fn scan_column(
        &self,
        column: &str,
        predicate: Option<&RangePredicate>,
        snap: &Snapshot,
    ) -> Result<Vec<Value>> {
        let target = resolve_column(&self.schema, column)?;
        let pred = predicate
            .map(|p| -> Result<(ColumnRoute, &RangePredicate)> {
                p.check_types(&self.schema)?;
                Ok((resolve_column(&self.schema, &p.column)?, p))
            })
            .transpose()?;
        let mut out = Vec::new();
        for group in &self.groups {
            let wm = snap.watermark(self.schema.table_name(), group.group_id);
            let data = group.data.read().unwrap();
            scan_group(&data, wm, target, pred, &mut |v| out.push(v));
        }
        Ok(out)
    }

    /// Checks the structural invariants of every group: array alignment,
    /// the update/read-only split (a live key is in both partitions or
    /// neither), position validity, range membership, and LSN
    /// monotonicity.
    pub fn verify_integrity(&self) -> Result<()> {
        for group in &self.groups {
            let data = group.data.read().unwrap();
            let n = data.position_lsns.len();
            if data.validity.len() != n {
                return Err(Error::Integrity(format!(
                    "group {}: bitmap len {} != positions {}",
                    group.group_id,
                    data.validity.len(),
                    n
                )));
            }
            for (slot, col) in data.readonly.iter().enumerate() {
                if col.len() != n {
                    return Err(Error::Integrity(format!(
                        "group {}: readonly column {} len {} != {}",
                        group.group_id,
                        slot,
                        col.len(),
                        n
                    )));
                }
            }
            if !data.position_lsns.windows(2).all(|w| w[0] <= w[1]) {
                return Err(Error::Integrity(format!(
                    "group {}: position LSNs not monotone",
                    group.group_id
                )));
            }
            let mut valid_positions = 0usize;
            for pos in 0..n {
                if data.validity.get(pos) {
                    valid_positions += 1;
                }
            }
            if valid_positions != data.positions.len()
                || data.positions.len() != data.update_rows.len()
            {
                return Err(Error::Integrity(format!(
                    "group {}: {} valid positions, {} mapped keys, {} update rows",
                    group.group_id,
                    valid_positions,
                    data.positions.len(),
                    data.update_rows.len()
                )));
            }
            for (key, entry) in &data.positions {
                if !group.key_range.contains(*key) {
                    return Err(Error::Integrity(format!(
                        "group {}: key {} outside range",
                        group.group_id, key
                    )));
                }
                if entry.pos as usize >= n || !data.validity.get(entry.pos as usize) {
                    return Err(Error::Integrity(format!(
                        "group {}: key {} maps to dead position {}",
                        group.group_id, key, entry.pos
                    )));
                }
                if !data.update_rows.contains_key(key) {
                    return Err(Error::Integrity(format!(
                        "group {}: key {} present in read-only partition only",
                        group.group_id, key
                    )));
                }
            }
        }
        Ok(())
    }

    /// Live keys visible to `snap`, ascending. Groups cover ascending
    /// ranges, so walking them in id order yields key order.
    pub fn visible_keys(&self, snap: &Snapshot) -> Vec<i64> {
        let mut keys = Vec::new();
        for group in &self.groups {
            let wm = snap.watermark(self.schema.table_name(), group.group_id);
            let data = group.data.read().unwrap();
            for (key, entry) in &data.positions {
                if entry.insert_lsn <= wm && data.validity.get(entry.pos as usize) {
                    keys.push(*key);
                }
            }
        }
        keys
    }
}

/// Feeds `sink` the target-column value of every live row in one group
/// that is visible at `wm` and passes the predicate.
///
/// When the target and predicate both live in the read-only partition
/// the scan walks the arrays positionally; otherwise it walks the
/// key→position map and stitches across partitions.
pub(crate) fn scan_group(
    data: &GroupData,
    wm: u64,
    target: ColumnRoute,
    pred: Option<(ColumnRoute, &RangePredicate)>,
    sink: &mut dyn FnMut(Value),
) {
    let positional = matches!(target, ColumnRoute::ReadOnly(_))
        && pred.is_none_or(|(route, _)| matches!(route, ColumnRoute::ReadOnly(_)));
    if positional {
        let cutoff = data.visible_len(wm);
        let ColumnRoute::ReadOnly(t) = target else {
            unreachable!()
        };
        for pos in 0..cutoff {
            if !data.validity.get(pos) {
                continue;
            }
            if let Some((ColumnRoute::ReadOnly(p), predicate)) = pred {
                if !predicate.matches_value(&data.readonly[p].get(pos)) {
                    continue;
                }
            }
            sink(data.readonly[t].get(pos));
        }
    } else {
        for (key, entry) in &data.positions {
            if entry.insert_lsn > wm || !data.validity.get(entry.pos as usize) {
                continue;
            }
            if let Some((route, predicate)) = pred {
                let v = read_route(data, *key, entry.pos, route);
                if !predicate.matches_value(&v) {
                    continue;
                }
            }
            sink(read_route(data, *key, entry.pos, target));
        }
    }
}

fn read_route(data: &GroupData, key: i64, pos: u32, route: ColumnRoute) -> Value {
    match route {
        ColumnRoute::Update(idx) => data.update_rows[&key][idx].clone(),
        ColumnRoute::ReadOnly(idx) => data.readonly[idx].get(pos as usize),
    }
}

#[cfg(test)]
mod tests;
