//! On-disk checkpoint format for fast-start and state comparison.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! file   := table_count u32, table*            (tables in name order)
//! table  := magic "HTSC", version u16, schema, num_groups u32, group*
//! schema := name, ncols u16, (name, type u8)*, pk name,
//!           nupdate u16, name*                 (update set, sorted)
//! name   := len u16, utf8 bytes
//! group  := body_len u32, body, crc32 u32      (crc over body)
//! body   := group_id u32, range lo i64, range hi i64, watermark u64,
//!           update partition  (row_count u32, (key i64, nvals u16, tagged value*)*),
//!           read-only columns (type u8, len u32, packed values)*,
//!           validity bitmap   (len_bits u32, words u64*),
//!           key map           (count u32, (key i64, pos u32, insert_lsn u64)*),
//!           position lsns     (len u32, u64*)
//! ```
//!
//! The final group of a table stores `i64::MAX` as its upper bound and
//! is inclusive of it (`2^63` is not representable). String columns are
//! packed as `offsets (len+1) u32*, byte_count u32, bytes`. The key map
//! and LSN arrays travel with each group so a restored table resumes
//! with identical visibility; serialization walks ordered maps, so a
//! given state always produces identical bytes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::codec::{put_i64, put_name, put_u16, put_u32, put_u64, put_value, Reader};
use crate::error::{Error, Result};
use crate::schema::{ColumnDef, TableSchema};
use crate::value::ValueType;

use super::{Bitmap, ColumnArray, PosEntry, StrArray, Table};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"HTSC";
const CHECKPOINT_VERSION: u16 = 1;

pub(crate) fn encode_schema(buf: &mut Vec<u8>, schema: &TableSchema) {
    put_name(buf, schema.table_name());
    put_u16(buf, schema.columns().len() as u16);
    for col in schema.columns() {
        put_name(buf, &col.name);
        buf.push(col.value_type.code());
    }
    put_name(buf, schema.primary_key());
    put_u16(buf, schema.update_set().len() as u16);
    for name in schema.update_set() {
        put_name(buf, name);
    }
}

pub(crate) fn decode_schema(r: &mut Reader<'_>) -> Result<TableSchema> {
    let table_name = r.name()?;
    let ncols = r.u16()? as usize;
    let mut columns = Vec::with_capacity(ncols);
    for _ in 0..ncols {
        let name = r.name()?;
        let ty = ValueType::from_code(r.u8()?)
            .ok_or_else(|| Error::CorruptCheckpoint("bad column type".into()))?;
        columns.push(ColumnDef::new(name, ty));
    }
    let pk = r.name()?;
    let nupdate = r.u16()? as usize;
    let mut update_set = Vec::with_capacity(nupdate);
    for _ in 0..nupdate {
        update_set.push(r.name()?);
    }
    TableSchema::new(table_name, columns, pk, update_set)
}

fn encode_group(table: &Table, group_id: u32) -> Vec<u8> {
    let group = table.group(group_id);
    let data = group.data.read().unwrap();
    let mut body = Vec::new();
    put_u32(&mut body, group_id);
    put_i64(&mut body, group.key_range().lo);
    put_i64(&mut body, group.key_range().hi.unwrap_or(i64::MAX));
    put_u64(&mut body, group.commit_watermark());

    put_u32(&mut body, data.update_rows.len() as u32);
    for (key, row) in &data.update_rows {
        put_i64(&mut body, *key);
        put_u16(&mut body, row.len() as u16);
        for value in row {
            put_value(&mut body, value);
        }
    }

    for col in &data.readonly {
        match col {
            ColumnArray::Int(v) => {
                body.push(ValueType::Int64.code());
                put_u32(&mut body, v.len() as u32);
                for x in v {
                    put_i64(&mut body, *x);
                }
            }
            ColumnArray::Float(v) => {
                body.push(ValueType::Float64.code());
                put_u32(&mut body, v.len() as u32);
                for x in v {
                    body.extend_from_slice(&x.to_le_bytes());
                }
            }
            ColumnArray::Bool(v) => {
                body.push(ValueType::Bool.code());
                put_u32(&mut body, v.len() as u32);
                for x in v {
                    body.push(u8::from(*x));
                }
            }
            ColumnArray::Str(v) => {
                body.push(ValueType::Utf8.code());
                put_u32(&mut body, v.len() as u32);
                let (offsets, bytes) = v.parts();
                // A never-written column has no leading 0 offset yet.
                if offsets.is_empty() {
                    put_u32(&mut body, 0);
                } else {
                    for ofs in offsets {
                        put_u32(&mut body, *ofs);
                    }
                }
                put_u32(&mut body, bytes.len() as u32);
                body.extend_from_slice(bytes);
            }
        }
    }

    put_u32(&mut body, data.validity.len() as u32);
    for word in data.validity.words() {
        put_u64(&mut body, *word);
    }

    put_u32(&mut body, data.positions.len() as u32);
    for (key, entry) in &data.positions {
        put_i64(&mut body, *key);
        put_u32(&mut body, entry.pos);
        put_u64(&mut body, entry.insert_lsn);
    }

    put_u32(&mut body, data.position_lsns.len() as u32);
    for lsn in &data.position_lsns {
        put_u64(&mut body, *lsn);
    }

    let crc = crc32fast::hash(&body);
    let mut out = Vec::with_capacity(body.len() + 8);
    put_u32(&mut out, body.len() as u32);
    out.extend_from_slice(&body);
    put_u32(&mut out, crc);
    out
}

fn decode_group(table: &Table, body: &[u8]) -> Result<()> {
    let mut r = Reader::new(body, "checkpoint group");
    let group_id = r.u32()?;
    let lo = r.i64()?;
    let _hi = r.i64()?;
    let watermark = r.u64()?;
    if group_id >= table.num_groups() {
        return Err(Error::CorruptCheckpoint(format!(
            "group id {group_id} out of range"
        )));
    }
    let group = table.group(group_id);
    if group.key_range().lo != lo {
        return Err(Error::CorruptCheckpoint(format!(
            "group {group_id} range mismatch"
        )));
    }

    let mut update_rows = BTreeMap::new();
    let row_count = r.u32()? as usize;
    for _ in 0..row_count {
        let key = r.i64()?;
        let nvals = r.u16()? as usize;
        let mut row = Vec::with_capacity(nvals);
        for _ in 0..nvals {
            row.push(r.value()?);
        }
        update_rows.insert(key, row);
    }

    let n_readonly = table.schema().readonly_columns().count();
    let mut readonly = Vec::with_capacity(n_readonly);
    for _ in 0..n_readonly {
        let ty = ValueType::from_code(r.u8()?)
            .ok_or_else(|| Error::CorruptCheckpoint("bad column type".into()))?;
        let len = r.u32()? as usize;
        let col = match ty {
            ValueType::Int64 => {
                let mut v = Vec::with_capacity(len);
                for _ in 0..len {
                    v.push(r.i64()?);
                }
                ColumnArray::Int(v)
            }
            ValueType::Float64 => {
                let mut v = Vec::with_capacity(len);
                for _ in 0..len {
                    v.push(r.f64()?);
                }
                ColumnArray::Float(v)
            }
            ValueType::Bool => {
                let mut v = Vec::with_capacity(len);
                for _ in 0..len {
                    v.push(r.u8()? != 0);
                }
                ColumnArray::Bool(v)
            }
            ValueType::Utf8 => {
                let mut offsets = Vec::with_capacity(len + 1);
                for _ in 0..len + 1 {
                    offsets.push(r.u32()?);
                }
                let nbytes = r.u32()? as usize;
                let bytes = r.take(nbytes)?.to_vec();
                ColumnArray::Str(StrArray::from_parts(offsets, bytes))
            }
        };
        readonly.push(col);
    }

    let len_bits = r.u32()? as usize;
    let nwords = len_bits.div_ceil(64);
    let mut words = Vec::with_capacity(nwords);
    for _ in 0..nwords {
        words.push(r.u64()?);
    }
    let validity = Bitmap::from_parts(words, len_bits);

    let mut positions = BTreeMap::new();
    let count = r.u32()? as usize;
    for _ in 0..count {
        let key = r.i64()?;
        let pos = r.u32()?;
        let insert_lsn = r.u64()?;
        positions.insert(key, PosEntry { pos, insert_lsn });
    }

    let nlsns = r.u32()? as usize;
    let mut position_lsns = Vec::with_capacity(nlsns);
    for _ in 0..nlsns {
        position_lsns.push(r.u64()?);
    }

    if !r.is_empty() {
        return Err(Error::CorruptCheckpoint("trailing bytes in group".into()));
    }

    let mut data = group.data.write().unwrap();
    data.update_rows = update_rows;
    data.readonly = readonly;
    data.validity = validity;
    data.positions = positions;
    data.position_lsns = position_lsns;
    drop(data);
    group.set_watermark_for_restore(watermark);
    Ok(())
}

/// Serializes `tables` (already sorted by name) to `path`. The same
/// logical state always yields identical bytes.
pub fn write_checkpoint<'a>(
    path: &Path,
    tables: impl ExactSizeIterator<Item = &'a Table>,
) -> Result<()> {
    let mut out = Vec::new();
    put_u32(&mut out, tables.len() as u32);
    for table in tables {
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u16(&mut out, CHECKPOINT_VERSION);
        encode_schema(&mut out, table.schema());
        put_u32(&mut out, table.num_groups());
        for gid in 0..table.num_groups() {
            out.extend_from_slice(&encode_group(table, gid));
        }
    }
    let mut file = File::create(path)?;
    file.write_all(&out)?;
    file.sync_all()?;
    Ok(())
}

/// Reads a checkpoint back into freshly built tables.
pub fn read_checkpoint(path: &Path) -> Result<Vec<Table>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader::new(&bytes, "checkpoint");
    let table_count = r.u32()? as usize;
    let mut tables = Vec::with_capacity(table_count);
    for _ in 0..table_count {
        let magic = r.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic".into()));
        }
        let version = r.u16()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported version {version}"
            )));
        }
        let schema = decode_schema(&mut r)?;
        let num_groups = r.u32()?;
        if num_groups == 0 {
            return Err(Error::CorruptCheckpoint("zero groups".into()));
        }
        let table = Table::new(schema, num_groups);
        for _ in 0..num_groups {
            let body_len = r.u32()? as usize;
            let body = r.take(body_len)?;
            let crc = r.u32()?;
            if crc32fast::hash(body) != crc {
                return Err(Error::CorruptCheckpoint("group crc mismatch".into()));
            }
            decode_group(&table, body)?;
        }
        table.verify_integrity()?;
        tables.push(table);
    }
    Ok(tables)
}
