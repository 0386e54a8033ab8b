//! Log record layout.
//!
//! The log file opens with a 6-byte header (magic `HTWL`, version u16)
//! and is followed by records framed as, all little-endian:
//!
//! ```text
//! record := len u32, body, crc32 u32          (len and crc cover body)
//! body   := lsn u64, txn_id u64, kind u8,
//!           table name (len u16, utf8),
//!           group_id u32, key i64,            (sentinels for commit/rollback)
//!           payload (len u32, bytes)
//! ```
//!
//! Inserts and deletes are split into a row-part and a column-part
//! record; updates are a single record because only the row-format
//! update partition is touched. Commit and rollback records carry no
//! table, group, key, or payload (sentinel fields keep the frame fixed).

use crate::codec::{put_i64, put_name, put_u16, put_u32, put_u64, put_value, Reader};
use crate::error::{Error, Result};
use crate::value::Value;

pub const LOG_MAGIC: &[u8; 4] = b"HTWL";
pub const LOG_VERSION: u16 = 1;
pub const LOG_HEADER_LEN: u64 = 6;

/// Upper bound on a single record body; a larger length prefix is
/// treated as a torn/invalid tail.
pub(crate) const MAX_RECORD_LEN: u32 = 64 << 20;

const KEY_SENTINEL: i64 = i64::MIN;
const GROUP_SENTINEL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordKind {
    UpdateRow,
    InsertRowPart,
    InsertColPart,
    DeleteRowPart,
    DeleteColPart,
    TxnCommit,
    TxnRollback,
}

impl RecordKind {
    fn code(self) -> u8 {
        match self {
            RecordKind::UpdateRow => 1,
            RecordKind::InsertRowPart => 2,
            RecordKind::InsertColPart => 3,
            RecordKind::DeleteRowPart => 4,
            RecordKind::DeleteColPart => 5,
            RecordKind::TxnCommit => 6,
            RecordKind::TxnRollback => 7,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => RecordKind::UpdateRow,
            2 => RecordKind::InsertRowPart,
            3 => RecordKind::InsertColPart,
            4 => RecordKind::DeleteRowPart,
            5 => RecordKind::DeleteColPart,
            6 => RecordKind::TxnCommit,
            7 => RecordKind::TxnRollback,
            _ => return None,
        })
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, RecordKind::TxnCommit | RecordKind::TxnRollback)
    }

    /// Column-part records are the ones log compression may drop.
    pub fn is_col_part(self) -> bool {
        matches!(self, RecordKind::InsertColPart | RecordKind::DeleteColPart)
    }
}

/// Kind-specific record payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Update assignments: (column name, new value).
    Assignments(Vec<(String, Value)>),
    /// Partition values in schema order: update-set columns for row
    /// parts, read-only columns for column parts.
    Values(Vec<Value>),
    None,
}

/// A record as submitted to `append`: everything but the LSN and CRC,
/// which the log assigns.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordDraft {
    pub txn_id: u64,
    pub kind: RecordKind,
    pub table: String,
    pub group_id: u32,
    pub key: Option<i64>,
    pub payload: Payload,
}

impl RecordDraft {
    pub fn terminal(txn_id: u64, kind: RecordKind) -> Self {
        debug_assert!(kind.is_terminal());
        RecordDraft {
            txn_id,
            kind,
            table: String::new(),
            group_id: GROUP_SENTINEL,
            key: None,
            payload: Payload::None,
        }
    }
}

/// A fully framed record as read back from the log.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub lsn: u64,
    pub txn_id: u64,
    pub kind: RecordKind,
    pub table: String,
    pub group_id: u32,
    pub key: Option<i64>,
    pub payload: Payload,
}

fn encode_payload(payload: &Payload) -> Vec<u8> {
    let mut buf = Vec::new();
    match payload {
        Payload::Assignments(assignments) => {
            put_u16(&mut buf, assignments.len() as u16);
            for (name, value) in assignments {
                put_name(&mut buf, name);
                put_value(&mut buf, value);
            }
        }
        Payload::Values(values) => {
            put_u16(&mut buf, values.len() as u16);
            for value in values {
                put_value(&mut buf, value);
            }
        }
        Payload::None => {}
    }
    buf
}

fn decode_payload(kind: RecordKind, bytes: &[u8]) -> Result<Payload> {
    let mut r = Reader::new(bytes, "log payload");
    let payload = match kind {
        RecordKind::UpdateRow => {
            let count = r.u16()? as usize;
            let mut assignments = Vec::with_capacity(count);
            for _ in 0..count {
                let name = r.name()?;
                let value = r.value()?;
                assignments.push((name, value));
            }
            Payload::Assignments(assignments)
        }
        RecordKind::InsertRowPart | RecordKind::InsertColPart => {
            let count = r.u16()? as usize;
            let mut values = Vec::with_capacity(count);
            for _ in 0..count {
                values.push(r.value()?);
            }
            Payload::Values(values)
        }
        _ => Payload::None,
    };
    if !r.is_empty() {
        return Err(Error::Corrupt {
            what: "log payload",
            detail: "trailing bytes".into(),
        });
    }
    Ok(payload)
}

/// Frames a draft with its assigned LSN: `[len][body][crc]`.
pub(crate) fn encode_record(lsn: u64, draft: &RecordDraft) -> Vec<u8> {
    let mut body = Vec::new();
    put_u64(&mut body, lsn);
    put_u64(&mut body, draft.txn_id);
    body.push(draft.kind.code());
    put_name(&mut body, &draft.table);
    put_u32(&mut body, draft.group_id);
    put_i64(&mut body, draft.key.unwrap_or(KEY_SENTINEL));
    let payload = encode_payload(&draft.payload);
    put_u32(&mut body, payload.len() as u32);
    body.extend_from_slice(&payload);

    let crc = crc32fast::hash(&body);
    let mut out = Vec::with_capacity(body.len() + 8);
    put_u32(&mut out, body.len() as u32);
    out.extend_from_slice(&body);
    put_u32(&mut out, crc);
    out
}

/// Decodes one crc-validated body. Fails only on malformed contents,
/// which the scanner treats as an invalid record (stop point).
pub(crate) fn decode_body(body: &[u8]) -> Result<LogRecord> {
    let mut r = Reader::new(body, "log record");
    let lsn = r.u64()?;
    let txn_id = r.u64()?;
    let kind = RecordKind::from_code(r.u8()?).ok_or(Error::Corrupt {
        what: "log record",
        detail: "unknown record kind".into(),
    })?;
    let table = r.name()?;
    let group_id = r.u32()?;
    let raw_key = r.i64()?;
    let payload_len = r.u32()? as usize;
    let payload_bytes = r.take(payload_len)?;
    if !r.is_empty() {
        return Err(Error::Corrupt {
            what: "log record",
            detail: "trailing bytes".into(),
        });
    }
    let key = if kind.is_terminal() {
        None
    } else {
        Some(raw_key)
    };
    let payload = decode_payload(kind, payload_bytes)?;
    Ok(LogRecord {
        lsn,
        txn_id,
        kind,
        table,
        group_id,
        key,
        payload,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_layout_is_pinned() {
        let draft = RecordDraft {
            txn_id: 7,
            kind: RecordKind::UpdateRow,
            table: "t".into(),
            group_id: 3,
            key: Some(9),
            payload: Payload::Assignments(vec![("b".into(), Value::Int(5))]),
        };
        let bytes = encode_record(1, &draft);

        #[rustfmt::skip]
        let mut body = vec![
            1, 0, 0, 0, 0, 0, 0, 0,             // lsn
            7, 0, 0, 0, 0, 0, 0, 0,             // txn_id
            1,                                  // kind = UpdateRow
            1, 0, b't',                         // table name
            3, 0, 0, 0,                         // group_id
            9, 0, 0, 0, 0, 0, 0, 0,             // key
            14, 0, 0, 0,                        // payload len
            1, 0,                               // assignment count
            1, 0, b'b',                         // column name
            0, 5, 0, 0, 0, 0, 0, 0, 0,          // tagged int64 value
        ];
        let crc = crc32fast::hash(&body);
        let mut expected = (body.len() as u32).to_le_bytes().to_vec();
        expected.append(&mut body);
        expected.extend_from_slice(&crc.to_le_bytes());
        assert_eq!(bytes, expected);
    }

    #[test]
    fn round_trip_all_kinds() {
        let drafts = [RecordDraft {
                txn_id: 1,
                kind: RecordKind::InsertRowPart,
                table: "customer".into(),
                group_id: 0,
                key: Some(-5),
                payload: Payload::Values(vec![
                    Value::Int(-5),
                    Value::Float(2.5),
                    Value::Str("d".into()),
                ]),
            },
            RecordDraft {
                txn_id: 1,
                kind: RecordKind::InsertColPart,
                table: "customer".into(),
                group_id: 0,
                key: Some(-5),
                payload: Payload::Values(vec![Value::Bool(true)]),
            },
            RecordDraft {
                txn_id: 2,
                kind: RecordKind::DeleteRowPart,
                table: "customer".into(),
                group_id: 1,
                key: Some(8),
                payload: Payload::None,
            },
            RecordDraft::terminal(1, RecordKind::TxnCommit),
            RecordDraft::terminal(2, RecordKind::TxnRollback)];
        for (i, draft) in drafts.iter().enumerate() {
            let lsn = i as u64 + 1;
            let bytes = encode_record(lsn, draft);
            let len = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
            let body = &bytes[4..4 + len];
            let rec = decode_body(body).unwrap();
            assert_eq!(rec.lsn, lsn);
            assert_eq!(rec.txn_id, draft.txn_id);
            assert_eq!(rec.kind, draft.kind);
            assert_eq!(rec.table, draft.table);
            assert_eq!(rec.key, draft.key);
            assert_eq!(rec.payload, draft.payload);
        }
    }
}
