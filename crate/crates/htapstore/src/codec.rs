//! Little-endian binary encoding shared by the log, catalog, and
//! checkpoint formats.
//!
//! Strings and byte blobs are length-prefixed: u16 for identifiers,
//! u32 for payload-sized data. Values carry a one-byte type tag
//! (0 int64, 1 float64, 2 bool, 3 utf8).

use crate::error::{Error, Result};
use crate::value::{Value, ValueType};

pub(crate) fn put_u16(buf: &mut Vec<u8>, v: u16) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_i64(buf: &mut Vec<u8>, v: i64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(buf: &mut Vec<u8>, v: f64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_name(buf: &mut Vec<u8>, name: &str) {
    debug_assert!(name.len() <= u16::MAX as usize);
    put_u16(buf, name.len() as u16);
    buf.extend_from_slice(name.as_bytes());
}

pub(crate) fn put_value(buf: &mut Vec<u8>, value: &Value) {
    buf.push(value.value_type().code());
    match value {
        Value::Int(v) => put_i64(buf, *v),
        Value::Float(v) => put_f64(buf, *v),
        Value::Bool(v) => buf.push(u8::from(*v)),
        Value::Str(v) => {
            put_u32(buf, v.len() as u32);
            buf.extend_from_slice(v.as_bytes());
        }
    }
}

/// Cursor over a byte slice; every read checks bounds and reports a
/// uniform corruption error.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    fn corrupt(&self, msg: &str) -> Error {
        Error::Corrupt {
            what: self.what,
            detail: format!("{} at byte {}", msg, self.pos),
        }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(self.corrupt("unexpected end of data"));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn name(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| self.corrupt("invalid utf8 in name"))
    }

    pub(crate) fn value(&mut self) -> Result<Value> {
        let tag = self.u8()?;
        let ty = ValueType::from_code(tag).ok_or_else(|| self.corrupt("bad value tag"))?;
        Ok(match ty {
            ValueType::Int64 => Value::Int(self.i64()?),
            ValueType::Float64 => Value::Float(self.f64()?),
            ValueType::Bool => Value::Bool(self.u8()? != 0),
            ValueType::Utf8 => {
                let len = self.u32()? as usize;
                let bytes = self.take(len)?;
                Value::Str(
                    String::from_utf8(bytes.to_vec())
                        .map_err(|_| self.corrupt("invalid utf8 in value"))?,
                )
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_value() -> impl Strategy<Value = Value> {
        prop_oneof![
            any::<i64>().prop_map(Value::Int),
            any::<f64>().prop_map(Value::Float),
            any::<bool>().prop_map(Value::Bool),
            "[a-zA-Z0-9 _-]{0,40}".prop_map(Value::Str),
        ]
    }

    proptest! {
        #[test]
        fn value_codec_round_trips(v in arb_value()) {
            let mut buf = Vec::new();
            put_value(&mut buf, &v);
            let mut r = Reader::new(&buf, "test");
            let back = r.value().unwrap();
            prop_assert!(r.is_empty());
            match (v, back) {
                (Value::Float(a), Value::Float(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }
}
