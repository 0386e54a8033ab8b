//! Cell values and column types.
//!
//! The engine supports four primitive value types. Strings in the
//! column-format partitions are stored in a per-column append-only byte
//! heap with offsets; everywhere else they are plain `String`s.

use std::fmt;

/// The type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueType {
    Int64,
    Float64,
    Bool,
    Utf8,
}

impl ValueType {
    pub(crate) fn code(self) -> u8 {
        match self {
            ValueType::Int64 => 0,
            ValueType::Float64 => 1,
            ValueType::Bool => 2,
            ValueType::Utf8 => 3,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<ValueType> {
        match code {
            0 => Some(ValueType::Int64),
            1 => Some(ValueType::Float64),
            2 => Some(ValueType::Bool),
            3 => Some(ValueType::Utf8),
            _ => None,
        }
    }

    /// True for types that SUM/AVG accept.
    pub fn is_numeric(self) -> bool {
        matches!(self, ValueType::Int64 | ValueType::Float64)
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ValueType::Int64 => "int64",
            ValueType::Float64 => "float64",
            ValueType::Bool => "bool",
            ValueType::Utf8 => "utf8",
        };
        f.write_str(name)
    }
}

/// A single cell value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Int64,
            Value::Float(_) => ValueType::Float64,
            Value::Bool(_) => ValueType::Bool,
            Value::Str(_) => ValueType::Utf8,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(v) => Some(v),
            _ => None,
        }
    }

    /// Total order within one type. Floats use IEEE total ordering so MAX
    /// and MIN stay deterministic; cross-type comparison is a caller bug
    /// and returns `None`.
    pub fn try_cmp(&self, other: &Value) -> Option<std::cmp::Ordering> {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Float(a), Value::Float(b)) => Some(a.total_cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Str(a), Value::Str(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(v) => write!(f, "{v}"),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn type_codes_round_trip() {
        for t in [
            ValueType::Int64,
            ValueType::Float64,
            ValueType::Bool,
            ValueType::Utf8,
        ] {
            assert_eq!(ValueType::from_code(t.code()), Some(t));
        }
        assert_eq!(ValueType::from_code(9), None);
    }

    #[test]
    fn cross_type_comparison_is_none() {
        assert!(Value::Int(1).try_cmp(&Value::Float(1.0)).is_none());
    }
}
