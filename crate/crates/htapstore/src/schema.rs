//! Table schemas with the update / read-only column split.
//!
//! Every column of a table lives in exactly one of two partition kinds:
//! columns named in the `update_set` go to the row-format update
//! partition, everything else goes to the column-format read-only
//! partition. The primary key is a mandatory `int64` column and must be
//! part of the update set so point operations and deletes resolve in the
//! row partition first.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::value::{Value, ValueType};

/// Where a column is physically stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionKind {
    /// Row-format update partition.
    Update,
    /// Column-format read-only partition.
    ReadOnly,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnDef {
    pub name: String,
    pub value_type: ValueType,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, value_type: ValueType) -> Self {
        ColumnDef {
            name: name.into(),
            value_type,
        }
    }
}

/// A validated table schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableSchema {
    table_name: String,
    columns: Vec<ColumnDef>,
    primary_key: String,
    update_set: BTreeSet<String>,
}

impl TableSchema {
    /// Builds a schema, checking every invariant. `update_set` must
    /// contain the primary key and only existing column names; column
    /// names must be unique and non-empty; the primary key must be int64.
    pub fn new(
        table_name: impl Into<String>,
        columns: Vec<ColumnDef>,
        primary_key: impl Into<String>,
        update_set: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let table_name = table_name.into();
        let primary_key = primary_key.into();
        let update_set: BTreeSet<String> = update_set.into_iter().collect();

        if table_name.is_empty() {
            return Err(Error::InvalidSchema("table name is empty".into()));
        }
        if columns.is_empty() {
            return Err(Error::InvalidSchema("no columns".into()));
        }
        let mut seen = BTreeSet::new();
        for col in &columns {
            if col.name.is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(col.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate column name: {}",
                    col.name
                )));
            }
        }
        let pk_col = columns
            .iter()
            .find(|c| c.name == primary_key)
            .ok_or_else(|| {
                Error::InvalidSchema(format!("primary key {primary_key} is not a column"))
            })?;
        if pk_col.value_type != ValueType::Int64 {
            return Err(Error::InvalidSchema(format!(
                "primary key {primary_key} must be int64, got {}",
                pk_col.value_type
            )));
        }
        if !update_set.contains(&primary_key) {
            return Err(Error::InvalidSchema(format!(
                "primary key {primary_key} must be in the update set"
            )));
        }
        for name in &update_set {
            if !seen.contains(name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "update set names unknown column: {name}"
                )));
            }
        }

        Ok(TableSchema {
            table_name,
            columns,
            primary_key,
            update_set,
        })
    }

    pub fn table_name(&self) -> &str {
        &self.table_name
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn primary_key(&self) -> &str {
        &self.primary_key
    }

    pub fn update_set(&self) -> &BTreeSet<String> {
        &self.update_set
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn is_updatable(&self, name: &str) -> bool {
        self.update_set.contains(name)
    }

    /// The partition a column is stored in, or `None` for unknown columns.
    pub fn partition_of(&self, name: &str) -> Option<PartitionKind> {
        self.column(name).map(|c| {
            if self.is_updatable(&c.name) {
                PartitionKind::Update
            } else {
                PartitionKind::ReadOnly
            }
        })
    }

    /// Index of the primary key within the full column list.
    pub fn primary_key_index(&self) -> usize {
        self.column_index(&self.primary_key)
            .expect("validated at construction")
    }

    /// Update-partition columns in schema order, as (full-row index, def).
    pub fn update_columns(&self) -> impl Iterator<Item = (usize, &ColumnDef)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| self.is_updatable(&c.name))
    }

    /// Read-only-partition columns in schema order, as (full-row index, def).
    pub fn readonly_columns(&self) -> impl Iterator<Item = (usize, &ColumnDef)> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| !self.is_updatable(&c.name))
    }

    /// Checks that a full row matches the schema: one value per column,
    /// each of the declared type.
    pub fn check_row(&self, row: &[Value]) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::TypeMismatch(format!(
                "row has {} values, schema {} declares {} columns",
                row.len(),
                self.table_name,
                self.columns.len()
            )));
        }
        for (col, value) in self.columns.iter().zip(row) {
            if value.value_type() != col.value_type {
                return Err(Error::TypeMismatch(format!(
                    "column {} expects {}, got {}",
                    col.name,
                    col.value_type,
                    value.value_type()
                )));
            }
        }
        Ok(())
    }

    /// Extracts the primary key from a full row.
    pub fn row_key(&self, row: &[Value]) -> Result<i64> {
        row.get(self.primary_key_index())
            .and_then(Value::as_int)
            .ok_or_else(|| Error::TypeMismatch("primary key must be int64".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn customer_schema() -> TableSchema {
        TableSchema::new(
            "customer",
            vec![
                ColumnDef::new("c_id", ValueType::Int64),
                ColumnDef::new("c_balance", ValueType::Float64),
                ColumnDef::new("c_data", ValueType::Utf8),
                ColumnDef::new("c_first", ValueType::Utf8),
                ColumnDef::new("c_last", ValueType::Utf8),
                ColumnDef::new("c_discount", ValueType::Float64),
            ],
            "c_id",
            ["c_id", "c_balance", "c_data"].map(String::from),
        )
        .unwrap()
    }

    #[test]
    fn customer_split_matches_declaration() {
        let schema = customer_schema();
        assert_eq!(schema.partition_of("c_balance"), Some(PartitionKind::Update));
        assert_eq!(schema.partition_of("c_data"), Some(PartitionKind::Update));
        assert_eq!(schema.partition_of("c_first"), Some(PartitionKind::ReadOnly));
        assert_eq!(schema.partition_of("c_discount"), Some(PartitionKind::ReadOnly));
        assert_eq!(schema.partition_of("nope"), None);
        let update: Vec<&str> = schema.update_columns().map(|(_, c)| c.name.as_str()).collect();
        assert_eq!(update, vec!["c_id", "c_balance", "c_data"]);
    }

    #[test]
    fn update_set_must_contain_primary_key() {
        let err = TableSchema::new(
            "t",
            vec![
                ColumnDef::new("id", ValueType::Int64),
                ColumnDef::new("v", ValueType::Int64),
            ],
            "id",
            ["v".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchema(_)), "got {err}");
    }

    #[test]
    fn primary_key_must_be_int64() {
        let err = TableSchema::new(
            "t",
            vec![ColumnDef::new("id", ValueType::Utf8)],
            "id",
            ["id".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchema(_)));
    }

    #[test]
    fn duplicate_and_empty_column_names_rejected() {
        let err = TableSchema::new(
            "t",
            vec![
                ColumnDef::new("id", ValueType::Int64),
                ColumnDef::new("id", ValueType::Int64),
            ],
            "id",
            ["id".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchema(_)));

        let err = TableSchema::new(
            "t",
            vec![ColumnDef::new("", ValueType::Int64)],
            "",
            ["".to_string()],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidSchema(_)));
    }

    #[test]
    fn check_row_validates_arity_and_types() {
        let schema = customer_schema();
        let ok = vec![
            Value::Int(1),
            Value::Float(10.0),
            Value::Str("d".into()),
            Value::Str("f".into()),
            Value::Str("l".into()),
            Value::Float(0.1),
        ];
        schema.check_row(&ok).unwrap();
        let bad = vec![Value::Int(1)];
        assert!(schema.check_row(&bad).is_err());
        let mut wrong_type = ok.clone();
        wrong_type[1] = Value::Int(10);
        assert!(schema.check_row(&wrong_type).is_err());
    }
}
