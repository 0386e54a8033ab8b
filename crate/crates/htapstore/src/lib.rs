//! An embedded single-node HTAP storage engine with a mixed-format
//! store, split write-ahead logging, hybrid transactions, an in-process
//! near-data online-learning loop, and an analytic data-transfer model.
//!
//! The mixed-format store range-partitions each table into row groups
//! and splits columns into a row-format update partition and a
//! column-format read-only partition, so transactional updates and
//! analytical scans work against one copy of the data: there is no
//! row-to-column propagation step and no freshness lag.

pub mod error;
pub mod value;
pub mod schema;
mod codec;
pub mod storage;
pub mod catalog;
pub mod wal;
pub mod query;
pub mod txn;
pub mod nearml;
pub mod perfmodel;
pub mod bench;

pub use catalog::Catalog;
pub use query::{AggFn, AggResult, AggValue};
pub use txn::{Engine, EngineOptions, HybridScript, ScriptStep, Statement, StmtResult, Txn};
pub use error::{Error, Result};
pub use schema::{ColumnDef, PartitionKind, TableSchema};
pub use storage::{KeyRange, RangePredicate, Snapshot, Table};
pub use value::{Value, ValueType};
pub use wal::Durability;
