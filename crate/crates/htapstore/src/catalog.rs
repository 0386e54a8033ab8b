//! Table catalog: name → handle, plus a small persistent manifest so a
//! restarted engine knows the schemas and group counts before log
//! replay. Catalog operations are globally serialized.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use crate::codec::{put_u16, put_u32, Reader};
use crate::error::{Error, Result};
use crate::schema::TableSchema;
use crate::storage::{Snapshot, Table};

const CATALOG_MAGIC: &[u8; 4] = b"HTCG";
const CATALOG_VERSION: u16 = 1;

#[derive(Default)]
pub struct Catalog {
    tables: RwLock<BTreeMap<String, Arc<Table>>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Creates a table with `num_groups` row groups whose ranges evenly
    /// partition the int64 key space. The schema is validated at
    /// construction ([`TableSchema::new`]).
    pub fn create_table(&self, schema: TableSchema, num_groups: u32) -> Result<Arc<Table>> {
        if num_groups == 0 {
            return Err(Error::InvalidConfig("num_groups must be at least 1".into()));
        }
        let mut tables = self.tables.write().unwrap();
        let name = schema.table_name().to_string();
        if tables.contains_key(&name) {
            return Err(Error::DuplicateTable(name));
        }
        let table = Arc::new(Table::new(schema, num_groups));
        tables.insert(name, Arc::clone(&table));
        Ok(table)
    }

    pub fn get(&self, name: &str) -> Result<Arc<Table>> {
        self.tables
            .read()
            .unwrap()
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownTable(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tables.read().unwrap().contains_key(name)
    }

    /// All tables in name order.
    pub fn tables(&self) -> Vec<Arc<Table>> {
        self.tables.read().unwrap().values().cloned().collect()
    }

    /// Captures per-group commit watermarks for every table.
    pub fn snapshot(&self) -> Snapshot {
        let tables = self.tables.read().unwrap();
        Snapshot::capture(tables.values().map(|t| t.as_ref()))
    }

    /// Writes the manifest: schemas and group counts, no data.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tables = self.tables.read().unwrap();
        let mut body = Vec::new();
        put_u32(&mut body, tables.len() as u32);
        for table in tables.values() {
            crate::storage::encode_schema_to(&mut body, table.schema());
            put_u32(&mut body, table.num_groups());
        }
        let mut out = Vec::with_capacity(body.len() + 10);
        out.extend_from_slice(CATALOG_MAGIC);
        put_u16(&mut out, CATALOG_VERSION);
        out.extend_from_slice(&body);
        put_u32(&mut out, crc32fast::hash(&body));
        let mut file = File::create(path)?;
        file.write_all(&out)?;
        file.sync_all()?;
        Ok(())
    }

    /// Loads a manifest into empty tables.
    pub fn load(path: &Path) -> Result<Catalog> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() < 10 || &bytes[0..4] != CATALOG_MAGIC {
            return Err(Error::Corrupt {
                what: "catalog",
                detail: "bad magic".into(),
            });
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != CATALOG_VERSION {
            return Err(Error::Corrupt {
                what: "catalog",
                detail: format!("unsupported version {version}"),
            });
        }
        let body = &bytes[6..bytes.len() - 4];
        let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
        if crc32fast::hash(body) != crc {
            return Err(Error::Corrupt {
                what: "catalog",
                detail: "crc mismatch".into(),
            });
        }
        let mut r = Reader::new(body, "catalog");
        let count = r.u32()? as usize;
        let catalog = Catalog::new();
        for _ in 0..count {
            let schema = crate::storage::decode_schema_from(&mut r)?;
            let num_groups = r.u32()?;
            catalog.create_table(schema, num_groups)?;
        }
        Ok(catalog)
    }
}
