//! Data distilling: turning table rows into training batches without
//! leaving the process.
//!
//! A distill pass scans the watched table at a snapshot, re-encodes
//! each row through the feature extractor, and emits (feature vector,
//! label) pairs in key order. Everything stays in memory; the batch is
//! handed to the learner as-is. The CSV writer exists only for offline
//! inspection and is never part of the training path.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::schema::TableSchema;
use crate::storage::{Snapshot, Table};
use crate::value::Value;

use super::features::{
    ClickFeedback, CommodityInfo, FeatureExtractor, LabelFeedback, Portrait, SessionEvents,
};

/// One training sample: the encoded state and its label (the buy flag).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub customer_id: i64,
    pub step: u64,
    pub features: Vec<f64>,
    pub label: f64,
}

/// Column names a session table must expose for distilling. The
/// defaults match the bench session preset; remap for other schemas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRowMapping {
    pub customer_id: String,
    pub step: String,
    pub time_of_day: String,
    pub location: String,
    pub page_view: String,
    pub buy: String,
    pub cart: String,
    pub favorite: String,
    pub duration: String,
    pub text_query: String,
    pub image_query: String,
    pub price_lo: String,
    pub price_hi: String,
    pub inventory: String,
    pub commodity_id: String,
    pub category: String,
    pub subcategory: String,
    pub style: String,
}

impl Default for SessionRowMapping {
    fn default() -> Self {
        SessionRowMapping {
            customer_id: "customer_id".into(),
            step: "t".into(),
            time_of_day: "time_of_day".into(),
            location: "location".into(),
            page_view: "pv".into(),
            buy: "buy".into(),
            cart: "cart".into(),
            favorite: "favorite".into(),
            duration: "duration".into(),
            text_query: "text_query".into(),
            image_query: "image_query".into(),
            price_lo: "price_lo".into(),
            price_hi: "price_hi".into(),
            inventory: "inventory".into(),
            commodity_id: "commodity_id".into(),
            category: "category".into(),
            subcategory: "subcategory".into(),
            style: "style".into(),
        }
    }
}

pub(crate) struct ResolvedMapping {
    customer_id: usize,
    step: usize,
    time_of_day: usize,
    location: usize,
    page_view: usize,
    buy: usize,
    cart: usize,
    favorite: usize,
    duration: usize,
    text_query: usize,
    image_query: usize,
    price_lo: usize,
    price_hi: usize,
    inventory: usize,
    commodity_id: usize,
    category: usize,
    subcategory: usize,
    style: usize,
}

fn resolve(schema: &TableSchema, mapping: &SessionRowMapping) -> Result<ResolvedMapping> {
    let idx = |name: &str| {
        schema
            .column_index(name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    };
    Ok(ResolvedMapping {
        customer_id: idx(&mapping.customer_id)?,
        step: idx(&mapping.step)?,
        time_of_day: idx(&mapping.time_of_day)?,
        location: idx(&mapping.location)?,
        page_view: idx(&mapping.page_view)?,
        buy: idx(&mapping.buy)?,
        cart: idx(&mapping.cart)?,
        favorite: idx(&mapping.favorite)?,
        duration: idx(&mapping.duration)?,
        text_query: idx(&mapping.text_query)?,
        image_query: idx(&mapping.image_query)?,
        price_lo: idx(&mapping.price_lo)?,
        price_hi: idx(&mapping.price_hi)?,
        inventory: idx(&mapping.inventory)?,
        commodity_id: idx(&mapping.commodity_id)?,
        category: idx(&mapping.category)?,
        subcategory: idx(&mapping.subcategory)?,
        style: idx(&mapping.style)?,
    })
}

fn want_int(row: &[Value], idx: usize) -> Result<i64> {
    row[idx]
        .as_int()
        .ok_or_else(|| Error::TypeMismatch("expected int64 session column".into()))
}

fn want_str(row: &[Value], idx: usize) -> Result<String> {
    row[idx]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| Error::TypeMismatch("expected utf8 session column".into()))
}

fn want_bool(row: &[Value], idx: usize) -> Result<bool> {
    row[idx]
        .as_bool()
        .ok_or_else(|| Error::TypeMismatch("expected bool session column".into()))
}

fn want_float(row: &[Value], idx: usize) -> Result<f64> {
    row[idx]
        .as_float()
        .ok_or_else(|| Error::TypeMismatch("expected float64 session column".into()))
}

/// Decodes one session row into raw events and commodity context.
pub(crate) fn row_to_events(
    row: &[Value],
    resolved: &ResolvedMapping,
) -> Result<(SessionEvents, CommodityInfo)> {
    let events = SessionEvents {
        customer_id: want_int(row, resolved.customer_id)?,
        step: want_int(row, resolved.step)?.max(0) as u64,
        portrait: Portrait {
            time_of_day: want_str(row, resolved.time_of_day)?,
            location: want_str(row, resolved.location)?,
        },
        clicks: ClickFeedback {
            page_view: want_bool(row, resolved.page_view)?,
            buy: want_bool(row, resolved.buy)?,
            cart: want_bool(row, resolved.cart)?,
            favorite: want_bool(row, resolved.favorite)?,
            duration: want_str(row, resolved.duration)?,
        },
        text_query: want_str(row, resolved.text_query)?,
        image_query: want_str(row, resolved.image_query)?,
        labels: LabelFeedback {
            price_range: (
                want_float(row, resolved.price_lo)?,
                want_float(row, resolved.price_hi)?,
            ),
            inventory: want_int(row, resolved.inventory)?,
        },
    };
    let item = CommodityInfo {
        id: want_int(row, resolved.commodity_id)?,
        category: want_int(row, resolved.category)?.max(0) as usize,
        subcategory: want_int(row, resolved.subcategory)?.max(0) as usize,
        style: want_str(row, resolved.style)?,
    };
    Ok((events, item))
}

/// Scans `table` at `snap` and emits one sample per visible row, in key
/// order. The label is the buy flag. Purely in-process: no file or
/// socket is touched.
pub fn distill(
    table: &Table,
    snap: &Snapshot,
    extractor: &FeatureExtractor,
    mapping: &SessionRowMapping,
) -> Result<Vec<TrainingSample>> {
    let resolved = resolve(table.schema(), mapping)?;
    let mut batch = Vec::new();
    for key in table.visible_keys(snap) {
        let row = table
            .point_get(key, snap)
            .expect("visible key must resolve");
        let (events, item) = row_to_events(&row, &resolved)?;
        let state = extractor.extract(&events, &item)?;
        batch.push(TrainingSample {
            customer_id: events.customer_id,
            step: events.step,
            label: f64::from(u8::from(events.clicks.buy)),
            features: state.feature_vector,
        });
    }
    Ok(batch)
}

/// Writes a batch as CSV with header `customer_id,t,f0..f{d-1},label`.
pub fn write_batch_csv<W: Write>(batch: &[TrainingSample], mut out: W) -> io::Result<()> {
    let dim = batch.first().map_or(0, |s| s.features.len());
    write!(out, "customer_id,t")?;
    for i in 0..dim {
        write!(out, ",f{i}")?;
    }
    writeln!(out, ",label")?;
    for sample in batch {
        write!(out, "{},{}", sample.customer_id, sample.step)?;
        for f in &sample.features {
            write!(out, ",{f}")?;
        }
        writeln!(out, ",{}", sample.label)?;
    }
    Ok(())
}
