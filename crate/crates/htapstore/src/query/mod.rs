//! Aggregate execution over the mixed layout.
//!
//! Plans are rule-based, not cost-based: a column is read from the
//! read-only partition's contiguous arrays when it is non-updatable and
//! from the row-format update partition otherwise. When the target and
//! predicate columns both live in the read-only partition the scan is
//! positional; when they span partitions the scan walks the
//! key→position map and joins across it. Groups aggregate independently
//! and their partials merge (max of maxes, sum of sums, count of
//! counts, avg via sum+count).

use crate::error::{Error, Result};
use crate::schema::PartitionKind;
use crate::storage::{resolve_column, scan_group, RangePredicate, Snapshot, Table};
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFn {
    Max,
    Min,
    Sum,
    Count,
    Avg,
}

impl std::fmt::Display for AggFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            AggFn::Max => "MAX",
            AggFn::Min => "MIN",
            AggFn::Sum => "SUM",
            AggFn::Count => "COUNT",
            AggFn::Avg => "AVG",
        };
        f.write_str(name)
    }
}

impl AggFn {
    pub fn parse(s: &str) -> Option<AggFn> {
        Some(match s.to_ascii_uppercase().as_str() {
            "MAX" => AggFn::Max,
            "MIN" => AggFn::Min,
            "SUM" => AggFn::Sum,
            "COUNT" => AggFn::Count,
            "AVG" => AggFn::Avg,
            _ => return None,
        })
    }
}

/// A scalar aggregate result. MAX, MIN, SUM, and AVG over zero rows
/// yield `None` (an explicit empty result, not an error); COUNT yields
/// `Some(Int(0))`.
pub type AggResult = Option<AggValue>;

#[derive(Debug, Clone, PartialEq)]
pub enum AggValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl AggValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AggValue::Int(v) => Some(*v as f64),
            AggValue::Float(v) => Some(*v),
            AggValue::Str(_) => None,
        }
    }
}

impl std::fmt::Display for AggValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AggValue::Int(v) => write!(f, "{v}"),
            AggValue::Float(v) => write!(f, "{v}"),
            AggValue::Str(v) => write!(f, "{v}"),
        }
    }
}

/// How a scan reads the group: straight down the read-only arrays, or
/// through the key→position map when any involved column lives in the
/// update partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanStrategy {
    Positional,
    Keyed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnPlan {
    pub column: String,
    pub partition: PartitionKind,
}

/// Deterministic description of how an aggregate will execute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanDescription {
    pub table: String,
    pub agg: AggFn,
    pub target: ColumnPlan,
    pub predicate: Option<ColumnPlan>,
    pub strategy: ScanStrategy,
    /// Partials are computed per group and merged.
    pub merge_groups: u32,
}

/// Validates inputs and produces the routing plan. Pure function of the
/// table layout and the query: identical inputs yield identical plans.
pub fn plan(
    table: &Table,
    agg: AggFn,
    target: &str,
    predicate: Option<&RangePredicate>,
) -> Result<PlanDescription> {
    let schema = table.schema();
    let target_col = schema
        .column(target)
        .ok_or_else(|| Error::UnknownColumn(target.to_string()))?;
    check_compat(agg, target_col.value_type)?;
    let target_partition = schema.partition_of(target).expect("column exists");

    let predicate_plan = predicate
        .map(|p| -> Result<ColumnPlan> {
            let col = schema
                .column(&p.column)
                .ok_or_else(|| Error::UnknownColumn(p.column.clone()))?;
            for bound in [&p.lo, &p.hi] {
                if bound.value_type() != col.value_type {
                    return Err(Error::TypeMismatch(format!(
                        "predicate bound {} does not match column {} of type {}",
                        bound, col.name, col.value_type
                    )));
                }
            }
            Ok(ColumnPlan {
                column: p.column.clone(),
                partition: schema.partition_of(&p.column).expect("column exists"),
            })
        })
        .transpose()?;

    let strategy = if target_partition == PartitionKind::ReadOnly
        && predicate_plan
            .as_ref()
            .is_none_or(|p| p.partition == PartitionKind::ReadOnly)
    {
        ScanStrategy::Positional
    } else {
        ScanStrategy::Keyed
    };

    Ok(PlanDescription {
        table: schema.table_name().to_string(),
        agg,
        target: ColumnPlan {
            column: target.to_string(),
            partition: target_partition,
        },
        predicate: predicate_plan,
        strategy,
        merge_groups: table.num_groups(),
    })
}

fn check_compat(agg: AggFn, ty: ValueType) -> Result<()> {
    let ok = match agg {
        AggFn::Sum | AggFn::Avg => ty.is_numeric(),
        AggFn::Max | AggFn::Min => ty != ValueType::Bool,
        AggFn::Count => true,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::TypeMismatch(format!(
            "{agg} is not defined over {ty}"
        )))
    }
}

/// Streaming fold for one aggregate; per-group partials are merged with
/// `merge`.
#[derive(Debug, Clone)]
pub(crate) enum Aggregator {
    Extreme { want_max: bool, best: Option<Value> },
    SumInt(Option<i64>),
    SumFloat(Option<f64>),
    Count(u64),
    Avg { sum: f64, count: u64 },
}

impl Aggregator {
    pub(crate) fn new(agg: AggFn, ty: ValueType) -> Result<Aggregator> {
        check_compat(agg, ty)?;
        Ok(match agg {
            AggFn::Max => Aggregator::Extreme {
                want_max: true,
                best: None,
            },
            AggFn::Min => Aggregator::Extreme {
                want_max: false,
                best: None,
            },
            AggFn::Sum => match ty {
                ValueType::Int64 => Aggregator::SumInt(None),
                _ => Aggregator::SumFloat(None),
            },
            AggFn::Count => Aggregator::Count(0),
            AggFn::Avg => Aggregator::Avg { sum: 0.0, count: 0 },
        })
    }

    pub(crate) fn push(&mut self, value: &Value) -> Result<()> {
        match self {
            Aggregator::Extreme { want_max, best } => {
                let better = match best {
                    None => true,
                    Some(current) => {
                        let ord = value.try_cmp(current).ok_or_else(|| {
                            Error::TypeMismatch("mixed types in aggregate input".into())
                        })?;
                        if *want_max {
                            ord == std::cmp::Ordering::Greater
                        } else {
                            ord == std::cmp::Ordering::Less
                        }
                    }
                };
                if better {
                    *best = Some(value.clone());
                }
            }
            Aggregator::SumInt(acc) => {
                let v = value
                    .as_int()
                    .ok_or_else(|| Error::TypeMismatch("SUM expects int64 here".into()))?;
                let base = acc.unwrap_or(0);
                *acc = Some(base.checked_add(v).ok_or(Error::Overflow("SUM(int64)"))?);
            }
            Aggregator::SumFloat(acc) => {
                let v = value
                    .as_float()
                    .ok_or_else(|| Error::TypeMismatch("SUM expects float64 here".into()))?;
                *acc = Some(acc.unwrap_or(0.0) + v);
            }
            Aggregator::Count(n) => *n += 1,
            Aggregator::Avg { sum, count } => {
                let v = match value {
                    Value::Int(x) => *x as f64,
                    Value::Float(x) => *x,
                    _ => return Err(Error::TypeMismatch("AVG expects a numeric column".into())),
                };
                *sum += v;
                *count += 1;
            }
        }
        Ok(())
    }

    pub(crate) fn merge(&mut self, other: Aggregator) -> Result<()> {
        match (self, other) {
            (
                Aggregator::Extreme { want_max, best },
                Aggregator::Extreme {
                    best: Some(candidate),
                    ..
                },
            ) => {
                let take = match best {
                    None => true,
                    Some(current) => {
                        let ord = candidate.try_cmp(current).ok_or_else(|| {
                            Error::TypeMismatch("mixed types in aggregate input".into())
                        })?;
                        if *want_max {
                            ord == std::cmp::Ordering::Greater
                        } else {
                            ord == std::cmp::Ordering::Less
                        }
                    }
                };
                if take {
                    *best = Some(candidate);
                }
            }
            (Aggregator::Extreme { .. }, Aggregator::Extreme { best: None, .. }) => {}
            (Aggregator::SumInt(a), Aggregator::SumInt(b)) => {
                if let Some(v) = b {
                    let base = a.unwrap_or(0);
                    *a = Some(base.checked_add(v).ok_or(Error::Overflow("SUM(int64)"))?);
                }
            }
            (Aggregator::SumFloat(a), Aggregator::SumFloat(b)) => {
                if let Some(v) = b {
                    *a = Some(a.unwrap_or(0.0) + v);
                }
            }
            (Aggregator::Count(a), Aggregator::Count(b)) => *a += b,
            (
                Aggregator::Avg { sum, count },
                Aggregator::Avg {
                    sum: s2,
                    count: c2,
                },
            ) => {
                *sum += s2;
                *count += c2;
            }
            _ => return Err(Error::TypeMismatch("merging unlike partials".into())),
        }
        Ok(())
    }

    pub(crate) fn finish(self) -> AggResult {
        match self {
            Aggregator::Extreme { best, .. } => best.map(|v| match v {
                Value::Int(x) => AggValue::Int(x),
                Value::Float(x) => AggValue::Float(x),
                Value::Str(x) => AggValue::Str(x),
                Value::Bool(_) => unreachable!("rejected by plan"),
            }),
            Aggregator::SumInt(acc) => acc.map(AggValue::Int),
            Aggregator::SumFloat(acc) => acc.map(AggValue::Float),
            Aggregator::Count(n) => Some(AggValue::Int(n as i64)),
            Aggregator::Avg { sum, count } => {
                if count == 0 {
                    None
                } else {
                    Some(AggValue::Float(sum / count as f64))
                }
            }
        }
    }
}

/// Computes `agg(target)` over the live rows visible to `snap` that
/// satisfy `predicate`, merging per-group partials in group order.
pub fn aggregate(
    table: &Table,
    agg: AggFn,
    target: &str,
    predicate: Option<&RangePredicate>,
    snap: &Snapshot,
) -> Result<AggResult> {
    let description = plan(table, agg, target, predicate)?;
    let schema = table.schema();
    let ty = schema.column(target).expect("planned").value_type;
    let target_route = resolve_column(schema, target)?;
    let pred_route = predicate
        .map(|p| resolve_column(schema, &p.column).map(|route| (route, p)))
        .transpose()?;

    let mut total = Aggregator::new(agg, ty)?;
    for group in table.groups() {
        let wm = snap.watermark(schema.table_name(), group.group_id());
        let mut partial = Aggregator::new(agg, ty)?;
        let data = group.data.read().unwrap();
        let mut push_err = None;
        scan_group(&data, wm, target_route, pred_route, &mut |v| {
            if push_err.is_none() {
                if let Err(e) = partial.push(&v) {
                    push_err = Some(e);
                }
            }
        });
        drop(data);
        if let Some(e) = push_err {
            return Err(e);
        }
        total.merge(partial)?;
    }
    debug_assert_eq!(description.merge_groups, table.num_groups());
    Ok(total.finish())
}
