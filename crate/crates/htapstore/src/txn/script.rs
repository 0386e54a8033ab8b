//! Hybrid scripts: analytical aggregates interleaved between
//! transactional statements, executed inside one transaction.
//!
//! Text form, one statement per line:
//!
//! ```text
//! AGG MAX <table>.<col> WHERE <col> BETWEEN <a> AND <b>
//! AGG COUNT <table>.<col>
//! UPDATE <table> SET <col>=<val> WHERE <pk>=<k>
//! INSERT <table> VALUES (v1, v2, ...)
//! DELETE <table> WHERE <pk>=<k>
//! ```
//!
//! Blank lines separate transactions in multi-transaction script files;
//! `#` starts a comment line. Values parse as int64, float64, bool, or
//! (optionally single-quoted) string; integer literals widen to float64
//! where the column requires it.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::query::{AggFn, AggResult};
use crate::storage::RangePredicate;
use crate::value::Value;

use super::{Engine, Statement, StmtResult, TxnState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StepKind {
    Oltp,
    Olap,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScriptStep {
    Oltp(Statement),
    Olap(Statement),
}

impl ScriptStep {
    pub fn kind(&self) -> StepKind {
        match self {
            ScriptStep::Oltp(_) => StepKind::Oltp,
            ScriptStep::Olap(_) => StepKind::Olap,
        }
    }

    pub fn statement(&self) -> &Statement {
        match self {
            ScriptStep::Oltp(s) | ScriptStep::Olap(s) => s,
        }
    }
}

/// An ordered list of steps run as one transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridScript {
    pub steps: Vec<ScriptStep>,
}

impl HybridScript {
    pub fn new(steps: Vec<ScriptStep>) -> Result<HybridScript> {
        if steps.is_empty() {
            return Err(Error::InvalidConfig("script has no steps".into()));
        }
        Ok(HybridScript { steps })
    }

    /// Checks that every referenced table and column exists.
    pub fn validate(&self, engine: &Engine) -> Result<()> {
        for step in &self.steps {
            let stmt = step.statement();
            let table = engine.table(stmt.table())?;
            if let Statement::Aggregate {
                column, predicate, ..
            } = stmt
            {
                if table.schema().column(column).is_none() {
                    return Err(Error::UnknownColumn(column.clone()));
                }
                if let Some(p) = predicate {
                    if table.schema().column(&p.column).is_none() {
                        return Err(Error::UnknownColumn(p.column.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub kind: StepKind,
    pub result: StmtResult,
    pub elapsed: Duration,
}

impl StepResult {
    pub fn agg(&self) -> Option<&AggResult> {
        match &self.result {
            StmtResult::Agg(r) => Some(r),
            _ => None,
        }
    }
}

/// Per-step results and timings of one committed hybrid transaction.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutcome {
    pub steps: Vec<StepResult>,
    pub commit_lsn: u64,
    pub total: Duration,
}

pub(super) fn run_hybrid(engine: &Engine, script: &HybridScript) -> Result<HybridOutcome> {
    if script.steps.is_empty() {
        return Err(Error::InvalidConfig("script has no steps".into()));
    }
    let start = Instant::now();
    let mut txn = engine.begin();
    let mut steps = Vec::with_capacity(script.steps.len());
    for (i, step) in script.steps.iter().enumerate() {
        let t0 = Instant::now();
        match engine.exec_stmt(&mut txn, step.statement().clone()) {
            Ok(result) => steps.push(StepResult {
                kind: step.kind(),
                result,
                elapsed: t0.elapsed(),
            }),
            Err(e) => {
                engine.rollback(&mut txn)?;
                return Err(Error::ScriptStep {
                    step: i,
                    source: Box::new(e),
                });
            }
        }
    }
    let commit_lsn = engine.commit(&mut txn)?;
    debug_assert_eq!(txn.state(), TxnState::Committed);
    Ok(HybridOutcome {
        steps,
        commit_lsn,
        total: start.elapsed(),
    })
}

/// Parses one statement line of the text form.
pub fn parse_statement_line(line: &str) -> Result<ScriptStep> {
    parse_line(line, 0)
}

/// Parses a script file: blank-line-separated blocks become successive
/// transactions.
pub fn parse_script_text(text: &str) -> Result<Vec<HybridScript>> {
    let mut scripts = Vec::new();
    let mut current: Vec<ScriptStep> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            if !current.is_empty() {
                scripts.push(HybridScript {
                    steps: std::mem::take(&mut current),
                });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        current.push(parse_line(line, idx + 1)?);
    }
    if !current.is_empty() {
        scripts.push(HybridScript { steps: current });
    }
    if scripts.is_empty() {
        return Err(Error::ScriptParse {
            line: 0,
            msg: "script contains no statements".into(),
        });
    }
    Ok(scripts)
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ScriptParse {
        line,
        msg: msg.into(),
    }
}

fn parse_line(line: &str, lineno: usize) -> Result<ScriptStep> {
    let mut words = line.split_whitespace();
    let head = words
        .next()
        .ok_or_else(|| parse_err(lineno, "empty statement"))?;
    match head.to_ascii_uppercase().as_str() {
        "AGG" => parse_agg(line, lineno).map(ScriptStep::Olap),
        "UPDATE" => parse_update(line, lineno).map(ScriptStep::Oltp),
        "INSERT" => parse_insert(line, lineno).map(ScriptStep::Oltp),
        "DELETE" => parse_delete(line, lineno).map(ScriptStep::Oltp),
        other => Err(parse_err(lineno, format!("unknown statement: {other}"))),
    }
}

/// AGG <fn> <table>.<col> [WHERE <col> BETWEEN <a> AND <b>]
fn parse_agg(line: &str, lineno: usize) -> Result<Statement> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < 3 {
        return Err(parse_err(lineno, "AGG needs a function and table.column"));
    }
    let agg = AggFn::parse(tokens[1])
        .ok_or_else(|| parse_err(lineno, format!("unknown aggregate: {}", tokens[1])))?;
    let (table, column) = tokens[2]
        .split_once('.')
        .ok_or_else(|| parse_err(lineno, "expected <table>.<column>"))?;
    let predicate = if tokens.len() > 3 {
        if tokens.len() != 9
            || !tokens[3].eq_ignore_ascii_case("WHERE")
            || !tokens[5].eq_ignore_ascii_case("BETWEEN")
            || !tokens[7].eq_ignore_ascii_case("AND")
        {
            return Err(parse_err(
                lineno,
                "expected WHERE <col> BETWEEN <a> AND <b>",
            ));
        }
        Some(RangePredicate {
            column: tokens[4].to_string(),
            lo: parse_value(tokens[6]),
            hi: parse_value(tokens[8]),
        })
    } else {
        None
    };
    Ok(Statement::Aggregate {
        table: table.to_string(),
        agg,
        column: column.to_string(),
        predicate,
    })
}

/// UPDATE <table> SET <col>=<val> WHERE <pk>=<k>
fn parse_update(line: &str, lineno: usize) -> Result<Statement> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 6
        || !tokens[2].eq_ignore_ascii_case("SET")
        || !tokens[4].eq_ignore_ascii_case("WHERE")
    {
        return Err(parse_err(
            lineno,
            "expected UPDATE <table> SET <col>=<val> WHERE <pk>=<k>",
        ));
    }
    let (col, val) = tokens[3]
        .split_once('=')
        .ok_or_else(|| parse_err(lineno, "expected <col>=<val>"))?;
    let (_, key) = tokens[5]
        .split_once('=')
        .ok_or_else(|| parse_err(lineno, "expected <pk>=<k>"))?;
    let key: i64 = key
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad key: {key}")))?;
    Ok(Statement::Update {
        table: tokens[1].to_string(),
        key,
        assignments: vec![(col.to_string(), parse_value(val))],
    })
}

/// INSERT <table> VALUES (v1, v2, ...)
fn parse_insert(line: &str, lineno: usize) -> Result<Statement> {
    let rest = line
        .split_whitespace()
        .nth(1)
        .ok_or_else(|| parse_err(lineno, "INSERT needs a table"))?;
    let open = line
        .find('(')
        .ok_or_else(|| parse_err(lineno, "INSERT needs VALUES (...)"))?;
    let close = line
        .rfind(')')
        .ok_or_else(|| parse_err(lineno, "unclosed VALUES list"))?;
    let values: Vec<Value> = line[open + 1..close]
        .split(',')
        .map(|tok| parse_value(tok.trim()))
        .collect();
    if values.is_empty() {
        return Err(parse_err(lineno, "empty VALUES list"));
    }
    Ok(Statement::Insert {
        table: rest.to_string(),
        values,
    })
}

/// DELETE <table> WHERE <pk>=<k>
fn parse_delete(line: &str, lineno: usize) -> Result<Statement> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() != 4 || !tokens[2].eq_ignore_ascii_case("WHERE") {
        return Err(parse_err(lineno, "expected DELETE <table> WHERE <pk>=<k>"));
    }
    let (_, key) = tokens[3]
        .split_once('=')
        .ok_or_else(|| parse_err(lineno, "expected <pk>=<k>"))?;
    let key: i64 = key
        .parse()
        .map_err(|_| parse_err(lineno, format!("bad key: {key}")))?;
    Ok(Statement::Delete {
        table: tokens[1].to_string(),
        key,
    })
}

fn parse_value(tok: &str) -> Value {
    if let Ok(v) = tok.parse::<i64>() {
        return Value::Int(v);
    }
    if let Ok(v) = tok.parse::<f64>() {
        return Value::Float(v);
    }
    match tok {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => {
            let unquoted = tok.strip_prefix('\'').and_then(|s| s.strip_suffix('\''));
            Value::Str(unquoted.unwrap_or(tok).to_string())
        }
    }
}
