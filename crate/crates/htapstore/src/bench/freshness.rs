//! Freshness measurement: how long after a commit an analytical reader
//! first sees its effect.
//!
//! In the mixed-format store there is no row→column propagation step,
//! so a reader whose snapshot is taken after a commit returns
//! necessarily reflects that commit: the lag is zero by construction.
//! The `DualFormatSim` baseline models the competing design — separate
//! row and column copies with asynchronous propagation — by serving
//! analytical readers a snapshot at least `delay` old. The same harness
//! then observes nonzero lag.

use std::collections::VecDeque;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::query::{AggFn, AggValue};
use crate::storage::{RangePredicate, Snapshot};
use crate::txn::{Engine, Statement};
use crate::value::Value;

/// Simulated dual-format store: analytical snapshots are delayed by the
/// configured propagation time.
pub struct DualFormatSim {
    delay: Duration,
    epoch: Instant,
    history: Mutex<VecDeque<(Instant, Snapshot)>>,
}

impl DualFormatSim {
    pub fn new(engine: &Engine, delay: Duration) -> DualFormatSim {
        let initial = engine.snapshot();
        let epoch = Instant::now();
        DualFormatSim {
            delay,
            epoch,
            history: Mutex::new(VecDeque::from([(epoch, initial)])),
        }
    }

    pub fn delay(&self) -> Duration {
        self.delay
    }

    /// Writers call this after each commit: the fresh snapshot becomes
    /// visible to analytical readers only `delay` later.
    pub fn record_commit(&self, engine: &Engine) {
        let snap = engine.snapshot();
        let now = Instant::now();
        let mut history = self.history.lock().unwrap();
        history.push_back((now, snap));
        // Keep one entry older than the horizon so reads always resolve.
        while history.len() > 1 {
            let second_age = now.duration_since(history[1].0);
            if second_age > self.delay + Duration::from_secs(1) {
                history.pop_front();
            } else {
                break;
            }
        }
    }

    /// The snapshot an analytical reader sees now: the newest one
    /// recorded at least `delay` ago.
    pub fn olap_snapshot(&self) -> Snapshot {
        let cutoff = Instant::now()
            .checked_sub(self.delay)
            .unwrap_or(self.epoch);
        let history = self.history.lock().unwrap();
        history
            .iter()
            .rev()
            .find(|(t, _)| *t <= cutoff)
            .or_else(|| history.front())
            .map(|(_, s)| s.clone())
            .expect("history never empty")
    }
}

/// Outcome of one writer/reader freshness trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FreshnessTrial {
    /// Whether the first read after the commit already reflected it.
    pub immediate: bool,
    /// Extra polls needed before the commit became visible.
    pub lag_polls: u64,
    /// Wall time from commit return to first reflecting read.
    pub lag: Duration,
}

/// One randomized writer→reader trial against the customer table: the
/// writer commits a change, then (happens-after) the reader aggregates
/// and polls until the change is reflected. With `baseline` set, reads
/// go through the delayed dual-format snapshots.
pub fn freshness_trial(
    engine: &Engine,
    rng: &mut ChaCha8Rng,
    fresh_key: i64,
    baseline: Option<&DualFormatSim>,
) -> Result<FreshnessTrial> {
    // Insert trials demonstrate visibility for both partition kinds:
    // COUNT routes through the key map and the validity bitmap.
    let sentinel = (rng.random_range(0..1_000_000) as f64) / 7.0;
    let mut txn = engine.begin();
    engine.exec_stmt(
        &mut txn,
        Statement::Insert {
            table: "customer".into(),
            values: vec![
                Value::Int(fresh_key),
                Value::Float(sentinel),
                Value::Str("probe".into()),
                Value::Str("p".into()),
                Value::Str("p".into()),
                Value::Str("p".into()),
                Value::Float(0.0),
                Value::Float(0.25),
                Value::Int(0),
            ],
        },
    )?;
    engine.commit(&mut txn)?;
    if let Some(sim) = baseline {
        sim.record_commit(engine);
    }

    // Reader begins strictly after the commit returned.
    let committed_at = Instant::now();
    let predicate = RangePredicate::new("c_id", fresh_key, fresh_key);
    let mut polls = 0u64;
    loop {
        let snap = match baseline {
            Some(sim) => sim.olap_snapshot(),
            None => engine.snapshot(),
        };
        let count = engine.aggregate("customer", AggFn::Count, "c_id", Some(&predicate), &snap)?;
        if count == Some(AggValue::Int(1)) {
            return Ok(FreshnessTrial {
                immediate: polls == 0,
                lag_polls: polls,
                lag: if polls == 0 {
                    Duration::ZERO
                } else {
                    committed_at.elapsed()
                },
            });
        }
        polls += 1;
        std::thread::sleep(Duration::from_millis(2));
    }
}
