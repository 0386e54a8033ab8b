//! Change-threshold triggers.
//!
//! A trigger watches one table and fires once per K committed writes
//! (inserts, updates, and deletes each count one; rolled-back writes
//! never count). Cumulative firings equal ⌊committed writes / K⌋ at any
//! quiescent point. Firings run asynchronously on a dedicated worker
//! with a snapshot of the store taken at the triggering commit, so a
//! retrain callback reads exactly the data that crossed the threshold
//! or newer.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Sender};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::thread;

use crate::storage::Snapshot;

/// What a firing hands to its callback.
#[derive(Clone)]
pub struct TriggerFiring {
    pub table: String,
    /// Snapshot taken at the commit that crossed the threshold.
    pub snapshot: Snapshot,
    /// 1-based firing ordinal for this trigger.
    pub firing_seq: u64,
}

pub type TriggerCallback = Arc<dyn Fn(&TriggerFiring) + Send + Sync>;

pub struct TriggerEntry {
    id: u64,
    table: String,
    threshold: u64,
    committed_writes: AtomicU64,
    fired: AtomicU64,
    callback: TriggerCallback,
}

/// Handle returned at registration; exposes the counters the owner
/// needs to observe the trigger.
#[derive(Clone)]
pub struct TriggerHandle {
    entry: Arc<TriggerEntry>,
}

impl TriggerHandle {
    pub fn id(&self) -> u64 {
        self.entry.id
    }

    pub fn table(&self) -> &str {
        &self.entry.table
    }

    pub fn threshold(&self) -> u64 {
        self.entry.threshold
    }

    /// Committed writes observed since registration.
    pub fn committed_writes(&self) -> u64 {
        self.entry.committed_writes.load(Ordering::SeqCst)
    }

    /// Cumulative firings so far (enqueued; callbacks may still be
    /// running until the registry is quiesced).
    pub fn fired_count(&self) -> u64 {
        self.entry.fired.load(Ordering::SeqCst)
    }
}

type Job = (TriggerCallback, TriggerFiring);

struct Executor {
    sender: Mutex<Option<Sender<Job>>>,
    pending: Arc<(Mutex<u64>, Condvar)>,
}

impl Executor {
    fn new() -> Executor {
        let (tx, rx) = mpsc::channel::<Job>();
        let pending = Arc::new((Mutex::new(0u64), Condvar::new()));
        let worker_pending = Arc::clone(&pending);
        thread::Builder::new()
            .name("htapstore-trigger".into())
            .spawn(move || {
                while let Ok((callback, firing)) = rx.recv() {
                    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
                        callback(&firing)
                    }));
                    let (lock, cvar) = &*worker_pending;
                    let mut n = lock.lock().unwrap();
                    *n -= 1;
                    cvar.notify_all();
                    drop(n);
                    if result.is_err() {
                        // A panicking callback must not take the worker
                        // down with it; the firing still counted.
                    }
                }
            })
            .expect("spawn trigger worker");
        Executor {
            sender: Mutex::new(Some(tx)),
            pending,
        }
    }

    fn enqueue(&self, job: Job) {
        let sender = self.sender.lock().unwrap();
        if let Some(tx) = sender.as_ref() {
            let (lock, _) = &*self.pending;
            *lock.lock().unwrap() += 1;
            if tx.send(job).is_err() {
                let (lock, cvar) = &*self.pending;
                *lock.lock().unwrap() -= 1;
                cvar.notify_all();
            }
        }
    }

    /// Blocks until every enqueued firing has finished.
    fn quiesce(&self) {
        let (lock, cvar) = &*self.pending;
        let mut n = lock.lock().unwrap();
        while *n > 0 {
            n = cvar.wait(n).unwrap();
        }
    }

    fn shutdown(&self) {
        self.sender.lock().unwrap().take();
    }
}

/// Registry of change triggers, notified by the commit path.
pub struct ChangeTriggers {
    entries: RwLock<Vec<Arc<TriggerEntry>>>,
    executor: Executor,
    next_id: AtomicU64,
}

impl Default for ChangeTriggers {
    fn default() -> Self {
        Self::new()
    }
}

impl ChangeTriggers {
    pub fn new() -> ChangeTriggers {
        ChangeTriggers {
            entries: RwLock::new(Vec::new()),
            executor: Executor::new(),
            next_id: AtomicU64::new(1),
        }
    }

    pub(crate) fn register(
        &self,
        table: String,
        threshold: u64,
        callback: TriggerCallback,
    ) -> TriggerHandle {
        let entry = Arc::new(TriggerEntry {
            id: self.next_id.fetch_add(1, Ordering::SeqCst),
            table,
            threshold,
            committed_writes: AtomicU64::new(0),
            fired: AtomicU64::new(0),
            callback,
        });
        self.entries.write().unwrap().push(Arc::clone(&entry));
        TriggerHandle { entry }
    }

    /// Called once per committed transaction with that transaction's
    /// per-table write count and a snapshot taken after its effects were
    /// published. Firing count advances by the number of K-multiples the
    /// counter crossed.
    pub(crate) fn notify_commit(&self, table: &str, writes: u64, snapshot: &Snapshot) {
        if writes == 0 {
            return;
        }
        let entries = self.entries.read().unwrap();
        for entry in entries.iter().filter(|e| e.table == table) {
            let before = entry.committed_writes.fetch_add(writes, Ordering::SeqCst);
            let after = before + writes;
            let crossings = after / entry.threshold - before / entry.threshold;
            for _ in 0..crossings {
                let seq = entry.fired.fetch_add(1, Ordering::SeqCst) + 1;
                self.executor.enqueue((
                    Arc::clone(&entry.callback),
                    TriggerFiring {
                        table: entry.table.clone(),
                        snapshot: snapshot.clone(),
                        firing_seq: seq,
                    },
                ));
            }
        }
    }

    /// Waits for all in-flight firings to finish.
    pub fn quiesce(&self) {
        self.executor.quiesce();
    }

    pub(crate) fn shutdown(&self) {
        self.executor.shutdown();
    }
}
