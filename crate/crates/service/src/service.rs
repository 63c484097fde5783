//! The single-writer service: plans a record against the state, makes it
//! durable in the journal, then applies it.

use std::path::Path;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use bws_core::scoring::Judgment;
use bws_core::{PostId, TupleId};

use crate::error::ServiceError;
use crate::journal::{Durability, Journal};
use crate::state::{
    AnnotatorRecord, Assignment, Millis, Progress, Record, ServiceState, SubmitOutcome,
};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> Millis;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> Millis {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as Millis)
            .unwrap_or(0)
    }
}

/// Clock moved by hand; clones share the same time.
#[derive(Debug, Default, Clone)]
pub struct ManualClock(Arc<AtomicI64>);

impl ManualClock {
    pub fn new(start: Millis) -> Self {
        Self(Arc::new(AtomicI64::new(start)))
    }

    pub fn advance(&self, ms: Millis) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set(&self, ms: Millis) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> Millis {
        self.0.load(Ordering::SeqCst)
    }
}

pub type SharedService = Arc<Mutex<Service>>;

pub struct Service {
    state: ServiceState,
    journal: Option<Journal>,
    clock: Arc<dyn Clock>,
}

impl Service {
    /// Service without persistence.
    pub fn in_memory(state: ServiceState, clock: Arc<dyn Clock>) -> Self {
        Self {
            state,
            journal: None,
            clock,
        }
    }

    /// Opens the journal at `path` and replays it onto `initial`.
    pub fn open(
        initial: ServiceState,
        path: impl AsRef<Path>,
        durability: Durability,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        let (journal, records) = Journal::open(path, durability)?;
        let state = replay(initial, &records)?;
        Ok(Self {
            state,
            journal: Some(journal),
            clock,
        })
    }

    pub fn into_shared(self) -> SharedService {
        Arc::new(Mutex::new(self))
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn now(&self) -> Millis {
        self.clock.now_ms()
    }

    fn commit(&mut self, record: &Record) -> Result<Option<SubmitOutcome>, ServiceError> {
        if let Some(j) = &mut self.journal {
            j.append(record)?;
        }
        self.state.apply(record)
    }

    /// Registers an annotator; repeated registration returns the existing
    /// profile without writing a record.
    pub fn register(&mut self, annotator_id: &str) -> Result<AnnotatorRecord, ServiceError> {
        if let Some(record) = self.state.plan_register(annotator_id, self.now())? {
            self.commit(&record)?;
        }
        Ok(self
            .state
            .annotator(annotator_id)
            .cloned()
            .expect("registered"))
    }

    pub fn next_tuple(&mut self, annotator_id: &str) -> Result<Option<Assignment>, ServiceError> {
        let Some(record) = self.state.plan_next(annotator_id, self.now())? else {
            return Ok(None);
        };
        self.commit(&record)?;
        let Record::Assign { tuple_id, .. } = record else {
            unreachable!("plan_next returns assignments")
        };
        Ok(self.state.assignment(annotator_id, tuple_id).cloned())
    }

    pub fn submit(
        &mut self,
        annotator_id: &str,
        tuple_id: TupleId,
        best_post_id: PostId,
        worst_post_id: PostId,
    ) -> Result<SubmitOutcome, ServiceError> {
        let record = self.state.plan_submit(
            annotator_id,
            tuple_id,
            best_post_id,
            worst_post_id,
            self.now(),
        )?;
        Ok(self
            .commit(&record)?
            .expect("judgment records report an outcome"))
    }

    pub fn progress(&self) -> Progress {
        self.state.progress()
    }

    pub fn export_judgments(&self, include_excluded: bool) -> Vec<Judgment> {
        self.state.export_judgments(include_excluded)
    }
}

pub fn replay(mut state: ServiceState, records: &[Record]) -> Result<ServiceState, ServiceError> {
    for r in records {
        state.apply(r)?;
    }
    Ok(state)
}
