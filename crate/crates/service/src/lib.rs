//! Annotation service for best-worst scaling: hands out 4-tuples, interleaves
//! gold tuples for screening, caps judgments per tuple and journals every
//! state change so a restart replays to the same state.

mod error;
pub mod http;
pub mod journal;
pub mod service;
pub mod state;

pub use error::ServiceError;
pub use journal::{Durability, Journal};
pub use service::{replay, Clock, ManualClock, Service, SharedService, SystemClock};
pub use state::{AnnotatorRecord, Assignment, Progress, Record, ServiceConfig, ServiceState};
