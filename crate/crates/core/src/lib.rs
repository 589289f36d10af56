//! Joint mention extraction, coreference resolution and relation extraction
//! over whole documents.
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: documents, gold annotations, DocRED/DWIE ingestion.
//! - [`encoding`]: the pluggable encoder contract, span enumeration and pruning.
//! - [`coref`]: bilinear mention-pair scoring, cluster decoding, losses.
//! - [`relation`]: biaffine relation scoring at mention and entity level with
//!   adaptive thresholds.
//! - [`interaction`]: graph propagation and graph compatibility between the
//!   coreference and relation decisions.
//! - [`metrics`]: mention F1, MUC / B³ / CEAF-φ4, entity-level relation F1.
//! - [`harness`]: the five multi-task settings, training, prediction and
//!   checkpoints.

pub mod coref;
pub mod corpus;
pub mod encoding;
mod error;
pub mod harness;
pub mod interaction;
pub mod metrics;
pub mod nn;
pub mod relation;
pub mod synthetic;

pub use corpus::{Corpus, Document, EntityCluster, RelationSchema, RelationTriple, Span, Token};
pub use error::{Error, Result};
pub use harness::{Setting, SettingConfig};
pub use metrics::Prf;
