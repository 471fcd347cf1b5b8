//! Table completion engine.
//!
//! Given a partially filled relational table (a [`SeedTable`]: caption, core
//! column entities and heading labels) the engine suggests additional
//! core-column entities ([`rows`]) and additional heading labels
//! ([`columns`]). Evidence comes from a table corpus and a knowledge base,
//! both ingested by [`ingest`] and indexed natively by [`index`].

pub mod columns;
pub mod error;
pub mod index;
pub mod ingest;
pub mod model;
pub mod retrieval;
pub mod rows;
pub mod scoring;
pub mod search;
pub mod synth;
pub mod text;

pub use error::{IndexError, IngestError, ModelError, QueryError};
pub use index::{IndexBundle, TableField};
pub use model::{
    CategoryId, Cell, CorpusTable, EntityId, EntityRecord, ScoringParams, SeedTable, Suggestion,
    TableId, TcDenominator,
};
pub use text::{normalize_label, tokenize};
