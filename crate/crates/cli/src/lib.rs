//! Command-line pipeline around `neca-core`: dataset fetching, embedding,
//! baseline encoding, evaluation and multi-run comparison.

pub mod app;
pub mod compare;
pub mod config;
pub mod datasets;
pub mod embedding_file;
pub mod fetch;
pub mod pipeline;

pub use app::run;
