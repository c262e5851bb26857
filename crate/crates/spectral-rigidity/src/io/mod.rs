//! Matrix ingestion, configuration, and report emission.

pub mod config;
pub mod container;
pub mod report;

pub use config::{AnalysisConfig, SynthSpec};
pub use container::{load_chain, read_manifest, read_matrix, write_manifest, write_matrix};
