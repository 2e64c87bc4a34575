//! Traceability and compliance engine for safety-critical software projects.

pub mod api;
pub mod baseline;
pub mod change;
pub mod cli;
pub mod compliance;
pub mod events;
pub mod export;
pub mod fixtures;
pub mod graph;
pub mod ingest;
pub mod model;
pub mod project;
pub mod service;
pub mod time;
