//! dbviz: a compiler and checker for multi-table database visualizations.
//!
//! The pipeline ingests typed tables with declared keys and foreign-key
//! constraints, resolves a declarative view specification into mark tables,
//! applies constraint mappings (explicit marks, spatial nesting, shared
//! scales), verifies the scene faithfully represents the database, and
//! renders deterministic SVG plus a JSON faithfulness report.

pub mod expr;
pub mod check;
pub mod compile;
pub mod ingest;
pub mod layout;
pub mod pipeline;
pub mod render;
pub mod scale;
pub mod spec;
pub mod relational;
pub mod value;

pub use value::{AttributeDomain, DomainKind, Value};
