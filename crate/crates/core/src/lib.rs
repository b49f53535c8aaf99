//! Scene graphs whose nodes carry implicit object features as playable
//! effects, distributed across a producer and responsibility-filtered
//! consumers.
//!
//! - [`scene`]: the DAG scene graph, loading, traversal, picking, edits.
//! - [`effects`]: audio, haptic and visual effects and their event records.
//! - [`mapping`]: mapping descriptions and the graph rewrite they drive.
//! - [`protocol`]: binary producer/consumer framing, tracking input, gestures.
//! - [`runtime`]: producer ordering and the lockstep consumer.
//! - [`config`]: cluster topology files.
//! - [`eventlog`]: display logs and the tooling that compares them.

pub mod config;
pub mod effects;
pub mod eventlog;
pub mod mapping;
pub mod protocol;
pub mod runtime;
pub mod scene;
