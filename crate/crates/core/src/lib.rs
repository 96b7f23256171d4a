//! Builds Graphs of Events in Space and Time (GEST) from per-frame video
//! detections, renders them as a proto-language for an LLM, and scores
//! generated descriptions against references.
//!
//! The stages, in pipeline order:
//!
//! - [`ingest`]: detection record schema, parser and validation
//! - [`identity`]: short-term and appearance-based track unification
//! - [`action_filter`]: confidence cut, per-frame top-k, temporal voting
//! - [`event_builder`]: object association, event aggregation and unification
//! - [`relations`]: spatial and temporal edges
//! - [`graph`]: the event graph, temporal sort, actor grouping, DOT export
//! - [`protolang`]: text rendering of a graph
//! - [`llm`]: prompt assembly and completion with record/replay
//! - [`metrics`]: BLEU@4 and ROUGE-L corpus evaluation
//!
//! [`pipeline::build_graph_from_frames`] runs everything up to the graph.

pub mod action_filter;
pub mod bbox;
pub mod config;
pub mod event_builder;
pub mod graph;
pub mod identity;
pub mod ingest;
pub mod llm;
pub mod metrics;
pub mod pipeline;
pub mod protolang;
pub mod relations;

pub use bbox::{iou, BBox};
pub use config::PipelineConfig;
pub use graph::GestGraph;
