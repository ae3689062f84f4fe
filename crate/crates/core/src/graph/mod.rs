//! Installation events, the bipartite graph built from them, temporal splits
//! and descriptive statistics.

mod bipartite;
mod events;
pub mod snapshot;
mod split;
pub mod stats;

pub use bipartite::{build_graph, BipartiteGraph, Side, Vertex, Vocab};
pub use events::{
    ingest_events, ingest_path, write_events, write_events_path, EventFormat, IngestOptions,
    IngestReport, InstallEvent, MalformedLine,
};
pub use split::{temporal_split, temporal_split_window, TemporalSplit, TestEdge, TimedEdge};
pub use stats::{degree_histogram, khop_degree_correlation, DegreeHistogram, PowerLawFit};
