//! Channel charting: embed MIMO channel vectors into a low-dimensional chart
//! that preserves the spatial neighborhoods of the users who produced them.
//!
//! The pipeline measures channel dissimilarity with a distance that ignores a
//! global phase rotation, builds a k-nearest-neighbor graph, approximates
//! geodesics by shortest paths, and embeds them with classical MDS. The crate
//! also generates synthetic multipath scenarios with ground-truth positions
//! and scores charts with continuity and trustworthiness.

pub mod channel;
pub mod cli;
pub mod distance;
pub mod error;
pub mod exec;
pub mod io;
pub mod isomap;
pub mod linalg;
pub mod metrics;
pub mod svg;
pub mod synth;

pub use channel::{Chart, ChannelDataset, ChannelVector, DistanceMatrix, Points};
pub use distance::{
    build_distance_matrix, dist_euclidean, dist_normalized, dist_phase_insensitive,
    dist_phase_insensitive_variational, optimal_phase, Measure,
};
pub use error::{Error, Result, Stage};
pub use isomap::{
    chart_channels, classical_mds, ensure_connected, geodesic_distances, knn_graph, ChartParams,
    ConnectivityPolicy, EmbeddingResult, NeighborhoodGraph,
};
pub use metrics::{continuity, pca_baseline, quality_curves, rank_table, trustworthiness, QualityCurve, RankTable};
pub use synth::{generate_scenario, synthesize_at, ScenarioConfig};
