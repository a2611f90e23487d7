//! Neighbor-type analysis of contextualized word embeddings.
//!
//! Instances of annotated nouns are joined to their embeddings, linked into a
//! directed cosine kNN graph that never connects two instances of the same
//! lemma, and scored by the semantic types of their neighbors:
//!
//! * [`corpus`]: semantic types, sentence labels, annotation files
//! * [`store`]: embedding bundles on disk and the id join
//! * [`knn`]: graph construction and its exhaustive reference
//! * [`metrics`]: NTP, matching ratios, other-ratio and NTE per instance
//! * [`stats`]: Mann-Whitney U and the sentence-type comparison suite
//! * [`report`]: aggregate tables, heatmaps and the induced type hierarchy
//! * [`synth`]: synthetic corpora with controlled geometry
//!
//! Numeric types are generic over [`Scalar`]; the aliases below fix the
//! usual choices (binary32 embeddings, binary64 metrics).

pub mod corpus;
pub mod error;
pub mod knn;
pub mod metrics;
pub mod report;
pub mod scalar;
pub mod stats;
pub mod store;
pub mod synth;

pub use corpus::{
    dataset_summary, parse_dataset, read_dataset, Dataset, DatasetSummary, InstanceRecord,
    SemanticType, SentenceLabel,
};
pub use error::{Error, Result};
pub use knn::{
    build_graph, build_graph_with, cosine, exhaustive_neighbors, GraphOptions, Neighbor,
    NeighborGraph, DEFAULT_K,
};
pub use metrics::{compute_metrics, metric_row, nte, ntp};
pub use report::{
    heatmap_by_lexical_type, induce_hierarchy, neighbor_word_distribution, per_word_ntmr,
    table_by_sentence_type,
};
pub use scalar::Scalar;
pub use stats::{
    compare_sentence_types, mann_whitney_u, mann_whitney_u_using, Alternative, ComparisonReport,
    Method, MwuResult,
};
pub use store::{align, load_bundle, write_bundle, AlignedCorpus, VariantTag};
pub use synth::{generate, SynthConfig};

/// Embedding bundle as stored on disk.
pub type EmbeddingBundleF32 = store::EmbeddingBundle<f32>;
pub type EmbeddingBundleF64 = store::EmbeddingBundle<f64>;

pub type TypeDistributionF64 = metrics::TypeDistribution<f64>;
pub type TypeDistributionF32 = metrics::TypeDistribution<f32>;

pub type MetricRowF64 = metrics::MetricRow<f64>;
pub type MetricRowF32 = metrics::MetricRow<f32>;

pub type MetricTableF64 = metrics::MetricTable<f64>;
pub type MetricTableF32 = metrics::MetricTable<f32>;

pub type TypeMatrixF64 = report::TypeMatrix<f64>;
pub type TypeMatrixF32 = report::TypeMatrix<f32>;

pub type DendrogramF64 = report::Dendrogram<f64>;

pub type SynthOutputF32 = synth::SynthOutput<f32>;
