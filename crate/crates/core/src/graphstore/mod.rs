//! Attributed multi-relation graphs: data model, dataset IO, adjacency
//! normalization, the synthetic benchmark generator and feature noise.

mod graph;
mod io;
mod noise;
mod normalize;
mod synth;

pub use graph::{induced_subgraph, MultiRelationGraph, NodeMap, Splits};
pub use io::{load_dataset, save_dataset, DatasetManifest, MANIFEST_FILE};
pub use noise::{inject_feature_noise, noised_entry_count};
pub use normalize::normalize_adjacency;
pub use synth::{generate_synthetic, split_size, SyntheticParams};
