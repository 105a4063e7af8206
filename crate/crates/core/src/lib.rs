//! Random-forest ensembles of graph neural networks.
//!
//! Each ensemble branch trains a GNN backbone (GCN, SGC or RGCN) on a
//! randomized subgraph: a node sample, a feature subset, and a random edge
//! drop. The features left out of a branch feed a small fully connected
//! network whose output is multiplied elementwise with the GNN embedding
//! before the softmax head. Branch class probabilities are summed to vote.

pub mod backbones;
pub mod ensemble;
pub mod error;
pub mod experiment;
pub mod graphstore;
pub mod metrics;
pub mod numkit;

pub use error::{Error, Result};
