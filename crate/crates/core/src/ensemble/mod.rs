//! Random-forest-style GNN ensembles: per-branch subgraph randomization,
//! aligned branch training and soft-vote aggregation.

mod baseline;
mod branch;
mod config;
mod forest;
mod persist;
mod spec;

pub use baseline::{standalone_predict, train_standalone, StandaloneModel};
pub use branch::{branch_embedding, branch_predict, train_branch, train_branch_logged, BranchCache, BranchInput, BranchModel, TrainLog};
pub use config::{TrainConfig, Variant};
pub use forest::{
    aggregate_outputs, branch_outputs, branch_similarity, ensemble_predict, mean_row_cosine, similarity_matrix,
    train_ensemble, train_ensemble_serial, Branch, EnsembleModel,
};
pub use persist::{load_ensemble, save_ensemble, ENSEMBLE_FILE, ENSEMBLE_FORMAT, ENSEMBLE_VERSION};
pub use spec::{build_branch_spec, sample_size, BranchSpec};
