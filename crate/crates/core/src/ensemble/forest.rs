use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graphstore::MultiRelationGraph;
use crate::numkit::DenseMatrix;

use super::{branch_predict, build_branch_spec, train_branch, BranchModel, BranchSpec, TrainConfig, Variant};

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub spec: BranchSpec,
    pub model: BranchModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleModel {
    pub config: TrainConfig,
    pub variant: Variant,
    pub branches: Vec<Branch>,
}

impl EnsembleModel {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn num_classes(&self) -> Option<usize> {
        self.branches.first().map(|b| b.model.num_classes())
    }
}

fn train_one(g: &MultiRelationGraph, cfg: &TrainConfig, variant: Variant, index: usize) -> Result<Branch> {
    let run = || {
        let spec = build_branch_spec(g, cfg, index, variant)?;
        let model = train_branch(g, &spec, cfg, variant.aligning())?;
        Ok(Branch { spec, model })
    };
    run().map_err(|e| Error::Branch {
        index,
        source: Box::new(e),
    })
}

/// Trains all `cfg.branches` branches on the current rayon pool.
///
/// Each branch draws only from streams keyed by its own index, so the result
/// does not depend on thread count or scheduling.
pub fn train_ensemble(g: &MultiRelationGraph, cfg: &TrainConfig, variant: Variant) -> Result<EnsembleModel> {
    cfg.validate()?;
    // collect every outcome first so the reported error is the lowest failing index
    let outcomes: Vec<Result<Branch>> = (0..cfg.branches)
        .into_par_iter()
        .map(|i| train_one(g, cfg, variant, i))
        .collect();
    let branches = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        config: cfg.clone(),
        variant,
        branches,
    })
}

/// Same as [`train_ensemble`] on the calling thread, one branch after another.
pub fn train_ensemble_serial(g: &MultiRelationGraph, cfg: &TrainConfig, variant: Variant) -> Result<EnsembleModel> {
    cfg.validate()?;
    let branches = (0..cfg.branches)
        .map(|i| train_one(g, cfg, variant, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel {
        config: cfg.clone(),
        variant,
        branches,
    })
}

/// Every branch's full-graph probabilities, in branch order.
pub fn branch_outputs(g: &MultiRelationGraph, ens: &EnsembleModel) -> Result<Vec<DenseMatrix>> {
    ens.branches
        .iter()
        .map(|b| {
            branch_predict(g, &b.spec, &b.model).map_err(|e| Error::Branch {
                index: b.spec.index,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Soft vote: sums branch probabilities and takes the per-row argmax
/// (ties go to the lower class index).
pub fn aggregate_outputs(outputs: &[DenseMatrix]) -> Result<(DenseMatrix, Vec<usize>)> {
    let (first, rest) = outputs.split_first().ok_or(Error::EmptyEnsemble)?;
    let mut scores = first.clone();
    for o in rest {
        scores.add_assign(o)?;
    }
    let classes = scores.argmax_rows();
    Ok((scores, classes))
}

pub fn ensemble_predict(g: &MultiRelationGraph, ens: &EnsembleModel) -> Result<(DenseMatrix, Vec<usize>)> {
    if ens.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    aggregate_outputs(&branch_outputs(g, ens)?)
}

/// Mean over nodes of the cosine similarity between rows of two outputs.
pub fn mean_row_cosine(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::dim("mean_row_cosine", a.shape_str(), b.shape_str()));
    }
    if a.rows() == 0 {
        return Ok(0.0);
    }
    let total: f64 = a
        .iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| {
            let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
            let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if nx == 0.0 || ny == 0.0 {
                0.0
            } else {
                dot / (nx * ny)
            }
        })
        .sum();
    Ok(total / a.rows() as f64)
}

/// `S × S` matrix of mean output cosine similarity between branches.
pub fn similarity_matrix(outputs: &[DenseMatrix]) -> Result<DenseMatrix> {
    let s = outputs.len();
    let mut m = DenseMatrix::zeros(s, s);
    for i in 0..s {
        m.set(i, i, mean_row_cosine(&outputs[i], &outputs[i])?);
        for j in i + 1..s {
            let v = mean_row_cosine(&outputs[i], &outputs[j])?;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    Ok(m)
}

pub fn branch_similarity(ens: &EnsembleModel, g: &MultiRelationGraph) -> Result<DenseMatrix> {
    similarity_matrix(&branch_outputs(g, ens)?)
}
