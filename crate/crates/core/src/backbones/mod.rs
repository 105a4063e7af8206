//! Base classifier networks with hand-written backward passes.
//!
//! All graph layers are bias-free; the prediction head carries the only bias.
//! Dropout is applied to every layer input while training.

mod checkpoint;
mod fcn;
mod gcn;
mod head;
mod rgcn;
mod sgc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::normalize_adjacency;
use crate::numkit::rng::StreamRng;
use crate::numkit::{dropout_mask, DenseMatrix, ParamTensor, Parameterized, SparseAdjacency};

pub use checkpoint::{ParamCheckpoint, StoredTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use fcn::{FcnCache, FcnParams};
pub use gcn::{GcnCache, GcnParams};
pub use head::{HeadCache, HeadParams};
pub use rgcn::{RgcnCache, RgcnParams};
pub use sgc::{sgc_precompute, SgcCache, SgcParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackboneKind {
    Gcn,
    Sgc,
    Rgcn,
}

impl BackboneKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackboneKind::Gcn => "gcn",
            BackboneKind::Sgc => "sgc",
            BackboneKind::Rgcn => "rgcn",
        }
    }
}

impl std::str::FromStr for BackboneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(BackboneKind::Gcn),
            "sgc" => Ok(BackboneKind::Sgc),
            "rgcn" => Ok(BackboneKind::Rgcn),
            other => Err(Error::Parameter(format!("unknown backbone `{other}` (gcn, sgc, rgcn)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneConfig {
    pub kind: BackboneKind,
    pub layers: usize,
    pub hidden: usize,
    pub out_dim: usize,
    pub dropout: f64,
    pub sgc_power: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        Self {
            kind: BackboneKind::Gcn,
            layers: 2,
            hidden: 128,
            out_dim: 128,
            dropout: 0.5,
            sgc_power: 2,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 || self.hidden == 0 || self.out_dim == 0 {
            return Err(Error::Parameter("layers, hidden and out_dim must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Parameter(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.kind == BackboneKind::Sgc && self.sgc_power == 0 {
            return Err(Error::Parameter("sgc_power must be >= 1".into()));
        }
        Ok(())
    }

    /// Layer widths `in → hidden → … → out`.
    pub fn widths(&self, in_dim: usize) -> Vec<usize> {
        let mut w = vec![in_dim];
        w.extend(std::iter::repeat_n(self.hidden, self.layers - 1));
        w.push(self.out_dim);
        w
    }
}

/// Dropout rate plus the random stream masks are drawn from.
pub struct Dropout {
    rate: f64,
    rng: StreamRng,
}

impl Dropout {
    pub fn new(rate: f64, rng: StreamRng) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Self { rate, rng })
    }

    /// Applies a fresh mask to `x`, returning the dropped input and the mask.
    pub fn apply(&mut self, x: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        let mask = dropout_mask(x.rows(), x.cols(), self.rate, &mut self.rng)?;
        Ok((x.hadamard(&mask)?, mask))
    }
}

/// `x` after optional dropout; the mask is kept for the backward pass.
pub(crate) fn maybe_drop(x: &DenseMatrix, drop: &mut Option<&mut Dropout>) -> Result<(DenseMatrix, Option<DenseMatrix>)> {
    match drop {
        Some(d) => {
            let (y, m) = d.apply(x)?;
            Ok((y, Some(m)))
        }
        None => Ok((x.clone(), None)),
    }
}

pub(crate) fn undo_drop(grad: DenseMatrix, mask: &Option<DenseMatrix>) -> Result<DenseMatrix> {
    match mask {
        Some(m) => grad.hadamard(m),
        None => Ok(grad),
    }
}

/// Graph-side input of a backbone, prepared once per graph.
#[derive(Clone, Debug)]
pub enum BackboneInput {
    /// Node features and one normalized adjacency over the union of relations.
    Gcn { adj: SparseAdjacency, x: DenseMatrix },
    /// Pre-propagated features `Â^k X`.
    Sgc { propagated: DenseMatrix },
    /// Node features and one normalized adjacency per relation.
    Rgcn { adjs: Vec<SparseAdjacency>, x: DenseMatrix },
}

impl BackboneInput {
    /// Normalizes `relations` and prepares `x` for a backbone of the given kind.
    pub fn prepare(cfg: &BackboneConfig, relations: &[Vec<(usize, usize)>], x: DenseMatrix) -> Result<Self> {
        let n = x.rows();
        Ok(match cfg.kind {
            BackboneKind::Gcn => BackboneInput::Gcn {
                adj: normalize_adjacency(&relations.concat(), n)?,
                x,
            },
            BackboneKind::Sgc => {
                let adj = normalize_adjacency(&relations.concat(), n)?;
                BackboneInput::Sgc {
                    propagated: sgc_precompute(&adj, &x, cfg.sgc_power)?,
                }
            }
            BackboneKind::Rgcn => BackboneInput::Rgcn {
                adjs: relations
                    .iter()
                    .map(|r| normalize_adjacency(r, n))
                    .collect::<Result<_>>()?,
                x,
            },
        })
    }

    pub fn kind(&self) -> BackboneKind {
        match self {
            BackboneInput::Gcn { .. } => BackboneKind::Gcn,
            BackboneInput::Sgc { .. } => BackboneKind::Sgc,
            BackboneInput::Rgcn { .. } => BackboneKind::Rgcn,
        }
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            BackboneInput::Gcn { x, .. } | BackboneInput::Rgcn { x, .. } => x.rows(),
            BackboneInput::Sgc { propagated } => propagated.rows(),
        }
    }
}

/// Trainable parameters of one backbone.
#[derive(Clone, Debug, PartialEq)]
pub enum BackboneParams {
    Gcn(GcnParams),
    Sgc(SgcParams),
    Rgcn(RgcnParams),
}

pub enum BackboneCache {
    Gcn(GcnCache),
    Sgc(SgcCache),
    Rgcn(RgcnCache),
}

impl BackboneParams {
    /// Glorot-initialized parameters; `relations` is only used by RGCN.
    pub fn init(cfg: &BackboneConfig, in_dim: usize, relations: usize, rng: &mut StreamRng) -> Result<Self> {
        cfg.validate()?;
        Ok(match cfg.kind {
            BackboneKind::Gcn => BackboneParams::Gcn(GcnParams::init(&cfg.widths(in_dim), rng)),
            BackboneKind::Sgc => BackboneParams::Sgc(SgcParams::init(in_dim, cfg.out_dim, rng)),
            BackboneKind::Rgcn => BackboneParams::Rgcn(RgcnParams::init(&cfg.widths(in_dim), relations, rng)),
        })
    }

    pub fn kind(&self) -> BackboneKind {
        match self {
            BackboneParams::Gcn(_) => BackboneKind::Gcn,
            BackboneParams::Sgc(_) => BackboneKind::Sgc,
            BackboneParams::Rgcn(_) => BackboneKind::Rgcn,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            BackboneParams::Gcn(p) => p.in_dim(),
            BackboneParams::Sgc(p) => p.in_dim(),
            BackboneParams::Rgcn(p) => p.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            BackboneParams::Gcn(p) => p.out_dim(),
            BackboneParams::Sgc(p) => p.out_dim(),
            BackboneParams::Rgcn(p) => p.out_dim(),
        }
    }

    pub fn forward(&self, input: &BackboneInput, drop: Option<&mut Dropout>) -> Result<(DenseMatrix, BackboneCache)> {
        match (self, input) {
            (BackboneParams::Gcn(p), BackboneInput::Gcn { adj, x }) => {
                let (z, c) = p.forward(adj, x, drop)?;
                Ok((z, BackboneCache::Gcn(c)))
            }
            (BackboneParams::Sgc(p), BackboneInput::Sgc { propagated }) => {
                let (z, c) = p.forward(propagated, drop)?;
                Ok((z, BackboneCache::Sgc(c)))
            }
            (BackboneParams::Rgcn(p), BackboneInput::Rgcn { adjs, x }) => {
                let (z, c) = p.forward(adjs, x, drop)?;
                Ok((z, BackboneCache::Rgcn(c)))
            }
            (p, i) => Err(Error::dim(
                "backbone forward",
                format!("{} parameters", p.kind().as_str()),
                format!("{} input", i.kind().as_str()),
            )),
        }
    }

    /// Accumulates parameter gradients; returns the gradient w.r.t. the input features.
    pub fn backward(&mut self, input: &BackboneInput, cache: BackboneCache, grad: &DenseMatrix) -> Result<DenseMatrix> {
        match (self, input, cache) {
            (BackboneParams::Gcn(p), BackboneInput::Gcn { adj, .. }, BackboneCache::Gcn(c)) => p.backward(adj, c, grad),
            (BackboneParams::Sgc(p), BackboneInput::Sgc { .. }, BackboneCache::Sgc(c)) => p.backward(c, grad),
            (BackboneParams::Rgcn(p), BackboneInput::Rgcn { adjs, .. }, BackboneCache::Rgcn(c)) => p.backward(adjs, c, grad),
            (p, i, _) => Err(Error::dim(
                "backbone backward",
                format!("{} parameters", p.kind().as_str()),
                format!("{} input/cache", i.kind().as_str()),
            )),
        }
    }
}

impl Parameterized for BackboneParams {
    fn params(&self) -> Vec<&ParamTensor> {
        match self {
            BackboneParams::Gcn(p) => p.params(),
            BackboneParams::Sgc(p) => p.params(),
            BackboneParams::Rgcn(p) => p.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        match self {
            BackboneParams::Gcn(p) => p.params_mut(),
            BackboneParams::Sgc(p) => p.params_mut(),
            BackboneParams::Rgcn(p) => p.params_mut(),
        }
    }
}

/// Versions of `params` at forward time, checked again in backward.
pub(crate) fn stamp(params: &[&ParamTensor]) -> Vec<u64> {
    params.iter().map(|p| p.version()).collect()
}

pub(crate) fn check_stamp(params: &[&ParamTensor], stamp: &[u64]) -> Result<()> {
    for (p, &v) in params.iter().zip(stamp) {
        p.check_version(v)?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::numkit::rng::stream;
    use rand::Rng;

    pub fn random_matrix(r: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream(seed, &[]);
        DenseMatrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    pub fn random_edges(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut rng = stream(seed, &[1]);
        (0..count)
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .filter(|(a, b)| a != b)
            .collect()
    }

    /// Scalar test loss `Σ w ⊙ z` and its gradient `w`.
    pub fn weighted_sum(z: &DenseMatrix, w: &DenseMatrix) -> f64 {
        z.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
    }
}
