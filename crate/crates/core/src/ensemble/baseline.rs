//! A single backbone plus head trained on the whole graph, with its own
//! training loop. Used as the comparison baseline and to check that a
//! one-branch, nothing-dropped ensemble reduces to it.

use crate::backbones::{BackboneConfig, BackboneInput, BackboneParams, Dropout, HeadParams};
use crate::error::{Error, Result};
use crate::graphstore::MultiRelationGraph;
use crate::numkit::rng::{branch_seed, stream, tag};
use crate::numkit::{cross_entropy, AdamWState, DenseMatrix, ParamTensor, Parameterized};

use super::branch::step;
use super::TrainConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct StandaloneModel {
    pub arch: BackboneConfig,
    pub backbone: BackboneParams,
    pub head: HeadParams,
}

impl Parameterized for StandaloneModel {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.backbone.params();
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.backbone.params_mut();
        p.extend(self.head.params_mut());
        p
    }
}

/// Trains one backbone on all nodes, features and edges for `cfg.epochs`.
///
/// Randomness comes from the seed branch 0 of an ensemble under
/// `cfg.master_seed` would own; the sampling rates and branch count are ignored.
pub fn train_standalone(g: &MultiRelationGraph, cfg: &TrainConfig) -> Result<StandaloneModel> {
    cfg.validate()?;
    let train = &g.splits().train;
    if train.is_empty() {
        return Err(Error::EmptySupervision(": the graph has no training nodes".into()));
    }
    let seed = branch_seed(cfg.master_seed, 0);
    let input = BackboneInput::prepare(&cfg.backbone, g.all_edges(), g.features().clone())?;

    let mut init = stream(seed, &[tag::INIT]);
    let backbone = BackboneParams::init(&cfg.backbone, g.m(), g.k(), &mut init)?;
    let head = HeadParams::init(cfg.backbone.out_dim, g.num_classes(), &mut init);
    let mut model = StandaloneModel {
        arch: cfg.backbone.clone(),
        backbone,
        head,
    };
    let mut drop = Dropout::new(cfg.backbone.dropout, stream(seed, &[tag::DROPOUT]))?;
    let hp = cfg.optimizer();
    let mut states: Vec<AdamWState> = model.params().into_iter().map(AdamWState::for_param).collect();

    for _ in 0..cfg.epochs {
        model.zero_grad();
        let (emb, bcache) = model.backbone.forward(&input, Some(&mut drop))?;
        let (logits, _, hcache) = model.head.forward(&emb)?;
        let (_, grad) = cross_entropy(&logits, g.labels(), train)?;
        let d_emb = model.head.backward(hcache, &grad)?;
        model.backbone.backward(&input, bcache, &d_emb)?;
        step(&mut model, &mut states, &hp)?;
    }
    Ok(model)
}

/// Full-graph class probabilities of a standalone model.
pub fn standalone_predict(g: &MultiRelationGraph, model: &StandaloneModel) -> Result<DenseMatrix> {
    if model.backbone.in_dim() != g.m() {
        return Err(Error::dim(
            "standalone_predict",
            format!("model in_dim {}", model.backbone.in_dim()),
            format!("graph with M = {}", g.m()),
        ));
    }
    let input = BackboneInput::prepare(&model.arch, g.all_edges(), g.features().clone())?;
    let (emb, _) = model.backbone.forward(&input, None)?;
    Ok(model.head.forward(&emb)?.1)
}
