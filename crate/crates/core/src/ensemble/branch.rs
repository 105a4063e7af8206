use crate::backbones::{
    BackboneCache, BackboneConfig, BackboneInput, BackboneParams, Dropout, FcnCache, FcnParams, HeadCache, HeadParams,
};
use crate::error::{Error, Result};
use crate::graphstore::MultiRelationGraph;
use crate::numkit::rng::{stream, tag, StreamRng};
use crate::numkit::{adamw_step, cross_entropy, AdamW, AdamWState, DenseMatrix, ParamTensor, Parameterized};

use super::{BranchSpec, TrainConfig};

/// Graph-side inputs for one branch: the backbone's view of `X[:, F_i]` and
/// the raw left-out columns `X[:, F̃_i]` for the aligning FCN.
pub struct BranchInput {
    pub backbone: BackboneInput,
    pub rest: Option<DenseMatrix>,
}

impl BranchInput {
    /// Inputs over the branch's training subgraph (sampled nodes, kept edges).
    /// Also returns the training mask re-indexed into the subgraph.
    pub fn training(g: &MultiRelationGraph, spec: &BranchSpec, arch: &BackboneConfig, aligning: bool) -> Result<(Self, Vec<usize>)> {
        spec.validate_against(g)?;
        let mut local = vec![usize::MAX; g.n()];
        for (new, &old) in spec.sampled_nodes.iter().enumerate() {
            local[old] = new;
        }
        let relations: Vec<Vec<(usize, usize)>> = spec
            .kept_edges
            .iter()
            .map(|rel| rel.iter().map(|&(s, d)| (local[s], local[d])).collect())
            .collect();
        let x = g.features().select_rows(&spec.sampled_nodes)?;
        let input = Self::build(arch, &relations, &x, spec, aligning)?;
        let train = g
            .splits()
            .train
            .iter()
            .filter(|&&v| local[v] != usize::MAX)
            .map(|&v| local[v])
            .collect();
        Ok((input, train))
    }

    /// Inputs over the full graph, used for inference.
    pub fn full(g: &MultiRelationGraph, spec: &BranchSpec, arch: &BackboneConfig, aligning: bool) -> Result<Self> {
        if spec.num_features != g.m() {
            return Err(Error::dim(
                "branch inputs",
                format!("spec built for M = {}", spec.num_features),
                format!("graph with M = {}", g.m()),
            ));
        }
        Self::build(arch, g.all_edges(), g.features(), spec, aligning)
    }

    fn build(arch: &BackboneConfig, relations: &[Vec<(usize, usize)>], x: &DenseMatrix, spec: &BranchSpec, aligning: bool) -> Result<Self> {
        let backbone = BackboneInput::prepare(arch, relations, x.select_columns(&spec.selected_features)?)?;
        let rest = if aligning && !spec.remaining_features.is_empty() {
            Some(x.select_columns(&spec.remaining_features)?)
        } else {
            None
        };
        Ok(Self { backbone, rest })
    }
}

/// Parameters of one trained branch.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchModel {
    pub arch: BackboneConfig,
    pub backbone: BackboneParams,
    /// Present only when aligning is on and the left-out feature set is non-empty.
    pub fcn: Option<FcnParams>,
    pub head: HeadParams,
}

pub struct BranchCache {
    backbone: BackboneCache,
    fcn: Option<(FcnCache, DenseMatrix)>,
    embedding: DenseMatrix,
    head: HeadCache,
}

impl BranchModel {
    /// Draws initial weights in the fixed order backbone, FCN, head.
    pub fn init(
        arch: &BackboneConfig,
        selected: usize,
        remaining: usize,
        relations: usize,
        classes: usize,
        aligning: bool,
        rng: &mut StreamRng,
    ) -> Result<Self> {
        let backbone = BackboneParams::init(arch, selected, relations, rng)?;
        let fcn = (aligning && remaining > 0).then(|| FcnParams::init(remaining, arch.hidden, arch.out_dim, rng));
        let head = HeadParams::init(arch.out_dim, classes, rng);
        Ok(Self {
            arch: arch.clone(),
            backbone,
            fcn,
            head,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.head.num_classes()
    }

    /// `Z = G(X[:, F]) ⊙ F(X[:, F̃])` (or just the embedding), then the head.
    /// Returns `(logits, probabilities, cache)`.
    pub fn forward(&self, input: &BranchInput, mut drop: Option<&mut Dropout>) -> Result<(DenseMatrix, DenseMatrix, BranchCache)> {
        let (embedding, bcache) = self.backbone.forward(&input.backbone, drop.as_deref_mut())?;
        let (z, fcn) = match (&self.fcn, &input.rest) {
            (Some(f), Some(rest)) => {
                let (out, cache) = f.forward(rest, drop)?;
                (embedding.hadamard(&out)?, Some((cache, out)))
            }
            (None, None) => (embedding.clone(), None),
            _ => {
                return Err(Error::Parameter(
                    "aligning FCN and left-out feature input must be both present or both absent".into(),
                ))
            }
        };
        let (logits, probs, head) = self.head.forward(&z)?;
        Ok((
            logits,
            probs,
            BranchCache {
                backbone: bcache,
                fcn,
                embedding,
                head,
            },
        ))
    }

    /// Accumulates gradients of every branch parameter from `d loss / d logits`.
    pub fn backward(&mut self, input: &BranchInput, cache: BranchCache, grad_logits: &DenseMatrix) -> Result<()> {
        let dz = self.head.backward(cache.head, grad_logits)?;
        let d_emb = match (cache.fcn, self.fcn.as_mut()) {
            (Some((fcache, out)), Some(f)) => {
                f.backward(fcache, &dz.hadamard(&cache.embedding)?)?;
                dz.hadamard(&out)?
            }
            _ => dz,
        };
        self.backbone.backward(&input.backbone, cache.backbone, &d_emb)?;
        Ok(())
    }
}

impl Parameterized for BranchModel {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = self.backbone.params();
        if let Some(f) = &self.fcn {
            p.extend(f.params());
        }
        p.extend(self.head.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.backbone.params_mut();
        if let Some(f) = self.fcn.as_mut() {
            p.extend(f.params_mut());
        }
        p.extend(self.head.params_mut());
        p
    }
}

/// Per-epoch record of a training run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub losses: Vec<f64>,
    /// Epoch whose parameters were kept when best-validation selection is on.
    pub best_epoch: Option<usize>,
}

fn accuracy_on(probs: &DenseMatrix, labels: &[usize], nodes: &[usize]) -> f64 {
    let pred = probs.argmax_rows();
    let hits = nodes.iter().filter(|&&v| pred[v] == labels[v]).count();
    hits as f64 / nodes.len() as f64
}

/// Trains one branch on its subgraph and returns the final parameters.
pub fn train_branch(g: &MultiRelationGraph, spec: &BranchSpec, cfg: &TrainConfig, aligning: bool) -> Result<BranchModel> {
    train_branch_logged(g, spec, cfg, aligning).map(|(m, _)| m)
}

/// [`train_branch`] that also returns the loss curve.
pub fn train_branch_logged(
    g: &MultiRelationGraph,
    spec: &BranchSpec,
    cfg: &TrainConfig,
    aligning: bool,
) -> Result<(BranchModel, TrainLog)> {
    cfg.validate()?;
    let (input, train) = BranchInput::training(g, spec, &cfg.backbone, aligning)?;
    if train.is_empty() {
        return Err(Error::EmptySupervision(format!(
            ": no training node survived node sampling in branch {}; increase alpha",
            spec.index
        )));
    }
    let labels: Vec<usize> = spec.sampled_nodes.iter().map(|&v| g.labels()[v]).collect();

    let mut model = BranchModel::init(
        &cfg.backbone,
        spec.selected_features.len(),
        spec.remaining_features.len(),
        g.k(),
        g.num_classes(),
        aligning,
        &mut stream(spec.seed, &[tag::INIT]),
    )?;
    let mut drop = Dropout::new(cfg.backbone.dropout, stream(spec.seed, &[tag::DROPOUT]))?;
    let hp = cfg.optimizer();
    let mut states: Vec<AdamWState> = model.params().into_iter().map(AdamWState::for_param).collect();

    let selection = if cfg.select_best_val {
        let val = g.splits().val.clone();
        if val.is_empty() {
            return Err(Error::EmptySupervision(": best-validation selection needs a validation split".into()));
        }
        Some((BranchInput::full(g, spec, &cfg.backbone, aligning)?, val))
    } else {
        None
    };
    let mut best: Option<(f64, usize, BranchModel)> = None;

    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        model.zero_grad();
        let (logits, _, cache) = model.forward(&input, Some(&mut drop))?;
        let (loss, grad) = cross_entropy(&logits, &labels, &train)?;
        model.backward(&input, cache, &grad)?;
        step(&mut model, &mut states, &hp)?;
        log.losses.push(loss);

        if let Some((full, val)) = &selection {
            let (_, probs, _) = model.forward(full, None)?;
            let acc = accuracy_on(&probs, g.labels(), val);
            if best.as_ref().is_none_or(|(b, _, _)| acc > *b) {
                best = Some((acc, epoch, model.clone()));
            }
        }
    }
    if let Some((_, epoch, kept)) = best {
        model = kept;
        log.best_epoch = Some(epoch);
    }
    Ok((model, log))
}

pub(crate) fn step<M: Parameterized>(model: &mut M, states: &mut [AdamWState], hp: &AdamW) -> Result<()> {
    for (p, s) in model.params_mut().into_iter().zip(states.iter_mut()) {
        adamw_step(p, s, hp)?;
    }
    Ok(())
}

/// Class probabilities `Ŷ_i` for every node of the full graph, without dropout.
pub fn branch_predict(g: &MultiRelationGraph, spec: &BranchSpec, model: &BranchModel) -> Result<DenseMatrix> {
    let aligning = model.fcn.is_some();
    if model.backbone.in_dim() != spec.selected_features.len() {
        return Err(Error::dim(
            "branch_predict",
            format!("backbone in_dim {}", model.backbone.in_dim()),
            format!("{} selected features", spec.selected_features.len()),
        ));
    }
    if let Some(f) = &model.fcn {
        if f.in_dim() != spec.remaining_features.len() {
            return Err(Error::dim(
                "branch_predict",
                format!("FCN in_dim {}", f.in_dim()),
                format!("{} remaining features", spec.remaining_features.len()),
            ));
        }
    }
    let input = BranchInput::full(g, spec, &model.arch, aligning)?;
    let (_, probs, _) = model.forward(&input, None)?;
    Ok(probs)
}

/// The aligned representation `Z_i` the head sees, for every node of the full graph.
pub fn branch_embedding(g: &MultiRelationGraph, spec: &BranchSpec, model: &BranchModel) -> Result<DenseMatrix> {
    let input = BranchInput::full(g, spec, &model.arch, model.fcn.is_some())?;
    let (embedding, _) = model.backbone.forward(&input.backbone, None)?;
    match (&model.fcn, &input.rest) {
        (Some(f), Some(rest)) => embedding.hadamard(&f.forward(rest, None)?.0),
        _ => Ok(embedding),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbones::BackboneKind;
    use crate::ensemble::{build_branch_spec, Variant};
    use crate::graphstore::{generate_synthetic, Splits, SyntheticParams};
    use crate::numkit::finite_diff_check;

    fn small_cfg(kind: BackboneKind) -> TrainConfig {
        TrainConfig {
            alpha: 0.8,
            beta: 0.6,
            gamma: 0.9,
            epochs: 30,
            backbone: BackboneConfig {
                kind,
                hidden: 8,
                out_dim: 6,
                ..BackboneConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn synth(relations: usize) -> MultiRelationGraph {
        generate_synthetic(&SyntheticParams {
            n: 60,
            informative_dims: 4,
            redundant_dims: 4,
            noise_dims: 4,
            p_in: 0.15,
            p_out: 0.02,
            relations,
            ..SyntheticParams::default()
        })
        .unwrap()
    }

    #[test]
    fn aligned_branch_gradient_matches_finite_differences() {
        let g = generate_synthetic(&SyntheticParams {
            n: 14,
            informative_dims: 2,
            redundant_dims: 2,
            noise_dims: 2,
            p_in: 0.4,
            p_out: 0.1,
            relations: 2,
            ..SyntheticParams::default()
        })
        .unwrap();
        for kind in [BackboneKind::Gcn, BackboneKind::Sgc, BackboneKind::Rgcn] {
            let cfg = TrainConfig {
                alpha: 1.0,
                beta: 0.5,
                ..small_cfg(kind)
            };
            let spec = build_branch_spec(&g, &cfg, 0, Variant::Full).unwrap();
            let (input, _) = BranchInput::training(&g, &spec, &cfg.backbone, true).unwrap();
            let mut model = BranchModel::init(&cfg.backbone, 3, 3, 2, 2, true, &mut stream(1, &[])).unwrap();
            assert!(model.fcn.is_some());
            let labels = g.labels().to_vec();
            let mask: Vec<usize> = (0..g.n()).step_by(2).collect();
            let (logits, _, cache) = model.forward(&input, None).unwrap();
            let (_, grad) = cross_entropy(&logits, &labels, &mask).unwrap();
            model.backward(&input, cache, &grad).unwrap();
            let err = finite_diff_check(&mut model, 1e-5, |m| {
                let (logits, _, _) = m.forward(&input, None).unwrap();
                cross_entropy(&logits, &labels, &mask).unwrap().0
            });
            assert!(err <= 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn loss_decreases_over_first_epochs() {
        let g = synth(1);
        let mut cfg = TrainConfig {
            epochs: 10,
            ..small_cfg(BackboneKind::Gcn)
        };
        // with dropout on, single-epoch losses are too noisy to be monotone
        cfg.backbone.dropout = 0.0;
        let spec = build_branch_spec(&g, &cfg, 0, Variant::Full).unwrap();
        let (_, log) = train_branch_logged(&g, &spec, &cfg, true).unwrap();
        assert_eq!(log.losses.len(), 10);
        for w in log.losses.windows(2) {
            assert!(w[1] < w[0], "{:?}", log.losses);
        }
    }

    #[test]
    fn predictions_are_distributions_and_deterministic() {
        let g = synth(2);
        for kind in [BackboneKind::Gcn, BackboneKind::Sgc, BackboneKind::Rgcn] {
            let cfg = small_cfg(kind);
            let spec = build_branch_spec(&g, &cfg, 1, Variant::Full).unwrap();
            let model = train_branch(&g, &spec, &cfg, true).unwrap();
            let a = branch_predict(&g, &spec, &model).unwrap();
            let b = branch_predict(&g, &spec, &model).unwrap();
            assert_eq!(a.shape(), (g.n(), 2));
            assert_eq!(a, b);
            for row in a.iter_rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    fn separable() -> MultiRelationGraph {
        // two disconnected pairs; one labelled node per pair
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0], vec![0.1, 0.9]]).unwrap();
        let splits = Splits {
            train: vec![0, 2],
            val: vec![],
            test: vec![1, 3],
        };
        MultiRelationGraph::new(x, vec![vec![(0, 1), (2, 3)]], vec![0, 0, 1, 1], 2, splits).unwrap()
    }

    #[test]
    fn separable_fixture_is_learned() {
        let g = separable();
        let cfg = TrainConfig {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            epochs: 100,
            backbone: BackboneConfig {
                hidden: 8,
                out_dim: 8,
                dropout: 0.0,
                ..BackboneConfig::default()
            },
            ..TrainConfig::default()
        };
        let spec = build_branch_spec(&g, &cfg, 0, Variant::Full).unwrap();
        let model = train_branch(&g, &spec, &cfg, true).unwrap();
        let pred = branch_predict(&g, &spec, &model).unwrap().argmax_rows();
        assert_eq!(pred, vec![0, 0, 1, 1]);
    }

    #[test]
    fn empty_supervision_advises_alpha() {
        let g = separable();
        let cfg = TrainConfig {
            alpha: 0.25,
            beta: 1.0,
            gamma: 1.0,
            epochs: 1,
            ..TrainConfig::default()
        };
        // find a branch whose single sampled node is unlabelled
        let spec = (0..64)
            .map(|i| build_branch_spec(&g, &cfg, i, Variant::Es).unwrap())
            .find(|s| !g.splits().train.contains(&s.sampled_nodes[0]))
            .unwrap();
        let err = train_branch(&g, &spec, &cfg, false).unwrap_err();
        assert!(matches!(err, Error::EmptySupervision(_)));
        assert!(err.to_string().contains("alpha"));
    }

    #[test]
    fn mismatched_spec_is_rejected() {
        let g = synth(1);
        let cfg = small_cfg(BackboneKind::Gcn);
        let spec = build_branch_spec(&g, &cfg, 0, Variant::Full).unwrap();
        let model = train_branch(&g, &spec, &TrainConfig { epochs: 1, ..cfg.clone() }, true).unwrap();
        let other = build_branch_spec(&g, &TrainConfig { beta: 0.9, ..cfg }, 0, Variant::Full).unwrap();
        assert!(branch_predict(&g, &other, &model).is_err());
    }

    #[test]
    fn best_val_selection_records_epoch() {
        let g = synth(1);
        let cfg = TrainConfig {
            select_best_val: true,
            ..small_cfg(BackboneKind::Gcn)
        };
        let spec = build_branch_spec(&g, &cfg, 0, Variant::Full).unwrap();
        let (_, log) = train_branch_logged(&g, &spec, &cfg, true).unwrap();
        assert!(log.best_epoch.unwrap() < cfg.epochs);
    }
}
