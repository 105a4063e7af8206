use crate::error::{Error, Result};
use crate::numkit::rng::StreamRng;
use crate::numkit::{glorot_uniform, relu_backward, relu_forward, DenseMatrix, ParamTensor, Parameterized, SparseAdjacency};

use super::gcn::{propagate, propagate_backward, LayerCache};
use super::{check_stamp, maybe_drop, stamp, undo_drop, Dropout};

#[derive(Clone, Debug, PartialEq)]
pub struct RgcnLayer {
    pub relations: Vec<ParamTensor>,
    pub self_weight: ParamTensor,
}

/// Relational GCN: `H' = σ(Σ_k Â_k H W_k + H W_self)` per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RgcnParams {
    pub layers: Vec<RgcnLayer>,
}

pub struct RgcnCache {
    layers: Vec<LayerCache>,
    stamp: Vec<u64>,
}

impl RgcnParams {
    pub fn init(widths: &[usize], relations: usize, rng: &mut StreamRng) -> Self {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| RgcnLayer {
                relations: (0..relations)
                    .map(|k| ParamTensor::new(format!("rgcn.{l}.rel{k}"), glorot_uniform(w[0], w[1], rng)))
                    .collect(),
                self_weight: ParamTensor::new(format!("rgcn.{l}.self"), glorot_uniform(w[0], w[1], rng)),
            })
            .collect();
        Self { layers }
    }

    pub fn num_relations(&self) -> usize {
        self.layers[0].relations.len()
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].self_weight.shape().0
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").self_weight.shape().1
    }

    pub fn forward(&self, adjs: &[SparseAdjacency], x: &DenseMatrix, mut drop: Option<&mut Dropout>) -> Result<(DenseMatrix, RgcnCache)> {
        if adjs.len() != self.num_relations() {
            return Err(Error::dim(
                "rgcn_forward",
                format!("{} relation weights", self.num_relations()),
                format!("{} adjacencies", adjs.len()),
            ));
        }
        if let Some(a) = adjs.iter().find(|a| a.n() != x.rows()) {
            return Err(Error::dim("rgcn_forward", format!("adjacency n={}", a.n()), x.shape_str()));
        }
        if x.cols() != self.in_dim() {
            return Err(Error::dim("rgcn_forward", format!("in_dim {}", self.in_dim()), x.shape_str()));
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let (input, drop_mask) = maybe_drop(&h, &mut drop)?;
            let mut s = propagate(&adjs[0], &input, layer.relations[0].value())?;
            for (adj, w) in adjs.iter().zip(&layer.relations).skip(1) {
                s.add_assign(&propagate(adj, &input, w.value())?)?;
            }
            s.add_assign(&input.matmul(layer.self_weight.value())?)?;
            let relu = if l < last {
                let (y, mask) = relu_forward(&s);
                h = y;
                Some(mask)
            } else {
                h = s;
                None
            };
            caches.push(LayerCache { input, drop_mask, relu });
        }
        let stamp = stamp(&self.params());
        Ok((h, RgcnCache { layers: caches, stamp }))
    }

    pub fn backward(&mut self, adjs: &[SparseAdjacency], cache: RgcnCache, grad: &DenseMatrix) -> Result<DenseMatrix> {
        check_stamp(&self.params(), &cache.stamp)?;
        let mut g = grad.clone();
        for (layer, lc) in self.layers.iter_mut().zip(cache.layers).rev() {
            if let Some(mask) = &lc.relu {
                g = relu_backward(mask, &g)?;
            }
            let mut dh = g.matmul_nt(layer.self_weight.value())?;
            layer.self_weight.accumulate_grad(&lc.input.matmul_tn(&g)?)?;
            for (adj, w) in adjs.iter().zip(layer.relations.iter_mut()) {
                let (dw, dhk) = propagate_backward(adj, &lc.input, w.value(), &g)?;
                w.accumulate_grad(&dw)?;
                dh.add_assign(&dhk)?;
            }
            g = undo_drop(dh, &lc.drop_mask)?;
        }
        Ok(g)
    }
}

impl Parameterized for RgcnParams {
    fn params(&self) -> Vec<&ParamTensor> {
        self.layers
            .iter()
            .flat_map(|l| l.relations.iter().chain(std::iter::once(&l.self_weight)))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.relations.iter_mut().chain(std::iter::once(&mut l.self_weight)))
            .collect()
    }
}
