use crate::error::{Error, Result};
use crate::numkit::rng::StreamRng;
use crate::numkit::{glorot_uniform, relu_backward, relu_forward, DenseMatrix, ParamTensor, Parameterized, ReluMask, SparseAdjacency};

use super::{check_stamp, maybe_drop, stamp, undo_drop, Dropout};

/// Stacked `H' = σ(Â H W)` layers; no rectifier after the last layer.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnParams {
    pub weights: Vec<ParamTensor>,
}

pub(crate) struct LayerCache {
    pub input: DenseMatrix,
    pub drop_mask: Option<DenseMatrix>,
    pub relu: Option<ReluMask>,
}

pub struct GcnCache {
    layers: Vec<LayerCache>,
    stamp: Vec<u64>,
}

/// `Â (H W)`: the product order shared by GCN and RGCN.
pub(crate) fn propagate(adj: &SparseAdjacency, h: &DenseMatrix, w: &DenseMatrix) -> Result<DenseMatrix> {
    adj.spmm(&h.matmul(w)?)
}

/// Backward of [`propagate`]: returns `(dW, dH)` for upstream `g`.
pub(crate) fn propagate_backward(adj: &SparseAdjacency, h: &DenseMatrix, w: &DenseMatrix, g: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let dp = adj.spmm_t(g)?;
    Ok((h.matmul_tn(&dp)?, dp.matmul_nt(w)?))
}

impl GcnParams {
    pub fn init(widths: &[usize], rng: &mut StreamRng) -> Self {
        let weights = widths
            .windows(2)
            .enumerate()
            .map(|(l, w)| ParamTensor::new(format!("gcn.{l}.weight"), glorot_uniform(w[0], w[1], rng)))
            .collect();
        Self { weights }
    }

    pub fn from_weights(weights: Vec<DenseMatrix>) -> Result<Self> {
        for (l, pair) in weights.windows(2).enumerate() {
            if pair[0].cols() != pair[1].rows() {
                return Err(Error::dim(
                    "gcn layer chain",
                    format!("layer {l}: {}", pair[0].shape_str()),
                    format!("layer {}: {}", l + 1, pair[1].shape_str()),
                ));
            }
        }
        Ok(Self {
            weights: weights
                .into_iter()
                .enumerate()
                .map(|(l, w)| ParamTensor::new(format!("gcn.{l}.weight"), w))
                .collect(),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights[0].shape().0
    }

    pub fn out_dim(&self) -> usize {
        self.weights.last().expect("at least one layer").shape().1
    }

    pub fn forward(&self, adj: &SparseAdjacency, x: &DenseMatrix, mut drop: Option<&mut Dropout>) -> Result<(DenseMatrix, GcnCache)> {
        if adj.n() != x.rows() {
            return Err(Error::dim("gcn_forward", format!("adjacency n={}", adj.n()), x.shape_str()));
        }
        if x.cols() != self.in_dim() {
            return Err(Error::dim("gcn_forward", format!("in_dim {}", self.in_dim()), x.shape_str()));
        }
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        let mut layers = Vec::with_capacity(self.weights.len());
        for (l, w) in self.weights.iter().enumerate() {
            let (input, drop_mask) = maybe_drop(&h, &mut drop)?;
            let s = propagate(adj, &input, w.value())?;
            let relu = if l < last {
                let (y, mask) = relu_forward(&s);
                h = y;
                Some(mask)
            } else {
                h = s;
                None
            };
            layers.push(LayerCache { input, drop_mask, relu });
        }
        let stamp = stamp(&self.params());
        Ok((h, GcnCache { layers, stamp }))
    }

    pub fn backward(&mut self, adj: &SparseAdjacency, cache: GcnCache, grad: &DenseMatrix) -> Result<DenseMatrix> {
        check_stamp(&self.params(), &cache.stamp)?;
        let mut g = grad.clone();
        for (w, layer) in self.weights.iter_mut().zip(cache.layers).rev() {
            if let Some(mask) = &layer.relu {
                g = relu_backward(mask, &g)?;
            }
            let (dw, dh) = propagate_backward(adj, &layer.input, w.value(), &g)?;
            w.accumulate_grad(&dw)?;
            g = undo_drop(dh, &layer.drop_mask)?;
        }
        Ok(g)
    }
}

impl Parameterized for GcnParams {
    fn params(&self) -> Vec<&ParamTensor> {
        self.weights.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.weights.iter_mut().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbones::testutil::*;
    use crate::graphstore::normalize_adjacency;
    use crate::numkit::finite_diff_check;
    use crate::numkit::rng::stream;

    fn check_gradient(layers: usize) -> f64 {
        let n = 12;
        let adj = normalize_adjacency(&random_edges(n, 20, layers as u64), n).unwrap();
        let x = random_matrix(n, 5, 1);
        let w = random_matrix(n, 3, 2);
        let mut widths = vec![5];
        widths.extend(std::iter::repeat_n(4, layers - 1));
        widths.push(3);
        let mut p = GcnParams::init(&widths, &mut stream(3, &[]));
        let (_, cache) = p.forward(&adj, &x, None).unwrap();
        let dx = p.backward(&adj, cache, &w).unwrap();
        assert_eq!(dx.shape(), x.shape());
        finite_diff_check(&mut p, 1e-5, |p| weighted_sum(&p.forward(&adj, &x, None).unwrap().0, &w))
    }

    #[test]
    fn gradient_one_layer() {
        let err = check_gradient(1);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn gradient_two_layers() {
        let err = check_gradient(2);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn gradient_three_layers() {
        let err = check_gradient(3);
        assert!(err <= 1e-4, "{err}");
    }

    #[test]
    fn identity_adjacency_and_weights_is_identity_map() {
        let x = random_matrix(6, 4, 9);
        let p = GcnParams::from_weights(vec![DenseMatrix::identity(4)]).unwrap();
        let (z, _) = p.forward(&SparseAdjacency::identity(6), &x, None).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn zero_features_give_zero_embedding() {
        let adj = normalize_adjacency(&random_edges(8, 10, 0), 8).unwrap();
        let p = GcnParams::init(&[3, 4, 2], &mut stream(0, &[]));
        let (z, _) = p.forward(&adj, &DenseMatrix::zeros(8, 3), None).unwrap();
        assert!(z.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_cache_is_rejected() {
        let adj = SparseAdjacency::identity(3);
        let x = random_matrix(3, 2, 0);
        let mut p = GcnParams::init(&[2, 2], &mut stream(0, &[]));
        let (z, cache) = p.forward(&adj, &x, None).unwrap();
        p.weights[0].value_mut().as_mut_slice()[0] += 1.0;
        assert!(matches!(p.backward(&adj, cache, &z), Err(Error::StaleCache { .. })));
    }

    #[test]
    fn inference_ignores_dropout_seed_and_training_uses_it() {
        let adj = normalize_adjacency(&random_edges(10, 15, 4), 10).unwrap();
        let x = random_matrix(10, 4, 5);
        let p = GcnParams::init(&[4, 6, 2], &mut stream(1, &[]));
        let (a, _) = p.forward(&adj, &x, None).unwrap();
        let (b, _) = p.forward(&adj, &x, None).unwrap();
        assert_eq!(a, b);
        let mut d1 = Dropout::new(0.5, stream(1, &[])).unwrap();
        let mut d2 = Dropout::new(0.5, stream(2, &[])).unwrap();
        let (t1, _) = p.forward(&adj, &x, Some(&mut d1)).unwrap();
        let (t2, _) = p.forward(&adj, &x, Some(&mut d2)).unwrap();
        assert_ne!(t1, t2);
    }

    #[test]
    fn shape_mismatch() {
        let p = GcnParams::init(&[3, 2], &mut stream(0, &[]));
        assert!(p.forward(&SparseAdjacency::identity(4), &DenseMatrix::zeros(4, 5), None).is_err());
        assert!(p.forward(&SparseAdjacency::identity(3), &DenseMatrix::zeros(4, 3), None).is_err());
    }
}
