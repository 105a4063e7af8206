use crate::error::{Error, Result};
use crate::numkit::rng::StreamRng;
use crate::numkit::{glorot_uniform, relu_backward, relu_forward, DenseMatrix, ParamTensor, Parameterized, ReluMask};

use super::{check_stamp, maybe_drop, stamp, undo_drop, Dropout};

/// Two-layer perceptron `in → hidden → out` with a rectifier in between.
/// Used on the feature columns a branch's backbone does not see.
#[derive(Clone, Debug, PartialEq)]
pub struct FcnParams {
    pub w1: ParamTensor,
    pub b1: ParamTensor,
    pub w2: ParamTensor,
    pub b2: ParamTensor,
}

pub struct FcnCache {
    input: DenseMatrix,
    input_mask: Option<DenseMatrix>,
    hidden: DenseMatrix,
    hidden_mask: Option<DenseMatrix>,
    relu: ReluMask,
    stamp: Vec<u64>,
}

impl FcnParams {
    pub fn init(in_dim: usize, hidden: usize, out_dim: usize, rng: &mut StreamRng) -> Self {
        Self {
            w1: ParamTensor::new("fcn.0.weight", glorot_uniform(in_dim, hidden, rng)),
            b1: ParamTensor::new("fcn.0.bias", DenseMatrix::zeros(1, hidden)),
            w2: ParamTensor::new("fcn.1.weight", glorot_uniform(hidden, out_dim, rng)),
            b2: ParamTensor::new("fcn.1.bias", DenseMatrix::zeros(1, out_dim)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w1.shape().0
    }

    pub fn out_dim(&self) -> usize {
        self.w2.shape().1
    }

    pub fn forward(&self, x: &DenseMatrix, mut drop: Option<&mut Dropout>) -> Result<(DenseMatrix, FcnCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::dim("fcn_forward", format!("in_dim {}", self.in_dim()), x.shape_str()));
        }
        let (input, input_mask) = maybe_drop(x, &mut drop)?;
        let mut pre = input.matmul(self.w1.value())?;
        pre.add_row_vector(self.b1.value().as_slice())?;
        let (act, relu) = relu_forward(&pre);
        let (hidden, hidden_mask) = maybe_drop(&act, &mut drop)?;
        let mut out = hidden.matmul(self.w2.value())?;
        out.add_row_vector(self.b2.value().as_slice())?;
        let stamp = stamp(&self.params());
        Ok((
            out,
            FcnCache {
                input,
                input_mask,
                hidden,
                hidden_mask,
                relu,
                stamp,
            },
        ))
    }

    pub fn backward(&mut self, cache: FcnCache, grad: &DenseMatrix) -> Result<DenseMatrix> {
        check_stamp(&self.params(), &cache.stamp)?;
        self.w2.accumulate_grad(&cache.hidden.matmul_tn(grad)?)?;
        self.b2.accumulate_grad(&grad.column_sums())?;
        let d_hidden = undo_drop(grad.matmul_nt(self.w2.value())?, &cache.hidden_mask)?;
        let d_pre = relu_backward(&cache.relu, &d_hidden)?;
        self.w1.accumulate_grad(&cache.input.matmul_tn(&d_pre)?)?;
        self.b1.accumulate_grad(&d_pre.column_sums())?;
        undo_drop(d_pre.matmul_nt(self.w1.value())?, &cache.input_mask)
    }
}

impl Parameterized for FcnParams {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}
