use crate::error::{Error, Result};
use crate::numkit::rng::StreamRng;
use crate::numkit::{glorot_uniform, softmax_rows, DenseMatrix, ParamTensor, Parameterized};

use super::{check_stamp, stamp};

/// Linear classifier `softmax(Z W + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

pub struct HeadCache {
    input: DenseMatrix,
    stamp: Vec<u64>,
}

impl HeadParams {
    pub fn init(d: usize, classes: usize, rng: &mut StreamRng) -> Self {
        Self {
            weight: ParamTensor::new("head.weight", glorot_uniform(d, classes, rng)),
            bias: ParamTensor::new("head.bias", DenseMatrix::zeros(1, classes)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape().0
    }

    pub fn num_classes(&self) -> usize {
        self.weight.shape().1
    }

    /// Returns `(logits, probabilities, cache)`.
    pub fn forward(&self, z: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix, HeadCache)> {
        if z.cols() != self.in_dim() {
            return Err(Error::dim("head_forward", format!("d = {}", self.in_dim()), z.shape_str()));
        }
        let mut logits = z.matmul(self.weight.value())?;
        logits.add_row_vector(self.bias.value().as_slice())?;
        let probs = softmax_rows(&logits);
        let stamp = stamp(&self.params());
        Ok((logits, probs, HeadCache { input: z.clone(), stamp }))
    }

    /// Takes the gradient w.r.t. the logits; returns the gradient w.r.t. `z`.
    pub fn backward(&mut self, cache: HeadCache, grad_logits: &DenseMatrix) -> Result<DenseMatrix> {
        check_stamp(&self.params(), &cache.stamp)?;
        self.weight.accumulate_grad(&cache.input.matmul_tn(grad_logits)?)?;
        self.bias.accumulate_grad(&grad_logits.column_sums())?;
        grad_logits.matmul_nt(self.weight.value())
    }
}

impl Parameterized for HeadParams {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}
