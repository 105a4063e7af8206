use crate::error::{Error, Result};
use crate::numkit::rng::StreamRng;
use crate::numkit::{glorot_uniform, DenseMatrix, ParamTensor, Parameterized, SparseAdjacency};

use super::{check_stamp, maybe_drop, stamp, undo_drop, Dropout};

/// `Â^k X` by `k` successive sparse products.
pub fn sgc_precompute(adj: &SparseAdjacency, x: &DenseMatrix, k: usize) -> Result<DenseMatrix> {
    if k == 0 {
        return Err(Error::Parameter("sgc power must be >= 1".into()));
    }
    let mut h = adj.spmm(x)?;
    for _ in 1..k {
        h = adj.spmm(&h)?;
    }
    Ok(h)
}

/// Single linear map applied to pre-propagated features.
#[derive(Clone, Debug, PartialEq)]
pub struct SgcParams {
    pub weight: ParamTensor,
}

pub struct SgcCache {
    input: DenseMatrix,
    drop_mask: Option<DenseMatrix>,
    stamp: Vec<u64>,
}

impl SgcParams {
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut StreamRng) -> Self {
        Self {
            weight: ParamTensor::new("sgc.weight", glorot_uniform(in_dim, out_dim, rng)),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape().0
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape().1
    }

    pub fn forward(&self, propagated: &DenseMatrix, mut drop: Option<&mut Dropout>) -> Result<(DenseMatrix, SgcCache)> {
        let (input, drop_mask) = maybe_drop(propagated, &mut drop)?;
        let z = input.matmul(self.weight.value())?;
        let stamp = stamp(&self.params());
        Ok((z, SgcCache { input, drop_mask, stamp }))
    }

    pub fn backward(&mut self, cache: SgcCache, grad: &DenseMatrix) -> Result<DenseMatrix> {
        check_stamp(&self.params(), &cache.stamp)?;
        self.weight.accumulate_grad(&cache.input.matmul_tn(grad)?)?;
        undo_drop(grad.matmul_nt(self.weight.value())?, &cache.drop_mask)
    }
}

impl Parameterized for SgcParams {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.weight]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.weight]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbones::testutil::*;
    use crate::graphstore::normalize_adjacency;
    use crate::numkit::finite_diff_check;
    use crate::numkit::rng::stream;

    #[test]
    fn power_one_is_single_spmm() {
        let adj = normalize_adjacency(&random_edges(9, 14, 0), 9).unwrap();
        let x = random_matrix(9, 3, 1);
        assert_eq!(sgc_precompute(&adj, &x, 1).unwrap(), adj.spmm(&x).unwrap());
        assert_eq!(
            sgc_precompute(&adj, &x, 2).unwrap(),
            adj.spmm(&adj.spmm(&x).unwrap()).unwrap()
        );
    }

    #[test]
    fn identity_adjacency_is_fixed_point() {
        let x = random_matrix(5, 3, 2);
        assert_eq!(sgc_precompute(&SparseAdjacency::identity(5), &x, 4).unwrap(), x);
        assert!(sgc_precompute(&SparseAdjacency::identity(5), &x, 0).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let adj = normalize_adjacency(&random_edges(12, 18, 3), 12).unwrap();
        let xp = sgc_precompute(&adj, &random_matrix(12, 5, 4), 2).unwrap();
        let w = random_matrix(12, 3, 5);
        let mut p = SgcParams::init(5, 3, &mut stream(6, &[]));
        let (_, cache) = p.forward(&xp, None).unwrap();
        p.backward(cache, &w).unwrap();
        let err = finite_diff_check(&mut p, 1e-5, |p| weighted_sum(&p.forward(&xp, None).unwrap().0, &w));
        assert!(err <= 1e-4, "{err}");
    }
}
