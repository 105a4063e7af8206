use crate::error::{Error, Result};

use super::DenseMatrix;

/// Square CSR matrix in canonical form (column indices strictly increasing per row).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseAdjacency {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    /// Builds a canonical CSR matrix from `(row, col, value)` triplets.
    /// Duplicate coordinates are summed.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= n || c >= n) {
            return Err(Error::dim(
                "from_triplets",
                format!("{n}x{n}"),
                format!("entry ({r}, {c})"),
            ));
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("previous entry") += v;
                continue;
            }
            last = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            vals.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            vals,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn vals(&self) -> &[f64] {
        &self.vals
    }

    /// Nonzeros of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    /// Checks the CSR invariants; used after deserialization and in tests.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(format!("malformed CSR: {msg}")));
        if self.row_ptr.len() != self.n + 1 || self.row_ptr[0] != 0 {
            return bad("row_ptr length/start".into());
        }
        if self.row_ptr[self.n] != self.col_idx.len() || self.col_idx.len() != self.vals.len() {
            return bad("row_ptr[n] != nnz".into());
        }
        for i in 0..self.n {
            if self.row_ptr[i] > self.row_ptr[i + 1] {
                return bad(format!("row_ptr decreasing at {i}"));
            }
            let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {i} not strictly increasing"));
            }
            if cols.iter().any(|&c| c >= self.n) {
                return bad(format!("row {i} column out of range"));
            }
        }
        Ok(())
    }

    pub fn densify(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d.set(i, j, v);
            }
        }
        d
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| (self.get(j, i) - v).abs() <= tol))
    }

    /// `A · X`.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n {
            return Err(Error::dim(
                "spmm",
                format!("{0}x{0}", self.n),
                x.shape_str(),
            ));
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.n, d);
        for i in 0..self.n {
            let o_row = out.row_mut(i);
            for (j, a) in self.row(i) {
                for (o, &v) in o_row.iter_mut().zip(x.row(j)) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }

    /// `Aᵀ · X`.
    pub fn spmm_t(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.n {
            return Err(Error::dim(
                "spmm_t",
                format!("{0}x{0}", self.n),
                x.shape_str(),
            ));
        }
        let d = x.cols();
        let mut out = DenseMatrix::zeros(self.n, d);
        for i in 0..self.n {
            let x_row = x.row(i);
            if x_row.iter().all(|&v| v == 0.0) {
                continue;
            }
            for (j, a) in self.row(i) {
                for (o, &v) in out.row_mut(j).iter_mut().zip(x_row) {
                    *o += a * v;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_adj(n: usize, p: f64, rng: &mut ChaCha8Rng) -> SparseAdjacency {
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() < p {
                    t.push((i, j, rng.random_range(-1.0..1.0)));
                }
            }
        }
        SparseAdjacency::from_triplets(n, t).unwrap()
    }

    fn random_dense(r: usize, c: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
        DenseMatrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identity_and_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_dense(5, 3, &mut rng);
        assert_eq!(SparseAdjacency::identity(5).spmm(&x).unwrap(), x);
        assert_eq!(SparseAdjacency::empty(5).spmm(&x).unwrap(), DenseMatrix::zeros(5, 3));
    }

    #[test]
    fn spmm_matches_dense_oracle_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 7, 20, 50] {
            let a = random_adj(n, 0.15, &mut rng);
            a.validate().unwrap();
            let x = random_dense(n, 4, &mut rng);
            let dense = a.densify();
            let oracle = dense.matmul(&x).unwrap();
            assert!(a.spmm(&x).unwrap().max_abs_diff(&oracle) <= 1e-12);
            let oracle_t = dense.transpose().matmul(&x).unwrap();
            assert!(a.spmm_t(&x).unwrap().max_abs_diff(&oracle_t) <= 1e-12);
        }
    }

    #[test]
    fn triplets_are_canonicalized() {
        let a = SparseAdjacency::from_triplets(3, [(1, 2, 1.0), (1, 0, 1.0), (1, 2, 0.5)]).unwrap();
        a.validate().unwrap();
        assert_eq!(a.col_idx(), &[0, 2]);
        assert_eq!(a.get(1, 2), 1.5);
        assert!(SparseAdjacency::from_triplets(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn spmm_shape_error() {
        let a = SparseAdjacency::identity(3);
        assert!(a.spmm(&DenseMatrix::zeros(4, 1)).is_err());
    }
}
