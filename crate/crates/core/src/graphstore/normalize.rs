use crate::error::{Error, Result};
use crate::numkit::SparseAdjacency;

/// Symmetric GCN normalization `D̃^{-1/2} (A + I) D̃^{-1/2}`.
///
/// `A` is the binary, symmetrized adjacency of `edges`; an input self-loop
/// contributes `A_ii = 1`, so that node's diagonal in `A + I` is 2.
pub fn normalize_adjacency(edges: &[(usize, usize)], n: usize) -> Result<SparseAdjacency> {
    let mut pairs: Vec<(usize, usize)> = Vec::with_capacity(2 * edges.len());
    for &(s, d) in edges {
        if s >= n || d >= n {
            return Err(Error::Parameter(format!("edge ({s}, {d}) has an endpoint >= {n}")));
        }
        pairs.push((s, d));
        if s != d {
            pairs.push((d, s));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();

    let mut degree = vec![1.0f64; n];
    for &(s, _) in &pairs {
        degree[s] += 1.0;
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    let triplets = pairs
        .into_iter()
        .map(|(s, d)| (s, d, 1.0))
        .chain((0..n).map(|i| (i, i, 1.0)))
        .map(|(s, d, w)| (s, d, w * inv_sqrt[s] * inv_sqrt[d]));
    SparseAdjacency::from_triplets(n, triplets)
}
