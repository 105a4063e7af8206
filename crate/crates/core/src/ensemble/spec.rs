use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphstore::MultiRelationGraph;
use crate::numkit::rng::{branch_seed, stream, tag};

use super::{TrainConfig, Variant};

/// The randomization drawn for one branch, stored explicitly so a trained
/// ensemble never has to re-derive it from seeds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub index: usize,
    pub seed: u64,
    pub num_nodes: usize,
    pub num_features: usize,
    /// Original node indices, ascending.
    pub sampled_nodes: Vec<usize>,
    /// Feature columns the backbone sees, ascending.
    pub selected_features: Vec<usize>,
    /// Complement of `selected_features`, ascending.
    pub remaining_features: Vec<usize>,
    /// Per relation, kept edges in original node indices.
    pub kept_edges: Vec<Vec<(usize, usize)>>,
}

/// `round(rate · total)` with halves rounded away from zero.
pub fn sample_size(rate: f64, total: usize) -> usize {
    (rate * total as f64).round() as usize
}

impl BranchSpec {
    /// The spec that keeps every node, feature and edge.
    pub fn identity(g: &MultiRelationGraph, index: usize, seed: u64) -> Self {
        Self {
            index,
            seed,
            num_nodes: g.n(),
            num_features: g.m(),
            sampled_nodes: (0..g.n()).collect(),
            selected_features: (0..g.m()).collect(),
            remaining_features: Vec::new(),
            kept_edges: g.all_edges().to_vec(),
        }
    }

    pub fn num_kept_edges(&self) -> usize {
        self.kept_edges.iter().map(Vec::len).sum()
    }

    /// Checks the spec against a graph's dimensions and its own invariants.
    pub fn validate_against(&self, g: &MultiRelationGraph) -> Result<()> {
        let fail = |msg: String| Err(Error::Parameter(format!("branch {} spec: {msg}", self.index)));
        if self.num_nodes != g.n() || self.num_features != g.m() || self.kept_edges.len() != g.k() {
            return fail(format!(
                "built for N={}, M={}, K={} but graph has N={}, M={}, K={}",
                self.num_nodes,
                self.num_features,
                self.kept_edges.len(),
                g.n(),
                g.m(),
                g.k()
            ));
        }
        let strictly_increasing = |v: &[usize], bound: usize| v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|&x| x < bound);
        if !strictly_increasing(&self.sampled_nodes, g.n()) || self.sampled_nodes.is_empty() {
            return fail("sampled nodes must be non-empty, distinct, ascending and in range".into());
        }
        if !strictly_increasing(&self.selected_features, g.m()) || !strictly_increasing(&self.remaining_features, g.m()) {
            return fail("feature index sets must be distinct, ascending and in range".into());
        }
        let mut all: Vec<usize> = self.selected_features.iter().chain(&self.remaining_features).copied().collect();
        all.sort_unstable();
        if all != (0..g.m()).collect::<Vec<_>>() {
            return fail("selected and remaining features must partition the columns".into());
        }
        let mut inside = vec![false; g.n()];
        for &v in &self.sampled_nodes {
            inside[v] = true;
        }
        for rel in &self.kept_edges {
            if rel.iter().any(|&(s, d)| s >= g.n() || d >= g.n() || !inside[s] || !inside[d]) {
                return fail("kept edge outside the sampled node set".into());
            }
        }
        Ok(())
    }
}

/// Draws branch `index`'s node sample, feature subset and edge drop from
/// the stream derived from `(cfg.master_seed, index)`.
pub fn build_branch_spec(g: &MultiRelationGraph, cfg: &TrainConfig, index: usize, variant: Variant) -> Result<BranchSpec> {
    cfg.validate()?;
    let seed = branch_seed(cfg.master_seed, index);
    if !variant.randomizes_subgraphs() {
        return Ok(BranchSpec::identity(g, index, seed));
    }
    let node_count = sample_size(cfg.alpha, g.n());
    let feature_count = sample_size(cfg.beta, g.m());
    if node_count == 0 || feature_count == 0 {
        return Err(Error::DegenerateBranch(format!(
            "round(alpha·N) = {node_count}, round(beta·M) = {feature_count}; both must be positive"
        )));
    }

    let mut rng = stream(seed, &[tag::SAMPLING]);
    let mut sampled_nodes = sample(&mut rng, g.n(), node_count).into_vec();
    sampled_nodes.sort_unstable();
    let mut selected_features = sample(&mut rng, g.m(), feature_count).into_vec();
    selected_features.sort_unstable();

    let mut selected = vec![false; g.m()];
    for &f in &selected_features {
        selected[f] = true;
    }
    let remaining_features = (0..g.m()).filter(|&f| !selected[f]).collect();

    let mut inside = vec![false; g.n()];
    for &v in &sampled_nodes {
        inside[v] = true;
    }
    let kept_edges = g
        .all_edges()
        .iter()
        .map(|rel| {
            rel.iter()
                .copied()
                .filter(|&(s, d)| inside[s] && inside[d])
                .filter(|_| rng.random::<f64>() < cfg.gamma)
                .collect()
        })
        .collect();

    Ok(BranchSpec {
        index,
        seed,
        num_nodes: g.n(),
        num_features: g.m(),
        sampled_nodes,
        selected_features,
        remaining_features,
        kept_edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphstore::{generate_synthetic, induced_subgraph, SyntheticParams};
    use proptest::prelude::*;

    fn graph() -> MultiRelationGraph {
        generate_synthetic(&SyntheticParams {
            n: 40,
            p_in: 0.3,
            p_out: 0.05,
            informative_dims: 3,
            redundant_dims: 3,
            noise_dims: 4,
            relations: 2,
            ..SyntheticParams::default()
        })
        .unwrap()
    }

    fn cfg(alpha: f64, beta: f64, gamma: f64) -> TrainConfig {
        TrainConfig {
            alpha,
            beta,
            gamma,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn all_ones_is_identity() {
        let g = graph();
        let s = build_branch_spec(&g, &cfg(1.0, 1.0, 1.0), 3, Variant::Full).unwrap();
        let id = BranchSpec::identity(&g, 3, s.seed);
        assert_eq!(s, id);
        assert!(s.remaining_features.is_empty());
    }

    #[test]
    fn exact_node_count() {
        let g = generate_synthetic(&SyntheticParams {
            n: 10,
            ..SyntheticParams::default()
        })
        .unwrap();
        let s = build_branch_spec(&g, &cfg(0.5, 1.0, 1.0), 0, Variant::Es).unwrap();
        assert_eq!(s.sampled_nodes.len(), 5);
    }

    #[test]
    fn variant_e_is_identity_with_distinct_seeds() {
        let g = graph();
        let a = build_branch_spec(&g, &cfg(0.5, 0.5, 0.5), 0, Variant::E).unwrap();
        let b = build_branch_spec(&g, &cfg(0.5, 0.5, 0.5), 1, Variant::E).unwrap();
        assert_ne!(a.seed, b.seed);
        assert_eq!(a.sampled_nodes, b.sampled_nodes);
        assert_eq!(a.kept_edges, b.kept_edges);
        assert_eq!(a.selected_features.len(), g.m());
    }

    #[test]
    fn degenerate_rates_rejected() {
        let g = graph();
        assert!(matches!(
            build_branch_spec(&g, &cfg(0.01, 1.0, 1.0), 0, Variant::Es),
            Err(Error::DegenerateBranch(_))
        ));
        assert!(matches!(
            build_branch_spec(&g, &cfg(1.0, 0.04, 1.0), 0, Variant::Es),
            Err(Error::DegenerateBranch(_))
        ));
    }

    #[test]
    fn kept_edge_fraction_concentrates() {
        // complete directed graph on 101 nodes: 10100 induced edges with alpha = 1
        let n = 101;
        let edges: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let g = MultiRelationGraph::new(
            crate::numkit::DenseMatrix::zeros(n, 2),
            vec![edges],
            vec![0; n],
            1,
            Default::default(),
        )
        .unwrap();
        let s = build_branch_spec(&g, &cfg(1.0, 1.0, 0.9), 0, Variant::Es).unwrap();
        let frac = s.num_kept_edges() as f64 / 10100.0;
        assert!((0.88..=0.92).contains(&frac), "{frac}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn spec_invariants(alpha in 0.1f64..=1.0, beta in 0.1f64..=1.0, gamma in 0.01f64..=1.0, seed in any::<u64>(), index in 0usize..50) {
            let g = graph();
            let c = TrainConfig { master_seed: seed, ..cfg(alpha, beta, gamma) };
            let s = build_branch_spec(&g, &c, index, Variant::Full).unwrap();
            s.validate_against(&g).unwrap();
            prop_assert_eq!(s.sampled_nodes.len(), sample_size(alpha, 40));
            prop_assert_eq!(s.selected_features.len(), sample_size(beta, 10));
            let (sub, _) = induced_subgraph(&g, &s.sampled_nodes).unwrap();
            for r in 0..g.k() {
                prop_assert!(s.kept_edges[r].len() <= sub.edges(r).len());
            }
            // deterministic
            prop_assert_eq!(build_branch_spec(&g, &c, index, Variant::Full).unwrap(), s);
        }
    }
}
