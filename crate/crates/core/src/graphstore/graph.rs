use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

/// Disjoint node index sets for supervision, model selection and evaluation.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    fn normalized(mut self) -> Self {
        for s in [&mut self.train, &mut self.val, &mut self.test] {
            s.sort_unstable();
            s.dedup();
        }
        self
    }
}

/// Attributed graph with `k` typed edge sets over the same `n` nodes.
///
/// Edges are stored directed and deduplicated; propagation symmetrizes them.
/// Class 1 is the positive (bot) class for binary metrics.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiRelationGraph {
    features: DenseMatrix,
    edges: Vec<Vec<(usize, usize)>>,
    labels: Vec<usize>,
    num_classes: usize,
    class_names: Vec<String>,
    splits: Splits,
}

impl MultiRelationGraph {
    pub fn new(
        features: DenseMatrix,
        mut edges: Vec<Vec<(usize, usize)>>,
        labels: Vec<usize>,
        num_classes: usize,
        splits: Splits,
    ) -> Result<Self> {
        let n = features.rows();
        if edges.is_empty() {
            return Err(Error::Parameter("a graph needs at least one relation".into()));
        }
        if !features.all_finite() {
            return Err(Error::Parameter("features contain non-finite values".into()));
        }
        if labels.len() != n {
            return Err(Error::dim(
                "graph labels",
                format!("{n} nodes"),
                format!("{} labels", labels.len()),
            ));
        }
        if num_classes == 0 {
            return Err(Error::Parameter("num_classes must be positive".into()));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::Parameter(format!(
                "node {i} has label {l} but there are {num_classes} classes"
            )));
        }
        for (r, rel) in edges.iter_mut().enumerate() {
            if let Some(&(s, d)) = rel.iter().find(|&&(s, d)| s >= n || d >= n) {
                return Err(Error::Parameter(format!(
                    "relation {r}: edge ({s}, {d}) has an endpoint >= {n}"
                )));
            }
            rel.sort_unstable();
            rel.dedup();
        }
        let splits = splits.normalized();
        let mut seen = vec![false; n];
        for set in [&splits.train, &splits.val, &splits.test] {
            for &v in set {
                if v >= n {
                    return Err(Error::Parameter(format!("split node {v} >= {n}")));
                }
                if seen[v] {
                    return Err(Error::Parameter(format!(
                        "node {v} appears in more than one split"
                    )));
                }
                seen[v] = true;
            }
        }
        let class_names = default_class_names(num_classes);
        Ok(Self {
            features,
            edges,
            labels,
            num_classes,
            class_names,
            splits,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_classes {
            return Err(Error::dim(
                "class names",
                format!("{} classes", self.num_classes),
                format!("{} names", names.len()),
            ));
        }
        self.class_names = names;
        Ok(self)
    }

    /// Same graph with a replacement feature matrix of identical shape.
    pub fn with_features(&self, features: DenseMatrix) -> Result<Self> {
        if !features.same_shape(&self.features) {
            return Err(Error::dim(
                "with_features",
                self.features.shape_str(),
                features.shape_str(),
            ));
        }
        if !features.all_finite() {
            return Err(Error::Parameter("features contain non-finite values".into()));
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.features.rows()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.features.cols()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.edges.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn edges(&self, relation: usize) -> &[(usize, usize)] {
        &self.edges[relation]
    }

    pub fn all_edges(&self) -> &[Vec<(usize, usize)>] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }
}

pub(crate) fn default_class_names(c: usize) -> Vec<String> {
    if c == 2 {
        vec!["human".into(), "bot".into()]
    } else {
        (0..c).map(|i| format!("class{i}")).collect()
    }
}

/// Index correspondence between a graph and one of its induced subgraphs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMap {
    pub new_to_old: Vec<usize>,
    pub old_to_new: Vec<Option<usize>>,
}

/// Restricts `g` to `nodes` (in the given order), keeping exactly the edges
/// with both endpoints inside.
pub fn induced_subgraph(g: &MultiRelationGraph, nodes: &[usize]) -> Result<(MultiRelationGraph, NodeMap)> {
    if nodes.is_empty() {
        return Err(Error::Parameter("induced subgraph on an empty node set".into()));
    }
    let mut old_to_new = vec![None; g.n()];
    for (new, &old) in nodes.iter().enumerate() {
        if old >= g.n() {
            return Err(Error::Parameter(format!("node {old} >= {}", g.n())));
        }
        if old_to_new[old].replace(new).is_some() {
            return Err(Error::Parameter(format!("node {old} listed twice")));
        }
    }
    let features = g.features.select_rows(nodes)?;
    let edges = g
        .edges
        .iter()
        .map(|rel| {
            rel.iter()
                .filter_map(|&(s, d)| Some((old_to_new[s]?, old_to_new[d]?)))
                .collect()
        })
        .collect();
    let labels = nodes.iter().map(|&v| g.labels[v]).collect();
    let remap = |set: &[usize]| -> Vec<usize> { set.iter().filter_map(|&v| old_to_new[v]).collect() };
    let splits = Splits {
        train: remap(&g.splits.train),
        val: remap(&g.splits.val),
        test: remap(&g.splits.test),
    };
    let sub = MultiRelationGraph {
        class_names: g.class_names.clone(),
        ..MultiRelationGraph::new(features, edges, labels, g.num_classes, splits)?
    };
    Ok((
        sub,
        NodeMap {
            new_to_old: nodes.to_vec(),
            old_to_new,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::rng::stream;
    use rand::seq::index::sample;
    use rand::Rng;

    fn path3() -> MultiRelationGraph {
        MultiRelationGraph::new(
            DenseMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap(),
            vec![vec![(0, 1), (1, 2)]],
            vec![0, 1, 0],
            2,
            Splits {
                train: vec![0],
                val: vec![1],
                test: vec![2],
            },
        )
        .unwrap()
    }

    fn random_graph(n: usize, edges: usize, seed: u64) -> MultiRelationGraph {
        let mut rng = stream(seed, &[]);
        let feats = DenseMatrix::from_vec(n, 3, (0..n * 3).map(|_| rng.random()).collect()).unwrap();
        let rels = (0..2)
            .map(|_| {
                (0..edges)
                    .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
                    .collect()
            })
            .collect();
        let labels = (0..n).map(|i| i % 2).collect();
        let splits = Splits {
            train: (0..n / 3).collect(),
            val: vec![],
            test: (n / 3..n).collect(),
        };
        MultiRelationGraph::new(feats, rels, labels, 2, splits).unwrap()
    }

    #[test]
    fn duplicate_edges_are_removed_self_loops_kept() {
        let g = MultiRelationGraph::new(
            DenseMatrix::zeros(2, 1),
            vec![vec![(0, 1), (0, 1), (1, 1)]],
            vec![0, 1],
            2,
            Splits::default(),
        )
        .unwrap();
        assert_eq!(g.edges(0), &[(0, 1), (1, 1)]);
    }

    #[test]
    fn rejects_overlapping_splits_and_bad_endpoints() {
        let overlapping = Splits {
            train: vec![0],
            val: vec![0],
            test: vec![],
        };
        assert!(MultiRelationGraph::new(DenseMatrix::zeros(2, 1), vec![vec![]], vec![0, 0], 1, overlapping).is_err());
        assert!(MultiRelationGraph::new(DenseMatrix::zeros(2, 1), vec![vec![(0, 2)]], vec![0, 0], 1, Splits::default()).is_err());
        assert!(MultiRelationGraph::new(DenseMatrix::zeros(2, 1), vec![], vec![0, 0], 1, Splits::default()).is_err());
    }

    #[test]
    fn induced_on_all_nodes_is_identity() {
        let g = random_graph(15, 40, 1);
        let all: Vec<usize> = (0..15).collect();
        let (sub, map) = induced_subgraph(&g, &all).unwrap();
        assert_eq!(sub, g);
        assert_eq!(map.new_to_old, all);
    }

    #[test]
    fn induced_path_endpoints_has_no_edges() {
        let (sub, map) = induced_subgraph(&path3(), &[0, 2]).unwrap();
        assert_eq!(sub.n(), 2);
        assert_eq!(sub.num_edges(), 0);
        assert_eq!(map.old_to_new, vec![Some(0), None, Some(1)]);
        assert_eq!(sub.splits().train, vec![0]);
        assert_eq!(sub.splits().test, vec![1]);
        assert!(sub.splits().val.is_empty());
    }

    #[test]
    fn induced_edge_count_matches_brute_force() {
        let g = random_graph(30, 120, 2);
        let mut rng = stream(3, &[]);
        for _ in 0..20 {
            let size = rng.random_range(1..=30);
            let nodes = sample(&mut rng, 30, size).into_vec();
            let (sub, _) = induced_subgraph(&g, &nodes).unwrap();
            for r in 0..g.k() {
                let brute = g
                    .edges(r)
                    .iter()
                    .filter(|(s, d)| nodes.contains(s) && nodes.contains(d))
                    .count();
                assert_eq!(sub.edges(r).len(), brute);
            }
        }
    }

    #[test]
    fn induced_is_idempotent() {
        let g = random_graph(20, 60, 4);
        let (sub, _) = induced_subgraph(&g, &[3, 7, 1, 19, 12, 8]).unwrap();
        let all: Vec<usize> = (0..sub.n()).collect();
        assert_eq!(induced_subgraph(&sub, &all).unwrap().0, sub);
    }

    #[test]
    fn induced_rejects_empty_and_duplicates() {
        assert!(induced_subgraph(&path3(), &[]).is_err());
        assert!(induced_subgraph(&path3(), &[1, 1]).is_err());
    }
}
