//! Contextual stochastic block model with grouped feature dimensions.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::rng::{stream, tag};
use crate::numkit::DenseMatrix;

use super::graph::{MultiRelationGraph, Splits};

/// Parameters of the synthetic benchmark.
///
/// Features are laid out as `[informative | redundant | noise]`:
/// informative dims are `class_center + N(0, 1)` with centers at distinct
/// random hypercube vertices `±class_separation / 2`; each redundant dim is
/// one random informative dim plus `N(0, redundant_noise²)`; noise dims are
/// `N(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub n: usize,
    pub classes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub informative_dims: usize,
    pub redundant_dims: usize,
    pub noise_dims: usize,
    pub class_separation: f64,
    pub redundant_noise: f64,
    pub relations: usize,
    pub seed: u64,
}

impl Default for SyntheticParams {
    /// The shipped benchmark: 600 nodes, 2 classes, 16/32/80 feature dims.
    fn default() -> Self {
        Self {
            n: 600,
            classes: 2,
            p_in: 0.01,
            p_out: 0.005,
            informative_dims: 16,
            redundant_dims: 32,
            noise_dims: 80,
            class_separation: 0.7,
            redundant_noise: 0.5,
            relations: 1,
            seed: 0,
        }
    }
}

impl SyntheticParams {
    pub fn feature_dims(&self) -> usize {
        self.informative_dims + self.redundant_dims + self.noise_dims
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parameter(format!("{name} = {p} is not a probability")));
            }
        }
        if self.classes == 0 || self.n < self.classes {
            return Err(Error::Parameter(format!(
                "need n >= classes >= 1 (n = {}, classes = {})",
                self.n, self.classes
            )));
        }
        if self.relations == 0 {
            return Err(Error::Parameter("relations must be >= 1".into()));
        }
        if self.feature_dims() == 0 {
            return Err(Error::Parameter("at least one feature dimension is required".into()));
        }
        if self.redundant_dims > 0 && self.informative_dims == 0 {
            return Err(Error::Parameter("redundant dims copy informative dims; none requested".into()));
        }
        if !(self.class_separation.is_finite() && self.redundant_noise.is_finite() && self.redundant_noise >= 0.0) {
            return Err(Error::Parameter("class_separation and redundant_noise must be finite".into()));
        }
        Ok(())
    }
}

/// Number of nodes in each of the train and validation splits under the 1:1:8 partition.
pub fn split_size(n: usize) -> usize {
    n / 10
}

pub fn generate_synthetic(p: &SyntheticParams) -> Result<MultiRelationGraph> {
    p.validate()?;
    let n = p.n;

    // balanced labels in random order
    let mut labels: Vec<usize> = (0..n).map(|i| i % p.classes).collect();
    labels.shuffle(&mut stream(p.seed, &[tag::SYNTH, 0]));

    let edges = (0..p.relations)
        .map(|r| {
            let mut rng = stream(p.seed, &[tag::SYNTH, 1, r as u64]);
            let mut rel = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let prob = if labels[i] == labels[j] { p.p_in } else { p.p_out };
                    if rng.random::<f64>() < prob {
                        rel.push((i, j));
                    }
                }
            }
            rel
        })
        .collect();

    let features = synth_features(p, &labels);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(p.seed, &[tag::SYNTH, tag::SPLIT]));
    let k = split_size(n);
    let splits = Splits {
        train: order[..k].to_vec(),
        val: order[k..2 * k].to_vec(),
        test: order[2 * k..].to_vec(),
    };
    MultiRelationGraph::new(features, edges, labels, p.classes, splits)
}

fn synth_features(p: &SyntheticParams, labels: &[usize]) -> DenseMatrix {
    let inf = p.informative_dims;
    let mut rng = stream(p.seed, &[tag::SYNTH, 2]);

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(p.classes);
    let distinct_available = inf >= 64 || p.classes <= 1usize << inf;
    while centers.len() < p.classes {
        let c: Vec<f64> = (0..inf)
            .map(|_| if rng.random::<bool>() { 0.5 } else { -0.5 } * p.class_separation)
            .collect();
        if !distinct_available || !centers.contains(&c) {
            centers.push(c);
        }
    }
    let sources: Vec<usize> = (0..p.redundant_dims).map(|_| rng.random_range(0..inf)).collect();

    let m = p.feature_dims();
    let mut data = Vec::with_capacity(labels.len() * m);
    for &y in labels {
        let start = data.len();
        for &mu in &centers[y] {
            let z: f64 = rng.sample(StandardNormal);
            data.push(mu + z);
        }
        for &src in &sources {
            let z: f64 = rng.sample(StandardNormal);
            data.push(data[start + src] + p.redundant_noise * z);
        }
        for _ in 0..p.noise_dims {
            data.push(rng.sample(StandardNormal));
        }
    }
    DenseMatrix::from_vec(labels.len(), m, data).expect("finite gaussian features")
}
