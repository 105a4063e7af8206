use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numkit::rng::{stream, tag};

use super::graph::MultiRelationGraph;

/// Number of feature entries perturbed for a given fraction of an `n x m` matrix.
pub fn noised_entry_count(fraction: f64, n: usize, m: usize) -> usize {
    // the epsilon keeps e.g. 0.29 * 100 from flooring to 28
    ((fraction * (n * m) as f64) + 1e-9).floor() as usize
}

/// Copy of `g` where `⌊fraction·N·M⌋` uniformly chosen feature entries get
/// unit Gaussian noise added. Labels, edges and splits are untouched.
pub fn inject_feature_noise(g: &MultiRelationGraph, fraction: f64, seed: u64) -> Result<MultiRelationGraph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Parameter(format!("noise fraction {fraction} outside [0, 1]")));
    }
    let total = g.n() * g.m();
    let count = noised_entry_count(fraction, g.n(), g.m()).min(total);
    let mut rng = stream(seed, &[tag::NOISE]);
    let picked = sample(&mut rng, total, count);
    let mut features = g.features().clone();
    let data = features.as_mut_slice();
    for idx in picked.iter() {
        let z: f64 = rng.sample(StandardNormal);
        data[idx] += z;
    }
    g.with_features(features)
}
