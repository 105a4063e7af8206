//! Numerical core: dense and CSR matrices, forward/backward primitives,
//! AdamW, and a finite-difference gradient checker. Everything is `f64`.

mod adamw;
mod dense;
mod gradcheck;
mod ops;
pub mod rng;
mod sparse;

pub use adamw::{adamw_step, AdamW, AdamWState, ParamTensor};
pub use dense::DenseMatrix;
pub use gradcheck::{finite_diff_check, Parameterized};
pub use ops::{cross_entropy, dropout_mask, relu_backward, relu_forward, softmax_rows, ReluMask};
pub use sparse::SparseAdjacency;

/// Glorot-uniform initialization in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(fan_in: usize, fan_out: usize, rng: &mut impl rand::Rng) -> DenseMatrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    DenseMatrix::from_vec(fan_in, fan_out, data).expect("finite glorot draw")
}
