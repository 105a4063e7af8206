//! Parameter checkpoints.
//!
//! A checkpoint is a UTF-8 JSON document:
//!
//! ```json
//! {
//!   "format": "rfgnn-params",
//!   "version": 1,
//!   "tensors": [
//!     {"name": "gcn.0.weight", "shape": [rows, cols], "values": [row-major f64, ...]}
//!   ]
//! }
//! ```
//!
//! Tensors appear in the model's parameter order. Values are written in the
//! shortest form that parses back to the identical `f64`, so a save/load
//! round trip is lossless.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Parameterized};

pub const CHECKPOINT_FORMAT: &str = "rfgnn-params";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamCheckpoint {
    pub format: String,
    pub version: u32,
    pub tensors: Vec<StoredTensor>,
}

impl ParamCheckpoint {
    pub fn capture(model: &impl Parameterized) -> Self {
        let tensors = model
            .params()
            .into_iter()
            .map(|p| {
                let (r, c) = p.shape();
                StoredTensor {
                    name: p.name.clone(),
                    shape: [r, c],
                    values: p.value().as_slice().to_vec(),
                }
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            tensors,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("serializable checkpoint")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ckpt: Self = serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unexpected format `{}`", ckpt.format)));
        }
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }

    /// Overwrites `model`'s values; names and shapes must match one-to-one.
    pub fn restore_into(&self, model: &mut impl Parameterized) -> Result<()> {
        let mut params = model.params_mut();
        if params.len() != self.tensors.len() {
            return Err(Error::Checkpoint(format!(
                "model has {} tensors, checkpoint has {}",
                params.len(),
                self.tensors.len()
            )));
        }
        for (p, t) in params.iter_mut().zip(&self.tensors) {
            if p.name != t.name {
                return Err(Error::Checkpoint(format!("expected tensor `{}`, found `{}`", p.name, t.name)));
            }
            let value = DenseMatrix::from_vec(t.shape[0], t.shape[1], t.values.clone())
                .map_err(|e| Error::Checkpoint(format!("tensor `{}`: {e}", t.name)))?;
            p.set_value(value)
                .map_err(|e| Error::Checkpoint(format!("tensor `{}`: {e}", t.name)))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbones::{FcnParams, GcnParams};
    use crate::numkit::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn restore_rejects_mismatched_structure() {
        let a = GcnParams::init(&[3, 4, 2], &mut stream(0, &[]));
        let mut b = GcnParams::init(&[3, 5, 2], &mut stream(0, &[]));
        assert!(ParamCheckpoint::capture(&a).restore_into(&mut b).is_err());
        let mut c = FcnParams::init(3, 4, 2, &mut stream(0, &[]));
        assert!(ParamCheckpoint::capture(&a).restore_into(&mut c).is_err());
    }

    #[test]
    fn version_is_checked() {
        let a = GcnParams::init(&[2, 2], &mut stream(0, &[]));
        let text = ParamCheckpoint::capture(&a).to_json().replace("\"version\":1", "\"version\":9");
        assert!(ParamCheckpoint::from_json(&text).is_err());
    }

    proptest! {
        #[test]
        fn json_round_trip_is_lossless(seed in any::<u64>(), scale in -300i32..300) {
            let mut p = GcnParams::init(&[4, 3, 2], &mut stream(seed, &[]));
            let factor = 10f64.powi(scale);
            for t in p.weights.iter_mut() {
                let v = t.value().scale(factor);
                t.set_value(v).unwrap();
            }
            let text = ParamCheckpoint::capture(&p).to_json();
            let mut q = GcnParams::init(&[4, 3, 2], &mut stream(seed ^ 1, &[]));
            ParamCheckpoint::from_json(&text).unwrap().restore_into(&mut q).unwrap();
            for (a, b) in p.weights.iter().zip(&q.weights) {
                let bits_a: Vec<u64> = a.value().as_slice().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.value().as_slice().iter().map(|v| v.to_bits()).collect();
                prop_assert_eq!(bits_a, bits_b);
            }
        }
    }
}
