//! Ensemble checkpoints.
//!
//! A checkpoint is a directory holding `ensemble.json` plus one parameter
//! file per branch (`branch_000.json`, `branch_001.json`, ...). The manifest
//! stores every branch spec with explicit node, feature and edge lists, so a
//! checkpoint stays valid even if the random streams change.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbones::ParamCheckpoint;
use crate::error::{Error, Result};
use crate::numkit::rng::stream;

use super::{Branch, BranchModel, BranchSpec, EnsembleModel, TrainConfig, Variant};

pub const ENSEMBLE_FILE: &str = "ensemble.json";
pub const ENSEMBLE_FORMAT: &str = "rfgnn-ensemble";
pub const ENSEMBLE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    version: u32,
    variant: Variant,
    num_classes: usize,
    config: TrainConfig,
    branches: Vec<BranchEntry>,
}

#[derive(Serialize, Deserialize)]
struct BranchEntry {
    params: String,
    aligning: bool,
    spec: BranchSpec,
}

fn params_file(index: usize) -> String {
    format!("branch_{index:03}.json")
}

pub fn save_ensemble(ens: &EnsembleModel, dir: &Path) -> Result<()> {
    let num_classes = ens.num_classes().ok_or(Error::EmptyEnsemble)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(ens.len());
    for b in &ens.branches {
        let name = params_file(b.spec.index);
        let path = dir.join(&name);
        fs::write(&path, ParamCheckpoint::capture(&b.model).to_json()).map_err(|e| Error::io(&path, e))?;
        entries.push(BranchEntry {
            params: name,
            aligning: b.model.fcn.is_some(),
            spec: b.spec.clone(),
        });
    }
    let manifest = Manifest {
        format: ENSEMBLE_FORMAT.into(),
        version: ENSEMBLE_VERSION,
        variant: ens.variant,
        num_classes,
        config: ens.config.clone(),
        branches: entries,
    };
    let path = dir.join(ENSEMBLE_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_ensemble(dir: &Path) -> Result<EnsembleModel> {
    let path = dir.join(ENSEMBLE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    if manifest.format != ENSEMBLE_FORMAT || manifest.version != ENSEMBLE_VERSION {
        return Err(Error::Checkpoint(format!(
            "{}: expected {ENSEMBLE_FORMAT} v{ENSEMBLE_VERSION}, found {} v{}",
            path.display(),
            manifest.format,
            manifest.version
        )));
    }
    if manifest.branches.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let arch = &manifest.config.backbone;
    let mut branches = Vec::with_capacity(manifest.branches.len());
    for entry in manifest.branches {
        let spec = entry.spec;
        // placeholder weights; every value is overwritten by the restore below
        let mut model = BranchModel::init(
            arch,
            spec.selected_features.len(),
            spec.remaining_features.len(),
            spec.kept_edges.len(),
            manifest.num_classes,
            entry.aligning,
            &mut stream(0, &[]),
        )?;
        let ppath = dir.join(&entry.params);
        let ptext = fs::read_to_string(&ppath).map_err(|e| Error::io(&ppath, e))?;
        ParamCheckpoint::from_json(&ptext)
            .and_then(|c| c.restore_into(&mut model))
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", ppath.display())))?;
        branches.push(Branch { spec, model });
    }
    Ok(EnsembleModel {
        config: manifest.config,
        variant: manifest.variant,
        branches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbones::{BackboneConfig, BackboneKind};
    use crate::ensemble::{ensemble_predict, train_ensemble};
    use crate::graphstore::{generate_synthetic, SyntheticParams};

    #[test]
    fn round_trip_preserves_predictions() {
        let g = generate_synthetic(&SyntheticParams {
            n: 40,
            informative_dims: 3,
            redundant_dims: 3,
            noise_dims: 3,
            relations: 2,
            ..SyntheticParams::default()
        })
        .unwrap();
        for (kind, variant) in [(BackboneKind::Rgcn, Variant::Full), (BackboneKind::Sgc, Variant::Es)] {
            let cfg = TrainConfig {
                branches: 2,
                epochs: 5,
                backbone: BackboneConfig {
                    kind,
                    hidden: 6,
                    out_dim: 4,
                    ..BackboneConfig::default()
                },
                ..TrainConfig::default()
            };
            let ens = train_ensemble(&g, &cfg, variant).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_ensemble(&ens, dir.path()).unwrap();
            assert!(dir.path().join("branch_001.json").exists());
            let back = load_ensemble(dir.path()).unwrap();
            assert_eq!(back.config, ens.config);
            assert_eq!(back.variant, ens.variant);
            for (a, b) in back.branches.iter().zip(&ens.branches) {
                assert_eq!(a.spec, b.spec);
                assert_eq!(ParamCheckpoint::capture(&a.model), ParamCheckpoint::capture(&b.model));
            }
            assert_eq!(ensemble_predict(&g, &back).unwrap().0, ensemble_predict(&g, &ens).unwrap().0);
        }
    }

    #[test]
    fn missing_branch_file_is_reported() {
        let g = generate_synthetic(&SyntheticParams {
            n: 30,
            ..SyntheticParams::default()
        })
        .unwrap();
        let cfg = TrainConfig {
            branches: 1,
            epochs: 1,
            backbone: BackboneConfig {
                hidden: 4,
                out_dim: 4,
                ..BackboneConfig::default()
            },
            ..TrainConfig::default()
        };
        let ens = train_ensemble(&g, &cfg, Variant::Full).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_ensemble(&ens, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("branch_000.json")).unwrap();
        let err = load_ensemble(dir.path()).unwrap_err();
        assert!(err.to_string().contains("branch_000.json"), "{err}");
    }
}
