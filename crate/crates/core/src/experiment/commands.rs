use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::ensemble::{
    aggregate_outputs, branch_embedding, branch_outputs, load_ensemble, save_ensemble, similarity_matrix,
    standalone_predict, train_ensemble, train_standalone, EnsembleModel, TrainConfig, Variant,
};
use crate::error::{Error, Result};
use crate::graphstore::{generate_synthetic, inject_feature_noise, save_dataset, MultiRelationGraph, SyntheticParams};
use crate::metrics::{accuracy, evaluate as score, Report, ReportGroup, RunReport};
use crate::numkit::rng::{derive_seed, tag};

use super::{dataset_summary, RunConfig, SweepParam};

/// A seed whose run did not complete.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedFailure {
    pub seed: u64,
    pub context: String,
    pub message: String,
}

/// A report plus the runs that failed; the report covers only the runs that finished.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub failures: Vec<SeedFailure>,
}

impl Outcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Refuses to write into a non-empty directory unless `force` is set.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        if entries.next().is_some() && !force {
            return Err(Error::Parameter(format!(
                "output directory {} is not empty (use --force to overwrite)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `report.json`, `report.txt` and, when `curve` is set, `curve.csv`.
pub fn write_report(report: &Report, dir: &Path, curve: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = vec![("report.json", report.to_json()), ("report.txt", report.to_text())];
    if curve {
        files.push(("curve.csv", report.curve_csv()));
    }
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn gen_synth(params: &SyntheticParams, dir: &Path) -> Result<MultiRelationGraph> {
    let g = generate_synthetic(params)?;
    save_dataset(&g, dir)?;
    Ok(g)
}

/// Test-split scores of an ensemble, with per-branch accuracy and output similarity.
pub fn ensemble_run(g: &MultiRelationGraph, ens: &EnsembleModel, seed: u64) -> Result<RunReport> {
    let outputs = branch_outputs(g, ens)?;
    let (_, classes) = aggregate_outputs(&outputs)?;
    let test = &g.splits().test;
    let metrics = score(&classes, g.labels(), test, g.num_classes())?;
    let branch_accuracies = outputs
        .iter()
        .map(|o| accuracy(&o.argmax_rows(), g.labels(), test))
        .collect::<Result<_>>()?;
    let sim = similarity_matrix(&outputs)?;
    Ok(RunReport {
        seed,
        metrics,
        branch_accuracies,
        branch_similarity: sim.iter_rows().map(<[f64]>::to_vec).collect(),
    })
}

pub fn baseline_run(g: &MultiRelationGraph, cfg: &TrainConfig, seed: u64) -> Result<RunReport> {
    let model = train_standalone(g, cfg)?;
    let classes = standalone_predict(g, &model)?.argmax_rows();
    Ok(RunReport {
        seed,
        metrics: score(&classes, g.labels(), &g.splits().test, g.num_classes())?,
        branch_accuracies: Vec::new(),
        branch_similarity: Vec::new(),
    })
}

/// Which model a group of runs trains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Model {
    Baseline,
    Ensemble(Variant),
}

impl Model {
    fn name(self) -> &'static str {
        match self {
            Model::Baseline => "baseline",
            Model::Ensemble(v) => v.as_str(),
        }
    }
}

struct Runner<'a> {
    g: &'a MultiRelationGraph,
    failures: Vec<SeedFailure>,
}

impl Runner<'_> {
    /// One run per `(seed, master_seed)` pair, collecting failures instead of stopping.
    fn group(
        &mut self,
        model: Model,
        cfg: &TrainConfig,
        seeds: impl IntoIterator<Item = (u64, u64)>,
        context: &str,
        mut keep: impl FnMut(u64, &EnsembleModel) -> Result<()>,
    ) -> ReportGroup {
        let mut runs = Vec::new();
        for (seed, master) in seeds {
            let cfg = TrainConfig {
                master_seed: master,
                ..cfg.clone()
            };
            let run = match model {
                Model::Baseline => baseline_run(self.g, &cfg, master),
                Model::Ensemble(v) => train_ensemble(self.g, &cfg, v).and_then(|ens| {
                    keep(seed, &ens)?;
                    ensemble_run(self.g, &ens, master)
                }),
            };
            match run {
                Ok(r) => runs.push(r),
                Err(e) => self.failures.push(SeedFailure {
                    seed,
                    context: format!("{context}{}", model.name()),
                    message: e.to_string(),
                }),
            }
        }
        ReportGroup::new(model.name(), runs)
    }
}

fn no_keep(_: u64, _: &EnsembleModel) -> Result<()> {
    Ok(())
}

fn same_seeds(cfg: &RunConfig) -> Vec<(u64, u64)> {
    cfg.seeds.iter().map(|&s| (s, s)).collect()
}

/// The run configuration minus the output directory, so a report does not
/// depend on where it is written.
fn config_echo(cfg: &RunConfig, extra: serde_json::Value) -> serde_json::Value {
    let cfg = RunConfig { out: None, ..cfg.clone() };
    let mut v = serde_json::to_value(&cfg).expect("serializable config");
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

/// Trains the configured variant once per seed. With `checkpoints`, each
/// seed's ensemble is saved under `checkpoints/seed_<seed>/`.
pub fn train(cfg: &RunConfig, checkpoints: Option<&Path>) -> Result<Outcome> {
    let (g, source) = cfg.load_graph()?;
    let mut runner = Runner { g: &g, failures: vec![] };
    let keep = |seed: u64, ens: &EnsembleModel| match checkpoints {
        Some(dir) => save_ensemble(ens, &dir.join(format!("seed_{seed}"))),
        None => Ok(()),
    };
    let group = runner.group(Model::Ensemble(cfg.variant), &cfg.train, same_seeds(cfg), "", keep);
    Ok(Outcome {
        report: Report::new("train", dataset_summary(&g, source), config_echo(cfg, serde_json::json!({})), vec![group]),
        failures: runner.failures,
    })
}

/// Scores a saved ensemble on `g`'s test split.
pub fn evaluate(checkpoint: &Path, g: &MultiRelationGraph, source: &str) -> Result<Report> {
    let ens = load_ensemble(checkpoint)?;
    for b in &ens.branches {
        b.spec.validate_against(g).map_err(|e| {
            Error::Checkpoint(format!("{} does not match the dataset: {e}", checkpoint.display()))
        })?;
    }
    let run = ensemble_run(g, &ens, ens.config.master_seed)?;
    let echo = serde_json::json!({
        "checkpoint": checkpoint.display().to_string(),
        "train": ens.config,
        "variant": ens.variant,
    });
    Ok(Report::new(
        "evaluate",
        dataset_summary(g, source),
        echo,
        vec![ReportGroup::new(ens.variant.as_str(), vec![run])],
    ))
}

/// Baseline, E, ES and FULL under the same seeds.
pub fn ablate(cfg: &RunConfig) -> Result<Outcome> {
    let (g, source) = cfg.load_graph()?;
    let mut runner = Runner { g: &g, failures: vec![] };
    let groups = [
        Model::Baseline,
        Model::Ensemble(Variant::E),
        Model::Ensemble(Variant::Es),
        Model::Ensemble(Variant::Full),
    ]
    .into_iter()
    .map(|m| runner.group(m, &cfg.train, same_seeds(cfg), "", no_keep))
    .collect();
    Ok(Outcome {
        report: Report::new("ablate", dataset_summary(&g, source), config_echo(cfg, serde_json::json!({})), groups),
        failures: runner.failures,
    })
}

/// One aggregated point per value. Point `p` of seed `s` trains under
/// master seed `derive(s, [SWEEP, p])`, so points never share random streams.
pub fn sweep(cfg: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Outcome> {
    if values.is_empty() {
        return Err(Error::Parameter("sweep needs at least one value".into()));
    }
    let points = values
        .iter()
        .map(|&v| param.apply(&cfg.train, v))
        .collect::<Result<Vec<_>>>()?;
    let (g, source) = cfg.load_graph()?;
    let mut runner = Runner { g: &g, failures: vec![] };
    let mut groups = Vec::with_capacity(values.len());
    for (p, (point, &value)) in points.iter().zip(values).enumerate() {
        let seeds: Vec<(u64, u64)> = cfg
            .seeds
            .iter()
            .map(|&s| (s, derive_seed(s, &[tag::SWEEP, p as u64])))
            .collect();
        let context = format!("{}={value} ", param.as_str());
        groups.push(
            runner
                .group(Model::Ensemble(cfg.variant), point, seeds, &context, no_keep)
                .at(param.as_str(), value),
        );
    }
    let echo = config_echo(cfg, serde_json::json!({"sweep": {"parameter": param.as_str(), "values": values}}));
    Ok(Outcome {
        report: Report::new("sweep", dataset_summary(&g, source), echo, groups),
        failures: runner.failures,
    })
}

/// For each fraction, trains the configured variant and the baseline on a
/// copy of the graph with that fraction of feature entries perturbed.
/// The noise draw depends only on the run seed.
pub fn noise(cfg: &RunConfig, fractions: &[f64]) -> Result<Outcome> {
    if fractions.is_empty() {
        return Err(Error::Parameter("noise needs at least one fraction".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Parameter(format!("noise fraction {f} outside [0, 1]")));
    }
    let (g, source) = cfg.load_graph()?;
    let mut groups = Vec::new();
    let mut failures = Vec::new();
    for &fraction in fractions {
        for model in [Model::Ensemble(cfg.variant), Model::Baseline] {
            let mut runs = Vec::new();
            for &seed in &cfg.seeds {
                let noisy = match inject_feature_noise(&g, fraction, seed) {
                    Ok(n) => n,
                    Err(e) => {
                        failures.push(SeedFailure {
                            seed,
                            context: format!("noise={fraction}"),
                            message: e.to_string(),
                        });
                        continue;
                    }
                };
                let mut runner = Runner { g: &noisy, failures: vec![] };
                let one = runner.group(model, &cfg.train, [(seed, seed)], &format!("noise={fraction} "), no_keep);
                runs.extend(one.runs);
                failures.extend(runner.failures);
            }
            groups.push(ReportGroup::new(model.name(), runs).at("noise", fraction));
        }
    }
    let echo = config_echo(cfg, serde_json::json!({"noise_fractions": fractions}));
    Ok(Outcome {
        report: Report::new("noise", dataset_summary(&g, source), echo, groups),
        failures,
    })
}

/// CSV with one row per node: `node,label,score_0..score_{C-1}` and, when
/// requested, every branch's aligned embedding as `b<i>_z<j>` columns.
pub fn export_embeddings(checkpoint: &Path, g: &MultiRelationGraph, with_embeddings: bool) -> Result<String> {
    let ens = load_ensemble(checkpoint)?;
    for b in &ens.branches {
        b.spec.validate_against(g)?;
    }
    let (scores, _) = aggregate_outputs(&branch_outputs(g, &ens)?)?;
    let embeddings = if with_embeddings {
        ens.branches
            .iter()
            .map(|b| branch_embedding(g, &b.spec, &b.model))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    let mut out = String::from("node,label");
    for c in 0..scores.cols() {
        write!(out, ",score_{c}").expect("writing to a string");
    }
    for (i, e) in embeddings.iter().enumerate() {
        for j in 0..e.cols() {
            write!(out, ",b{i}_z{j}").expect("writing to a string");
        }
    }
    out.push('\n');
    for v in 0..g.n() {
        write!(out, "{v},{}", g.labels()[v]).expect("writing to a string");
        for s in scores.row(v) {
            write!(out, ",{s}").expect("writing to a string");
        }
        for e in &embeddings {
            for z in e.row(v) {
                write!(out, ",{z}").expect("writing to a string");
            }
        }
        out.push('\n');
    }
    Ok(out)
}
