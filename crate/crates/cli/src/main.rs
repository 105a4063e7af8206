use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rfgnn::backbones::BackboneKind;
use rfgnn::ensemble::{TrainConfig, Variant};
use rfgnn::experiment::{self, Outcome, RunConfig, SweepParam};
use rfgnn::graphstore::SyntheticParams;

/// Random-forest GNN ensembles for node classification.
#[derive(Parser)]
#[command(name = "rfgnn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset directory.
    GenSynth(GenSynthArgs),
    /// Train an ensemble once per seed and score it on the test split.
    Train(RunArgs),
    /// Score a saved ensemble checkpoint.
    Evaluate(EvaluateArgs),
    /// Compare the baseline and the E, ES and FULL variants.
    Ablate(RunArgs),
    /// Vary one hyperparameter and report one point per value.
    Sweep(SweepArgs),
    /// Measure accuracy under Gaussian feature noise.
    Noise(NoiseArgs),
    /// Write per-node ensemble scores (and optionally branch embeddings) as CSV.
    ExportEmbeddings(ExportArgs),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed of a single run.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Comma-separated master seeds, one run each.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for branch training (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory; replaces any synthetic parameters.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct TrainFlags {
    /// Sampling rates of a named setting: cresci15, twibot20 or mgtab.
    #[arg(long)]
    preset: Option<String>,
    /// e, es or full.
    #[arg(long)]
    variant: Option<Variant>,
    /// gcn, sgc or rgcn.
    #[arg(long)]
    backbone: Option<BackboneKind>,
    /// Number of branches.
    #[arg(long = "S", visible_alias = "branches")]
    branches: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    out_dim: Option<usize>,
    #[arg(long)]
    sgc_power: Option<usize>,
    /// Keep each branch's best-validation-accuracy epoch instead of the last one.
    #[arg(long)]
    best_val: bool,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    train: TrainFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// alpha, beta, gamma or S.
    #[arg(long)]
    param: SweepParam,
    /// Comma-separated values, evaluated in order.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
}

#[derive(Args)]
struct NoiseArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Comma-separated fractions of perturbed feature entries.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3")]
    fractions: Vec<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    data: DataArgs,
    /// Ensemble checkpoint directory written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    eval: EvaluateArgs,
    /// Also write every branch's aligned embedding.
    #[arg(long)]
    embeddings: bool,
}

#[derive(Args)]
struct GenSynthArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    relations: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    informative: Option<usize>,
    #[arg(long)]
    redundant: Option<usize>,
    #[arg(long)]
    noise_dims: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

/// Defaults, then the config file, then the preset, then individual flags.
fn run_config(common: &Common, data: &DataArgs, flags: Option<&TrainFlags>) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &data.dataset {
        cfg.dataset = Some(dir.clone());
        cfg.synthetic = None;
    }
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    set(&mut cfg.seeds, common.seeds.clone());
    if let Some(dir) = &common.out {
        cfg.out = Some(dir.clone());
    }
    if let Some(f) = flags {
        apply_train_flags(&mut cfg.train, &mut cfg.variant, f)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_train_flags(t: &mut TrainConfig, variant: &mut Variant, f: &TrainFlags) -> Result<()> {
    if let Some(name) = &f.preset {
        let p = TrainConfig::preset(name)?;
        (t.alpha, t.beta, t.gamma) = (p.alpha, p.beta, p.gamma);
    }
    set(variant, f.variant);
    set(&mut t.backbone.kind, f.backbone);
    set(&mut t.branches, f.branches);
    set(&mut t.alpha, f.alpha);
    set(&mut t.beta, f.beta);
    set(&mut t.gamma, f.gamma);
    set(&mut t.epochs, f.epochs);
    set(&mut t.lr, f.lr);
    set(&mut t.weight_decay, f.weight_decay);
    set(&mut t.backbone.dropout, f.dropout);
    set(&mut t.backbone.layers, f.layers);
    set(&mut t.backbone.hidden, f.hidden);
    set(&mut t.backbone.out_dim, f.out_dim);
    set(&mut t.backbone.sgc_power, f.sgc_power);
    t.select_best_val |= f.best_val;
    Ok(())
}

fn with_threads<T: Send>(threads: Option<usize>, job: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker pool")?
            .install(job),
        None => job(),
    }
}

fn out_dir(cfg: &RunConfig, force: bool) -> Result<Option<PathBuf>> {
    match &cfg.out {
        Some(dir) => {
            experiment::prepare_out_dir(dir, force)?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

/// Prints the table, writes the report files and turns failed seeds into an error.
fn finish(outcome: Outcome, out: Option<&Path>, curve: bool) -> Result<()> {
    print!("{}", outcome.report.to_text());
    if let Some(dir) = out {
        experiment::write_report(&outcome.report, dir, curve)?;
        eprintln!("wrote {}", dir.join("report.json").display());
    }
    if outcome.failures.is_empty() {
        return Ok(());
    }
    for f in &outcome.failures {
        eprintln!("seed {} ({}) failed: {}", f.seed, f.context, f.message);
    }
    let seeds: Vec<String> = outcome.failures.iter().map(|f| f.seed.to_string()).collect();
    bail!("{} run(s) failed (seeds {})", outcome.failures.len(), seeds.join(", "))
}

fn gen_synth(args: GenSynthArgs) -> Result<()> {
    let out = args.common.out.clone().context("gen-synth needs --out <dir>")?;
    let mut p = match &args.common.config {
        Some(path) => RunConfig::from_json_file(path)?.synthetic.unwrap_or_default(),
        None => SyntheticParams::default(),
    };
    set(&mut p.seed, args.common.seed);
    set(&mut p.n, args.nodes);
    set(&mut p.classes, args.classes);
    set(&mut p.relations, args.relations);
    set(&mut p.p_in, args.p_in);
    set(&mut p.p_out, args.p_out);
    set(&mut p.informative_dims, args.informative);
    set(&mut p.redundant_dims, args.redundant);
    set(&mut p.noise_dims, args.noise_dims);
    set(&mut p.class_separation, args.separation);
    experiment::prepare_out_dir(&out, args.common.force)?;
    let g = experiment::gen_synth(&p, &out)?;
    println!(
        "wrote {}: N={} M={} K={} C={} edges={} train/val/test={}/{}/{}",
        out.display(),
        g.n(),
        g.m(),
        g.k(),
        g.num_classes(),
        g.num_edges(),
        g.splits().train.len(),
        g.splits().val.len(),
        g.splits().test.len()
    );
    Ok(())
}

fn load_eval_graph(args: &EvaluateArgs) -> Result<(rfgnn::graphstore::MultiRelationGraph, String)> {
    let cfg = run_config(&args.common, &args.data, None)?;
    Ok(cfg.load_graph()?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynth(args) => gen_synth(args),
        Command::Train(args) => {
            let cfg = run_config(&args.common, &args.data, Some(&args.train))?;
            let out = out_dir(&cfg, args.common.force)?;
            let ckpt = out.as_ref().map(|d| d.join("checkpoints"));
            let outcome = with_threads(args.common.threads, || Ok(experiment::train(&cfg, ckpt.as_deref())?))?;
            finish(outcome, out.as_deref(), false)
        }
        Command::Ablate(args) => {
            let cfg = run_config(&args.common, &args.data, Some(&args.train))?;
            let out = out_dir(&cfg, args.common.force)?;
            let outcome = with_threads(args.common.threads, || Ok(experiment::ablate(&cfg)?))?;
            finish(outcome, out.as_deref(), false)
        }
        Command::Sweep(args) => {
            let r = &args.run;
            let cfg = run_config(&r.common, &r.data, Some(&r.train))?;
            let out = out_dir(&cfg, r.common.force)?;
            let outcome = with_threads(r.common.threads, || Ok(experiment::sweep(&cfg, args.param, &args.values)?))?;
            finish(outcome, out.as_deref(), true)
        }
        Command::Noise(args) => {
            let r = &args.run;
            let cfg = run_config(&r.common, &r.data, Some(&r.train))?;
            let out = out_dir(&cfg, r.common.force)?;
            let outcome = with_threads(r.common.threads, || Ok(experiment::noise(&cfg, &args.fractions)?))?;
            finish(outcome, out.as_deref(), true)
        }
        Command::Evaluate(args) => {
            let (g, source) = load_eval_graph(&args)?;
            let report = experiment::evaluate(&args.checkpoint, &g, &source)?;
            print!("{}", report.to_text());
            if let Some(dir) = &args.common.out {
                experiment::prepare_out_dir(dir, args.common.force)?;
                experiment::write_report(&report, dir, false)?;
            }
            Ok(())
        }
        Command::ExportEmbeddings(args) => {
            let (g, _) = load_eval_graph(&args.eval)?;
            let csv = experiment::export_embeddings(&args.eval.checkpoint, &g, args.embeddings)?;
            match &args.eval.common.out {
                Some(dir) => {
                    experiment::prepare_out_dir(dir, args.eval.common.force)?;
                    let path = dir.join("embeddings.csv");
                    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
