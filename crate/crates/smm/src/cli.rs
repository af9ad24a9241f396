//! The `smm` command.
//!
//! Exit status: 0 on success, 2 for configuration or input errors, 3 for
//! numeric failures such as divergence, 4 for artifacts written by an
//! unsupported format version.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use smm_core::bench::{make_dataset, BenchmarkSpec, TaskKind};
use smm_core::{Dataset, RngStream, Variant};

use crate::config::{RunConfig, SuiteName, VariantName};
use crate::experiment::{self, data_seed, RunOptions, MONOTONICITY_PROBES};
use crate::io::{self, ArtifactMeta};
use crate::model_file::{InitProvenance, ModelFile, NormalizationSpec};
use crate::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "smm", version, about = "Smooth min-max monotonic networks")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for `bench` (default: logical cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Network variant.
    #[arg(long, global = true, value_enum)]
    pub variant: Option<VariantName>,
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a generated dataset as train.csv and test.csv.
    Gen {
        /// f_sq, f_sqrt, f_sig, poly_d<d> or partial_synthetic.
        #[arg(long)]
        task: Option<String>,
    },
    /// Train one model; writes model.json and trace.csv.
    Train,
    /// Evaluate a model file; writes metrics.json.
    Eval {
        #[arg(long, value_name = "PATH")]
        model: PathBuf,
        /// CSV to evaluate on. Defaults to the data the model was trained on.
        #[arg(long, value_name = "PATH")]
        data: Option<PathBuf>,
    },
    /// Run a benchmark suite; writes report.json, report.csv,
    /// trials_long.csv and the resumable trials.jsonl.
    Bench {
        #[arg(long, value_enum)]
        suite: Option<SuiteName>,
        #[arg(long, value_name = "T")]
        trials: Option<usize>,
    },
}

/// Parse `args`, run the command and return the exit status.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn resolve_config(g: &GlobalArgs) -> Result<RunConfig> {
    let mut c = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = g.seed {
        c.seed = seed;
    }
    if let Some(jobs) = g.jobs {
        c.bench.jobs = jobs;
    }
    if let Some(out) = &g.out {
        c.output.dir = Some(out.clone());
    }
    if let Some(v) = g.variant {
        c.model.variant = v;
    }
    c.output.quiet |= g.quiet;
    Ok(c)
}

fn out_dir(c: &RunConfig) -> PathBuf {
    c.output.dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut config = resolve_config(&cli.global)?;
    match cli.command {
        Command::Gen { task } => {
            if let Some(t) = task {
                config.data.task = t;
                config.data.path = None;
            }
            cmd_gen(&config)
        }
        Command::Train => cmd_train(&config),
        Command::Eval { model, data } => cmd_eval(&config, &model, data.as_deref()),
        Command::Bench { suite, trials } => {
            if let Some(s) = suite {
                config.bench.suite = s;
            }
            if let Some(t) = trials {
                config.bench.trials = t;
            }
            let only = cli.global.variant.map(Variant::from);
            cmd_bench(&config, only)
        }
    }
}

fn say(config: &RunConfig, msg: impl AsRef<str>) {
    if !config.output.quiet {
        println!("{}", msg.as_ref());
    }
}

pub fn cmd_gen(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config);
    let meta = ArtifactMeta::new(config.hash(), config.seed);
    if config.data.task == "partial_synthetic" {
        let (data, mask, columns) = experiment::synthetic_partial_dataset()?;
        let csv = dir.join("partial_synthetic.csv");
        io::write_atomic(&csv, io::dataset_csv(&data, &columns, &meta).as_bytes())?;
        io::write_atomic(&io::default_mask_path(&csv), io::mask_json(&mask, &columns[..data.dim()]).as_bytes())?;
        say(config, format!("wrote {}", csv.display()));
        return Ok(());
    }
    let kind = config.task()?.ok_or_else(|| Error::config("gen: data.path is set; nothing to generate"))?;
    let (train, test) = generated(config, kind)?;
    let columns = io::default_columns(kind.dim());
    io::write_atomic(&dir.join("train.csv"), io::dataset_csv(&train, &columns, &meta).as_bytes())?;
    io::write_atomic(&dir.join("test.csv"), io::dataset_csv(&test, &columns, &meta).as_bytes())?;
    say(config, format!("wrote {} and {}", dir.join("train.csv").display(), dir.join("test.csv").display()));
    Ok(())
}

/// Trial-0 data of a generated task, matching `train` and `bench`.
fn generated(config: &RunConfig, kind: TaskKind) -> Result<(Dataset, Dataset)> {
    let mut spec = BenchmarkSpec::new(kind, data_seed(config.seed, &kind.name()), 0);
    if let Some(n) = config.data.n_train {
        spec.n_train = n;
    }
    spec.n_test = config.data.n_test;
    spec.noise_sigma = config.data.noise_sigma;
    let g = make_dataset(&spec)?;
    Ok((g.train, g.test))
}

pub fn cmd_train(config: &RunConfig) -> Result<()> {
    let dir = out_dir(config);
    let run = experiment::train_configured(config)?;
    let meta = ArtifactMeta::new(config.hash(), config.seed);
    let mut file = ModelFile::new(
        &run.model,
        meta.clone(),
        InitProvenance {
            seed: run.init.0,
            stream_id: run.init.1,
        },
        &run.provenance,
    );
    file.normalization = run.normalizer.as_ref().map(NormalizationSpec::from_normalizer);
    let mut stored = config.clone();
    stored.output = Default::default();
    file.config = Some(stored);
    file.save(&dir.join("model.json"))?;
    io::write_atomic(&dir.join("trace.csv"), io::trace_csv(&run.trace, &meta).as_bytes())?;
    let last = run.trace.selected().or(run.trace.last());
    say(
        config,
        format!(
            "{} parameters, {} epochs ({}), train mse {:.6e}, test mse {:.6e}",
            run.model.params().len(),
            run.trace.epochs(),
            run.trace.stopped.map_or("-", |r| r.name()),
            last.map_or(f64::NAN, |r| r.train_mse),
            run.model.mse(&run.test)?
        ),
    );
    say(config, format!("wrote {}", dir.join("model.json").display()));
    Ok(())
}

#[derive(Debug, Serialize)]
struct Metrics {
    #[serde(flatten)]
    meta: ArtifactMeta,
    model: String,
    variant: String,
    parameters: usize,
    data: Option<String>,
    mse: Option<f64>,
    train_mse: Option<f64>,
    test_mse: Option<f64>,
    monotonicity_probes: usize,
    monotonicity_violations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    active_neurons: Option<usize>,
}

pub fn cmd_eval(config: &RunConfig, model_path: &Path, data: Option<&Path>) -> Result<()> {
    let file = ModelFile::load(model_path)?;
    let model = file.model()?;
    let mut metrics = Metrics {
        meta: ArtifactMeta::new(file.meta.config_hash.clone(), config.seed),
        model: model_path.display().to_string(),
        variant: file.variant.clone(),
        parameters: model.params().len(),
        data: data.map(|p| p.display().to_string()),
        mse: None,
        train_mse: None,
        test_mse: None,
        monotonicity_probes: MONOTONICITY_PROBES,
        monotonicity_violations: 0,
        active_neurons: None,
    };
    let diag_inputs = match data {
        Some(path) => {
            let csv = io::read_dataset_csv(path, None)?;
            let d = match file.normalizer()? {
                Some(n) => n.apply(&csv.data)?,
                None => csv.data,
            };
            metrics.mse = Some(model.mse(&d)?);
            d
        }
        None => {
            let trained = file
                .config
                .as_ref()
                .ok_or_else(|| Error::config("eval: the model file has no training config; pass --data"))?;
            let (train, test) = experiment::configured_data(trained)?;
            metrics.train_mse = Some(model.mse(&train)?);
            metrics.test_mse = Some(model.mse(&test)?);
            test
        }
    };
    let mut rng = RngStream::new(config.seed, 0);
    metrics.monotonicity_violations = model.monotonicity_violations(MONOTONICITY_PROBES, &mut rng);
    if model.variant() == Variant::Mm {
        metrics.active_neurons = Some(model.active_neuron_stats(diag_inputs.inputs())?.active);
    }
    let mut json = serde_json::to_string_pretty(&metrics).expect("metrics serialize");
    json.push('\n');
    let path = out_dir(config).join("metrics.json");
    io::write_atomic(&path, json.as_bytes())?;
    say(config, json.trim_end());
    Ok(())
}

pub fn cmd_bench(config: &RunConfig, only: Option<Variant>) -> Result<()> {
    let dir = config
        .output
        .dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("bench-{}", config.bench.suite.name())));
    let suite = experiment::suite_for(config, only)?;
    let opts = RunOptions {
        jobs: config.bench.jobs,
        store: Some(dir.join("trials.jsonl")),
        limit: None,
        quiet: config.output.quiet,
    };
    let report = experiment::run_suite(&suite, &opts)?
        .ok_or_else(|| Error::config("bench: suite stopped before every trial finished"))?;
    report.write_all(&dir)?;
    say(config, report.to_table());
    say(config, format!("wrote {}", dir.join("report.json").display()));
    Ok(())
}
