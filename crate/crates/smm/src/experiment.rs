//! Multi-trial benchmark runs and their reports.
//!
//! A [`Suite`] is a list of tasks, a list of methods and a trial count. Each
//! `(task, method, trial)` cell is an independent work item: its data and
//! initialization come from seeds derived from the root seed, the task id and
//! the trial index, so results do not depend on scheduling. All methods of a
//! trial see the same data, which makes the per-trial errors paired.
//!
//! Finished trials are appended to a JSON-lines file as they complete. A rerun
//! with the same configuration skips the trials already stored there.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smm_core::data::Provenance;
use smm_core::bench::{
    kfold_with_validation, make_dataset, partial_monotone_synthetic, BenchmarkSpec, FoldSplit, TaskKind, UnitNormalizer,
};
use smm_core::isotonic::pava_fit;
use smm_core::numerics::mix_seed;
use smm_core::stats::{wilcoxon_paired, Summary};
use smm_core::{fit, Dataset, Model, MonotonicityMask, RngStream, TrainTrace, Variant};

use crate::config::{RunConfig, StopName, SuiteName};
use crate::io::{self, ArtifactMeta};
use crate::{Error, Result};

pub const REPORT_FORMAT_VERSION: u32 = 1;
/// Monotonicity probes per trained model.
pub const MONOTONICITY_PROBES: usize = 1000;

/// Rows, noise and seed of the bundled partial-monotone dataset.
pub const SYNTHETIC_ROWS: usize = 1000;
pub const SYNTHETIC_NOISE: f64 = 0.01;
pub const SYNTHETIC_SEED: u64 = 2024;

const DATA_TAG: u64 = 0x6461_7461;
const INIT_TAG: u64 = 0x696e_6974;
const FOLD_TAG: u64 = 0x666f_6c64;
const PROBE_TAG: u64 = 0x7072_6f62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Smm,
    Mm,
    Smm64,
    Iso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Smm => "smm",
            Method::Mm => "mm",
            Method::Smm64 => "smm64",
            Method::Iso => "iso",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Smm => Some(Variant::Smm),
            Method::Mm => Some(Variant::Mm),
            Method::Smm64 => Some(Variant::Smm64),
            Method::Iso => None,
        }
    }
}

impl From<Variant> for Method {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Mm => Method::Mm,
            Variant::Smm => Method::Smm,
            Variant::Smm64 => Method::Smm64,
        }
    }
}

/// FNV-1a of the task id; keys the per-task seeds.
fn task_tag(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seed of the data stream for `task`; trial `t` uses stream `t`.
pub fn data_seed(root: u64, task: &str) -> u64 {
    mix_seed(mix_seed(root, DATA_TAG), task_tag(task))
}

/// Seed of the initialization stream for `task`; trial `t` uses stream `t`.
pub fn init_seed(root: u64, task: &str) -> u64 {
    mix_seed(mix_seed(root, INIT_TAG), task_tag(task))
}

/// A dataset evaluated by cross-validation, one fold per trial.
#[derive(Clone, Debug)]
pub struct CrossValTask {
    pub data: Dataset,
    pub mask: MonotonicityMask,
    pub folds: Vec<FoldSplit>,
    pub normalize: bool,
}

#[derive(Clone, Debug)]
pub enum TaskSource {
    /// Fresh data per trial from a generated benchmark.
    Bench { kind: TaskKind, n_train: usize, n_test: usize, noise_sigma: f64 },
    CrossVal(Arc<CrossValTask>),
}

#[derive(Clone, Debug)]
pub struct SuiteTask {
    pub id: String,
    pub source: TaskSource,
}

#[derive(Clone, Debug)]
pub struct Suite {
    pub name: String,
    pub tasks: Vec<SuiteTask>,
    /// The first method is the reference for the paired tests.
    pub methods: Vec<Method>,
    pub trials: usize,
    pub root_seed: u64,
    /// Model shape and training settings.
    pub config: RunConfig,
}

/// Data of one trial, already normalized when the task asks for it.
struct TrialData {
    train: Dataset,
    val: Option<Dataset>,
    test: Dataset,
    mask: MonotonicityMask,
    stop_default: StopName,
    normalizer: Option<UnitNormalizer>,
    provenance: Provenance,
}

impl Suite {
    pub fn config_hash(&self) -> String {
        self.config.hash()
    }

    fn trial_data(&self, task: &SuiteTask, trial: usize) -> Result<TrialData> {
        match &task.source {
            TaskSource::Bench {
                kind,
                n_train,
                n_test,
                noise_sigma,
            } => {
                let spec = BenchmarkSpec {
                    kind: *kind,
                    n_train: *n_train,
                    n_test: *n_test,
                    noise_sigma: *noise_sigma,
                    seed: data_seed(self.root_seed, &task.id),
                    stream_id: trial as u64,
                };
                let g = make_dataset(&spec)?;
                Ok(TrialData {
                    provenance: g.train.provenance.clone(),
                    train: g.train,
                    val: None,
                    test: g.test,
                    mask: MonotonicityMask::all(kind.dim()),
                    stop_default: StopName::Progress,
                    normalizer: None,
                })
            }
            TaskSource::CrossVal(cv) => {
                let fold = cv
                    .folds
                    .get(trial)
                    .ok_or_else(|| Error::config(format!("task {}: no fold {trial}", task.id)))?;
                let train = cv.data.subset(&fold.train);
                let val = cv.data.subset(&fold.val);
                let test = cv.data.subset(&fold.test);
                let normalizer = if cv.normalize { Some(UnitNormalizer::fit(&train)?) } else { None };
                let (train, val, test) = match &normalizer {
                    Some(n) => (n.apply(&train)?, n.apply(&val)?, n.apply(&test)?),
                    None => (train, val, test),
                };
                Ok(TrialData {
                    train,
                    val: (!val.is_empty()).then_some(val),
                    test,
                    mask: cv.mask.clone(),
                    stop_default: StopName::Validation,
                    normalizer,
                    provenance: cv.data.provenance.clone(),
                })
            }
        }
    }

    /// Run one cell. Failures are recorded in the result rather than returned.
    pub fn run_trial(&self, task: &SuiteTask, method: Method, trial: usize) -> TrialResult {
        let start = Instant::now();
        let mut result = TrialResult {
            task: task.id.clone(),
            method,
            trial,
            data_seed: data_seed(self.root_seed, &task.id),
            init_seed: init_seed(self.root_seed, &task.id),
            train_mse: None,
            test_mse: None,
            constant_test_mse: None,
            epochs: 0,
            stopped: None,
            active_neurons: None,
            monotonicity_violations: None,
            error: None,
            wall_time: None,
        };
        if let Err(e) = self.fill_trial(task, method, trial, &mut result) {
            result.error = Some(e.to_string());
        }
        result.wall_time = Some(start.elapsed().as_secs_f64());
        result
    }

    fn fill_trial(&self, task: &SuiteTask, method: Method, trial: usize, out: &mut TrialResult) -> Result<()> {
        let data = self.trial_data(task, trial)?;
        out.constant_test_mse = Some(data.test.constant_mse(data.train.target_mean()));
        match method.variant() {
            Some(variant) => {
                let arch = self.config.architecture(variant, data.mask.clone())?;
                let stop = self.config.stop_rule(data.stop_default)?;
                let cfg = self.config.train_config(stop, out.init_seed, trial as u64)?;
                let val = if stop.needs_validation() {
                    Some(data.val.as_ref().ok_or_else(|| {
                        Error::config(format!("task {}: the validation rule needs validation data", task.id))
                    })?)
                } else {
                    None
                };
                let (model, trace) = fit(arch, &data.train, val, &cfg)?;
                out.train_mse = Some(model.mse(&data.train)?);
                out.test_mse = Some(model.mse(&data.test)?);
                out.epochs = trace.epochs();
                out.stopped = trace.stopped.map(|r| r.name().to_string());
                if variant == Variant::Mm {
                    out.active_neurons = Some(model.active_neuron_stats(data.test.inputs())?.active);
                }
                let mut rng = RngStream::new(mix_seed(out.init_seed, PROBE_TAG), trial as u64);
                out.monotonicity_violations = Some(model.monotonicity_violations(MONOTONICITY_PROBES, &mut rng));
            }
            None => {
                if data.train.dim() != 1 {
                    return Err(Error::config(format!("task {}: isotonic regression needs one input", task.id)));
                }
                let fit = pava_fit(data.train.inputs(), data.train.targets(), (0.0, 1.0))?;
                let mse = |d: &Dataset| d.rows().map(|(x, y)| (fit.predict_linear(x[0]) - y).powi(2)).sum::<f64>() / d.len() as f64;
                out.train_mse = Some(mse(&data.train));
                out.test_mse = Some(mse(&data.test));
            }
        }
        Ok(())
    }

    fn work_items(&self) -> Vec<(usize, Method, usize)> {
        let mut items = Vec::new();
        for t in 0..self.tasks.len() {
            for &m in &self.methods {
                for trial in 0..self.trials {
                    items.push((t, m, trial));
                }
            }
        }
        items
    }
}

/// Outcome of one `(task, method, trial)` cell. Errors are on the raw MSE
/// scale; test errors are on noise-free data without clipping the outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub task: String,
    pub method: Method,
    pub trial: usize,
    pub data_seed: u64,
    pub init_seed: u64,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    /// Test error of predicting the mean training target.
    pub constant_test_mse: Option<f64>,
    pub epochs: usize,
    pub stopped: Option<String>,
    /// MM only: neurons selected for at least one test input.
    pub active_neurons: Option<usize>,
    pub monotonicity_violations: Option<usize>,
    pub error: Option<String>,
    /// Seconds; kept in the trial store, dropped from reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl TrialResult {
    pub fn completed(&self) -> bool {
        self.error.is_none() && self.test_mse.is_some()
    }
}

/// One line of the trial store.
#[derive(Serialize, Deserialize)]
struct StoredTrial {
    config_hash: String,
    #[serde(flatten)]
    result: TrialResult,
}

/// Stored results for `config_hash`. Lines that do not parse, such as a
/// line cut short by an interrupted run, are skipped.
pub fn load_store(path: &Path, config_hash: &str) -> Result<Vec<TrialResult>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    Ok(text
        .lines()
        .filter_map(|l| serde_json::from_str::<StoredTrial>(l).ok())
        .filter(|s| s.config_hash == config_hash)
        .map(|s| s.result)
        .collect())
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses every logical core.
    pub jobs: usize,
    /// Trial store to resume from and append to.
    pub store: Option<PathBuf>,
    /// Stop after this many new trials, leaving the rest for a later run.
    pub limit: Option<usize>,
    pub quiet: bool,
}

/// Run every pending cell of `suite` and build the report.
///
/// The report is `None` when `limit` left cells unfinished.
pub fn run_suite(suite: &Suite, opts: &RunOptions) -> Result<Option<ExperimentReport>> {
    let hash = suite.config_hash();
    let items = suite.work_items();
    let mut done: BTreeMap<(String, Method, usize), TrialResult> = BTreeMap::new();
    if let Some(store) = &opts.store {
        for r in load_store(store, &hash)? {
            done.insert((r.task.clone(), r.method, r.trial), r);
        }
    }
    let mut pending: Vec<(usize, Method, usize)> = items
        .iter()
        .copied()
        .filter(|&(t, m, trial)| !done.contains_key(&(suite.tasks[t].id.clone(), m, trial)))
        .collect();
    if let Some(limit) = opts.limit {
        pending.truncate(limit);
    }

    let writer = match &opts.store {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let file = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            Some(Mutex::new((file, path.clone())))
        }
        None => None,
    };
    let total = pending.len();
    let finished = Mutex::new(0usize);
    let run = || -> Result<Vec<TrialResult>> {
        pending
            .par_iter()
            .map(|&(t, method, trial)| {
                let task = &suite.tasks[t];
                let result = suite.run_trial(task, method, trial);
                if let Some(w) = &writer {
                    let line = serde_json::to_string(&StoredTrial {
                        config_hash: hash.clone(),
                        result: result.clone(),
                    })
                    .expect("trial serializes");
                    let mut guard = w.lock().expect("store lock");
                    let (file, path) = &mut *guard;
                    writeln!(file, "{line}")
                        .and_then(|_| file.flush())
                        .map_err(|e| Error::io(path.clone(), e))?;
                }
                if !opts.quiet {
                    let mut n = finished.lock().expect("counter lock");
                    *n += 1;
                    let outcome = match (&result.error, result.test_mse) {
                        (Some(e), _) => format!("failed: {e}"),
                        (None, Some(m)) => format!("test mse x1e3 = {:.4}", m * 1e3),
                        (None, None) => String::new(),
                    };
                    eprintln!("[{}/{}] {} {} trial {}: {}", *n, total, task.id, method.name(), trial, outcome);
                }
                Ok(result)
            })
            .collect()
    };
    let fresh = if opts.jobs == 0 {
        run()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::config(format!("cannot start {} workers: {e}", opts.jobs)))?
            .install(run)?
    };
    for r in fresh {
        done.insert((r.task.clone(), r.method, r.trial), r);
    }

    let mut results = Vec::with_capacity(items.len());
    for (t, m, trial) in items {
        match done.remove(&(suite.tasks[t].id.clone(), m, trial)) {
            Some(r) => results.push(r),
            None => return Ok(None),
        }
    }
    Ok(Some(ExperimentReport::build(suite, results)))
}

/// Serializable form of [`Summary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

impl SummaryRow {
    fn of(values: &[f64]) -> Option<Self> {
        let s: Summary = Summary::of(values).ok()?;
        Some(SummaryRow {
            n: s.n,
            median: s.median,
            q1: s.q1,
            q3: s.q3,
            min: s.min,
            max: s.max,
            outliers: s.outliers,
        })
    }
}

/// Aggregates of one `(task, method)` cell over its completed trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub task: String,
    pub method: Method,
    pub completed: usize,
    pub failed: usize,
    pub train_mse: Option<SummaryRow>,
    pub test_mse: Option<SummaryRow>,
    pub constant_test_mse: Option<SummaryRow>,
    pub active_neurons: Option<SummaryRow>,
    pub monotonicity_violations: usize,
}

/// Two-sided paired Wilcoxon test of the reference method against another
/// method on one task, over trials both completed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairedTest {
    pub task: String,
    pub reference: Method,
    pub other: Method,
    pub pairs: usize,
    pub w_plus: Option<f64>,
    pub p_value: Option<f64>,
    pub exact: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub format: String,
    pub format_version: u32,
    #[serde(flatten)]
    pub meta: ArtifactMeta,
    pub suite: String,
    pub trials: usize,
    pub tasks: Vec<String>,
    pub methods: Vec<Method>,
    /// Quantiles interpolate linearly between order statistics.
    pub quantile_rule: String,
    pub cells: Vec<CellReport>,
    pub tests: Vec<PairedTest>,
    pub results: Vec<TrialResult>,
}

impl ExperimentReport {
    /// Aggregate `results` (wall times are dropped).
    pub fn build(suite: &Suite, mut results: Vec<TrialResult>) -> Self {
        for r in &mut results {
            r.wall_time = None;
        }
        let ids: Vec<String> = suite.tasks.iter().map(|t| t.id.clone()).collect();
        let cell_of = |task: &str, m: Method| -> Vec<&TrialResult> {
            results.iter().filter(|r| r.task == task && r.method == m).collect()
        };
        let mut cells = Vec::new();
        let mut tests = Vec::new();
        for task in &ids {
            for &m in &suite.methods {
                let rows = cell_of(task, m);
                let ok: Vec<&TrialResult> = rows.iter().copied().filter(|r| r.completed()).collect();
                let col = |f: &dyn Fn(&TrialResult) -> Option<f64>| -> Option<SummaryRow> {
                    let v: Vec<f64> = ok.iter().filter_map(|r| f(r)).collect();
                    SummaryRow::of(&v)
                };
                cells.push(CellReport {
                    task: task.clone(),
                    method: m,
                    completed: ok.len(),
                    failed: rows.len() - ok.len(),
                    train_mse: col(&|r| r.train_mse),
                    test_mse: col(&|r| r.test_mse),
                    constant_test_mse: col(&|r| r.constant_test_mse),
                    active_neurons: col(&|r| r.active_neurons.map(|a| a as f64)),
                    monotonicity_violations: ok.iter().filter_map(|r| r.monotonicity_violations).sum(),
                });
            }
            let Some((&reference, others)) = suite.methods.split_first() else {
                continue;
            };
            for &other in others {
                let a = cell_of(task, reference);
                let b = cell_of(task, other);
                let (xs, ys): (Vec<f64>, Vec<f64>) = a
                    .iter()
                    .filter_map(|ra| {
                        let rb = b.iter().find(|rb| rb.trial == ra.trial)?;
                        Some((ra.test_mse?, rb.test_mse?))
                    })
                    .unzip();
                let mut test = PairedTest {
                    task: task.clone(),
                    reference,
                    other,
                    pairs: xs.len(),
                    w_plus: None,
                    p_value: None,
                    exact: None,
                    error: None,
                };
                match wilcoxon_paired(&xs, &ys) {
                    Ok(w) => {
                        test.w_plus = Some(w.w_plus);
                        test.p_value = Some(w.p_value);
                        test.exact = Some(w.exact);
                    }
                    Err(e) => test.error = Some(e.to_string()),
                }
                tests.push(test);
            }
        }
        ExperimentReport {
            format: "smm-report".into(),
            format_version: REPORT_FORMAT_VERSION,
            meta: ArtifactMeta::new(suite.config_hash(), suite.root_seed),
            suite: suite.name.clone(),
            trials: suite.trials,
            tasks: ids,
            methods: suite.methods.clone(),
            quantile_rule: "linear".into(),
            cells,
            tests,
            results,
        }
    }

    pub fn cell(&self, task: &str, method: Method) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.task == task && c.method == method)
    }

    pub fn test(&self, task: &str, other: Method) -> Option<&PairedTest> {
        self.tests.iter().find(|t| t.task == task && t.other == other)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per `(task, method)`; MSE columns are scaled by 1e3.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# tool_version={} config_hash={} seed={}\n",
            self.meta.tool_version, self.meta.config_hash, self.meta.seed
        );
        out.push_str(
            "task,method,completed,failed,train_median_e3,train_q1_e3,train_q3_e3,\
             test_median_e3,test_q1_e3,test_q3_e3,test_outliers,active_median,active_max,p_vs_reference\n",
        );
        let e3 = |s: &Option<SummaryRow>, f: fn(&SummaryRow) -> f64| s.as_ref().map(|s| format!("{:?}", f(s) * 1e3)).unwrap_or_default();
        for c in &self.cells {
            let p = self
                .tests
                .iter()
                .find(|t| t.task == c.task && t.other == c.method)
                .and_then(|t| t.p_value)
                .map(|p| format!("{p:?}"))
                .unwrap_or_default();
            let active = |f: fn(&SummaryRow) -> f64| c.active_neurons.as_ref().map(|s| format!("{:?}", f(s))).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.task,
                c.method.name(),
                c.completed,
                c.failed,
                e3(&c.train_mse, |s| s.median),
                e3(&c.train_mse, |s| s.q1),
                e3(&c.train_mse, |s| s.q3),
                e3(&c.test_mse, |s| s.median),
                e3(&c.test_mse, |s| s.q1),
                e3(&c.test_mse, |s| s.q3),
                c.test_mse.as_ref().map_or(0, |s| s.outliers.len()),
                active(|s| s.median),
                active(|s| s.max),
                p
            ));
        }
        out
    }

    /// Long format for plotting: one row per trial and split.
    pub fn to_long_csv(&self) -> String {
        let mut out = format!(
            "# tool_version={} config_hash={} seed={}\n",
            self.meta.tool_version, self.meta.config_hash, self.meta.seed
        );
        out.push_str("task,method,trial,split,mse\n");
        for r in &self.results {
            for (split, v) in [("train", r.train_mse), ("test", r.test_mse)] {
                if let Some(v) = v {
                    out.push_str(&format!("{},{},{},{},{:?}\n", r.task, r.method.name(), r.trial, split, v));
                }
            }
        }
        out
    }

    /// Fixed-width summary in units of 1e-3.
    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:<6} {:>5} {:>12} {:>12} {:>12} {:>8} {:>10}\n",
            "task", "method", "n", "train x1e3", "test x1e3", "test IQR", "active", "p"
        );
        for c in &self.cells {
            let med = |s: &Option<SummaryRow>| s.as_ref().map(|s| format!("{:.4}", s.median * 1e3)).unwrap_or("-".into());
            let iqr = c
                .test_mse
                .as_ref()
                .map(|s| format!("{:.3}-{:.3}", s.q1 * 1e3, s.q3 * 1e3))
                .unwrap_or("-".into());
            let active = c.active_neurons.as_ref().map(|s| format!("{}", s.median)).unwrap_or("-".into());
            let p = self
                .test(&c.task, c.method)
                .and_then(|t| t.p_value)
                .map(|p| format!("{p:.2e}"))
                .unwrap_or("-".into());
            out.push_str(&format!(
                "{:<12} {:<6} {:>5} {:>12} {:>12} {:>12} {:>8} {:>10}\n",
                c.task,
                c.method.name(),
                c.completed,
                med(&c.train_mse),
                med(&c.test_mse),
                iqr,
                active,
                p
            ));
        }
        out
    }

    /// Write `report.json`, `report.csv` and `trials_long.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        io::write_atomic(&dir.join("report.json"), self.to_json().as_bytes())?;
        io::write_atomic(&dir.join("report.csv"), self.to_csv().as_bytes())?;
        io::write_atomic(&dir.join("trials_long.csv"), self.to_long_csv().as_bytes())
    }
}

fn bench_task(kind: TaskKind, config: &RunConfig) -> SuiteTask {
    let default = BenchmarkSpec::new(kind, 0, 0);
    SuiteTask {
        id: kind.name(),
        source: TaskSource::Bench {
            kind,
            n_train: config.data.n_train.unwrap_or(default.n_train),
            n_test: config.data.n_test,
            noise_sigma: config.data.noise_sigma,
        },
    }
}

/// Methods of a suite, with the network variants optionally replaced by one.
fn with_variant(methods: &[Method], only: Option<Variant>) -> Vec<Method> {
    match only {
        None => methods.to_vec(),
        Some(v) => {
            let mut out = vec![Method::from(v)];
            out.extend(methods.iter().copied().filter(|m| m.variant().is_none()));
            out
        }
    }
}

/// Univariate benchmarks `f_sq`, `f_sqrt`, `f_sig` with SMM, MM and
/// isotonic regression.
pub fn table1_suite(config: &RunConfig, only: Option<Variant>) -> Suite {
    Suite {
        name: "table1".into(),
        tasks: [TaskKind::FSq, TaskKind::FSqrt, TaskKind::FSig]
            .into_iter()
            .map(|k| bench_task(k, config))
            .collect(),
        methods: with_variant(&[Method::Smm, Method::Mm, Method::Iso], only),
        trials: config.bench.trials,
        root_seed: config.seed,
        config: config.clone(),
    }
}

/// Random degree-two polynomials in 2, 4 and 6 dimensions with SMM.
pub fn table2_suite(config: &RunConfig, only: Option<Variant>) -> Suite {
    Suite {
        name: "table2".into(),
        tasks: [2, 4, 6]
            .into_iter()
            .map(|dim| bench_task(TaskKind::RandomPoly { dim }, config))
            .collect(),
        methods: with_variant(&[Method::Smm], only),
        trials: config.bench.trials,
        root_seed: config.seed,
        config: config.clone(),
    }
}

/// The bundled partial-monotone dataset, its mask and column names.
pub fn synthetic_partial_dataset() -> Result<(Dataset, MonotonicityMask, Vec<String>)> {
    Ok(partial_monotone_synthetic(SYNTHETIC_ROWS, SYNTHETIC_NOISE, SYNTHETIC_SEED)?)
}

/// Cross-validation task over `config.data.path`, or over the bundled
/// synthetic dataset when no path is set.
fn cross_val_task(config: &RunConfig) -> Result<SuiteTask> {
    let (id, data, mask) = match &config.data.path {
        Some(path) => {
            let csv = io::read_dataset_csv(path, config.data.mask.as_deref())?;
            let mask = csv.mask.unwrap_or_else(|| MonotonicityMask::all(csv.data.dim()));
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into());
            (id, csv.data, mask)
        }
        None => {
            let (data, mask, _) = synthetic_partial_dataset()?;
            ("partial_synthetic".to_string(), data, mask)
        }
    };
    let mut rng = RngStream::new(mix_seed(data_seed(config.seed, &id), FOLD_TAG), 0);
    let folds = kfold_with_validation(data.len(), config.data.folds, config.data.val_fraction, &mut rng)
        .map_err(|e| Error::config(format!("data.folds: {e}")))?;
    Ok(SuiteTask {
        id,
        source: TaskSource::CrossVal(Arc::new(CrossValTask {
            data,
            mask,
            folds,
            normalize: config.data.normalize,
        })),
    })
}

/// Cross-validation of SMM64 with validation early stopping on a CSV dataset
/// (the bundled synthetic one unless `data.path` is set). One fold per trial;
/// the trial count is capped at the number of folds.
pub fn uci_suite(config: &RunConfig, only: Option<Variant>) -> Result<Suite> {
    let task = cross_val_task(config)?;
    let TaskSource::CrossVal(cv) = &task.source else {
        unreachable!("cross_val_task builds a cross-validation task")
    };
    let trials = config.bench.trials.min(cv.folds.len());
    Ok(Suite {
        name: "uci".into(),
        tasks: vec![task],
        methods: with_variant(&[Method::Smm64], only),
        trials,
        root_seed: config.seed,
        config: config.clone(),
    })
}

pub fn suite_for(config: &RunConfig, only: Option<Variant>) -> Result<Suite> {
    match config.bench.suite {
        SuiteName::Table1 => Ok(table1_suite(config, only)),
        SuiteName::Table2 => Ok(table2_suite(config, only)),
        SuiteName::Uci => uci_suite(config, only),
    }
}

/// Run the univariate benchmark suite.
pub fn replicate_table1(config: &RunConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    complete(run_suite(&table1_suite(config, None), opts)?)
}

/// Run the multivariate benchmark suite.
pub fn replicate_table2(config: &RunConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    complete(run_suite(&table2_suite(config, None), opts)?)
}

fn complete(report: Option<ExperimentReport>) -> Result<ExperimentReport> {
    report.ok_or_else(|| Error::config("suite stopped before every trial finished"))
}

/// A single configured training run and the data it used.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub model: Model,
    pub trace: TrainTrace,
    pub train: Dataset,
    pub test: Dataset,
    pub normalizer: Option<UnitNormalizer>,
    /// Seed and stream of the initialization.
    pub init: (u64, u64),
    pub provenance: Provenance,
}

/// The task a single run uses, and its trial index: trial 0 of the
/// configured benchmark, or fold `data.fold` of the configured CSV file.
pub fn single_task(config: &RunConfig) -> Result<(SuiteTask, usize)> {
    match config.task()? {
        Some(kind) => Ok((bench_task(kind, config), 0)),
        None => Ok((cross_val_task(config)?, config.data.fold)),
    }
}

fn single_suite(config: &RunConfig, task: SuiteTask, variant: Variant) -> Suite {
    Suite {
        name: "single".into(),
        tasks: vec![task],
        methods: vec![variant.into()],
        trials: 1,
        root_seed: config.seed,
        config: config.clone(),
    }
}

/// Train `config.model.variant` on the configured data. The result equals
/// the corresponding trial of a suite with the same root seed.
pub fn train_configured(config: &RunConfig) -> Result<TrainedModel> {
    let (task, trial) = single_task(config)?;
    let variant: Variant = config.model.variant.into();
    let suite = single_suite(config, task, variant);
    let task = &suite.tasks[0];
    let data = suite.trial_data(task, trial)?;
    let arch = config.architecture(variant, data.mask.clone())?;
    let stop = config.stop_rule(data.stop_default)?;
    let init = (init_seed(config.seed, &task.id), trial as u64);
    let cfg = config.train_config(stop, init.0, init.1)?;
    let val = if stop.needs_validation() {
        Some(data.val.as_ref().ok_or_else(|| {
            Error::config("train.stop: the validation rule needs CSV data (set data.path)")
        })?)
    } else {
        None
    };
    let (model, trace) = fit(arch, &data.train, val, &cfg)?;
    Ok(TrainedModel {
        model,
        trace,
        train: data.train,
        test: data.test,
        normalizer: data.normalizer,
        init,
        provenance: data.provenance,
    })
}

/// Training and test data of a single run, as [`train_configured`] sees it.
pub fn configured_data(config: &RunConfig) -> Result<(Dataset, Dataset)> {
    let (task, trial) = single_task(config)?;
    let suite = single_suite(config, task, config.model.variant.into());
    let data = suite.trial_data(&suite.tasks[0], trial)?;
    Ok((data.train, data.test))
}
