//! The subcommands as library functions.
//!
//! Every artifact records a [`Provenance`]: the digest of the settings that
//! produced it, the content digest of the dataset it consumed, the digest of
//! the function network it depends on, and the MNIST source digests. A step
//! refuses upstream artifacts whose provenance no longer matches the current
//! settings and files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use dualnet::dataset::{generate, load_split, Dataset, Manifest, MnistSplit, Split, Task, MANIFEST_FILE};
use dualnet::digest::Hasher;
use dualnet::networks::{Checkpoint, ContextNetwork, FunctionNetwork, Module};
use dualnet::tensor::{SeededRng, Tensor};
use dualnet::training::{
    aggregate, baseline_eval, evaluate, initial_context, pretrain as run_pretrain, render_table, train_cascaded,
    ExperimentReport, PretrainResult, RunResult, TrainConfig,
};
use dualnet::visualization::{attention_contrast, montage_file_name, render_montage, separated_channels, slot_means};
use dualnet::Error;

use crate::config::{Profile, Settings};
use crate::error::{CliError, CliResult};

const PROVENANCE_KEY: &str = "provenance";
const FUNCTION_KIND: &str = "function";
const RESULT_FILE: &str = "result.json";
const CONTEXT_FILE: &str = "context.ckpt";
/// Test samples used for the gate separation statistic.
pub const SEPARATION_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub step: String,
    pub config_digest: String,
    pub data_digest: String,
    pub function_digest: Option<String>,
    pub mnist: BTreeMap<String, String>,
}

impl Provenance {
    fn meta(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert(
            PROVENANCE_KEY.to_string(),
            serde_json::to_string(self).expect("provenance serializes"),
        );
        m
    }

    fn from_checkpoint(ck: &Checkpoint, path: &Path) -> CliResult<Self> {
        let raw = ck
            .header
            .meta
            .get(PROVENANCE_KEY)
            .ok_or_else(|| CliError::Provenance(format!("{} carries no provenance", path.display())))?;
        serde_json::from_str(raw)
            .map_err(|e| CliError::Provenance(format!("{}: unreadable provenance: {e}", path.display())))
    }
}

/// Whether a step did work or found its outputs current.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Created,
    UpToDate,
}

fn config_digest(config: &TrainConfig, parents: &[&str]) -> String {
    let mut h = Hasher::new();
    h.field(&serde_json::to_string(config).expect("config serializes"));
    for p in parents {
        h.field(p);
    }
    h.finish()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e).into())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

/// Loads both MNIST splits, turning a missing file into an actionable error.
pub fn load_mnist(dir: &Path) -> CliResult<(MnistSplit, MnistSplit)> {
    let load = |split| {
        load_split(dir, split).map_err(|e| match e {
            Error::Io { .. } => CliError::Data(format!(
                "{e}\nPlace the four MNIST files (train-images-idx3-ubyte, train-labels-idx1-ubyte, \
                 t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte, optionally .gz) in {}, set mnist_dir in \
                 the config, or run `dualnet fetch --allow-network`.",
                dir.display()
            )),
            other => CliError::Data(format!("MNIST in {}: {other}", dir.display())),
        })
    };
    Ok((load(Split::Train)?, load(Split::Test)?))
}

fn mnist_digests(manifest: &Manifest) -> BTreeMap<String, String> {
    manifest
        .source_digests()
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

/// Every dataset the selected tasks need: each task and its pretraining set.
fn dataset_tasks(s: &Settings) -> Vec<Task> {
    let mut tasks: Vec<Task> = s
        .slot_counts()
        .into_iter()
        .map(|slots| Task::Pretrain { slots })
        .collect();
    tasks.extend(s.tasks.iter().copied());
    tasks
}

/// Materializes the datasets. A dataset whose manifest already records the
/// requested recipe and the current MNIST digests is left alone.
pub fn gen_data(s: &Settings) -> CliResult<Vec<(Task, Outcome)>> {
    let pools = load_mnist(&s.mnist_dir)?;
    let current_sources: BTreeMap<String, String> = [
        ("mnist_train_images", &pools.0.images_digest),
        ("mnist_train_labels", &pools.0.labels_digest),
        ("mnist_test_images", &pools.1.images_digest),
        ("mnist_test_labels", &pools.1.labels_digest),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.clone()))
    .collect();
    let mut out = Vec::new();
    for task in dataset_tasks(s) {
        let spec = s.dataset_spec(task)?;
        let dir = s.data_dir(task);
        let current = Manifest::read(&dir.join(MANIFEST_FILE))
            .ok()
            .filter(|m| m.spec().ok() == Some(spec) && mnist_digests(m) == current_sources);
        if current.is_some() {
            eprintln!("gen-data {task}: up to date ({})", dir.display());
            out.push((task, Outcome::UpToDate));
            continue;
        }
        let data = generate(&spec, &pools.0, &pools.1)?;
        data.save(&dir)?;
        eprintln!(
            "gen-data {task}: {} train / {} test samples -> {}",
            data.train.len(),
            data.test.len(),
            dir.display()
        );
        out.push((task, Outcome::Created));
    }
    Ok(out)
}

fn read_manifest(s: &Settings, task: Task) -> CliResult<Manifest> {
    let dir = s.data_dir(task);
    let manifest = Manifest::read(&dir.join(MANIFEST_FILE)).map_err(|_| {
        CliError::Data(format!(
            "no {task} dataset under {}; run `dualnet gen-data`",
            dir.display()
        ))
    })?;
    if manifest.spec().ok() != Some(s.dataset_spec(task)?) {
        return Err(CliError::Provenance(format!(
            "{task} dataset in {} was generated with different settings; rerun `dualnet gen-data`",
            dir.display()
        )));
    }
    Ok(manifest)
}

/// Loads a dataset after checking it matches the current settings.
pub fn load_data(s: &Settings, task: Task) -> CliResult<Dataset> {
    read_manifest(s, task)?;
    Ok(Dataset::load(&s.data_dir(task))?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainRecord {
    pub provenance: Provenance,
    pub result: PretrainResult,
    pub param_digest: String,
}

fn pretrain_provenance(s: &Settings, slots: usize, manifest: &Manifest) -> Provenance {
    let data_digest = manifest.content_digest().to_string();
    Provenance {
        step: format!("pretrain{slots}"),
        config_digest: config_digest(&s.pretrain_config(slots), &[&data_digest]),
        data_digest,
        function_digest: None,
        mnist: mnist_digests(manifest),
    }
}

fn pretrain_record_path(s: &Settings, slots: usize) -> PathBuf {
    s.models_dir().join(format!("function{slots}.json"))
}

/// The stored record of the `slots`-wide function network.
pub fn pretrain_record(s: &Settings, slots: usize) -> CliResult<PretrainRecord> {
    read_json(&pretrain_record_path(s, slots))
}

/// Pretrains one function network per canvas width the tasks need.
pub fn pretrain(s: &Settings) -> CliResult<Vec<(usize, Outcome, PretrainRecord)>> {
    create_dir(&s.models_dir())?;
    let mut out = Vec::new();
    for slots in s.slot_counts() {
        let task = Task::Pretrain { slots };
        let manifest = read_manifest(s, task)?;
        let prov = pretrain_provenance(s, slots, &manifest);
        let path = s.function_path(slots);
        let record_path = pretrain_record_path(s, slots);
        if let (Ok(ck), Ok(record)) = (Checkpoint::load(&path), read_json::<PretrainRecord>(&record_path)) {
            if Provenance::from_checkpoint(&ck, &path).ok().as_ref() == Some(&prov) && record.provenance == prov {
                eprintln!("pretrain {slots}-slot: up to date ({})", path.display());
                out.push((slots, Outcome::UpToDate, record));
                continue;
            }
        }
        let data = load_data(s, task)?;
        let config = s.pretrain_config(slots);
        let (net, result) = run_pretrain(&config, &data.train, &data.test, &mut |e| {
            eprintln!(
                "pretrain {slots}-slot epoch {}: loss {:.4} train acc {:.4}",
                e.epoch, e.loss, e.accuracy
            )
        })?;
        Checkpoint::capture(FUNCTION_KIND, slots, &net, prov.meta()).save(&path)?;
        let record = PretrainRecord {
            provenance: prov,
            result,
            param_digest: net.param_digest(),
        };
        write_json(&record_path, &record)?;
        eprintln!(
            "pretrain {slots}-slot: held-out accuracy {:.2}% -> {}",
            100.0 * record.result.accuracy,
            path.display()
        );
        out.push((slots, Outcome::Created, record));
    }
    Ok(out)
}

/// The frozen function network for `slots`, with its checkpoint digest.
/// Rejects a checkpoint made under other settings or data.
pub fn load_function(s: &Settings, slots: usize) -> CliResult<(FunctionNetwork, String)> {
    let path = s.function_path(slots);
    let ck = Checkpoint::load(&path).map_err(|e| match e {
        Error::Io { .. } => CliError::Provenance(format!(
            "no pretrained {slots}-slot function network at {}; run `dualnet pretrain`",
            path.display()
        )),
        other => other.into(),
    })?;
    let expected = pretrain_provenance(s, slots, &read_manifest(s, Task::Pretrain { slots })?);
    if Provenance::from_checkpoint(&ck, &path)? != expected {
        return Err(CliError::Provenance(format!(
            "{} was pretrained under different settings or data; rerun `dualnet pretrain`",
            path.display()
        )));
    }
    let mut net = FunctionNetwork::new(Task::Pretrain { slots }.geometry(), &mut SeededRng::new(0));
    ck.restore(FUNCTION_KIND, &mut net)?;
    Ok((net, ck.header.payload_sha256.clone()))
}

/// Everything recorded about one cascaded-training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub provenance: Provenance,
    pub result: RunResult,
    pub function_digest_before: String,
    pub function_digest_after: String,
    pub context_digest_initial: String,
    pub context_digest_final: String,
}

/// The stored record of one cascaded-training run.
pub fn run_record(s: &Settings, task: Task, run: usize) -> CliResult<RunRecord> {
    read_json(&s.run_dir(task, run).join(RESULT_FILE))
}

fn run_provenance(s: &Settings, task: Task, run: usize, manifest: &Manifest, fn_digest: &str) -> Provenance {
    let data_digest = manifest.content_digest().to_string();
    Provenance {
        step: format!("train {task} run {run}"),
        config_digest: config_digest(&s.train_config(task, run), &[&data_digest, fn_digest]),
        data_digest,
        function_digest: Some(fn_digest.to_string()),
        mnist: mnist_digests(manifest),
    }
}

/// Cascaded training of `runs` context networks per task.
pub fn train(s: &Settings) -> CliResult<Vec<(Task, usize, Outcome, RunRecord)>> {
    let mut out = Vec::new();
    for &task in &s.tasks {
        let (fn_net, fn_digest) = load_function(s, task.slots())?;
        let manifest = read_manifest(s, task)?;
        let mut data: Option<Dataset> = None;
        for run in 0..s.runs {
            let dir = s.run_dir(task, run);
            let prov = run_provenance(s, task, run, &manifest, &fn_digest);
            if let Ok(record) = read_json::<RunRecord>(&dir.join(RESULT_FILE)) {
                if record.provenance == prov && dir.join(CONTEXT_FILE).is_file() {
                    eprintln!("train {task} run {run}: up to date");
                    out.push((task, run, Outcome::UpToDate, record));
                    continue;
                }
            }
            if data.is_none() {
                data = Some(load_data(s, task)?);
            }
            let d = data.as_ref().expect("loaded above");
            let config = s.train_config(task, run);
            let before = fn_net.param_digest();
            let initial = initial_context(&config)?.param_digest();
            let (ctx, result) = train_cascaded(&fn_net, &config, run, &d.train, &d.test, &mut |e| {
                eprintln!(
                    "train {task} run {run} epoch {}: loss {:.4} train acc {:.4}",
                    e.epoch, e.loss, e.accuracy
                )
            })?;
            let record = RunRecord {
                provenance: prov.clone(),
                function_digest_before: before,
                function_digest_after: fn_net.param_digest(),
                context_digest_initial: initial,
                context_digest_final: ctx.param_digest(),
                result,
            };
            create_dir(&dir)?;
            Checkpoint::capture(ctx.kind(), task.slots(), &ctx, prov.meta()).save(&dir.join(CONTEXT_FILE))?;
            write_json(&dir.join(RESULT_FILE), &record)?;
            eprintln!(
                "train {task} run {run}: baseline {:.2}% dual {:.2}%",
                100.0 * record.result.baseline,
                100.0 * record.result.dual
            );
            out.push((task, run, Outcome::Created, record));
        }
    }
    Ok(out)
}

/// Loads the trained context network of one run, checking it descends from
/// the current function network and dataset.
pub fn load_context(s: &Settings, task: Task, run: usize, fn_digest: &str) -> CliResult<ContextNetwork> {
    let path = s.run_dir(task, run).join(CONTEXT_FILE);
    let ck = Checkpoint::load(&path).map_err(|e| match e {
        Error::Io { .. } => CliError::Provenance(format!(
            "no context network for {task} run {run} at {}; run `dualnet train`",
            path.display()
        )),
        other => other.into(),
    })?;
    let expected = run_provenance(s, task, run, &read_manifest(s, task)?, fn_digest);
    if Provenance::from_checkpoint(&ck, &path)? != expected {
        return Err(CliError::Provenance(format!(
            "{} is stale (trained under different settings, data or function network); rerun `dualnet train`",
            path.display()
        )));
    }
    let mut ctx = ContextNetwork::for_task(task, &mut SeededRng::new(0))?;
    ck.restore(ctx.kind(), &mut ctx)?;
    Ok(ctx)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub task: Task,
    pub run: usize,
    pub baseline: f64,
    pub dual: f64,
    pub recorded_dual: f64,
}

/// Re-evaluates stored checkpoints on the test split.
pub fn eval(s: &Settings) -> CliResult<Vec<EvalRecord>> {
    let mut out = Vec::new();
    for &task in &s.tasks {
        let (fn_net, fn_digest) = load_function(s, task.slots())?;
        let data = load_data(s, task)?;
        let baseline = baseline_eval(&fn_net, &data.test)?;
        for run in 0..s.runs {
            let ctx = load_context(s, task, run, &fn_digest)?;
            let record = run_record(s, task, run)?;
            let e = EvalRecord {
                task,
                run,
                baseline,
                dual: evaluate(&fn_net, &ctx, &data.test)?,
                recorded_dual: record.result.dual,
            };
            eprintln!(
                "eval {task} run {run}: baseline {:.2}% dual {:.2}% (recorded {:.2}%)",
                100.0 * e.baseline,
                100.0 * e.dual,
                100.0 * e.recorded_dual
            );
            write_json(&s.run_dir(task, run).join("eval.json"), &e)?;
            out.push(e);
        }
    }
    Ok(out)
}

/// Acceptance bands for a profile, as fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub pretrain_min: f64,
    /// `(baseline band, dual band, minimum dual - baseline)`.
    pub spatial2: ((f64, f64), (f64, f64), f64),
    pub spatial3: ((f64, f64), (f64, f64), f64),
    pub feature2: ((f64, f64), (f64, f64), f64),
}

impl Thresholds {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Smoke => Self {
                pretrain_min: 0.88,
                spatial2: ((0.25, 0.55), (0.85, 1.0), 0.35),
                spatial3: ((0.15, 0.40), (0.78, 1.0), 0.0),
                feature2: ((0.20, 0.50), (0.75, 1.0), 0.0),
            },
            Profile::Paper => Self {
                pretrain_min: 0.90,
                spatial2: ((0.0, 1.0), (0.90, 0.97), 0.0),
                spatial3: ((0.0, 1.0), (0.85, 0.93), 0.0),
                feature2: ((0.0, 1.0), (0.85, 0.94), 0.0),
            },
        }
    }

    fn bands(&self, task: Task) -> ((f64, f64), (f64, f64), f64) {
        match task {
            Task::Spatial2 => self.spatial2,
            Task::Spatial3 => self.spatial3,
            _ => self.feature2,
        }
    }

    /// Failure messages for a report; empty when every band holds.
    pub fn check(&self, report: &ExperimentReport) -> Vec<String> {
        let ((blo, bhi), (dlo, dhi), gap) = self.bands(report.task);
        let (b, d) = (report.baseline.mean, report.dual.mean);
        let mut fails = Vec::new();
        if !(blo..=bhi).contains(&b) {
            fails.push(format!(
                "{}: baseline {:.2}% outside [{:.0}%, {:.0}%]",
                report.task,
                100.0 * b,
                100.0 * blo,
                100.0 * bhi
            ));
        }
        if !(dlo..=dhi).contains(&d) {
            fails.push(format!(
                "{}: dual {:.2}% outside [{:.0}%, {:.0}%]",
                report.task,
                100.0 * d,
                100.0 * dlo,
                100.0 * dhi
            ));
        }
        if d - b < gap {
            fails.push(format!(
                "{}: gain {:.2} points below {:.0}",
                report.task,
                100.0 * (d - b),
                100.0 * gap
            ));
        }
        fails
    }
}

/// Aggregates the stored runs of every task, writes CSV, JSON and the
/// rendered table, and with `check` enforces the profile's thresholds.
pub fn report(s: &Settings, check: bool) -> CliResult<Vec<ExperimentReport>> {
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    create_dir(&s.reports_dir())?;
    for slots in s.slot_counts() {
        load_function(s, slots)?;
        let record = pretrain_record(s, slots)?;
        let min = Thresholds::for_profile(s.profile).pretrain_min;
        if record.result.accuracy < min {
            failures.push(format!(
                "pretrain{slots}: accuracy {:.2}% below {:.0}%",
                100.0 * record.result.accuracy,
                100.0 * min
            ));
        }
    }
    for &task in &s.tasks {
        let (_, fn_digest) = load_function(s, task.slots())?;
        let manifest = read_manifest(s, task)?;
        let mut results = Vec::new();
        for run in 0..s.runs {
            let path = s.run_dir(task, run).join(RESULT_FILE);
            let record: RunRecord = read_json(&path).map_err(|_| {
                CliError::Provenance(format!(
                    "{task} run {run} has no result at {}; run `dualnet train`",
                    path.display()
                ))
            })?;
            if record.provenance != run_provenance(s, task, run, &manifest, &fn_digest) {
                return Err(CliError::Provenance(format!(
                    "{task} run {run} was produced from other settings, data or function network than the \
                     rest of this report; rerun `dualnet train`"
                )));
            }
            results.push(record.result);
        }
        let rep = if results.len() == 1 {
            ExperimentReport::single_run(task, &results[0])
        } else {
            aggregate(task, &results)?
        };
        std::fs::write(s.reports_dir().join(format!("{task}.csv")), rep.csv())
            .map_err(|e| Error::io(s.reports_dir(), e))?;
        write_json(&s.reports_dir().join(format!("{task}.json")), &rep)?;
        failures.extend(Thresholds::for_profile(s.profile).check(&rep));
        reports.push(rep);
    }
    let table = render_table(&reports);
    let path = s.reports_dir().join("table.txt");
    std::fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    println!("{table}");
    if reports.iter().any(ExperimentReport::is_single_run) {
        println!("single-run report: standard errors omitted");
    }
    if check && !failures.is_empty() {
        return Err(CliError::Threshold(failures.join("\n")));
    }
    Ok(reports)
}

/// Gate statistics of one trained run over the first test samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Separation {
    pub task: Task,
    pub run: usize,
    pub samples: usize,
    /// Per channel `(attended-slot mean, other-slot mean)`.
    pub channels: Vec<(f64, f64)>,
    /// Channels with attended mean above the other mean.
    pub divided: usize,
    /// Channels with attended mean at least 0.1 above the other mean.
    pub divided_by_margin: usize,
}

/// Per-channel attended/other gate means over the first `limit` test
/// samples, each with its own cue.
pub fn separation(ctx: &ContextNetwork, data: &Dataset, run: usize, limit: usize) -> CliResult<Separation> {
    let task = data.spec.task;
    let n = limit.min(data.test.len());
    let indices: Vec<usize> = (0..n).collect();
    let batch = data.test.batch::<f32>(&indices)?;
    let signals = batch
        .signals
        .as_ref()
        .ok_or_else(|| CliError::Data(format!("{task} has no cues")))?;
    let gates = ctx.gates(&batch.images, signals)?;
    let attended: Vec<usize> = indices
        .iter()
        .map(|&i| {
            task.target_slot(&data.test.samples[i])
                .ok_or_else(|| CliError::Data(format!("{task} test sample {i} has no target slot")))
        })
        .collect::<CliResult<_>>()?;
    let channels = attention_contrast(&slot_means(&gates, task.slots())?, &attended)?;
    Ok(Separation {
        task,
        run,
        samples: n,
        divided: separated_channels(&channels, 0.0),
        divided_by_margin: separated_channels(&channels, 0.1),
        channels,
    })
}

fn one_hot(index: usize, len: usize) -> Tensor {
    let mut t = Tensor::zeros(&[1, len]);
    t.data_mut()[index] = 1.0;
    t
}

/// Writes montages of the configured samples under every cue, plus the
/// separation statistic, for run `run` of each task.
pub fn visualize(s: &Settings, run: usize) -> CliResult<Vec<(PathBuf, String)>> {
    create_dir(&s.vis_dir())?;
    let mut files = Vec::new();
    for &task in &s.tasks {
        let (_, fn_digest) = load_function(s, task.slots())?;
        let ctx = load_context(s, task, run, &fn_digest)?;
        let data = load_data(s, task)?;
        let g = task.geometry();
        for &i in &s.vis_samples {
            let sample = data.test.samples.get(i).ok_or_else(|| {
                CliError::Config(format!("vis sample {i} beyond the {} test samples", data.test.len()))
            })?;
            let image = sample.image::<f32>().reshape(&[1, 1, g.height(), g.width()])?;
            let plane = sample.image::<f32>().reshape(&[g.height(), g.width()])?;
            for cue in 0..task.signal_len() {
                let gate = ctx.gates(&image, &one_hot(cue, task.signal_len()))?;
                let path = s
                    .vis_dir()
                    .join(montage_file_name(&task.to_string(), run, i, &format!("cue{cue}")));
                let digest = render_montage(&gate, &plane, s.vis_zoom, &path)?;
                files.push((path, digest));
            }
        }
        let sep = separation(&ctx, &data, run, SEPARATION_SAMPLES)?;
        eprintln!(
            "visualize {task} run {run}: {}/16 channels favour the attended slot ({} by at least 0.1)",
            sep.divided, sep.divided_by_margin
        );
        write_json(&s.vis_dir().join(format!("{task}_{run}_separation.json")), &sep)?;
    }
    Ok(files)
}

pub const DEFAULT_MNIST_BASE: &str = "https://ossci-datasets.s3.amazonaws.com/mnist/";
pub const MNIST_FILES: [&str; 4] = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
];

/// Downloads MNIST with `curl`. Only runs when explicitly allowed.
pub fn fetch(s: &Settings, allow_network: bool, base_url: &str) -> CliResult<()> {
    if !allow_network {
        return Err(CliError::Config(format!(
            "fetch needs --allow-network; otherwise download {} from {base_url} into {}",
            MNIST_FILES.join(", "),
            s.mnist_dir.display()
        )));
    }
    create_dir(&s.mnist_dir)?;
    for name in MNIST_FILES {
        let dest = s.mnist_dir.join(name);
        let url = format!("{base_url}{name}");
        eprintln!("fetch {url}");
        let status = std::process::Command::new("curl")
            .args(["-fsSL", "-o"])
            .arg(&dest)
            .arg(&url)
            .status()
            .map_err(|e| CliError::Data(format!("could not run curl: {e}")))?;
        if !status.success() {
            return Err(CliError::Data(format!("download of {url} failed ({status})")));
        }
    }
    load_mnist(&s.mnist_dir).map(|_| ())
}
