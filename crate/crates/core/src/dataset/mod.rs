//! Multi-digit canvases composed from MNIST.
//!
//! A canvas is 28 pixels high and holds `k` digits side by side in fixed
//! 28-pixel slots. Every sample draws its randomness from its own
//! `(seed, index)` stream, so generation is order independent.

mod compose;
pub mod idx;
mod store;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Real, Tensor};

pub use compose::{compose_feature, compose_pretrain, compose_spatial, GroupedPool};
pub use idx::{load_split, parse_idx, IdxData, IdxImages, MnistSplit, Split};
pub use store::{read_samples, samples_digest, write_samples, Manifest, MANIFEST_FILE, TEST_FILE, TRAIN_FILE};

pub const DIGIT_SIDE: usize = 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigitImage {
    pixels: Vec<u8>,
    label: u8,
}

impl DigitImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>, label: u8) -> Result<Self> {
        if (rows, cols) != (DIGIT_SIDE, DIGIT_SIDE) || pixels.len() != DIGIT_SIDE * DIGIT_SIDE {
            return Err(Error::Format(format!(
                "digit images must be {DIGIT_SIDE}x{DIGIT_SIDE}, got {rows}x{cols} with {} pixels",
                pixels.len()
            )));
        }
        if label > 9 {
            return Err(Error::Format(format!("digit label {label} outside 0..=9")));
        }
        Ok(Self { pixels, label })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn label(&self) -> u8 {
        self.label
    }
}

/// Network input value of a pixel byte.
pub fn pixel_value(b: u8) -> f32 {
    f32::from(b) / 255.0
}

/// Group of a digit for the feature task: 0..=4 is group 0, 5..=9 group 1.
pub fn digit_group(label: u8) -> usize {
    usize::from(label >= 5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CanvasGeometry {
    slots: usize,
}

impl CanvasGeometry {
    pub fn new(slots: usize) -> Result<Self> {
        if !(1..=3).contains(&slots) {
            return Err(Error::invalid(format!("canvas slot count {slots} not in 1..=3")));
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn height(&self) -> usize {
        DIGIT_SIDE
    }

    pub fn width(&self) -> usize {
        DIGIT_SIDE * self.slots
    }

    pub fn pixels(&self) -> usize {
        self.height() * self.width()
    }

    /// Column range `[start, end)` of slot `i`.
    pub fn slot_columns(&self, i: usize) -> std::ops::Range<usize> {
        DIGIT_SIDE * i..DIGIT_SIDE * (i + 1)
    }

    /// Blank canvas with `digit` pasted into slot `slot`.
    pub(crate) fn paste(&self, canvas: &mut [u8], digit: &DigitImage, slot: usize) {
        let w = self.width();
        for r in 0..DIGIT_SIDE {
            let dst = r * w + slot * DIGIT_SIDE;
            canvas[dst..dst + DIGIT_SIDE].copy_from_slice(&digit.pixels[r * DIGIT_SIDE..(r + 1) * DIGIT_SIDE]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Task {
    /// Single digits on a `slots`-wide canvas, for pretraining.
    Pretrain {
        slots: usize,
    },
    Spatial2,
    Spatial3,
    Feature2,
}

impl Task {
    pub const EXPERIMENTS: [Task; 3] = [Task::Spatial2, Task::Spatial3, Task::Feature2];

    pub fn slots(&self) -> usize {
        match *self {
            Task::Pretrain { slots } => slots,
            Task::Spatial2 | Task::Feature2 => 2,
            Task::Spatial3 => 3,
        }
    }

    pub fn geometry(&self) -> CanvasGeometry {
        CanvasGeometry { slots: self.slots() }
    }

    /// Length of the top-down signal; zero for pretraining.
    pub fn signal_len(&self) -> usize {
        match self {
            Task::Pretrain { .. } => 0,
            Task::Spatial2 => 2,
            Task::Spatial3 => 3,
            Task::Feature2 => 2,
        }
    }

    pub fn pretrain_task(&self) -> Task {
        Task::Pretrain { slots: self.slots() }
    }

    /// Full-size train and test counts.
    pub fn paper_counts(&self) -> (usize, usize) {
        match self {
            Task::Pretrain { .. } => (60_000, 10_000),
            Task::Spatial2 | Task::Spatial3 => (80_000, 20_000),
            Task::Feature2 => (160_000, 40_000),
        }
    }

    /// Slot of `sample` holding the digit it asks for: the cued slot for
    /// spatial tasks, the cued group's slot for the feature task, the
    /// occupied slot for pretraining canvases.
    pub fn target_slot(&self, sample: &CompositeSample) -> Option<usize> {
        let slots = 0..sample.slot_labels.len();
        match self {
            Task::Pretrain { .. } => slots.clone().find(|&s| sample.slot_labels[s].is_some()),
            Task::Spatial2 | Task::Spatial3 => sample.signal_index(),
            Task::Feature2 => {
                let cue = sample.signal_index()?;
                slots
                    .clone()
                    .find(|&s| sample.slot_labels[s].map(digit_group) == Some(cue))
            }
        }
    }

    pub fn paper_epochs(&self) -> usize {
        match self {
            Task::Pretrain { .. } => 3,
            Task::Spatial2 | Task::Spatial3 => 5,
            Task::Feature2 => 10,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::Pretrain { slots } => write!(f, "pretrain{slots}"),
            Task::Spatial2 => f.write_str("spatial2"),
            Task::Spatial3 => f.write_str("spatial3"),
            Task::Feature2 => f.write_str("feature2"),
        }
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial2" => Ok(Task::Spatial2),
            "spatial3" => Ok(Task::Spatial3),
            "feature2" => Ok(Task::Feature2),
            _ => s
                .strip_prefix("pretrain")
                .and_then(|k| k.parse().ok())
                .filter(|k| (1..=3).contains(k))
                .map(|slots| Task::Pretrain { slots })
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "unknown task {s:?}; expected spatial2, spatial3, feature2 or pretrain1..3"
                    ))
                }),
        }
    }
}

impl TryFrom<String> for Task {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Task> for String {
    fn from(t: Task) -> String {
        t.to_string()
    }
}

/// One canvas with its cue and ground truth. Pixels are kept as bytes; the
/// network sees `byte / 255`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSample {
    pub geometry: CanvasGeometry,
    pub pixels: Vec<u8>,
    /// One-hot cue; empty for pretraining samples.
    pub signal: Vec<f32>,
    pub target: u8,
    /// Label of each slot; `None` for a blank slot.
    pub slot_labels: Vec<Option<u8>>,
    /// MNIST indices of the placed digits, one per occupied slot.
    pub sources: Vec<u32>,
}

impl CompositeSample {
    pub fn signal_index(&self) -> Option<usize> {
        self.signal.iter().position(|&v| v == 1.0)
    }

    /// `1 x H x W` tensor with values `byte / 255`.
    pub fn image<T: Real>(&self) -> Tensor<T> {
        let g = self.geometry;
        Tensor::from_fn(&[1, g.height(), g.width()], |i| {
            T::from_f64_lossy(f64::from(pixel_value(self.pixels[i])))
        })
    }
}

/// Recipe for one materialized dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub task: Task,
    pub train_count: usize,
    pub test_count: usize,
    pub seed: u64,
    pub scale: usize,
}

impl DatasetSpec {
    /// Sizes divided by `scale` (1 gives the full protocol).
    pub fn scaled(task: Task, seed: u64, scale: usize) -> Result<Self> {
        if scale == 0 {
            return Err(Error::invalid("scale must be at least 1"));
        }
        let (train, test) = task.paper_counts();
        let spec = Self {
            task,
            train_count: train / scale,
            test_count: test / scale,
            seed,
            scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_count == 0 || self.test_count == 0 {
            return Err(Error::invalid(format!(
                "dataset counts must be positive, got {}/{}",
                self.train_count, self.test_count
            )));
        }
        if self.scale == 0 {
            return Err(Error::invalid("scale must be at least 1"));
        }
        Ok(())
    }
}

/// A generated split of composites.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub task: Task,
    pub split: Split,
    pub samples: Vec<CompositeSample>,
}

/// A mini-batch ready for the networks.
#[derive(Debug, Clone)]
pub struct Batch<T: Real = f32> {
    pub images: Tensor<T>,
    /// `N x signal_len`; `None` for pretraining data.
    pub signals: Option<Tensor<T>>,
    pub targets: Vec<usize>,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn geometry(&self) -> CanvasGeometry {
        self.task.geometry()
    }

    pub fn batch<T: Real>(&self, indices: &[usize]) -> Result<Batch<T>> {
        if indices.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let g = self.geometry();
        let mut pixels = Vec::with_capacity(indices.len() * g.pixels());
        let sig_len = self.task.signal_len();
        let mut signals = Vec::with_capacity(indices.len() * sig_len);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self
                .samples
                .get(i)
                .ok_or_else(|| Error::invalid(format!("sample {i} of {}", self.samples.len())))?;
            pixels.extend(s.pixels.iter().map(|&b| T::from_f64_lossy(f64::from(pixel_value(b)))));
            signals.extend(s.signal.iter().map(|&v| T::from_f64_lossy(f64::from(v))));
            targets.push(usize::from(s.target));
        }
        let n = indices.len();
        Ok(Batch {
            images: Tensor::new(vec![n, 1, g.height(), g.width()], pixels)?,
            signals: if sig_len > 0 {
                Some(Tensor::new(vec![n, sig_len], signals)?)
            } else {
                None
            },
            targets,
        })
    }
}

/// Both splits of a generated dataset plus its manifest.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: DatasetSpec,
    pub train: SampleSet,
    pub test: SampleSet,
    pub manifest: Manifest,
}

/// Stream offset that separates test-sample randomness from train samples.
const TEST_STREAM_BASE: u64 = 1 << 40;

fn compose_split(spec: &DatasetSpec, pool: &MnistSplit, count: usize, stream_base: u64) -> Result<SampleSet> {
    let task = spec.task;
    let grouped = GroupedPool::new(&pool.digits)?;
    let samples = (0..count)
        .map(|i| {
            let mut rng = crate::tensor::SeededRng::for_stream(spec.seed, stream_base + i as u64);
            match task {
                Task::Pretrain { slots } => compose_pretrain(&pool.digits, CanvasGeometry::new(slots)?, i, &mut rng),
                Task::Spatial2 | Task::Spatial3 => compose_spatial(&pool.digits, task.geometry(), &mut rng),
                Task::Feature2 => compose_feature(&grouped, &pool.digits, &mut rng),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSet {
        task,
        split: pool.split,
        samples,
    })
}

/// Composes both splits: train samples only from MNIST train, test samples
/// only from MNIST test.
pub fn generate(spec: &DatasetSpec, train_pool: &MnistSplit, test_pool: &MnistSplit) -> Result<Dataset> {
    spec.validate()?;
    if train_pool.split != Split::Train || test_pool.split != Split::Test {
        return Err(Error::invalid(
            "train composites must come from the MNIST train split and test from test",
        ));
    }
    let train = compose_split(spec, train_pool, spec.train_count, 0)?;
    let test = compose_split(spec, test_pool, spec.test_count, TEST_STREAM_BASE)?;
    let manifest = Manifest::describe(spec, train_pool, test_pool, &train, &test);
    Ok(Dataset {
        spec: *spec,
        train,
        test,
        manifest,
    })
}

/// Loads MNIST from `mnist_dir` and generates the dataset for `spec`.
pub fn gen_dataset(spec: &DatasetSpec, mnist_dir: &Path) -> Result<Dataset> {
    let train = load_split(mnist_dir, Split::Train)?;
    let test = load_split(mnist_dir, Split::Test)?;
    generate(spec, &train, &test)
}

impl Dataset {
    /// Writes `train.bin`, `test.bin` and `manifest.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_samples(&dir.join(TRAIN_FILE), &self.train)?;
        write_samples(&dir.join(TEST_FILE), &self.test)?;
        self.manifest.write(&dir.join(MANIFEST_FILE))
    }

    /// Reads a saved dataset back and checks its digests against the
    /// manifest.
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = Manifest::read(&dir.join(MANIFEST_FILE))?;
        let task = manifest.task()?;
        let train = read_samples(&dir.join(TRAIN_FILE), task, Split::Train)?;
        let test = read_samples(&dir.join(TEST_FILE), task, Split::Test)?;
        manifest.verify(&train, &test)?;
        let spec = manifest.spec()?;
        Ok(Self {
            spec,
            train,
            test,
            manifest,
        })
    }
}
