//! Experiment settings: built-in profile, then the TOML file, then flags.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use dualnet::dataset::{DatasetSpec, Task};
use dualnet::tensor::AdamConfig;
use dualnet::training::TrainConfig;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Full dataset sizes, 5 runs.
    Paper,
    /// Datasets divided by 8, 2 runs.
    Smoke,
}

impl Profile {
    pub fn scale(self) -> usize {
        match self {
            Profile::Paper => 1,
            Profile::Smoke => 8,
        }
    }

    pub fn runs(self) -> usize {
        match self {
            Profile::Paper => 5,
            Profile::Smoke => 2,
        }
    }
}

/// Contents of a config file. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub profile: Option<Profile>,
    pub mnist_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tasks: Option<Vec<Task>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub scale: Option<usize>,
    pub batch_size: Option<usize>,
    /// Overrides the per-task epoch count of cascaded training.
    pub epochs: Option<usize>,
    pub pretrain_epochs: Option<usize>,
    pub adam: Option<AdamConfig>,
    pub vis_samples: Option<Vec<usize>>,
    pub vis_zoom: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {e}")))
    }

    /// Reads `path`; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.mnist_dir, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub mnist_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub tasks: Option<Vec<Task>>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub scale: Option<usize>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub profile: Profile,
    pub mnist_dir: PathBuf,
    pub out: PathBuf,
    pub tasks: Vec<Task>,
    pub runs: usize,
    pub seed: u64,
    pub scale: usize,
    pub batch_size: usize,
    pub epochs: Option<usize>,
    pub pretrain_epochs: usize,
    pub adam: AdamConfig,
    pub vis_samples: Vec<usize>,
    pub vis_zoom: usize,
}

pub const DEFAULT_SEED: u64 = 1;

impl Settings {
    pub fn resolve(file: FileConfig, flags: Overrides) -> CliResult<Self> {
        let profile = flags.profile.or(file.profile).unwrap_or(Profile::Paper);
        let tasks = flags.tasks.or(file.tasks).unwrap_or_else(|| Task::EXPERIMENTS.to_vec());
        let s = Self {
            profile,
            mnist_dir: flags
                .mnist_dir
                .or(file.mnist_dir)
                .unwrap_or_else(|| PathBuf::from("data/mnist")),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("out")),
            tasks,
            runs: flags.runs.or(file.runs).unwrap_or(profile.runs()),
            seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
            scale: flags.scale.or(file.scale).unwrap_or(profile.scale()),
            batch_size: file.batch_size.unwrap_or(64),
            epochs: file.epochs,
            pretrain_epochs: file
                .pretrain_epochs
                .unwrap_or(Task::Pretrain { slots: 2 }.paper_epochs()),
            adam: file.adam.unwrap_or_default(),
            vis_samples: file.vis_samples.unwrap_or_else(|| vec![0, 1, 2]),
            vis_zoom: file.vis_zoom.unwrap_or(3),
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.tasks.is_empty() {
            return bad("no tasks selected".into());
        }
        if let Some(t) = self.tasks.iter().find(|t| matches!(t, Task::Pretrain { .. })) {
            return bad(format!("{t} is not an experiment; pick spatial2, spatial3 or feature2"));
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.scale == 0 {
            return bad("scale must be at least 1".into());
        }
        if self.batch_size == 0 || self.vis_zoom == 0 {
            return bad("batch_size and vis_zoom must be positive".into());
        }
        for task in &self.tasks {
            self.dataset_spec(*task)?;
            self.dataset_spec(task.pretrain_task())?;
            self.train_config(*task, 0).validate()?;
        }
        Ok(())
    }

    pub fn dataset_spec(&self, task: Task) -> CliResult<DatasetSpec> {
        DatasetSpec::scaled(task, self.seed, self.scale).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Run `run` trains with seed `seed + run`.
    pub fn train_config(&self, task: Task, run: usize) -> TrainConfig {
        TrainConfig {
            task,
            epochs: self.epochs.unwrap_or(task.paper_epochs()),
            batch_size: self.batch_size,
            adam: self.adam,
            seed: self.seed + run as u64,
        }
    }

    pub fn pretrain_config(&self, slots: usize) -> TrainConfig {
        TrainConfig {
            task: Task::Pretrain { slots },
            epochs: self.pretrain_epochs,
            batch_size: self.batch_size,
            adam: self.adam,
            seed: self.seed,
        }
    }

    /// Distinct canvas widths needed by the selected tasks.
    pub fn slot_counts(&self) -> Vec<usize> {
        let mut k: Vec<usize> = self.tasks.iter().map(Task::slots).collect();
        k.sort_unstable();
        k.dedup();
        k
    }

    pub fn data_dir(&self, task: Task) -> PathBuf {
        self.out.join("data").join(task.to_string())
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    pub fn function_path(&self, slots: usize) -> PathBuf {
        self.models_dir().join(format!("function{slots}.ckpt"))
    }

    pub fn run_dir(&self, task: Task, run: usize) -> PathBuf {
        self.out.join("runs").join(task.to_string()).join(format!("run{run}"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.out.join("reports")
    }

    pub fn vis_dir(&self) -> PathBuf {
        self.out.join("vis")
    }
}
