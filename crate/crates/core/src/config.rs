//! Declarative experiment files (TOML).
//!
//! ```toml
//! [dataset]
//! kind = "moons"          # or "csv"
//! n = 1000
//! noise = 0.1
//! test_fraction = 0.2
//!
//! [model]
//! dims = [2, 2, 1]
//! bits = [6, 5, 8]
//! grid_size = 6
//! order = 3
//! domain = [-8.0, 8.0]
//!
//! [train]
//! epochs = 200
//!
//! [prune]
//! threshold = 0.0
//!
//! [hardware]
//! n_add = 4
//!
//! [output]
//! dir = "out/moons"
//! ```
//!
//! Relative dataset paths are resolved against the directory holding the
//! config file; the output directory is relative to the working directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{gen_moons, load_csv, split, CsvOptions, Dataset, LabelColumn};
use crate::error::{KanError, Result};
use crate::kan::{BaseActivation, KanNetwork, KanSpec};
use crate::prune::PruneConfig;
use crate::quant::DEFAULT_GUARD_BITS;
use crate::rtl::RtlOptions;
use crate::train::{train, History, LossKind, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Moons,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub kind: DatasetKind,
    /// Moons: sample count.
    #[serde(default = "default_moons_n")]
    pub n: usize,
    /// Moons: Gaussian noise std.
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// CSV: file path.
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// CSV: label column given as a header name or a zero-based index;
    /// defaults to the last column.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_true")]
    pub header: bool,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "default_true")]
    pub stratified: bool,
    /// Seed for generation and splitting.
    #[serde(default)]
    pub seed: u64,
}

fn default_moons_n() -> usize {
    1000
}
fn default_noise() -> f64 {
    0.1
}
fn default_delimiter() -> char {
    ','
}
fn default_true() -> bool {
    true
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_guard() -> u32 {
    DEFAULT_GUARD_BITS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub dims: Vec<usize>,
    pub bits: Vec<u32>,
    pub grid_size: usize,
    pub order: usize,
    pub domain: (f64, f64),
    #[serde(default = "default_guard")]
    pub guard_bits: u32,
    #[serde(default)]
    pub base: BaseActivation,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: u32,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            weight_decay: d.weight_decay,
            betas: d.betas,
            eps: d.eps,
            seed: d.seed,
            loss: d.loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HardwareSection {
    pub n_add: usize,
    pub entity_prefix: String,
    pub clock_ns: f64,
    /// Random vectors written into the emitted testbench.
    pub test_vectors: usize,
}

impl Default for HardwareSection {
    fn default() -> Self {
        let o = RtlOptions::default();
        HardwareSection {
            n_add: o.n_add,
            entity_prefix: o.entity_prefix,
            clock_ns: o.target_clock_ns,
            test_vectors: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub prune: PruneConfig,
    #[serde(default)]
    pub hardware: HardwareSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    /// Parses and validates; relative dataset paths resolve against `base_dir`.
    pub fn from_toml(text: &str, source: &str, base_dir: &Path) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let msg = e.inner().message().trim().to_string();
            if path == "." {
                KanError::Config(format!("{source}: {msg}"))
            } else {
                KanError::Config(format!("{source}: {path}: {msg}"))
            }
        })?;
        if let Some(p) = &cfg.dataset.path {
            if p.is_relative() {
                cfg.dataset.path = Some(base_dir.join(p));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KanError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, &path.display().to_string(), base)
    }

    pub fn validate(&self) -> Result<()> {
        self.kan_spec().validate()?;
        self.train_config().validate()?;
        let d = &self.dataset;
        if !(d.test_fraction > 0.0 && d.test_fraction < 1.0) {
            return Err(KanError::Config(format!(
                "dataset.test_fraction {} must lie in (0, 1)",
                d.test_fraction
            )));
        }
        match d.kind {
            DatasetKind::Moons if d.n < 2 => {
                return Err(KanError::Config("dataset.n must be at least 2".into()))
            }
            DatasetKind::Csv if d.path.is_none() => {
                return Err(KanError::Config("dataset.path is required for csv datasets".into()))
            }
            _ => {}
        }
        self.rtl_options().validate()
    }

    pub fn kan_spec(&self) -> KanSpec {
        let m = &self.model;
        KanSpec {
            guard_bits: m.guard_bits,
            base: m.base,
            ..KanSpec::new(m.dims.clone(), m.bits.clone(), m.grid_size, m.order, m.domain)
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            weight_decay: t.weight_decay,
            betas: t.betas,
            eps: t.eps,
            seed: t.seed,
            prune: self.prune,
            loss: t.loss,
        }
    }

    pub fn rtl_options(&self) -> RtlOptions {
        RtlOptions {
            n_add: self.hardware.n_add,
            entity_prefix: self.hardware.entity_prefix.clone(),
            target_clock_ns: self.hardware.clock_ns,
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let d = &self.dataset;
        match d.kind {
            DatasetKind::Moons => gen_moons(d.n, d.noise, d.seed),
            DatasetKind::Csv => {
                let label = match &d.label {
                    None => LabelColumn::Last,
                    Some(s) => match s.parse::<usize>() {
                        Ok(i) => LabelColumn::Index(i),
                        Err(_) => LabelColumn::Name(s.clone()),
                    },
                };
                let opts = CsvOptions {
                    label,
                    delimiter: u8::try_from(d.delimiter)
                        .map_err(|_| KanError::Config("dataset.delimiter must be ASCII".into()))?,
                    has_header: d.header,
                };
                load_csv(d.path.as_deref().expect("validated"), &opts)
            }
        }
    }

    /// Deterministic (train, test) split.
    pub fn load_split(&self) -> Result<(Dataset, Dataset)> {
        let ds = self.load_dataset()?;
        if ds.width() != self.model.dims[0] {
            return Err(KanError::DimensionMismatch(format!(
                "dataset has {} features but model.dims[0] is {}",
                ds.width(),
                self.model.dims[0]
            )));
        }
        split(&ds, 1.0 - self.dataset.test_fraction, self.dataset.seed, self.dataset.stratified)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub struct TrainOutcome {
    pub net: KanNetwork,
    pub history: History,
    pub train_set: Dataset,
    pub test_set: Dataset,
}

impl TrainOutcome {
    pub fn test_accuracy(&self) -> Option<f64> {
        self.history.last().map(|r| r.val_acc)
    }
}

/// Loads data, initializes the network, folds training-set statistics into
/// the input quantizer and trains.
pub fn run_training(cfg: &RunConfig) -> Result<TrainOutcome> {
    let (train_set, test_set) = cfg.load_split()?;
    let mut net = KanNetwork::init(&cfg.kan_spec(), cfg.model.seed)?;
    let stats = train_set.feature_stats();
    net.set_normalization(
        stats.iter().map(|s| s.mean).collect(),
        stats.iter().map(|s| s.std).collect(),
    )?;
    let history = train(&mut net, &train_set, Some(&test_set), &cfg.train_config())?;
    Ok(TrainOutcome {
        net,
        history,
        train_set,
        test_set,
    })
}
