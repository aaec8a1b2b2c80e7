//! Run configuration: a flat `key = value` text file whose keys are the
//! hyperparameter column names (`HKS`, `H`, `E`, `E.Q`, `I.Q`, `Pre-LN`,
//! `Eps`, `Hidden`, `LR`, `Epochs`, `Batch`) plus lower-case plumbing keys.
//! `#` starts a comment; `-` means "not used" for `HKS` and `Eps`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::blocks::LnVariant;
use crate::clustering::{DbscanConfig, DEFAULT_MIN_MASS};
use crate::data::SyntheticSpec;
use crate::error::{MstError, Result};
use crate::harness::train::LrSchedule;
use crate::model::{BlockKind, MstConfig};
use crate::topology::PersistenceMode;

/// Environment variable overriding `cache_dir`.
pub const CACHE_ENV: &str = "MST_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Synthetic,
    Graph(PersistenceMode),
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunMode::Synthetic => f.write_str("synthetic"),
            RunMode::Graph(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for RunMode {
    type Err = MstError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(RunMode::Synthetic),
            other => Ok(RunMode::Graph(other.parse()?)),
        }
    }
}

/// Parameters of the synthetic generator (used when `mode = synthetic`).
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticParams {
    pub classes: usize,
    pub samples: usize,
    /// `None` picks the reference ratio for the class count.
    pub ratio: Option<f64>,
    pub points_min: usize,
    pub points_max: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            classes: 2,
            samples: 1000,
            ratio: None,
            points_min: 10,
            points_max: 20,
        }
    }
}

impl SyntheticParams {
    pub fn spec(&self, seed: u64) -> Result<SyntheticSpec> {
        let ratio = match self.ratio {
            Some(r) => r,
            None => SyntheticSpec::reference(self.classes, self.samples, seed)?.ratio,
        };
        let spec = SyntheticSpec {
            classes: self.classes,
            n_min: self.points_min,
            n_max: self.points_max,
            ratio,
            samples: self.samples,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub dataset: String,
    /// Directory holding the TU files; defaults to `datasets/<dataset>`.
    pub data_dir: Option<PathBuf>,
    pub mode: RunMode,
    pub hks_times: Vec<f64>,
    pub model: MstConfig,
    /// DBSCAN radius from the `Eps` column; `None` when the column is `-`.
    pub eps: Option<f64>,
    pub min_mass: u64,
    /// Whether training reads the clustered cache.
    pub cluster: bool,
    /// Append eigenvalue and HKS-decile features to the classifier input.
    pub spectral: bool,
    /// Standardize diagram coordinates per stream before training.
    pub standardize: bool,
    pub lr: f64,
    pub schedule: LrSchedule,
    pub epochs: usize,
    pub batch: usize,
    pub runs: usize,
    pub folds: usize,
    pub seed: u64,
    pub synthetic: SyntheticParams,
    pub cache_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: "SYNTHETIC".into(),
            data_dir: None,
            mode: RunMode::Synthetic,
            hks_times: Vec::new(),
            model: MstConfig::default(),
            eps: None,
            min_mass: DEFAULT_MIN_MASS,
            cluster: false,
            spectral: false,
            standardize: true,
            lr: 0.01,
            schedule: LrSchedule::Constant,
            epochs: 100,
            batch: 128,
            runs: 5,
            folds: 10,
            seed: 42,
            synthetic: SyntheticParams::default(),
            cache_dir: PathBuf::from("cache"),
        }
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_hks(s: &str) -> Option<Vec<f64>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.strip_prefix("hks_").unwrap_or(t).parse::<f64>().ok().filter(|v| *v > 0.0 && v.is_finite())
        })
        .collect()
}

fn fmt_list(v: &[f64]) -> String {
    if v.is_empty() {
        return "-".into();
    }
    v.iter().map(|t| format!("hks_{t}")).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| MstError::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg,
            };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            cfg.set(key, value).map_err(|m| err(format!("{key}: {m}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MstError::io(path, e))?;
        Self::parse(&text, path)
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        let boolean = |v: &str| parse_bool(v).ok_or_else(|| format!("expected True or False, found {v:?}"));
        let m = &mut self.model;
        match key {
            "HKS" => self.hks_times = parse_hks(value).ok_or_else(|| format!("bad time list {value:?}"))?,
            "H" => m.heads = num(value)?,
            "E" => m.equivariant_layers = num(value)?,
            "E.Q" => m.induced_queries = num(value)?,
            "I.Q" => m.pool_queries = num(value)?,
            "Pre-LN" => m.variant = if boolean(value)? { LnVariant::PreLn } else { LnVariant::PostLn },
            "Eps" => self.eps = if value == "-" { None } else { Some(num(value)?) },
            "Hidden" => m.hidden = num(value)?,
            "LR" => self.lr = num(value)?,
            "Epochs" => self.epochs = num(value)?,
            "Batch" => self.batch = num(value)?,
            "schedule" => {
                self.schedule = match value {
                    "constant" => LrSchedule::Constant,
                    "cosine" => LrSchedule::Cosine,
                    _ => return Err(format!("expected constant or cosine, found {value:?}")),
                }
            }
            "dataset" => self.dataset = value.to_string(),
            "data_dir" => self.data_dir = Some(PathBuf::from(value)),
            "mode" => self.mode = value.parse().map_err(|e: MstError| e.to_string())?,
            "block" => {
                m.block_kind = match value {
                    "imab" => BlockKind::Imab,
                    "sab" => BlockKind::Sab,
                    _ => return Err(format!("expected imab or sab, found {value:?}")),
                }
            }
            "mult" => m.bias_enabled = boolean(value)?,
            "bias_in_equivariant" => m.bias_in_equivariant = boolean(value)?,
            "bias_eps" => m.bias_eps = num(value)?,
            "cluster" => self.cluster = boolean(value)?,
            "min_mass" => self.min_mass = num(value)?,
            "spectral" => self.spectral = boolean(value)?,
            "standardize" => self.standardize = boolean(value)?,
            "runs" => self.runs = num(value)?,
            "folds" => self.folds = num(value)?,
            "seed" => self.seed = num(value)?,
            "classes" => self.synthetic.classes = num(value)?,
            "samples" => self.synthetic.samples = num(value)?,
            "ratio" => self.synthetic.ratio = Some(num(value)?),
            "points_min" => self.synthetic.points_min = num(value)?,
            "points_max" => self.synthetic.points_max = num(value)?,
            "cache_dir" => self.cache_dir = PathBuf::from(value),
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MstError::Config(m));
        self.model.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("LR must be positive, got {}", self.lr));
        }
        if self.epochs == 0 || self.batch == 0 || self.runs == 0 {
            return bad("Epochs, Batch and runs must be positive".into());
        }
        if self.folds < 2 {
            return bad(format!("need at least 2 folds, got {}", self.folds));
        }
        match self.mode {
            RunMode::Synthetic => {
                self.synthetic.spec(self.seed)?;
            }
            RunMode::Graph(_) if self.hks_times.is_empty() => {
                return bad("graph modes need at least one HKS time".into());
            }
            RunMode::Graph(_) => {}
        }
        if self.cluster {
            self.dbscan()?;
        }
        Ok(())
    }

    /// The DBSCAN settings, or a config error when `Eps` is unset.
    pub fn dbscan(&self) -> Result<DbscanConfig> {
        let eps = self
            .eps
            .ok_or_else(|| MstError::Config("clustering requested but Eps is `-`".into()))?;
        DbscanConfig::new(eps, self.min_mass)
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(|| Path::new("datasets").join(&self.dataset))
    }

    /// `cache_dir`, unless overridden by the environment.
    pub fn effective_cache_dir(&self) -> PathBuf {
        std::env::var_os(CACHE_ENV).map(PathBuf::from).unwrap_or_else(|| self.cache_dir.clone())
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_conf_string(&self) -> String {
        let m = &self.model;
        let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
        let lines = [
            ("dataset", self.dataset.clone()),
            ("data_dir", self.dataset_dir().display().to_string()),
            ("mode", self.mode.to_string()),
            ("HKS", fmt_list(&self.hks_times)),
            ("H", m.heads.to_string()),
            ("E", m.equivariant_layers.to_string()),
            ("E.Q", m.induced_queries.to_string()),
            ("I.Q", m.pool_queries.to_string()),
            ("Pre-LN", (if m.variant == LnVariant::PreLn { "True" } else { "False" }).into()),
            ("Eps", opt(self.eps.map(|e| e.to_string()))),
            ("Hidden", m.hidden.to_string()),
            ("LR", self.lr.to_string()),
            ("Epochs", self.epochs.to_string()),
            ("Batch", self.batch.to_string()),
            ("schedule", (if self.schedule == LrSchedule::Cosine { "cosine" } else { "constant" }).into()),
            ("block", (if m.block_kind == BlockKind::Sab { "sab" } else { "imab" }).into()),
            ("mult", m.bias_enabled.to_string()),
            ("bias_in_equivariant", m.bias_in_equivariant.to_string()),
            ("bias_eps", m.bias_eps.to_string()),
            ("cluster", self.cluster.to_string()),
            ("min_mass", self.min_mass.to_string()),
            ("spectral", self.spectral.to_string()),
            ("standardize", self.standardize.to_string()),
            ("runs", self.runs.to_string()),
            ("folds", self.folds.to_string()),
            ("seed", self.seed.to_string()),
            ("classes", self.synthetic.classes.to_string()),
            ("samples", self.synthetic.samples.to_string()),
            ("points_min", self.synthetic.points_min.to_string()),
            ("points_max", self.synthetic.points_max.to_string()),
            ("cache_dir", self.cache_dir.display().to_string()),
        ];
        let mut out: String = lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        if let Some(r) = self.synthetic.ratio {
            out.push_str(&format!("ratio = {r}\n"));
        }
        out
    }
}
