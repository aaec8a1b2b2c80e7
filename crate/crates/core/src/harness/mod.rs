//! Command implementations behind the `mst` binary: diagram extraction,
//! cross-validated training, checkpoint evaluation and benchmarking.

pub mod bench;
pub mod cache;
pub mod config;
pub mod eval;
pub mod report;
pub mod train;

use std::path::{Path, PathBuf};

pub use bench::{run_bench, BenchConfig, BenchReport};
pub use cache::{extract, load_cache, CacheStatus, DiagramCache, ExtractReport, ExtractSpec};
pub use config::{RunConfig, RunMode};
pub use eval::{evaluate, EvalReport, Split};
pub use train::{cross_validate, Dataset, TrainReport};

use crate::data::{gen_synthetic, write_synthetic};
use crate::error::{MstError, Result};
use crate::model::save_checkpoint;
use crate::topology::PersistenceMode;

/// Checkpoint file written by `cmd_train` next to its report.
pub const CHECKPOINT_FILE: &str = "model.ckpt";

fn extract_spec(cfg: &RunConfig, mode: PersistenceMode) -> Result<ExtractSpec> {
    Ok(ExtractSpec {
        data_dir: cfg.dataset_dir(),
        dataset: cfg.dataset.clone(),
        mode,
        hks_times: cfg.hks_times.clone(),
        dbscan: cfg.eps.map(|_| cfg.dbscan()).transpose()?,
        cache_root: cfg.effective_cache_dir(),
    })
}

/// Outcome of `cmd_extract`.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtractOutcome {
    Diagrams(ExtractReport),
    Synthetic { dir: PathBuf, samples: usize, data_ratio: f64 },
}

impl ExtractOutcome {
    pub fn render(&self) -> String {
        let line = |s: &CacheStatus| {
            format!(
                "{}  files={} ratio={:.4}{}\n",
                s.dir.display(),
                s.files,
                s.data_ratio,
                if s.fresh { " (fresh, reused)" } else { "" }
            )
        };
        match self {
            ExtractOutcome::Diagrams(r) => {
                let mut out = format!("raw        {}", line(&r.raw));
                if let Some(c) = &r.clustered {
                    out.push_str(&format!("clustered  {}", line(c)));
                }
                out
            }
            ExtractOutcome::Synthetic { dir, samples, data_ratio } => {
                format!("synthetic  {}  samples={samples} ratio={data_ratio:.4}\n", dir.display())
            }
        }
    }
}

pub fn cmd_extract(cfg: &RunConfig) -> Result<ExtractOutcome> {
    match cfg.mode {
        RunMode::Graph(mode) => Ok(ExtractOutcome::Diagrams(extract(&extract_spec(cfg, mode)?)?)),
        RunMode::Synthetic => {
            let dir = cfg
                .effective_cache_dir()
                .join(&cfg.dataset)
                .join(format!("c{}_n{}_seed{}", cfg.synthetic.classes, cfg.synthetic.samples, cfg.seed));
            let samples = gen_synthetic(&cfg.synthetic.spec(cfg.seed)?)?;
            write_synthetic(&dir, &samples)?;
            let ds = Dataset::from_synthetic(&cfg.dataset, samples, cfg.synthetic.classes);
            Ok(ExtractOutcome::Synthetic {
                dir,
                samples: ds.len(),
                data_ratio: ds.data_ratio(),
            })
        }
    }
}

fn synthetic_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let samples = gen_synthetic(&cfg.synthetic.spec(cfg.seed)?)?;
    Ok(Dataset::from_synthetic(&cfg.dataset, samples, cfg.synthetic.classes))
}

/// The training data for `cfg`: generated, or read from the (raw or
/// clustered) diagram cache, extracting first when needed.
pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let mut ds = raw_dataset(cfg)?;
    if cfg.standardize {
        ds.standardize()?;
    }
    Ok(ds)
}

fn raw_dataset(cfg: &RunConfig) -> Result<Dataset> {
    match cfg.mode {
        RunMode::Synthetic => synthetic_dataset(cfg),
        RunMode::Graph(mode) => {
            let report = extract(&extract_spec(cfg, mode)?)?;
            let dir = if cfg.cluster {
                report
                    .clustered
                    .ok_or_else(|| MstError::Config("clustering requested but Eps is `-`".into()))?
                    .dir
            } else {
                report.raw.dir
            };
            Ok(Dataset::from_cache(&cfg.dataset, load_cache(&dir)?, cfg.spectral))
        }
    }
}

/// Runs the full protocol; with `out`, writes the report files and the
/// run-0/fold-0 checkpoint there.
pub fn cmd_train(cfg: &RunConfig, out: Option<&Path>) -> Result<TrainReport> {
    let ds = load_dataset(cfg)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
    }
    let report = cross_validate(cfg, &ds, |trained| match out {
        Some(dir) => save_checkpoint(&trained.store, &dir.join(CHECKPOINT_FILE)),
        None => Ok(()),
    })?;
    report.check_consistency()?;
    if let Some(dir) = out {
        report::write_train_report(dir, &report)?;
    }
    Ok(report)
}

pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, split: Split) -> Result<EvalReport> {
    let ds = load_dataset(cfg)?;
    evaluate(cfg, &ds, checkpoint, split)
}

pub fn cmd_bench(cfg: &BenchConfig, out: Option<&Path>) -> Result<BenchReport> {
    let report = run_bench(cfg)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
        report::write_text(&dir.join("bench.csv"), &bench::render_bench_csv(&report))?;
        report::write_text(&dir.join("bench.txt"), &bench::render_bench_table(&report))?;
    }
    Ok(report)
}
