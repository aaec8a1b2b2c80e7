//! Checkpoint evaluation with a permutation-invariance audit: every
//! evaluated sample is re-scored with the rows of each input stream shuffled
//! and the logits must agree within [`AUDIT_TOLERANCE`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{MstError, Result};
use crate::harness::config::RunConfig;
use crate::harness::train::{build_classifier, fold_plan, rng_for, Dataset, RngPurpose};
use crate::model::{argmax, load_checkpoint};
use crate::multiset::Multiset;

pub const AUDIT_TOLERANCE: f64 = 1e-9;

/// Which samples to score, relative to run 0 / fold 0 of the fold plan
/// (the fold whose parameters training saves).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
    All,
}

impl FromStr for Split {
    type Err = MstError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "all" => Ok(Split::All),
            _ => Err(MstError::Config(format!("unknown split {s:?} (train|test|all)"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub split: Split,
    pub size: usize,
    pub correct: usize,
    pub audit_passed: usize,
    pub max_logit_drift: f64,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.size as f64
    }

    pub fn audit_pass_rate(&self) -> f64 {
        self.audit_passed as f64 / self.size as f64
    }

    pub fn render(&self) -> String {
        format!(
            "split            {}\nsamples          {}\naccuracy         {:.4}\naudit pass rate  {:.4}\nmax logit drift  {:e}\n",
            self.split,
            self.size,
            self.accuracy(),
            self.audit_pass_rate(),
            self.max_logit_drift
        )
    }
}

pub fn split_indices(cfg: &RunConfig, n: usize, split: Split) -> Result<Vec<usize>> {
    let plan = fold_plan(n, cfg.folds, cfg.seed, 0)?;
    Ok(match split {
        Split::Train => plan.train(0),
        Split::Test => plan.test(0).to_vec(),
        Split::All => (0..n).collect(),
    })
}

/// Loads `checkpoint` into a classifier shaped for `cfg` and `ds` and scores
/// the chosen split.
pub fn evaluate(cfg: &RunConfig, ds: &Dataset, checkpoint: &Path, split: Split) -> Result<EvalReport> {
    let (mut store, clf) = build_classifier(&cfg.model, ds, cfg.seed, 0, 0)?;
    load_checkpoint(&mut store, checkpoint)?;
    let idx = split_indices(cfg, ds.len(), split)?;
    let mut rng = rng_for(cfg.seed, RngPurpose::Audit, 0, 0);
    let (mut correct, mut passed, mut drift) = (0, 0, 0.0f64);
    for &i in &idx {
        let logits = clf.logits(&store, &ds.samples[i], ds.side_of(i))?;
        correct += usize::from(argmax(&logits) == ds.labels[i]);
        let shuffled = ds.samples[i]
            .iter()
            .map(|x| {
                let mut sigma: Vec<usize> = (0..x.len()).collect();
                sigma.shuffle(&mut rng);
                x.permute(&sigma)
            })
            .collect::<Result<Vec<Multiset>>>()?;
        let again = clf.logits(&store, &shuffled, ds.side_of(i))?;
        let d = logits.iter().zip(&again).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        drift = drift.max(d);
        passed += usize::from(d <= AUDIT_TOLERANCE);
    }
    Ok(EvalReport {
        split,
        size: idx.len(),
        correct,
        audit_passed: passed,
        max_logit_drift: drift,
    })
}
