//! Repeated k-fold cross-validation: every run reshuffles the fold plan,
//! trains a fresh classifier on each fold's training part with Adam and
//! scores it on the held-out part.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{kfold, FoldPlan, SyntheticSample};
use crate::error::{MstError, Result};
use crate::harness::cache::DiagramCache;
use crate::harness::config::RunConfig;
use crate::model::{argmax, GraphClassifier, MstConfig};
use crate::multiset::Multiset;
use crate::numerics::{ParamStore, Tape};

/// Labelled samples, each a list of input streams.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<Vec<Multiset>>,
    /// Extra per-sample features appended to the classifier input.
    pub side: Option<Vec<Vec<f64>>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn from_synthetic(name: &str, samples: Vec<SyntheticSample>, classes: usize) -> Self {
        let labels = samples.iter().map(|s| s.label).collect();
        Self {
            name: name.to_string(),
            samples: samples.into_iter().map(|s| vec![s.points]).collect(),
            side: None,
            labels,
            classes,
        }
    }

    pub fn from_cache(name: &str, cache: DiagramCache, spectral: bool) -> Self {
        Self {
            name: name.to_string(),
            samples: cache.graphs,
            side: spectral.then_some(cache.spectral),
            labels: cache.labels,
            classes: cache.classes,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn stream_count(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn side_len(&self) -> usize {
        self.side.as_ref().and_then(|s| s.first()).map_or(0, Vec::len)
    }

    pub fn side_of(&self, i: usize) -> Option<&[f64]> {
        self.side.as_ref().map(|s| s[i].as_slice())
    }

    /// Rescales every stream so its points, pooled over the dataset and
    /// weighted by multiplicity, have mean 0 and standard deviation 1 (one
    /// shift and one scale shared by all coordinates, so the diagonal stays
    /// the diagonal). Side features are standardized column by column. Uses
    /// no labels; an affine map leaves permutation behaviour untouched.
    pub fn standardize(&mut self) -> Result<()> {
        for s in 0..self.stream_count() {
            let (mut sum, mut sq, mut count) = (0.0, 0.0, 0.0);
            for sample in &self.samples {
                let x = &sample[s];
                for (row, &m) in x.base().row_iter().zip(x.mult()) {
                    for &v in row {
                        sum += m as f64 * v;
                        sq += m as f64 * v * v;
                        count += m as f64;
                    }
                }
            }
            if count == 0.0 {
                continue;
            }
            let mean = sum / count;
            let std = (sq / count - mean * mean).max(0.0).sqrt();
            let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
            for sample in &mut self.samples {
                let x = &sample[s];
                sample[s] = Multiset::new(x.base().map(|v| (v - mean) * scale), x.mult().to_vec())?;
            }
        }
        if let Some(side) = &mut self.side {
            let n = side.len() as f64;
            for c in 0..side.first().map_or(0, Vec::len) {
                let mean = side.iter().map(|r| r[c]).sum::<f64>() / n;
                let std = (side.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n).sqrt();
                let scale = if std > 1e-12 { 1.0 / std } else { 1.0 };
                for r in side.iter_mut() {
                    r[c] = (r[c] - mean) * scale;
                }
            }
        }
        Ok(())
    }

    /// Distinct points over total mass across every input multiset.
    pub fn data_ratio(&self) -> f64 {
        let (mut distinct, mut mass) = (0u64, 0u64);
        for x in self.samples.iter().flatten() {
            distinct += x.len() as u64;
            mass += x.total_mass();
        }
        if mass == 0 {
            1.0
        } else {
            distinct as f64 / mass as f64
        }
    }
}

/// Independent random streams for fold plans, initialization and shuffling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RngPurpose {
    FoldPlan = 1,
    Init = 2,
    Shuffle = 3,
    Audit = 4,
}

pub fn rng_for(seed: u64, purpose: RngPurpose, run: usize, fold: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | ((run as u64) << 24) | fold as u64);
    rng
}

pub fn fold_plan(n: usize, folds: usize, seed: u64, run: usize) -> Result<FoldPlan> {
    kfold(n, folds, rng_for(seed, RngPurpose::FoldPlan, run, 0).next_u64())
}

pub fn build_classifier(model: &MstConfig, ds: &Dataset, seed: u64, run: usize, fold: usize) -> Result<(ParamStore, GraphClassifier)> {
    let mut store = ParamStore::new();
    let mut rng = rng_for(seed, RngPurpose::Init, run, fold);
    let clf = GraphClassifier::init(&mut store, model, ds.stream_count(), ds.side_len(), ds.classes, &mut rng)?;
    Ok((store, clf))
}

/// Learning rate as a function of the epoch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Half-cosine decay from the base rate at epoch 0 towards 0.
    Cosine,
}

impl LrSchedule {
    pub fn rate(self, base: f64, epoch: usize, epochs: usize) -> f64 {
        match self {
            LrSchedule::Constant => base,
            LrSchedule::Cosine => 0.5 * base * (1.0 + (std::f64::consts::PI * epoch as f64 / epochs as f64).cos()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub lr: f64,
    pub schedule: LrSchedule,
    pub epochs: usize,
    pub batch: usize,
}

/// Mini-batch Adam on the mean cross-entropy; samples within a batch are
/// processed one at a time and their gradients averaged. Returns the mean
/// loss of the last epoch.
pub fn train_classifier(
    clf: &GraphClassifier,
    store: &mut ParamStore,
    ds: &Dataset,
    train: &[usize],
    settings: TrainSettings,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order = train.to_vec();
    let mut last = f64::NAN;
    for epoch in 0..settings.epochs {
        order.shuffle(rng);
        let lr = settings.schedule.rate(settings.lr, epoch, settings.epochs);
        let mut total = 0.0;
        for batch in order.chunks(settings.batch) {
            store.zero_grad();
            let weight = 1.0 / batch.len() as f64;
            for &i in batch {
                let mut tape = Tape::new();
                let logits = clf.forward_tape(&mut tape, store, &ds.samples[i], ds.side_of(i))?;
                let loss = tape.cross_entropy(logits, &[ds.labels[i]])?;
                let value = tape.value(loss).get(0, 0);
                if !value.is_finite() {
                    return Err(MstError::NonFiniteLoss { epoch });
                }
                total += value;
                let grads = tape.backward(loss);
                tape.accumulate_param_grads(&grads, store, weight);
            }
            store.adam_step(lr);
        }
        last = total / order.len().max(1) as f64;
        log::debug!("epoch {epoch}: mean loss {last:.6}");
    }
    Ok(last)
}

/// Number of correctly classified samples among `idx`.
pub fn count_correct(clf: &GraphClassifier, store: &ParamStore, ds: &Dataset, idx: &[usize]) -> Result<usize> {
    let mut correct = 0;
    for &i in idx {
        let logits = clf.logits(store, &ds.samples[i], ds.side_of(i))?;
        correct += usize::from(argmax(&logits) == ds.labels[i]);
    }
    Ok(correct)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub run: usize,
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub train_correct: usize,
    pub test_correct: usize,
    pub final_loss: f64,
}

impl FoldResult {
    pub fn test_accuracy(&self) -> f64 {
        self.test_correct as f64 / self.test_size as f64
    }

    pub fn train_accuracy(&self) -> f64 {
        self.train_correct as f64 / self.train_size as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub dataset: String,
    /// Canonical text of the configuration that produced this report.
    pub config_text: String,
    pub folds: Vec<FoldResult>,
    /// Per run, held-out accuracy pooled over folds (folds weighted by size).
    pub run_accuracy: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `run_accuracy`.
    pub std: f64,
    pub data_ratio: f64,
    /// Not part of the deterministic output.
    pub wall_clock: Duration,
}

/// Size-weighted accuracy of each run, then mean and population std.
pub fn summarize(folds: &[FoldResult], runs: usize) -> (Vec<f64>, f64, f64) {
    let run_accuracy: Vec<f64> = (0..runs)
        .map(|r| {
            let (c, n) = folds
                .iter()
                .filter(|f| f.run == r)
                .fold((0, 0), |(c, n), f| (c + f.test_correct, n + f.test_size));
            c as f64 / n as f64
        })
        .collect();
    let mean = run_accuracy.iter().sum::<f64>() / runs as f64;
    let var = run_accuracy.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / runs as f64;
    (run_accuracy, mean, var.sqrt())
}

impl TrainReport {
    /// Recomputes the summary from the per-fold entries.
    pub fn check_consistency(&self) -> Result<()> {
        let (runs, mean, std) = summarize(&self.folds, self.run_accuracy.len());
        if runs != self.run_accuracy || mean != self.mean || std != self.std {
            return Err(MstError::Consistency("report summary does not match its fold entries".into()));
        }
        Ok(())
    }
}

/// Result of one fold together with its trained parameters.
pub struct TrainedFold {
    pub result: FoldResult,
    pub classifier: GraphClassifier,
    pub store: ParamStore,
}

pub fn run_fold(cfg: &RunConfig, ds: &Dataset, plan: &FoldPlan, run: usize, fold: usize) -> Result<TrainedFold> {
    let ctx = |e: MstError| e.context(format!("run {run} fold {fold}"));
    let (mut store, classifier) = build_classifier(&cfg.model, ds, cfg.seed, run, fold)?;
    let train = plan.train(fold);
    let test = plan.test(fold);
    let settings = TrainSettings {
        lr: cfg.lr,
        schedule: cfg.schedule,
        epochs: cfg.epochs,
        batch: cfg.batch,
    };
    let mut rng = rng_for(cfg.seed, RngPurpose::Shuffle, run, fold);
    let final_loss = match train_classifier(&classifier, &mut store, ds, &train, settings, &mut rng) {
        Err(MstError::NonFiniteLoss { epoch }) => {
            log::error!("run {run} fold {fold}: loss became non-finite at epoch {epoch}; lower LR (currently {})", cfg.lr);
            return Err(MstError::NonFiniteLoss { epoch });
        }
        other => other.map_err(ctx)?,
    };
    let result = FoldResult {
        run,
        fold,
        train_size: train.len(),
        test_size: test.len(),
        train_correct: count_correct(&classifier, &store, ds, &train)?,
        test_correct: count_correct(&classifier, &store, ds, test)?,
        final_loss,
    };
    log::info!(
        "run {run} fold {fold}: test {:.4} train {:.4} loss {final_loss:.5}",
        result.test_accuracy(),
        result.train_accuracy()
    );
    Ok(TrainedFold {
        result,
        classifier,
        store,
    })
}

/// Full protocol; `keep` receives the parameters of run 0, fold 0.
pub fn cross_validate(cfg: &RunConfig, ds: &Dataset, mut keep: impl FnMut(&TrainedFold) -> Result<()>) -> Result<TrainReport> {
    let start = Instant::now();
    let mut folds = Vec::with_capacity(cfg.runs * cfg.folds);
    for run in 0..cfg.runs {
        let plan = fold_plan(ds.len(), cfg.folds, cfg.seed, run)?;
        for fold in 0..cfg.folds {
            let trained = run_fold(cfg, ds, &plan, run, fold)?;
            if run == 0 && fold == 0 {
                keep(&trained)?;
            }
            folds.push(trained.result);
        }
    }
    let (run_accuracy, mean, std) = summarize(&folds, cfg.runs);
    Ok(TrainReport {
        dataset: ds.name.clone(),
        config_text: cfg.to_conf_string(),
        folds,
        run_accuracy,
        mean,
        std,
        data_ratio: ds.data_ratio(),
        wall_clock: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticSpec};

    fn tiny_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.model.hidden = 8;
        cfg.model.heads = 2;
        cfg.model.induced_queries = 2;
        cfg.epochs = 2;
        cfg.batch = 8;
        cfg.runs = 2;
        cfg.folds = 3;
        cfg.seed = 5;
        cfg
    }

    fn tiny_dataset() -> Dataset {
        let spec = SyntheticSpec::reference(2, 30, 1).unwrap();
        Dataset::from_synthetic("toy", gen_synthetic(&spec).unwrap(), 2)
    }

    #[test]
    fn summary_weights_folds_by_size() {
        let f = |run, test_size, test_correct| FoldResult {
            run,
            fold: 0,
            train_size: 1,
            test_size,
            train_correct: 0,
            test_correct,
            final_loss: 0.0,
        };
        let (runs, mean, std) = summarize(&[f(0, 1, 1), f(0, 3, 0), f(1, 2, 1), f(1, 2, 1)], 2);
        assert_eq!(runs, vec![0.25, 0.5]);
        assert_eq!(mean, 0.375);
        assert_eq!(std, 0.125);
    }

    #[test]
    fn protocol_covers_every_sample_once_per_run() {
        let cfg = tiny_config();
        let ds = tiny_dataset();
        let report = cross_validate(&cfg, &ds, |_| Ok(())).unwrap();
        assert_eq!(report.folds.len(), 6);
        for run in 0..2 {
            let n: usize = report.folds.iter().filter(|f| f.run == run).map(|f| f.test_size).sum();
            assert_eq!(n, ds.len());
        }
        report.check_consistency().unwrap();
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = tiny_config();
        let ds = tiny_dataset();
        let a = cross_validate(&cfg, &ds, |_| Ok(())).unwrap();
        let b = cross_validate(&cfg, &ds, |_| Ok(())).unwrap();
        assert_eq!(a.folds, b.folds);
        assert_eq!((a.mean.to_bits(), a.std.to_bits()), (b.mean.to_bits(), b.std.to_bits()));
    }

    #[test]
    fn exploding_learning_rate_aborts() {
        let mut cfg = tiny_config();
        cfg.lr = 1e300;
        cfg.epochs = 20;
        let ds = tiny_dataset();
        let err = cross_validate(&cfg, &ds, |_| Ok(())).unwrap_err();
        assert!(matches!(err, MstError::NonFiniteLoss { .. }), "{err}");
    }

    #[test]
    fn cosine_schedule_decays_to_zero() {
        let s = LrSchedule::Cosine;
        assert_eq!(s.rate(0.1, 0, 10), 0.1);
        assert!((s.rate(0.1, 5, 10) - 0.05).abs() < 1e-15);
        assert!(s.rate(0.1, 9, 10) < 0.003);
        assert_eq!(LrSchedule::Constant.rate(0.1, 9, 10), 0.1);
    }

    #[test]
    fn standardize_centres_each_stream() {
        let mut ds = tiny_dataset();
        ds.standardize().unwrap();
        let (mut sum, mut sq, mut n) = (0.0, 0.0, 0.0);
        for x in ds.samples.iter().map(|s| &s[0]) {
            for (row, &m) in x.base().row_iter().zip(x.mult()) {
                for &v in row {
                    sum += m as f64 * v;
                    sq += m as f64 * v * v;
                    n += m as f64;
                }
            }
        }
        assert!((sum / n).abs() < 1e-9);
        assert!((sq / n - 1.0).abs() < 1e-9);
    }

    #[test]
    fn training_lowers_the_loss() {
        let cfg = tiny_config();
        let ds = tiny_dataset();
        let idx: Vec<usize> = (0..ds.len()).collect();
        let loss_after = |epochs| {
            let (mut store, clf) = build_classifier(&cfg.model, &ds, 3, 0, 0).unwrap();
            let s = TrainSettings {
                lr: 0.01,
                schedule: LrSchedule::Constant,
                epochs,
                batch: 8,
            };
            train_classifier(&clf, &mut store, &ds, &idx, s, &mut rng_for(3, RngPurpose::Shuffle, 0, 0)).unwrap()
        };
        assert!(loss_after(30) < loss_after(1));
    }
}
