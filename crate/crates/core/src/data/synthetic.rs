//! Synthetic multisets whose label is decided by the most frequent element.
//!
//! Each sample draws `n` distinct points uniformly from the unit square. One
//! of them (the designated point) receives most of the mass; the others get
//! small `1 + Geometric(1/2)` multiplicities. The total mass is `round(n / r)`
//! for a target data ratio `r`. The label is the index of the vertical strip
//! (`C` equal strips of `[0, 1]`) containing the designated point, so the
//! task is solvable only by attending to multiplicities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::Matrix;

/// The designated multiplicity must be at least this multiple of the runner-up.
pub const ARGMAX_MARGIN: f64 = 1.5;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub n_min: usize,
    pub n_max: usize,
    /// Target data ratio `|base| / total mass`.
    pub ratio: f64,
    pub samples: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The reference configurations: 10–20 distinct points and the data
    /// ratio used for each class count.
    pub fn reference(classes: usize, samples: usize, seed: u64) -> Result<Self> {
        let ratio = match classes {
            2 | 3 => 0.03,
            5 => 0.04,
            11 => 0.05,
            _ => return Err(MstError::Config(format!("no reference synthetic setting for {classes} classes"))),
        };
        Ok(Self {
            classes,
            n_min: 10,
            n_max: 20,
            ratio,
            samples,
            seed,
        })
    }

    fn total_mass(&self, n: usize) -> u64 {
        (n as f64 / self.ratio).round() as u64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MstError::Config(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        if self.n_min < 2 || self.n_min > self.n_max {
            return bad(format!("invalid point range [{}, {}]", self.n_min, self.n_max));
        }
        if !(self.ratio > 0.0 && self.ratio <= 1.0) {
            return bad(format!("data ratio must lie in (0, 1], got {}", self.ratio));
        }
        // with every other point at multiplicity one the designated point
        // still needs ⌈1.5⌉ = 2
        for n in self.n_min..=self.n_max {
            if self.total_mass(n) < n as u64 + 1 {
                return bad(format!(
                    "data ratio {} is too large: {n} points cannot carry a strict majority element",
                    self.ratio
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSample {
    pub points: Multiset,
    pub label: usize,
}

/// Strip index of `x` among `classes` equal strips, `None` on a boundary.
pub fn strip_label(x: f64, classes: usize) -> Option<usize> {
    let s = x * classes as f64;
    if s.fract() == 0.0 || !(0.0..classes as f64).contains(&s) {
        return None;
    }
    Some(s as usize)
}

fn margin(second: u64) -> u64 {
    (ARGMAX_MARGIN * second as f64).ceil() as u64
}

fn draw_sample(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> SyntheticSample {
    let small = Geometric::new(0.5).expect("valid probability");
    loop {
        let n = rng.random_range(spec.n_min..=spec.n_max);
        let total = spec.total_mass(n);
        let base = Matrix::from_fn(n, 2, |_, _| rng.random_range(0.0..1.0));
        let designated = rng.random_range(0..n);
        let Some(label) = strip_label(base.get(designated, 0), spec.classes) else {
            continue;
        };
        let mut mult = vec![1u64; n];
        let mut accepted = false;
        for _ in 0..100 {
            for (i, m) in mult.iter_mut().enumerate() {
                *m = if i == designated { 0 } else { 1 + small.sample(rng) };
            }
            let rest: u64 = mult.iter().sum();
            let second = *mult.iter().max().expect("n >= 2");
            if total > rest && total - rest >= margin(second) {
                accepted = true;
                break;
            }
        }
        if !accepted {
            // all-ones satisfies the margin for any validated spec
            mult.iter_mut().for_each(|m| *m = 1);
            mult[designated] = 0;
        }
        let rest: u64 = mult.iter().sum();
        mult[designated] = total - rest;
        let points = Multiset::new(base, mult).expect("positive multiplicities");
        if points.is_canonical() {
            return SyntheticSample { points, label };
        }
    }
}

/// Generates `spec.samples` labelled multisets, deterministically per seed.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Vec<SyntheticSample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.samples).map(|_| draw_sample(spec, &mut rng)).collect())
}
