use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{MstError, Result};

/// A seeded shuffle of `0..n` cut into `k` contiguous folds whose sizes
/// differ by at most one (the first `n % k` folds get the extra item).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub seed: u64,
    order: Vec<usize>,
    bounds: Vec<(usize, usize)>,
}

pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 || k > n {
        return Err(MstError::Config(format!("cannot split {n} items into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut bounds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        bounds.push((start, start + len));
        start += len;
    }
    Ok(FoldPlan { seed, order, bounds })
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.bounds.len()
    }

    pub fn test(&self, fold: usize) -> &[usize] {
        let (a, b) = self.bounds[fold];
        &self.order[a..b]
    }

    /// Every index outside `fold`, in shuffled order.
    pub fn train(&self, fold: usize) -> Vec<usize> {
        let (a, b) = self.bounds[fold];
        self.order[..a].iter().chain(&self.order[b..]).copied().collect()
    }
}
