//! Multisets as a base matrix of distinct rows plus positive multiplicities.

use std::collections::HashMap;

use crate::error::{MstError, Result};
use crate::numerics::Matrix;

/// Default row cap for [`Multiset::expand_to_list`].
pub const DEFAULT_EXPANSION_CAP: u64 = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct Multiset {
    base: Matrix,
    mult: Vec<u64>,
}

impl Multiset {
    /// Wraps a base matrix and multiplicities without merging duplicates.
    pub fn new(base: Matrix, mult: Vec<u64>) -> Result<Self> {
        if base.rows() != mult.len() {
            return Err(MstError::Validation(format!(
                "{} base rows but {} multiplicities",
                base.rows(),
                mult.len()
            )));
        }
        if let Some(i) = mult.iter().position(|&m| m == 0) {
            return Err(MstError::Validation(format!("multiplicity of row {i} is zero")));
        }
        if !base.is_finite() {
            return Err(MstError::Validation("base points must be finite".into()));
        }
        Ok(Self { base, mult })
    }

    /// A set: every multiplicity is one.
    pub fn from_set(base: Matrix) -> Result<Self> {
        let n = base.rows();
        Self::new(base, vec![1; n])
    }

    /// Merges bit-identical rows, summing their counts. Output rows appear
    /// in first-occurrence order.
    pub fn canonicalize(points: &Matrix, counts: &[i64]) -> Result<Self> {
        if points.rows() != counts.len() {
            return Err(MstError::Validation(format!(
                "{} points but {} counts",
                points.rows(),
                counts.len()
            )));
        }
        if let Some((i, &c)) = counts.iter().enumerate().find(|(_, &c)| c < 1) {
            return Err(MstError::Validation(format!("count of row {i} is {c}, must be >= 1")));
        }
        if !points.is_finite() {
            return Err(MstError::Validation("points must be finite".into()));
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(points.rows());
        let mut order: Vec<usize> = Vec::new();
        let mut mult: Vec<u64> = Vec::new();
        for (r, row) in points.row_iter().enumerate() {
            let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
            match index.get(&key) {
                Some(&slot) => mult[slot] += counts[r] as u64,
                None => {
                    index.insert(key, order.len());
                    order.push(r);
                    mult.push(counts[r] as u64);
                }
            }
        }
        Ok(Self {
            base: points.select_rows(&order),
            mult,
        })
    }

    /// Re-canonicalizes this multiset (no-op when already canonical).
    pub fn canonical(&self) -> Self {
        let counts: Vec<i64> = self.mult.iter().map(|&m| m as i64).collect();
        Self::canonicalize(&self.base, &counts).expect("already validated")
    }

    pub fn is_canonical(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(self.len());
        self.base
            .row_iter()
            .all(|row| seen.insert(row.iter().map(|v| v.to_bits()).collect::<Vec<_>>()))
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn mult(&self) -> &[u64] {
        &self.mult
    }

    /// Multiplicities as floats, the form the attention bias consumes.
    pub fn mult_f64(&self) -> Vec<f64> {
        self.mult.iter().map(|&m| m as f64).collect()
    }

    /// Number of distinct rows.
    pub fn len(&self) -> usize {
        self.mult.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mult.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.base.cols()
    }

    pub fn total_mass(&self) -> u64 {
        self.mult.iter().sum()
    }

    pub fn is_set(&self) -> bool {
        self.mult.iter().all(|&m| m == 1)
    }

    /// The base set alone, all multiplicities one.
    pub fn as_set(&self) -> Self {
        Self {
            base: self.base.clone(),
            mult: vec![1; self.len()],
        }
    }

    /// Distinct rows over total mass, in (0, 1].
    pub fn data_ratio(&self) -> f64 {
        self.len() as f64 / self.total_mass() as f64
    }

    /// Repeats each base row by its multiplicity, preserving base order.
    pub fn expand_to_list(&self, cap: u64) -> Result<Matrix> {
        let total = self.total_mass();
        if total > cap {
            return Err(MstError::Capacity {
                requested: total,
                cap,
            });
        }
        let mut idx = Vec::with_capacity(total as usize);
        for (i, &m) in self.mult.iter().enumerate() {
            idx.extend(std::iter::repeat_n(i, m as usize));
        }
        Ok(self.base.select_rows(&idx))
    }

    /// Co-permutes rows and multiplicities: output row `i` is input row `sigma[i]`.
    pub fn permute(&self, sigma: &[usize]) -> Result<Self> {
        validate_permutation(sigma, self.len())?;
        Ok(Self {
            base: self.base.select_rows(sigma),
            mult: sigma.iter().map(|&i| self.mult[i]).collect(),
        })
    }

    /// True when both hold the same (row, multiplicity) pairs in any order.
    pub fn same_multiset(&self, other: &Self) -> bool {
        if self.len() != other.len() || self.dim() != other.dim() {
            return false;
        }
        let key = |m: &Self| {
            let mut v: Vec<(Vec<u64>, u64)> = m
                .base
                .row_iter()
                .zip(&m.mult)
                .map(|(r, &c)| (r.iter().map(|x| x.to_bits()).collect(), c))
                .collect();
            v.sort();
            v
        };
        key(self) == key(other)
    }
}

pub fn validate_permutation(sigma: &[usize], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(MstError::Validation(format!(
            "permutation of length {} for {n} rows",
            sigma.len()
        )));
    }
    let mut seen = vec![false; n];
    for &i in sigma {
        if i >= n || std::mem::replace(&mut seen[i], true) {
            return Err(MstError::Validation(format!("not a permutation of 0..{n}: {sigma:?}")));
        }
    }
    Ok(())
}

pub fn invert_permutation(sigma: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; sigma.len()];
    for (i, &s) in sigma.iter().enumerate() {
        inv[s] = i;
    }
    inv
}
