//! Mass-preserving DBSCAN compression of 2-D multisets.
//!
//! Neighborhoods are closed Euclidean balls of radius `eps`; a point's
//! neighborhood mass sums the multiplicities of every point in its ball
//! (itself included). Each cluster collapses to its multiplicity-weighted
//! centroid carrying the cluster's total mass; noise points are kept as-is.

use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::Matrix;

pub const DEFAULT_MIN_MASS: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DbscanConfig {
    pub eps: f64,
    pub min_mass: u64,
}

impl DbscanConfig {
    pub fn new(eps: f64, min_mass: u64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(MstError::Config(format!("DBSCAN eps must be > 0, got {eps}")));
        }
        if min_mass == 0 {
            return Err(MstError::Config("DBSCAN min-mass must be >= 1".into()));
        }
        Ok(Self { eps, min_mass })
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Cluster id per row (`None` for noise). Clusters are numbered in the order
/// their first core point appears; a border point joins the first cluster
/// that reaches it.
pub fn dbscan_labels(x: &Multiset, cfg: DbscanConfig) -> Vec<Option<usize>> {
    let n = x.len();
    let pts = x.base();
    let eps2 = cfg.eps * cfg.eps;
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(pts.row(i), pts.row(j)) <= eps2).collect())
        .collect();
    let core: Vec<bool> = neighbors
        .iter()
        .map(|nb| nb.iter().map(|&j| x.mult()[j]).sum::<u64>() >= cfg.min_mass)
        .collect();

    let mut label = vec![None; n];
    let mut next = 0;
    for start in 0..n {
        if label[start].is_some() || !core[start] {
            continue;
        }
        label[start] = Some(next);
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if label[q].is_none() {
                    label[q] = Some(next);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Collapses every cluster to its weighted centroid. Output rows follow the
/// first member of each group in stored order, then are canonicalized.
pub fn dbscan_compress(x: &Multiset, cfg: DbscanConfig) -> Result<Multiset> {
    let labels = dbscan_labels(x, cfg);
    let d = x.dim();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot_of_cluster: Vec<Option<usize>> = vec![None; x.len()];
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) => match slot_of_cluster[*c] {
                Some(s) => groups[s].push(i),
                None => {
                    slot_of_cluster[*c] = Some(groups.len());
                    groups.push(vec![i]);
                }
            },
            None => groups.push(vec![i]),
        }
    }
    let mut points = Matrix::zeros(groups.len(), d);
    let mut counts = Vec::with_capacity(groups.len());
    for (g, members) in groups.iter().enumerate() {
        let mass: u64 = members.iter().map(|&i| x.mult()[i]).sum();
        let row = points.row_mut(g);
        if members.len() == 1 {
            row.copy_from_slice(x.base().row(members[0]));
        } else {
            for &i in members {
                let w = x.mult()[i] as f64;
                for (acc, v) in row.iter_mut().zip(x.base().row(i)) {
                    *acc += w * v;
                }
            }
            row.iter_mut().for_each(|v| *v /= mass as f64);
        }
        counts.push(mass as i64);
    }
    let out = Multiset::canonicalize(&points, &counts)?;
    debug_assert_eq!(out.total_mass(), x.total_mass());
    Ok(out)
}

/// `|after| / Σ before.mult`, the data ratio achieved by compression.
pub fn ratio_report(before: &Multiset, after: &Multiset) -> Result<f64> {
    if before.total_mass() != after.total_mass() {
        return Err(MstError::Consistency(format!(
            "compression changed total mass: {} -> {}",
            before.total_mass(),
            after.total_mass()
        )));
    }
    Ok(after.len() as f64 / before.total_mass() as f64)
}
