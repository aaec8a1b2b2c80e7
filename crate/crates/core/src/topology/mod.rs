//! Graphs, heat-kernel filtrations and persistence diagrams.

mod graph;
pub mod persistence;
pub mod spectral;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use graph::Graph;
pub use persistence::{extended_pairs, superlevel_pairs, zero_dim_pairs, ExtendedPairs, Pair, ZeroDimPairs};
pub use spectral::{eigensystem, hks, spectral_features, Eigensystem, DEFAULT_EIGENVALUE_COUNT};

use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::Matrix;

/// Diagram types, in the fixed order streams are emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagramKind {
    /// Finite sublevel 0-dim pairs.
    Ord0,
    /// Essential sublevel classes, one per component, dying at the component max.
    Ess0,
    /// Extended 0-dim pairs (min f, max f) per component.
    Ext0,
    /// Extended 1-dim pairs, one per independent cycle.
    Ext1,
    /// Relative 1-dim pairs (superlevel 0-dim sweep).
    Rel1,
}

impl DiagramKind {
    pub const ALL: [DiagramKind; 5] = [Self::Ord0, Self::Ess0, Self::Ext0, Self::Ext1, Self::Rel1];

    pub fn tag(self) -> &'static str {
        match self {
            Self::Ord0 => "ord0",
            Self::Ess0 => "ess0",
            Self::Ext0 => "ext0",
            Self::Ext1 => "ext1",
            Self::Rel1 => "rel1",
        }
    }

    /// Whether points satisfy `death ≥ birth` (otherwise `birth ≥ death`).
    pub fn ascending(self) -> bool {
        matches!(self, Self::Ord0 | Self::Ess0 | Self::Ext0)
    }
}

impl fmt::Display for DiagramKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DiagramKind {
    type Err = MstError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| MstError::Validation(format!("unknown diagram kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PersistenceMode {
    #[default]
    Ordinary,
    Extended,
}

impl PersistenceMode {
    pub fn kinds(self) -> &'static [DiagramKind] {
        match self {
            Self::Ordinary => &[DiagramKind::Ord0, DiagramKind::Ess0],
            Self::Extended => &[DiagramKind::Ord0, DiagramKind::Ext0, DiagramKind::Ext1, DiagramKind::Rel1],
        }
    }
}

impl FromStr for PersistenceMode {
    type Err = MstError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ordinary" => Ok(Self::Ordinary),
            "extended" => Ok(Self::Extended),
            _ => Err(MstError::Config(format!("unknown persistence mode {s:?} (ordinary|extended)"))),
        }
    }
}

impl fmt::Display for PersistenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Ordinary => "ordinary",
            Self::Extended => "extended",
        })
    }
}

/// A multiset of (birth, death) points of one kind.
#[derive(Clone, Debug, PartialEq)]
pub struct PersistenceDiagram {
    pub kind: DiagramKind,
    pub points: Multiset,
}

impl PersistenceDiagram {
    /// Canonicalizes `pairs` (identical pairs merge into multiplicities).
    pub fn from_pairs(kind: DiagramKind, pairs: &[Pair]) -> Result<Self> {
        let m = Matrix::from_fn(pairs.len(), 2, |r, c| if c == 0 { pairs[r].0 } else { pairs[r].1 });
        let points = Multiset::canonicalize(&m, &vec![1; pairs.len()])?;
        Ok(Self { kind, points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(birth, death, multiplicity)` triples in stored order.
    pub fn triples(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        self.points.base().row_iter().zip(self.points.mult()).map(|(r, &m)| (r[0], r[1], m))
    }

    pub fn respects_kind_order(&self) -> bool {
        self.triples()
            .all(|(b, d, _)| if self.kind.ascending() { d >= b } else { b >= d })
    }
}

fn nontrivial(pairs: Vec<Pair>) -> Vec<Pair> {
    pairs.into_iter().filter(|(b, d)| b != d).collect()
}

/// Finite sublevel diagram (zero-persistence pairs dropped) and the
/// essential diagram `(component min, component max)`.
pub fn ordinary_persistence_0d(g: &Graph, f: &[f64]) -> Result<(PersistenceDiagram, PersistenceDiagram)> {
    let p = zero_dim_pairs(g, f)?;
    Ok((
        PersistenceDiagram::from_pairs(DiagramKind::Ord0, &nontrivial(p.finite))?,
        PersistenceDiagram::from_pairs(DiagramKind::Ess0, &p.essential)?,
    ))
}

/// The four extended diagrams. Zero-persistence `Ord0`/`Rel1` pairs are
/// dropped; `Ext0`/`Ext1` keep every pair (a flat cycle sits on the diagonal
/// but is still a cycle).
pub fn extended_persistence(g: &Graph, f: &[f64]) -> Result<BTreeMap<DiagramKind, PersistenceDiagram>> {
    let p = extended_pairs(g, f)?;
    let mut out = BTreeMap::new();
    out.insert(DiagramKind::Ord0, PersistenceDiagram::from_pairs(DiagramKind::Ord0, &nontrivial(p.ord0))?);
    out.insert(DiagramKind::Ext0, PersistenceDiagram::from_pairs(DiagramKind::Ext0, &p.ext0)?);
    out.insert(DiagramKind::Ext1, PersistenceDiagram::from_pairs(DiagramKind::Ext1, &p.ext1)?);
    out.insert(DiagramKind::Rel1, PersistenceDiagram::from_pairs(DiagramKind::Rel1, &nontrivial(p.rel1))?);
    Ok(out)
}

/// Diagrams for every HKS time (ascending) and kind (fixed order).
pub fn build_streams(g: &Graph, times: &[f64], mode: PersistenceMode) -> Result<Vec<PersistenceDiagram>> {
    let eig = eigensystem(g)?;
    let mut ts = times.to_vec();
    ts.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(ts.len() * mode.kinds().len());
    for t in ts {
        let f = eig.hks(t)?;
        match mode {
            PersistenceMode::Ordinary => {
                let (fin, ess) = ordinary_persistence_0d(g, &f)?;
                out.push(fin);
                out.push(ess);
            }
            PersistenceMode::Extended => {
                let mut all = extended_persistence(g, &f)?;
                for k in mode.kinds() {
                    out.push(all.remove(k).expect("every extended kind is computed"));
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_round_trip() {
        for k in DiagramKind::ALL {
            assert_eq!(k.tag().parse::<DiagramKind>().unwrap(), k);
        }
        assert!("ord2".parse::<DiagramKind>().is_err());
        assert_eq!("Extended".parse::<PersistenceMode>().unwrap(), PersistenceMode::Extended);
    }

    #[test]
    fn path_diagrams() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let (fin, ess) = ordinary_persistence_0d(&g, &[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(fin.triples().collect::<Vec<_>>(), vec![(2.0, 3.0, 1)]);
        assert_eq!(ess.triples().collect::<Vec<_>>(), vec![(1.0, 3.0, 1)]);
    }

    #[test]
    fn identical_pairs_merge() {
        // a star whose three leaves share a value: three (0.2, 0.9) pairs
        let g = Graph::new(4, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let (fin, _) = ordinary_persistence_0d(&g, &[0.9, 0.2, 0.2, 0.2]).unwrap();
        assert_eq!(fin.triples().collect::<Vec<_>>(), vec![(0.2, 0.9, 2)]);
    }

    #[test]
    fn stream_layout() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 0), (2, 3)]).unwrap();
        let s = build_streams(&g, &[10.0, 0.1], PersistenceMode::Ordinary).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.iter().map(|d| d.kind).collect::<Vec<_>>(), vec![
            DiagramKind::Ord0,
            DiagramKind::Ess0,
            DiagramKind::Ord0,
            DiagramKind::Ess0
        ]);
        let e = build_streams(&g, &[0.1, 10.0], PersistenceMode::Extended).unwrap();
        assert_eq!(e.len(), 8);
        assert_eq!(e[2].kind, DiagramKind::Ext1);
        assert_eq!(e[2].points.total_mass(), 1);
        assert!(e.iter().all(PersistenceDiagram::respects_kind_order));
        assert_eq!(e, build_streams(&g, &[0.1, 10.0], PersistenceMode::Extended).unwrap());
    }
}
