//! Zero- and one-dimensional persistence of vertex-valued graph filtrations.
//!
//! Ordinary 0-dim pairs come from a union-find sweep (elder rule). Extended
//! persistence is computed exactly by reducing the boundary matrix of the
//! coned filtration over Z/2: the ascending sublevel filtration, followed by
//! cone simplices `ω*σ` in descending order. Its pairs split into four kinds:
//!
//! * vertex–edge (both ascending): ordinary 0-dim (`Ord0`);
//! * vertex–cone vertex: one per component, `(min f, max f)` (`Ext0`);
//! * edge–cone edge: one per independent cycle (`Ext1`);
//! * cone vertex–cone edge: superlevel 0-dim pairs (`Rel1`).
//!
//! Ties are broken by vertex/edge index, so results are deterministic.

use std::cmp::Ordering;

use super::Graph;
use crate::error::Result;

/// A (birth, death) pair of filtration values.
pub type Pair = (f64, f64);

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Raw 0-dim pairs, including zero-persistence ones.
#[derive(Clone, Debug, PartialEq)]
pub struct ZeroDimPairs {
    /// One per merge: (birth of the younger component, merge value).
    pub finite: Vec<Pair>,
    /// One per connected component: (min f, max f over the component).
    pub essential: Vec<Pair>,
}

fn by_value_then_index(values: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))
}

/// Union-find sweep of the sublevel filtration of `f`: vertices enter at
/// `f(v)`, edges at the larger endpoint value; at a merge the component with
/// the older root (smaller value, then smaller index) survives.
pub fn zero_dim_pairs(g: &Graph, f: &[f64]) -> Result<ZeroDimPairs> {
    g.check_values(f)?;
    let n = g.vertex_count();
    let edge_values: Vec<f64> = g.edges().iter().map(|&(u, v)| f[u].max(f[v])).collect();
    let mut vorder: Vec<usize> = (0..n).collect();
    vorder.sort_by(by_value_then_index(f));
    let mut rank = vec![0; n];
    for (r, &v) in vorder.iter().enumerate() {
        rank[v] = r;
    }
    let mut eorder: Vec<usize> = (0..g.edge_count()).collect();
    eorder.sort_by(by_value_then_index(&edge_values));

    let mut uf = UnionFind::new(n);
    let mut finite = Vec::with_capacity(n);
    for e in eorder {
        let (u, v) = g.edges()[e];
        let (ru, rv) = (uf.find(u), uf.find(v));
        if ru == rv {
            continue;
        }
        let (elder, younger) = if rank[ru] < rank[rv] { (ru, rv) } else { (rv, ru) };
        finite.push((f[younger], edge_values[e]));
        uf.parent[younger] = elder;
    }

    let mut top = vec![f64::NEG_INFINITY; n];
    for v in 0..n {
        let r = uf.find(v);
        top[r] = top[r].max(f[v]);
    }
    let essential = vorder
        .iter()
        .filter(|&&v| uf.find(v) == v)
        .map(|&v| (f[v], top[v]))
        .collect();
    Ok(ZeroDimPairs { finite, essential })
}

/// Raw 0-dim pairs of the superlevel filtration (the sweep on `−f`),
/// reported as (birth, death) with `birth ≥ death`.
pub fn superlevel_pairs(g: &Graph, f: &[f64]) -> Result<Vec<Pair>> {
    let neg: Vec<f64> = f.iter().map(|v| -v).collect();
    Ok(zero_dim_pairs(g, &neg)?.finite.into_iter().map(|(b, d)| (-b, -d)).collect())
}

/// All pairs of the extended filtration, including zero-length ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExtendedPairs {
    pub ord0: Vec<Pair>,
    pub ext0: Vec<Pair>,
    pub ext1: Vec<Pair>,
    pub rel1: Vec<Pair>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Cell {
    Apex,
    Vertex(usize),
    Edge(usize),
    ConeVertex(usize),
    ConeEdge(usize),
}

impl Cell {
    fn dim(self) -> u8 {
        match self {
            Cell::Apex | Cell::Vertex(_) => 0,
            Cell::Edge(_) | Cell::ConeVertex(_) => 1,
            Cell::ConeEdge(_) => 2,
        }
    }

    fn index(self) -> usize {
        match self {
            Cell::Apex => 0,
            Cell::Vertex(i) | Cell::Edge(i) | Cell::ConeVertex(i) | Cell::ConeEdge(i) => i,
        }
    }
}

/// Symmetric difference of two sorted index lists.
fn xor_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Standard column reduction; returns `(birth position, death position)` pairs.
fn reduce(mut columns: Vec<Vec<usize>>) -> Vec<(usize, usize)> {
    let mut owner: Vec<Option<usize>> = vec![None; columns.len()];
    let mut pairs = Vec::new();
    for j in 0..columns.len() {
        while let Some(&low) = columns[j].last() {
            match owner[low] {
                Some(k) => columns[j] = xor_sorted(&columns[j], &columns[k]),
                None => {
                    owner[low] = Some(j);
                    pairs.push((low, j));
                    break;
                }
            }
        }
    }
    pairs
}

/// Extended persistence pairs via reduction of the coned filtration.
pub fn extended_pairs(g: &Graph, f: &[f64]) -> Result<ExtendedPairs> {
    g.check_values(f)?;
    let n = g.vertex_count();
    let edges = g.edges();
    let top: Vec<f64> = edges.iter().map(|&(u, v)| f[u].max(f[v])).collect();
    let bottom: Vec<f64> = edges.iter().map(|&(u, v)| f[u].min(f[v])).collect();
    let value = |c: Cell| match c {
        Cell::Apex => f64::NEG_INFINITY,
        Cell::Vertex(v) | Cell::ConeVertex(v) => f[v],
        Cell::Edge(e) => top[e],
        Cell::ConeEdge(e) => bottom[e],
    };
    let key = |a: &Cell, b: &Cell| (a.dim(), a.index()).cmp(&(b.dim(), b.index()));

    let mut ascending: Vec<Cell> = (0..n).map(Cell::Vertex).chain((0..edges.len()).map(Cell::Edge)).collect();
    ascending.sort_by(|a, b| value(*a).total_cmp(&value(*b)).then_with(|| key(a, b)));
    let mut descending: Vec<Cell> =
        (0..n).map(Cell::ConeVertex).chain((0..edges.len()).map(Cell::ConeEdge)).collect();
    descending.sort_by(|a, b| value(*b).total_cmp(&value(*a)).then_with(|| key(a, b)));

    let order: Vec<Cell> = std::iter::once(Cell::Apex).chain(ascending).chain(descending).collect();
    let mut pos_vertex = vec![0; n];
    let mut pos_edge = vec![0; edges.len()];
    let mut pos_cone_vertex = vec![0; n];
    for (p, c) in order.iter().enumerate() {
        match *c {
            Cell::Vertex(v) => pos_vertex[v] = p,
            Cell::Edge(e) => pos_edge[e] = p,
            Cell::ConeVertex(v) => pos_cone_vertex[v] = p,
            Cell::Apex | Cell::ConeEdge(_) => {}
        }
    }
    let sorted = |mut v: Vec<usize>| {
        v.sort_unstable();
        v
    };
    let columns: Vec<Vec<usize>> = order
        .iter()
        .map(|c| match *c {
            Cell::Apex | Cell::Vertex(_) => Vec::new(),
            Cell::Edge(e) => sorted(vec![pos_vertex[edges[e].0], pos_vertex[edges[e].1]]),
            Cell::ConeVertex(v) => sorted(vec![0, pos_vertex[v]]),
            Cell::ConeEdge(e) => {
                let (u, v) = edges[e];
                sorted(vec![pos_edge[e], pos_cone_vertex[u], pos_cone_vertex[v]])
            }
        })
        .collect();

    let mut out = ExtendedPairs::default();
    for (b, d) in reduce(columns) {
        let (cb, cd) = (order[b], order[d]);
        let pair = (value(cb), value(cd));
        match (cb, cd) {
            (Cell::Vertex(_), Cell::Edge(_)) => out.ord0.push(pair),
            (Cell::Vertex(_), Cell::ConeVertex(_)) => out.ext0.push(pair),
            (Cell::Edge(_), Cell::ConeEdge(_)) => out.ext1.push(pair),
            (Cell::ConeVertex(_), Cell::ConeEdge(_)) => out.rel1.push(pair),
            other => unreachable!("impossible pairing {other:?}"),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sorted(mut v: Vec<Pair>) -> Vec<Pair> {
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }

    #[test]
    fn path_example() {
        let g = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let p = zero_dim_pairs(&g, &[1.0, 3.0, 2.0]).unwrap();
        let nonzero: Vec<Pair> = p.finite.iter().copied().filter(|(b, d)| b != d).collect();
        assert_eq!(nonzero, vec![(2.0, 3.0)]);
        assert_eq!(p.essential, vec![(1.0, 3.0)]);
        assert_eq!(p.finite.len() + p.essential.len(), 3);
    }

    #[test]
    fn constant_function_has_only_trivial_pairs() {
        let g = Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let p = zero_dim_pairs(&g, &[0.5; 4]).unwrap();
        assert!(p.finite.iter().all(|(b, d)| b == d));
        assert_eq!(p.essential, vec![(0.5, 0.5)]);
    }

    #[test]
    fn disjoint_union_adds_up() {
        let a = Graph::new(3, [(0, 1), (1, 2)]).unwrap();
        let fa = [1.0, 3.0, 2.0];
        let b = Graph::new(2, [(0, 1)]).unwrap();
        let fb = [4.0, 0.5];
        let ab = Graph::new(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let fab = [1.0, 3.0, 2.0, 4.0, 0.5];
        let (pa, pb, pab) = (
            zero_dim_pairs(&a, &fa).unwrap(),
            zero_dim_pairs(&b, &fb).unwrap(),
            zero_dim_pairs(&ab, &fab).unwrap(),
        );
        assert_eq!(pab.essential.len(), 2);
        assert_eq!(sorted(pab.finite), sorted([pa.finite, pb.finite].concat()));
        assert_eq!(sorted(pab.essential), sorted([pa.essential, pb.essential].concat()));
    }

    #[test]
    fn triangle_extended() {
        let g = Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = extended_pairs(&g, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p.ext0, vec![(1.0, 3.0)]);
        assert_eq!(p.ext1, vec![(3.0, 1.0)]);
        assert_eq!(sorted(p.ord0), vec![(2.0, 2.0), (3.0, 3.0)]);
        assert_eq!(sorted(p.rel1), vec![(1.0, 1.0), (2.0, 2.0)]);
    }

    #[test]
    fn tree_has_no_cycles() {
        let g = Graph::new(5, [(0, 1), (0, 2), (2, 3), (2, 4)]).unwrap();
        let p = extended_pairs(&g, &[0.3, 0.1, 0.9, 0.4, 0.2]).unwrap();
        assert!(p.ext1.is_empty());
        assert_eq!(p.ext0, vec![(0.1, 0.9)]);
    }

    fn random_case(rng: &mut ChaCha8Rng) -> (Graph, Vec<f64>) {
        let n = rng.random_range(1..=8);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(0.35) {
                    edges.push((u, v));
                }
            }
        }
        // a small value range forces plenty of ties
        let f = (0..n).map(|_| rng.random_range(0..4) as f64 * 0.5).collect();
        (Graph::new(n, edges).unwrap(), f)
    }

    #[test]
    fn reduction_agrees_with_union_find() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..300 {
            let (g, f) = random_case(&mut rng);
            let ext = extended_pairs(&g, &f).unwrap();
            let zero = zero_dim_pairs(&g, &f).unwrap();
            assert_eq!(sorted(ext.ord0.clone()), sorted(zero.finite.clone()));
            assert_eq!(sorted(ext.ext0.clone()), sorted(zero.essential.clone()));
            assert_eq!(sorted(ext.rel1.clone()), sorted(superlevel_pairs(&g, &f).unwrap()));
            assert_eq!(ext.ext1.len(), g.cycle_rank());
            assert_eq!(zero.finite.len() + zero.essential.len(), g.vertex_count());
            assert!(ext.ext1.iter().all(|(b, d)| b >= d));
            assert!(ext.rel1.iter().all(|(b, d)| b >= d));
            assert!(ext.ord0.iter().chain(&ext.ext0).all(|(b, d)| d >= b));
        }
    }
}
