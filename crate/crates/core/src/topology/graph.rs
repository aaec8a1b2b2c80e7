use std::collections::BTreeSet;

use crate::error::{MstError, Result};

/// Simple undirected graph: no self-loops, no duplicate edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, storing each edge once as `(min, max)` in
    /// first-occurrence order. Repeated or reversed edges are merged.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(MstError::Validation(format!("edge ({u}, {v}) out of range for {n} vertices")));
            }
            if u == v {
                return Err(MstError::Validation(format!("self-loop at vertex {u}")));
            }
            let e = (u.min(v), u.max(v));
            if seen.insert(e) {
                out.push(e);
            }
        }
        Ok(Self { n, edges: out })
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        adj
    }

    /// Component label per vertex, numbered in order of lowest vertex index.
    pub fn component_labels(&self) -> Vec<usize> {
        let adj = self.neighbors();
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        for s in 0..self.n {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                for &w in &adj[u] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.component_labels().into_iter().max().map_or(0, |m| m + 1)
    }

    /// First Betti number `|E| − |V| + #components`.
    pub fn cycle_rank(&self) -> usize {
        self.edges.len() + self.component_count() - self.n
    }

    /// The same graph with vertex `v` renamed to `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        crate::multiset::validate_permutation(perm, self.n)?;
        Self::new(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }

    /// Checks that `values` has one finite entry per vertex.
    pub fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n {
            return Err(MstError::Validation(format!(
                "{} filtration values for {} vertices",
                values.len(),
                self.n
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MstError::Validation(format!("filtration value of vertex {i} is not finite")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedupes_and_validates() {
        let g = Graph::new(3, [(0, 1), (1, 0), (2, 1), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(Graph::new(2, [(0, 2)]).is_err());
        assert!(Graph::new(2, [(1, 1)]).is_err());
    }

    #[test]
    fn components_and_cycles() {
        let g = Graph::new(6, [(0, 1), (1, 2), (2, 0), (3, 4)]).unwrap();
        assert_eq!(g.component_labels(), vec![0, 0, 0, 1, 1, 2]);
        assert_eq!(g.component_count(), 3);
        assert_eq!(g.cycle_rank(), 1);
        assert_eq!(g.degrees(), vec![2, 2, 2, 1, 1, 0]);
    }

    #[test]
    fn value_checks() {
        let g = Graph::new(2, [(0, 1)]).unwrap();
        assert!(g.check_values(&[0.0, 1.0]).is_ok());
        assert!(g.check_values(&[0.0]).is_err());
        assert!(g.check_values(&[0.0, f64::NAN]).is_err());
    }
}
