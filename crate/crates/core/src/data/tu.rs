//! Loader and writer for the TU graph-benchmark text format:
//! `<name>_A.txt` (1-based `u, v` edge lines over all graphs),
//! `<name>_graph_indicator.txt` (graph id per node, 1-based) and
//! `<name>_graph_labels.txt` (one integer label per graph).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{MstError, Result};
use crate::topology::Graph;

#[derive(Clone, Debug, PartialEq)]
pub struct TuDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// Class index per graph, contiguous from 0.
    pub labels: Vec<usize>,
    /// Original label value of each class index, ascending.
    pub label_values: Vec<i64>,
}

impl TuDataset {
    pub fn num_classes(&self) -> usize {
        self.label_values.len()
    }

    pub fn mean_vertices(&self) -> f64 {
        self.graphs.iter().map(|g| g.vertex_count() as f64).sum::<f64>() / self.graphs.len() as f64
    }

    pub fn mean_edges(&self) -> f64 {
        self.graphs.iter().map(|g| g.edge_count() as f64).sum::<f64>() / self.graphs.len() as f64
    }
}

fn file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| MstError::Load(format!("cannot read {}: {e}", path.display())))
}

/// Non-blank lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty())
}

fn parse_int<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| MstError::Parse {
        path: path.to_path_buf(),
        line,
        msg: format!("expected an integer, found {s:?}"),
    })
}

pub fn load_tu(dir: &Path, name: &str) -> Result<TuDataset> {
    let ind_path = file(dir, name, "graph_indicator");
    let indicator: Vec<usize> = lines(&read(&ind_path)?)
        .map(|(n, l)| parse_int(&ind_path, n, l))
        .collect::<Result<_>>()?;
    let lab_path = file(dir, name, "graph_labels");
    let raw_labels: Vec<i64> = lines(&read(&lab_path)?)
        .map(|(n, l)| parse_int(&lab_path, n, l))
        .collect::<Result<_>>()?;
    let n_graphs = raw_labels.len();

    // node -> (graph, local index); graphs must be numbered 1..=n_graphs
    let mut sizes = vec![0usize; n_graphs];
    let mut local = Vec::with_capacity(indicator.len());
    for (node, &g) in indicator.iter().enumerate() {
        if g == 0 || g > n_graphs {
            return Err(MstError::Load(format!(
                "node {} belongs to graph {g}, but only {n_graphs} graph labels exist",
                node + 1
            )));
        }
        local.push((g - 1, sizes[g - 1]));
        sizes[g - 1] += 1;
    }
    if let Some(g) = sizes.iter().position(|&s| s == 0) {
        return Err(MstError::Load(format!("graph {} has no nodes", g + 1)));
    }

    let a_path = file(dir, name, "A");
    let mut edges = vec![Vec::new(); n_graphs];
    for (line, l) in lines(&read(&a_path)?) {
        let (u, v) = l.split_once(',').ok_or_else(|| MstError::Parse {
            path: a_path.clone(),
            line,
            msg: format!("expected `u, v`, found {l:?}"),
        })?;
        let (u, v): (usize, usize) = (parse_int(&a_path, line, u)?, parse_int(&a_path, line, v)?);
        for x in [u, v] {
            if x == 0 || x > local.len() {
                return Err(MstError::Load(format!(
                    "{}:{line}: node {x} is not listed in the graph indicator",
                    a_path.display()
                )));
            }
        }
        let ((gu, lu), (gv, lv)) = (local[u - 1], local[v - 1]);
        if gu != gv {
            return Err(MstError::Load(format!(
                "{}:{line}: edge joins graphs {} and {}",
                a_path.display(),
                gu + 1,
                gv + 1
            )));
        }
        if lu != lv {
            edges[gu].push((lu, lv));
        }
    }
    let graphs = sizes
        .iter()
        .zip(edges)
        .map(|(&n, e)| Graph::new(n, e))
        .collect::<Result<Vec<_>>>()?;

    let label_values: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = raw_labels
        .iter()
        .map(|v| label_values.binary_search(v).expect("value collected above"))
        .collect();
    Ok(TuDataset {
        name: name.to_string(),
        graphs,
        labels,
        label_values,
    })
}

/// Writes the three structure files (each undirected edge in both directions).
pub fn write_tu(dir: &Path, ds: &TuDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
    let (mut a, mut ind, mut lab) = (String::new(), String::new(), String::new());
    let mut offset = 1;
    for (g, graph) in ds.graphs.iter().enumerate() {
        for _ in 0..graph.vertex_count() {
            writeln!(ind, "{}", g + 1).unwrap();
        }
        for &(u, v) in graph.edges() {
            writeln!(a, "{}, {}", u + offset, v + offset).unwrap();
            writeln!(a, "{}, {}", v + offset, u + offset).unwrap();
        }
        offset += graph.vertex_count();
        writeln!(lab, "{}", ds.label_values[ds.labels[g]]).unwrap();
    }
    for (suffix, body) in [("A", a), ("graph_indicator", ind), ("graph_labels", lab)] {
        let path = file(dir, &ds.name, suffix);
        std::fs::write(&path, body).map_err(|e| MstError::io(&path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, a: &str, ind: &str, lab: &str) {
        std::fs::write(dir.join("T_A.txt"), a).unwrap();
        std::fs::write(dir.join("T_graph_indicator.txt"), ind).unwrap();
        std::fs::write(dir.join("T_graph_labels.txt"), lab).unwrap();
    }

    #[test]
    fn loads_and_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "1, 2\n2, 1\n2, 3\n4, 5\n", "1\n1\n1\n2\n2\n", "3\n-1\n");
        let ds = load_tu(dir.path(), "T").unwrap();
        assert_eq!(ds.graphs.len(), 2);
        assert_eq!(ds.graphs[0].edges(), &[(0, 1), (1, 2)]);
        assert_eq!(ds.graphs[1].edges(), &[(0, 1)]);
        assert_eq!(ds.labels, vec![1, 0]);
        assert_eq!(ds.label_values, vec![-1, 3]);

        let out = tempfile::tempdir().unwrap();
        write_tu(out.path(), &ds).unwrap();
        assert_eq!(load_tu(out.path(), "T").unwrap(), ds);
    }

    #[test]
    fn reports_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_tu(dir.path(), "T"), Err(MstError::Load(_))));

        write(dir.path(), "1, 9\n", "1\n1\n", "0\n");
        assert!(matches!(load_tu(dir.path(), "T"), Err(MstError::Load(m)) if m.contains("node 9")));

        write(dir.path(), "1, 3\n", "1\n1\n2\n", "0\n1\n");
        assert!(matches!(load_tu(dir.path(), "T"), Err(MstError::Load(m)) if m.contains("joins graphs")));

        write(dir.path(), "1; 2\n", "1\n1\n", "0\n");
        assert!(matches!(load_tu(dir.path(), "T"), Err(MstError::Parse { line: 1, .. })));

        write(dir.path(), "", "1\n1\n", "0\n1\n");
        assert!(matches!(load_tu(dir.path(), "T"), Err(MstError::Load(m)) if m.contains("no nodes")));
    }
}
