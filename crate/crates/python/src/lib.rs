//! Python bindings: multisets, the Multiset Transformer and graph
//! classifier, diagram extraction and clustering.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mst_core::attention;
use mst_core::blocks::LnVariant;
use mst_core::clustering::{self, DbscanConfig};
use mst_core::model::{self, BlockKind, GraphClassifier, Mst, MstConfig};
use mst_core::topology::{self, Graph, PersistenceMode};
use mst_core::{Matrix, MstError, ParamStore};

fn py_err(e: MstError) -> PyErr {
    match e {
        MstError::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &[Vec<f64>], cols: usize) -> PyResult<Matrix> {
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("row {bad} has {} values, expected {cols}", rows[bad].len())));
    }
    Matrix::new(rows.len(), cols, rows.concat()).map_err(py_err)
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

/// Points with positive integer multiplicities.
#[pyclass(name = "Multiset", module = "mst", skip_from_py_object)]
#[derive(Clone)]
struct PyMultiset {
    inner: mst_core::Multiset,
}

#[pymethods]
impl PyMultiset {
    /// `points` is a list of equal-length rows; `mult` defaults to all ones.
    #[new]
    #[pyo3(signature = (points, mult=None, dim=None))]
    fn new(points: Vec<Vec<f64>>, mult: Option<Vec<u64>>, dim: Option<usize>) -> PyResult<Self> {
        let d = dim.or_else(|| points.first().map(Vec::len)).unwrap_or(2);
        let base = to_matrix(&points, d)?;
        let mult = mult.unwrap_or_else(|| vec![1; points.len()]);
        Ok(Self {
            inner: mst_core::Multiset::new(base, mult).map_err(py_err)?,
        })
    }

    /// Merges duplicate rows, drops non-positive counts and sorts the rows.
    #[staticmethod]
    fn from_counts(points: Vec<Vec<f64>>, counts: Vec<i64>) -> PyResult<Self> {
        let d = points.first().map_or(2, Vec::len);
        let inner = mst_core::Multiset::canonicalize(&to_matrix(&points, d)?, &counts).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn points(&self) -> Vec<Vec<f64>> {
        to_rows(self.inner.base())
    }

    #[getter]
    fn mult(&self) -> Vec<u64> {
        self.inner.mult().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __eq__(&self, other: PyRef<'_, Self>) -> bool {
        self.inner.same_multiset(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("Multiset(len={}, mass={})", self.inner.len(), self.inner.total_mass())
    }

    fn total_mass(&self) -> u64 {
        self.inner.total_mass()
    }

    /// Distinct points over total mass.
    fn data_ratio(&self) -> f64 {
        self.inner.data_ratio()
    }

    fn canonical(&self) -> Self {
        Self {
            inner: self.inner.canonical(),
        }
    }

    /// Row `i` of the result is row `sigma[i]` of this multiset.
    fn permute(&self, sigma: Vec<usize>) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.permute(&sigma).map_err(py_err)?,
        })
    }

    /// Every point repeated by its multiplicity; fails above `cap` rows.
    #[pyo3(signature = (cap=1_000_000))]
    fn expand(&self, cap: u64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.inner.expand_to_list(cap).map_err(py_err)?))
    }
}

#[allow(clippy::too_many_arguments)]
fn model_config(
    hidden: usize,
    heads: usize,
    layers: usize,
    block: &str,
    induced: usize,
    pool_queries: usize,
    pre_ln: bool,
    use_mult: bool,
    bias_in_equivariant: bool,
) -> PyResult<MstConfig> {
    let block_kind = match block.to_ascii_lowercase().as_str() {
        "sab" => BlockKind::Sab,
        "imab" => BlockKind::Imab,
        other => return Err(PyValueError::new_err(format!("unknown block {other:?} (sab|imab)"))),
    };
    let cfg = MstConfig {
        hidden,
        heads,
        equivariant_layers: layers,
        block_kind,
        induced_queries: induced,
        pool_queries,
        variant: if pre_ln { LnVariant::PreLn } else { LnVariant::PostLn },
        bias_enabled: use_mult,
        bias_in_equivariant,
        ..MstConfig::default()
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// A randomly initialized Multiset Transformer over 2-d points.
#[pyclass(name = "Model", module = "mst")]
struct PyModel {
    model: Mst,
    store: ParamStore,
}

#[pymethods]
impl PyModel {
    #[new]
    #[pyo3(signature = (hidden=16, heads=2, layers=1, block="imab", induced=4, pool_queries=1,
                        pre_ln=false, use_mult=true, bias_in_equivariant=false, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        hidden: usize,
        heads: usize,
        layers: usize,
        block: &str,
        induced: usize,
        pool_queries: usize,
        pre_ln: bool,
        use_mult: bool,
        bias_in_equivariant: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = model_config(hidden, heads, layers, block, induced, pool_queries, pre_ln, use_mult, bias_in_equivariant)?;
        let mut store = ParamStore::new();
        let model = Mst::init(&mut store, "mst", cfg, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(py_err)?;
        Ok(Self { model, store })
    }

    /// The `pool_queries × hidden` representation of `x`.
    fn forward(&self, x: PyRef<'_, PyMultiset>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&model::mst_forward(&x.inner, &self.model, &self.store).map_err(py_err)?))
    }

    /// The same parameters with the bias off, applied to the base set.
    fn forward_without_mult(&self, x: PyRef<'_, PyMultiset>) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&model::mst_without_mult(&x.inner, &self.model, &self.store).map_err(py_err)?))
    }

    /// Sets every attention-bias scale to `value` (they start at zero).
    fn set_bias_scale(&mut self, value: f64) {
        let ids: Vec<_> = self.store.ids().filter(|&id| self.store.name(id).ends_with("/alpha")).collect();
        for id in ids {
            self.store.get_mut(id).value = Matrix::scalar(value);
        }
    }

    fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }
}

/// One transformer per diagram stream followed by an affine layer.
#[pyclass(name = "GraphClassifier", module = "mst")]
struct PyGraphClassifier {
    clf: GraphClassifier,
    store: ParamStore,
}

#[pymethods]
impl PyGraphClassifier {
    #[new]
    #[pyo3(signature = (streams, classes, side_features=0, hidden=16, heads=2, layers=1, block="imab",
                        induced=4, pool_queries=1, pre_ln=false, use_mult=true, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        streams: usize,
        classes: usize,
        side_features: usize,
        hidden: usize,
        heads: usize,
        layers: usize,
        block: &str,
        induced: usize,
        pool_queries: usize,
        pre_ln: bool,
        use_mult: bool,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = model_config(hidden, heads, layers, block, induced, pool_queries, pre_ln, use_mult, false)?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let clf = GraphClassifier::init(&mut store, &cfg, streams, side_features, classes, &mut rng).map_err(py_err)?;
        Ok(Self { clf, store })
    }

    #[pyo3(signature = (streams, side=None))]
    fn logits(&self, streams: Vec<PyRef<'_, PyMultiset>>, side: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
        let xs: Vec<_> = streams.iter().map(|s| s.inner.clone()).collect();
        model::classify_graph(&xs, &self.clf, &self.store, side.as_deref()).map_err(py_err)
    }

    #[pyo3(signature = (streams, side=None))]
    fn predict(&self, streams: Vec<PyRef<'_, PyMultiset>>, side: Option<Vec<f64>>) -> PyResult<usize> {
        Ok(model::argmax(&self.logits(streams, side)?))
    }

    /// Loads parameters written by `mst train`.
    fn load_checkpoint(&mut self, path: std::path::PathBuf) -> PyResult<()> {
        model::load_checkpoint(&mut self.store, &path).map_err(py_err)
    }

    fn save_checkpoint(&self, path: std::path::PathBuf) -> PyResult<()> {
        model::save_checkpoint(&self.store, &path).map_err(py_err)
    }
}

/// `(mq − 1)(mx − 1)ᵀ` scaled to Frobenius norm below one.
#[pyfunction]
#[pyo3(signature = (mq, mx, eps=attention::DEFAULT_BIAS_EPS))]
fn multiplicity_bias(mq: Vec<f64>, mx: Vec<f64>, eps: f64) -> Vec<Vec<f64>> {
    to_rows(&attention::multiplicity_bias(&mq, &mx, eps))
}

/// Heat kernel signature of each vertex at time `t`.
#[pyfunction]
fn hks(n: usize, edges: Vec<(usize, usize)>, t: f64) -> PyResult<Vec<f64>> {
    topology::hks(&Graph::new(n, edges).map_err(py_err)?, t).map_err(py_err)
}

/// `(birth, death, multiplicity)`.
type Triple = (f64, f64, u64);

/// Diagrams of the vertex function `values`, keyed by kind
/// (`ord0`/`ess0` or `ord0`/`ext0`/`ext1`/`rel1`), as `(birth, death, mult)`.
#[pyfunction]
#[pyo3(signature = (n, edges, values, mode="ordinary"))]
fn persistence(
    n: usize,
    edges: Vec<(usize, usize)>,
    values: Vec<f64>,
    mode: &str,
) -> PyResult<Vec<(String, Vec<Triple>)>> {
    let g = Graph::new(n, edges).map_err(py_err)?;
    let diagrams = match mode.parse::<PersistenceMode>().map_err(py_err)? {
        PersistenceMode::Ordinary => {
            let (fin, ess) = topology::ordinary_persistence_0d(&g, &values).map_err(py_err)?;
            vec![fin, ess]
        }
        PersistenceMode::Extended => topology::extended_persistence(&g, &values).map_err(py_err)?.into_values().collect(),
    };
    Ok(diagrams
        .iter()
        .map(|d| (d.kind.tag().to_string(), d.triples().collect()))
        .collect())
}

/// Collapses DBSCAN clusters (density counted by multiplicity) to their
/// weighted centroids; total mass is preserved.
#[pyfunction]
#[pyo3(signature = (x, eps, min_mass=clustering::DEFAULT_MIN_MASS))]
fn dbscan_compress(x: PyRef<'_, PyMultiset>, eps: f64, min_mass: u64) -> PyResult<PyMultiset> {
    let cfg = DbscanConfig::new(eps, min_mass).map_err(py_err)?;
    Ok(PyMultiset {
        inner: clustering::dbscan_compress(&x.inner, cfg).map_err(py_err)?,
    })
}

#[pymodule]
#[pyo3(name = "mst")]
fn mst_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMultiset>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyGraphClassifier>()?;
    m.add_function(wrap_pyfunction!(multiplicity_bias, m)?)?;
    m.add_function(wrap_pyfunction!(hks, m)?)?;
    m.add_function(wrap_pyfunction!(persistence, m)?)?;
    m.add_function(wrap_pyfunction!(dbscan_compress, m)?)?;
    Ok(())
}
