//! On-disk diagram cache. A cache directory holds one CSV per (graph,
//! stream) named `gNNNNN_sK.csv`, plus `labels.csv`, `spectral.csv` and a
//! `manifest.txt` recording the SHA-256 of the inputs that produced it and of
//! the files it contains. Extraction is skipped when both hashes still match.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::clustering::{dbscan_compress, DbscanConfig};
use crate::data::{load_tu, read_pd_csv, write_pd_csv};
use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::topology::{build_streams, spectral_features, PersistenceMode, DEFAULT_EIGENVALUE_COUNT};

const CACHE_MAGIC: &str = "mst-cache 1";
const MANIFEST: &str = "manifest.txt";

/// Diagrams of every graph, ready for training.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagramCache {
    pub dir: PathBuf,
    /// Stream names such as `ord0@hks_10`, in classifier input order.
    pub stream_names: Vec<String>,
    pub graphs: Vec<Vec<Multiset>>,
    pub labels: Vec<usize>,
    pub classes: usize,
    /// Eigenvalue and HKS-decile features per graph.
    pub spectral: Vec<Vec<f64>>,
}

impl DiagramCache {
    /// Table-style data ratio: distinct points over total mass, summed over
    /// every diagram in the cache.
    pub fn data_ratio(&self) -> f64 {
        let (mut distinct, mut mass) = (0u64, 0u64);
        for x in self.graphs.iter().flatten() {
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

/// What `extract` did for one cache directory.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheStatus {
    pub dir: PathBuf,
    /// `true` when the existing cache was reused untouched.
    pub fresh: bool,
    pub files: usize,
    pub data_ratio: f64,
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Hash of every regular file in `dir` except the manifest, by sorted name.
fn content_hash(dir: &Path) -> Result<(String, usize)> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| MstError::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n != MANIFEST)
        .collect();
    names.sort();
    let mut h = Sha256::new();
    for n in &names {
        let path = dir.join(n);
        h.update(n.as_bytes());
        h.update(std::fs::read(&path).map_err(|e| MstError::io(&path, e))?);
    }
    Ok((hex(&h.finalize()), names.len()))
}

fn manifest_field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        let (k, v) = l.split_once('=')?;
        (k.trim() == key).then(|| v.trim())
    })
}

fn is_fresh(dir: &Path, input_hash: &str) -> bool {
    let Ok(text) = std::fs::read_to_string(dir.join(MANIFEST)) else {
        return false;
    };
    if text.lines().next() != Some(CACHE_MAGIC) || manifest_field(&text, "input") != Some(input_hash) {
        return false;
    }
    matches!(content_hash(dir), Ok((h, _)) if manifest_field(&text, "content") == Some(h.as_str()))
}

fn write_cache(cache: &DiagramCache, input_hash: &str) -> Result<CacheStatus> {
    let dir = &cache.dir;
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| MstError::io(dir, e))?;
    for (g, streams) in cache.graphs.iter().enumerate() {
        for (s, x) in streams.iter().enumerate() {
            write_pd_csv(&dir.join(format!("g{g:05}_s{s}.csv")), x)?;
        }
    }
    let labels: String = cache.labels.iter().map(|l| format!("{l}\n")).collect();
    let spectral: String = cache
        .spectral
        .iter()
        .map(|row| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    for (name, body) in [("labels.csv", labels), ("spectral.csv", spectral)] {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| MstError::io(&path, e))?;
    }
    let (content, files) = content_hash(dir)?;
    let manifest = format!(
        "{CACHE_MAGIC}\ninput = {input_hash}\ncontent = {content}\ngraphs = {}\nclasses = {}\nstreams = {}\n",
        cache.graphs.len(),
        cache.classes,
        cache.stream_names.join(", ")
    );
    let path = dir.join(MANIFEST);
    std::fs::write(&path, manifest).map_err(|e| MstError::io(&path, e))?;
    Ok(CacheStatus {
        dir: dir.clone(),
        fresh: false,
        files,
        data_ratio: cache.data_ratio(),
    })
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| MstError::io(path, e))?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Reads a cache written by [`extract`].
pub fn load_cache(dir: &Path) -> Result<DiagramCache> {
    let manifest_path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| MstError::io(&manifest_path, e))?;
    let field = |k: &str| {
        manifest_field(&text, k).ok_or_else(|| MstError::Load(format!("{}: missing `{k}`", manifest_path.display())))
    };
    let count = |k: &str| -> Result<usize> {
        field(k)?
            .parse()
            .map_err(|_| MstError::Load(format!("{}: bad `{k}`", manifest_path.display())))
    };
    let (n_graphs, classes) = (count("graphs")?, count("classes")?);
    let stream_names: Vec<String> = field("streams")?.split(", ").map(str::to_string).collect();
    let labels = read_lines(&dir.join("labels.csv"))?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.parse().map_err(|_| MstError::Parse {
                path: dir.join("labels.csv"),
                line: i + 1,
                msg: format!("bad label {l:?}"),
            })
        })
        .collect::<Result<Vec<usize>>>()?;
    let spectral = read_lines(&dir.join("spectral.csv"))?
        .iter()
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| MstError::Parse {
                    path: dir.join("spectral.csv"),
                    line: i + 1,
                    msg: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.len() != n_graphs || spectral.len() != n_graphs {
        return Err(MstError::Load(format!("{}: file counts disagree with manifest", dir.display())));
    }
    let graphs = (0..n_graphs)
        .map(|g| {
            (0..stream_names.len())
                .map(|s| read_pd_csv(&dir.join(format!("g{g:05}_s{s}.csv"))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiagramCache {
        dir: dir.to_path_buf(),
        stream_names,
        graphs,
        labels,
        classes,
        spectral,
    })
}

/// Where the raw and clustered caches for a dataset live.
#[derive(Clone, Debug, PartialEq)]
pub struct CacheLayout {
    pub raw: PathBuf,
    pub clustered: Option<PathBuf>,
}

pub fn cache_layout(root: &Path, dataset: &str, mode: PersistenceMode, times: &[f64], dbscan: Option<DbscanConfig>) -> CacheLayout {
    let tag: Vec<String> = times.iter().map(|t| format!("hks_{t}")).collect();
    let base = root.join(dataset).join(format!("{mode}_{}", tag.join("_")));
    CacheLayout {
        raw: base.join("raw"),
        clustered: dbscan.map(|c| base.join(format!("clustered_eps{}_m{}", c.eps, c.min_mass))),
    }
}

/// Extraction request for a TU dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtractSpec {
    pub data_dir: PathBuf,
    pub dataset: String,
    pub mode: PersistenceMode,
    pub hks_times: Vec<f64>,
    pub dbscan: Option<DbscanConfig>,
    pub cache_root: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtractReport {
    pub raw: CacheStatus,
    pub clustered: Option<CacheStatus>,
}

fn input_hash(spec: &ExtractSpec, stage: &str) -> Result<String> {
    let mut h = Sha256::new();
    h.update(CACHE_MAGIC.as_bytes());
    for suffix in ["A", "graph_indicator", "graph_labels"] {
        let path = spec.data_dir.join(format!("{}_{suffix}.txt", spec.dataset));
        h.update(std::fs::read(&path).map_err(|e| MstError::Load(format!("cannot read {}: {e}", path.display())))?);
    }
    h.update(format!("{}|{:?}|{stage}", spec.mode, spec.hks_times).as_bytes());
    Ok(hex(&h.finalize()))
}

/// Computes (or reuses) the raw diagram cache and, when DBSCAN settings are
/// given, a clustered copy next to it.
pub fn extract(spec: &ExtractSpec) -> Result<ExtractReport> {
    let layout = cache_layout(&spec.cache_root, &spec.dataset, spec.mode, &spec.hks_times, spec.dbscan);
    let raw_hash = input_hash(spec, "raw")?;
    let mut raw_cache = None;
    let raw = if is_fresh(&layout.raw, &raw_hash) {
        log::info!("{}: cache is fresh", layout.raw.display());
        let c = load_cache(&layout.raw)?;
        let (_, files) = content_hash(&layout.raw)?;
        let status = CacheStatus {
            dir: layout.raw.clone(),
            fresh: true,
            files,
            data_ratio: c.data_ratio(),
        };
        raw_cache = Some(c);
        status
    } else {
        let ds = load_tu(&spec.data_dir, &spec.dataset)?;
        let mut graphs = Vec::with_capacity(ds.graphs.len());
        let mut spectral = Vec::with_capacity(ds.graphs.len());
        let mut stream_names = Vec::new();
        for (i, g) in ds.graphs.iter().enumerate() {
            let ctx = |e: MstError| e.context(format!("graph {}", i + 1));
            let pds = build_streams(g, &spec.hks_times, spec.mode).map_err(ctx)?;
            if i == 0 {
                let mut ts = spec.hks_times.clone();
                ts.sort_by(f64::total_cmp);
                stream_names = ts
                    .iter()
                    .flat_map(|t| spec.mode.kinds().iter().map(move |k| format!("{k}@hks_{t}")))
                    .collect();
            }
            graphs.push(pds.into_iter().map(|p| p.points).collect());
            spectral.push(spectral_features(g, &spec.hks_times, DEFAULT_EIGENVALUE_COUNT).map_err(ctx)?);
        }
        let cache = DiagramCache {
            dir: layout.raw.clone(),
            stream_names,
            graphs,
            labels: ds.labels.clone(),
            classes: ds.num_classes(),
            spectral,
        };
        let status = write_cache(&cache, &raw_hash)?;
        raw_cache = raw_cache.or(Some(cache));
        status
    };
    let clustered = match (spec.dbscan, layout.clustered) {
        (Some(cfg), Some(dir)) => {
            let hash = input_hash(spec, &format!("clustered {} {}|{raw_hash}", cfg.eps, cfg.min_mass))?;
            if is_fresh(&dir, &hash) {
                let (_, files) = content_hash(&dir)?;
                let c = load_cache(&dir)?;
                Some(CacheStatus {
                    dir,
                    fresh: true,
                    files,
                    data_ratio: c.data_ratio(),
                })
            } else {
                let raw_cache = raw_cache.expect("raw cache loaded or built above");
                let graphs = raw_cache
                    .graphs
                    .iter()
                    .map(|streams| streams.iter().map(|x| dbscan_compress(x, cfg)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                let cache = DiagramCache {
                    dir,
                    graphs,
                    ..raw_cache
                };
                Some(write_cache(&cache, &hash)?)
            }
        }
        _ => None,
    };
    Ok(ExtractReport { raw, clustered })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{write_tu, TuDataset};
    use crate::topology::Graph;

    fn toy_dataset(dir: &Path) {
        let graphs = vec![
            Graph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap(),
            Graph::new(3, [(0, 1)]).unwrap(),
            Graph::new(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)]).unwrap(),
        ];
        let ds = TuDataset {
            name: "TOY".into(),
            graphs,
            labels: vec![0, 1, 0],
            label_values: vec![0, 1],
        };
        write_tu(dir, &ds).unwrap();
    }

    fn spec(root: &Path, mode: PersistenceMode) -> ExtractSpec {
        ExtractSpec {
            data_dir: root.join("data"),
            dataset: "TOY".into(),
            mode,
            hks_times: vec![10.0, 0.1],
            dbscan: Some(DbscanConfig::new(0.5, 2).unwrap()),
            cache_root: root.join("cache"),
        }
    }

    #[test]
    fn extract_writes_then_reuses() {
        let root = tempfile::tempdir().unwrap();
        toy_dataset(&root.path().join("data"));
        let s = spec(root.path(), PersistenceMode::Extended);
        let first = extract(&s).unwrap();
        assert!(!first.raw.fresh);
        // 3 graphs × 2 times × 4 kinds, plus labels and spectral features
        assert_eq!(first.raw.files, 3 * 8 + 2);
        let again = extract(&s).unwrap();
        assert!(again.raw.fresh && again.clustered.as_ref().unwrap().fresh);
        assert_eq!(again.raw.data_ratio, first.raw.data_ratio);

        let raw = load_cache(&first.raw.dir).unwrap();
        let clustered = load_cache(&first.clustered.unwrap().dir).unwrap();
        assert_eq!(raw.stream_names[0], "ord0@hks_0.1");
        assert_eq!(raw.labels, vec![0, 1, 0]);
        for (a, b) in raw.graphs.iter().flatten().zip(clustered.graphs.iter().flatten()) {
            assert_eq!(a.total_mass(), b.total_mass());
            assert!(b.len() <= a.len());
        }
    }

    #[test]
    fn stale_cache_is_rebuilt() {
        let root = tempfile::tempdir().unwrap();
        toy_dataset(&root.path().join("data"));
        let s = spec(root.path(), PersistenceMode::Ordinary);
        let first = extract(&s).unwrap();
        std::fs::write(first.raw.dir.join("g00000_s0.csv"), "birth,death,mult\n").unwrap();
        assert!(!extract(&s).unwrap().raw.fresh);
        assert!(extract(&s).unwrap().raw.fresh);
    }
}
