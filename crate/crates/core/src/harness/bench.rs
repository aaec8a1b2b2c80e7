//! Forward-pass timing: SAB versus IMAB as the input grows, and a compact
//! multiset versus its expanded list. Times are the minimum over repeats.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::BiasConfig;
use crate::blocks::{imab, sab, BlockParams, ImabParams, LnVariant};
use crate::error::Result;
use crate::model::{mst_forward, BlockKind, Mst, MstConfig};
use crate::multiset::Multiset;
use crate::numerics::param::init_uniform;
use crate::numerics::{Matrix, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub hidden: usize,
    pub heads: usize,
    pub induced: usize,
    /// Input sizes for the scaling sweep.
    pub sizes: Vec<usize>,
    /// Base-set size of the compact-versus-expanded comparison.
    pub compact_n: usize,
    /// Largest multiplicity; each point draws uniformly from `1..=m`.
    pub max_mults: Vec<u64>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            heads: 1,
            induced: 4,
            sizes: vec![64, 128, 256, 512, 1024],
            compact_n: 256,
            max_mults: vec![1, 10, 50],
            repeats: 3,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub sab_secs: f64,
    pub imab_secs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompactRow {
    pub max_mult: u64,
    pub distinct: usize,
    pub total_mass: u64,
    pub compact_secs: f64,
    pub expanded_secs: f64,
}

impl CompactRow {
    pub fn speedup(&self) -> f64 {
        self.expanded_secs / self.compact_secs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchReport {
    pub scaling: Vec<ScalingRow>,
    pub sab_slope: f64,
    pub imab_slope: f64,
    pub compact: Vec<CompactRow>,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    cov / var
}

fn min_time(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        f()?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = ParamStore::new();
    let variant = LnVariant::PostLn;
    let sab_p = BlockParams::init_mab(&mut store, "sab", cfg.hidden, cfg.heads, variant, &mut rng)?;
    let imab_p = ImabParams::init(&mut store, "imab", cfg.hidden, cfg.heads, cfg.induced, variant, &mut rng)?;
    let bias = BiasConfig::default();

    let mut scaling = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let x = Multiset::from_set(init_uniform(&mut rng, n, cfg.hidden))?;
        let sab_secs = min_time(cfg.repeats, || sab(&x, &store, &sab_p, bias).map(drop))?;
        let imab_secs = min_time(cfg.repeats, || imab(&x, &store, &imab_p, bias).map(drop))?;
        log::info!("n={n}: sab {sab_secs:.5}s imab {imab_secs:.5}s");
        scaling.push(ScalingRow { n, sab_secs, imab_secs });
    }
    let ns: Vec<f64> = scaling.iter().map(|r| r.n as f64).collect();
    let sab_slope = log_log_slope(&ns, &scaling.iter().map(|r| r.sab_secs).collect::<Vec<_>>());
    let imab_slope = log_log_slope(&ns, &scaling.iter().map(|r| r.imab_secs).collect::<Vec<_>>());

    let model_cfg = MstConfig {
        hidden: cfg.hidden,
        heads: cfg.heads,
        block_kind: BlockKind::Sab,
        ..MstConfig::default()
    };
    let mut mstore = ParamStore::new();
    let model = Mst::init(&mut mstore, "bench", model_cfg.clone(), &mut rng)?;
    let plain = Mst {
        config: model_cfg.without_mult(),
        ..model.clone()
    };
    let mut compact = Vec::with_capacity(cfg.max_mults.len());
    for &m in &cfg.max_mults {
        let base = Matrix::from_fn(cfg.compact_n, 2, |_, _| rng.random_range(0.0..1.0));
        let mult = (0..cfg.compact_n).map(|_| rng.random_range(1..=m)).collect();
        let x = Multiset::new(base, mult)?;
        let list = Multiset::from_set(x.expand_to_list(u64::MAX)?)?;
        let compact_secs = min_time(cfg.repeats, || mst_forward(&x, &model, &mstore).map(drop))?;
        let expanded_secs = min_time(cfg.repeats, || mst_forward(&list, &plain, &mstore).map(drop))?;
        log::info!("m={m}: compact {compact_secs:.5}s expanded {expanded_secs:.5}s");
        compact.push(CompactRow {
            max_mult: m,
            distinct: x.len(),
            total_mass: x.total_mass(),
            compact_secs,
            expanded_secs,
        });
    }
    Ok(BenchReport {
        scaling,
        sab_slope,
        imab_slope,
        compact,
    })
}

pub fn render_bench_csv(r: &BenchReport) -> String {
    let mut s = String::from("section,n,max_mult,total_mass,sab_or_compact_secs,imab_or_expanded_secs,value\n");
    for row in &r.scaling {
        writeln!(s, "scaling,{},,,{},{},", row.n, row.sab_secs, row.imab_secs).unwrap();
    }
    writeln!(s, "slope_sab,,,,,,{}", r.sab_slope).unwrap();
    writeln!(s, "slope_imab,,,,,,{}", r.imab_slope).unwrap();
    for row in &r.compact {
        writeln!(
            s,
            "compact,{},{},{},{},{},{}",
            row.distinct,
            row.max_mult,
            row.total_mass,
            row.compact_secs,
            row.expanded_secs,
            row.speedup()
        )
        .unwrap();
    }
    s
}

pub fn render_bench_table(r: &BenchReport) -> String {
    let mut s = String::new();
    writeln!(s, "{:>6} {:>12} {:>12}", "n", "SAB (s)", "IMAB (s)").unwrap();
    for row in &r.scaling {
        writeln!(s, "{:>6} {:>12.6} {:>12.6}", row.n, row.sab_secs, row.imab_secs).unwrap();
    }
    writeln!(s, "log-log slope: SAB {:.3}, IMAB {:.3}\n", r.sab_slope, r.imab_slope).unwrap();
    writeln!(s, "{:>5} {:>6} {:>8} {:>12} {:>12} {:>9}", "m", "|X|", "mass", "compact (s)", "list (s)", "speedup").unwrap();
    for row in &r.compact {
        writeln!(
            s,
            "{:>5} {:>6} {:>8} {:>12.6} {:>12.6} {:>9.2}",
            row.max_mult,
            row.distinct,
            row.total_mass,
            row.compact_secs,
            row.expanded_secs,
            row.speedup()
        )
        .unwrap();
    }
    s
}
