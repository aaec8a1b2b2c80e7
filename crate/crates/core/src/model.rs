//! The full Multiset Transformer (embedding → equivariant blocks → invariant
//! pooling) and the multi-stream graph classifier built from it.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::attention::BiasConfig;
use crate::blocks::{imab_tape, mab_q_tape, sab_tape, BlockParams, ImabParams, LnVariant};
use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::param::init_uniform;
use crate::numerics::{Matrix, ParamId, ParamStore, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BlockKind {
    Sab,
    #[default]
    Imab,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MstConfig {
    /// Width of the raw input points (2 for persistence diagrams).
    pub input_dim: usize,
    pub hidden: usize,
    pub heads: usize,
    /// Number of equivariant blocks.
    pub equivariant_layers: usize,
    pub block_kind: BlockKind,
    /// Induced queries inside each IMAB.
    pub induced_queries: usize,
    /// Learnable queries of the invariant pooling layer.
    pub pool_queries: usize,
    pub variant: LnVariant,
    /// `false` gives the without-multiplicity model: no bias and all
    /// multiplicities forced to one.
    pub bias_enabled: bool,
    /// Also feed multiplicities to the equivariant blocks, not only the
    /// invariant pooling layer.
    pub bias_in_equivariant: bool,
    pub bias_eps: f64,
}

impl Default for MstConfig {
    fn default() -> Self {
        Self {
            input_dim: 2,
            hidden: 16,
            heads: 2,
            equivariant_layers: 1,
            block_kind: BlockKind::Imab,
            induced_queries: 4,
            pool_queries: 1,
            variant: LnVariant::PostLn,
            bias_enabled: true,
            bias_in_equivariant: false,
            bias_eps: crate::attention::DEFAULT_BIAS_EPS,
        }
    }
}

impl MstConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(MstError::Config(m));
        if self.input_dim == 0 {
            return bad("input dimension must be >= 1".into());
        }
        if self.equivariant_layers == 0 {
            return bad("need at least one equivariant layer".into());
        }
        if self.heads == 0 || self.hidden == 0 || !self.hidden.is_multiple_of(self.heads) {
            return bad(format!("hidden width {} must be a positive multiple of {} heads", self.hidden, self.heads));
        }
        if self.pool_queries == 0 {
            return bad("invariant layer needs at least one query".into());
        }
        if self.block_kind == BlockKind::Imab && self.induced_queries == 0 {
            return bad("IMAB needs at least one induced query".into());
        }
        BiasConfig::new(self.bias_eps, self.bias_enabled)?;
        Ok(())
    }

    /// Number of scalars in the flattened representation.
    pub fn representation_len(&self) -> usize {
        self.pool_queries * self.hidden
    }

    pub fn without_mult(&self) -> Self {
        Self {
            bias_enabled: false,
            ..self.clone()
        }
    }

    fn pool_bias(&self) -> BiasConfig {
        BiasConfig {
            epsilon: self.bias_eps,
            enabled: self.bias_enabled,
        }
    }

    fn equivariant_bias(&self) -> BiasConfig {
        BiasConfig {
            epsilon: self.bias_eps,
            enabled: self.bias_enabled && self.bias_in_equivariant,
        }
    }
}

#[derive(Clone, Debug)]
pub enum EquivariantBlock {
    Sab(BlockParams),
    Imab(ImabParams),
}

/// One Multiset Transformer; its parameters live in a shared [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Mst {
    pub config: MstConfig,
    pub embed_w: ParamId,
    pub embed_b: ParamId,
    pub blocks: Vec<EquivariantBlock>,
    pub pool: BlockParams,
}

impl Mst {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, config: MstConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let embed_w = store.add(format!("{prefix}/embed/w"), init_uniform(rng, c.input_dim, c.hidden));
        let embed_b = store.add(format!("{prefix}/embed/b"), Matrix::zeros(1, c.hidden));
        let mut blocks = Vec::with_capacity(c.equivariant_layers);
        for l in 0..c.equivariant_layers {
            let p = format!("{prefix}/eq{l}");
            blocks.push(match c.block_kind {
                BlockKind::Sab => {
                    EquivariantBlock::Sab(BlockParams::init_mab(store, &p, c.hidden, c.heads, c.variant, rng)?)
                }
                BlockKind::Imab => EquivariantBlock::Imab(ImabParams::init(
                    store,
                    &p,
                    c.hidden,
                    c.heads,
                    c.induced_queries,
                    c.variant,
                    rng,
                )?),
            });
        }
        let pool = BlockParams::init_mab_q(
            store,
            &format!("{prefix}/pool"),
            c.hidden,
            c.heads,
            c.pool_queries,
            c.variant,
            rng,
        )?;
        Ok(Self {
            config,
            embed_w,
            embed_b,
            blocks,
            pool,
        })
    }

    /// Records the forward pass on `tape`; the result is `pool_queries × hidden`.
    pub fn forward_tape(&self, tape: &mut Tape, store: &ParamStore, x: &Multiset) -> Result<Var> {
        let c = &self.config;
        if x.is_empty() {
            return Err(MstError::Validation("model input multiset is empty".into()));
        }
        if x.dim() != c.input_dim {
            return Err(MstError::Dimension {
                op: "mst_forward",
                left: x.base().shape(),
                right: (c.input_dim, c.hidden),
            });
        }
        let mult = if c.bias_enabled { x.mult_f64() } else { vec![1.0; x.len()] };
        let xv = tape.constant(x.base().clone());
        let w = tape.param(store, self.embed_w);
        let b = tape.param(store, self.embed_b);
        let h = tape.matmul(xv, w)?;
        let mut h = tape.add_row(h, b)?;
        let eq_bias = c.equivariant_bias();
        for block in &self.blocks {
            h = match block {
                EquivariantBlock::Sab(p) => sab_tape(tape, store, h, &mult, p, eq_bias)?,
                EquivariantBlock::Imab(p) => imab_tape(tape, store, h, &mult, p, eq_bias)?,
            };
        }
        mab_q_tape(tape, store, h, &mult, &self.pool, c.pool_bias())
    }

    pub fn forward(&self, store: &ParamStore, x: &Multiset) -> Result<Matrix> {
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, store, x)?;
        Ok(tape.value(out).clone())
    }
}

/// Representation of `x` under `model`.
pub fn mst_forward(x: &Multiset, model: &Mst, store: &ParamStore) -> Result<Matrix> {
    model.forward(store, x)
}

/// The same pipeline with the bias disabled and the base set alone as input.
pub fn mst_without_mult(x: &Multiset, model: &Mst, store: &ParamStore) -> Result<Matrix> {
    let ablated = Mst {
        config: model.config.without_mult(),
        ..model.clone()
    };
    ablated.forward(store, &x.as_set())
}

/// A diagram with no points becomes a single diagonal point at the origin.
pub fn sentinel_if_empty(x: &Multiset) -> Multiset {
    if x.is_empty() {
        Multiset::from_set(Matrix::zeros(1, x.dim().max(1))).expect("valid sentinel")
    } else {
        x.clone()
    }
}

/// One MST per input stream; flattened representations (plus optional
/// side features) are concatenated and fed to a single affine layer.
#[derive(Clone, Debug)]
pub struct GraphClassifier {
    pub streams: Vec<Mst>,
    pub side_features: usize,
    pub classes: usize,
    pub fc_w: ParamId,
    pub fc_b: ParamId,
}

impl GraphClassifier {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        config: &MstConfig,
        n_streams: usize,
        side_features: usize,
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_streams == 0 {
            return Err(MstError::Config("classifier needs at least one stream".into()));
        }
        if classes < 2 {
            return Err(MstError::Config(format!("need at least two classes, got {classes}")));
        }
        let streams = (0..n_streams)
            .map(|s| Mst::init(store, &format!("stream{s}"), config.clone(), rng))
            .collect::<Result<Vec<_>>>()?;
        let fan_in = n_streams * config.representation_len() + side_features;
        let fc_w = store.add("fc/w", init_uniform(rng, fan_in, classes));
        let fc_b = store.add("fc/b", Matrix::zeros(1, classes));
        Ok(Self {
            streams,
            side_features,
            classes,
            fc_w,
            fc_b,
        })
    }

    pub fn fc_input_len(&self) -> usize {
        self.streams.iter().map(|m| m.config.representation_len()).sum::<usize>() + self.side_features
    }

    /// Returns a `1 × classes` logits node.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        streams: &[Multiset],
        side: Option<&[f64]>,
    ) -> Result<Var> {
        if streams.len() != self.streams.len() {
            return Err(MstError::Validation(format!(
                "classifier has {} streams, got {}",
                self.streams.len(),
                streams.len()
            )));
        }
        let side_len = side.map_or(0, <[f64]>::len);
        if side_len != self.side_features {
            return Err(MstError::Validation(format!(
                "classifier expects {} side features, got {side_len}",
                self.side_features
            )));
        }
        let mut parts = Vec::with_capacity(streams.len() + 1);
        for (model, x) in self.streams.iter().zip(streams) {
            let r = model.forward_tape(tape, store, &sentinel_if_empty(x))?;
            parts.push(tape.flatten(r)?);
        }
        if let Some(s) = side.filter(|s| !s.is_empty()) {
            parts.push(tape.constant(Matrix::row_vector(s)));
        }
        let feats = if parts.len() == 1 { parts[0] } else { tape.concat_cols(&parts)? };
        let w = tape.param(store, self.fc_w);
        let b = tape.param(store, self.fc_b);
        let logits = tape.matmul(feats, w)?;
        tape.add_row(logits, b)
    }

    pub fn logits(&self, store: &ParamStore, streams: &[Multiset], side: Option<&[f64]>) -> Result<Vec<f64>> {
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, store, streams, side)?;
        Ok(tape.value(out).as_slice().to_vec())
    }

    pub fn predict(&self, store: &ParamStore, streams: &[Multiset], side: Option<&[f64]>) -> Result<usize> {
        Ok(argmax(&self.logits(store, streams, side)?))
    }
}

pub fn classify_graph(
    streams: &[Multiset],
    clf: &GraphClassifier,
    store: &ParamStore,
    side: Option<&[f64]>,
) -> Result<Vec<f64>> {
    clf.logits(store, streams, side)
}

/// Index of the largest value; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

const CHECKPOINT_MAGIC: &str = "mst-checkpoint 1";

/// Text dump of every parameter: a magic line, then per parameter a
/// `<name> <rows> <cols>` header line and one line of shortest round-trip
/// decimal values.
pub fn checkpoint_to_string(store: &ParamStore) -> String {
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
    for (_, name, p) in store.iter() {
        writeln!(out, "{name} {} {}", p.value.rows(), p.value.cols()).unwrap();
        let vals: Vec<String> = p.value.as_slice().iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", vals.join(" ")).unwrap();
    }
    out
}

/// Restores values into `store`; names and shapes must match exactly.
pub fn checkpoint_from_str(store: &mut ParamStore, text: &str) -> Result<()> {
    let err = |m: String| MstError::Checkpoint(m);
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(err("missing or unsupported checkpoint header".into()));
    }
    let mut seen = 0usize;
    while let Some(header) = lines.next() {
        if header.is_empty() {
            continue;
        }
        let fields: Vec<&str> = header.split(' ').collect();
        let [name, rows, cols] = fields[..] else {
            return Err(err(format!("bad parameter header {header:?}")));
        };
        let id = store.find(name).ok_or_else(|| err(format!("unknown parameter {name}")))?;
        let shape: (usize, usize) = (
            rows.parse().map_err(|_| err(format!("bad row count in {header:?}")))?,
            cols.parse().map_err(|_| err(format!("bad column count in {header:?}")))?,
        );
        if shape != store.value(id).shape() {
            return Err(err(format!("{name}: shape {shape:?} does not match model {:?}", store.value(id).shape())));
        }
        let body = lines.next().ok_or_else(|| err(format!("{name}: missing values")))?;
        let vals = body
            .split_whitespace()
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| err(format!("{name}: {e}")))?;
        store.get_mut(id).value = Matrix::new(shape.0, shape.1, vals).map_err(|e| err(format!("{name}: {e}")))?;
        seen += 1;
    }
    if seen != store.len() {
        return Err(err(format!("checkpoint holds {seen} parameters, model has {}", store.len())));
    }
    Ok(())
}

pub fn save_checkpoint(store: &ParamStore, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_to_string(store)).map_err(|e| MstError::io(path, e))
}

pub fn load_checkpoint(store: &mut ParamStore, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| MstError::io(path, e))?;
    checkpoint_from_str(store, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, relative_error};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_multiset(rng: &mut ChaCha8Rng, n: usize, max_mult: u64) -> Multiset {
        let base = Matrix::from_fn(n, 2, |_, _| rng.random_range(0.0..1.0));
        let mult = (0..n).map(|_| rng.random_range(1..=max_mult)).collect();
        Multiset::new(base, mult).unwrap()
    }

    fn wake_bias(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
        let ids: Vec<_> = store.ids().filter(|&id| store.name(id).ends_with("/alpha")).collect();
        for id in ids {
            store.get_mut(id).value = Matrix::scalar(rng.random_range(0.5..2.0));
        }
    }

    fn configs() -> Vec<MstConfig> {
        let mut out = Vec::new();
        for kind in [BlockKind::Sab, BlockKind::Imab] {
            for variant in [LnVariant::PostLn, LnVariant::PreLn] {
                for bias_in_equivariant in [false, true] {
                    out.push(MstConfig {
                        hidden: 8,
                        heads: 2,
                        equivariant_layers: 2,
                        block_kind: kind,
                        induced_queries: 3,
                        pool_queries: 2,
                        variant,
                        bias_in_equivariant,
                        ..MstConfig::default()
                    });
                }
            }
        }
        out
    }

    #[test]
    fn config_validation() {
        assert!(MstConfig::default().validate().is_ok());
        let bad = [
            MstConfig { equivariant_layers: 0, ..Default::default() },
            MstConfig { hidden: 10, heads: 4, ..Default::default() },
            MstConfig { pool_queries: 0, ..Default::default() },
            MstConfig { induced_queries: 0, ..Default::default() },
            MstConfig { bias_eps: 0.0, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(MstError::Config(_))), "{c:?}");
        }
    }

    #[test]
    fn representation_is_invariant_for_every_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for cfg in configs() {
            let mut store = ParamStore::new();
            let m = Mst::init(&mut store, "m", cfg.clone(), &mut rng).unwrap();
            wake_bias(&mut store, &mut rng);
            for _ in 0..25 {
                let n = rng.random_range(1..=8);
                let x = rand_multiset(&mut rng, n, 100);
                let mut sigma: Vec<usize> = (0..n).collect();
                sigma.shuffle(&mut rng);
                let r = mst_forward(&x, &m, &store).unwrap();
                assert_eq!(r.shape(), (cfg.pool_queries, cfg.hidden));
                let pr = mst_forward(&x.permute(&sigma).unwrap(), &m, &store).unwrap();
                assert!(pr.max_abs_diff(&r) <= 1e-9, "{cfg:?}");
                let w = mst_without_mult(&x, &m, &store).unwrap();
                let pw = mst_without_mult(&x.permute(&sigma).unwrap(), &m, &store).unwrap();
                assert!(pw.max_abs_diff(&w) <= 1e-9);
            }
        }
    }

    #[test]
    fn sets_match_bias_disabled_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for cfg in configs() {
            let mut store = ParamStore::new();
            let m = Mst::init(&mut store, "m", cfg, &mut rng).unwrap();
            wake_bias(&mut store, &mut rng);
            let x = rand_multiset(&mut rng, 6, 1);
            assert_eq!(mst_forward(&x, &m, &store).unwrap(), mst_without_mult(&x, &m, &store).unwrap());
        }
    }

    #[test]
    fn without_mult_is_forward_on_base_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut store = ParamStore::new();
        let m = Mst::init(&mut store, "m", MstConfig::default(), &mut rng).unwrap();
        let x = rand_multiset(&mut rng, 5, 30);
        assert_eq!(mst_without_mult(&x, &m, &store).unwrap(), mst_forward(&x.as_set(), &m, &store).unwrap());
    }

    #[test]
    fn equal_multisets_built_differently_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mut store = ParamStore::new();
        let m = Mst::init(&mut store, "m", MstConfig::default(), &mut rng).unwrap();
        wake_bias(&mut store, &mut rng);
        let (a, b, c) = ([0.1, 0.5], [0.3, 0.9], [0.7, 0.2]);
        let x = Multiset::canonicalize(&Matrix::from_rows(&[a, b, a, c, b, a]), &[1, 2, 1, 1, 1, 3]).unwrap();
        let y = Multiset::canonicalize(&Matrix::from_rows(&[c, b, a, b]), &[1, 1, 5, 2]).unwrap();
        assert!(x.same_multiset(&y));
        let rx = mst_forward(&x, &m, &store).unwrap();
        let ry = mst_forward(&y, &m, &store).unwrap();
        assert!(rx.max_abs_diff(&ry) <= 1e-9);
    }

    #[test]
    fn bumping_one_multiplicity_changes_the_representation() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for cfg in configs() {
            let mut store = ParamStore::new();
            let m = Mst::init(&mut store, "m", cfg, &mut rng).unwrap();
            wake_bias(&mut store, &mut rng);
            let x = rand_multiset(&mut rng, 5, 10);
            let mut mult = x.mult().to_vec();
            mult[2] += 7;
            let y = Multiset::new(x.base().clone(), mult).unwrap();
            let d = mst_forward(&x, &m, &store).unwrap().max_abs_diff(&mst_forward(&y, &m, &store).unwrap());
            assert!(d > 1e-6, "{d}");
        }
    }

    #[test]
    fn empty_input_is_rejected_and_sentinel_replaces_it() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let mut store = ParamStore::new();
        let m = Mst::init(&mut store, "m", MstConfig::default(), &mut rng).unwrap();
        let empty = Multiset::new(Matrix::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(mst_forward(&empty, &m, &store), Err(MstError::Validation(_))));
        let s = sentinel_if_empty(&empty);
        assert_eq!(s.base(), &Matrix::zeros(1, 2));
        assert_eq!(s.mult(), &[1]);
    }

    #[test]
    fn classifier_logits_are_invariant_and_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let mut store = ParamStore::new();
        let clf = GraphClassifier::init(&mut store, &MstConfig::default(), 2, 3, 2, &mut rng).unwrap();
        wake_bias(&mut store, &mut rng);
        assert_eq!(clf.fc_input_len(), 2 * 16 + 3);
        let side = [0.1, 0.2, 0.3];
        for _ in 0..20 {
            let xs = [rand_multiset(&mut rng, 6, 50), rand_multiset(&mut rng, 4, 50)];
            let l = classify_graph(&xs, &clf, &store, Some(&side)).unwrap();
            assert_eq!(l.len(), 2);
            let mut s0: Vec<usize> = (0..6).collect();
            s0.shuffle(&mut rng);
            let mut s1: Vec<usize> = (0..4).collect();
            s1.shuffle(&mut rng);
            let ps = [xs[0].permute(&s0).unwrap(), xs[1].permute(&s1).unwrap()];
            let pl = classify_graph(&ps, &clf, &store, Some(&side)).unwrap();
            assert!(l.iter().zip(&pl).all(|(a, b)| (a - b).abs() <= 1e-9));
        }
        let one = [rand_multiset(&mut rng, 3, 2)];
        assert!(clf.logits(&store, &one, Some(&side)).is_err());
        let two = [rand_multiset(&mut rng, 3, 2), rand_multiset(&mut rng, 3, 2)];
        assert!(clf.logits(&store, &two, None).is_err());
    }

    #[test]
    fn zero_fc_weights_give_constant_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let mut store = ParamStore::new();
        let clf = GraphClassifier::init(&mut store, &MstConfig::default(), 1, 0, 3, &mut rng).unwrap();
        let n = store.value(clf.fc_w).rows();
        store.get_mut(clf.fc_w).value = Matrix::zeros(n, 3);
        store.get_mut(clf.fc_b).value = Matrix::row_vector(&[0.5, -1.0, 2.0]);
        for _ in 0..5 {
            let x = [rand_multiset(&mut rng, 5, 9)];
            assert_eq!(clf.logits(&store, &x, None).unwrap(), vec![0.5, -1.0, 2.0]);
        }
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let cfg = MstConfig {
            hidden: 4,
            heads: 2,
            equivariant_layers: 1,
            induced_queries: 2,
            pool_queries: 2,
            bias_in_equivariant: true,
            ..MstConfig::default()
        };
        let mut store = ParamStore::new();
        let clf = GraphClassifier::init(&mut store, &cfg, 2, 1, 2, &mut rng).unwrap();
        wake_bias(&mut store, &mut rng);
        let xs = [rand_multiset(&mut rng, 4, 20), rand_multiset(&mut rng, 3, 20)];
        let side = [0.4];
        let loss = |s: &ParamStore, t: &mut Tape| {
            let l = clf.forward_tape(t, s, &xs, Some(&side)).unwrap();
            t.cross_entropy(l, &[1]).unwrap()
        };
        let mut t = Tape::new();
        let l = loss(&store, &mut t);
        let g = t.backward(l);
        let mut acc = store.clone();
        acc.zero_grad();
        t.accumulate_param_grads(&g, &mut acc, 1.0);
        for id in store.ids() {
            let fd = finite_diff_grad(
                |v| {
                    let mut s2 = store.clone();
                    s2.get_mut(id).value = v.clone();
                    let mut t = Tape::new();
                    let l = loss(&s2, &mut t);
                    t.value(l).get(0, 0)
                },
                store.value(id),
            );
            let err = relative_error(&acc.get(id).grad, &fd);
            assert!(err <= 1e-4, "{}: {err}", store.name(id));
        }
    }

    #[test]
    fn checkpoint_round_trip_and_rejections() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut store = ParamStore::new();
        GraphClassifier::init(&mut store, &MstConfig::default(), 2, 0, 2, &mut rng).unwrap();
        let text = checkpoint_to_string(&store);
        let mut fresh = ParamStore::new();
        GraphClassifier::init(&mut fresh, &MstConfig::default(), 2, 0, 2, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        checkpoint_from_str(&mut fresh, &text).unwrap();
        for id in store.ids() {
            assert_eq!(store.value(id), fresh.value(id));
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&store, &path).unwrap();
        load_checkpoint(&mut fresh, &path).unwrap();

        let mut other = ParamStore::new();
        let cfg = MstConfig { hidden: 8, ..MstConfig::default() };
        GraphClassifier::init(&mut other, &cfg, 2, 0, 2, &mut rng).unwrap();
        assert!(matches!(checkpoint_from_str(&mut other, &text), Err(MstError::Checkpoint(_))));
        assert!(checkpoint_from_str(&mut fresh, "garbage").is_err());
        assert!(matches!(load_checkpoint(&mut fresh, &dir.path().join("missing")), Err(MstError::Io { .. })));
    }

    #[test]
    fn argmax_prefers_first_of_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[-1.0]), 0);
    }
}
