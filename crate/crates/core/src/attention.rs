//! Scaled dot-product attention and its multiset-enhanced variants.
//!
//! Two bias terms inject multiplicities into the attention weights after the
//! softmax:
//!
//! * self/cross attention `A(Q, X) = (softmax(Q Xᵀ/√d) + α B) X` with
//!   `B = (M_Q − 1)(M_X − 1)ᵀ / (‖(M_Q − 1)(M_X − 1)ᵀ‖_F + ε)`;
//! * learnable-query attention `A_Q(X) = (softmax(Q Xᵀ/√d) + B) X` with
//!   `B = M_α (M_X − 1)ᵀ / (‖M_α (M_X − 1)ᵀ‖_F + ε)`.
//!
//! Both biases vanish exactly when the multiplicities are all one, so the
//! blocks degrade to plain attention on sets. The combined weights are not
//! renormalized.

use rand::Rng;

use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::param::{init_normal, init_uniform};
use crate::numerics::{softmax_rows, Matrix, ParamId, ParamStore, Tape, Var};

pub const DEFAULT_BIAS_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasConfig {
    pub epsilon: f64,
    pub enabled: bool,
}

impl Default for BiasConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_BIAS_EPS,
            enabled: true,
        }
    }
}

impl BiasConfig {
    pub fn new(epsilon: f64, enabled: bool) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(MstError::Config(format!("bias epsilon must be > 0, got {epsilon}")));
        }
        Ok(Self { epsilon, enabled })
    }

    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }
}

/// Projection matrices for one head.
#[derive(Clone, Debug)]
pub struct HeadProjection {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
}

#[derive(Clone, Debug)]
pub struct MultiheadParams {
    pub heads: Vec<HeadProjection>,
    /// W^O, (Σ head widths) × output width.
    pub output: ParamId,
}

impl MultiheadParams {
    /// `heads` heads of width `dim / heads`, output width `dim`.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if heads == 0 || !dim.is_multiple_of(heads) {
            return Err(MstError::Config(format!(
                "hidden width {dim} is not divisible by {heads} heads"
            )));
        }
        let width = dim / heads;
        let heads = (0..heads)
            .map(|h| HeadProjection {
                wq: store.add(format!("{prefix}/head{h}/wq"), init_uniform(rng, dim, width)),
                wk: store.add(format!("{prefix}/head{h}/wk"), init_uniform(rng, dim, width)),
                wv: store.add(format!("{prefix}/head{h}/wv"), init_uniform(rng, dim, width)),
            })
            .collect();
        let output = store.add(format!("{prefix}/wo"), init_uniform(rng, dim, dim));
        Ok(Self { heads, output })
    }
}

#[derive(Clone, Debug)]
pub enum BiasParams {
    /// Scalar α scaling the multiplicity bias of `A(Q, X)`.
    Scaled { alpha: ParamId },
    /// Learnable queries `Q` (n_q × d) and their bias weights `M_α` (n_q × 1).
    LearnableQuery { query: ParamId, m_alpha: ParamId },
}

#[derive(Clone, Debug)]
pub struct AttentionParams {
    /// `None` applies the attention formula directly to the inputs.
    pub multihead: Option<MultiheadParams>,
    pub bias: BiasParams,
}

impl AttentionParams {
    /// Parameters for `A(Q, X)`; α starts at zero.
    pub fn init_scaled<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let multihead = Some(MultiheadParams::init(store, &format!("{prefix}/proj"), dim, heads, rng)?);
        let alpha = store.add(format!("{prefix}/alpha"), Matrix::scalar(0.0));
        Ok(Self {
            multihead,
            bias: BiasParams::Scaled { alpha },
        })
    }

    /// Parameters for `A_Q(X)` with `n_queries` learnable queries.
    pub fn init_learnable_query<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        n_queries: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if n_queries == 0 {
            return Err(MstError::Config("learnable-query attention needs at least one query".into()));
        }
        let multihead = Some(MultiheadParams::init(store, &format!("{prefix}/proj"), dim, heads, rng)?);
        let query = store.add(
            format!("{prefix}/query"),
            init_normal(rng, n_queries, dim, 1.0 / (dim as f64).sqrt()),
        );
        let m_alpha = store.add(format!("{prefix}/m_alpha"), init_normal(rng, n_queries, 1, 0.1));
        Ok(Self {
            multihead,
            bias: BiasParams::LearnableQuery { query, m_alpha },
        })
    }

    pub fn query(&self) -> Option<ParamId> {
        match self.bias {
            BiasParams::LearnableQuery { query, .. } => Some(query),
            BiasParams::Scaled { .. } => None,
        }
    }
}

/// `softmax(q kᵀ / √d_k) · v`, on plain matrices.
pub fn scaled_dot_attention(q: &Matrix, k: &Matrix, v: &Matrix) -> Result<Matrix> {
    if k.rows() != v.rows() {
        return Err(MstError::Dimension {
            op: "scaled_dot_attention",
            left: k.shape(),
            right: v.shape(),
        });
    }
    let scale = 1.0 / (k.cols() as f64).sqrt();
    let scores = q.matmul_t(k)?.scale(scale);
    softmax_rows(&scores).matmul(v)
}

/// `(mq − 1)(mx − 1)ᵀ / (‖·‖_F + eps)`, an n×m matrix with Frobenius norm < 1.
pub fn multiplicity_bias(mq: &[f64], mx: &[f64], eps: f64) -> Matrix {
    let mut out = Matrix::from_fn(mq.len(), mx.len(), |i, j| (mq[i] - 1.0) * (mx[j] - 1.0));
    let denom = out.frobenius_norm() + eps;
    out.as_mut_slice().iter_mut().for_each(|v| *v /= denom);
    out
}

fn all_ones(m: &[f64]) -> bool {
    m.iter().all(|&v| v == 1.0)
}

/// Tape version of [`scaled_dot_attention`] with an optional additive bias
/// on the post-softmax weights.
pub fn attend(tape: &mut Tape, q: Var, k: Var, v: Var, bias: Option<Var>) -> Result<Var> {
    let dk = tape.value(k).cols();
    let scores = tape.matmul_t(q, k, 1.0 / (dk as f64).sqrt())?;
    let mut weights = tape.softmax_rows(scores);
    if let Some(b) = bias {
        weights = tape.add(weights, b)?;
    }
    tape.matmul(weights, v)
}

/// `Concat(head_1, …, head_h) · W^O` where every head sees the same bias.
pub fn multihead(
    tape: &mut Tape,
    store: &ParamStore,
    q: Var,
    kv: Var,
    bias: Option<Var>,
    params: &MultiheadParams,
) -> Result<Var> {
    let mut outs = Vec::with_capacity(params.heads.len());
    for head in &params.heads {
        let wq = tape.param(store, head.wq);
        let wk = tape.param(store, head.wk);
        let wv = tape.param(store, head.wv);
        let qh = tape.matmul(q, wq)?;
        let kh = tape.matmul(kv, wk)?;
        let vh = tape.matmul(kv, wv)?;
        outs.push(attend(tape, qh, kh, vh, bias)?);
    }
    let cat = if outs.len() == 1 {
        outs[0]
    } else {
        tape.concat_cols(&outs)?
    };
    let wo = tape.param(store, params.output);
    tape.matmul(cat, wo)
}

fn check_feature_dims(tape: &Tape, q: Var, x: Var, op: &'static str) -> Result<()> {
    let (qs, xs) = (tape.value(q).shape(), tape.value(x).shape());
    if qs.1 != xs.1 {
        return Err(MstError::Dimension {
            op,
            left: qs,
            right: xs,
        });
    }
    Ok(())
}

fn check_mult_len(tape: &Tape, x: Var, m: &[f64], op: &'static str) -> Result<()> {
    let xs = tape.value(x).shape();
    if xs.0 != m.len() {
        return Err(MstError::Dimension {
            op,
            left: xs,
            right: (m.len(), 1),
        });
    }
    Ok(())
}

/// `α · B(M_Q, M_X)` as a tape node, or `None` when it is identically zero.
pub fn scaled_bias(
    tape: &mut Tape,
    store: &ParamStore,
    alpha: ParamId,
    mq: &[f64],
    mx: &[f64],
    cfg: BiasConfig,
) -> Result<Option<Var>> {
    if !cfg.enabled || all_ones(mq) || all_ones(mx) {
        return Ok(None);
    }
    let b = tape.constant(multiplicity_bias(mq, mx, cfg.epsilon));
    let alpha = tape.param(store, alpha);
    Ok(Some(tape.mul_scalar(b, alpha)?))
}

/// `M_α (M_X − 1)ᵀ / (‖·‖_F + ε)` as a tape node differentiable in `M_α`.
pub fn learnable_query_bias(
    tape: &mut Tape,
    store: &ParamStore,
    m_alpha: ParamId,
    mx: &[f64],
    cfg: BiasConfig,
) -> Result<Option<Var>> {
    if !cfg.enabled || all_ones(mx) {
        return Ok(None);
    }
    let ma = tape.param(store, m_alpha);
    let centered: Vec<f64> = mx.iter().map(|m| m - 1.0).collect();
    let mx = tape.constant(Matrix::column(&centered));
    let outer = tape.matmul_t(ma, mx, 1.0)?;
    let norm = tape.frobenius_norm(outer);
    let denom = tape.add_const(norm, cfg.epsilon);
    Ok(Some(tape.div_scalar(outer, denom)?))
}

/// Multiset-enhanced attention `A(Q, X)` on tape nodes.
#[allow(clippy::too_many_arguments)]
pub fn multiset_attention(
    tape: &mut Tape,
    store: &ParamStore,
    q: Var,
    mq: &[f64],
    x: Var,
    mx: &[f64],
    params: &AttentionParams,
    cfg: BiasConfig,
) -> Result<Var> {
    check_feature_dims(tape, q, x, "multiset_attention")?;
    check_mult_len(tape, q, mq, "multiset_attention")?;
    check_mult_len(tape, x, mx, "multiset_attention")?;
    let BiasParams::Scaled { alpha } = params.bias else {
        return Err(MstError::Config("multiset_attention needs scaled-bias parameters".into()));
    };
    let bias = scaled_bias(tape, store, alpha, mq, mx, cfg)?;
    match &params.multihead {
        Some(mh) => multihead(tape, store, q, x, bias, mh),
        None => attend(tape, q, x, x, bias),
    }
}

/// Learnable-query attention `A_Q(X)`; `query` is the (possibly normalized)
/// query node, usually `tape.param(store, params.query())`.
pub fn learnable_query_attention(
    tape: &mut Tape,
    store: &ParamStore,
    query: Var,
    x: Var,
    mx: &[f64],
    params: &AttentionParams,
    cfg: BiasConfig,
) -> Result<Var> {
    check_feature_dims(tape, query, x, "learnable_query_attention")?;
    check_mult_len(tape, x, mx, "learnable_query_attention")?;
    if tape.value(x).rows() == 0 {
        return Err(MstError::Validation("learnable-query attention on an empty input".into()));
    }
    let BiasParams::LearnableQuery { m_alpha, .. } = params.bias else {
        return Err(MstError::Config("learnable_query_attention needs learnable-query parameters".into()));
    };
    let bias = learnable_query_bias(tape, store, m_alpha, mx, cfg)?;
    match &params.multihead {
        Some(mh) => multihead(tape, store, query, x, bias, mh),
        None => attend(tape, query, x, x, bias),
    }
}

/// Evaluates `A(Q, X)` for two multisets on a fresh tape.
pub fn multiset_attention_value(
    q: &Multiset,
    x: &Multiset,
    store: &ParamStore,
    params: &AttentionParams,
    cfg: BiasConfig,
) -> Result<Matrix> {
    let mut tape = Tape::new();
    let qv = tape.constant(q.base().clone());
    let xv = tape.constant(x.base().clone());
    let out = multiset_attention(&mut tape, store, qv, &q.mult_f64(), xv, &x.mult_f64(), params, cfg)?;
    Ok(tape.value(out).clone())
}

/// Evaluates `A_Q(X)` on a fresh tape.
pub fn learnable_query_attention_value(
    x: &Multiset,
    store: &ParamStore,
    params: &AttentionParams,
    cfg: BiasConfig,
) -> Result<Matrix> {
    let query = params
        .query()
        .ok_or_else(|| MstError::Config("learnable_query_attention needs learnable-query parameters".into()))?;
    let mut tape = Tape::new();
    let q = tape.param(store, query);
    let xv = tape.constant(x.base().clone());
    let out = learnable_query_attention(&mut tape, store, q, xv, &x.mult_f64(), params, cfg)?;
    Ok(tape.value(out).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, relative_error};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn rand_multiset(rng: &mut ChaCha8Rng, n: usize, d: usize, max_mult: u64) -> Multiset {
        let mult = (0..n).map(|_| rng.random_range(1..=max_mult)).collect();
        Multiset::new(rand_matrix(rng, n, d), mult).unwrap()
    }

    /// Single-head parameters with no projections and a chosen α.
    fn direct_scaled(store: &mut ParamStore, alpha: f64) -> AttentionParams {
        AttentionParams {
            multihead: None,
            bias: BiasParams::Scaled {
                alpha: store.add("alpha", Matrix::scalar(alpha)),
            },
        }
    }

    fn direct_query(store: &mut ParamStore, rng: &mut ChaCha8Rng, nq: usize, d: usize) -> AttentionParams {
        AttentionParams {
            multihead: None,
            bias: BiasParams::LearnableQuery {
                query: store.add("query", rand_matrix(rng, nq, d)),
                m_alpha: store.add("m_alpha", rand_matrix(rng, nq, 1)),
            },
        }
    }

    #[test]
    fn single_key_returns_its_value() {
        let q = Matrix::from_rows(&[[0.3, -2.0], [5.0, 1.0]]);
        let k = Matrix::from_rows(&[[1.0, 1.0]]);
        let v = Matrix::from_rows(&[[7.0, -3.0, 2.0]]);
        let out = scaled_dot_attention(&q, &k, &v).unwrap();
        assert_eq!(out, Matrix::from_rows(&[[7.0, -3.0, 2.0], [7.0, -3.0, 2.0]]));
    }

    #[test]
    fn orthogonal_query_averages_values() {
        let q = Matrix::from_rows(&[[0.0, 1.0]]);
        let k = Matrix::from_rows(&[[1.0, 0.0], [2.0, 0.0], [-3.0, 0.0]]);
        let v = Matrix::from_rows(&[[1.0], [2.0], [6.0]]);
        let out = scaled_dot_attention(&q, &k, &v).unwrap();
        assert!((out.get(0, 0) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn two_queries_three_keys_by_hand() {
        let q = Matrix::from_rows(&[[1.0, 0.0], [0.0, 2.0]]);
        let k = Matrix::from_rows(&[[1.0, 1.0], [0.0, 1.0], [2.0, 0.0]]);
        let v = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // row 0 scores (1, 0, 2)/√2; row 1 scores (2, 2, 0)/√2
        let expected = |scores: [f64; 3]| {
            let e: Vec<f64> = scores.iter().map(|x| (x * s).exp()).collect();
            let z: f64 = e.iter().sum();
            [(e[0] + e[2]) / z, (e[1] + e[2]) / z]
        };
        let out = scaled_dot_attention(&q, &k, &v).unwrap();
        let r0 = expected([1.0, 0.0, 2.0]);
        let r1 = expected([2.0, 2.0, 0.0]);
        for (c, want) in r0.iter().enumerate() {
            assert!((out.get(0, c) - want).abs() < 1e-15);
        }
        for (c, want) in r1.iter().enumerate() {
            assert!((out.get(1, c) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn bias_degenerates_on_sets() {
        let b = multiplicity_bias(&[1.0, 1.0], &[3.0, 5.0, 2.0], 1e-8);
        assert!(b.as_slice().iter().all(|&v| v == 0.0));
        let b = multiplicity_bias(&[4.0], &[1.0, 1.0], 1e-8);
        assert!(b.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bias_one_by_one() {
        let eps = 1e-8;
        let b = multiplicity_bias(&[2.0], &[2.0], eps);
        assert_eq!(b.get(0, 0), 1.0 / (1.0 + eps));
    }

    #[test]
    fn bias_norm_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mq: Vec<f64> = (0..4).map(|_| rng.random_range(1..100) as f64).collect();
            let mx: Vec<f64> = (0..6).map(|_| rng.random_range(1..100) as f64).collect();
            assert!(multiplicity_bias(&mq, &mx, 1e-8).frobenius_norm() <= 1.0);
        }
    }

    /// Brute force over all 3! × 3! row/column permutation pairs.
    #[test]
    fn bias_co_permutes() {
        let mq = [1.0, 4.0, 9.0];
        let mx = [2.0, 1.0, 7.0];
        let b = multiplicity_bias(&mq, &mx, 1e-8);
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for p in perms {
            for r in perms {
                let pq: Vec<f64> = p.iter().map(|&i| mq[i]).collect();
                let rx: Vec<f64> = r.iter().map(|&i| mx[i]).collect();
                let lhs = multiplicity_bias(&pq, &rx, 1e-8);
                let rhs = b.select_rows(&p).select_cols(&r);
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn set_inputs_reduce_to_plain_attention_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut store = ParamStore::new();
        let params = direct_scaled(&mut store, 0.7);
        let q = Multiset::from_set(rand_matrix(&mut rng, 3, 2)).unwrap();
        let x = Multiset::from_set(rand_matrix(&mut rng, 5, 2)).unwrap();
        let out = multiset_attention_value(&q, &x, &store, &params, BiasConfig::default()).unwrap();
        let plain = scaled_dot_attention(q.base(), x.base(), x.base()).unwrap();
        assert_eq!(out, plain);
    }

    #[test]
    fn self_attention_is_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let params = direct_scaled(&mut store, 1.3);
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let d = rng.random_range(1..=4);
            let x = rand_multiset(&mut rng, n, d, 100);
            let mut sigma: Vec<usize> = (0..n).collect();
            sigma.shuffle(&mut rng);
            let px = x.permute(&sigma).unwrap();
            let a = multiset_attention_value(&x, &x, &store, &params, BiasConfig::default()).unwrap();
            let pa = multiset_attention_value(&px, &px, &store, &params, BiasConfig::default()).unwrap();
            assert!(pa.max_abs_diff(&a.select_rows(&sigma)) <= 1e-9);
        }
    }

    #[test]
    fn alpha_shifts_mass_toward_heavy_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Multiset::new(rand_matrix(&mut rng, 2, 3), vec![1, 5]).unwrap();
        let q = Multiset::new(rand_matrix(&mut rng, 1, 3), vec![3]).unwrap();
        let weight_on_second = |alpha: f64| {
            // with V = one-hot rows the output row is the weight vector
            let mut store = ParamStore::new();
            let params = direct_scaled(&mut store, alpha);
            let mut tape = Tape::new();
            let qv = tape.constant(q.base().clone());
            let kv = tape.constant(x.base().clone());
            let bias = scaled_bias(&mut tape, &store, match params.bias {
                BiasParams::Scaled { alpha } => alpha,
                _ => unreachable!(),
            }, &q.mult_f64(), &x.mult_f64(), BiasConfig::default())
            .unwrap();
            let v = tape.constant(Matrix::identity(2));
            let w = attend(&mut tape, qv, kv, v, bias).unwrap();
            tape.value(w).get(0, 1)
        };
        assert!(weight_on_second(1.0) > weight_on_second(0.0));
    }

    #[test]
    fn learnable_query_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let d = rng.random_range(1..=4);
            let mut store = ParamStore::new();
            let params = direct_query(&mut store, &mut rng, 3, d);
            let x = rand_multiset(&mut rng, n, d, 100);
            let mut sigma: Vec<usize> = (0..n).collect();
            sigma.shuffle(&mut rng);
            let a = learnable_query_attention_value(&x, &store, &params, BiasConfig::default()).unwrap();
            let pa =
                learnable_query_attention_value(&x.permute(&sigma).unwrap(), &store, &params, BiasConfig::default())
                    .unwrap();
            assert!(pa.max_abs_diff(&a) <= 1e-9);
        }
    }

    #[test]
    fn learnable_query_on_sets_has_no_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut store = ParamStore::new();
        let params = direct_query(&mut store, &mut rng, 2, 3);
        let x = Multiset::from_set(rand_matrix(&mut rng, 4, 3)).unwrap();
        let out = learnable_query_attention_value(&x, &store, &params, BiasConfig::default()).unwrap();
        let q = store.value(params.query().unwrap());
        assert_eq!(out, scaled_dot_attention(q, x.base(), x.base()).unwrap());
    }

    #[test]
    fn learnable_query_single_row() {
        // softmax over one key is 1, so every query row is (1 + B_j)·x
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let params = direct_query(&mut store, &mut rng, 3, 2);
        let x = Multiset::new(Matrix::from_rows(&[[0.4, -1.2]]), vec![6]).unwrap();
        let out = learnable_query_attention_value(&x, &store, &params, BiasConfig::default()).unwrap();
        let BiasParams::LearnableQuery { m_alpha, .. } = params.bias else { unreachable!() };
        let ma = store.value(m_alpha).as_slice().to_vec();
        let b = multiplicity_bias(&ma.iter().map(|v| v + 1.0).collect::<Vec<_>>(), &[6.0], 1e-8);
        for j in 0..3 {
            for c in 0..2 {
                let want = (1.0 + b.get(j, 0)) * x.base().get(0, c);
                assert!((out.get(j, c) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn multihead_identity_projection_matches_single_head() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 3;
        let mut store = ParamStore::new();
        let alpha = store.add("alpha", Matrix::scalar(0.4));
        let single = AttentionParams {
            multihead: None,
            bias: BiasParams::Scaled { alpha },
        };
        let eye = |s: &mut ParamStore, n: &str| s.add(n, Matrix::identity(d));
        let mh = MultiheadParams {
            heads: vec![HeadProjection {
                wq: eye(&mut store, "wq"),
                wk: eye(&mut store, "wk"),
                wv: eye(&mut store, "wv"),
            }],
            output: eye(&mut store, "wo"),
        };
        let multi = AttentionParams {
            multihead: Some(mh),
            bias: BiasParams::Scaled { alpha },
        };
        let q = rand_multiset(&mut rng, 4, d, 9);
        let x = rand_multiset(&mut rng, 6, d, 9);
        let a = multiset_attention_value(&q, &x, &store, &single, BiasConfig::default()).unwrap();
        let b = multiset_attention_value(&q, &x, &store, &multi, BiasConfig::default()).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-14);
    }

    #[test]
    fn multihead_preserves_symmetries_and_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..100 {
            let heads = [1, 2, 4][trial % 3];
            let d = 4;
            let mut store = ParamStore::new();
            let mut sa = AttentionParams::init_scaled(&mut store, "sa", d, heads, &mut rng).unwrap();
            if let BiasParams::Scaled { alpha } = sa.bias {
                store.get_mut(alpha).value = Matrix::scalar(0.9);
            }
            let lq = AttentionParams::init_learnable_query(&mut store, "lq", d, heads, 3, &mut rng).unwrap();
            let n = rng.random_range(1..=8);
            let x = rand_multiset(&mut rng, n, d, 100);
            let mut sigma: Vec<usize> = (0..n).collect();
            sigma.shuffle(&mut rng);
            let px = x.permute(&sigma).unwrap();
            let cfg = BiasConfig::default();

            let a = multiset_attention_value(&x, &x, &store, &sa, cfg).unwrap();
            assert_eq!(a.shape(), (n, d));
            let pa = multiset_attention_value(&px, &px, &store, &sa, cfg).unwrap();
            assert!(pa.max_abs_diff(&a.select_rows(&sigma)) <= 1e-9);

            let r = learnable_query_attention_value(&x, &store, &lq, cfg).unwrap();
            assert_eq!(r.shape(), (3, d));
            let pr = learnable_query_attention_value(&px, &store, &lq, cfg).unwrap();
            assert!(pr.max_abs_diff(&r) <= 1e-9);
            sa.multihead = None;
        }
    }

    #[test]
    fn bias_parameter_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..10 {
            let d = 4;
            let mut store = ParamStore::new();
            let sa = AttentionParams::init_scaled(&mut store, "sa", d, 2, &mut rng).unwrap();
            let lq = AttentionParams::init_learnable_query(&mut store, "lq", d, 2, 3, &mut rng).unwrap();
            let BiasParams::Scaled { alpha } = sa.bias else { unreachable!() };
            store.get_mut(alpha).value = Matrix::scalar(0.5);
            let x = rand_multiset(&mut rng, 5, d, 30);
            let cfg = BiasConfig::default();

            let loss = |store: &ParamStore, tape: &mut Tape| -> Var {
                let xv = tape.constant(x.base().clone());
                let mx = x.mult_f64();
                let h = multiset_attention(tape, store, xv, &mx, xv, &mx, &sa, cfg).unwrap();
                let q = tape.param(store, lq.query().unwrap());
                let r = learnable_query_attention(tape, store, q, h, &mx, &lq, cfg).unwrap();
                let r = tape.relu(r);
                tape.sum_all(r)
            };
            let mut tape = Tape::new();
            let l = loss(&store, &mut tape);
            let grads = tape.backward(l);
            let mut acc = store.clone();
            acc.zero_grad();
            tape.accumulate_param_grads(&grads, &mut acc, 1.0);

            let BiasParams::LearnableQuery { query, m_alpha } = lq.bias else { unreachable!() };
            for id in [alpha, m_alpha, query] {
                let fd = finite_diff_grad(
                    |v| {
                        let mut s = store.clone();
                        s.get_mut(id).value = v.clone();
                        let mut t = Tape::new();
                        let l = loss(&s, &mut t);
                        t.value(l).get(0, 0)
                    },
                    store.value(id),
                );
                let err = relative_error(&acc.get(id).grad, &fd);
                assert!(err <= 1e-4, "{}: {err}", store.name(id));
            }
        }
    }
}
