//! Multiset attention blocks: MAB, MAB_Q, SAB and IMAB, each in a post-LN
//! and a pre-LN variant.
//!
//! Post-LN: `H = LN(Q + A(Q, X))`, `out = LN(H + FFN(H))`.
//! Pre-LN:  `H = Q + A(LN(Q), LN(X))`, `out = H + FFN(LN(H))`.
//!
//! Every sub-layer acts row-wise, so multiplicities pass through untouched
//! and only the attention bias consumes them.

use rand::Rng;

use crate::attention::{learnable_query_attention, multiset_attention, AttentionParams, BiasConfig};
use crate::error::{MstError, Result};
use crate::multiset::Multiset;
use crate::numerics::param::init_uniform;
use crate::numerics::{Matrix, ParamId, ParamStore, Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LnVariant {
    #[default]
    PostLn,
    PreLn,
}

#[derive(Clone, Debug)]
pub struct LayerNormParams {
    pub gain: ParamId,
    pub shift: ParamId,
}

impl LayerNormParams {
    pub fn init(store: &mut ParamStore, prefix: &str, dim: usize) -> Self {
        Self {
            gain: store.add(format!("{prefix}/gain"), Matrix::filled(1, dim, 1.0)),
            shift: store.add(format!("{prefix}/shift"), Matrix::zeros(1, dim)),
        }
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let g = tape.param(store, self.gain);
        let s = tape.param(store, self.shift);
        tape.layer_norm_rows(x, g, s)
    }
}

/// Two-layer row-wise feed-forward network with a ReLU in between.
#[derive(Clone, Debug)]
pub struct FfnParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FfnParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, dim: usize, rng: &mut R) -> Self {
        Self {
            w1: store.add(format!("{prefix}/w1"), init_uniform(rng, dim, dim)),
            b1: store.add(format!("{prefix}/b1"), Matrix::zeros(1, dim)),
            w2: store.add(format!("{prefix}/w2"), init_uniform(rng, dim, dim)),
            b2: store.add(format!("{prefix}/b2"), Matrix::zeros(1, dim)),
        }
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w1 = tape.param(store, self.w1);
        let b1 = tape.param(store, self.b1);
        let w2 = tape.param(store, self.w2);
        let b2 = tape.param(store, self.b2);
        let h = tape.matmul(x, w1)?;
        let h = tape.add_row(h, b1)?;
        let h = tape.relu(h);
        let h = tape.matmul(h, w2)?;
        tape.add_row(h, b2)
    }
}

#[derive(Clone, Debug)]
pub struct BlockParams {
    pub attention: AttentionParams,
    pub ffn: FfnParams,
    /// Normalizes the attention sub-layer (its output in post-LN, its inputs in pre-LN).
    pub ln0: LayerNormParams,
    /// Normalizes the feed-forward sub-layer.
    pub ln1: LayerNormParams,
    pub variant: LnVariant,
}

impl BlockParams {
    /// Parameters for a MAB (and hence SAB) of width `dim`.
    pub fn init_mab<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        variant: LnVariant,
        rng: &mut R,
    ) -> Result<Self> {
        let attention = AttentionParams::init_scaled(store, &format!("{prefix}/attn"), dim, heads, rng)?;
        Ok(Self::finish(store, prefix, dim, variant, attention, rng))
    }

    /// Parameters for a MAB_Q with `n_queries` learnable queries.
    pub fn init_mab_q<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        n_queries: usize,
        variant: LnVariant,
        rng: &mut R,
    ) -> Result<Self> {
        let attention =
            AttentionParams::init_learnable_query(store, &format!("{prefix}/attn"), dim, heads, n_queries, rng)?;
        Ok(Self::finish(store, prefix, dim, variant, attention, rng))
    }

    fn finish<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        variant: LnVariant,
        attention: AttentionParams,
        rng: &mut R,
    ) -> Self {
        let ffn = FfnParams::init(store, &format!("{prefix}/ffn"), dim, rng);
        let ln0 = LayerNormParams::init(store, &format!("{prefix}/ln0"), dim);
        let ln1 = LayerNormParams::init(store, &format!("{prefix}/ln1"), dim);
        Self {
            attention,
            ffn,
            ln0,
            ln1,
            variant,
        }
    }

    /// Wraps the attention sub-layer output `h_pre` (already the residual sum
    /// in pre-LN, the raw sum in post-LN) with the FFN sub-layer.
    fn feed_forward(&self, tape: &mut Tape, store: &ParamStore, h: Var) -> Result<Var> {
        match self.variant {
            LnVariant::PostLn => {
                let h = self.ln0.apply(tape, store, h)?;
                let f = self.ffn.apply(tape, store, h)?;
                let s = tape.add(h, f)?;
                self.ln1.apply(tape, store, s)
            }
            LnVariant::PreLn => {
                let n = self.ln1.apply(tape, store, h)?;
                let f = self.ffn.apply(tape, store, n)?;
                tape.add(h, f)
            }
        }
    }
}

/// Induced block: an inner MAB_Q summarizes the input into a fixed number
/// of rows, then an outer MAB attends from the input to that summary.
#[derive(Clone, Debug)]
pub struct ImabParams {
    pub induce: BlockParams,
    pub outer: BlockParams,
}

impl ImabParams {
    #[allow(clippy::too_many_arguments)]
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        dim: usize,
        heads: usize,
        n_induced: usize,
        variant: LnVariant,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            induce: BlockParams::init_mab_q(store, &format!("{prefix}/induce"), dim, heads, n_induced, variant, rng)?,
            outer: BlockParams::init_mab(store, &format!("{prefix}/outer"), dim, heads, variant, rng)?,
        })
    }
}

fn nonempty(tape: &Tape, x: Var, op: &str) -> Result<()> {
    if tape.value(x).rows() == 0 {
        return Err(MstError::Validation(format!("{op} on an empty input")));
    }
    Ok(())
}

/// `MAB(Q, X)` on tape nodes.
#[allow(clippy::too_many_arguments)]
pub fn mab_tape(
    tape: &mut Tape,
    store: &ParamStore,
    q: Var,
    mq: &[f64],
    x: Var,
    mx: &[f64],
    params: &BlockParams,
    cfg: BiasConfig,
) -> Result<Var> {
    let h = match params.variant {
        LnVariant::PostLn => {
            let a = multiset_attention(tape, store, q, mq, x, mx, &params.attention, cfg)?;
            tape.add(q, a)?
        }
        LnVariant::PreLn => {
            let qn = params.ln0.apply(tape, store, q)?;
            let xn = if q == x { qn } else { params.ln0.apply(tape, store, x)? };
            let a = multiset_attention(tape, store, qn, mq, xn, mx, &params.attention, cfg)?;
            tape.add(q, a)?
        }
    };
    params.feed_forward(tape, store, h)
}

/// `MAB_Q(X)`: invariant pooling to the block's learnable queries.
pub fn mab_q_tape(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    mx: &[f64],
    params: &BlockParams,
    cfg: BiasConfig,
) -> Result<Var> {
    nonempty(tape, x, "mab_q")?;
    let query_id = params
        .attention
        .query()
        .ok_or_else(|| MstError::Config("mab_q needs learnable-query parameters".into()))?;
    let q = tape.param(store, query_id);
    let h = match params.variant {
        LnVariant::PostLn => {
            let a = learnable_query_attention(tape, store, q, x, mx, &params.attention, cfg)?;
            tape.add(q, a)?
        }
        LnVariant::PreLn => {
            let qn = params.ln0.apply(tape, store, q)?;
            let xn = params.ln0.apply(tape, store, x)?;
            let a = learnable_query_attention(tape, store, qn, xn, mx, &params.attention, cfg)?;
            tape.add(q, a)?
        }
    };
    params.feed_forward(tape, store, h)
}

/// `SAB(X) = MAB(X, X)`.
pub fn sab_tape(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    mx: &[f64],
    params: &BlockParams,
    cfg: BiasConfig,
) -> Result<Var> {
    mab_tape(tape, store, x, mx, x, mx, params, cfg)
}

/// `IMAB(X) = MAB(X, MAB_Q(X))`; the summary rows carry multiplicity one.
pub fn imab_tape(
    tape: &mut Tape,
    store: &ParamStore,
    x: Var,
    mx: &[f64],
    params: &ImabParams,
    cfg: BiasConfig,
) -> Result<Var> {
    nonempty(tape, x, "imab")?;
    let summary = mab_q_tape(tape, store, x, mx, &params.induce, cfg)?;
    let ones = vec![1.0; tape.value(summary).rows()];
    mab_tape(tape, store, x, mx, summary, &ones, &params.outer, cfg)
}

fn eval(build: impl FnOnce(&mut Tape) -> Result<Var>) -> Result<Matrix> {
    let mut tape = Tape::new();
    let out = build(&mut tape)?;
    Ok(tape.value(out).clone())
}

pub fn mab(q: &Multiset, x: &Multiset, store: &ParamStore, params: &BlockParams, cfg: BiasConfig) -> Result<Matrix> {
    eval(|t| {
        let qv = t.constant(q.base().clone());
        let xv = t.constant(x.base().clone());
        mab_tape(t, store, qv, &q.mult_f64(), xv, &x.mult_f64(), params, cfg)
    })
}

pub fn mab_q(x: &Multiset, store: &ParamStore, params: &BlockParams, cfg: BiasConfig) -> Result<Matrix> {
    eval(|t| {
        let xv = t.constant(x.base().clone());
        mab_q_tape(t, store, xv, &x.mult_f64(), params, cfg)
    })
}

pub fn sab(x: &Multiset, store: &ParamStore, params: &BlockParams, cfg: BiasConfig) -> Result<Matrix> {
    eval(|t| {
        let xv = t.constant(x.base().clone());
        sab_tape(t, store, xv, &x.mult_f64(), params, cfg)
    })
}

pub fn imab(x: &Multiset, store: &ParamStore, params: &ImabParams, cfg: BiasConfig) -> Result<Matrix> {
    eval(|t| {
        let xv = t.constant(x.base().clone());
        imab_tape(t, store, xv, &x.mult_f64(), params, cfg)
    })
}
