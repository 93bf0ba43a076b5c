//! Differentiable building blocks recorded onto a [`Tape`].
//!
//! Every function takes the parameter-name prefix of its layer and reads
//! `{prefix}.weight`, `{prefix}.bias`, ... from [`ModelParams`]. Spatial
//! tensors are NHWC.

use std::sync::Arc;

use super::index::{self, MASK_VALUE};
use super::{ModelError, ModelParams};
use crate::autodiff::{NodeId, Tape};
use crate::tensor::{Scalar, Tensor};

pub const LN_EPS: f64 = 1e-5;

pub(crate) fn param<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    name: &str,
) -> Result<NodeId, ModelError> {
    if let Some(id) = tape.param_node(name) {
        return Ok(id);
    }
    Ok(tape.param(name, params.get(name)?))
}

fn dims4<T: Scalar>(tape: &Tape<T>, x: NodeId) -> Result<[usize; 4], ModelError> {
    tape.shape(x)
        .try_into()
        .map_err(|_| ModelError::Shape(format!("expected N,H,W,C tensor, got {:?}", tape.shape(x))))
}

/// `x·W + b` over the last axis; the bias is optional in `params`.
pub fn linear<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let wname = format!("{prefix}.weight");
    let w = param(tape, params, &wname)?;
    let (din, got) = (tape.shape(w)[0], tape.value(x).last_dim());
    if din != got {
        return Err(ModelError::Shape(format!("{wname} expects {din} inputs, got {got}")));
    }
    let bname = format!("{prefix}.bias");
    let b = if params.contains(&bname) {
        Some(param(tape, params, &bname)?)
    } else {
        None
    };
    Ok(tape.linear(x, w, b))
}

pub fn layer_norm<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let g = param(tape, params, &format!("{prefix}.weight"))?;
    let b = param(tape, params, &format!("{prefix}.bias"))?;
    Ok(tape.layer_norm(x, g, b, LN_EPS))
}

fn norm_if_present<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    if params.contains(&format!("{prefix}.weight")) {
        layer_norm(tape, params, prefix, x)
    } else {
        Ok(x)
    }
}

/// Linearly embeds each non-overlapping `p×p` patch: `(N, H, W, 3)` →
/// `(N, H/p, W/p, C)`. Reads `{prefix}.proj` and, when present, `{prefix}.norm`.
pub fn patch_embed<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    image: NodeId,
    patch: usize,
) -> Result<NodeId, ModelError> {
    let [n, h, w, c] = dims4(tape, image)?;
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(ModelError::Shape(format!("{h}x{w} image is not divisible by patch size {patch}")));
    }
    let (oh, ow) = (h / patch, w / patch);
    let idx = index::patchify_index(n, h, w, c, patch);
    let patches = tape.gather(image, idx, &[n, oh, ow, patch * patch * c]);
    let x = linear(tape, params, &format!("{prefix}.proj"), patches)?;
    norm_if_present(tape, params, &format!("{prefix}.norm"), x)
}

/// Output of [`window_attention`].
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    /// Projected output, `(B, M², C)`.
    pub out: NodeId,
    /// Post-softmax weights, `(B, heads, M², M²)`.
    pub probs: NodeId,
}

/// Multi-head self-attention inside each window.
///
/// `x` is `(B, M², C)`. `mask`, if given, is `(nW, M², M²)` and window `b`
/// uses `mask[b mod nW]`. Query rows whose mask entries are all masked output
/// zero.
pub fn window_attention<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
    heads: usize,
    window: usize,
    mask: Option<&Tensor<T>>,
) -> Result<Attention, ModelError> {
    let [b, n, c]: [usize; 3] = tape
        .shape(x)
        .try_into()
        .map_err(|_| ModelError::Shape(format!("expected (B, M², C) windows, got {:?}", tape.shape(x))))?;
    if n != window * window || heads == 0 || c % heads != 0 {
        return Err(ModelError::Shape(format!(
            "{n} tokens of width {c} do not fit window {window} with {heads} heads"
        )));
    }
    let d = c / heads;
    let qkv = linear(tape, params, &format!("{prefix}.qkv"), x)?;
    let split = |tape: &mut Tape<T>, part| {
        tape.gather(qkv, index::split_heads_index(b, n, c, heads, part), &[b, heads, n, d])
    };
    let q = split(tape, 0);
    let k = split(tape, 1);
    let v = split(tape, 2);
    let q = tape.scale(q, T::from_f64(1.0 / (d as f64).sqrt()));
    let mut scores = tape.batch_matmul(q, k, true);

    let tname = format!("{prefix}.relative_position_bias_table");
    let table = param(tape, params, &tname)?;
    let span = 2 * window - 1;
    if tape.shape(table) != [span * span, heads] {
        return Err(ModelError::Shape(format!(
            "{tname}: expected [{}, {heads}], got {:?}",
            span * span,
            tape.shape(table)
        )));
    }
    let bias = tape.gather(table, index::bias_gather_index(window, heads), &[heads, n, n]);
    scores = tape.add_broadcast(scores, bias);

    let mut keep = None;
    if let Some(mask) = mask {
        let nw = mask.shape().first().copied().unwrap_or(0);
        if mask.shape() != [nw, n, n] || nw == 0 || b % nw != 0 {
            return Err(ModelError::Shape(format!(
                "mask {:?} does not fit {b} windows of {n} tokens",
                mask.shape()
            )));
        }
        let md = mask.data();
        let mut full = Vec::with_capacity(b * heads * n * n);
        for bb in 0..b {
            let w = bb % nw;
            for _ in 0..heads {
                full.extend_from_slice(&md[w * n * n..(w + 1) * n * n]);
            }
        }
        let masked = |v: T| v.to_f64() <= MASK_VALUE / 2.0;
        let dead_rows: Vec<bool> = full.chunks(n).map(|row| row.iter().all(|&v| masked(v))).collect();
        if dead_rows.iter().any(|&r| r) {
            let k: Vec<T> = dead_rows
                .iter()
                .flat_map(|&dead| std::iter::repeat_n(if dead { T::ZERO } else { T::ONE }, n))
                .collect();
            keep = Some(Tensor::new(&[b, heads, n, n], k).expect("keep shape"));
        }
        let mc = tape.constant(Tensor::new(&[b, heads, n, n], full).expect("mask shape"));
        scores = tape.add(scores, mc);
    }
    let mut probs = tape.softmax(scores);
    if let Some(keep) = keep {
        let kc = tape.constant(keep);
        probs = tape.mul(probs, kc);
    }
    let ctx = tape.batch_matmul(probs, v, false);
    let merged = tape.gather(ctx, index::merge_heads_index(b, n, c, heads), &[b, n, c]);
    let out = linear(tape, params, &format!("{prefix}.proj"), merged)?;
    if !tape.value(out).all_finite() {
        return Err(ModelError::NonFinite(format!("{prefix} output")));
    }
    Ok(Attention { out, probs })
}

/// One transformer block: `x + W-MSA(LN(x))`, then `+ MLP(LN(·))`.
///
/// The normalized map is zero-padded to a multiple of `window`; shifted
/// blocks roll it by `window/2` and mask attention across the wrap-around
/// seams, then roll back before cropping.
#[allow(clippy::too_many_arguments)]
pub fn swin_block<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
    heads: usize,
    window: usize,
    shifted: bool,
) -> Result<NodeId, ModelError> {
    let [n, h, w, c] = dims4(tape, x)?;
    let m = window;
    let (hp, wp) = (h.div_ceil(m) * m, w.div_ceil(m) * m);
    let shift = if shifted { m / 2 } else { 0 };
    let nwin = n * (hp / m) * (wp / m);

    let normed = layer_norm(tape, params, &format!("{prefix}.norm1"), x)?;
    let pad = index::pad_index(n, h, w, c, hp, wp);
    let roll = index::shift_index(n, hp, wp, c, shift as isize);
    let part = index::partition_index(n, hp, wp, c, m);
    let to_windows = index::compose(&index::compose(&part, &roll), &pad);
    let windows = tape.gather(normed, to_windows, &[nwin, m * m, c]);

    let mask = if shifted {
        Some(index::shift_attention_mask::<T>(hp, wp, m, shift)?)
    } else {
        None
    };
    let attn = window_attention(tape, params, &format!("{prefix}.attn"), windows, heads, m, mask.as_ref())?;

    let rev = index::reverse_index(n, hp, wp, c, m);
    let unroll = index::shift_index(n, hp, wp, c, -(shift as isize));
    let crop = index::crop_index(n, hp, wp, c, h, w);
    let from_windows = index::compose(&index::compose(&crop, &unroll), &rev);
    let y = tape.gather(attn.out, from_windows, &[n, h, w, c]);
    let x = tape.add(x, y);

    let normed = layer_norm(tape, params, &format!("{prefix}.norm2"), x)?;
    let hidden = linear(tape, params, &format!("{prefix}.mlp.fc1"), normed)?;
    let hidden = tape.gelu(hidden);
    let y = linear(tape, params, &format!("{prefix}.mlp.fc2"), hidden)?;
    Ok(tape.add(x, y))
}

/// 2×2 neighborhood concatenation followed by a linear reduction:
/// `(N, H, W, C)` → `(N, H/2, W/2, C')`. Reads `{prefix}.reduction` and, when
/// present, `{prefix}.norm` (applied to the 4C concatenation).
pub fn patch_merging<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let [n, h, w, c] = dims4(tape, x)?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(ModelError::Shape(format!("patch merging needs even dims, got {h}x{w}")));
    }
    let cat = tape.gather(x, index::merge_index(n, h, w, c), &[n, h / 2, w / 2, 4 * c]);
    let cat = norm_if_present(tape, params, &format!("{prefix}.norm"), cat)?;
    linear(tape, params, &format!("{prefix}.reduction"), cat)
}

/// 1×1 convolution followed by GELU.
pub fn conv1x1_act<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let y = linear(tape, params, prefix, x)?;
    Ok(tape.gelu(y))
}

/// 3×3 convolution (edge-replicated borders) followed by GELU.
pub fn conv3x3_act<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId, ModelError> {
    let [n, h, w, c] = dims4(tape, x)?;
    let cols = tape.gather(x, index::im2col3_index(n, h, w, c), &[n, h, w, 9 * c]);
    conv1x1_act(tape, params, prefix, cols)
}

/// Bilinear resize of `(N, h, w, C)` to `(N, oh, ow, C)` (half-pixel centers).
pub fn resize_bilinear<T: Scalar>(tape: &mut Tape<T>, x: NodeId, oh: usize, ow: usize) -> Result<NodeId, ModelError> {
    let [n, h, w, c] = dims4(tape, x)?;
    if (h, w) == (oh, ow) {
        return Ok(x);
    }
    let flat = tape.reshape(x, &[n, h * w, c]);
    let y = tape.resample(flat, Arc::new(index::bilinear_plan(h, w, oh, ow)));
    Ok(tape.reshape(y, &[n, oh, ow, c]))
}

/// Adaptive average pooling of `(N, h, w, C)` to `(N, oh, ow, C)`.
pub fn adaptive_avg_pool<T: Scalar>(tape: &mut Tape<T>, x: NodeId, oh: usize, ow: usize) -> Result<NodeId, ModelError> {
    let [n, h, w, c] = dims4(tape, x)?;
    let flat = tape.reshape(x, &[n, h * w, c]);
    let y = tape.resample(flat, Arc::new(index::adaptive_pool_plan(h, w, oh, ow)));
    Ok(tape.reshape(y, &[n, oh, ow, c]))
}
