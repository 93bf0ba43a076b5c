//! Layout index tables and the pure tensor forms of the windowing ops.
//!
//! Every layout change in the model is a gather: `out[i] = src[index[i]]`,
//! with [`GATHER_ZERO`] producing zero (used for padding). Tables built here
//! address NHWC tensors.

use std::sync::Arc;

use super::ModelError;
use crate::autodiff::ResamplePlan;
use crate::tensor::{Scalar, Tensor, GATHER_ZERO};

/// Additive attention mask value for token pairs in different regions.
pub const MASK_VALUE: f64 = -1.0e4;

pub type Index = Arc<[u32]>;

/// `outer` gathers from the output of `inner`; the result gathers from
/// `inner`'s source directly.
pub fn compose(outer: &[u32], inner: &[u32]) -> Index {
    outer
        .iter()
        .map(|&o| if o == GATHER_ZERO { GATHER_ZERO } else { inner[o as usize] })
        .collect()
}

/// `(N, H, W, C)` → `(N·nW, M², C)` with windows in row-major order per image.
pub fn partition_index(n: usize, h: usize, w: usize, c: usize, m: usize) -> Index {
    let (nh, nw) = (h / m, w / m);
    let mut idx = Vec::with_capacity(n * h * w * c);
    for b in 0..n {
        for wy in 0..nh {
            for wx in 0..nw {
                for i in 0..m {
                    for j in 0..m {
                        let base = ((b * h + wy * m + i) * w + wx * m + j) * c;
                        idx.extend((0..c).map(|k| (base + k) as u32));
                    }
                }
            }
        }
    }
    idx.into()
}

/// Inverse of [`partition_index`]: `(N·nW, M², C)` → `(N, H, W, C)`.
pub fn reverse_index(n: usize, h: usize, w: usize, c: usize, m: usize) -> Index {
    let fwd = partition_index(n, h, w, c, m);
    let mut inv = vec![0u32; fwd.len()];
    for (o, &i) in fwd.iter().enumerate() {
        inv[i as usize] = o as u32;
    }
    inv.into()
}

/// `out[y][x] = src[(y + s) mod H][(x + s) mod W]`; `s` may be negative.
pub fn shift_index(n: usize, h: usize, w: usize, c: usize, s: isize) -> Index {
    let mut idx = Vec::with_capacity(n * h * w * c);
    for b in 0..n {
        for y in 0..h {
            let sy = (y as isize + s).rem_euclid(h as isize) as usize;
            for x in 0..w {
                let sx = (x as isize + s).rem_euclid(w as isize) as usize;
                let base = ((b * h + sy) * w + sx) * c;
                idx.extend((0..c).map(|k| (base + k) as u32));
            }
        }
    }
    idx.into()
}

/// Zero-pads `(N, H, W, C)` on the bottom/right to `(N, Hp, Wp, C)`.
pub fn pad_index(n: usize, h: usize, w: usize, c: usize, hp: usize, wp: usize) -> Index {
    let mut idx = Vec::with_capacity(n * hp * wp * c);
    for b in 0..n {
        for y in 0..hp {
            for x in 0..wp {
                if y < h && x < w {
                    let base = ((b * h + y) * w + x) * c;
                    idx.extend((0..c).map(|k| (base + k) as u32));
                } else {
                    idx.extend(std::iter::repeat_n(GATHER_ZERO, c));
                }
            }
        }
    }
    idx.into()
}

/// Crops `(N, Hp, Wp, C)` to its top-left `(N, H, W, C)`.
pub fn crop_index(n: usize, hp: usize, wp: usize, c: usize, h: usize, w: usize) -> Index {
    let mut idx = Vec::with_capacity(n * h * w * c);
    for b in 0..n {
        for y in 0..h {
            let base = ((b * hp + y) * wp) * c;
            idx.extend((base..base + w * c).map(|k| k as u32));
        }
    }
    idx.into()
}

/// Non-overlapping `p×p` patches: `(N, H, W, C)` → `(N, H/p, W/p, p·p·C)`,
/// each patch flattened in `(dy, dx, channel)` order.
pub fn patchify_index(n: usize, h: usize, w: usize, c: usize, p: usize) -> Index {
    let (oh, ow) = (h / p, w / p);
    let mut idx = Vec::with_capacity(n * h * w * c);
    for b in 0..n {
        for py in 0..oh {
            for px in 0..ow {
                for dy in 0..p {
                    for dx in 0..p {
                        let base = ((b * h + py * p + dy) * w + px * p + dx) * c;
                        idx.extend((0..c).map(|k| (base + k) as u32));
                    }
                }
            }
        }
    }
    idx.into()
}

/// 2×2 neighborhood concatenation for patch merging:
/// `(N, H, W, C)` → `(N, H/2, W/2, 4C)` ordered `[(0,0), (1,0), (0,1), (1,1)]`
/// as `(dy, dx)` offsets.
pub fn merge_index(n: usize, h: usize, w: usize, c: usize) -> Index {
    const OFFSETS: [(usize, usize); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];
    let (oh, ow) = (h / 2, w / 2);
    let mut idx = Vec::with_capacity(n * h * w * c);
    for b in 0..n {
        for y in 0..oh {
            for x in 0..ow {
                for (dy, dx) in OFFSETS {
                    let base = ((b * h + 2 * y + dy) * w + 2 * x + dx) * c;
                    idx.extend((0..c).map(|k| (base + k) as u32));
                }
            }
        }
    }
    idx.into()
}

/// 3×3 neighborhoods with edge replication: `(N, H, W, C)` → `(N, H, W, 9C)`
/// in `(ky, kx, channel)` order.
pub fn im2col3_index(n: usize, h: usize, w: usize, c: usize) -> Index {
    let mut idx = Vec::with_capacity(n * h * w * c * 9);
    for b in 0..n {
        for y in 0..h {
            for x in 0..w {
                for ky in 0..3 {
                    let sy = (y + ky).saturating_sub(1).min(h - 1);
                    for kx in 0..3 {
                        let sx = (x + kx).saturating_sub(1).min(w - 1);
                        let base = ((b * h + sy) * w + sx) * c;
                        idx.extend((0..c).map(|k| (base + k) as u32));
                    }
                }
            }
        }
    }
    idx.into()
}

/// Splits fused `(B, n, 3C)` projections into `(B, heads, n, d)` for the
/// `part`-th of q/k/v.
pub fn split_heads_index(b: usize, n: usize, c: usize, heads: usize, part: usize) -> Index {
    let d = c / heads;
    let mut idx = Vec::with_capacity(b * n * c);
    for bb in 0..b {
        for hh in 0..heads {
            for i in 0..n {
                let base = (bb * n + i) * 3 * c + part * c + hh * d;
                idx.extend((base..base + d).map(|k| k as u32));
            }
        }
    }
    idx.into()
}

/// `(B, heads, n, d)` → `(B, n, heads·d)`.
pub fn merge_heads_index(b: usize, n: usize, c: usize, heads: usize) -> Index {
    let d = c / heads;
    let mut idx = Vec::with_capacity(b * n * c);
    for bb in 0..b {
        for i in 0..n {
            for hh in 0..heads {
                let base = ((bb * heads + hh) * n + i) * d;
                idx.extend((base..base + d).map(|k| k as u32));
            }
        }
    }
    idx.into()
}

/// `(M², M²)` table of indices into a `(2M−1)²` relative-position bias table.
/// Entry `[i][j]` encodes the displacement of token `i` relative to token `j`.
pub fn relative_position_index(m: usize) -> Vec<usize> {
    let n = m * m;
    let span = 2 * m - 1;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let (ri, ci) = (i / m, i % m);
        for j in 0..n {
            let (rj, cj) = (j / m, j % m);
            let dr = ri + m - 1 - rj;
            let dc = ci + m - 1 - cj;
            out.push(dr * span + dc);
        }
    }
    out
}

/// Gathers a `((2M−1)², heads)` bias table into `(heads, M², M²)`.
pub fn bias_gather_index(m: usize, heads: usize) -> Index {
    let rel = relative_position_index(m);
    let n = m * m;
    let mut idx = Vec::with_capacity(heads * n * n);
    for hh in 0..heads {
        idx.extend(rel.iter().map(|&r| (r * heads + hh) as u32));
    }
    idx.into()
}

fn check_divisible(h: usize, w: usize, m: usize) -> Result<(), ModelError> {
    if m == 0 || !h.is_multiple_of(m) || !w.is_multiple_of(m) {
        return Err(ModelError::Shape(format!(
            "{h}x{w} is not divisible by window size {m}"
        )));
    }
    Ok(())
}

fn nhwc<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize, usize, usize), ModelError> {
    match *x.shape() {
        [h, w, c] => Ok((1, h, w, c)),
        [n, h, w, c] => Ok((n, h, w, c)),
        ref s => Err(ModelError::Shape(format!("expected (N,)H,W,C tensor, got {s:?}"))),
    }
}

/// Splits an `H×W×C` (or `N×H×W×C`) map into `(nW, M², C)` windows.
pub fn window_partition<T: Scalar>(x: &Tensor<T>, m: usize) -> Result<Tensor<T>, ModelError> {
    let (n, h, w, c) = nhwc(x)?;
    check_divisible(h, w, m)?;
    let nw = n * (h / m) * (w / m);
    Ok(x.gather(&partition_index(n, h, w, c, m), &[nw, m * m, c]))
}

/// Reassembles `(nW, M², C)` windows into an `H×W×C` map.
pub fn window_reverse<T: Scalar>(
    windows: &Tensor<T>,
    m: usize,
    h: usize,
    w: usize,
) -> Result<Tensor<T>, ModelError> {
    check_divisible(h, w, m)?;
    let s = windows.shape();
    if s.len() != 3 || s[1] != m * m {
        return Err(ModelError::Shape(format!("expected (nW, {}, C) windows, got {s:?}", m * m)));
    }
    let per_image = (h / m) * (w / m);
    if !s[0].is_multiple_of(per_image) {
        return Err(ModelError::Shape(format!(
            "{} windows do not tile a {h}x{w} map",
            s[0]
        )));
    }
    let n = s[0] / per_image;
    let c = s[2];
    let shape = if n == 1 { vec![h, w, c] } else { vec![n, h, w, c] };
    Ok(windows.gather(&reverse_index(n, h, w, c, m), &shape))
}

/// Toroidal roll: `out[i][j] = x[(i+s) mod H][(j+s) mod W]`.
pub fn cyclic_shift<T: Scalar>(x: &Tensor<T>, s: isize) -> Result<Tensor<T>, ModelError> {
    let (n, h, w, c) = nhwc(x)?;
    Ok(x.gather(&shift_index(n, h, w, c, s), x.shape()))
}

/// Region id of each position in the shifted frame (row-major `H×W`).
fn shift_regions(h: usize, w: usize, m: usize, s: usize) -> Vec<usize> {
    let band = |v: usize, len: usize| {
        if v < len - m {
            0
        } else if v < len - s {
            1
        } else {
            2
        }
    };
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(band(y, h) * 3 + band(x, w));
        }
    }
    out
}

/// Per-window additive attention mask `(nW, M², M²)` for a map shifted by `s`.
/// Entries are 0 where both tokens come from the same pre-shift region and
/// [`MASK_VALUE`] otherwise; `s = 0` gives all zeros.
pub fn shift_attention_mask<T: Scalar>(
    h: usize,
    w: usize,
    m: usize,
    s: usize,
) -> Result<Tensor<T>, ModelError> {
    check_divisible(h, w, m)?;
    if s != 0 && (!m.is_multiple_of(2) || s != m / 2) {
        return Err(ModelError::Shape(format!(
            "shift {s} must be 0 or half the window size {m}"
        )));
    }
    let n = m * m;
    let nw = (h / m) * (w / m);
    if s == 0 {
        return Ok(Tensor::zeros(&[nw, n, n]));
    }
    let regions = shift_regions(h, w, m, s);
    let mut data = Vec::with_capacity(nw * n * n);
    let neg = T::from_f64(MASK_VALUE);
    for wy in 0..h / m {
        for wx in 0..w / m {
            let ids: Vec<usize> = (0..n)
                .map(|t| regions[(wy * m + t / m) * w + wx * m + t % m])
                .collect();
            for i in 0..n {
                for j in 0..n {
                    data.push(if ids[i] == ids[j] { T::ZERO } else { neg });
                }
            }
        }
    }
    Ok(Tensor::new(&[nw, n, n], data).expect("mask shape"))
}

/// Adaptive average pooling taps (bin `i` spans `floor(i·in/out)..ceil((i+1)·in/out)`).
pub fn adaptive_pool_plan(h: usize, w: usize, oh: usize, ow: usize) -> ResamplePlan {
    let bins = |i: usize, inp: usize, out: usize| (i * inp / out, ((i + 1) * inp).div_ceil(out));
    let mut taps = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        let (y0, y1) = bins(oy, h, oh);
        for ox in 0..ow {
            let (x0, x1) = bins(ox, w, ow);
            let wgt = 1.0 / ((y1 - y0) * (x1 - x0)) as f64;
            let mut t = Vec::new();
            for y in y0..y1 {
                for x in x0..x1 {
                    t.push(((y * w + x) as u32, wgt));
                }
            }
            taps.push(t);
        }
    }
    ResamplePlan {
        src_len: h * w,
        taps,
    }
}

/// Bilinear resize taps with half-pixel centers (`align_corners = false`).
pub fn bilinear_plan(h: usize, w: usize, oh: usize, ow: usize) -> ResamplePlan {
    let axis = |o: usize, inp: usize, out: usize| -> (usize, usize, f64) {
        let scale = inp as f64 / out as f64;
        let src = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
        let i0 = (src.floor() as usize).min(inp - 1);
        let i1 = (i0 + 1).min(inp - 1);
        (i0, i1, src - i0 as f64)
    };
    let mut taps = Vec::with_capacity(oh * ow);
    for oy in 0..oh {
        let (y0, y1, ly) = axis(oy, h, oh);
        for ox in 0..ow {
            let (x0, x1, lx) = axis(ox, w, ow);
            let mut t: Vec<(u32, f64)> = Vec::with_capacity(4);
            for (yy, wy) in [(y0, 1.0 - ly), (y1, ly)] {
                for (xx, wx) in [(x0, 1.0 - lx), (x1, lx)] {
                    let wgt = wy * wx;
                    if wgt == 0.0 {
                        continue;
                    }
                    let k = (yy * w + xx) as u32;
                    match t.iter_mut().find(|(i, _)| *i == k) {
                        Some(e) => e.1 += wgt,
                        None => t.push((k, wgt)),
                    }
                }
            }
            taps.push(t);
        }
    }
    ResamplePlan {
        src_len: h * w,
        taps,
    }
}
