//! Tape-based reverse-mode differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation of a forward pass together with its
//! output value. [`Tape::backward`] then walks the tape in reverse, seeding the
//! chosen output with an upstream gradient, and returns the accumulated
//! gradients of every named parameter leaf.
//!
//! The op set is deliberately small. Layout changes (reshapes, window
//! partitioning, cyclic shifts, padding, patch gathering, im2col) are all a
//! single [`Tape::gather`] with a precomputed index table, so their backward
//! pass is one scatter-add.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::tensor::{Scalar, Tensor, GATHER_ZERO};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("backward called before any forward pass was recorded")]
    BackwardBeforeForward,
    #[error("seed gradient shape {seed:?} does not match output shape {output:?}")]
    SeedShape {
        seed: Vec<usize>,
        output: Vec<usize>,
    },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

/// Sparse linear map between flattened spatial grids, shared by adaptive
/// average pooling and bilinear resizing.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplePlan {
    pub src_len: usize,
    /// For each output position, the `(source position, weight)` taps.
    pub taps: Vec<Vec<(u32, f64)>>,
}

impl ResamplePlan {
    pub fn dst_len(&self) -> usize {
        self.taps.len()
    }
}

enum Op<T> {
    Leaf,
    Gather {
        src: NodeId,
        index: Arc<[u32]>,
    },
    Linear {
        x: NodeId,
        w: NodeId,
        b: Option<NodeId>,
    },
    BatchMatmul {
        a: NodeId,
        b: NodeId,
        trans_b: bool,
    },
    Add {
        a: NodeId,
        b: NodeId,
    },
    AddBroadcast {
        x: NodeId,
        y: NodeId,
    },
    Mul {
        a: NodeId,
        b: NodeId,
    },
    Scale {
        x: NodeId,
        s: T,
    },
    Softmax {
        x: NodeId,
    },
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    Gelu {
        x: NodeId,
    },
    Resample {
        x: NodeId,
        plan: Arc<ResamplePlan>,
    },
    Concat {
        parts: Vec<NodeId>,
    },
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Per-parameter gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T = f32> {
    grads: BTreeMap<String, Tensor<T>>,
    reached: BTreeSet<String>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.grads.get(name)
    }

    /// Names of parameters that were reached by the backward pass.
    pub fn active(&self) -> impl Iterator<Item = &str> {
        self.reached.iter().map(String::as_str)
    }

    pub fn is_active(&self, name: &str) -> bool {
        self.reached.contains(name)
    }

    /// Adds a zero gradient for a parameter the backward pass never reached.
    pub fn fill_zeros(&mut self, name: &str, shape: &[usize]) {
        if !self.grads.contains_key(name) {
            self.grads.insert(name.to_string(), Tensor::zeros(shape));
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub(crate) fn insert(&mut self, name: String, grad: Tensor<T>) {
        self.reached.insert(name.clone());
        self.grads.insert(name, grad);
    }
}

/// Records a forward computation for later differentiation.
pub struct Tape<T = f32> {
    nodes: Vec<Node<T>>,
    params: HashMap<String, NodeId>,
    param_names: BTreeMap<NodeId, String>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: HashMap::new(),
            param_names: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Records a non-differentiated input (images, masks, constants).
    pub fn constant(&mut self, value: Tensor<T>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// Records a named trainable leaf. Registering the same name twice returns
    /// the original node.
    pub fn param(&mut self, name: &str, value: &Tensor<T>) -> NodeId {
        if let Some(&id) = self.params.get(name) {
            return id;
        }
        let id = self.push(value.clone(), Op::Leaf);
        self.params.insert(name.to_string(), id);
        self.param_names.insert(id, name.to_string());
        id
    }

    pub fn param_node(&self, name: &str) -> Option<NodeId> {
        self.params.get(name).copied()
    }

    pub fn gather(&mut self, src: NodeId, index: Arc<[u32]>, shape: &[usize]) -> NodeId {
        let value = self.value(src).gather(&index, shape);
        self.push(value, Op::Gather { src, index })
    }

    /// Copy with a new shape (same element count).
    pub fn reshape(&mut self, src: NodeId, shape: &[usize]) -> NodeId {
        let n = self.value(src).len();
        assert_eq!(n, shape.iter().product::<usize>(), "reshape size mismatch");
        let index: Arc<[u32]> = (0..n as u32).collect();
        self.gather(src, index, shape)
    }

    /// Affine map over the last axis: `x·w + b` with `w` of shape `(in, out)`.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: Option<NodeId>) -> NodeId {
        let xs = self.value(x);
        let ws = self.value(w);
        let din = xs.last_dim();
        assert_eq!(ws.shape().len(), 2, "linear weight must be 2-D");
        assert_eq!(ws.shape()[0], din, "linear input width mismatch");
        let dout = ws.shape()[1];
        let rows = xs.len() / din;
        let mut out = vec![T::ZERO; rows * dout];
        if let Some(b) = b {
            let bias = self.value(b).data();
            assert_eq!(bias.len(), dout, "linear bias width mismatch");
            for r in out.chunks_mut(dout) {
                r.copy_from_slice(bias);
            }
        }
        let beta = if b.is_some() { T::ONE } else { T::ZERO };
        T::gemm(
            rows,
            din,
            dout,
            T::ONE,
            xs.data(),
            din as isize,
            1,
            ws.data(),
            dout as isize,
            1,
            beta,
            &mut out,
            dout as isize,
            1,
        );
        let mut shape = xs.shape().to_vec();
        *shape.last_mut().unwrap() = dout;
        let value = Tensor::new(&shape, out).expect("linear output shape");
        self.push(value, Op::Linear { x, w, b })
    }

    /// Batched matrix product over all leading axes. `a` is `(.., n, k)`; `b`
    /// is `(.., k, m)` or, with `trans_b`, `(.., m, k)`.
    pub fn batch_matmul(&mut self, a: NodeId, b: NodeId, trans_b: bool) -> NodeId {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        let r = sa.len();
        assert!(r >= 2 && sb.len() == r, "batch_matmul rank mismatch");
        assert_eq!(sa[..r - 2], sb[..r - 2], "batch_matmul batch mismatch");
        let (n, k) = (sa[r - 2], sa[r - 1]);
        let m = if trans_b {
            assert_eq!(sb[r - 1], k);
            sb[r - 2]
        } else {
            assert_eq!(sb[r - 2], k);
            sb[r - 1]
        };
        let batch: usize = sa[..r - 2].iter().product();
        let mut shape = sa.to_vec();
        shape[r - 1] = m;
        let mut out = vec![T::ZERO; batch * n * m];
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let (rsb, csb) = if trans_b { (1, k as isize) } else { (m as isize, 1) };
        for i in 0..batch {
            T::gemm(
                n,
                k,
                m,
                T::ONE,
                &ad[i * n * k..(i + 1) * n * k],
                k as isize,
                1,
                &bd[i * k * m..(i + 1) * k * m],
                rsb,
                csb,
                T::ZERO,
                &mut out[i * n * m..(i + 1) * n * m],
                m as isize,
                1,
            );
        }
        let value = Tensor::new(&shape, out).expect("matmul output shape");
        self.push(value, Op::BatchMatmul { a, b, trans_b })
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "add shape mismatch");
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(va.shape(), data).unwrap();
        self.push(value, Op::Add { a, b })
    }

    /// `x + y` where `y`'s shape is a suffix of `x`'s shape.
    pub fn add_broadcast(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (vx, vy) = (self.value(x), self.value(y));
        assert!(
            vx.shape().ends_with(vy.shape()),
            "add_broadcast: {:?} is not a suffix of {:?}",
            vy.shape(),
            vx.shape()
        );
        let inner = vy.len();
        let mut data = vx.data().to_vec();
        for chunk in data.chunks_mut(inner) {
            for (d, &b) in chunk.iter_mut().zip(vy.data()) {
                *d += b;
            }
        }
        let value = Tensor::new(vx.shape(), data).unwrap();
        self.push(value, Op::AddBroadcast { x, y })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "mul shape mismatch");
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::new(va.shape(), data).unwrap();
        self.push(value, Op::Mul { a, b })
    }

    pub fn scale(&mut self, x: NodeId, s: T) -> NodeId {
        let value = self.value(x).map(|v| v * s);
        self.push(value, Op::Scale { x, s })
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let vx = self.value(x);
        let d = vx.last_dim();
        let mut data = vx.data().to_vec();
        for row in data.chunks_mut(d) {
            let mx = row.iter().copied().fold(row[0], T::max);
            let mut sum = T::ZERO;
            for v in row.iter_mut() {
                *v = (*v - mx).exp();
                sum += *v;
            }
            for v in row.iter_mut() {
                *v = *v / sum;
            }
        }
        let value = Tensor::new(vx.shape(), data).unwrap();
        self.push(value, Op::Softmax { x })
    }

    /// Layer normalization over the last axis with affine `gamma`/`beta`.
    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId, eps: f64) -> NodeId {
        let vx = self.value(x);
        let d = vx.last_dim();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        assert_eq!(g.len(), d, "layer_norm gamma width");
        assert_eq!(b.len(), d, "layer_norm beta width");
        let rows = vx.len() / d;
        let mut xhat = vec![T::ZERO; vx.len()];
        let mut rstd = vec![T::ZERO; rows];
        let mut out = vec![T::ZERO; vx.len()];
        let inv_d = T::from_f64(1.0 / d as f64);
        let eps = T::from_f64(eps);
        for (r, row) in vx.data().chunks(d).enumerate() {
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let rs = T::ONE / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mean) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + b[j];
            }
        }
        let value = Tensor::new(vx.shape(), out).unwrap();
        self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        )
    }

    /// Exact (erf-based) GELU.
    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(gelu);
        self.push(value, Op::Gelu { x })
    }

    /// Applies a spatial resampling plan: `x` is `(N, P, C)` with `P` the
    /// flattened source grid; the result is `(N, Q, C)`.
    pub fn resample(&mut self, x: NodeId, plan: Arc<ResamplePlan>) -> NodeId {
        let vx = self.value(x);
        let s = vx.shape();
        assert_eq!(s.len(), 3, "resample expects (N, P, C)");
        assert_eq!(s[1], plan.src_len, "resample source size mismatch");
        let (n, p, c) = (s[0], s[1], s[2]);
        let q = plan.dst_len();
        let mut out = vec![T::ZERO; n * q * c];
        let xd = vx.data();
        for b in 0..n {
            for (o, taps) in plan.taps.iter().enumerate() {
                let dst = &mut out[(b * q + o) * c..(b * q + o + 1) * c];
                for &(src, w) in taps {
                    let w = T::from_f64(w);
                    let srow = &xd[(b * p + src as usize) * c..(b * p + src as usize + 1) * c];
                    for (d, &v) in dst.iter_mut().zip(srow) {
                        *d += w * v;
                    }
                }
            }
        }
        let value = Tensor::new(&[n, q, c], out).unwrap();
        self.push(value, Op::Resample { x, plan })
    }

    /// Concatenation along the last axis; leading shapes must agree.
    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        assert!(!parts.is_empty(), "concat of nothing");
        let lead = {
            let s = self.value(parts[0]).shape();
            s[..s.len() - 1].to_vec()
        };
        let widths: Vec<usize> = parts
            .iter()
            .map(|&p| {
                let s = self.value(p).shape();
                assert_eq!(&s[..s.len() - 1], &lead[..], "concat leading shape mismatch");
                s[s.len() - 1]
            })
            .collect();
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let value = Tensor::new(&shape, out).unwrap();
        self.push(
            value,
            Op::Concat {
                parts: parts.to_vec(),
            },
        )
    }

    /// Propagates `seed` (the gradient of some scalar objective with respect
    /// to `output`) back through the tape.
    pub fn backward(&self, output: NodeId, seed: &Tensor<T>) -> Result<Gradients<T>, AutodiffError> {
        if self.nodes.is_empty() || output.0 >= self.nodes.len() {
            return Err(AutodiffError::BackwardBeforeForward);
        }
        if seed.shape() != self.value(output).shape() {
            return Err(AutodiffError::SeedShape {
                seed: seed.shape().to_vec(),
                output: self.value(output).shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(seed.data().to_vec());

        for id in (0..=output.0).rev() {
            let Some(dy) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(dy);
                }
                Op::Gather { src, index } => {
                    let g = slot(&mut grads, *src, self.value(*src).len());
                    for (&i, &d) in index.iter().zip(&dy) {
                        if i != GATHER_ZERO {
                            g[i as usize] += d;
                        }
                    }
                }
                Op::Linear { x, w, b } => {
                    let (vx, vw) = (self.value(*x), self.value(*w));
                    let din = vx.last_dim();
                    let dout = vw.shape()[1];
                    let rows = vx.len() / din;
                    {
                        let gx = slot(&mut grads, *x, vx.len());
                        T::gemm(
                            rows,
                            dout,
                            din,
                            T::ONE,
                            &dy,
                            dout as isize,
                            1,
                            vw.data(),
                            1,
                            dout as isize,
                            T::ONE,
                            gx,
                            din as isize,
                            1,
                        );
                    }
                    {
                        let gw = slot(&mut grads, *w, vw.len());
                        T::gemm(
                            din,
                            rows,
                            dout,
                            T::ONE,
                            vx.data(),
                            1,
                            din as isize,
                            &dy,
                            dout as isize,
                            1,
                            T::ONE,
                            gw,
                            dout as isize,
                            1,
                        );
                    }
                    if let Some(b) = b {
                        let gb = slot(&mut grads, *b, dout);
                        for row in dy.chunks(dout) {
                            for (g, &d) in gb.iter_mut().zip(row) {
                                *g += d;
                            }
                        }
                    }
                }
                Op::BatchMatmul { a, b, trans_b } => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let r = va.ndim();
                    let (n, k) = (va.shape()[r - 2], va.shape()[r - 1]);
                    let m = node.value.shape()[r - 1];
                    let batch = va.len() / (n * k);
                    let (rsb, csb) = if *trans_b { (1, k as isize) } else { (m as isize, 1) };
                    {
                        // dA = dC · Bᵀ
                        let ga = slot(&mut grads, *a, va.len());
                        for i in 0..batch {
                            T::gemm(
                                n,
                                m,
                                k,
                                T::ONE,
                                &dy[i * n * m..(i + 1) * n * m],
                                m as isize,
                                1,
                                &vb.data()[i * k * m..(i + 1) * k * m],
                                csb,
                                rsb,
                                T::ONE,
                                &mut ga[i * n * k..(i + 1) * n * k],
                                k as isize,
                                1,
                            );
                        }
                    }
                    {
                        // dB = Aᵀ · dC, or (dC)ᵀ · A when B was transposed.
                        let gb = slot(&mut grads, *b, vb.len());
                        for i in 0..batch {
                            let ad = &va.data()[i * n * k..(i + 1) * n * k];
                            let dc = &dy[i * n * m..(i + 1) * n * m];
                            let gbs = &mut gb[i * k * m..(i + 1) * k * m];
                            if *trans_b {
                                T::gemm(
                                    m, n, k, T::ONE, dc, 1, m as isize, ad, k as isize, 1,
                                    T::ONE, gbs, k as isize, 1,
                                );
                            } else {
                                T::gemm(
                                    k, n, m, T::ONE, ad, 1, k as isize, dc, m as isize, 1,
                                    T::ONE, gbs, m as isize, 1,
                                );
                            }
                        }
                    }
                }
                Op::Add { a, b } => {
                    accumulate(slot(&mut grads, *a, dy.len()), &dy);
                    accumulate(slot(&mut grads, *b, dy.len()), &dy);
                }
                Op::AddBroadcast { x, y } => {
                    let inner = self.value(*y).len();
                    accumulate(slot(&mut grads, *x, dy.len()), &dy);
                    let gy = slot(&mut grads, *y, inner);
                    for chunk in dy.chunks(inner) {
                        accumulate(gy, chunk);
                    }
                }
                Op::Mul { a, b } => {
                    let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                    {
                        let ga = slot(&mut grads, *a, dy.len());
                        for i in 0..dy.len() {
                            ga[i] += dy[i] * vb[i];
                        }
                    }
                    let gb = slot(&mut grads, *b, dy.len());
                    for i in 0..dy.len() {
                        gb[i] += dy[i] * va[i];
                    }
                }
                Op::Scale { x, s } => {
                    let gx = slot(&mut grads, *x, dy.len());
                    for (g, &d) in gx.iter_mut().zip(&dy) {
                        *g += d * *s;
                    }
                }
                Op::Softmax { x } => {
                    let y = node.value.data();
                    let d = node.value.last_dim();
                    let gx = slot(&mut grads, *x, dy.len());
                    for ((gr, yr), dr) in gx.chunks_mut(d).zip(y.chunks(d)).zip(dy.chunks(d)) {
                        let dot: T = yr.iter().zip(dr).map(|(&a, &b)| a * b).sum();
                        for j in 0..d {
                            gr[j] += yr[j] * (dr[j] - dot);
                        }
                    }
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let d = node.value.last_dim();
                    let g = self.value(*gamma).data();
                    {
                        let gg = slot(&mut grads, *gamma, d);
                        for (hr, dr) in xhat.chunks(d).zip(dy.chunks(d)) {
                            for j in 0..d {
                                gg[j] += dr[j] * hr[j];
                            }
                        }
                    }
                    {
                        let gb = slot(&mut grads, *beta, d);
                        for dr in dy.chunks(d) {
                            accumulate(gb, dr);
                        }
                    }
                    let inv_d = T::from_f64(1.0 / d as f64);
                    let gx = slot(&mut grads, *x, dy.len());
                    let mut dh = vec![T::ZERO; d];
                    for (r, (hr, dr)) in xhat.chunks(d).zip(dy.chunks(d)).enumerate() {
                        let mut mean_dh = T::ZERO;
                        let mut mean_dhh = T::ZERO;
                        for j in 0..d {
                            dh[j] = dr[j] * g[j];
                            mean_dh += dh[j];
                            mean_dhh += dh[j] * hr[j];
                        }
                        mean_dh *= inv_d;
                        mean_dhh *= inv_d;
                        let out = &mut gx[r * d..(r + 1) * d];
                        for j in 0..d {
                            out[j] += rstd[r] * (dh[j] - mean_dh - hr[j] * mean_dhh);
                        }
                    }
                }
                Op::Gelu { x } => {
                    let vx = self.value(*x).data();
                    let gx = slot(&mut grads, *x, dy.len());
                    for i in 0..dy.len() {
                        gx[i] += dy[i] * gelu_grad(vx[i]);
                    }
                }
                Op::Resample { x, plan } => {
                    let s = self.value(*x).shape();
                    let (n, p, c) = (s[0], s[1], s[2]);
                    let q = plan.dst_len();
                    let gx = slot(&mut grads, *x, n * p * c);
                    for b in 0..n {
                        for (o, taps) in plan.taps.iter().enumerate() {
                            let drow = &dy[(b * q + o) * c..(b * q + o + 1) * c];
                            for &(src, w) in taps {
                                let w = T::from_f64(w);
                                let base = (b * p + src as usize) * c;
                                for (g, &d) in gx[base..base + c].iter_mut().zip(drow) {
                                    *g += w * d;
                                }
                            }
                        }
                    }
                }
                Op::Concat { parts } => {
                    let total = node.value.last_dim();
                    let rows = dy.len() / total;
                    let mut off = 0;
                    for &p in parts {
                        let w = self.value(p).last_dim();
                        let gp = slot(&mut grads, p, rows * w);
                        for r in 0..rows {
                            accumulate(
                                &mut gp[r * w..(r + 1) * w],
                                &dy[r * total + off..r * total + off + w],
                            );
                        }
                        off += w;
                    }
                }
            }
        }

        let mut out = Gradients {
            grads: BTreeMap::new(),
            reached: BTreeSet::new(),
        };
        for (id, name) in &self.param_names {
            if id.0 > output.0 {
                continue;
            }
            if let Some(g) = grads[id.0].take() {
                let t = Tensor::new(self.value(*id).shape(), g).expect("grad shape");
                out.insert(name.clone(), t);
            }
        }
        Ok(out)
    }
}

fn slot<T: Scalar>(grads: &mut [Option<Vec<T>>], id: NodeId, len: usize) -> &mut [T] {
    grads[id.0].get_or_insert_with(|| vec![T::ZERO; len])
}

fn accumulate<T: Scalar>(dst: &mut [T], src: &[T]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn gelu<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    half * x * (T::ONE + (x * T::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf())
}

fn gelu_grad<T: Scalar>(x: T) -> T {
    let half = T::from_f64(0.5);
    let cdf = half * (T::ONE + (x * T::from_f64(std::f64::consts::FRAC_1_SQRT_2)).erf());
    let pdf = (-(x * x) * half).exp() * T::from_f64(1.0 / (2.0 * std::f64::consts::PI).sqrt());
    cdf + x * pdf
}
