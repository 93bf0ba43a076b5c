//! Backbone, decode head and the end-to-end segmenter.

use super::index;
use super::layers::{
    adaptive_avg_pool, conv1x1_act, conv3x3_act, layer_norm, linear, patch_embed, patch_merging,
    resize_bilinear, swin_block,
};
use super::{ModelError, ModelParams, SwinConfig};
use crate::autodiff::{AutodiffError, Gradients, NodeId, Tape};
use crate::tensor::{Scalar, Tensor};

/// Four feature maps at strides 4, 8, 16 and 32 with widths C, 2C, 4C, 8C.
/// Stage blocks alternate regular and shifted windows, starting regular.
pub fn backbone_forward<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    config: &SwinConfig,
    image: NodeId,
) -> Result<[NodeId; 4], ModelError> {
    let s = tape.shape(image);
    let stride = config.stride();
    if s.len() != 4 || s[3] != 3 || !s[1].is_multiple_of(stride) || !s[2].is_multiple_of(stride) {
        return Err(ModelError::Shape(format!(
            "backbone expects (N, H, W, 3) with H, W divisible by {stride}, got {s:?}"
        )));
    }
    let mut x = patch_embed(tape, params, "backbone.patch_embed", image, config.patch_size)?;
    let mut outs = [x; 4];
    for (stage, out) in outs.iter_mut().enumerate() {
        (x, *out) = run_stage(tape, params, config, stage, x)?;
    }
    Ok(outs)
}

/// One backbone stage. `x` is the previous stage's block output (or the patch
/// embedding for stage 0); returns the new block output and the normalized
/// pyramid level.
pub(crate) fn run_stage<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    config: &SwinConfig,
    stage: usize,
    mut x: NodeId,
) -> Result<(NodeId, NodeId), ModelError> {
    if stage > 0 {
        x = patch_merging(tape, params, &format!("backbone.layers.{}.downsample", stage - 1), x)?;
    }
    for b in 0..config.depths[stage] {
        let prefix = format!("backbone.layers.{stage}.blocks.{b}");
        x = swin_block(
            tape,
            params,
            &prefix,
            x,
            config.num_heads[stage],
            config.window_size,
            b % 2 == 1,
        )?;
    }
    let out = layer_norm(tape, params, &format!("backbone.norm{stage}"), x)?;
    Ok((x, out))
}

/// Pyramid pooling on the deepest level, top-down lateral fusion, FPN
/// smoothing, fusion of all levels at stride 4 and a per-pixel classifier,
/// bilinearly resized to `out_hw`. Returns `(N, out_h, out_w, classes)`.
pub fn upernet_head<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    config: &SwinConfig,
    pyramid: &[NodeId; 4],
    out_hw: (usize, usize),
) -> Result<NodeId, ModelError> {
    let hw = |tape: &Tape<T>, x: NodeId| (tape.shape(x)[1], tape.shape(x)[2]);

    let top = pyramid[3];
    let (th, tw) = hw(tape, top);
    let mut psp = vec![top];
    for (i, &scale) in config.pool_scales.iter().enumerate() {
        let pooled = adaptive_avg_pool(tape, top, scale, scale)?;
        let y = conv1x1_act(tape, params, &format!("decode_head.psp_modules.{i}.conv"), pooled)?;
        psp.push(resize_bilinear(tape, y, th, tw)?);
    }
    let cat = tape.concat(&psp);
    let psp_out = conv3x3_act(tape, params, "decode_head.bottleneck.conv", cat)?;

    let mut lats = Vec::with_capacity(4);
    for (i, &f) in pyramid.iter().take(3).enumerate() {
        lats.push(conv1x1_act(tape, params, &format!("decode_head.lateral_convs.{i}.conv"), f)?);
    }
    lats.push(psp_out);
    for i in (1..4).rev() {
        let (h, w) = hw(tape, lats[i - 1]);
        let up = resize_bilinear(tape, lats[i], h, w)?;
        lats[i - 1] = tape.add(lats[i - 1], up);
    }

    let (h0, w0) = hw(tape, lats[0]);
    let mut outs = Vec::with_capacity(4);
    for (i, &l) in lats.iter().take(3).enumerate() {
        let y = conv3x3_act(tape, params, &format!("decode_head.fpn_convs.{i}.conv"), l)?;
        outs.push(resize_bilinear(tape, y, h0, w0)?);
    }
    outs.push(resize_bilinear(tape, lats[3], h0, w0)?);
    let fused = tape.concat(&outs);
    let fused = conv3x3_act(tape, params, "decode_head.fpn_bottleneck.conv", fused)?;
    let logits = linear(tape, params, "decode_head.conv_seg", fused)?;
    resize_bilinear(tape, logits, out_hw.0, out_hw.1)
}

/// A recorded forward pass, ready for differentiation.
pub struct ForwardPass<T = f32> {
    tape: Tape<T>,
    logits: Option<NodeId>,
    shapes: Vec<(String, Vec<usize>)>,
}

impl<T: Scalar> Default for ForwardPass<T> {
    /// A pass with nothing recorded; [`ForwardPass::backward`] fails on it.
    fn default() -> Self {
        Self {
            tape: Tape::new(),
            logits: None,
            shapes: Vec::new(),
        }
    }
}

impl<T: Scalar> ForwardPass<T> {
    /// `(N, H, W, classes)` logits.
    pub fn logits(&self) -> Option<&Tensor<T>> {
        self.logits.map(|id| self.tape.value(id))
    }

    pub fn tape(&self) -> &Tape<T> {
        &self.tape
    }

    /// Gradients of every model parameter given `dlogits`, the gradient of
    /// the objective with respect to the logits. Parameters the pass never
    /// touched get zero tensors.
    pub fn backward(&self, dlogits: &Tensor<T>) -> Result<Gradients<T>, ModelError> {
        let out = self.logits.ok_or(AutodiffError::BackwardBeforeForward)?;
        let mut grads = self.tape.backward(out, dlogits)?;
        for (name, shape) in &self.shapes {
            grads.fill_zeros(name, shape);
        }
        Ok(grads)
    }
}

/// Backbone plus decode head with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SwinSegmenter<T = f32> {
    config: SwinConfig,
    params: ModelParams<T>,
}

impl<T: Scalar> SwinSegmenter<T> {
    /// Checks that `params` has exactly the layout `config` requires.
    pub fn new(config: SwinConfig, params: ModelParams<T>) -> Result<Self, ModelError> {
        config.validate()?;
        params.check_layout(&config)?;
        Ok(Self { config, params })
    }

    pub fn init(config: SwinConfig, seed: u64) -> Result<Self, ModelError> {
        let params = ModelParams::init(&config, seed)?;
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &SwinConfig {
        &self.config
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ModelParams<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ModelParams<T> {
        self.params
    }

    /// Records `(N, H, W, 3) → (N, H, W, classes)` on `tape`. Inputs of any
    /// size are zero-padded on the bottom/right to a multiple of the stride
    /// and the logits cropped back.
    pub fn forward(&self, tape: &mut Tape<T>, images: NodeId) -> Result<NodeId, ModelError> {
        let s = tape.shape(images).to_vec();
        let [n, h, w, c]: [usize; 4] = s
            .as_slice()
            .try_into()
            .map_err(|_| ModelError::Shape(format!("expected (N, H, W, 3) images, got {s:?}")))?;
        if c != 3 || h == 0 || w == 0 {
            return Err(ModelError::Shape(format!("expected (N, H, W, 3) images, got {s:?}")));
        }
        let stride = self.config.stride();
        let (hp, wp) = (h.div_ceil(stride) * stride, w.div_ceil(stride) * stride);
        let padded = if (hp, wp) == (h, w) {
            images
        } else {
            tape.gather(images, index::pad_index(n, h, w, c, hp, wp), &[n, hp, wp, c])
        };
        let pyramid = backbone_forward(tape, &self.params, &self.config, padded)?;
        let logits = upernet_head(tape, &self.params, &self.config, &pyramid, (hp, wp))?;
        let k = self.config.num_classes;
        let logits = if (hp, wp) == (h, w) {
            logits
        } else {
            tape.gather(logits, index::crop_index(n, hp, wp, k, h, w), &[n, h, w, k])
        };
        if !tape.value(logits).all_finite() {
            return Err(ModelError::NonFinite("logits".into()));
        }
        Ok(logits)
    }

    /// Runs a forward pass that can be differentiated afterwards.
    pub fn record(&self, images: &Tensor<T>) -> Result<ForwardPass<T>, ModelError> {
        let mut tape = Tape::new();
        let x = tape.constant(images.clone());
        let logits = self.forward(&mut tape, x)?;
        let shapes = self
            .params
            .iter()
            .map(|(k, v)| (k.to_string(), v.shape().to_vec()))
            .collect();
        Ok(ForwardPass {
            tape,
            logits: Some(logits),
            shapes,
        })
    }

    /// Inference-only logits for `(N, H, W, 3)` images.
    pub fn logits(&self, images: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let mut tape = Tape::new();
        let x = tape.constant(images.clone());
        let out = self.forward(&mut tape, x)?;
        Ok(tape.value(out).clone())
    }
}
