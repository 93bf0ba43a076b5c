//! Named parameter storage, the canonical parameter layout of a config, and
//! initialization.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{ModelError, SwinConfig};
use crate::tensor::{Scalar, Tensor};

pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Normal(0, 0.02²) truncated to ±2σ.
    TruncNormal,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

fn push(out: &mut Vec<ParamSpec>, name: String, shape: Vec<usize>, init: Init) {
    out.push(ParamSpec { name, shape, init });
}

fn linear(out: &mut Vec<ParamSpec>, prefix: &str, din: usize, dout: usize, bias: bool) {
    push(out, format!("{prefix}.weight"), vec![din, dout], Init::TruncNormal);
    if bias {
        push(out, format!("{prefix}.bias"), vec![dout], Init::Zeros);
    }
}

fn norm(out: &mut Vec<ParamSpec>, prefix: &str, dim: usize) {
    push(out, format!("{prefix}.weight"), vec![dim], Init::Ones);
    push(out, format!("{prefix}.bias"), vec![dim], Init::Zeros);
}

/// Every parameter of a model built from `config`, in a fixed order.
///
/// Weights are stored `(in, out)`. Convolution kernels are flattened to
/// `(k·k·in, out)` in `(ky, kx, channel)` order.
pub fn param_specs(config: &SwinConfig) -> Vec<ParamSpec> {
    let mut out = Vec::new();
    let p = config.patch_size;
    let c0 = config.embed_dim;
    let m = config.window_size;
    linear(&mut out, "backbone.patch_embed.proj", p * p * 3, c0, true);
    norm(&mut out, "backbone.patch_embed.norm", c0);
    for s in 0..4 {
        let c = config.stage_dim(s);
        let heads = config.num_heads[s];
        for b in 0..config.depths[s] {
            let pre = format!("backbone.layers.{s}.blocks.{b}");
            norm(&mut out, &format!("{pre}.norm1"), c);
            linear(&mut out, &format!("{pre}.attn.qkv"), c, 3 * c, true);
            push(
                &mut out,
                format!("{pre}.attn.relative_position_bias_table"),
                vec![(2 * m - 1) * (2 * m - 1), heads],
                Init::Zeros,
            );
            linear(&mut out, &format!("{pre}.attn.proj"), c, c, true);
            norm(&mut out, &format!("{pre}.norm2"), c);
            let hidden = c * config.mlp_ratio;
            linear(&mut out, &format!("{pre}.mlp.fc1"), c, hidden, true);
            linear(&mut out, &format!("{pre}.mlp.fc2"), hidden, c, true);
        }
        if s < 3 {
            let pre = format!("backbone.layers.{s}.downsample");
            norm(&mut out, &format!("{pre}.norm"), 4 * c);
            linear(&mut out, &format!("{pre}.reduction"), 4 * c, 2 * c, false);
        }
        norm(&mut out, &format!("backbone.norm{s}"), c);
    }
    let ch = config.decoder_channels;
    let top = config.stage_dim(3);
    for (i, _) in config.pool_scales.iter().enumerate() {
        linear(&mut out, &format!("decode_head.psp_modules.{i}.conv"), top, ch, true);
    }
    let cat = top + config.pool_scales.len() * ch;
    linear(&mut out, "decode_head.bottleneck.conv", 9 * cat, ch, true);
    for i in 0..3 {
        linear(&mut out, &format!("decode_head.lateral_convs.{i}.conv"), config.stage_dim(i), ch, true);
        linear(&mut out, &format!("decode_head.fpn_convs.{i}.conv"), 9 * ch, ch, true);
    }
    linear(&mut out, "decode_head.fpn_bottleneck.conv", 9 * 4 * ch, ch, true);
    linear(&mut out, "decode_head.conv_seg", ch, config.num_classes, true);
    out
}

/// Parameter tensors keyed by canonical layer path.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T = f32> {
    tensors: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            tensors: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeded initialization of every parameter in `config`.
    pub fn init(config: &SwinConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let mut params = Self::new();
        for spec in param_specs(config) {
            let t = match spec.init {
                Init::Zeros => Tensor::zeros(&spec.shape),
                Init::Ones => Tensor::ones(&spec.shape),
                Init::TruncNormal => Tensor::from_fn(&spec.shape, |_| loop {
                    let v: f64 = normal.sample(&mut rng);
                    if v.abs() <= 2.0 * INIT_STD {
                        break T::from_f64(v);
                    }
                }),
            };
            params.insert(spec.name, t);
        }
        Ok(params)
    }

    /// Random parameters for gradient checks: weight matrices drawn from
    /// `U(±scale/√fan_in)`, vectors and bias tables from `U(±scale)`, norm
    /// gains around 1. Unlike the zero-bias init this exercises every path.
    pub fn random(config: &SwinConfig, seed: u64, scale: f64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::new();
        for spec in param_specs(config) {
            let offset = if spec.init == Init::Ones { 1.0 } else { 0.0 };
            let bound = if spec.init == Init::TruncNormal {
                scale / (spec.shape[0] as f64).sqrt()
            } else {
                scale
            };
            let t = Tensor::from_fn(&spec.shape, |_| T::from_f64(offset + rng.gen_range(-bound..bound)));
            params.insert(spec.name, t);
        }
        Ok(params)
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        self.tensors.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>, ModelError> {
        self.tensors
            .get(name)
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>, ModelError> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| ModelError::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<T>)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(Tensor::all_finite)
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        ModelParams {
            tensors: self.tensors.iter().map(|(k, v)| (k.clone(), v.cast())).collect(),
        }
    }

    /// Checks names and shapes against `config` exactly.
    pub fn check_layout(&self, config: &SwinConfig) -> Result<(), ModelError> {
        let specs = param_specs(config);
        for spec in &specs {
            let t = self.get(&spec.name)?;
            if t.shape() != spec.shape.as_slice() {
                return Err(ModelError::Shape(format!(
                    "{}: expected {:?}, found {:?}",
                    spec.name,
                    spec.shape,
                    t.shape()
                )));
            }
        }
        if specs.len() != self.len() {
            let known: std::collections::BTreeSet<&str> = specs.iter().map(|s| s.name.as_str()).collect();
            let extra = self.names().find(|n| !known.contains(n)).unwrap_or("?");
            return Err(ModelError::Shape(format!("unexpected parameter `{extra}`")));
        }
        if let Some((name, _)) = self.iter().find(|(_, t)| !t.all_finite()) {
            return Err(ModelError::NonFinite(name.to_string()));
        }
        Ok(())
    }
}
