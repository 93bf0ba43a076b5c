//! Central finite-difference check of every model parameter.
//!
//! The objective is `Σ logits ⊙ R` for a fixed random `R`. Each perturbed
//! evaluation restarts from cached activations at the entry of the first
//! stage that reads the parameter, so deep parameters are cheap to check.

use super::layers::patch_embed;
use super::model::{run_stage, upernet_head};
use super::{ModelError, ModelParams, SwinConfig};
use crate::autodiff::{NodeId, Tape};
use crate::tensor::Tensor;

/// Worst-case agreement for one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    pub name: String,
    pub count: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
}

impl GradCheckReport {
    pub fn scalars_checked(&self) -> usize {
        self.params.iter().map(|p| p.count).sum()
    }

    pub fn worst(&self) -> Option<&ParamCheck> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }

    pub fn max_rel_err(&self) -> f64 {
        self.worst().map_or(0.0, |p| p.max_rel_err)
    }
}

/// Gradients smaller than this are indistinguishable from finite-difference
/// round-off and count as zero in [`relative_error`].
pub const ZERO_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, ZERO_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ZERO_FLOOR)
}

/// Where a perturbed evaluation has to restart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entry {
    Embed,
    Stage(usize),
    Head,
}

fn entry_of(name: &str) -> Entry {
    if name.starts_with("decode_head.") {
        return Entry::Head;
    }
    if name.starts_with("backbone.patch_embed.") {
        return Entry::Embed;
    }
    if let Some(rest) = name.strip_prefix("backbone.norm") {
        return Entry::Stage(rest[..1].parse().expect("stage digit"));
    }
    let rest = name.strip_prefix("backbone.layers.").expect("known parameter prefix");
    let stage: usize = rest[..1].parse().expect("stage digit");
    if rest[2..].starts_with("downsample") {
        Entry::Stage(stage + 1)
    } else {
        Entry::Stage(stage)
    }
}

struct Cache {
    /// Input to each stage (patch embedding for stage 0).
    stage_in: [Tensor<f64>; 4],
    pyramid: [Tensor<f64>; 4],
}

struct Evaluator<'a> {
    config: &'a SwinConfig,
    images: &'a Tensor<f64>,
    weights: &'a Tensor<f64>,
    cache: Cache,
}

impl Evaluator<'_> {
    fn objective(&self, params: &ModelParams<f64>, entry: Entry) -> Result<f64, ModelError> {
        let (h, w) = (self.images.shape()[1], self.images.shape()[2]);
        let mut tape = Tape::new();
        let first = match entry {
            Entry::Embed => 0,
            Entry::Stage(s) => s,
            Entry::Head => 4,
        };
        let mut pyr: Vec<NodeId> = (0..first.min(4))
            .map(|s| tape.constant(self.cache.pyramid[s].clone()))
            .collect();
        if first < 4 {
            let mut x = if entry == Entry::Embed {
                let img = tape.constant(self.images.clone());
                patch_embed(&mut tape, params, "backbone.patch_embed", img, self.config.patch_size)?
            } else {
                tape.constant(self.cache.stage_in[first].clone())
            };
            for s in first..4 {
                let (nx, out) = run_stage(&mut tape, params, self.config, s, x)?;
                x = nx;
                pyr.push(out);
            }
        } else {
            pyr = (0..4).map(|s| tape.constant(self.cache.pyramid[s].clone())).collect();
        }
        let pyr: [NodeId; 4] = pyr.try_into().expect("four levels");
        let logits = upernet_head(&mut tape, params, self.config, &pyr, (h, w))?;
        Ok(tape
            .value(logits)
            .data()
            .iter()
            .zip(self.weights.data())
            .map(|(a, b)| a * b)
            .sum())
    }
}

/// Compares backprop gradients of `Σ logits ⊙ weights` against central
/// differences with the given `step` for every scalar of every parameter.
///
/// `images` must be `(N, H, W, 3)` with sides divisible by the model stride.
pub fn gradient_check(
    config: &SwinConfig,
    params: &ModelParams<f64>,
    images: &Tensor<f64>,
    weights: &Tensor<f64>,
    step: f64,
) -> Result<GradCheckReport, ModelError> {
    params.check_layout(config)?;
    let (h, w) = (images.shape()[1], images.shape()[2]);

    let mut tape = Tape::new();
    let img = tape.constant(images.clone());
    let mut x = patch_embed(&mut tape, params, "backbone.patch_embed", img, config.patch_size)?;
    let mut stage_in = Vec::with_capacity(4);
    let mut pyr = [x; 4];
    for (s, out) in pyr.iter_mut().enumerate() {
        stage_in.push(tape.value(x).clone());
        (x, *out) = run_stage(&mut tape, params, config, s, x)?;
    }
    let logits = upernet_head(&mut tape, params, config, &pyr, (h, w))?;
    if tape.shape(logits) != weights.shape() {
        return Err(ModelError::Shape(format!(
            "weights {:?} do not match logits {:?}",
            weights.shape(),
            tape.shape(logits)
        )));
    }
    let grads = tape.backward(logits, weights)?;

    let eval = Evaluator {
        config,
        images,
        weights,
        cache: Cache {
            stage_in: stage_in.try_into().expect("four stages"),
            pyramid: pyr.map(|id| tape.value(id).clone()),
        },
    };
    drop(tape);

    let mut work = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut report = Vec::with_capacity(names.len());
    for name in names {
        let entry = entry_of(&name);
        let n = params.get(&name)?.len();
        let zero = Tensor::zeros(params.get(&name)?.shape());
        let analytic = grads.get(&name).unwrap_or(&zero);
        let mut check = ParamCheck {
            name: name.clone(),
            count: n,
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..n {
            let orig = work.get(&name)?.data()[i];
            work.get_mut(&name)?.data_mut()[i] = orig + step;
            let fp = eval.objective(&work, entry)?;
            work.get_mut(&name)?.data_mut()[i] = orig - step;
            let fm = eval.objective(&work, entry)?;
            work.get_mut(&name)?.data_mut()[i] = orig;
            let numeric = (fp - fm) / (2.0 * step);
            let a = analytic.data()[i];
            let err = relative_error(a, numeric);
            if err > check.max_rel_err || i == 0 {
                check.max_rel_err = err;
                check.worst_index = i;
                check.analytic = a;
                check.numeric = numeric;
            }
        }
        report.push(check);
    }
    Ok(GradCheckReport { params: report })
}
