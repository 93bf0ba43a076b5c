use std::collections::BTreeMap;

use crate::autodiff::Gradients;
use crate::swin::ModelParams;
use crate::tensor::Tensor;

/// Adam with decoupled weight decay.
///
/// Parameters the backward pass did not reach keep their values and moments.
/// Vectors (norm gains, biases) and relative-position bias tables are not
/// decayed.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    steps: BTreeMap<String, u64>,
    moments: BTreeMap<String, (Vec<f32>, Vec<f32>)>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            steps: BTreeMap::new(),
            moments: BTreeMap::new(),
        }
    }

    pub fn decays(name: &str, value: &Tensor<f32>) -> bool {
        value.ndim() > 1 && !name.ends_with("relative_position_bias_table")
    }

    pub fn step(&mut self, params: &mut ModelParams<f32>, grads: &Gradients<f32>, lr: f64) {
        for (name, p) in params.iter_mut() {
            if !grads.is_active(name) {
                continue;
            }
            let g = grads.get(name).expect("active gradient");
            let t = self.steps.entry(name.to_string()).or_insert(0);
            *t += 1;
            let (m, v) = self
                .moments
                .entry(name.to_string())
                .or_insert_with(|| (vec![0.0; p.len()], vec![0.0; p.len()]));
            let bc1 = 1.0 - self.beta1.powi(*t as i32);
            let bc2 = 1.0 - self.beta2.powi(*t as i32);
            let decay = if Self::decays(name, p) { 1.0 - lr * self.weight_decay } else { 1.0 };
            let (b1, b2) = (self.beta1 as f32, self.beta2 as f32);
            for ((w, &gi), (mi, vi)) in p.data_mut().iter_mut().zip(g.data()).zip(m.iter_mut().zip(v.iter_mut())) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let mhat = *mi as f64 / bc1;
                let vhat = *vi as f64 / bc2;
                *w = (*w as f64 * decay - lr * mhat / (vhat.sqrt() + self.eps)) as f32;
            }
        }
    }
}
