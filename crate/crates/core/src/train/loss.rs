use super::TrainError;
use crate::classes::NUM_CLASSES;
use crate::tensor::{Scalar, Tensor};
use crate::tiler::WeightVector;

/// Class-weighted softmax cross-entropy over `(…, 6)` logits.
///
/// `loss = Σ w[y]·(−log softmax(z)[y]) / Σ w[y]` over pixels whose label is
/// not `ignore`. Returns the loss and its gradient with respect to `logits`;
/// ignored pixels get zero gradient.
pub fn weighted_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[u8],
    weights: &WeightVector,
    ignore: u8,
) -> Result<(f64, Tensor<T>), TrainError> {
    let k = logits.last_dim();
    if k != NUM_CLASSES || logits.len() != labels.len() * k {
        return Err(TrainError::Shape(format!(
            "logits {:?} do not match {} labels",
            logits.shape(),
            labels.len()
        )));
    }
    let mut grad = vec![T::ZERO; logits.len()];
    let mut total_w = 0.0f64;
    let mut total = 0.0f64;
    let mut probs = [0.0f64; NUM_CLASSES];
    for (p, (&y, z)) in labels.iter().zip(logits.data().chunks(k)).enumerate() {
        if y == ignore {
            continue;
        }
        let y = y as usize;
        if y >= NUM_CLASSES {
            return Err(TrainError::Shape(format!("label {y} is not a class id")));
        }
        let w = weights.get(y);
        let mx = z.iter().map(|v| v.to_f64()).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (pk, v) in probs.iter_mut().zip(z) {
            *pk = (v.to_f64() - mx).exp();
            sum += *pk;
        }
        let log_sum = sum.ln();
        total += w * (log_sum - (z[y].to_f64() - mx));
        total_w += w;
        for c in 0..k {
            let s = probs[c] / sum - if c == y { 1.0 } else { 0.0 };
            grad[p * k + c] = T::from_f64(w * s);
        }
    }
    if total_w == 0.0 {
        return Err(TrainError::AllIgnored);
    }
    let inv = T::from_f64(1.0 / total_w);
    grad.iter_mut().for_each(|g| *g *= inv);
    let grad = Tensor::new(logits.shape(), grad).expect("grad shape");
    Ok((total / total_w, grad))
}
