pub const DEFAULT_POLY_POWER: f64 = 0.9;

/// Polynomial decay: `base_lr · (1 − step/max_steps)^power`.
///
/// Panics if `step > max_steps` or `max_steps == 0`.
pub fn poly_lr(step: usize, max_steps: usize, base_lr: f64, power: f64) -> f64 {
    assert!(max_steps > 0 && step <= max_steps, "step {step} outside 0..={max_steps}");
    base_lr * (1.0 - step as f64 / max_steps as f64).powf(power)
}
