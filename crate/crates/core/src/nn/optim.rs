use super::{Gradients, RnnModel, TrainConfig};

/// One RMSProp update, elementwise over every parameter:
/// `acc ← ρ·acc + (1−ρ)·g²`, `θ ← θ − lr·g / (√acc + ε)`.
pub fn rmsprop_step(model: &mut RnnModel, grads: &Gradients, config: &TrainConfig) {
    let (lr, rho, eps) = (config.learning_rate, config.rho, config.epsilon);
    let grads = grads.tensors();
    let params = model.params.tensors_mut();
    let accs = model.accumulators.tensors_mut();
    assert_eq!(grads.len(), params.len(), "gradient layout mismatch");
    for ((p, a), g) in params.into_iter().zip(accs).zip(grads) {
        assert_eq!(p.len(), g.len(), "gradient shape mismatch");
        for ((p, a), &g) in p.iter_mut().zip(a.iter_mut()).zip(g) {
            *a = rho * *a + (1.0 - rho) * g * g;
            *p -= lr * g / (a.sqrt() + eps);
        }
    }
}

/// Rescales `grads` in place so its global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut Gradients, max_norm: f64) -> f64 {
    let norm = grads.global_norm();
    if norm > max_norm && norm.is_finite() {
        let k = max_norm / norm;
        for t in grads.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelShape;

    fn tiny() -> RnnModel {
        RnnModel::new(&ModelShape::new(2, vec![2], vec![2]).unwrap(), 3)
    }

    #[test]
    fn first_step_closed_form() {
        let mut m = tiny();
        let before = m.params.clone();
        let mut g = m.params.zeros_like();
        g.tensors_mut().into_iter().for_each(|t| t.fill(1.0));
        let cfg = TrainConfig::default();
        rmsprop_step(&mut m, &g, &cfg);
        let expected = 0.001 / (0.1f64.sqrt() + 1e-7);
        assert!((expected - 0.003162).abs() < 1e-6);
        for (a, b) in before.tensors().iter().zip(m.params.tensors()) {
            for (x, y) in a.iter().zip(b) {
                assert!(((x - y) - expected).abs() < 1e-15);
            }
        }
        for a in m.accumulators.tensors() {
            assert!(a.iter().all(|&v| (v - 0.1).abs() < 1e-15));
        }
    }

    #[test]
    fn zero_gradient_is_noop() {
        let mut m = tiny();
        let before = m.params.clone();
        let g = m.params.zeros_like();
        rmsprop_step(&mut m, &g, &TrainConfig::default());
        assert_eq!(before, m.params);
    }

    #[test]
    fn update_opposes_gradient() {
        let mut m = tiny();
        let before = m.params.clone();
        let mut g = m.params.zeros_like();
        for (i, t) in g.tensors_mut().into_iter().enumerate() {
            for (k, v) in t.iter_mut().enumerate() {
                *v = if (i + k) % 2 == 0 { 0.7 } else { -1.3 };
            }
        }
        rmsprop_step(&mut m, &g, &TrainConfig::default());
        for ((a, b), gt) in before.tensors().iter().zip(m.params.tensors()).zip(g.tensors()) {
            for ((x, y), gv) in a.iter().zip(b).zip(gt) {
                assert!((y - x) * gv < 0.0);
            }
        }
    }

    #[test]
    fn clipping_caps_norm() {
        let m = tiny();
        let mut g = m.params.zeros_like();
        g.tensors_mut().into_iter().for_each(|t| t.fill(3.0));
        let before = clip_global_norm(&mut g, 5.0);
        assert!(before > 5.0);
        assert!((g.global_norm() - 5.0).abs() < 1e-9);
        let mut small = m.params.zeros_like();
        small.tensors_mut()[0][0] = 1.0;
        assert_eq!(clip_global_norm(&mut small, 5.0), 1.0);
        assert_eq!(small.tensors()[0][0], 1.0);
    }
}
