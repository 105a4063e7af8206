use super::ParamTensor;

/// Models whose learnable tensors can be enumerated in a fixed order.
pub trait Parameterized {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_scalars(&self) -> usize {
        self.params().iter().map(|p| p.value().as_slice().len()).sum()
    }
}

/// Compares the analytic gradients stored in `model` against central
/// differences of `loss`, returning the largest per-coordinate relative error
/// `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// `loss` must be deterministic and must not touch the gradients.
pub fn finite_diff_check<M, F>(model: &mut M, epsilon: f64, mut loss: F) -> f64
where
    M: Parameterized,
    F: FnMut(&M) -> f64,
{
    let sizes: Vec<usize> = model.params().iter().map(|p| p.value().as_slice().len()).collect();
    let mut worst = 0.0f64;
    for (p, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let original = model.params()[p].value().as_slice()[k];
            let analytic = model.params()[p].grad().as_slice()[k];

            model.params_mut()[p].value_mut().as_mut_slice()[k] = original + epsilon;
            let up = loss(model);
            model.params_mut()[p].value_mut().as_mut_slice()[k] = original - epsilon;
            let down = loss(model);
            model.params_mut()[p].value_mut().as_mut_slice()[k] = original;

            let numeric = (up - down) / (2.0 * epsilon);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((analytic - numeric).abs() / denom);
        }
    }
    worst
}
