use rand::Rng;

use crate::error::{Error, Result};

use super::DenseMatrix;

/// Which entries of a rectifier input were strictly positive.
#[derive(Clone, Debug)]
pub struct ReluMask {
    rows: usize,
    cols: usize,
    active: Vec<bool>,
}

pub fn relu_forward(x: &DenseMatrix) -> (DenseMatrix, ReluMask) {
    let active: Vec<bool> = x.as_slice().iter().map(|&v| v > 0.0).collect();
    let y = x.map(|v| if v > 0.0 { v } else { 0.0 });
    let (rows, cols) = x.shape();
    (y, ReluMask { rows, cols, active })
}

pub fn relu_backward(mask: &ReluMask, upstream: &DenseMatrix) -> Result<DenseMatrix> {
    if upstream.shape() != (mask.rows, mask.cols) {
        return Err(Error::dim(
            "relu_backward",
            format!("{}x{}", mask.rows, mask.cols),
            upstream.shape_str(),
        ));
    }
    let mut g = upstream.clone();
    for (v, &on) in g.as_mut_slice().iter_mut().zip(&mask.active) {
        if !on {
            *v = 0.0;
        }
    }
    Ok(g)
}

/// Row-wise softmax with per-row max subtraction.
pub fn softmax_rows(x: &DenseMatrix) -> DenseMatrix {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of `logits` against `labels` over the nodes in `mask`.
///
/// Returns the loss and its gradient with respect to the logits; rows outside
/// the mask carry zero gradient.
pub fn cross_entropy(logits: &DenseMatrix, labels: &[usize], mask: &[usize]) -> Result<(f64, DenseMatrix)> {
    if mask.is_empty() {
        return Err(Error::EmptySupervision(String::new()));
    }
    let classes = logits.cols();
    let mut grad = DenseMatrix::zeros(logits.rows(), classes);
    let scale = 1.0 / mask.len() as f64;
    let mut loss = 0.0;
    for &n in mask {
        if n >= logits.rows() || n >= labels.len() {
            return Err(Error::dim(
                "cross_entropy",
                logits.shape_str(),
                format!("masked node {n} (labels: {})", labels.len()),
            ));
        }
        let label = labels[n];
        if label >= classes {
            return Err(Error::Parameter(format!(
                "label {label} of node {n} outside {classes} classes"
            )));
        }
        let row = logits.row(n);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        loss -= row[label] - log_sum;
        let g = grad.row_mut(n);
        for (j, gv) in g.iter_mut().enumerate() {
            let p = (row[j] - log_sum).exp();
            *gv = (p - if j == label { 1.0 } else { 0.0 }) * scale;
        }
    }
    Ok((loss * scale, grad))
}

/// Inverted-dropout mask: 0 with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut impl Rng) -> Result<DenseMatrix> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Parameter(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return Ok(DenseMatrix::filled(rows, cols, 1.0));
    }
    let keep = 1.0 / (1.0 - rate);
    let data = (0..rows * cols)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect();
    DenseMatrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::rng::stream;
    use rand::Rng;

    fn random(r: usize, c: usize, seed: u64) -> DenseMatrix {
        let mut rng = stream(seed, &[]);
        DenseMatrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn relu_hand_cases() {
        let x = DenseMatrix::from_rows(&[vec![-1.0, 2.0]]).unwrap();
        let (y, mask) = relu_forward(&x);
        assert_eq!(y.as_slice(), &[0.0, 2.0]);
        let up = DenseMatrix::from_rows(&[vec![5.0, 5.0]]).unwrap();
        assert_eq!(relu_backward(&mask, &up).unwrap().as_slice(), &[0.0, 5.0]);
        assert!(relu_backward(&mask, &DenseMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn relu_gradient_matches_finite_differences() {
        // loss = Σ w ⊙ relu(x)
        let x = random(4, 3, 11);
        let w = random(4, 3, 12);
        let (_, mask) = relu_forward(&x);
        let analytic = relu_backward(&mask, &w).unwrap();
        let f = |x: &DenseMatrix| -> f64 {
            let (y, _) = relu_forward(x);
            y.as_slice().iter().zip(w.as_slice()).map(|(a, b)| a * b).sum()
        };
        let eps = 1e-6;
        for k in 0..12 {
            let mut plus = x.clone();
            plus.as_mut_slice()[k] += eps;
            let mut minus = x.clone();
            minus.as_mut_slice()[k] -= eps;
            let numeric = (f(&plus) - f(&minus)) / (2.0 * eps);
            let a = analytic.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            assert!(rel <= 1e-6, "coord {k}: {a} vs {numeric}");
        }
    }

    #[test]
    fn softmax_symmetric_and_stable() {
        let s = softmax_rows(&DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1000.0, 0.0]]).unwrap());
        assert_eq!(s.row(0), &[0.5, 0.5]);
        assert!((s.get(1, 0) - 1.0).abs() < 1e-15);
        assert!((0.0..1e-300).contains(&s.get(1, 1)));
        assert!(s.all_finite());
    }

    #[test]
    fn softmax_rows_normalized() {
        let s = softmax_rows(&random(10, 4, 3));
        for row in s.iter_rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn cross_entropy_analytic_values() {
        let logits = DenseMatrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let (l, _) = cross_entropy(&logits, &[1], &[0]).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
        let confident = DenseMatrix::from_rows(&[vec![50.0, -50.0]]).unwrap();
        let (l, _) = cross_entropy(&confident, &[0], &[0]).unwrap();
        assert!(l < 1e-40);
    }

    #[test]
    fn cross_entropy_rejects_empty_mask() {
        let err = cross_entropy(&DenseMatrix::zeros(2, 2), &[0, 1], &[]).unwrap_err();
        assert!(err.to_string().contains("empty supervision set"));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let logits = random(6, 2, 21);
        let labels = [0, 1, 1, 0, 1, 0];
        let mask = [0, 2, 3, 5];
        let (_, grad) = cross_entropy(&logits, &labels, &mask).unwrap();
        for r in [1, 4] {
            assert!(grad.row(r).iter().all(|&g| g == 0.0));
        }
        let eps = 1e-6;
        for k in 0..12 {
            let mut p = logits.clone();
            p.as_mut_slice()[k] += eps;
            let mut m = logits.clone();
            m.as_mut_slice()[k] -= eps;
            let numeric = (cross_entropy(&p, &labels, &mask).unwrap().0
                - cross_entropy(&m, &labels, &mask).unwrap().0)
                / (2.0 * eps);
            let a = grad.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            assert!(rel <= 1e-6, "coord {k}: {a} vs {numeric} (rel {rel})");
        }
    }

    #[test]
    fn dropout_rate_zero_is_ones() {
        let m = dropout_mask(3, 4, 0.0, &mut stream(0, &[])).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dropout_zero_fraction_concentrates() {
        let m = dropout_mask(1000, 100, 0.5, &mut stream(9, &[])).unwrap();
        let zeros = m.as_slice().iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&zeros), "{zeros}");
        assert!(m.as_slice().iter().all(|&v| v == 0.0 || v == 2.0));
    }

    #[test]
    fn dropout_deterministic_and_validated() {
        let a = dropout_mask(8, 8, 0.3, &mut stream(4, &[1])).unwrap();
        let b = dropout_mask(8, 8, 0.3, &mut stream(4, &[1])).unwrap();
        assert_eq!(a, b);
        assert!(dropout_mask(1, 1, 1.0, &mut stream(0, &[])).is_err());
        assert!(dropout_mask(1, 1, -0.1, &mut stream(0, &[])).is_err());
    }
}
