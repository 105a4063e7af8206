use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary confusion counts with class 1 (bot) as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn check_inputs(pred: &[usize], labels: &[usize], mask: &[usize]) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::EmptySupervision(": cannot score an empty node set".into()));
    }
    if pred.len() != labels.len() {
        return Err(Error::dim(
            "confusion",
            format!("{} predictions", pred.len()),
            format!("{} labels", labels.len()),
        ));
    }
    if let Some(&v) = mask.iter().find(|&&v| v >= labels.len()) {
        return Err(Error::Parameter(format!("evaluated node {v} >= {}", labels.len())));
    }
    Ok(())
}

/// Counts over the masked nodes with `positive` as the positive class.
pub fn confusion_for_class(pred: &[usize], labels: &[usize], mask: &[usize], positive: usize) -> Result<Confusion> {
    check_inputs(pred, labels, mask)?;
    let mut c = Confusion::default();
    for &v in mask {
        match (pred[v] == positive, labels[v] == positive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Binary confusion over the masked nodes (positive class 1).
pub fn confusion(pred: &[usize], labels: &[usize], mask: &[usize]) -> Result<Confusion> {
    confusion_for_class(pred, labels, mask, 1)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoreMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Accuracy, precision, recall and F1 of one confusion matrix.
///
/// Zero denominators give 0: precision when `tp + fp = 0`, recall when
/// `tp + fn = 0`, F1 when `precision + recall = 0`, accuracy when empty.
pub fn metrics_from_confusion(c: &Confusion) -> CoreMetrics {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    CoreMetrics {
        accuracy: ratio(c.tp + c.tn, c.total()),
        precision,
        recall,
        f1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Scores of one evaluated prediction.
///
/// Binary tasks report the class-1 confusion and its precision, recall and
/// F1. With more classes, `per_class` holds one-vs-rest scores, `confusion`
/// is absent and the headline precision, recall and F1 are their unweighted means.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confusion: Option<Confusion>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub per_class: Vec<ClassMetrics>,
}

pub fn evaluate(pred: &[usize], labels: &[usize], mask: &[usize], num_classes: usize) -> Result<RunMetrics> {
    check_inputs(pred, labels, mask)?;
    if num_classes <= 2 {
        let c = confusion(pred, labels, mask)?;
        let m = metrics_from_confusion(&c);
        return Ok(RunMetrics {
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
            confusion: Some(c),
            per_class: Vec::new(),
        });
    }
    let correct = mask.iter().filter(|&&v| pred[v] == labels[v]).count();
    let mut per_class = Vec::with_capacity(num_classes);
    for class in 0..num_classes {
        let m = metrics_from_confusion(&confusion_for_class(pred, labels, mask, class)?);
        per_class.push(ClassMetrics {
            class,
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        });
    }
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / num_classes as f64;
    Ok(RunMetrics {
        accuracy: correct as f64 / mask.len() as f64,
        precision: mean(|c| c.precision),
        recall: mean(|c| c.recall),
        f1: mean(|c| c.f1),
        confusion: None,
        per_class,
    })
}

/// Fraction of `nodes` whose prediction matches the label.
pub fn accuracy(pred: &[usize], labels: &[usize], nodes: &[usize]) -> Result<f64> {
    check_inputs(pred, labels, nodes)?;
    Ok(nodes.iter().filter(|&&v| pred[v] == labels[v]).count() as f64 / nodes.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (`n - 1` denominator, 0 for one value).
pub fn mean_std(values: &[f64]) -> MeanStd {
    if values.is_empty() {
        return MeanStd::default();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub accuracy: MeanStd,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub f1: MeanStd,
}

pub fn aggregate_runs<'a>(runs: impl IntoIterator<Item = &'a RunMetrics>) -> Aggregate {
    let runs: Vec<&RunMetrics> = runs.into_iter().collect();
    let col = |f: fn(&RunMetrics) -> f64| mean_std(&runs.iter().map(|r| f(r)).collect::<Vec<_>>());
    Aggregate {
        runs: runs.len(),
        accuracy: col(|r| r.accuracy),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        f1: col(|r| r.f1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(tp: u64, tn: u64, fp: u64, fn_: u64) -> Confusion {
        Confusion { tp, tn, fp, fn_ }
    }

    #[test]
    fn perfect_prediction() {
        let labels = [0, 1, 1, 0, 1, 0, 0, 1, 1, 0];
        let mask: Vec<usize> = (0..10).collect();
        let k = confusion(&labels, &labels, &mask).unwrap();
        assert_eq!((k.fp, k.fn_, k.tp, k.tn), (0, 0, 5, 5));
        let m = metrics_from_confusion(&c(1, 1, 0, 0));
        assert_eq!((m.accuracy, m.precision, m.recall, m.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn all_positive() {
        let labels = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let mask: Vec<usize> = (0..10).collect();
        assert_eq!(confusion(&[1; 10], &labels, &mask).unwrap(), c(5, 0, 5, 0));
    }

    #[test]
    fn hand_evaluated_case() {
        let m = metrics_from_confusion(&c(2, 6, 1, 1));
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.accuracy, 0.8);
    }

    #[test]
    fn zero_division_conventions() {
        let m = metrics_from_confusion(&c(0, 5, 0, 3));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        let m = metrics_from_confusion(&c(0, 5, 2, 0));
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn empty_mask_errors() {
        assert!(confusion(&[0], &[0], &[]).is_err());
    }

    #[test]
    fn aggregation() {
        let run = |a: f64| RunMetrics {
            accuracy: a,
            precision: a,
            recall: a,
            f1: a,
            confusion: None,
            per_class: vec![],
        };
        let one = aggregate_runs(&[run(0.7)]);
        assert_eq!((one.accuracy.mean, one.accuracy.std), (0.7, 0.0));
        let two = aggregate_runs(&[run(0.8), run(0.9)]);
        assert!((two.accuracy.mean - 0.85).abs() < 1e-15);
        assert!((two.accuracy.std - 0.005f64.sqrt()).abs() < 1e-12);
        let same = aggregate_runs(&[run(0.6), run(0.6), run(0.6)]);
        assert_eq!((same.f1.mean, same.f1.std), (0.6, 0.0));
    }

    #[test]
    fn multiclass_reports_one_vs_rest() {
        let labels = [0, 1, 2, 2, 1, 0];
        let pred = [0, 2, 2, 2, 1, 1];
        let mask: Vec<usize> = (0..6).collect();
        let m = evaluate(&pred, &labels, &mask, 3).unwrap();
        assert!(m.confusion.is_none());
        assert_eq!(m.per_class.len(), 3);
        assert!((m.accuracy - 4.0 / 6.0).abs() < 1e-15);
        // class 2: predicted {1,2,3}, actual {2,3} -> P = 2/3, R = 1
        assert!((m.per_class[2].precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.per_class[2].recall, 1.0);
    }

    proptest! {
        #[test]
        fn recount_and_bounds(seed in any::<u64>(), n in 1usize..60) {
            use rand::Rng;
            let mut rng = crate::numkit::rng::stream(seed, &[]);
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
            let mask: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.7)).collect();
            prop_assume!(!mask.is_empty());
            let k = confusion(&pred, &labels, &mask).unwrap();
            let mut brute = [0u64; 4];
            for &v in &mask {
                brute[2 * labels[v] + pred[v]] += 1;
            }
            prop_assert_eq!((k.tn, k.fp, k.fn_, k.tp), (brute[0], brute[1], brute[2], brute[3]));
            let m = metrics_from_confusion(&k);
            for v in [m.accuracy, m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if m.precision > 0.0 && m.recall > 0.0 {
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-15);
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-15);
            }
            // evaluation order does not matter
            let mut rev = mask.clone();
            rev.reverse();
            prop_assert_eq!(confusion(&pred, &labels, &rev).unwrap(), k);
        }
    }
}
