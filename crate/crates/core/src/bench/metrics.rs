use serde::{Deserialize, Serialize};

/// Precision, recall and F-score in percent, unrounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

/// `P = tp/(tp+fp)`, `R = tp/(tp+fn)`, `F = 2PR/(P+R)`, each times 100.
/// A zero denominator yields 0 for that metric.
pub fn compute_metrics(tp: usize, fp: usize, fn_: usize) -> Metrics {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    Metrics { precision: 100.0 * p, recall: 100.0 * r, f_score: 100.0 * f }
}

/// Rounds to one decimal, as reported.
pub fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

impl Metrics {
    pub fn rounded(&self) -> Self {
        Self { precision: round1(self.precision), recall: round1(self.recall), f_score: round1(self.f_score) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_denominators() {
        assert_eq!(compute_metrics(0, 0, 0), Metrics { precision: 0.0, recall: 0.0, f_score: 0.0 });
        let m = compute_metrics(0, 5, 0);
        assert_eq!((m.precision, m.recall, m.f_score), (0.0, 0.0, 0.0));
    }

    #[test]
    fn equal_precision_and_recall() {
        for (tp, miss) in [(1, 1), (3, 7), (90, 10), (5, 0)] {
            let m = compute_metrics(tp, miss, miss);
            assert!((m.f_score - m.precision).abs() < 1e-12);
            assert!((m.f_score - m.recall).abs() < 1e-12);
        }
    }

    #[test]
    fn known_rows() {
        // P = 2520/2800 = 0.900, R = 2520/3750 = 0.672
        let m = compute_metrics(2520, 280, 1230);
        assert_eq!(m.rounded(), Metrics { precision: 90.0, recall: 67.2, f_score: 76.9 });
    }
}
