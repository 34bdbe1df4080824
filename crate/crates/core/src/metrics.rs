//! Ranking metrics and summary statistics for experiment reports.

use serde::Serialize;
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum MetricsError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("metric needs both classes present")]
    SingleClass,
    #[error("empty input")]
    Empty,
}

/// Probability that a uniformly random positive outranks a uniformly random
/// negative, ties counting one half (the rank-sum estimator).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("scores must not be NaN"));
    // Average ranks across tied scores.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n))
}

/// Mean over positives, in score-descending order, of the precision at that
/// rank. Ties are broken deterministically by original index.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(MetricsError::Empty);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(MetricsError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b].partial_cmp(&scores[a]).expect("scores must not be NaN").then(a.cmp(&b))
    });
    let mut hits = 0usize;
    let mut total = 0.0;
    for (rank, &idx) in order.iter().enumerate() {
        if labels[idx] {
            hits += 1;
            total += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(total / positives as f64)
}

/// Fraction of predictions equal to the labels.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::LengthMismatch { scores: predictions.len(), labels: labels.len() });
    }
    if predictions.is_empty() {
        return Err(MetricsError::Empty);
    }
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Mean and standard error of a sample.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std_err: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_err = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    };
    Some(Summary { mean, std_err, count: values.len() })
}

/// Aggregated experiment results; fields are present when the task produces
/// them.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub neg_elbo: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recon_error: Option<Summary>,
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute force over all positive/negative pairs with ties counting half.
    fn auc_pairwise_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn perfect_ranking_scores_one() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(average_precision(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn reversed_ranking_scores_zero() {
        let scores = [0.9, 0.8, 0.3, 0.2];
        let labels = [false, false, true, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.0);
    }

    #[test]
    fn ties_count_half() {
        let scores = [0.9, 0.5, 0.5, 0.1];
        let labels = [true, false, true, false];
        let expected = auc_pairwise_oracle(&scores, &labels);
        assert!((expected - 0.875).abs() < 1e-15);
        assert!((auc(&scores, &labels).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn auc_matches_pairwise_oracle_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        for _ in 0..50 {
            let n = 30;
            // Coarse scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * 8.0).round() / 8.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
            labels[0] = true;
            labels[1] = false;
            let fast = auc(&scores, &labels).unwrap();
            let slow = auc_pairwise_oracle(&scores, &labels);
            assert!((fast - slow).abs() < 1e-12, "{fast} vs {slow}");
        }
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let scores: Vec<f64> = (0..40).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let labels: Vec<bool> = (0..40).map(|i| i % 3 == 0).collect();
        let base = auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|&s| crate::tensor::sigmoid(3.0 * s + 1.0)).collect();
        let exp: Vec<f64> = scores.iter().map(|&s| s.exp()).collect();
        assert!((auc(&squashed, &labels).unwrap() - base).abs() < 1e-12);
        assert!((auc(&exp, &labels).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn ap_of_ranked_labels_101() {
        // Descending-rank labels (1, 0, 1): precisions 1/1 and 2/3.
        let scores = [0.9, 0.5, 0.2];
        let labels = [true, false, true];
        let expected = (1.0 + 2.0 / 3.0) / 2.0;
        assert!((average_precision(&scores, &labels).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn single_class_inputs_are_rejected() {
        assert_eq!(auc(&[0.1, 0.2], &[true, true]).unwrap_err(), MetricsError::SingleClass);
        assert_eq!(
            average_precision(&[0.1, 0.2], &[false, false]).unwrap_err(),
            MetricsError::SingleClass
        );
    }

    #[test]
    fn summary_of_constant_sample_has_zero_error() {
        let s = summarize(&[2.0, 2.0, 2.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.std_err, 0.0);
        assert_eq!(s.count, 3);
    }
}
