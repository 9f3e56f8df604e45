//! k-nearest-neighbour classification on a precomputed distance matrix.

use gw_bounds::par;
use gw_bounds::rng::{derive_seed, seeded_rng};
use gw_bounds::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KnnReport {
    pub k: usize,
    pub splits: usize,
    pub train_frac: f64,
    pub train_size: usize,
    /// Test accuracy of each split, in split order.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Majority class among the `k` training points closest to `query`.
///
/// Neighbours are ordered by (distance, index). A tied vote goes to the class
/// with the smaller summed distance, then to the lower class index.
pub fn classify(dist: &Array2<f64>, labels: &[usize], train: &[usize], query: usize, k: usize) -> usize {
    let mut near: Vec<usize> = train.to_vec();
    near.sort_by(|&a, &b| dist[[query, a]].total_cmp(&dist[[query, b]]).then(a.cmp(&b)));
    near.truncate(k);
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut votes = vec![0usize; classes];
    let mut total = vec![0.0f64; classes];
    for &j in &near {
        votes[labels[j]] += 1;
        total[labels[j]] += dist[[query, j]];
    }
    (0..classes)
        .filter(|&c| votes[c] > 0)
        .min_by(|&a, &b| {
            votes[b]
                .cmp(&votes[a])
                .then(total[a].total_cmp(&total[b]))
                .then(a.cmp(&b))
        })
        .expect("k >= 1 gives at least one vote")
}

/// Training-set size for `n` points: `round(frac * n)`, kept in `1..n`.
pub fn train_size(n: usize, frac: f64) -> usize {
    ((frac * n as f64).round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

/// Accuracy over `splits` random train/test splits. Split `s` shuffles the
/// indices with a generator seeded by `derive_seed(seed, s)` and trains on
/// the first `train_size` of them.
pub fn knn_accuracy(
    dist: &Array2<f64>,
    labels: &[usize],
    k: usize,
    splits: usize,
    train_frac: f64,
    seed: u64,
) -> Result<KnnReport> {
    let n = dist.nrows();
    if dist.ncols() != n {
        return Err(Error::NotSquare { rows: n, row: 0, cols: dist.ncols() });
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for a {n} x {n} matrix",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(Error::Domain("need at least two points".into()));
    }
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::Domain(format!("train fraction {train_frac} outside (0, 1)")));
    }
    if splits == 0 || k == 0 {
        return Err(Error::Domain("k and splits must be >= 1".into()));
    }
    let n_train = train_size(n, train_frac);
    if k > n_train {
        return Err(Error::Domain(format!("k = {k} exceeds the training set size {n_train}")));
    }
    let accuracies = par::map_range(splits, |s| {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut seeded_rng(derive_seed(seed, s as u64)));
        let (train, test) = idx.split_at(n_train);
        let correct = test
            .iter()
            .filter(|&&q| classify(dist, labels, train, q, k) == labels[q])
            .count();
        correct as f64 / test.len() as f64
    });
    let (mean, std) = mean_std(&accuracies);
    Ok(KnnReport {
        k,
        splits,
        train_frac,
        train_size: n_train,
        accuracies,
        mean,
        std,
    })
}

/// Maps raw label strings to class indices. Numeric labels are ordered
/// numerically, anything else lexicographically.
pub fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut classes: Vec<String> = raw.to_vec();
    let numeric: Option<Vec<f64>> = raw.iter().map(|s| s.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        classes.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    } else {
        classes.sort();
    }
    classes.dedup();
    let index = raw
        .iter()
        .map(|s| classes.iter().position(|c| c == s).expect("present"))
        .collect();
    (index, classes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn two_clusters(n: usize) -> (Array2<f64>, Vec<usize>) {
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let d = Array2::from_shape_fn((n, n), |(i, j)| if labels[i] == labels[j] { 0.0 } else { 1.0 });
        (d, labels)
    }

    #[test]
    fn separated_clusters_are_perfect() {
        let (d, l) = two_clusters(80);
        let r = knn_accuracy(&d, &l, 3, 20, 0.25, 0).unwrap();
        assert_eq!(r.mean, 1.0);
        assert_eq!(r.std, 0.0);
    }

    #[test]
    fn vote_tie_prefers_closer_class() {
        let d = ndarray::array![
            [0.0, 1.0, 2.0, 1.5, 1.0],
            [1.0, 0.0, 1.0, 1.0, 1.0],
            [2.0, 1.0, 0.0, 1.0, 1.0],
            [1.5, 1.0, 1.0, 0.0, 1.0],
            [1.0, 1.0, 1.0, 1.0, 0.0],
        ];
        let labels = [0, 0, 1, 1, 0];
        // neighbours of 0 among {1,2,3,4} with k = 2: 1 and 4 (class 0)
        assert_eq!(classify(&d, &labels, &[1, 2, 3, 4], 0, 2), 0);
        // 1 (class 0, d=1) against 3 (class 1, d=1.5): class 0 is closer
        assert_eq!(classify(&d, &labels, &[1, 3], 0, 2), 0);
        // equal distances: lower class wins
        let labels = [0, 1, 0, 1, 0];
        assert_eq!(classify(&d, &labels, &[1, 4], 0, 2), 0);
    }

    #[test]
    fn k_larger_than_training_set() {
        let (d, l) = two_clusters(8);
        assert!(knn_accuracy(&d, &l, 3, 5, 0.25, 0).is_err());
        assert!(knn_accuracy(&d, &l, 2, 5, 0.25, 0).is_ok());
    }

    #[test]
    fn structureless_matrix_accuracy() {
        // all off-diagonals equal: every query gets the same three
        // neighbours, a random draw from the training set, so the prediction
        // is class 0 with probability 20/27 and the expected accuracy is
        // 20/27 * 2/3 + 7/27 * 1/3 = 47/81
        let n = 60;
        let d = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { 1.0 });
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let r = knn_accuracy(&d, &labels, 3, 400, 0.25, 1).unwrap();
        assert!((r.mean - 47.0 / 81.0).abs() < 0.04, "{}", r.mean);
    }

    #[test]
    fn label_encoding() {
        let raw: Vec<String> = ["10", "2", "10", "3"].iter().map(|s| s.to_string()).collect();
        let (idx, classes) = encode_labels(&raw);
        assert_eq!(classes, vec!["2", "3", "10"]);
        assert_eq!(idx, vec![2, 0, 2, 1]);
    }
}
