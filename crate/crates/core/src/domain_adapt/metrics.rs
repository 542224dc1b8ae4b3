use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::DaError;
use crate::rng::stream;

/// Fraction of rows whose nearest neighbour (Euclidean, excluding itself,
/// ties to the lower index) carries the same label.
pub fn gsi(features: &DMatrix<f64>, labels: &[usize]) -> Result<f64, DaError> {
    let n = features.nrows();
    if n < 2 || labels.len() != n {
        return Err(DaError::Argument(format!(
            "gsi needs at least 2 rows and one label per row (rows {n}, labels {})",
            labels.len()
        )));
    }
    // Row-major copy so each distance walks contiguous memory.
    let d = features.ncols();
    let rows: Vec<f64> = features.transpose().as_slice().to_vec();
    let same: usize = (0..n)
        .into_par_iter()
        .map(|i| {
            let a = &rows[i * d..(i + 1) * d];
            let mut best = (f64::INFINITY, usize::MAX);
            for j in 0..n {
                if j == i {
                    continue;
                }
                let b = &rows[j * d..(j + 1) * d];
                let dist: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                if dist < best.0 {
                    best = (dist, j);
                }
            }
            (labels[best.1] == labels[i]) as usize
        })
        .sum();
    Ok(same as f64 / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSettings {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

/// Held-out accuracy of a multinomial logistic regression trained by
/// full-batch gradient descent on standardized features. The split is a
/// shuffle drawn from `seed`.
pub fn probe_accuracy(
    features: &DMatrix<f64>,
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
) -> Result<f64, DaError> {
    probe_accuracy_with(features, labels, train_fraction, seed, &ProbeSettings::default())
}

pub fn probe_accuracy_with(
    features: &DMatrix<f64>,
    labels: &[usize],
    train_fraction: f64,
    seed: u64,
    settings: &ProbeSettings,
) -> Result<f64, DaError> {
    let n = features.nrows();
    if labels.len() != n {
        return Err(DaError::Argument(format!("{} labels for {n} rows", labels.len())));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(DaError::DegenerateSplit(format!(
            "train fraction {train_fraction} leaves an empty split of {n} rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "probe", 0));
    let (train, test) = order.split_at(n_train);
    let classes = labels.iter().max().unwrap() + 1;
    let mut seen = vec![false; classes];
    train.iter().for_each(|&i| seen[labels[i]] = true);
    if seen.iter().filter(|s| **s).count() < 2 {
        return Err(DaError::DegenerateSplit(
            "fewer than two classes in the training split".into(),
        ));
    }

    let d = features.ncols();
    let pick = |idx: &[usize]| DMatrix::from_fn(idx.len(), d, |r, c| features[(idx[r], c)]);
    let mut xtr = pick(train);
    let mut xte = pick(test);
    for c in 0..d {
        let col = xtr.column(c);
        let mean = col.mean();
        let std = col.variance().sqrt();
        let std = if std > 1e-12 { std } else { 1.0 };
        xtr.column_mut(c).apply(|v| *v = (*v - mean) / std);
        xte.column_mut(c).apply(|v| *v = (*v - mean) / std);
    }

    let mut onehot = DMatrix::zeros(train.len(), classes);
    train
        .iter()
        .enumerate()
        .for_each(|(r, &i)| onehot[(r, labels[i])] = 1.0);
    let mut w = DMatrix::<f64>::zeros(d, classes);
    let mut b = DVector::<f64>::zeros(classes);
    let m = train.len() as f64;
    for _ in 0..settings.iterations {
        let p = softmax_rows(&xtr, &w, &b);
        let diff = p - &onehot;
        let gw = xtr.transpose() * &diff / m + &w * settings.l2;
        let gb = diff.row_sum().transpose() / m;
        w -= gw * settings.learning_rate;
        b -= gb * settings.learning_rate;
    }

    let scores = &xte * &w;
    let correct = test
        .iter()
        .enumerate()
        .filter(|(r, &i)| {
            let row = scores.row(*r);
            let best = (0..classes)
                .max_by(|&a, &c| (row[a] + b[a]).total_cmp(&(row[c] + b[c])).then(c.cmp(&a)))
                .unwrap();
            best == labels[i]
        })
        .count();
    Ok(correct as f64 / test.len() as f64)
}

fn softmax_rows(x: &DMatrix<f64>, w: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut z = x * w;
    for mut row in z.row_iter_mut() {
        let mut max = f64::NEG_INFINITY;
        for (v, bb) in row.iter_mut().zip(b.iter()) {
            *v += bb;
            max = max.max(*v);
        }
        let mut sum = 0.0;
        row.apply(|v| {
            *v = (*v - max).exp();
            sum += *v;
        });
        row.apply(|v| *v /= sum);
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gsi_on_alternating_line_is_zero() {
        let f = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        // 0→1, 1→0 (tie with 2 goes to the lower index), 2→1, 3→2
        assert_eq!(gsi(&f, &[0, 1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn gsi_tie_breaks_to_lower_index() {
        let f = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 2.0]);
        // row 0 is equidistant from rows 1 and 2 and takes row 1's label;
        // row 2's nearest is row 0
        let g = gsi(&f, &[0, 0, 1]).unwrap();
        assert!((g - 2.0 / 3.0).abs() < 1e-12);
        assert!((gsi(&f, &[0, 1, 1]).unwrap() - 0.0).abs() < 1e-12);
        let identical = DMatrix::zeros(3, 2);
        assert!((gsi(&identical, &[1, 1, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn gsi_rejects_tiny_inputs() {
        assert!(gsi(&DMatrix::zeros(1, 2), &[0]).is_err());
    }

    #[test]
    fn probe_on_separable_blobs() {
        let f = DMatrix::from_fn(
            200,
            2,
            |r, c| if r % 2 == 0 { 5.0 } else { -5.0 } + ((r * 7 + c * 3) % 11) as f64 * 0.1,
        );
        let labels: Vec<usize> = (0..200).map(|r| r % 2).collect();
        assert!(probe_accuracy(&f, &labels, 0.5, 0).unwrap() >= 0.99);
    }

    #[test]
    fn probe_degenerate_split() {
        let f = DMatrix::zeros(10, 2);
        assert!(matches!(
            probe_accuracy(&f, &[0; 10], 0.5, 0),
            Err(DaError::DegenerateSplit(_))
        ));
        assert!(matches!(
            probe_accuracy(&f, &[0, 1, 0, 1, 0, 1, 0, 1, 0, 1], 1.0, 0),
            Err(DaError::DegenerateSplit(_))
        ));
    }
}
