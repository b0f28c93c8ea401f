use crate::error::{Error, Result};

use super::tensor::Tensor;

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Mean softmax cross-entropy over the batch and its gradient with respect
/// to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (n, classes) = (logits.rows(), logits.row_len());
    if labels.len() != n {
        return Err(Error::Dimension {
            expected: vec![n],
            actual: vec![labels.len()],
        });
    }
    let mut grad = vec![0.0f32; n * classes];
    let mut loss = 0.0f64;
    for (i, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::OutOfRange {
                what: "label",
                value: label.to_string(),
                allowed: format!("0..{classes}"),
            });
        }
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(f64::from(v)));
        let sum: f64 = row.iter().map(|&v| (f64::from(v) - max).exp()).sum();
        let log_sum = sum.ln() + max;
        loss += log_sum - f64::from(row[label]);
        for (k, g) in grad[i * classes..(i + 1) * classes].iter_mut().enumerate() {
            let p = (f64::from(row[k]) - log_sum).exp();
            let target = if k == label { 1.0 } else { 0.0 };
            *g = ((p - target) / n as f64) as f32;
        }
    }
    Ok((loss / n as f64, Tensor::new(vec![n, classes], grad)?))
}
