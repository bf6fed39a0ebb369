use super::{softmax, NnError, Tensor};
use crate::Scalar;

const PROB_FLOOR: f64 = 1e-12;

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<(), NnError> {
    if labels.len() != batch {
        return Err(NnError::Shape {
            context: "labels",
            expected: vec![batch],
            found: vec![labels.len()],
        });
    }
    if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::LabelOutOfRange { label, classes });
    }
    Ok(())
}

/// Mean negative log-likelihood of the true classes, probabilities floored at
/// `1e-12`.
pub fn cross_entropy<T: Scalar>(probs: &Tensor<T>, labels: &[usize]) -> Result<T, NnError> {
    let (b, c) = (probs.shape()[0], probs.shape()[1]);
    check_labels(labels, b, c)?;
    let floor = T::lit(PROB_FLOOR);
    let total = probs
        .data()
        .chunks_exact(c)
        .zip(labels)
        .fold(T::zero(), |acc, (row, &l)| {
            // comparison rather than max() so a NaN probability is not floored away
            let p = if row[l] < floor { floor } else { row[l] };
            acc - p.ln()
        });
    Ok(total / T::from_usize(b).unwrap())
}

/// Softmax followed by cross-entropy. Returns `(loss, probabilities,
/// d loss / d logits)` where the gradient is `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>, Tensor<T>), NnError> {
    if logits.rank() != 2 {
        return Err(NnError::Shape {
            context: "logits (batch, classes)",
            expected: vec![logits.batch(), 0],
            found: logits.shape().to_vec(),
        });
    }
    let probs = softmax(logits);
    let loss = cross_entropy(&probs, labels)?;
    let c = logits.shape()[1];
    let inv_b = T::one() / T::from_usize(logits.batch()).unwrap();
    let mut grad = probs.data().to_vec();
    for (row, &l) in grad.chunks_exact_mut(c).zip(labels) {
        row[l] -= T::one();
        row.iter_mut().for_each(|v| *v *= inv_b);
    }
    let grad = Tensor::new(logits.shape().to_vec(), grad)?;
    Ok((loss, probs, grad))
}

/// Row-wise argmax; ties go to the lowest index.
pub fn argmax_rows<T: Scalar>(probs: &Tensor<T>) -> Vec<usize> {
    let c = probs.shape().last().copied().unwrap_or(1).max(1);
    probs
        .data()
        .chunks_exact(c)
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
