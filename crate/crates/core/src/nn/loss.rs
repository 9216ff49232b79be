use ndarray::{Array2, Array3, Zip};

use crate::error::{Error, Result};

/// Mean absolute error between two equally shaped matrices.
pub fn l1_loss(x: &Array2<f64>, x_hat: &Array2<f64>) -> Result<f64> {
    if x.dim() != x_hat.dim() {
        return Err(Error::Shape(format!("l1 loss between {:?} and {:?}", x.dim(), x_hat.dim())));
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("l1 loss of empty matrices".into()));
    }
    Ok(Zip::from(x).and(x_hat).fold(0.0, |acc, a, b| acc + (a - b).abs()) / x.len() as f64)
}

/// Batched mean absolute error and its gradient with respect to `x_hat`
/// (zero at the kink).
pub fn l1_loss_batch(x: &Array3<f64>, x_hat: &Array3<f64>) -> (f64, Array3<f64>) {
    assert_eq!(x.dim(), x_hat.dim(), "l1 loss shape mismatch");
    let n = x.len() as f64;
    let loss = Zip::from(x).and(x_hat).fold(0.0, |acc, a, b| acc + (a - b).abs()) / n;
    let grad = Zip::from(x).and(x_hat).map_collect(|a, b| {
        let d = b - a;
        if d > 0.0 {
            1.0 / n
        } else if d < 0.0 {
            -1.0 / n
        } else {
            0.0
        }
    });
    (loss, grad)
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub loss: f64,
    /// Gradient of the mean loss with respect to the logits.
    pub d_logits: Array2<f64>,
    pub predicted: Vec<usize>,
}

/// Softmax cross-entropy averaged over the batch. `logits` is `(classes, batch)`.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Prediction {
    let (classes, batch) = logits.dim();
    assert_eq!(batch, labels.len());
    let mut d_logits = Array2::zeros((classes, batch));
    let mut predicted = Vec::with_capacity(batch);
    let mut loss = 0.0;
    for (b, &label) in labels.iter().enumerate() {
        let col = logits.column(b);
        let max = col.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = col.iter().map(|v| (v - max).exp()).sum();
        let log_z = max + sum.ln();
        loss += log_z - col[label];
        for c in 0..classes {
            let p = (col[c] - log_z).exp();
            d_logits[[c, b]] = (p - if c == label { 1.0 } else { 0.0 }) / batch as f64;
        }
        let arg = col.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best }).0;
        predicted.push(arg);
    }
    Prediction { loss: loss / batch as f64, d_logits, predicted }
}
