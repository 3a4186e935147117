use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Batch-averaged cross-entropy `-Σ_i y_i log softmax(z)_i` with one-hot `y`,
/// via log-sum-exp. Returns the loss and `(softmax - onehot) / N`.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let (n, k) = logits.dims2()?;
    if labels.len() != n {
        return Err(Error::Input(format!("{} labels for a batch of {n}", labels.len())));
    }
    if n == 0 {
        return Err(Error::Input("cross-entropy of an empty batch".into()));
    }
    let z = logits.data();
    let mut grad = vec![0.0f32; n * k];
    let mut total = 0.0f64;
    for (i, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(Error::Input(format!("label {label} out of range for {k} classes")));
        }
        let row = &z[i * k..(i + 1) * k];
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
        let sum_exp: f64 = row.iter().map(|&v| (v as f64 - max).exp()).sum();
        let log_z = max + sum_exp.ln();
        total += log_z - row[label] as f64;
        for (j, g) in grad[i * k..(i + 1) * k].iter_mut().enumerate() {
            let p = (row[j] as f64 - log_z).exp();
            let y = if j == label { 1.0 } else { 0.0 };
            *g = ((p - y) / n as f64) as f32;
        }
    }
    Ok((total / n as f64, Tensor::new(&[n, k], grad)?))
}
