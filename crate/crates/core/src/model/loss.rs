use serde::{Deserialize, Serialize};

use super::forward::softmax;
use crate::error::{Error, Result};

/// Strictly positive per-class loss weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(Vec<f64>);

impl ClassWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Config("no class weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!("class weight {w} must be positive")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Inverse-frequency weights `total / (classes · count)`.
pub fn class_weights_from_counts(counts: &[u64]) -> Result<ClassWeights> {
    if let Some(c) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Config(format!("class {c} has no samples")));
    }
    let total: u64 = counts.iter().sum();
    let n = counts.len() as f64;
    ClassWeights::new(counts.iter().map(|&c| total as f64 / (n * c as f64)).collect())
}

fn check(logits: &[f64], label: usize, w: &ClassWeights) -> Result<()> {
    if label >= logits.len() || label >= w.0.len() {
        return Err(Error::Config(format!(
            "label {label} out of range for {} logits / {} weights",
            logits.len(),
            w.0.len()
        )));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Config("non-finite logit".into()));
    }
    Ok(())
}

/// `−w[label] · log softmax(logits)[label]`, via log-sum-exp.
pub fn weighted_xent(logits: &[f64], label: usize, w: &ClassWeights) -> Result<f64> {
    check(logits, label, w)?;
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    Ok(w.0[label] * (lse - logits[label]))
}

/// Gradient of [`weighted_xent`] with respect to the logits:
/// `w[label] · (softmax − onehot(label))`.
pub fn xent_grad(logits: &[f64], label: usize, w: &ClassWeights) -> Result<Vec<f64>> {
    check(logits, label, w)?;
    let scale = w.0[label];
    Ok(softmax(logits)
        .into_iter()
        .enumerate()
        .map(|(i, p)| scale * (p - if i == label { 1.0 } else { 0.0 }))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_loss() {
        let l = weighted_xent(&[0.3; 20], 4, &ClassWeights::uniform(20)).unwrap();
        assert!((l - 20f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_logit_loss_vanishes() {
        let mut z = vec![0.0; 20];
        z[3] = 800.0;
        assert!(weighted_xent(&z, 3, &ClassWeights::uniform(20)).unwrap() < 1e-300);
    }

    #[test]
    fn weight_scales_loss() {
        let z = [0.1, -1.0, 2.0];
        let one = weighted_xent(&z, 1, &ClassWeights::uniform(3)).unwrap();
        let two = weighted_xent(&z, 1, &ClassWeights::new(vec![1.0, 2.0, 1.0]).unwrap()).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn grad_closed_form() {
        let g = xent_grad(&[0.0; 20], 0, &ClassWeights::uniform(20)).unwrap();
        assert!((g[0] + 0.95).abs() < 1e-12);
        assert!(g[1..].iter().all(|v| (v - 0.05).abs() < 1e-12));
        let w = ClassWeights::new((1..=5).map(f64::from).collect()).unwrap();
        let g = xent_grad(&[1.0, -2.0, 0.5, 3.0, 0.0], 2, &w).unwrap();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs() {
        let w = ClassWeights::uniform(3);
        assert!(weighted_xent(&[0.0; 3], 3, &w).is_err());
        assert!(weighted_xent(&[f64::NAN, 0.0, 0.0], 0, &w).is_err());
        assert!(ClassWeights::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn inverse_frequency() {
        let w = class_weights_from_counts(&[10, 10, 10]).unwrap();
        assert_eq!(w.as_slice(), &[1.0, 1.0, 1.0]);
        assert!(class_weights_from_counts(&[3, 0]).is_err());
    }
}
