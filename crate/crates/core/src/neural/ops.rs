use alloc::vec;
use alloc::vec::Vec;

use super::NeuralError;

/// Lower clip applied to a probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&z| libm::exp(z - max)).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    out
}

/// Softmax restricted to `mask`; masked entries get exactly zero.
pub fn masked_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NeuralError> {
    if logits.len() != mask.len() {
        return Err(NeuralError::ShapeMismatch { what: "mask", expected: logits.len(), got: mask.len() });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NeuralError::EmptyMask);
    }
    let mut out = vec![0.0; logits.len()];
    let mut total = 0.0;
    for ((p, &z), &m) in out.iter_mut().zip(logits).zip(mask) {
        if m {
            *p = libm::exp(z - max);
            total += *p;
        }
    }
    for p in &mut out {
        *p /= total;
    }
    Ok(out)
}

/// Log-probabilities under the masked softmax; masked entries are `-inf`.
pub fn masked_log_softmax(logits: &[f64], mask: &[bool]) -> Result<Vec<f64>, NeuralError> {
    if logits.len() != mask.len() {
        return Err(NeuralError::ShapeMismatch { what: "mask", expected: logits.len(), got: mask.len() });
    }
    let max = logits
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&z, _)| z)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(NeuralError::EmptyMask);
    }
    let total: f64 = logits.iter().zip(mask).filter(|(_, &m)| m).map(|(&z, _)| libm::exp(z - max)).sum();
    let log_z = max + libm::log(total);
    Ok(logits
        .iter()
        .zip(mask)
        .map(|(&z, &m)| if m { z - log_z } else { f64::NEG_INFINITY })
        .collect())
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(probs: &[f64]) -> f64 {
    probs.iter().filter(|&&p| p > 0.0).map(|&p| -p * libm::log(p)).sum()
}

/// `-ln probs[label]` and its gradient with respect to `probs`. The
/// probability is clipped at [`PROB_FLOOR`] so the loss stays finite.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<(f64, Vec<f64>), NeuralError> {
    if label >= probs.len() {
        return Err(NeuralError::LabelOutOfRange { label, classes: probs.len() });
    }
    let p = probs[label].max(PROB_FLOOR);
    let mut grad = vec![0.0; probs.len()];
    grad[label] = if probs[label] >= PROB_FLOOR { -1.0 / p } else { 0.0 };
    Ok((-libm::log(p), grad))
}

/// Cross-entropy of `softmax(logits)` against `label`, with the gradient
/// with respect to the logits (`softmax - onehot`).
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>), NeuralError> {
    if label >= logits.len() {
        return Err(NeuralError::LabelOutOfRange { label, classes: logits.len() });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logits.iter().map(|&z| libm::exp(z - max)).sum();
    let log_z = max + libm::log(total);
    let mut grad: Vec<f64> = logits.iter().map(|&z| libm::exp(z - log_z)).collect();
    grad[label] -= 1.0;
    Ok((log_z - logits[label], grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_softmax_examples() {
        assert_eq!(masked_softmax(&[0.0, 0.0, 0.0], &[true, false, true]).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(masked_softmax(&[3.0, -1.0, 9.0], &[false, true, false]).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(masked_softmax(&[1.0], &[false]), Err(NeuralError::EmptyMask));
        let a = masked_softmax(&[0.3, -1.2, 2.0, 0.1], &[true, true, false, true]).unwrap();
        let b = masked_softmax(&[100.3, 98.8, 102.0, 100.1], &[true, true, false, true]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
        // Large logits do not overflow.
        let c = masked_softmax(&[1000.0, 999.0], &[true, true]).unwrap();
        assert!(c.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn log_softmax_agrees_with_softmax() {
        let logits = [0.5, -0.3, 1.7, 2.2];
        let mask = [true, false, true, true];
        let p = masked_softmax(&logits, &mask).unwrap();
        let lp = masked_log_softmax(&logits, &mask).unwrap();
        for j in 0..4 {
            if mask[j] {
                assert!((libm::exp(lp[j]) - p[j]).abs() < 1e-14);
            } else {
                assert_eq!(lp[j], f64::NEG_INFINITY);
            }
        }
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0, 0.0], 1).unwrap().0, 0.0);
        let (loss, _) = cross_entropy(&[0.25; 4], 2).unwrap();
        assert!((loss - libm::log(4.0)).abs() < 1e-15);
        let (loss, _) = cross_entropy(&[1.0, 0.0], 1).unwrap();
        assert!(loss.is_finite());
        assert!((loss - -libm::log(PROB_FLOOR)).abs() < 1e-9);
        assert!(cross_entropy(&[1.0], 1).is_err());
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(entropy(&[1.0, 0.0]), 0.0);
        assert!((entropy(&[0.25; 4]) - libm::log(4.0)).abs() < 1e-15);
    }
}
