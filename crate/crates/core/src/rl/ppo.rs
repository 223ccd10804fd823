use alloc::vec;
use alloc::vec::Vec;

use super::{train::PpoConfig, RlError, RolloutBuffer};
use crate::neural::{clip_global_norm, masked_log_softmax, Adam, ActorCritic, Matrix, Parameters};
use crate::rng::{self, Rng};

/// Statistics of one PPO update, averaged over minibatches.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PpoStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Per-sample policy terms of the PPO objective.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyLossTerms {
    /// `-min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)`.
    pub surrogate_loss: f64,
    /// Entropy of the masked policy.
    pub entropy: f64,
    pub ratio: f64,
    pub clipped: bool,
    /// Gradient of `surrogate_loss - entropy_coef * entropy` w.r.t. the logits.
    pub grad_logits: Vec<f64>,
}

/// Clipped surrogate and entropy for one sample, with exact gradients. Masked
/// logits get zero gradient and never carry probability.
pub fn ppo_policy_loss(
    logits: &[f64],
    mask: &[bool],
    action: usize,
    old_log_prob: f64,
    advantage: f64,
    clip_eps: f64,
    entropy_coef: f64,
) -> Result<PolicyLossTerms, RlError> {
    let log_probs = masked_log_softmax(logits, mask)?;
    let probs: Vec<f64> = log_probs.iter().map(|&lp| libm::exp(lp)).collect();
    let ratio = libm::exp(log_probs[action] - old_log_prob);
    let clipped_ratio = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    let unclipped_obj = ratio * advantage;
    let clipped_obj = clipped_ratio * advantage;
    // Ties go to the unclipped branch so gradient flows at rho = 1.
    let use_unclipped = unclipped_obj <= clipped_obj;
    let surrogate_loss = -(if use_unclipped { unclipped_obj } else { clipped_obj });

    let mut entropy = 0.0;
    for (&p, &lp) in probs.iter().zip(&log_probs) {
        if p > 0.0 {
            entropy -= p * lp;
        }
    }
    let mut grad_logits = vec![0.0; logits.len()];
    for j in 0..logits.len() {
        if !mask[j] {
            continue;
        }
        let p = probs[j];
        let mut g = 0.0;
        if use_unclipped {
            // d log pi(a) / d z_j = 1[j = a] - p_j
            let dlogp = if j == action { 1.0 - p } else { -p };
            g -= advantage * ratio * dlogp;
        }
        // dH / d z_j = -p_j (log p_j + H)
        let dh = if p > 0.0 { -p * (log_probs[j] + entropy) } else { 0.0 };
        g -= entropy_coef * dh;
        grad_logits[j] = g;
    }
    Ok(PolicyLossTerms {
        surrogate_loss,
        entropy,
        ratio,
        clipped: (ratio - 1.0).abs() > clip_eps,
        grad_logits,
    })
}

/// Normalizes to zero mean and unit (population) standard deviation in place.
pub fn normalize(values: &mut [f64]) {
    let n = values.len();
    if n == 0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let std = libm::sqrt(var);
    for v in values.iter_mut() {
        *v = if std > 1e-12 { (*v - mean) / std } else { 0.0 };
    }
}

/// Runs `epochs_per_update` passes of shuffled minibatch updates on `buffer`.
pub fn ppo_update(
    policy: &mut ActorCritic,
    optimizer: &mut Adam,
    buffer: &RolloutBuffer,
    config: &PpoConfig,
    rng: &mut Rng,
) -> Result<PpoStats, RlError> {
    let n = buffer.len();
    if buffer.advantages.len() != n || buffer.returns.len() != n {
        return Err(RlError::MissingAdvantages);
    }
    let mut advantages = buffer.advantages.clone();
    normalize(&mut advantages);

    let mut totals = PpoStats::default();
    let mut batches = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mb = config.minibatch_size.max(1);
    for _ in 0..config.epochs_per_update {
        rng::shuffle(rng, &mut order);
        for chunk in order.chunks(mb) {
            let obs = buffer.observation_matrix(chunk);
            let (logits, values, cache) = policy.forward(&obs)?;
            let b = chunk.len() as f64;
            let mut grad_logits = Matrix::zeros(chunk.len(), logits.cols);
            let mut grad_values = vec![0.0; chunk.len()];
            let mut stats = PpoStats::default();
            for (row, &t) in chunk.iter().enumerate() {
                let terms = ppo_policy_loss(
                    logits.row(row),
                    buffer.mask(t),
                    buffer.actions[t],
                    buffer.log_probs[t],
                    advantages[t],
                    config.clip_eps,
                    config.entropy_coef,
                )?;
                for (g, &d) in grad_logits.row_mut(row).iter_mut().zip(&terms.grad_logits) {
                    *g = d / b;
                }
                let err = values[row] - buffer.returns[t];
                grad_values[row] = config.value_coef * 2.0 * err / b;
                stats.policy_loss += terms.surrogate_loss / b;
                stats.value_loss += err * err / b;
                stats.entropy += terms.entropy / b;
                stats.clip_fraction += if terms.clipped { 1.0 / b } else { 0.0 };
                stats.approx_kl += ((terms.ratio - 1.0) - libm::log(terms.ratio)) / b;
            }
            let loss = stats.policy_loss + config.value_coef * stats.value_loss - config.entropy_coef * stats.entropy;
            if !loss.is_finite() {
                return Err(RlError::NonFiniteLoss);
            }
            let mut grads = policy.backward(&cache, &grad_logits, &grad_values)?;
            if config.max_grad_norm > 0.0 {
                clip_global_norm(&mut grads.slices_mut(), config.max_grad_norm);
            }
            optimizer.step(&mut policy.param_slices_mut(), &grads.slices())?;
            totals.policy_loss += stats.policy_loss;
            totals.value_loss += stats.value_loss;
            totals.entropy += stats.entropy;
            totals.clip_fraction += stats.clip_fraction;
            totals.approx_kl += stats.approx_kl;
            batches += 1;
        }
    }
    let k = batches.max(1) as f64;
    Ok(PpoStats {
        policy_loss: totals.policy_loss / k,
        value_loss: totals.value_loss / k,
        entropy: totals.entropy / k,
        clip_fraction: totals.clip_fraction / k,
        approx_kl: totals.approx_kl / k,
    })
}
