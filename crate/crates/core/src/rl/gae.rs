use alloc::vec;
use alloc::vec::Vec;

use super::RolloutBuffer;

/// Generalized advantage estimation over a flat buffer of contiguous episodes.
///
/// `delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)` and
/// `A_t = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}`. A step that is
/// the last one in the buffer bootstraps from zero. Returns `(advantages, returns)`
/// with `return_t = A_t + V(s_t)`.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    let mut next_value = 0.0;
    for t in (0..n).rev() {
        let cont = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * cont - values[t];
        next_adv = delta + gamma * lambda * cont * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    let (adv, ret) = gae(&buffer.rewards, &buffer.values, &buffer.dones, gamma, lambda);
    buffer.advantages = adv;
    buffer.returns = ret;
}
