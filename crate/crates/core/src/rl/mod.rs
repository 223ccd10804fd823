//! Policy learning for the symptom-inquiry agent: rollouts, GAE, PPO and the
//! uniform random baseline.

mod buffer;
mod gae;
mod ppo;
mod train;

pub use buffer::{collect_rollouts, RolloutBuffer};
pub use gae::{compute_gae, gae};
pub use ppo::{normalize, ppo_policy_loss, ppo_update, PolicyLossTerms, PpoStats};
pub use train::{evaluate_mean_return, train_policy, train_policy_with, CurvePoint, PpoConfig};

use alloc::vec::Vec;

use rand::Rng as _;
use thiserror::Error;

use crate::cohort::PatientRecord;
use crate::neural::{masked_softmax, ActorCritic, Matrix, NeuralError};
use crate::ontology::SymptomId;
use crate::rng::{self, Rng};
use crate::screen_env::{valid_action_mask, EnvError, ScreeningEnv, ScreeningState};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RlError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error("no valid action in the current state")]
    EmptyMask,
    #[error("training split is empty")]
    NoRecords,
    #[error("invalid PPO config: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite loss during PPO update")]
    NonFiniteLoss,
    #[error("advantages have not been computed")]
    MissingAdvantages,
}

/// Anything that picks the next question from an observation and a mask.
pub trait InquiryPolicy {
    fn choose(&mut self, obs: &[f64], mask: &[bool], rng: &mut Rng) -> Result<SymptomId, RlError>;
}

/// Uniform choice over the set bits of `mask`.
pub fn random_policy(mask: &[bool], rng: &mut Rng) -> Result<SymptomId, RlError> {
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(RlError::EmptyMask);
    }
    let pick = rng.gen_range(0..valid);
    let index = mask.iter().enumerate().filter(|(_, &m)| m).nth(pick).map(|(i, _)| i).unwrap_or(0);
    Ok(SymptomId(index))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RandomPolicy;

impl InquiryPolicy for RandomPolicy {
    fn choose(&mut self, _obs: &[f64], mask: &[bool], rng: &mut Rng) -> Result<SymptomId, RlError> {
        random_policy(mask, rng)
    }
}

/// Highest-logit valid action; ties go to the lowest index.
#[derive(Clone, Copy, Debug)]
pub struct GreedyPolicy<'a>(pub &'a ActorCritic);

pub fn greedy_action(logits: &[f64], mask: &[bool]) -> Result<SymptomId, RlError> {
    let mut best: Option<usize> = None;
    for (j, (&z, &m)) in logits.iter().zip(mask).enumerate() {
        if m && best.map_or(true, |b| z > logits[b]) {
            best = Some(j);
        }
    }
    best.map(SymptomId).ok_or(RlError::EmptyMask)
}

impl InquiryPolicy for GreedyPolicy<'_> {
    fn choose(&mut self, obs: &[f64], mask: &[bool], _rng: &mut Rng) -> Result<SymptomId, RlError> {
        let (logits, _) = self.0.predict(&Matrix::row_vector(obs))?;
        greedy_action(&logits.data, mask)
    }
}

/// Samples from the masked softmax of the policy logits.
#[derive(Clone, Copy, Debug)]
pub struct SamplingPolicy<'a>(pub &'a ActorCritic);

impl InquiryPolicy for SamplingPolicy<'_> {
    fn choose(&mut self, obs: &[f64], mask: &[bool], rng: &mut Rng) -> Result<SymptomId, RlError> {
        let (logits, _) = self.0.predict(&Matrix::row_vector(obs))?;
        let probs = masked_softmax(&logits.data, mask)?;
        Ok(SymptomId(rng::categorical(rng, &probs)))
    }
}

/// A finished episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub final_state: ScreeningState,
    pub actions: Vec<SymptomId>,
    pub rewards: Vec<f64>,
}

impl Episode {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Runs one episode of `policy` on `record` until the env reports done.
pub fn run_episode(
    env: &ScreeningEnv<'_>,
    record: &PatientRecord,
    policy: &mut dyn InquiryPolicy,
    rng: &mut Rng,
) -> Result<Episode, RlError> {
    let mut state = env.reset(record, rng)?;
    let mut actions = Vec::new();
    let mut rewards = Vec::new();
    while !env.is_done(&state) {
        let mask = valid_action_mask(&state, env.ontology);
        let action = policy.choose(&state.observe(), &mask, rng)?;
        let out = env.step(&mut state, action, record)?;
        actions.push(action);
        rewards.push(out.reward);
    }
    Ok(Episode { final_state: state, actions, rewards })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn random_policy_examples() {
        let mut r = rng::seeded(0);
        let mut mask = vec![false; 8];
        mask[3] = true;
        for _ in 0..20 {
            assert_eq!(random_policy(&mask, &mut r).unwrap(), SymptomId(3));
        }
        assert_eq!(random_policy(&[false; 4], &mut r), Err(RlError::EmptyMask));
    }

    #[test]
    fn random_policy_is_uniform() {
        // 10,000 draws over 8 actions: each count within 3 sigma of 1250.
        let mut r = rng::seeded(77);
        let mut counts = [0usize; 8];
        for _ in 0..10_000 {
            counts[random_policy(&[true; 8], &mut r).unwrap().0] += 1;
        }
        let sigma = libm::sqrt(10_000.0 * (1.0 / 8.0) * (7.0 / 8.0));
        for c in counts {
            assert!((c as f64 - 1250.0).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn random_policy_respects_mask() {
        let mut r = rng::seeded(5);
        let mask = [true, false, true, false, false, true];
        for _ in 0..2000 {
            assert!(mask[random_policy(&mask, &mut r).unwrap().0]);
        }
    }

    #[test]
    fn greedy_breaks_ties_low() {
        assert_eq!(greedy_action(&[1.0, 2.0, 2.0], &[true, true, true]).unwrap(), SymptomId(1));
        assert_eq!(greedy_action(&[1.0, 2.0, 2.0], &[true, false, true]).unwrap(), SymptomId(2));
        assert!(greedy_action(&[1.0], &[false]).is_err());
    }
}
