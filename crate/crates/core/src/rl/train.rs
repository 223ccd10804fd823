use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{collect_rollouts, compute_gae, ppo_update, run_episode, InquiryPolicy, RlError};
use crate::cohort::PatientRecord;
use crate::neural::{ActorCritic, ActorCriticConfig, Adam, AdamConfig, Parameters};
use crate::rng::{self, Rng};
use crate::screen_env::ScreeningEnv;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs_per_update: usize,
    pub minibatch_size: usize,
    pub learning_rate: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
    pub n_envs: usize,
    /// Environment steps gathered before each update.
    pub steps_per_update: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub network: ActorCriticConfig,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.2,
            epochs_per_update: 4,
            minibatch_size: 256,
            learning_rate: 3e-4,
            entropy_coef: 0.01,
            value_coef: 0.5,
            max_grad_norm: 0.5,
            n_envs: 8,
            steps_per_update: 2048,
            total_steps: 300_000,
            seed: 1,
            network: ActorCriticConfig::default(),
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(RlError::InvalidConfig("gamma and gae_lambda must lie in [0, 1]"));
        }
        if !(self.clip_eps > 0.0) {
            return Err(RlError::InvalidConfig("clip_eps must be positive"));
        }
        if self.minibatch_size == 0 || self.steps_per_update == 0 || self.epochs_per_update == 0 {
            return Err(RlError::InvalidConfig("batch sizes and epochs must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(RlError::InvalidConfig("learning_rate must be positive"));
        }
        Ok(())
    }
}

/// One point of the training curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub update: usize,
    pub steps: usize,
    pub mean_return: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

/// Trains an actor-critic inquiry policy with PPO on `records`.
///
/// Deterministic for a fixed `config.seed`.
pub fn train_policy(
    env: &ScreeningEnv<'_>,
    records: &[PatientRecord],
    config: &PpoConfig,
) -> Result<(ActorCritic, Vec<CurvePoint>), RlError> {
    train_policy_with(env, records, config, |_, _| {})
}

/// As [`train_policy`], calling `on_update` with each curve point and the
/// rollout buffer it was computed from.
pub fn train_policy_with(
    env: &ScreeningEnv<'_>,
    records: &[PatientRecord],
    config: &PpoConfig,
    mut on_update: impl FnMut(&CurvePoint, &super::RolloutBuffer),
) -> Result<(ActorCritic, Vec<CurvePoint>), RlError> {
    config.validate()?;
    if records.is_empty() {
        return Err(RlError::NoRecords);
    }
    let mut rng = rng::seeded(config.seed);
    let obs_dim = records[0].history.len() + 3 * env.ontology.len();
    let mut policy = ActorCritic::new(obs_dim, env.ontology.len(), &config.network, &mut rng)?;
    let adam_cfg = AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() };
    let mut optimizer = Adam::for_params(adam_cfg, &policy.param_slices());
    let mut steps = 0usize;
    let mut curve = Vec::new();
    let mut update = 0usize;
    while steps < config.total_steps {
        let mut buffer = collect_rollouts(&policy, env, records, config.steps_per_update, config.n_envs, &mut rng)?;
        compute_gae(&mut buffer, config.gamma, config.gae_lambda);
        steps += buffer.len();
        let stats = ppo_update(&mut policy, &mut optimizer, &buffer, config, &mut rng)?;
        let mean_return =
            buffer.episode_returns.iter().sum::<f64>() / buffer.episode_returns.len().max(1) as f64;
        let point = CurvePoint {
            update,
            steps,
            mean_return,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            clip_fraction: stats.clip_fraction,
        };
        on_update(&point, &buffer);
        curve.push(point);
        update += 1;
    }
    Ok((policy, curve))
}

/// Mean undiscounted return of one episode per record.
pub fn evaluate_mean_return(
    env: &ScreeningEnv<'_>,
    records: &[PatientRecord],
    policy: &mut dyn InquiryPolicy,
    rng: &mut Rng,
) -> Result<f64, RlError> {
    if records.is_empty() {
        return Err(RlError::NoRecords);
    }
    let mut total = 0.0;
    for r in records {
        total += run_episode(env, r, policy, rng)?.total_reward();
    }
    Ok(total / records.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Cohort, CohortConfig};
    use crate::neural::ActorCriticConfig;
    use crate::ontology::Ontology;
    use crate::rl::{GreedyPolicy, RandomPolicy};
    use crate::screen_env::EnvConfig;
    use alloc::vec;

    fn tiny_config() -> PpoConfig {
        PpoConfig {
            total_steps: 4000,
            steps_per_update: 1000,
            minibatch_size: 128,
            learning_rate: 1e-3,
            network: ActorCriticConfig { trunk_hidden: vec![32], head_hidden: 16 },
            ..PpoConfig::default()
        }
    }

    #[test]
    fn training_is_reproducible_and_bounded() {
        let o = Ontology::synthetic(4, 3, 0).unwrap();
        let c = Cohort::generate(&o, &CohortConfig { diseases: 3, size: 200, history_dim: 4, ..CohortConfig::default() }).unwrap();
        let env_cfg = EnvConfig { budget: 4, ..EnvConfig::default() };
        let env = ScreeningEnv::new(&o, &env_cfg);
        let cfg = tiny_config();
        let (p1, c1) = train_policy(&env, &c.records, &cfg).unwrap();
        let (p2, c2) = train_policy(&env, &c.records, &cfg).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(p1, p2);
        assert_eq!(c1.len(), 4);
        let bound = c.records.iter().map(|r| r.positive_count() as f64 - 1.0).sum::<f64>() / c.records.len() as f64;
        let mut rng = rng::seeded(0);
        let greedy = evaluate_mean_return(&env, &c.records, &mut GreedyPolicy(&p1), &mut rng).unwrap();
        assert!(greedy <= bound + 1e-12);
        for pt in &c1 {
            assert!(pt.mean_return <= 4.0);
            assert!((0.0..=1.0).contains(&pt.clip_fraction));
        }
        let random = evaluate_mean_return(&env, &c.records, &mut RandomPolicy, &mut rng).unwrap();
        assert!(random <= bound + 1e-12);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let o = Ontology::synthetic(2, 1, 0).unwrap();
        let env_cfg = EnvConfig::default();
        let env = ScreeningEnv::new(&o, &env_cfg);
        let cfg = PpoConfig { clip_eps: 0.0, ..tiny_config() };
        assert!(matches!(train_policy(&env, &[], &cfg), Err(RlError::InvalidConfig(_))));
        assert!(matches!(train_policy(&env, &[], &tiny_config()), Err(RlError::NoRecords)));
    }
}
