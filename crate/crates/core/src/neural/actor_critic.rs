use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{Activation, ForwardCache, Matrix, Mlp, MlpGrads, NeuralError, Parameters};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActorCriticConfig {
    pub trunk_hidden: Vec<usize>,
    pub head_hidden: usize,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        ActorCriticConfig { trunk_hidden: vec![256, 256], head_hidden: 128 }
    }
}

/// Shared trunk producing a representation, with a policy head (one logit per
/// action) and a scalar state-value head.
#[derive(Clone, Debug, PartialEq)]
pub struct ActorCritic {
    pub trunk: Mlp,
    pub policy_head: Mlp,
    pub value_head: Mlp,
}

#[derive(Clone, Debug)]
pub struct ActorCriticCache {
    trunk: ForwardCache,
    policy: ForwardCache,
    value: ForwardCache,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActorCriticGrads {
    pub trunk: MlpGrads,
    pub policy_head: MlpGrads,
    pub value_head: MlpGrads,
}

impl ActorCriticGrads {
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.slices();
        out.extend(self.policy_head.slices());
        out.extend(self.value_head.slices());
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.slices_mut();
        out.extend(self.policy_head.slices_mut());
        out.extend(self.value_head.slices_mut());
        out
    }
}

impl ActorCritic {
    pub fn new(obs_dim: usize, actions: usize, config: &ActorCriticConfig, rng: &mut Rng) -> Result<Self, NeuralError> {
        if config.trunk_hidden.is_empty() {
            return Err(NeuralError::NoLayers);
        }
        let mut trunk_sizes = vec![obs_dim];
        trunk_sizes.extend_from_slice(&config.trunk_hidden);
        let trunk = Mlp::random(&trunk_sizes, Activation::Relu, Activation::Relu, rng)?;
        let rep = trunk.output_dim();
        let mut policy_head = Mlp::random(&[rep, config.head_hidden, actions], Activation::Relu, Activation::Identity, rng)?;
        // Near-uniform initial policy.
        policy_head.scale_output_layer(0.01);
        let value_head = Mlp::random(&[rep, config.head_hidden, 1], Activation::Relu, Activation::Identity, rng)?;
        Self::from_parts(trunk, policy_head, value_head)
    }

    pub fn from_parts(trunk: Mlp, policy_head: Mlp, value_head: Mlp) -> Result<Self, NeuralError> {
        for head in [&policy_head, &value_head] {
            if head.input_dim() != trunk.output_dim() {
                return Err(NeuralError::ShapeMismatch {
                    what: "head input",
                    expected: trunk.output_dim(),
                    got: head.input_dim(),
                });
            }
        }
        if value_head.output_dim() != 1 {
            return Err(NeuralError::ShapeMismatch { what: "value head output", expected: 1, got: value_head.output_dim() });
        }
        Ok(ActorCritic { trunk, policy_head, value_head })
    }

    pub fn obs_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn actions(&self) -> usize {
        self.policy_head.output_dim()
    }

    /// Logits (batch x actions) and values (batch).
    pub fn forward(&self, obs: &Matrix) -> Result<(Matrix, Vec<f64>, ActorCriticCache), NeuralError> {
        let (rep, trunk) = self.trunk.forward(obs)?;
        let (logits, policy) = self.policy_head.forward(&rep)?;
        let (values, value) = self.value_head.forward(&rep)?;
        Ok((logits, values.data, ActorCriticCache { trunk, policy, value }))
    }

    pub fn predict(&self, obs: &Matrix) -> Result<(Matrix, Vec<f64>), NeuralError> {
        let rep = self.trunk.predict(obs)?;
        let logits = self.policy_head.predict(&rep)?;
        let values = self.value_head.predict(&rep)?;
        Ok((logits, values.data))
    }

    pub fn backward(
        &self,
        cache: &ActorCriticCache,
        grad_logits: &Matrix,
        grad_values: &[f64],
    ) -> Result<ActorCriticGrads, NeuralError> {
        let (policy_head, mut d_rep) = self.policy_head.backward(&cache.policy, grad_logits)?;
        let gv = Matrix::from_vec(grad_values.len(), 1, grad_values.to_vec())?;
        let (value_head, d_rep_v) = self.value_head.backward(&cache.value, &gv)?;
        for (a, b) in d_rep.data.iter_mut().zip(&d_rep_v.data) {
            *a += b;
        }
        let (trunk, _) = self.trunk.backward(&cache.trunk, &d_rep)?;
        Ok(ActorCriticGrads { trunk, policy_head, value_head })
    }
}

impl Parameters for ActorCritic {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.param_slices();
        out.extend(self.policy_head.param_slices());
        out.extend(self.value_head.param_slices());
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.param_slices_mut();
        out.extend(self.policy_head.param_slices_mut());
        out.extend(self.value_head.param_slices_mut());
        out
    }
}
