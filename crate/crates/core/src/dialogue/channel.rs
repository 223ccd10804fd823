use alloc::format;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::SymptomAnswer;
use crate::ontology::{Ontology, SymptomId};
use crate::procedure::DecisionNode;
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("channel transport failed: {0}")]
    Transport(String),
    #[error("could not interpret reply {0:?}")]
    Unparseable(String),
    #[error("invalid channel configuration: {0}")]
    Config(String),
}

/// A patient utterance and the value the doctor read from it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reply<T> {
    pub text: String,
    pub value: T,
}

/// The language layer between the doctor and patient agents: renders planner
/// actions as questions and carries the patient's true answer back as the
/// answer the doctor observes.
pub trait SemanticChannel {
    /// Called once before each consultation.
    fn begin_consultation(&mut self, _consultation_id: &str) {}

    fn render_symptom_question(&mut self, ontology: &Ontology, symptom: SymptomId) -> Result<String, ChannelError>;

    fn render_procedure_question(&mut self, node: &DecisionNode) -> Result<String, ChannelError>;

    fn deliver_symptom_answer(&mut self, question: &str, truth: SymptomAnswer) -> Result<Reply<SymptomAnswer>, ChannelError>;

    fn deliver_boolean_answer(&mut self, question: &str, truth: bool) -> Result<Reply<bool>, ChannelError>;
}

pub fn symptom_question(ontology: &Ontology, symptom: SymptomId) -> String {
    format!("Do you have {}?", ontology.name(symptom))
}

pub fn symptom_reply(answer: SymptomAnswer) -> String {
    match answer {
        SymptomAnswer::Confirmed => "Yes, I have that.".into(),
        SymptomAnswer::Denied => "No, I don't.".into(),
    }
}

pub fn boolean_reply(answer: bool) -> String {
    if answer { "Yes." } else { "No." }.into()
}

/// Passes answers through unchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ExactChannel;

impl SemanticChannel for ExactChannel {
    fn render_symptom_question(&mut self, ontology: &Ontology, symptom: SymptomId) -> Result<String, ChannelError> {
        Ok(symptom_question(ontology, symptom))
    }

    fn render_procedure_question(&mut self, node: &DecisionNode) -> Result<String, ChannelError> {
        Ok(node.ask.clone())
    }

    fn deliver_symptom_answer(&mut self, _question: &str, truth: SymptomAnswer) -> Result<Reply<SymptomAnswer>, ChannelError> {
        Ok(Reply { text: symptom_reply(truth), value: truth })
    }

    fn deliver_boolean_answer(&mut self, _question: &str, truth: bool) -> Result<Reply<bool>, ChannelError> {
        Ok(Reply { text: boolean_reply(truth), value: truth })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyChannelConfig {
    /// Chance a negative answer is observed as positive.
    pub p_neg_to_pos: f64,
    /// Chance a positive answer is observed as negative.
    pub p_pos_to_neg: f64,
    pub seed: u64,
}

impl Default for NoisyChannelConfig {
    fn default() -> Self {
        NoisyChannelConfig { p_neg_to_pos: 0.1, p_pos_to_neg: 0.1, seed: 1 }
    }
}

/// Flips answers at configured rates after the patient answers and before the
/// doctor reads them. The random stream restarts for every consultation from
/// the seed and the consultation id.
#[derive(Clone, Debug)]
pub struct NoisyChannel {
    config: NoisyChannelConfig,
    rng: Rng,
}

impl NoisyChannel {
    pub fn new(config: NoisyChannelConfig) -> Result<Self, ChannelError> {
        for (name, p) in [("p_neg_to_pos", config.p_neg_to_pos), ("p_pos_to_neg", config.p_pos_to_neg)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ChannelError::Config(format!("{name} = {p} is not a probability")));
            }
        }
        let rng = rng::seeded(config.seed);
        Ok(NoisyChannel { config, rng })
    }

    pub fn config(&self) -> &NoisyChannelConfig {
        &self.config
    }

    fn perturb(&mut self, positive: bool) -> bool {
        if positive {
            !rng::bernoulli(&mut self.rng, self.config.p_pos_to_neg)
        } else {
            rng::bernoulli(&mut self.rng, self.config.p_neg_to_pos)
        }
    }
}

impl SemanticChannel for NoisyChannel {
    fn begin_consultation(&mut self, consultation_id: &str) {
        self.rng = rng::seeded(rng::derive_seed(self.config.seed, consultation_id));
    }

    fn render_symptom_question(&mut self, ontology: &Ontology, symptom: SymptomId) -> Result<String, ChannelError> {
        Ok(symptom_question(ontology, symptom))
    }

    fn render_procedure_question(&mut self, node: &DecisionNode) -> Result<String, ChannelError> {
        Ok(node.ask.clone())
    }

    fn deliver_symptom_answer(&mut self, _question: &str, truth: SymptomAnswer) -> Result<Reply<SymptomAnswer>, ChannelError> {
        let value = if self.perturb(truth == SymptomAnswer::Confirmed) {
            SymptomAnswer::Confirmed
        } else {
            SymptomAnswer::Denied
        };
        Ok(Reply { text: symptom_reply(value), value })
    }

    fn deliver_boolean_answer(&mut self, _question: &str, truth: bool) -> Result<Reply<bool>, ChannelError> {
        let value = self.perturb(truth);
        Ok(Reply { text: boolean_reply(value), value })
    }
}
