//! Semantic channel backed by a chat-completion endpoint. Questions are
//! rendered by one request; each answer takes two: the patient side phrases
//! the true answer, the doctor side reads it back as yes or no.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use ddx_core::cohort::SymptomAnswer;
use ddx_core::dialogue::{ChannelError, Reply, SemanticChannel};
use ddx_core::ontology::{Ontology, SymptomId};
use ddx_core::procedure::DecisionNode;

use crate::config::ChannelSection;

pub const ENDPOINT_VAR: &str = "DDX_LLM_ENDPOINT";
pub const KEY_VAR: &str = "DDX_LLM_KEY";

#[derive(Clone, Debug, PartialEq)]
pub struct LlmConfig {
    pub endpoint: String,
    pub key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub attempts: u32,
    /// Delay before the second attempt; doubled for each further one.
    pub backoff: Duration,
}

impl LlmConfig {
    /// Endpoint and key from the environment, the rest from `section`.
    pub fn from_env(section: &ChannelSection) -> Result<Self, ChannelError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .map_err(|_| ChannelError::Config(format!("{ENDPOINT_VAR} is not set")))?;
        Ok(LlmConfig {
            endpoint,
            key: std::env::var(KEY_VAR).ok(),
            model: section.model.clone(),
            timeout: Duration::from_secs(section.timeout_secs),
            attempts: section.attempts.max(1),
            backoff: Duration::from_millis(section.backoff_ms),
        })
    }
}

#[derive(Serialize)]
struct Message<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [Message<'a>; 2],
    temperature: f64,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: String,
}

const DOCTOR_RENDER: &str = "You are a physician talking to a patient. Rewrite the planned inquiry as one short, plain-language question. Reply with the question only.";
const PATIENT: &str = "You are a patient answering a physician. Answer the question in one short sentence, consistent with the true answer given in brackets. Do not mention the brackets.";
const DOCTOR_PARSE: &str = "You read a patient's reply to a physician's question. Reply with exactly one word: yes if the patient affirms, no otherwise.";

pub struct LlmChannel {
    config: LlmConfig,
    agent: ureq::Agent,
}

impl LlmChannel {
    pub fn new(config: LlmConfig) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(config.timeout).build();
        LlmChannel { config, agent }
    }

    fn attempt(&self, system: &str, user: &str) -> Result<String, (bool, ChannelError)> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [Message { role: "system", content: system }, Message { role: "user", content: user }],
            temperature: 0.0,
        };
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.config.key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(&body) {
            Ok(resp) => {
                let parsed: ChatResponse = resp
                    .into_json()
                    .map_err(|e| (true, ChannelError::Transport(format!("unreadable response: {e}"))))?;
                parsed
                    .choices
                    .into_iter()
                    .next()
                    .map(|c| c.message.content.trim().to_string())
                    .ok_or_else(|| (false, ChannelError::Transport("response has no choices".into())))
            }
            Err(ureq::Error::Status(code, _)) => {
                let retry = code == 429 || code >= 500;
                Err((retry, ChannelError::Transport(format!("endpoint returned HTTP {code}"))))
            }
            Err(ureq::Error::Transport(t)) => Err((true, ChannelError::Transport(t.to_string()))),
        }
    }

    /// One hop, retried with exponential backoff on transport failures,
    /// rate limiting and server errors.
    pub fn complete(&self, system: &str, user: &str) -> Result<String, ChannelError> {
        let mut delay = self.config.backoff;
        let mut last = ChannelError::Transport("no attempt made".into());
        for attempt in 1..=self.config.attempts {
            match self.attempt(system, user) {
                Ok(text) => return Ok(text),
                Err((retry, e)) => {
                    last = e;
                    if !retry {
                        break;
                    }
                }
            }
            if attempt < self.config.attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(last)
    }

    fn answer(&self, question: &str, truth: bool) -> Result<Reply<bool>, ChannelError> {
        let hint = if truth { "yes" } else { "no" };
        let utterance = self.complete(PATIENT, &format!("{question} [{hint}]"))?;
        let verdict = self.complete(DOCTOR_PARSE, &format!("Question: {question}\nReply: {utterance}"))?;
        Ok(Reply { value: parse_yes_no(&verdict)?, text: utterance })
    }
}

/// Reads a one-word verdict; surrounding punctuation and case are ignored.
pub fn parse_yes_no(text: &str) -> Result<bool, ChannelError> {
    let word = text
        .trim()
        .trim_matches(|c: char| !c.is_alphanumeric())
        .split(|c: char| !c.is_alphanumeric())
        .next()
        .unwrap_or_default()
        .to_ascii_lowercase();
    match word.as_str() {
        "yes" | "y" | "true" => Ok(true),
        "no" | "n" | "false" => Ok(false),
        _ => Err(ChannelError::Unparseable(text.into())),
    }
}

impl SemanticChannel for LlmChannel {
    fn render_symptom_question(&mut self, ontology: &Ontology, symptom: SymptomId) -> Result<String, ChannelError> {
        self.complete(DOCTOR_RENDER, &format!("Ask whether the patient has: {}", ontology.name(symptom)))
    }

    fn render_procedure_question(&mut self, node: &DecisionNode) -> Result<String, ChannelError> {
        self.complete(DOCTOR_RENDER, &node.ask)
    }

    fn deliver_symptom_answer(&mut self, question: &str, truth: SymptomAnswer) -> Result<Reply<SymptomAnswer>, ChannelError> {
        let r = self.answer(question, truth == SymptomAnswer::Confirmed)?;
        let value = if r.value { SymptomAnswer::Confirmed } else { SymptomAnswer::Denied };
        Ok(Reply { text: r.text, value })
    }

    fn deliver_boolean_answer(&mut self, question: &str, truth: bool) -> Result<Reply<bool>, ChannelError> {
        self.answer(question, truth)
    }
}
