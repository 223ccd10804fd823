//! Simulated consultations between a doctor agent (inquiry policy, screener
//! and decision procedures) and a record-backed patient agent, connected by a
//! [`SemanticChannel`].

mod channel;
mod transcript;

pub use channel::{
    boolean_reply, symptom_question, symptom_reply, ChannelError, ExactChannel, NoisyChannel, NoisyChannelConfig, Reply,
    SemanticChannel,
};
pub use transcript::{FinalDecision, ParsedValue, Phase, Speaker, Transcript, TranscriptError, Turn, TurnKind};

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{answer_symptom_query, CohortError, DiseaseId, PatientRecord};
use crate::neural::{ActorCritic, Mlp};
use crate::ontology::Ontology;
use crate::procedure::{self, InterpretError, Outcome, ProcedureGraph, RunTrace};
use crate::rl::{GreedyPolicy, InquiryPolicy, RlError};
use crate::rng::{self, Rng};
use crate::screen_env::{valid_action_mask, EnvConfig, EnvError, ScreeningEnv, ScreeningState};
use crate::screener::{predict_ranking, Ranking, ScreenerError};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum DialogueError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Policy(#[from] RlError),
    #[error(transparent)]
    Screener(#[from] ScreenerError),
    #[error(transparent)]
    Procedure(#[from] InterpretError),
    #[error("policy chose masked symptom {0}")]
    MaskedAction(usize),
}

/// Result of the screening phase.
#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningOutcome {
    pub ranking: Ranking,
    /// The doctor's view of the patient after the last answer.
    pub state: ScreeningState,
    pub questions: usize,
}

fn ranking_text(ranking: &Ranking, k: usize) -> String {
    let parts: Vec<String> = ranking
        .order
        .iter()
        .take(k)
        .map(|&d| format!("disease {d} ({:.3})", ranking.probabilities[d]))
        .collect();
    format!("Most likely: {}", parts.join(", "))
}

/// Runs the screening phase into `transcript`: the patient volunteers one
/// positive first-layer symptom, the doctor asks until the budget runs out or
/// nothing can be asked, then ranks diseases. Masks and the final prediction
/// use the state the doctor observed through the channel.
#[allow(clippy::too_many_arguments)]
pub fn screening_phase(
    record: &PatientRecord,
    ontology: &Ontology,
    policy: &mut dyn InquiryPolicy,
    screener: &Mlp,
    channel: &mut dyn SemanticChannel,
    env_config: &EnvConfig,
    rng: &mut Rng,
    transcript: &mut Transcript,
) -> Result<ScreeningOutcome, DialogueError> {
    let env = ScreeningEnv::new(ontology, env_config);
    let mut state = env.reset(record, rng)?;
    transcript.push(
        Speaker::Patient,
        TurnKind::Disclosure,
        Phase::Screening,
        Some(state.disclosed.0),
        None,
        format!("I have {}.", ontology.name(state.disclosed)),
        ParsedValue::Symptom(crate::cohort::SymptomAnswer::Confirmed),
    );
    let mut questions = 0;
    while !env.is_done(&state) {
        let mask = valid_action_mask(&state, ontology);
        let action = policy.choose(&state.observe(), &mask, rng)?;
        if !mask.get(action.0).copied().unwrap_or(false) {
            return Err(DialogueError::MaskedAction(action.0));
        }
        let question = channel.render_symptom_question(ontology, action)?;
        transcript.push(
            Speaker::Doctor,
            TurnKind::Question,
            Phase::Screening,
            Some(action.0),
            None,
            question.clone(),
            ParsedValue::None,
        );
        let truth = answer_symptom_query(record, action)?;
        let reply = channel.deliver_symptom_answer(&question, truth)?;
        transcript.push(
            Speaker::Patient,
            TurnKind::Answer,
            Phase::Screening,
            Some(action.0),
            None,
            reply.text,
            ParsedValue::Symptom(reply.value),
        );
        state.apply_answer(action, reply.value);
        questions += 1;
    }
    let ranking = predict_ranking(screener, &state.observe())?;
    transcript.push(
        Speaker::Doctor,
        TurnKind::Ranking,
        Phase::Screening,
        None,
        None,
        ranking_text(&ranking, 3),
        ParsedValue::Ranking(ranking.order.clone()),
    );
    Ok(ScreeningOutcome { ranking, state, questions })
}

/// Screening dialogue on its own: disclosure, question/answer pairs, ranking.
#[allow(clippy::too_many_arguments)]
pub fn run_screening_dialogue(
    record: &PatientRecord,
    ontology: &Ontology,
    policy: &mut dyn InquiryPolicy,
    screener: &Mlp,
    channel: &mut dyn SemanticChannel,
    env_config: &EnvConfig,
    rng: &mut Rng,
) -> Result<(Transcript, ScreeningOutcome), DialogueError> {
    let mut transcript = Transcript::new(record.id.clone());
    channel.begin_consultation(&record.id);
    let out = screening_phase(record, ontology, policy, screener, channel, env_config, rng, &mut transcript)?;
    Ok((transcript, out))
}

fn differential_phase(
    record: &PatientRecord,
    ontology: &Ontology,
    graph: &ProcedureGraph,
    channel: &mut dyn SemanticChannel,
    max_questions: usize,
    transcript: &mut Transcript,
) -> Result<RunTrace, DialogueError> {
    let trace = procedure::run(graph, record, ontology, channel, max_questions)?;
    for step in &trace.steps {
        transcript.push(
            Speaker::Doctor,
            TurnKind::Question,
            Phase::Differential,
            None,
            Some(step.node.clone()),
            step.question.clone(),
            ParsedValue::None,
        );
        transcript.push(
            Speaker::Patient,
            TurnKind::Answer,
            Phase::Differential,
            None,
            Some(step.node.clone()),
            step.reply.clone(),
            ParsedValue::Boolean(step.answer),
        );
    }
    Ok(trace)
}

fn outcome_text(graph: &ProcedureGraph, outcome: Outcome) -> String {
    match outcome {
        Outcome::Confirm => format!("{} is confirmed.", graph.name),
        Outcome::Exclude => format!("{} is excluded.", graph.name),
        Outcome::Failure => format!("{} could not be decided within the question limit.", graph.name),
    }
}

/// Differential dialogue for one procedure, ending in a diagnosis turn.
pub fn run_differential_dialogue(
    record: &PatientRecord,
    ontology: &Ontology,
    graph: &ProcedureGraph,
    channel: &mut dyn SemanticChannel,
    max_questions: usize,
) -> Result<(Transcript, RunTrace), DialogueError> {
    let mut transcript = Transcript::new(record.id.clone());
    channel.begin_consultation(&record.id);
    let trace = differential_phase(record, ontology, graph, channel, max_questions, &mut transcript)?;
    transcript.push(
        Speaker::Doctor,
        TurnKind::Diagnosis,
        Phase::Differential,
        None,
        trace.last_node().map(String::from),
        outcome_text(graph, trace.outcome),
        ParsedValue::Outcome(trace.outcome),
    );
    Ok((transcript, trace))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsultationConfig {
    /// How many top-ranked diseases may be checked with a procedure.
    pub k_candidates: usize,
    pub max_questions: usize,
    pub env: EnvConfig,
}

impl Default for ConsultationConfig {
    fn default() -> Self {
        ConsultationConfig { k_candidates: 1, max_questions: procedure::MAX_QUESTIONS, env: EnvConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifferentialAttempt {
    pub disease: DiseaseId,
    pub procedure: String,
    pub trace: RunTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsultationResult {
    pub record_id: String,
    pub label: DiseaseId,
    pub ranking: Ranking,
    pub attempts: Vec<DifferentialAttempt>,
    /// Top-ranked diseases passed over for lack of a procedure.
    pub skipped: Vec<DiseaseId>,
    pub decision: FinalDecision,
    pub screening_questions: usize,
    pub differential_questions: Vec<usize>,
}

impl ConsultationResult {
    pub fn screening_only(&self) -> bool {
        matches!(self.decision, FinalDecision::ScreeningOnly { .. })
    }
}

/// Trained models and procedures the doctor agent works with.
#[derive(Clone, Copy, Debug)]
pub struct Doctor<'a> {
    pub policy: &'a ActorCritic,
    pub screener: &'a Mlp,
    pub procedures: &'a BTreeMap<DiseaseId, ProcedureGraph>,
}

/// Screening, then differential checks of the top `k_candidates` diseases in
/// rank order until one is confirmed. The random stream is derived from
/// `seed` and the record id, so a consultation does not depend on which
/// others run alongside it.
pub fn run_full_consultation(
    record: &PatientRecord,
    ontology: &Ontology,
    doctor: &Doctor<'_>,
    channel: &mut dyn SemanticChannel,
    config: &ConsultationConfig,
    seed: u64,
) -> Result<(ConsultationResult, Transcript), DialogueError> {
    let mut rng = rng::seeded(rng::derive_seed(seed, &record.id));
    let mut transcript = Transcript::new(record.id.clone());
    channel.begin_consultation(&record.id);
    let mut policy = GreedyPolicy(doctor.policy);
    let screening =
        screening_phase(record, ontology, &mut policy, doctor.screener, channel, &config.env, &mut rng, &mut transcript)?;
    let mut attempts = Vec::new();
    let mut skipped = Vec::new();
    let mut decision = None;
    for &disease in screening.ranking.order.iter().take(config.k_candidates) {
        let Some(graph) = doctor.procedures.get(&disease) else {
            skipped.push(disease);
            continue;
        };
        let trace = differential_phase(record, ontology, graph, channel, config.max_questions, &mut transcript)?;
        let outcome = trace.outcome;
        attempts.push(DifferentialAttempt { disease, procedure: graph.name.clone(), trace });
        if outcome == Outcome::Confirm {
            decision = Some(FinalDecision::Confirmed { disease });
            break;
        }
    }
    let decision = decision.unwrap_or(if attempts.is_empty() {
        FinalDecision::ScreeningOnly { top: screening.ranking.top() }
    } else {
        FinalDecision::Excluded
    });
    let text = match decision {
        FinalDecision::Confirmed { disease } => format!("Diagnosis: disease {disease} confirmed."),
        FinalDecision::Excluded => "All checked diagnoses were excluded.".into(),
        FinalDecision::ScreeningOnly { top } => format!("Screening only: disease {top} ranked first."),
    };
    transcript.push(
        Speaker::Doctor,
        TurnKind::Diagnosis,
        if attempts.is_empty() { Phase::Screening } else { Phase::Differential },
        None,
        None,
        text,
        ParsedValue::Decision(decision),
    );
    let differential_questions = attempts.iter().map(|a| a.trace.questions_asked).collect();
    let result = ConsultationResult {
        record_id: record.id.clone(),
        label: record.label,
        ranking: screening.ranking,
        attempts,
        skipped,
        decision,
        screening_questions: screening.questions,
        differential_questions,
    };
    Ok((result, transcript))
}

/// Runs one consultation per record, in order, with a fresh channel from
/// `make_channel` for each. Failures are reported per record.
pub fn batch_run<C: SemanticChannel>(
    records: &[PatientRecord],
    ontology: &Ontology,
    doctor: &Doctor<'_>,
    make_channel: impl Fn() -> C,
    config: &ConsultationConfig,
    seed: u64,
) -> Vec<Result<(ConsultationResult, Transcript), DialogueError>> {
    records
        .iter()
        .map(|r| run_full_consultation(r, ontology, doctor, &mut make_channel(), config, seed))
        .collect()
}
