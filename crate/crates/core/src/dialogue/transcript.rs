use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{DiseaseId, SymptomAnswer};
use crate::procedure::Outcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Doctor,
    Patient,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnKind {
    Disclosure,
    Question,
    Answer,
    Ranking,
    Diagnosis,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Screening,
    Differential,
}

/// How a consultation ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum FinalDecision {
    /// A procedure confirmed this disease.
    Confirmed { disease: DiseaseId },
    /// Every attempted procedure excluded or failed.
    Excluded,
    /// No top-ranked disease had a procedure; the ranking is the only result.
    ScreeningOnly { top: DiseaseId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum ParsedValue {
    None,
    Symptom(SymptomAnswer),
    Boolean(bool),
    Ranking(Vec<DiseaseId>),
    Outcome(Outcome),
    Decision(FinalDecision),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub speaker: Speaker,
    pub kind: TurnKind,
    pub phase: Phase,
    pub action: Option<usize>,
    pub node: Option<String>,
    pub text: String,
    pub value: ParsedValue,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub consultation_id: String,
    pub turns: Vec<Turn>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TranscriptError {
    #[error("turn {0} is out of order")]
    OutOfOrder(usize),
    #[error("turn {0} breaks question/answer alternation")]
    Alternation(usize),
    #[error("transcript has {0} terminal turns")]
    Terminals(usize),
    #[error("turn {0} follows the terminal turn")]
    AfterTerminal(usize),
    #[error("symptom {action} asked twice (turn {turn})")]
    Repeated { action: usize, turn: usize },
}

impl Transcript {
    pub fn new(consultation_id: impl Into<String>) -> Self {
        Transcript { consultation_id: consultation_id.into(), turns: Vec::new() }
    }

    pub(crate) fn push(
        &mut self,
        speaker: Speaker,
        kind: TurnKind,
        phase: Phase,
        action: Option<usize>,
        node: Option<String>,
        text: String,
        value: ParsedValue,
    ) {
        let index = self.turns.len();
        self.turns.push(Turn { index, speaker, kind, phase, action, node, text, value });
    }

    pub fn questions(&self, phase: Phase) -> usize {
        self.turns.iter().filter(|t| t.phase == phase && t.kind == TurnKind::Question).count()
    }

    /// Checks ordering, question/answer alternation, the absence of repeated
    /// symptom questions, and that the transcript ends in exactly one
    /// terminal turn: a diagnosis, or a ranking when no diagnosis follows.
    pub fn check(&self) -> Result<(), TranscriptError> {
        let mut pending_question = false;
        let mut asked = alloc::collections::BTreeSet::new();
        for (i, t) in self.turns.iter().enumerate() {
            if t.index != i {
                return Err(TranscriptError::OutOfOrder(i));
            }
            match t.kind {
                TurnKind::Question => {
                    if pending_question || t.speaker != Speaker::Doctor {
                        return Err(TranscriptError::Alternation(i));
                    }
                    if let (Phase::Screening, Some(a)) = (t.phase, t.action) {
                        if !asked.insert(a) {
                            return Err(TranscriptError::Repeated { action: a, turn: i });
                        }
                    }
                    pending_question = true;
                }
                TurnKind::Answer => {
                    let q = i.checked_sub(1).map(|j| &self.turns[j]);
                    let matches = q.is_some_and(|q| q.phase == t.phase && q.action == t.action && q.node == t.node);
                    if !pending_question || t.speaker != Speaker::Patient || !matches {
                        return Err(TranscriptError::Alternation(i));
                    }
                    pending_question = false;
                }
                _ => {
                    if pending_question {
                        return Err(TranscriptError::Alternation(i));
                    }
                }
            }
        }
        let diagnoses = self.turns.iter().filter(|t| t.kind == TurnKind::Diagnosis).count();
        let terminal_kind = if diagnoses > 0 { TurnKind::Diagnosis } else { TurnKind::Ranking };
        let terminals: Vec<usize> = self.turns.iter().filter(|t| t.kind == terminal_kind).map(|t| t.index).collect();
        if terminals.len() != 1 {
            return Err(TranscriptError::Terminals(terminals.len()));
        }
        if terminals[0] + 1 != self.turns.len() {
            return Err(TranscriptError::AfterTerminal(terminals[0] + 1));
        }
        Ok(())
    }
}
