use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ProcedureGraph, Target, Terminal};
use crate::cohort::PatientRecord;
use crate::dialogue::{ChannelError, SemanticChannel};
use crate::ontology::Ontology;

/// Question cap of a differential run.
pub const MAX_QUESTIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InterpretError {
    #[error("node `{0}` is not defined")]
    MissingNode(String),
    #[error("no answer assigned to node `{0}`")]
    MissingAnswer(String),
    #[error("procedure revisits node `{0}`")]
    Cycle(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Confirm,
    Exclude,
    /// The question cap ran out before a terminal was reached.
    Failure,
}

impl From<Terminal> for Outcome {
    fn from(t: Terminal) -> Self {
        match t {
            Terminal::Confirm => Outcome::Confirm,
            Terminal::Exclude => Outcome::Exclude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node: String,
    pub question: String,
    /// What the record says.
    pub truth: bool,
    /// What the doctor observed after the channel.
    pub answer: bool,
    pub reply: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub steps: Vec<TraceStep>,
    pub outcome: Outcome,
    pub questions_asked: usize,
}

impl RunTrace {
    pub fn last_node(&self) -> Option<&str> {
        self.steps.last().map(|s| s.node.as_str())
    }

    pub fn last_answer(&self) -> Option<bool> {
        self.steps.last().map(|s| s.answer)
    }
}

/// Walks `graph` from its start node. Each node's predicate is evaluated on
/// the record by the patient side, passed through `channel`, and the observed
/// answer picks the edge. Stops at a terminal or after `max_questions`.
pub fn run(
    graph: &ProcedureGraph,
    record: &PatientRecord,
    ontology: &Ontology,
    channel: &mut dyn SemanticChannel,
    max_questions: usize,
) -> Result<RunTrace, InterpretError> {
    let mut steps = Vec::new();
    let mut current = graph.start.as_str();
    while steps.len() < max_questions {
        let node = graph.nodes.get(current).ok_or_else(|| InterpretError::MissingNode(current.into()))?;
        let question = channel.render_procedure_question(node)?;
        let truth = node.when.evaluate(record, ontology);
        let reply = channel.deliver_boolean_answer(&question, truth)?;
        steps.push(TraceStep { node: node.id.clone(), question, truth, answer: reply.value, reply: reply.text });
        match node.target(reply.value) {
            Target::Terminal(t) => {
                let questions_asked = steps.len();
                return Ok(RunTrace { steps, outcome: (*t).into(), questions_asked });
            }
            Target::Node(next) => current = next,
        }
    }
    let questions_asked = steps.len();
    Ok(RunTrace { steps, outcome: Outcome::Failure, questions_asked })
}

/// Follows edges using `answers` alone, without a channel or a question cap.
pub fn truth_table_outcome(graph: &ProcedureGraph, answers: &BTreeMap<String, bool>) -> Result<Terminal, InterpretError> {
    let mut current = graph.start.as_str();
    for _ in 0..=graph.nodes.len() {
        let node = graph.nodes.get(current).ok_or_else(|| InterpretError::MissingNode(current.into()))?;
        let answer = *answers.get(current).ok_or_else(|| InterpretError::MissingAnswer(current.into()))?;
        match node.target(answer) {
            Target::Terminal(t) => return Ok(*t),
            Target::Node(next) => current = next,
        }
    }
    Err(InterpretError::Cycle(current.into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{ExactChannel, NoisyChannel, NoisyChannelConfig};
    use crate::ontology::OntologyEntry;
    use crate::procedure::testing::{chain, random_graph};
    use crate::procedure::parse;
    use crate::rng;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::Rng as _;

    const THREE_STEP: &str = r#"procedure "hf" for "heart_failure" {
      start: symptoms
      node symptoms { ask: "Breathless?" when: symptom("dyspnea") yes -> peptide no -> exclude }
      node peptide { ask: "BNP >= 125?" when: finding("bnp") >= 125 yes -> echo no -> exclude }
      node echo { ask: "Echo abnormal?" when: flag("echo_abnormal") yes -> confirm no -> exclude }
    }"#;

    fn setup() -> (Ontology, PatientRecord) {
        let o = Ontology::from_entries(&[OntologyEntry::first("dyspnea"), OntologyEntry::first("cough")]).unwrap();
        let mut findings = BTreeMap::new();
        findings.insert("bnp".to_string(), 900.0);
        findings.insert("echo_abnormal".to_string(), 1.0);
        let r = PatientRecord {
            id: "p1".into(),
            label: 0,
            oracle_symptoms: vec![true, false],
            explicit_denials: vec![false, false],
            history: vec![],
            findings,
        };
        (o, r)
    }

    #[test]
    fn three_step_confirm() {
        let (o, r) = setup();
        let g = parse(THREE_STEP).unwrap();
        let t = run(&g, &r, &o, &mut ExactChannel, MAX_QUESTIONS).unwrap();
        assert_eq!(t.outcome, Outcome::Confirm);
        assert_eq!(t.questions_asked, 3);
        let nodes: Vec<_> = t.steps.iter().map(|s| s.node.as_str()).collect();
        assert_eq!(nodes, ["symptoms", "peptide", "echo"]);
    }

    #[test]
    fn first_predicate_false_excludes_at_once() {
        let (o, mut r) = setup();
        r.oracle_symptoms[0] = false;
        let t = run(&parse(THREE_STEP).unwrap(), &r, &o, &mut ExactChannel, MAX_QUESTIONS).unwrap();
        assert_eq!(t.outcome, Outcome::Exclude);
        assert_eq!(t.questions_asked, 1);
    }

    #[test]
    fn question_cap_gives_failure() {
        let (o, r) = setup();
        let t = run(&chain(21), &r, &o, &mut ExactChannel, MAX_QUESTIONS).unwrap();
        assert_eq!(t.outcome, Outcome::Failure);
        assert_eq!(t.questions_asked, 20);
        let t = run(&chain(20), &r, &o, &mut ExactChannel, MAX_QUESTIONS).unwrap();
        assert_eq!(t.outcome, Outcome::Confirm);
        assert_eq!(t.questions_asked, 20);
        assert_eq!(run(&chain(3), &r, &o, &mut ExactChannel, 0).unwrap().outcome, Outcome::Failure);
    }

    #[test]
    fn truth_table_is_path_local() {
        let g = parse(THREE_STEP).unwrap();
        let mut answers: BTreeMap<String, bool> = g.nodes.keys().map(|k| (k.clone(), true)).collect();
        assert_eq!(truth_table_outcome(&g, &answers).unwrap(), Terminal::Confirm);
        answers.insert("symptoms".into(), false);
        for other in [true, false] {
            answers.insert("echo".into(), other);
            assert_eq!(truth_table_outcome(&g, &answers).unwrap(), Terminal::Exclude);
        }
        answers.remove("symptoms");
        assert!(matches!(truth_table_outcome(&g, &answers), Err(InterpretError::MissingAnswer(_))));
    }

    #[test]
    fn exact_run_matches_truth_table() {
        let o = Ontology::synthetic(3, 2, 0).unwrap();
        let names: Vec<String> = o.nodes().iter().map(|n| n.name.clone()).collect();
        let findings = ["bnp", "lvef", "echo_abnormal"];
        let mut r = rng::seeded(40);
        for _ in 0..300 {
            let n = r.gen_range(1..12);
            let g = random_graph(&mut r, n, &names, &findings);
            let mut fm = BTreeMap::new();
            for f in findings {
                if r.gen_bool(0.7) {
                    fm.insert(f.to_string(), (r.gen_range(-20..200) as f64) * 0.5);
                }
            }
            let rec = PatientRecord {
                id: "x".into(),
                label: 0,
                oracle_symptoms: (0..o.len()).map(|_| r.gen_bool(0.4)).collect(),
                explicit_denials: (0..o.len()).map(|_| r.gen_bool(0.2)).collect(),
                history: vec![],
                findings: fm,
            };
            let answers: BTreeMap<String, bool> =
                g.nodes.iter().map(|(k, n)| (k.clone(), n.when.evaluate(&rec, &o))).collect();
            let trace = run(&g, &rec, &o, &mut ExactChannel, MAX_QUESTIONS).unwrap();
            assert_eq!(trace.outcome, Outcome::from(truth_table_outcome(&g, &answers).unwrap()));
            assert!(trace.questions_asked <= g.longest_path().unwrap().min(MAX_QUESTIONS));
            assert!(trace.steps.iter().all(|s| s.truth == s.answer));
        }
    }

    #[test]
    fn saturated_noise_flips_every_answer() {
        let (o, r) = setup();
        let g = parse(THREE_STEP).unwrap();
        let cfg = NoisyChannelConfig { p_neg_to_pos: 1.0, p_pos_to_neg: 1.0, seed: 0 };
        let mut ch = NoisyChannel::new(cfg).unwrap();
        let t = run(&g, &r, &o, &mut ch, MAX_QUESTIONS).unwrap();
        assert_eq!(t.outcome, Outcome::Exclude);
        assert!(t.steps[0].truth && !t.steps[0].answer);
    }

    #[test]
    fn missing_node_is_an_error() {
        let (o, r) = setup();
        let mut g = parse(THREE_STEP).unwrap();
        g.start = "nowhere".into();
        assert!(matches!(run(&g, &r, &o, &mut ExactChannel, 20), Err(InterpretError::MissingNode(_))));
    }
}
