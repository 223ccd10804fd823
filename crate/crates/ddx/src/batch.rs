//! Parallel consultation batches. Every consultation draws its randomness
//! from the seed and its record id, so results do not depend on the thread
//! count and always come back in input order.

use rayon::prelude::*;

use ddx_core::cohort::PatientRecord;
use ddx_core::dialogue::{
    run_full_consultation, ChannelError, ConsultationConfig, ConsultationResult, DialogueError, Doctor, ExactChannel,
    NoisyChannel, Reply, SemanticChannel, Transcript,
};
use ddx_core::cohort::SymptomAnswer;
use ddx_core::ontology::{Ontology, SymptomId};
use ddx_core::procedure::DecisionNode;

use crate::config::{ChannelKind, ChannelSection};
use crate::error::Result;
use crate::llm::{LlmChannel, LlmConfig};

/// Maps `f` over `items` on `parallelism` threads, keeping input order.
/// A parallelism of 1 runs on the calling thread.
pub fn par_map<T, U, F>(items: &[T], parallelism: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if parallelism <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

pub type ConsultationOutput = std::result::Result<(ConsultationResult, Transcript), DialogueError>;

/// Runs one full consultation per record with a fresh channel from
/// `make_channel`. Per-record failures are returned in place.
pub fn batch_run<C, F>(
    records: &[PatientRecord],
    ontology: &Ontology,
    doctor: &Doctor<'_>,
    make_channel: F,
    config: &ConsultationConfig,
    seed: u64,
    parallelism: usize,
) -> Vec<ConsultationOutput>
where
    C: SemanticChannel,
    F: Fn() -> C + Sync + Send,
{
    par_map(records, parallelism, |r| run_full_consultation(r, ontology, doctor, &mut make_channel(), config, seed))
}

/// Any channel selectable from configuration.
pub enum AnyChannel {
    Exact(ExactChannel),
    Noisy(NoisyChannel),
    Llm(Box<LlmChannel>),
}

impl AnyChannel {
    pub fn from_config(section: &ChannelSection) -> Result<Self> {
        Ok(match section.kind {
            ChannelKind::Exact => AnyChannel::Exact(ExactChannel),
            ChannelKind::Noisy => AnyChannel::Noisy(NoisyChannel::new(section.noisy())?),
            ChannelKind::Llm => AnyChannel::Llm(Box::new(LlmChannel::new(LlmConfig::from_env(section)?))),
        })
    }

    fn inner(&mut self) -> &mut dyn SemanticChannel {
        match self {
            AnyChannel::Exact(c) => c,
            AnyChannel::Noisy(c) => c,
            AnyChannel::Llm(c) => c.as_mut(),
        }
    }
}

impl SemanticChannel for AnyChannel {
    fn begin_consultation(&mut self, id: &str) {
        self.inner().begin_consultation(id)
    }

    fn render_symptom_question(&mut self, ontology: &Ontology, symptom: SymptomId) -> Result<String, ChannelError> {
        self.inner().render_symptom_question(ontology, symptom)
    }

    fn render_procedure_question(&mut self, node: &DecisionNode) -> Result<String, ChannelError> {
        self.inner().render_procedure_question(node)
    }

    fn deliver_symptom_answer(&mut self, question: &str, truth: SymptomAnswer) -> Result<Reply<SymptomAnswer>, ChannelError> {
        self.inner().deliver_symptom_answer(question, truth)
    }

    fn deliver_boolean_answer(&mut self, question: &str, truth: bool) -> Result<Reply<bool>, ChannelError> {
        self.inner().deliver_boolean_answer(question, truth)
    }
}

/// Builds a channel factory from configuration, validating it once up front.
pub fn channel_factory(section: &ChannelSection) -> Result<impl Fn() -> AnyChannel + Sync + Send + '_> {
    AnyChannel::from_config(section)?;
    Ok(move || AnyChannel::from_config(section).expect("channel config was validated"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddx_core::cohort::{Cohort, CohortConfig};
    use ddx_core::neural::{Activation, ActorCritic, ActorCriticConfig, Mlp};
    use ddx_core::procedure::{parse, ProcedureGraph};
    use ddx_core::rng;
    use std::collections::BTreeMap;

    struct Fixture {
        ontology: Ontology,
        cohort: Cohort,
        policy: ActorCritic,
        screener: Mlp,
        procedures: BTreeMap<usize, ProcedureGraph>,
    }

    fn fixture() -> Fixture {
        let ontology = Ontology::synthetic(4, 2, 0).unwrap();
        let cohort =
            Cohort::generate(&ontology, &CohortConfig { diseases: 3, size: 60, history_dim: 3, ..CohortConfig::default() })
                .unwrap();
        let obs = 3 + 3 * ontology.len();
        let cfg = ActorCriticConfig { trunk_hidden: vec![8], head_hidden: 8 };
        let policy = ActorCritic::new(obs, ontology.len(), &cfg, &mut rng::seeded(1)).unwrap();
        let screener = Mlp::random(&[obs, 8, 3], Activation::Relu, Activation::Identity, &mut rng::seeded(2)).unwrap();
        let g = parse(
            r#"procedure "p" for "d0" { start: a
               node a { ask: "cat0?" when: symptom("cat0") yes -> confirm no -> exclude } }"#,
        )
        .unwrap();
        let procedures = (0..3).map(|d| (d, g.clone())).collect();
        Fixture { ontology, cohort, policy, screener, procedures }
    }

    fn run(f: &Fixture, records: &[PatientRecord], section: &ChannelSection, threads: usize) -> Vec<ConsultationOutput> {
        let doctor = Doctor { policy: &f.policy, screener: &f.screener, procedures: &f.procedures };
        let cfg = ConsultationConfig { env: ddx_core::screen_env::EnvConfig { budget: 3, ..Default::default() }, ..Default::default() };
        batch_run(records, &f.ontology, &doctor, channel_factory(section).unwrap(), &cfg, 7, threads)
    }

    #[test]
    fn empty_batch() {
        let f = fixture();
        assert!(run(&f, &[], &ChannelSection::default(), 1).is_empty());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let f = fixture();
        let noisy = ChannelSection { kind: ChannelKind::Noisy, ..ChannelSection::default() };
        let one = run(&f, &f.cohort.records, &noisy, 1);
        let four = run(&f, &f.cohort.records, &noisy, 4);
        assert_eq!(one.len(), 60);
        assert_eq!(one, four);
        for (r, out) in f.cohort.records.iter().zip(&one) {
            let (res, t) = out.as_ref().unwrap();
            assert_eq!(res.record_id, r.id);
            t.check().unwrap();
        }
    }

    #[test]
    fn permuted_inputs_give_permuted_outputs() {
        let f = fixture();
        let section = ChannelSection { kind: ChannelKind::Noisy, ..ChannelSection::default() };
        let forward = run(&f, &f.cohort.records, &section, 2);
        let mut reversed_records = f.cohort.records.clone();
        reversed_records.reverse();
        let mut backward = run(&f, &reversed_records, &section, 2);
        backward.reverse();
        assert_eq!(forward, backward);
    }

    #[test]
    fn par_map_keeps_order() {
        let xs: Vec<u64> = (0..1000).collect();
        assert_eq!(par_map(&xs, 3, |x| x * 2), xs.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn llm_channel_needs_an_endpoint() {
        if std::env::var(crate::llm::ENDPOINT_VAR).is_err() {
            let section = ChannelSection { kind: ChannelKind::Llm, ..ChannelSection::default() };
            assert!(channel_factory(&section).is_err());
        }
    }
}
