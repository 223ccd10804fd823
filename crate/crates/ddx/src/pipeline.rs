//! End-to-end stages built from the core operations and the configuration.

use std::collections::BTreeMap;
use std::path::Path;

use ddx_core::cohort::{split, Cohort, PatientRecord};
use ddx_core::dialogue::{
    run_differential_dialogue, run_screening_dialogue, ConsultationResult, Doctor, FinalDecision, Transcript,
};
use ddx_core::metrics::{build_error_report, differential_metrics, ErrorReport};
use ddx_core::neural::{ActorCritic, Mlp};
use ddx_core::ontology::Ontology;
use ddx_core::procedure::{self, ProcedureGraph, RunTrace};
use ddx_core::rl::{train_policy, CurvePoint, GreedyPolicy};
use ddx_core::rng;
use ddx_core::screen_env::ScreeningEnv;
use ddx_core::screener::{build_dataset, top_k_hit_rate, train_screener, Provenance, Ranking, TrainedScreener};

use crate::batch::{batch_run, channel_factory, par_map};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::formats;
use crate::formats::metrics::{ConsultationSummary, DifferentialRecord, HitRate, ScreeningMetrics};

/// The ontology file named in the config, or a synthetic one.
pub fn ontology(config: &ExperimentConfig) -> Result<Ontology> {
    let s = &config.ontology;
    if s.path.as_os_str().is_empty() {
        Ok(Ontology::synthetic(s.n_first, s.children_per_first, config.seed)?)
    } else {
        formats::ontology::load_ontology(&s.path)
    }
}

pub fn generate_cohort(ontology: &Ontology, config: &ExperimentConfig) -> Result<Cohort> {
    Ok(Cohort::generate(ontology, &config.cohort)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<PatientRecord>,
    pub validation: Vec<PatientRecord>,
    pub test: Vec<PatientRecord>,
}

pub fn split_cohort(cohort: &Cohort, config: &ExperimentConfig) -> Result<Splits> {
    let s = split(&cohort.records, config.split.fractions, config.split.seed)?;
    Ok(Splits { train: cohort.select(&s.train), validation: cohort.select(&s.validation), test: cohort.select(&s.test) })
}

pub fn train_inquiry_policy(
    ontology: &Ontology,
    train: &[PatientRecord],
    config: &ExperimentConfig,
) -> Result<(ActorCritic, Vec<CurvePoint>)> {
    let env = ScreeningEnv::new(ontology, &config.env);
    Ok(train_policy(&env, train, &config.ppo)?)
}

/// Builds train and validation datasets of the configured provenance and
/// trains the screening classifier on them.
pub fn train_screening_classifier(
    ontology: &Ontology,
    policy: Option<&ActorCritic>,
    splits: &Splits,
    diseases: usize,
    config: &ExperimentConfig,
) -> Result<TrainedScreener> {
    let env = ScreeningEnv::new(ontology, &config.env);
    let provenance = config.dataset.provenance;
    let build = |records: &[PatientRecord], salt: &str| -> Result<_> {
        let mut rng = rng::seeded(rng::derive_seed(config.seed, salt));
        let mut greedy = policy.map(GreedyPolicy);
        let p = greedy.as_mut().map(|g| g as &mut dyn ddx_core::rl::InquiryPolicy);
        if provenance == Provenance::PolicyRollout && p.is_none() {
            return Err(Error::Config("policy-rollout datasets need a trained policy".into()));
        }
        Ok(build_dataset(&env, records, provenance, p, &mut rng)?)
    };
    let train = build(&splits.train, "dataset/train")?;
    let validation = build(&splits.validation, "dataset/validation")?;
    Ok(train_screener(&train, &validation, diseases, &config.screener)?)
}

/// Top-k hit rates for k in {1, 3, 5} that do not exceed the class count.
pub fn hit_rates(rankings: &[Ranking], labels: &[usize], classes: usize) -> Result<Vec<HitRate>> {
    [1, 3, 5]
        .into_iter()
        .filter(|&k| k <= classes)
        .map(|k| Ok(HitRate { k, rate: top_k_hit_rate(rankings, labels, k)? }))
        .collect()
}

/// Screening dialogues over `records` through the configured channel.
pub fn evaluate_screening(
    ontology: &Ontology,
    policy: &ActorCritic,
    screener: &Mlp,
    records: &[PatientRecord],
    name: &str,
    config: &ExperimentConfig,
) -> Result<(ScreeningMetrics, Vec<Transcript>)> {
    let make_channel = channel_factory(&config.channel)?;
    let outputs = par_map(records, config.parallelism, |r| {
        let mut rng = rng::seeded(rng::derive_seed(config.seed, &r.id));
        let mut channel = make_channel();
        run_screening_dialogue(r, ontology, &mut GreedyPolicy(policy), screener, &mut channel, &config.env, &mut rng)
    });
    let mut rankings = Vec::with_capacity(records.len());
    let mut transcripts = Vec::with_capacity(records.len());
    let mut questions = 0usize;
    for out in outputs {
        let (t, o) = out?;
        questions += o.questions;
        rankings.push(o.ranking);
        transcripts.push(t);
    }
    let labels: Vec<usize> = records.iter().map(|r| r.label).collect();
    let classes = screener.output_dim();
    let metrics = ScreeningMetrics {
        name: name.into(),
        channel: config.channel.label(),
        cases: records.len(),
        mean_questions: questions as f64 / records.len().max(1) as f64,
        top_k: hit_rates(&rankings, &labels, classes)?,
    };
    Ok((metrics, transcripts))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialEvaluation {
    pub record: DifferentialRecord,
    pub traces: Vec<RunTrace>,
    pub transcripts: Vec<Transcript>,
    pub report: ErrorReport,
}

/// Runs `graph` on every record; the positive class is `disease`.
pub fn evaluate_differential(
    ontology: &Ontology,
    graph: &ProcedureGraph,
    disease: usize,
    records: &[PatientRecord],
    config: &ExperimentConfig,
) -> Result<DifferentialEvaluation> {
    let make_channel = channel_factory(&config.channel)?;
    let outputs = par_map(records, config.parallelism, |r| {
        let mut channel = make_channel();
        run_differential_dialogue(r, ontology, graph, &mut channel, config.consultation.max_questions)
    });
    let mut traces = Vec::with_capacity(records.len());
    let mut transcripts = Vec::with_capacity(records.len());
    for out in outputs {
        let (t, trace) = out?;
        traces.push(trace);
        transcripts.push(t);
    }
    let labels: Vec<bool> = records.iter().map(|r| r.label == disease).collect();
    let outcomes: Vec<_> = traces.iter().map(|t| t.outcome).collect();
    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let metrics = differential_metrics(&outcomes, &labels)?;
    let report = build_error_report(&ids, &traces, &labels)?;
    Ok(DifferentialEvaluation {
        record: DifferentialRecord { name: graph.name.clone(), channel: config.channel.label(), metrics },
        traces,
        transcripts,
        report,
    })
}

/// Loads a `.dproc` file and rejects it when validation reports errors.
pub fn load_procedure(path: &Path, ontology: Option<&Ontology>) -> Result<ProcedureGraph> {
    let text = formats::read(path)?;
    let graph = procedure::parse(&text).map_err(|source| Error::Procedure { path: path.into(), source })?;
    let diags = procedure::validate(&graph, ontology, None);
    if procedure::has_errors(&diags) {
        let lines: Vec<String> = diags.iter().map(|d| format!("{}:{d}", path.display())).collect();
        return Err(Error::Config(lines.join("\n")));
    }
    Ok(graph)
}

pub fn load_procedures(config: &ExperimentConfig, ontology: &Ontology) -> Result<BTreeMap<usize, ProcedureGraph>> {
    config.procedures.iter().map(|p| Ok((p.disease, load_procedure(&p.path, Some(ontology))?))).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsultationRun {
    pub summary: ConsultationSummary,
    pub results: Vec<ConsultationResult>,
    pub transcripts: Vec<Transcript>,
    /// Record id and message of each consultation that failed.
    pub errors: Vec<(String, String)>,
}

/// Full consultations over `records`; failed consultations are collected,
/// not fatal.
pub fn consult(
    ontology: &Ontology,
    doctor: &Doctor<'_>,
    records: &[PatientRecord],
    diseases: usize,
    name: &str,
    config: &ExperimentConfig,
) -> Result<ConsultationRun> {
    let outputs = batch_run(
        records,
        ontology,
        doctor,
        channel_factory(&config.channel)?,
        &config.consultation_config(),
        config.seed,
        config.parallelism,
    );
    let mut results = Vec::new();
    let mut transcripts = Vec::new();
    let mut errors = Vec::new();
    for (r, out) in records.iter().zip(outputs) {
        match out {
            Ok((res, t)) => {
                results.push(res);
                transcripts.push(t);
            }
            Err(e) => errors.push((r.id.clone(), e.to_string())),
        }
    }
    let rankings: Vec<Ranking> = results.iter().map(|r| r.ranking.clone()).collect();
    let labels: Vec<usize> = results.iter().map(|r| r.label).collect();
    let top_k = if results.is_empty() { Vec::new() } else { hit_rates(&rankings, &labels, diseases)? };
    let count = |f: &dyn Fn(&ConsultationResult) -> bool| results.iter().filter(|r| f(r)).count();
    let n = results.len().max(1) as f64;
    let summary = ConsultationSummary {
        name: name.into(),
        channel: config.channel.label(),
        cases: results.len(),
        top_k,
        confirmed: count(&|r| matches!(r.decision, FinalDecision::Confirmed { .. })),
        correct_confirmations: count(&|r| r.decision == FinalDecision::Confirmed { disease: r.label }),
        excluded: count(&|r| r.decision == FinalDecision::Excluded),
        screening_only: count(&|r| r.screening_only()),
        errors: errors.len(),
        mean_screening_questions: results.iter().map(|r| r.screening_questions).sum::<usize>() as f64 / n,
        mean_differential_questions: results.iter().map(|r| r.differential_questions.iter().sum::<usize>()).sum::<usize>()
            as f64
            / n,
    };
    Ok(ConsultationRun { summary, results, transcripts, errors })
}
