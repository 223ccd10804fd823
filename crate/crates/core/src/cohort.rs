//! Synthetic patient cohorts.
//!
//! Each record carries the oracle symptom bits the patient agent answers from,
//! explicitly recorded denials, a history feature vector and named clinical
//! findings. Records are drawn from per-disease generative profiles which are
//! kept alongside the cohort so the exact Bayes posterior can serve as an oracle.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{Ontology, SymptomId};
use crate::procedure::Predicate;
use crate::rng::{self, Rng};
use rand::Rng as _;

pub type DiseaseId = usize;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum CohortError {
    #[error("invalid cohort config: {0}")]
    InvalidConfig(String),
    #[error("symptom id {id} out of range (M = {m})")]
    SymptomOutOfRange { id: usize, m: usize },
    #[error("cohort has {0} records; at least 3 are needed to split")]
    TooSmallToSplit(usize),
    #[error("split fractions must be non-negative and sum to 1, got {0:?}")]
    BadFractions([f64; 3]),
    #[error("record `{id}`: {reason}")]
    InvalidRecord { id: String, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub id: String,
    pub label: DiseaseId,
    pub oracle_symptoms: Vec<bool>,
    pub explicit_denials: Vec<bool>,
    pub history: Vec<f64>,
    pub findings: BTreeMap<String, f64>,
}

/// What the patient says when asked about a symptom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymptomAnswer {
    Confirmed,
    Denied,
}

impl PatientRecord {
    /// Ids of second-layer symptoms set without their parent.
    pub fn hierarchy_violations(&self, ontology: &Ontology) -> Vec<SymptomId> {
        (ontology.n_first()..ontology.len().min(self.oracle_symptoms.len()))
            .filter(|&j| {
                self.oracle_symptoms[j]
                    && !ontology
                        .parent_unchecked(j)
                        .map(|p| self.oracle_symptoms[p])
                        .unwrap_or(true)
            })
            .map(SymptomId)
            .collect()
    }

    pub fn positive_first_layer(&self, ontology: &Ontology) -> Vec<SymptomId> {
        (0..ontology.n_first())
            .filter(|&j| self.oracle_symptoms[j])
            .map(SymptomId)
            .collect()
    }

    pub fn positive_count(&self) -> usize {
        self.oracle_symptoms.iter().filter(|&&b| b).count()
    }

    /// Structural checks against an ontology and cohort dimensions. Hierarchy
    /// violations are not errors here; see [`PatientRecord::hierarchy_violations`].
    pub fn check_shape(&self, m: usize, d: usize, diseases: usize) -> Result<(), CohortError> {
        let bad = |reason: String| CohortError::InvalidRecord { id: self.id.clone(), reason };
        if self.oracle_symptoms.len() != m || self.explicit_denials.len() != m {
            return Err(bad(format!("symptom vectors must have length {m}")));
        }
        if self.history.len() != d {
            return Err(bad(format!("history must have length {d}")));
        }
        if self.label >= diseases {
            return Err(bad(format!("label {} out of range (D = {diseases})", self.label)));
        }
        if self.oracle_symptoms.iter().zip(&self.explicit_denials).any(|(&s, &n)| s && n) {
            return Err(bad("a symptom is both present and explicitly denied".into()));
        }
        Ok(())
    }
}

/// Patient-side answer to a symptom inquiry: confirmed iff the oracle bit is set.
/// Absent and unmentioned symptoms both come back as denied.
pub fn answer_symptom_query(
    record: &PatientRecord,
    symptom: SymptomId,
) -> Result<SymptomAnswer, CohortError> {
    match record.oracle_symptoms.get(symptom.0) {
        Some(true) => Ok(SymptomAnswer::Confirmed),
        Some(false) => Ok(SymptomAnswer::Denied),
        None => Err(CohortError::SymptomOutOfRange {
            id: symptom.0,
            m: record.oracle_symptoms.len(),
        }),
    }
}

/// Patient-side evaluation of a procedure predicate. Findings missing from the
/// record take the atom's missing-answer default (normal, i.e. "no").
pub fn answer_finding_query(record: &PatientRecord, ontology: &Ontology, predicate: &Predicate) -> bool {
    predicate.evaluate(record, ontology)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FindingDist {
    Gaussian { mean: f64, std: f64 },
    Constant { value: f64 },
    /// 0/1 valued finding, used for flags.
    Bernoulli { p: f64 },
}

impl FindingDist {
    fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            FindingDist::Gaussian { mean, std } => rng::normal(rng, mean, std),
            FindingDist::Constant { value } => value,
            FindingDist::Bernoulli { p } => {
                if rng::bernoulli(rng, p) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiseaseProfile {
    pub label: DiseaseId,
    pub name: String,
    pub prior: f64,
    /// Presence probability per first-layer symptom (length F).
    pub first_layer_probs: Vec<f64>,
    /// Presence probability of each second-layer symptom given its parent is
    /// present, indexed by `id - F`.
    pub child_cond_probs: Vec<f64>,
    pub denial_prob: f64,
    pub history_mean: Vec<f64>,
    pub history_noise: f64,
    /// Probability that any given finding is recorded at all.
    pub finding_presence: f64,
    pub finding_dists: BTreeMap<String, FindingDist>,
}

impl DiseaseProfile {
    /// Presence probability of symptom `j` given its parent is present
    /// (unconditional for first-layer symptoms).
    #[inline]
    fn symptom_prob(&self, j: usize, n_first: usize) -> f64 {
        if j < n_first {
            self.first_layer_probs[j]
        } else {
            self.child_cond_probs[j - n_first]
        }
    }

    fn validate(&self, n_first: usize, m: usize, d: usize) -> Result<(), CohortError> {
        let bad = |what: &str| {
            CohortError::InvalidConfig(format!("profile `{}`: {what}", self.name))
        };
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        if self.first_layer_probs.len() != n_first || self.child_cond_probs.len() != m - n_first {
            return Err(bad("symptom probability vectors do not match the ontology"));
        }
        if !self.first_layer_probs.iter().chain(&self.child_cond_probs).all(|&p| unit(p))
            || !unit(self.denial_prob)
            || !unit(self.prior)
            || !unit(self.finding_presence)
        {
            return Err(bad("probabilities must lie in [0, 1]"));
        }
        if self.history_mean.len() != d {
            return Err(bad("history mean has the wrong dimension"));
        }
        if !(self.history_noise > 0.0) {
            return Err(bad("history noise must be positive"));
        }
        Ok(())
    }

    /// Samples the symptom and denial bits of one record.
    fn sample_symptoms(&self, ontology: &Ontology, rng: &mut Rng) -> (Vec<bool>, Vec<bool>) {
        let m = ontology.len();
        let f = ontology.n_first();
        let mut present = vec![false; m];
        for (j, slot) in present.iter_mut().enumerate().take(f) {
            *slot = rng::bernoulli(rng, self.first_layer_probs[j]);
        }
        for j in f..m {
            let parent = ontology.parent_unchecked(j).unwrap_or(0);
            // Draw unconditionally so the stream layout does not depend on parents.
            let draw = rng::bernoulli(rng, self.child_cond_probs[j - f]);
            present[j] = present[parent] && draw;
        }
        let denials = present
            .iter()
            .map(|&p| {
                let draw = rng::bernoulli(rng, self.denial_prob);
                !p && draw
            })
            .collect();
        (present, denials)
    }
}

/// One finding in the generator vocabulary: a lab value with normal and
/// abnormal ranges, or a 0/1 flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FindingSpec {
    Lab { name: String, normal: (f64, f64), abnormal: (f64, f64) },
    Flag { name: String, normal_p: f64, abnormal_p: f64 },
}

impl FindingSpec {
    pub fn name(&self) -> &str {
        match self {
            FindingSpec::Lab { name, .. } | FindingSpec::Flag { name, .. } => name,
        }
    }
}

pub fn default_findings() -> Vec<FindingSpec> {
    let lab = |name: &str, normal: (f64, f64), abnormal: (f64, f64)| FindingSpec::Lab {
        name: name.into(),
        normal,
        abnormal,
    };
    let flag = |name: &str| FindingSpec::Flag { name: name.into(), normal_p: 0.05, abnormal_p: 0.8 };
    vec![
        lab("bnp", (60.0, 30.0), (800.0, 300.0)),
        lab("lvef", (0.6, 0.05), (0.33, 0.06)),
        lab("troponin", (0.01, 0.005), (0.4, 0.15)),
        lab("d_dimer", (300.0, 100.0), (1500.0, 400.0)),
        lab("wbc", (7.0, 1.5), (15.0, 3.0)),
        lab("crp", (3.0, 1.5), (60.0, 20.0)),
        flag("echo_abnormal"),
        flag("ecg_abnormal"),
        flag("xray_infiltrate"),
    ]
}

/// Ranges from which disease profiles are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileBounds {
    /// Inclusive range of characteristic first-layer categories per disease.
    pub core_categories: (usize, usize),
    pub core_prob: (f64, f64),
    pub background_prob: (f64, f64),
    /// Characteristic children per core category.
    pub strong_children: usize,
    pub strong_child_prob: (f64, f64),
    pub weak_child_prob: (f64, f64),
    pub denial_prob: f64,
    /// Standard deviation of per-disease history means.
    pub history_spread: f64,
    pub history_noise: f64,
    /// Range of unnormalized prior weights.
    pub prior_weight: (f64, f64),
    pub finding_presence: f64,
    pub abnormal_finding_prob: f64,
}

impl Default for ProfileBounds {
    fn default() -> Self {
        ProfileBounds {
            core_categories: (1, 2),
            core_prob: (0.6, 0.95),
            background_prob: (0.05, 0.25),
            strong_children: 1,
            strong_child_prob: (0.7, 0.95),
            weak_child_prob: (0.02, 0.15),
            denial_prob: 0.1,
            history_spread: 0.35,
            history_noise: 1.0,
            prior_weight: (0.5, 1.5),
            finding_presence: 0.9,
            abnormal_finding_prob: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub diseases: usize,
    pub size: usize,
    pub history_dim: usize,
    pub seed: u64,
    pub bounds: ProfileBounds,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            diseases: 20,
            size: 10_000,
            history_dim: 16,
            seed: 1,
            bounds: ProfileBounds::default(),
        }
    }
}

impl CohortConfig {
    fn validate(&self, ontology: &Ontology) -> Result<(), CohortError> {
        let b = &self.bounds;
        let bad = |s: &str| Err(CohortError::InvalidConfig(s.into()));
        if self.diseases < 2 {
            return bad("at least 2 diseases are required");
        }
        if self.size < self.diseases {
            return bad("cohort size must be at least the number of diseases");
        }
        let unit = |r: (f64, f64)| 0.0 <= r.0 && r.0 <= r.1 && r.1 <= 1.0;
        if !(unit(b.core_prob)
            && unit(b.background_prob)
            && unit(b.strong_child_prob)
            && unit(b.weak_child_prob)
            && unit((b.denial_prob, b.denial_prob))
            && unit((b.finding_presence, b.finding_presence))
            && unit((b.abnormal_finding_prob, b.abnormal_finding_prob)))
        {
            return bad("probability bounds must satisfy 0 <= lo <= hi <= 1");
        }
        if b.core_categories.0 > b.core_categories.1 || b.core_categories.1 > ontology.n_first() {
            return bad("core category range must be ordered and at most F");
        }
        if !(b.core_prob.1 > 0.0 || b.background_prob.1 > 0.0) {
            return bad("first-layer probabilities are all zero; no record can be generated");
        }
        if !(b.history_noise > 0.0) || b.history_spread < 0.0 {
            return bad("history noise must be positive and spread non-negative");
        }
        if !(b.prior_weight.0 > 0.0 && b.prior_weight.0 <= b.prior_weight.1) {
            return bad("prior weights must be positive and ordered");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cohort {
    /// Number of symptoms (M).
    pub symptoms: usize,
    /// Number of first-layer symptoms (F).
    pub first_layer: usize,
    pub diseases: usize,
    pub history_dim: usize,
    pub seed: u64,
    pub records: Vec<PatientRecord>,
    pub profiles: Vec<DiseaseProfile>,
}

/// Upper bound on consecutive rejected draws before giving up on a profile set.
const MAX_REJECTIONS: usize = 100_000;

impl Cohort {
    /// Draws random disease profiles, then `config.size` records from them.
    pub fn generate(ontology: &Ontology, config: &CohortConfig) -> Result<Self, CohortError> {
        config.validate(ontology)?;
        let mut rng = rng::seeded(config.seed);
        let profiles = random_profiles(ontology, config, &default_findings(), &mut rng);
        Self::generate_from_profiles(ontology, profiles, config.size, config.history_dim, config.seed, &mut rng)
    }

    /// Draws records from explicit profiles. A draw without any positive
    /// first-layer symptom is discarded whole (label included) and redrawn.
    pub fn generate_from_profiles(
        ontology: &Ontology,
        profiles: Vec<DiseaseProfile>,
        size: usize,
        history_dim: usize,
        seed: u64,
        rng: &mut Rng,
    ) -> Result<Self, CohortError> {
        if profiles.is_empty() {
            return Err(CohortError::InvalidConfig("no disease profiles".into()));
        }
        let total_prior: f64 = profiles.iter().map(|p| p.prior).sum();
        if (total_prior - 1.0).abs() > 1e-9 {
            return Err(CohortError::InvalidConfig(format!(
                "profile priors sum to {total_prior}, expected 1"
            )));
        }
        for (k, p) in profiles.iter().enumerate() {
            if p.label != k {
                return Err(CohortError::InvalidConfig(format!(
                    "profile at position {k} has label {}",
                    p.label
                )));
            }
            p.validate(ontology.n_first(), ontology.len(), history_dim)?;
        }
        let priors: Vec<f64> = profiles.iter().map(|p| p.prior).collect();
        let mut records = Vec::with_capacity(size);
        for i in 0..size {
            let mut attempts = 0;
            let (label, present, denials) = loop {
                let label = rng::categorical(rng, &priors);
                let (present, denials) = profiles[label].sample_symptoms(ontology, rng);
                if present[..ontology.n_first()].iter().any(|&b| b) {
                    break (label, present, denials);
                }
                attempts += 1;
                if attempts >= MAX_REJECTIONS {
                    return Err(CohortError::InvalidConfig(
                        "profiles almost never produce a positive first-layer symptom".into(),
                    ));
                }
            };
            let profile = &profiles[label];
            let history = profile
                .history_mean
                .iter()
                .map(|&mu| rng::normal(rng, mu, profile.history_noise))
                .collect();
            let mut findings = BTreeMap::new();
            for (name, dist) in &profile.finding_dists {
                let recorded = rng::bernoulli(rng, profile.finding_presence);
                let value = dist.sample(rng);
                if recorded {
                    findings.insert(name.clone(), value);
                }
            }
            records.push(PatientRecord {
                id: format!("p{i:06}"),
                label,
                oracle_symptoms: present,
                explicit_denials: denials,
                history,
                findings,
            });
        }
        Ok(Cohort {
            symptoms: ontology.len(),
            first_layer: ontology.n_first(),
            diseases: profiles.len(),
            history_dim,
            seed,
            records,
            profiles,
        })
    }

    /// Checks every record against the cohort dimensions. Returns the ids of
    /// records that violate hierarchy consistency; those are accepted with a warning.
    pub fn check(&self, ontology: &Ontology) -> Result<Vec<String>, CohortError> {
        if ontology.len() != self.symptoms || ontology.n_first() != self.first_layer {
            return Err(CohortError::InvalidConfig(format!(
                "cohort was built for M={}, F={} but the ontology has M={}, F={}",
                self.symptoms,
                self.first_layer,
                ontology.len(),
                ontology.n_first()
            )));
        }
        let mut warnings = Vec::new();
        for r in &self.records {
            r.check_shape(self.symptoms, self.history_dim, self.diseases)?;
            if !r.hierarchy_violations(ontology).is_empty() {
                warnings.push(r.id.clone());
            }
        }
        Ok(warnings)
    }

    pub fn select(&self, indices: &[usize]) -> Vec<PatientRecord> {
        indices.iter().map(|&i| self.records[i].clone()).collect()
    }
}

fn random_profiles(
    ontology: &Ontology,
    config: &CohortConfig,
    findings: &[FindingSpec],
    rng: &mut Rng,
) -> Vec<DiseaseProfile> {
    let b = &config.bounds;
    let f = ontology.n_first();
    let m = ontology.len();
    let weights: Vec<f64> = (0..config.diseases)
        .map(|_| rng::uniform(rng, b.prior_weight.0, b.prior_weight.1))
        .collect();
    let total: f64 = weights.iter().sum();
    let mut profiles = Vec::with_capacity(config.diseases);
    for (label, w) in weights.iter().enumerate() {
        let n_core = rng.gen_range(b.core_categories.0..=b.core_categories.1);
        let mut categories: Vec<usize> = (0..f).collect();
        rng::shuffle(rng, &mut categories);
        let core = &categories[..n_core];
        let mut first_layer_probs = vec![0.0; f];
        for (j, p) in first_layer_probs.iter_mut().enumerate() {
            *p = if core.contains(&j) {
                rng::uniform(rng, b.core_prob.0, b.core_prob.1)
            } else {
                rng::uniform(rng, b.background_prob.0, b.background_prob.1)
            };
        }
        let mut child_cond_probs = vec![0.0; m - f];
        for parent in 0..f {
            let mut children: Vec<usize> =
                ontology.nodes()[parent].children.iter().map(|c| c.0).collect();
            rng::shuffle(rng, &mut children);
            let n_strong = if core.contains(&parent) { b.strong_children } else { 0 };
            for (k, &c) in children.iter().enumerate() {
                child_cond_probs[c - f] = if k < n_strong {
                    rng::uniform(rng, b.strong_child_prob.0, b.strong_child_prob.1)
                } else {
                    rng::uniform(rng, b.weak_child_prob.0, b.weak_child_prob.1)
                };
            }
        }
        let history_mean =
            (0..config.history_dim).map(|_| rng::normal(rng, 0.0, b.history_spread)).collect();
        let mut finding_dists = BTreeMap::new();
        for spec in findings {
            let abnormal = rng::bernoulli(rng, b.abnormal_finding_prob);
            let dist = match spec {
                FindingSpec::Lab { normal, abnormal: ab, .. } => {
                    let (mean, std) = if abnormal { *ab } else { *normal };
                    FindingDist::Gaussian { mean, std }
                }
                FindingSpec::Flag { normal_p, abnormal_p, .. } => FindingDist::Bernoulli {
                    p: if abnormal { *abnormal_p } else { *normal_p },
                },
            };
            finding_dists.insert(spec.name().into(), dist);
        }
        profiles.push(DiseaseProfile {
            label,
            name: format!("disease{label}"),
            prior: w / total,
            first_layer_probs,
            child_cond_probs,
            denial_prob: b.denial_prob,
            history_mean,
            history_noise: b.history_noise,
            finding_presence: b.finding_presence,
            finding_dists,
        });
    }
    profiles
}

/// Index sets of a train/validation/test partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

pub const DEFAULT_SPLIT: [f64; 3] = [0.7, 0.1, 0.2];

/// Splits record indices into train/validation/test, stratified by label.
///
/// Each label gets `floor(fraction * count)` records per part; the leftover
/// records are handed out so that overall sizes match the largest-remainder
/// rounding of the fractions, with at most one extra record per label and part.
pub fn split(records: &[PatientRecord], fractions: [f64; 3], seed: u64) -> Result<CohortSplit, CohortError> {
    if records.len() < 3 {
        return Err(CohortError::TooSmallToSplit(records.len()));
    }
    if fractions.iter().any(|&f| !(0.0..=1.0).contains(&f))
        || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(CohortError::BadFractions(fractions));
    }
    let mut rng = rng::seeded(seed);
    let mut by_label: BTreeMap<DiseaseId, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_label.entry(r.label).or_default().push(i);
    }
    for group in by_label.values_mut() {
        rng::shuffle(&mut rng, group);
    }

    let targets = largest_remainder(records.len(), &fractions);
    // floors[label][part]
    let mut quotas: Vec<[usize; 3]> = Vec::with_capacity(by_label.len());
    let mut remainders: Vec<(usize, [f64; 3])> = Vec::new();
    let mut capacity = targets;
    for (g, group) in by_label.values().enumerate() {
        let n = group.len() as f64;
        let mut q = [0usize; 3];
        let mut frac = [0.0; 3];
        for s in 0..3 {
            let exact = fractions[s] * n;
            q[s] = libm::floor(exact + 1e-9) as usize;
            frac[s] = exact - q[s] as f64;
            capacity[s] = capacity[s].saturating_sub(q[s]);
        }
        let leftover = group.len() - q.iter().sum::<usize>();
        for _ in 0..leftover {
            remainders.push((g, frac));
        }
        quotas.push(q);
    }
    // Hand out leftovers: labels with the most leftover units first, each unit to
    // a distinct part with spare capacity, preferring larger fractional parts.
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    let leftover_of = |g: usize| remainders.iter().filter(|(x, _)| *x == g).count();
    order.sort_by(|&a, &b| leftover_of(b).cmp(&leftover_of(a)).then(a.cmp(&b)));
    for g in order {
        let Some(&(_, frac)) = remainders.iter().find(|(x, _)| *x == g) else { continue };
        let units = leftover_of(g);
        let mut used = [false; 3];
        for _ in 0..units {
            let pick = (0..3)
                .filter(|&s| !used[s] && fractions[s] > 0.0)
                .max_by(|&a, &b| {
                    let ka = (capacity[a] > 0, capacity[a], frac[a]);
                    let kb = (capacity[b] > 0, capacity[b], frac[b]);
                    ka.partial_cmp(&kb).unwrap_or(core::cmp::Ordering::Equal).then(b.cmp(&a))
                })
                .unwrap_or(0);
            used[pick] = true;
            quotas[g][pick] += 1;
            capacity[pick] = capacity[pick].saturating_sub(1);
        }
    }

    let mut out = CohortSplit { train: Vec::new(), validation: Vec::new(), test: Vec::new() };
    for (group, q) in by_label.values().zip(&quotas) {
        out.train.extend_from_slice(&group[..q[0]]);
        out.validation.extend_from_slice(&group[q[0]..q[0] + q[1]]);
        out.test.extend_from_slice(&group[q[0] + q[1]..]);
    }
    out.train.sort_unstable();
    out.validation.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

fn largest_remainder(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut rem = [0.0; 3];
    for s in 0..3 {
        let exact = fractions[s] * n as f64;
        out[s] = libm::floor(exact + 1e-9) as usize;
        rem[s] = exact - out[s] as f64;
    }
    let mut left = n - out.iter().sum::<usize>();
    while left > 0 {
        let s = (0..3)
            .max_by(|&a, &b| rem[a].partial_cmp(&rem[b]).unwrap_or(core::cmp::Ordering::Equal).then(b.cmp(&a)))
            .unwrap_or(0);
        out[s] += 1;
        rem[s] = -1.0;
        left -= 1;
    }
    out
}

/// Tri-state knowledge about one symptom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymptomState {
    Unknown,
    Confirmed,
    Denied,
}

impl From<SymptomAnswer> for SymptomState {
    fn from(a: SymptomAnswer) -> Self {
        match a {
            SymptomAnswer::Confirmed => SymptomState::Confirmed,
            SymptomAnswer::Denied => SymptomState::Denied,
        }
    }
}

/// Evidence available to the Bayes oracle.
#[derive(Clone, Copy, Debug)]
pub struct Evidence<'a> {
    /// One state per symptom (length M).
    pub symptoms: &'a [SymptomState],
    /// History feature vector, when the observer sees it.
    pub history: Option<&'a [f64]>,
    /// The first-layer symptom the patient volunteered, when known. Disclosure
    /// is uniform over positive first-layer symptoms, which carries information.
    pub disclosed: Option<SymptomId>,
}

impl<'a> Evidence<'a> {
    pub fn symptoms_only(symptoms: &'a [SymptomState]) -> Self {
        Evidence { symptoms, history: None, disclosed: None }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub probs: Vec<f64>,
    /// Set when the evidence had zero likelihood under every profile and the
    /// posterior fell back to uniform.
    pub degenerate: bool,
}

impl Posterior {
    pub fn argmax(&self) -> DiseaseId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }
}

/// Exact posterior over diseases under the generative model of the profiles.
///
/// Per first-layer category the joint likelihood of the parent's and children's
/// observed states is marginalized over the parent's presence. Rejection of
/// records without a positive first-layer symptom resamples the label too, so
/// the acceptance probability cancels and no correction is needed.
pub fn bayes_posterior(
    profiles: &[DiseaseProfile],
    ontology: &Ontology,
    evidence: &Evidence<'_>,
) -> Result<Posterior, CohortError> {
    let m = ontology.len();
    let f = ontology.n_first();
    if evidence.symptoms.len() != m {
        return Err(CohortError::SymptomOutOfRange { id: evidence.symptoms.len(), m });
    }
    if let Some(d) = evidence.disclosed {
        if d.0 >= f {
            return Err(CohortError::SymptomOutOfRange { id: d.0, m: f });
        }
    }
    let mut log_post = Vec::with_capacity(profiles.len());
    for profile in profiles {
        let mut lp = libm::log(profile.prior);
        let mut unknown_presence: Vec<f64> = Vec::new();
        let mut confirmed_first = 0usize;
        for parent in 0..f {
            let p = profile.first_layer_probs[parent];
            let (mut present, mut absent) = match evidence.symptoms[parent] {
                SymptomState::Unknown => (1.0, 1.0),
                SymptomState::Confirmed => (1.0, 0.0),
                SymptomState::Denied => (0.0, 1.0),
            };
            for c in &ontology.nodes()[parent].children {
                let q = profile.symptom_prob(c.0, f);
                match evidence.symptoms[c.0] {
                    SymptomState::Unknown => {}
                    SymptomState::Confirmed => {
                        present *= q;
                        absent = 0.0;
                    }
                    SymptomState::Denied => present *= 1.0 - q,
                }
            }
            let group = p * present + (1.0 - p) * absent;
            lp += libm::log(group);
            match evidence.symptoms[parent] {
                SymptomState::Confirmed => confirmed_first += 1,
                SymptomState::Unknown if group > 0.0 => unknown_presence.push(p * present / group),
                _ => {}
            }
        }
        if evidence.disclosed.is_some() {
            lp += libm::log(expected_inverse_count(confirmed_first, &unknown_presence));
        }
        if let Some(h) = evidence.history {
            let s = profile.history_noise;
            for (x, mu) in h.iter().zip(&profile.history_mean) {
                let z = (x - mu) / s;
                lp += -0.5 * z * z - libm::log(s);
            }
        }
        log_post.push(lp);
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        let n = profiles.len().max(1);
        return Ok(Posterior { probs: vec![1.0 / n as f64; profiles.len()], degenerate: true });
    }
    let mut probs: Vec<f64> = log_post.iter().map(|&l| libm::exp(l - max)).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(Posterior { probs, degenerate: false })
}

/// E[1 / (base + K)] where K is a sum of independent Bernoulli(p_i).
fn expected_inverse_count(base: usize, ps: &[f64]) -> f64 {
    // Poisson-binomial distribution of K by dynamic programming.
    let mut dist = vec![0.0; ps.len() + 1];
    dist[0] = 1.0;
    for (i, &p) in ps.iter().enumerate() {
        for k in (0..=i + 1).rev() {
            let stay = dist[k] * (1.0 - p);
            let moved = if k > 0 { dist[k - 1] * p } else { 0.0 };
            dist[k] = stay + moved;
        }
    }
    dist.iter()
        .enumerate()
        .map(|(k, &pk)| if base + k == 0 { 0.0 } else { pk / (base + k) as f64 })
        .sum()
}
