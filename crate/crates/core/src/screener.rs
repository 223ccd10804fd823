//! Disease-screening classifier over final inquiry states, and ranking metrics.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{DiseaseId, PatientRecord, SymptomState};
use crate::neural::{
    softmax, softmax_cross_entropy, Activation, Adam, AdamConfig, Matrix, Mlp, NeuralError, Parameters,
};
use crate::rl::{run_episode, InquiryPolicy, RlError};
use crate::rng::{self, Rng};
use crate::screen_env::{triplet, ScreeningEnv, ScreeningState};

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ScreenerError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error("training data holds fewer than two classes")]
    SingleClass,
    #[error("empty input")]
    Empty,
    #[error("{0} rankings but {1} labels")]
    LengthMismatch(usize, usize),
    #[error("k = {k} must lie in 1..={classes}")]
    BadK { k: usize, classes: usize },
    #[error("a policy is required for policy-rollout datasets")]
    MissingPolicy,
}

/// Where the observation rows of a dataset come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Final state of one inquiry episode per record.
    PolicyRollout,
    /// Every symptom answered from the oracle bits.
    FullOracle,
    /// History block only; all symptoms unknown.
    HistoryOnly,
    /// Oracle symptoms with the history block zeroed.
    SymptomsOnly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningDataset {
    pub observations: Matrix,
    pub labels: Vec<DiseaseId>,
    pub provenance: Provenance,
    /// Per-row symptom states, kept for oracle comparisons.
    pub states: Vec<Vec<SymptomState>>,
}

impl ScreeningDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn encode(history: &[f64], states: &[SymptomState], zero_history: bool) -> Vec<f64> {
    let mut row = Vec::with_capacity(history.len() + 3 * states.len());
    if zero_history {
        row.extend(core::iter::repeat(0.0).take(history.len()));
    } else {
        row.extend_from_slice(history);
    }
    for &s in states {
        row.extend_from_slice(&triplet(s));
    }
    row
}

fn oracle_states(record: &PatientRecord) -> Vec<SymptomState> {
    record
        .oracle_symptoms
        .iter()
        .map(|&b| if b { SymptomState::Confirmed } else { SymptomState::Denied })
        .collect()
}

/// Builds one observation row per record. `policy` is only consulted for
/// [`Provenance::PolicyRollout`].
pub fn build_dataset(
    env: &ScreeningEnv<'_>,
    records: &[PatientRecord],
    provenance: Provenance,
    policy: Option<&mut dyn InquiryPolicy>,
    rng: &mut Rng,
) -> Result<ScreeningDataset, ScreenerError> {
    let m = env.ontology.len();
    let mut rows = Vec::with_capacity(records.len());
    let mut states = Vec::with_capacity(records.len());
    match provenance {
        Provenance::PolicyRollout => {
            let policy = policy.ok_or(ScreenerError::MissingPolicy)?;
            for r in records {
                let ep = run_episode(env, r, policy, rng)?;
                rows.push(ep.final_state.observe());
                states.push(ep.final_state.symptoms);
            }
        }
        Provenance::FullOracle | Provenance::SymptomsOnly => {
            for r in records {
                let s = oracle_states(r);
                rows.push(encode(&r.history, &s, provenance == Provenance::SymptomsOnly));
                states.push(s);
            }
        }
        Provenance::HistoryOnly => {
            for r in records {
                let s = vec![SymptomState::Unknown; m];
                rows.push(encode(&r.history, &s, false));
                states.push(s);
            }
        }
    }
    Ok(ScreeningDataset {
        observations: Matrix::from_rows(&rows)?,
        labels: records.iter().map(|r| r.label).collect(),
        provenance,
        states,
    })
}

/// Observation of a final state as the classifier sees it.
pub fn observation_of(state: &ScreeningState) -> Vec<f64> {
    state.observe()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenerConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for ScreenerConfig {
    fn default() -> Self {
        ScreenerConfig { hidden: vec![128], learning_rate: 1e-3, batch_size: 64, max_epochs: 100, patience: 10, seed: 1 }
    }
}

/// Outcome of screener training.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedScreener {
    pub model: Mlp,
    pub best_validation_top1: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Trains an MLP classifier with softmax cross-entropy; keeps the snapshot
/// with the best validation Top-1 and stops after `patience` epochs without
/// improvement.
pub fn train_screener(
    train: &ScreeningDataset,
    validation: &ScreeningDataset,
    classes: usize,
    config: &ScreenerConfig,
) -> Result<TrainedScreener, ScreenerError> {
    if train.is_empty() || validation.is_empty() {
        return Err(ScreenerError::Empty);
    }
    let mut seen = vec![false; classes];
    for &l in &train.labels {
        if l >= classes {
            return Err(NeuralError::LabelOutOfRange { label: l, classes }.into());
        }
        seen[l] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ScreenerError::SingleClass);
    }
    let mut rng = rng::seeded(config.seed);
    let mut sizes = vec![train.observations.cols];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(classes);
    let mut model = Mlp::random(&sizes, Activation::Relu, Activation::Identity, &mut rng)?;
    let mut adam = Adam::for_params(
        AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() },
        &model.param_slices(),
    );
    let mut best = (top1_of(&model, validation)?, model.clone(), 0usize);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;
    let mut epochs_run = 0;
    for epoch in 1..=config.max_epochs {
        rng::shuffle(&mut rng, &mut order);
        for chunk in order.chunks(config.batch_size.max(1)) {
            let x = train.observations.gather(chunk);
            let (logits, cache) = model.forward(&x)?;
            let mut grad = Matrix::zeros(chunk.len(), classes);
            let b = chunk.len() as f64;
            for (row, &i) in chunk.iter().enumerate() {
                let (_, g) = softmax_cross_entropy(logits.row(row), train.labels[i])?;
                for (dst, v) in grad.row_mut(row).iter_mut().zip(g) {
                    *dst = v / b;
                }
            }
            let (grads, _) = model.backward(&cache, &grad)?;
            adam.step(&mut model.param_slices_mut(), &grads.slices())?;
        }
        epochs_run = epoch;
        let acc = top1_of(&model, validation)?;
        if acc > best.0 {
            best = (acc, model.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    Ok(TrainedScreener { model: best.1, best_validation_top1: best.0, best_epoch: best.2, epochs_run })
}

fn top1_of(model: &Mlp, data: &ScreeningDataset) -> Result<f64, ScreenerError> {
    let rankings = rank_all(model, &data.observations)?;
    top_k_hit_rate(&rankings, &data.labels, 1)
}

/// Class probabilities and the class order, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub probabilities: Vec<f64>,
    pub order: Vec<DiseaseId>,
}

impl Ranking {
    /// Sorts descending by probability; equal probabilities keep index order.
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..probabilities.len()).collect();
        order.sort_by(|&a, &b| {
            probabilities[b].partial_cmp(&probabilities[a]).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
        });
        Ranking { probabilities, order }
    }

    pub fn top(&self) -> DiseaseId {
        self.order[0]
    }

    pub fn hits(&self, label: DiseaseId, k: usize) -> bool {
        self.order.iter().take(k).any(|&c| c == label)
    }
}

pub fn predict_ranking(classifier: &Mlp, observation: &[f64]) -> Result<Ranking, ScreenerError> {
    let logits = classifier.predict_one(observation)?;
    Ok(Ranking::from_probabilities(softmax(&logits)))
}

pub fn rank_all(classifier: &Mlp, observations: &Matrix) -> Result<Vec<Ranking>, ScreenerError> {
    let logits = classifier.predict(observations)?;
    Ok((0..logits.rows).map(|r| Ranking::from_probabilities(softmax(logits.row(r)))).collect())
}

/// Fraction of cases whose label is among the first `k` ranked classes.
pub fn top_k_hit_rate(rankings: &[Ranking], labels: &[DiseaseId], k: usize) -> Result<f64, ScreenerError> {
    if rankings.is_empty() {
        return Err(ScreenerError::Empty);
    }
    if rankings.len() != labels.len() {
        return Err(ScreenerError::LengthMismatch(rankings.len(), labels.len()));
    }
    let classes = rankings[0].order.len();
    if k == 0 || k > classes {
        return Err(ScreenerError::BadK { k, classes });
    }
    let hits = rankings.iter().zip(labels).filter(|(r, &l)| r.hits(l, k)).count();
    Ok(hits as f64 / rankings.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Cohort, CohortConfig};
    use crate::ontology::Ontology;
    use crate::rl::RandomPolicy;
    use crate::screen_env::{EnvConfig, SLOT_UNKNOWN};
    use rand::Rng as _;

    fn ranking(order: Vec<usize>) -> Ranking {
        let n = order.len();
        let mut probs = vec![0.0; n];
        for (pos, &c) in order.iter().enumerate() {
            probs[c] = (n - pos) as f64;
        }
        let total: f64 = probs.iter().sum();
        Ranking::from_probabilities(probs.iter().map(|p| p / total).collect())
    }

    #[test]
    fn top_k_examples() {
        let rs = vec![ranking(vec![0, 1, 2, 3]), ranking(vec![1, 0, 2, 3]), ranking(vec![3, 2, 1, 0]), ranking(vec![2, 3, 0, 1])];
        assert_eq!(top_k_hit_rate(&rs, &[0, 1, 3, 2], 1).unwrap(), 1.0);
        assert_eq!(top_k_hit_rate(&rs, &[3, 3, 0, 1], 4).unwrap(), 1.0);
        // Two of four labels land within the top three.
        assert_eq!(top_k_hit_rate(&rs, &[2, 3, 1, 1], 3).unwrap(), 0.5);
        assert!(top_k_hit_rate(&[], &[], 1).is_err());
        assert!(top_k_hit_rate(&rs, &[0, 1, 3, 2], 5).is_err());
        assert!(top_k_hit_rate(&rs, &[0], 1).is_err());
    }

    #[test]
    fn equal_logits_tie_break_by_index() {
        let layer = crate::neural::Layer::new(1, 2, vec![0.0, 0.0], vec![0.0, 0.0], Activation::Identity).unwrap();
        let mlp = Mlp::from_layers(vec![layer]).unwrap();
        let r = predict_ranking(&mlp, &[1.0]).unwrap();
        assert_eq!(r.probabilities, vec![0.5, 0.5]);
        assert_eq!(r.order, vec![0, 1]);
    }

    #[test]
    fn hit_rate_is_monotone_in_k() {
        let mut r = rng::seeded(3);
        let rs: Vec<Ranking> = (0..200)
            .map(|_| Ranking::from_probabilities((0..6).map(|_| r.gen::<f64>()).collect()))
            .collect();
        let labels: Vec<usize> = (0..200).map(|_| r.gen_range(0..6)).collect();
        let mut prev = 0.0;
        for k in 1..=6 {
            let h = top_k_hit_rate(&rs, &labels, k).unwrap();
            assert!(h >= prev);
            prev = h;
            // Rankings are permutations and the top entry maximizes probability.
        }
        assert_eq!(prev, 1.0);
        for rk in &rs {
            let mut sorted = rk.order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..6).collect::<Vec<_>>());
            let max = rk.probabilities.iter().copied().fold(f64::MIN, f64::max);
            assert_eq!(rk.probabilities[rk.top()], max);
        }
    }

    fn dataset(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> ScreeningDataset {
        ScreeningDataset {
            observations: Matrix::from_rows(&rows).unwrap(),
            states: vec![vec![]; labels.len()],
            labels,
            provenance: Provenance::FullOracle,
        }
    }

    #[test]
    fn separable_data_is_learned() {
        let mut r = rng::seeded(8);
        let mut make = |n: usize| {
            let mut rows = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..n {
                let l = r.gen_range(0..2usize);
                let c = if l == 0 { -2.0 } else { 2.0 };
                rows.push(vec![c + rng::normal(&mut r, 0.0, 0.3), rng::normal(&mut r, 0.0, 1.0)]);
                labels.push(l);
            }
            dataset(rows, labels)
        };
        let (tr, va, te) = (make(300), make(100), make(100));
        let cfg = ScreenerConfig { hidden: vec![16], learning_rate: 1e-2, max_epochs: 30, ..ScreenerConfig::default() };
        let s = train_screener(&tr, &va, 2, &cfg).unwrap();
        let rs = rank_all(&s.model, &te.observations).unwrap();
        assert_eq!(top_k_hit_rate(&rs, &te.labels, 1).unwrap(), 1.0);
        assert_eq!(s, train_screener(&tr, &va, 2, &cfg).unwrap());
    }

    #[test]
    fn shuffled_labels_give_chance_accuracy() {
        // Permutation null: held-out Top-1 stays within 3 sigma of 1/D.
        let d = 5;
        let mut r = rng::seeded(21);
        let mut make = |n: usize| {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng::normal(&mut r, 0.0, 1.0)).collect()).collect();
            let labels = (0..n).map(|_| r.gen_range(0..d)).collect();
            dataset(rows, labels)
        };
        let (tr, va, te) = (make(600), make(200), make(1000));
        let cfg = ScreenerConfig { hidden: vec![16], max_epochs: 40, ..ScreenerConfig::default() };
        let s = train_screener(&tr, &va, d, &cfg).unwrap();
        let acc = top_k_hit_rate(&rank_all(&s.model, &te.observations).unwrap(), &te.labels, 1).unwrap();
        let p = 1.0 / d as f64;
        let sigma = libm::sqrt(p * (1.0 - p) / 1000.0);
        assert!((acc - p).abs() < 3.0 * sigma, "acc {acc}");
    }

    #[test]
    fn single_class_is_rejected() {
        let tr = dataset(vec![vec![0.0], vec![1.0]], vec![1, 1]);
        assert_eq!(train_screener(&tr, &tr, 3, &ScreenerConfig::default()), Err(ScreenerError::SingleClass));
    }

    #[test]
    fn dataset_variants() {
        let o = Ontology::synthetic(4, 3, 0).unwrap();
        let c = Cohort::generate(&o, &CohortConfig { diseases: 3, size: 30, history_dim: 2, ..CohortConfig::default() }).unwrap();
        let env_cfg = EnvConfig { budget: 3, ..EnvConfig::default() };
        let env = ScreeningEnv::new(&o, &env_cfg);
        let mut rng = rng::seeded(0);
        let m = o.len();
        let h = build_dataset(&env, &c.records, Provenance::HistoryOnly, None, &mut rng).unwrap();
        for i in 0..h.len() {
            let row = h.observations.row(i);
            assert_eq!(&row[..2], c.records[i].history.as_slice());
            assert!((0..m).all(|j| row[2 + 3 * j + SLOT_UNKNOWN] == 1.0));
        }
        let f = build_dataset(&env, &c.records, Provenance::FullOracle, None, &mut rng).unwrap();
        assert!((0..f.len()).all(|i| (0..m).all(|j| f.observations.row(i)[2 + 3 * j + SLOT_UNKNOWN] == 0.0)));
        let s = build_dataset(&env, &c.records, Provenance::SymptomsOnly, None, &mut rng).unwrap();
        assert!((0..s.len()).all(|i| s.observations.row(i)[..2] == [0.0, 0.0]));
        let p = build_dataset(&env, &c.records, Provenance::PolicyRollout, Some(&mut RandomPolicy), &mut rng).unwrap();
        for i in 0..p.len() {
            let known = (0..m).filter(|&j| p.observations.row(i)[2 + 3 * j + SLOT_UNKNOWN] == 0.0).count();
            assert!(known <= 3 + 1);
        }
        assert!(matches!(
            build_dataset(&env, &c.records, Provenance::PolicyRollout, None, &mut rng),
            Err(ScreenerError::MissingPolicy)
        ));
    }
}
