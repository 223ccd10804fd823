//! Symptom-inquiry environment for the screening policy.
//!
//! The observation is the history vector followed by one one-hot triplet per
//! symptom in `[denied, confirmed, unknown]` slot order. An episode starts with
//! the patient volunteering one positive first-layer symptom and lasts for a
//! fixed question budget.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::{answer_symptom_query, CohortError, PatientRecord, SymptomAnswer, SymptomState};
use crate::ontology::{Ontology, SymptomId};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum EnvError {
    #[error("record `{0}` has no positive first-layer symptom to disclose")]
    NothingToDisclose(alloc::string::String),
    #[error("action {0} is masked in the current state")]
    MaskedAction(SymptomId),
    #[error("episode is already finished")]
    EpisodeFinished,
    #[error(transparent)]
    Cohort(#[from] CohortError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RewardVariant {
    /// Reward only confirmed symptoms.
    #[serde(rename = "P")]
    Positive,
    /// Also pay for symptoms the record explicitly denies.
    #[serde(rename = "PN")]
    PositiveNegative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub budget: usize,
    pub reward_variant: RewardVariant,
    pub pn_denial_reward: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig { budget: 10, reward_variant: RewardVariant::Positive, pn_denial_reward: 0.2 }
    }
}

/// Slot order of a symptom triplet.
pub const SLOT_DENIED: usize = 0;
pub const SLOT_CONFIRMED: usize = 1;
pub const SLOT_UNKNOWN: usize = 2;

pub fn triplet(state: SymptomState) -> [f64; 3] {
    match state {
        SymptomState::Denied => [1.0, 0.0, 0.0],
        SymptomState::Confirmed => [0.0, 1.0, 0.0],
        SymptomState::Unknown => [0.0, 0.0, 1.0],
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreeningState {
    pub history: Vec<f64>,
    pub symptoms: Vec<SymptomState>,
    pub asked: Vec<bool>,
    pub turn: usize,
    pub disclosed: SymptomId,
}

impl ScreeningState {
    /// Fresh state with `disclosed` already confirmed and marked asked.
    pub fn with_disclosure(history: Vec<f64>, m: usize, disclosed: SymptomId) -> Self {
        let mut symptoms = vec![SymptomState::Unknown; m];
        let mut asked = vec![false; m];
        symptoms[disclosed.0] = SymptomState::Confirmed;
        asked[disclosed.0] = true;
        ScreeningState { history, symptoms, asked, turn: 0, disclosed }
    }

    /// Records an answer for `action` and advances the turn. This is the only
    /// way state changes; the env feeds it ground truth, dialogues feed it
    /// whatever the channel delivered.
    pub fn apply_answer(&mut self, action: SymptomId, answer: SymptomAnswer) {
        self.symptoms[action.0] = answer.into();
        self.asked[action.0] = true;
        self.turn += 1;
    }

    /// Observation vector: `[history, triplets]` of length `d + 3M`.
    pub fn observe(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.history.len() + 3 * self.symptoms.len());
        self.observe_into(&mut out);
        out
    }

    pub fn observe_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.history);
        for &s in &self.symptoms {
            out.extend_from_slice(&triplet(s));
        }
    }

    pub fn observation_dim(&self) -> usize {
        self.history.len() + 3 * self.symptoms.len()
    }
}

/// `mask[j]` is set iff `j` has not been asked and is either first-layer or a
/// child of a confirmed parent.
pub fn valid_action_mask(state: &ScreeningState, ontology: &Ontology) -> Vec<bool> {
    let mut mask = vec![false; ontology.len()];
    write_action_mask(state, ontology, &mut mask);
    mask
}

pub fn write_action_mask(state: &ScreeningState, ontology: &Ontology, mask: &mut [bool]) {
    for (j, slot) in mask.iter_mut().enumerate() {
        *slot = !state.asked[j]
            && match ontology.parent_unchecked(j) {
                None => true,
                Some(p) => state.symptoms[p] == SymptomState::Confirmed,
            };
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome {
    pub answer: SymptomAnswer,
    pub reward: f64,
    pub done: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct ScreeningEnv<'a> {
    pub ontology: &'a Ontology,
    pub config: &'a EnvConfig,
}

impl<'a> ScreeningEnv<'a> {
    pub fn new(ontology: &'a Ontology, config: &'a EnvConfig) -> Self {
        ScreeningEnv { ontology, config }
    }

    /// Starts an episode: one positive first-layer symptom, chosen uniformly,
    /// is disclosed.
    pub fn reset(&self, record: &PatientRecord, rng: &mut Rng) -> Result<ScreeningState, EnvError> {
        let positives = record.positive_first_layer(self.ontology);
        if positives.is_empty() {
            return Err(EnvError::NothingToDisclose(record.id.clone()));
        }
        let disclosed = positives[rng.gen_range(0..positives.len())];
        Ok(ScreeningState::with_disclosure(record.history.clone(), self.ontology.len(), disclosed))
    }

    pub fn step(
        &self,
        state: &mut ScreeningState,
        action: SymptomId,
        record: &PatientRecord,
    ) -> Result<StepOutcome, EnvError> {
        if self.is_done(state) {
            return Err(EnvError::EpisodeFinished);
        }
        let allowed = action.0 < self.ontology.len()
            && !state.asked[action.0]
            && self
                .ontology
                .parent_unchecked(action.0)
                .map_or(true, |p| state.symptoms[p] == SymptomState::Confirmed);
        if !allowed {
            return Err(EnvError::MaskedAction(action));
        }
        let answer = answer_symptom_query(record, action)?;
        state.apply_answer(action, answer);
        let reward = match answer {
            SymptomAnswer::Confirmed => 1.0,
            SymptomAnswer::Denied => match self.config.reward_variant {
                RewardVariant::PositiveNegative if record.explicit_denials[action.0] => {
                    self.config.pn_denial_reward
                }
                _ => 0.0,
            },
        };
        Ok(StepOutcome { answer, reward, done: self.is_done(state) })
    }

    /// Budget exhausted, or nothing left to ask.
    pub fn is_done(&self, state: &ScreeningState) -> bool {
        if state.turn >= self.config.budget {
            return true;
        }
        (0..self.ontology.len()).all(|j| {
            state.asked[j]
                || self
                    .ontology
                    .parent_unchecked(j)
                    .is_some_and(|p| state.symptoms[p] != SymptomState::Confirmed)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohort::{Cohort, CohortConfig};
    use crate::rng;
    use alloc::collections::BTreeMap;
    use proptest::prelude::*;

    fn record(bits: Vec<bool>, denials: Vec<bool>) -> PatientRecord {
        PatientRecord {
            id: "r".into(),
            label: 0,
            oracle_symptoms: bits,
            explicit_denials: denials,
            history: vec![0.5, -1.0],
            findings: BTreeMap::new(),
        }
    }

    #[test]
    fn reset_discloses_the_only_positive() {
        let o = Ontology::synthetic(2, 3, 0).unwrap();
        let mut bits = vec![false; 8];
        bits[1] = true;
        let r = record(bits, vec![false; 8]);
        let cfg = EnvConfig::default();
        let env = ScreeningEnv::new(&o, &cfg);
        let s = env.reset(&r, &mut rng::seeded(0)).unwrap();
        let obs = s.observe();
        assert_eq!(&obs[2 + 3..2 + 6], &[0.0, 1.0, 0.0]);
        for j in [0, 2, 3, 4, 5, 6, 7] {
            assert_eq!(&obs[2 + 3 * j..2 + 3 * j + 3], &[0.0, 0.0, 1.0]);
        }
        let unknown: f64 = (0..8).map(|j| obs[2 + 3 * j + SLOT_UNKNOWN]).sum();
        assert_eq!(unknown, 7.0);
        assert_eq!(s.turn, 0);
    }

    #[test]
    fn reset_requires_a_positive() {
        let o = Ontology::synthetic(2, 1, 0).unwrap();
        let r = record(vec![false; 4], vec![false; 4]);
        let cfg = EnvConfig::default();
        let env = ScreeningEnv::new(&o, &cfg);
        assert!(matches!(env.reset(&r, &mut rng::seeded(0)), Err(EnvError::NothingToDisclose(_))));
    }

    #[test]
    fn fresh_mask_allows_other_category_and_children() {
        // 2 first-layer x 3 children, M = 8; disclose category 0.
        let o = Ontology::synthetic(2, 3, 0).unwrap();
        let s = ScreeningState::with_disclosure(vec![], 8, SymptomId(0));
        let mask = valid_action_mask(&s, &o);
        // Enumerate: 0 asked, 1 allowed, 2..5 children of 0 allowed, 5..8 children of 1 blocked.
        let expected: Vec<bool> = (0..8).map(|j| j == 1 || (2..5).contains(&j)).collect();
        assert_eq!(mask, expected);
        assert_eq!(mask.iter().filter(|&&b| b).count(), 4);
    }

    #[test]
    fn denied_parent_blocks_children_and_full_state_masks_all() {
        let o = Ontology::synthetic(2, 3, 0).unwrap();
        let mut s = ScreeningState::with_disclosure(vec![], 8, SymptomId(0));
        s.apply_answer(SymptomId(1), SymptomAnswer::Denied);
        let mask = valid_action_mask(&s, &o);
        assert!(!mask[5] && !mask[6] && !mask[7]);
        s.asked = vec![true; 8];
        assert!(valid_action_mask(&s, &o).iter().all(|&b| !b));
    }

    #[test]
    fn rewards_by_variant() {
        let o = Ontology::synthetic(3, 0, 0).unwrap();
        let r = record(vec![true, true, false], vec![false, false, true]);
        let mut cfg = EnvConfig { budget: 5, ..EnvConfig::default() };
        let mut rng = rng::seeded(1);
        {
            let env = ScreeningEnv::new(&o, &cfg);
            let mut s = ScreeningState::with_disclosure(r.history.clone(), 3, SymptomId(0));
            let out = env.step(&mut s, SymptomId(1), &r).unwrap();
            assert_eq!(out.reward, 1.0);
            assert_eq!(s.symptoms[1], SymptomState::Confirmed);
            let out = env.step(&mut s, SymptomId(2), &r).unwrap();
            assert_eq!(out.reward, 0.0);
            assert!(out.done, "nothing left to ask");
        }
        cfg.reward_variant = RewardVariant::PositiveNegative;
        let env = ScreeningEnv::new(&o, &cfg);
        let mut s = env.reset(&r, &mut rng).unwrap();
        let other = if s.disclosed == SymptomId(0) { 1 } else { 0 };
        assert_eq!(env.step(&mut s, SymptomId(other), &r).unwrap().reward, 1.0);
        let out = env.step(&mut s, SymptomId(2), &r).unwrap();
        assert_eq!(out.reward, 0.2);
        assert_eq!(triplet(s.symptoms[2]), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn pn_pays_nothing_for_unmentioned_absence() {
        let o = Ontology::synthetic(2, 0, 0).unwrap();
        let r = record(vec![true, false], vec![false, false]);
        let cfg = EnvConfig { reward_variant: RewardVariant::PositiveNegative, ..EnvConfig::default() };
        let env = ScreeningEnv::new(&o, &cfg);
        let mut s = ScreeningState::with_disclosure(r.history.clone(), 2, SymptomId(0));
        assert_eq!(env.step(&mut s, SymptomId(1), &r).unwrap().reward, 0.0);
    }

    #[test]
    fn masked_actions_are_errors() {
        let o = Ontology::synthetic(2, 3, 0).unwrap();
        let mut bits = vec![false; 8];
        bits[0] = true;
        let r = record(bits, vec![false; 8]);
        let cfg = EnvConfig::default();
        let env = ScreeningEnv::new(&o, &cfg);
        let mut s = ScreeningState::with_disclosure(r.history.clone(), 8, SymptomId(0));
        assert_eq!(env.step(&mut s, SymptomId(0), &r), Err(EnvError::MaskedAction(SymptomId(0))));
        assert_eq!(env.step(&mut s, SymptomId(5), &r), Err(EnvError::MaskedAction(SymptomId(5))));
        assert_eq!(s.turn, 0);
    }

    #[test]
    fn observe_layout() {
        let s = ScreeningState {
            history: vec![0.5, -1.0],
            symptoms: vec![SymptomState::Unknown],
            asked: vec![false],
            turn: 0,
            disclosed: SymptomId(0),
        };
        assert_eq!(s.observe(), vec![0.5, -1.0, 0.0, 0.0, 1.0]);
        assert_eq!(s.observe(), s.clone().observe());
    }

    #[test]
    fn disclosure_is_uniform_over_positives() {
        // Chi-square over 10,000 resets with two positives; 1 dof, p = 0.001 cutoff 10.83.
        let o = Ontology::synthetic(3, 0, 0).unwrap();
        let r = record(vec![true, false, true], vec![false; 3]);
        let cfg = EnvConfig::default();
        let env = ScreeningEnv::new(&o, &cfg);
        let mut rng = rng::seeded(2024);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[env.reset(&r, &mut rng).unwrap().disclosed.0] += 1;
        }
        assert_eq!(counts[1], 0);
        let e = 5000.0;
        let chi2 = [counts[0], counts[2]].iter().map(|&c| (c as f64 - e).powi(2) / e).sum::<f64>();
        assert!(chi2 < 10.83, "chi2 = {chi2}, counts {counts:?}");
        let a = env.reset(&r, &mut rng::seeded(5)).unwrap().disclosed;
        let b = env.reset(&r, &mut rng::seeded(5)).unwrap().disclosed;
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn random_episodes_keep_invariants(seed in 0u64..400, budget in 1usize..30) {
            let o = Ontology::synthetic(4, 3, 0).unwrap();
            let cfg_c = CohortConfig { diseases: 3, size: 5, history_dim: 2, seed, ..CohortConfig::default() };
            let cohort = Cohort::generate(&o, &cfg_c).unwrap();
            let cfg = EnvConfig { budget, ..EnvConfig::default() };
            let env = ScreeningEnv::new(&o, &cfg);
            let mut rng = rng::seeded(seed);
            for r in &cohort.records {
                let mut s = env.reset(r, &mut rng).unwrap();
                let mut asked = vec![s.disclosed];
                let mut ret = 0.0;
                while !env.is_done(&s) {
                    let mask = valid_action_mask(&s, &o);
                    let valid: Vec<usize> = (0..o.len()).filter(|&j| mask[j]).collect();
                    prop_assert!(!valid.is_empty());
                    let a = SymptomId(valid[rng.gen_range(0..valid.len())]);
                    if let Some(p) = o.parent_of(a).unwrap() {
                        prop_assert_eq!(s.symptoms[p.0], SymptomState::Confirmed);
                    }
                    prop_assert!(!asked.contains(&a));
                    asked.push(a);
                    let out = env.step(&mut s, a, r).unwrap();
                    ret += out.reward;
                    let obs = s.observe();
                    for j in 0..o.len() {
                        let t = &obs[2 + 3 * j..2 + 3 * j + 3];
                        prop_assert_eq!(t.iter().sum::<f64>(), 1.0);
                        if s.asked[j] {
                            prop_assert_eq!(t[SLOT_UNKNOWN], 0.0);
                        }
                    }
                    prop_assert_eq!(out.done, env.is_done(&s));
                }
                prop_assert!(s.turn <= budget);
                let discovered = asked[1..].iter().filter(|a| r.oracle_symptoms[a.0]).count();
                prop_assert_eq!(ret, discovered as f64);
                if s.turn < budget {
                    prop_assert!(valid_action_mask(&s, &o).iter().all(|&b| !b));
                }
            }
        }
    }
}
