//! Planning core for simulated diagnostic consultations.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece of
//! the system:
//!
//! - [`ontology`]: the two-layer symptom hierarchy that defines the inquiry action space.
//! - [`cohort`]: synthetic patient records, the patient-side answer rules and an exact
//!   Bayes posterior used as an oracle.
//! - [`screen_env`]: the symptom-inquiry environment (tri-state state, hierarchical masks,
//!   presence reward, initial disclosure).
//! - [`neural`]: a small feed-forward network stack with analytic gradients and Adam.
//! - [`rl`]: rollout collection, GAE, PPO and the random baseline.
//! - [`screener`]: the supervised disease-screening classifier and ranking metrics.
//! - [`procedure`]: the decision-procedure DSL (parser, validator, interpreter, printer).
//! - [`dialogue`]: semantic channels and the simulated consultation driver.
//! - [`metrics`]: differential-diagnosis metrics and error reports.
//!
//! IO, file formats and the command line live in the `ddx` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cohort;
pub mod dialogue;
pub mod metrics;
pub mod neural;
pub mod ontology;
pub mod procedure;
pub mod rl;
pub mod rng;
pub mod screen_env;
pub mod screener;

pub use cohort::{Cohort, CohortConfig, DiseaseId, DiseaseProfile, PatientRecord};
pub use ontology::{Layer, Ontology, SymptomId, SymptomNode};
pub use rng::Rng;
