//! Experiment configuration: a TOML document checked key by key against the
//! defaults, with per-value provenance (default, file, flag, or derived from
//! the top-level seed).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use ddx_core::cohort::{CohortConfig, DEFAULT_SPLIT};
use ddx_core::dialogue::{ConsultationConfig, NoisyChannelConfig};
use ddx_core::procedure::MAX_QUESTIONS;
use ddx_core::rl::PpoConfig;
use ddx_core::screen_env::EnvConfig;
use ddx_core::screener::{Provenance, ScreenerConfig};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OntologySection {
    /// Ontology file; when empty a synthetic ontology is generated.
    pub path: PathBuf,
    pub n_first: usize,
    pub children_per_first: usize,
}

impl Default for OntologySection {
    fn default() -> Self {
        OntologySection { path: PathBuf::new(), n_first: 10, children_per_first: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { fractions: DEFAULT_SPLIT, seed: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub provenance: Provenance,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection { provenance: Provenance::PolicyRollout }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Exact,
    Noisy,
    Llm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    pub kind: ChannelKind,
    pub p_neg_to_pos: f64,
    pub p_pos_to_neg: f64,
    pub seed: u64,
    /// Model name sent to the chat endpoint.
    pub model: String,
    pub timeout_secs: u64,
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            kind: ChannelKind::Exact,
            p_neg_to_pos: 0.1,
            p_pos_to_neg: 0.1,
            seed: 1,
            model: "default".into(),
            timeout_secs: 30,
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

impl ChannelSection {
    pub fn noisy(&self) -> NoisyChannelConfig {
        NoisyChannelConfig { p_neg_to_pos: self.p_neg_to_pos, p_pos_to_neg: self.p_pos_to_neg, seed: self.seed }
    }

    /// Short label for reports.
    pub fn label(&self) -> String {
        match self.kind {
            ChannelKind::Exact => "exact".into(),
            ChannelKind::Noisy => format!("noisy({}, {})", self.p_neg_to_pos, self.p_pos_to_neg),
            ChannelKind::Llm => format!("llm({})", self.model),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsultationSection {
    pub k_candidates: usize,
    pub max_questions: usize,
}

impl Default for ConsultationSection {
    fn default() -> Self {
        ConsultationSection { k_candidates: 1, max_questions: MAX_QUESTIONS }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcedureEntry {
    pub disease: usize,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("ddx-out") }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; section seeds that are not set explicitly take this value.
    pub seed: u64,
    /// Worker threads for batch evaluation.
    pub parallelism: usize,
    pub ontology: OntologySection,
    pub cohort: CohortConfig,
    pub split: SplitSection,
    pub env: EnvConfig,
    pub ppo: PpoConfig,
    pub dataset: DatasetSection,
    pub screener: ScreenerConfig,
    pub channel: ChannelSection,
    pub consultation: ConsultationSection,
    pub procedures: Vec<ProcedureEntry>,
    pub output: OutputSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            parallelism: 1,
            ontology: OntologySection::default(),
            cohort: CohortConfig::default(),
            split: SplitSection::default(),
            env: EnvConfig::default(),
            ppo: PpoConfig::default(),
            dataset: DatasetSection::default(),
            screener: ScreenerConfig::default(),
            channel: ChannelSection::default(),
            consultation: ConsultationSection::default(),
            procedures: Vec::new(),
            output: OutputSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn consultation_config(&self) -> ConsultationConfig {
        ConsultationConfig {
            k_candidates: self.consultation.k_candidates,
            max_questions: self.consultation.max_questions,
            env: self.env.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1".into());
        }
        if self.env.budget == 0 {
            return bad("env.budget must be at least 1".into());
        }
        if self.consultation.k_candidates == 0 {
            return bad("consultation.k_candidates must be at least 1".into());
        }
        for (k, p) in [("p_neg_to_pos", self.channel.p_neg_to_pos), ("p_pos_to_neg", self.channel.p_pos_to_neg)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("channel.{k} = {p} is not a probability"));
            }
        }
        if self.split.fractions.iter().any(|f| !(0.0..=1.0).contains(f))
            || (self.split.fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad(format!("split.fractions {:?} must be non-negative and sum to 1", self.split.fractions));
        }
        self.ppo.validate().map_err(|e| Error::Config(format!("ppo: {e}")))
    }
}

/// Where a resolved value came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Default,
    File,
    Flag,
    /// Section seed copied from the top-level seed.
    Seed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    /// Source of every leaf value, keyed by dotted path.
    pub provenance: BTreeMap<String, Source>,
}

/// Section seeds that follow the top-level seed unless set explicitly.
const INHERITED_SEEDS: [&str; 5] = ["cohort.seed", "split.seed", "ppo.seed", "screener.seed", "channel.seed"];

fn schema() -> Table {
    let mut v = Value::try_from(ExperimentConfig::default()).expect("defaults serialize to TOML");
    let template = Value::try_from(ProcedureEntry::default()).expect("procedure entry serializes");
    if let Some(t) = v.as_table_mut() {
        t.insert("procedures".into(), Value::Array(vec![template]));
    }
    match v {
        Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.into()
    } else {
        format!("{prefix}.{key}")
    }
}

fn unknown_key(path: &str, key: &str, candidates: &Table) -> Error {
    let nearest = candidates
        .keys()
        .map(|c| (strsim::levenshtein(key, c), c))
        .min()
        .filter(|(d, c)| *d <= (c.len().max(key.len()) / 2).max(2));
    let full = join(path, key);
    match nearest {
        Some((_, c)) => Error::Config(format!("unknown key `{full}`; did you mean `{}`?", join(path, c))),
        None => {
            let valid: Vec<&str> = candidates.keys().map(String::as_str).collect();
            Error::Config(format!("unknown key `{full}`; valid keys here: {}", valid.join(", ")))
        }
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn compatible(expected: &Value, found: &Value) -> bool {
    matches!(
        (expected, found),
        (Value::String(_), Value::String(_))
            | (Value::Integer(_), Value::Integer(_))
            | (Value::Float(_), Value::Float(_) | Value::Integer(_))
            | (Value::Boolean(_), Value::Boolean(_))
            | (Value::Array(_), Value::Array(_))
            | (Value::Table(_), Value::Table(_))
    )
}

/// Checks `found` against `expected`: every key must exist and every leaf
/// must have the expected type. Array elements are checked against the
/// first element of the expected array, whose keys are all required.
fn check(path: &str, expected: &Value, found: &Value) -> Result<()> {
    if !compatible(expected, found) {
        return Err(Error::Config(format!(
            "`{path}`: expected {}, found {}",
            type_name(expected),
            type_name(found)
        )));
    }
    match (expected, found) {
        (Value::Table(e), Value::Table(f)) => {
            for (k, v) in f {
                let inner = e.get(k).ok_or_else(|| unknown_key(path, k, e))?;
                check(&join(path, k), inner, v)?;
            }
        }
        (Value::Array(e), Value::Array(f)) => {
            if let Some(template) = e.first() {
                for (i, item) in f.iter().enumerate() {
                    let p = format!("{path}[{i}]");
                    check(&p, template, item)?;
                    if let (Value::Table(t), Value::Table(it)) = (template, item) {
                        if let Some(missing) = t.keys().find(|k| !it.contains_key(*k)) {
                            return Err(Error::Config(format!("`{p}`: missing required key `{missing}`")));
                        }
                    }
                }
            }
        }
        _ => {}
    }
    Ok(())
}

fn merge(base: &mut Table, over: &Table) {
    for (k, v) in over {
        match (base.get_mut(k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            _ => {
                base.insert(k.clone(), v.clone());
            }
        }
    }
}

fn leaves(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Table(t) => {
            for (k, inner) in t {
                leaves(&join(prefix, k), inner, out);
            }
        }
        _ => out.push(prefix.into()),
    }
}

fn mark(prov: &mut BTreeMap<String, Source>, table: &Table, source: Source) {
    let mut paths = Vec::new();
    leaves("", &Value::Table(table.clone()), &mut paths);
    for p in paths {
        prov.insert(p, source);
    }
}

/// Parses a `key=value` override. The value is read as a TOML value, or as
/// a bare string when it does not parse.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` must have the form key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.into()));
    Ok((key.into(), value))
}

fn nest(path: &str, value: Value) -> Table {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().unwrap_or_default();
    let mut t = Table::new();
    t.insert(last.into(), value);
    for p in parts.into_iter().rev() {
        let mut outer = Table::new();
        outer.insert(p.into(), Value::Table(t));
        t = outer;
    }
    t
}

/// Resolves defaults, then the file (if any), then `overrides`, in that
/// order of precedence from lowest to highest.
pub fn resolve(file: Option<(&str, &Path)>, overrides: &[(String, Value)]) -> Result<ResolvedConfig> {
    let schema = Value::Table(schema());
    let mut merged = match Value::try_from(ExperimentConfig::default()).expect("defaults serialize") {
        Value::Table(t) => t,
        _ => unreachable!("a struct serializes to a table"),
    };
    let mut provenance = BTreeMap::new();
    mark(&mut provenance, &merged, Source::Default);

    if let Some((text, path)) = file {
        let table: Table = toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        check("", &schema, &Value::Table(table.clone()))
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        merge(&mut merged, &table);
        mark(&mut provenance, &table, Source::File);
    }
    for (key, value) in overrides {
        let t = nest(key, value.clone());
        check("", &schema, &Value::Table(t.clone())).map_err(|e| Error::Config(format!("flag: {e}")))?;
        merge(&mut merged, &t);
        mark(&mut provenance, &t, Source::Flag);
    }
    let seed = merged.get("seed").cloned().unwrap_or(Value::Integer(1));
    for path in INHERITED_SEEDS {
        if provenance.get(path) == Some(&Source::Default) {
            merge(&mut merged, &nest(path, seed.clone()));
            provenance.insert(path.into(), Source::Seed);
        }
    }
    let config: ExperimentConfig =
        Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    config.validate()?;
    Ok(ResolvedConfig { config, provenance })
}

/// Reads and resolves a config file; a missing path means defaults only.
pub fn load_config(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<ResolvedConfig> {
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            resolve(Some((&text, p)), overrides)
        }
        None => resolve(None, overrides),
    }
}
