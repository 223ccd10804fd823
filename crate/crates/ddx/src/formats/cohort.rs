//! Cohort files: a header line `{M, F, D, d, seed, size}` followed by one
//! record per line. Disease profiles live in a sibling `<stem>.profiles.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ddx_core::cohort::{Cohort, DiseaseProfile, PatientRecord};
use ddx_core::ontology::Ontology;

use super::push_json_line;
use crate::error::{Error, Result};

pub const COHORT_FORMAT_VERSION: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format_version: u64,
    #[serde(rename = "M")]
    symptoms: usize,
    #[serde(rename = "F")]
    first_layer: usize,
    #[serde(rename = "D")]
    diseases: usize,
    d: usize,
    seed: u64,
    size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    id: String,
    label: usize,
    symptoms: Vec<usize>,
    denials: Vec<usize>,
    history: Vec<f64>,
    findings: BTreeMap<String, f64>,
}

fn set_bits(bits: &[bool]) -> Vec<usize> {
    bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfilesFile {
    format_version: u64,
    profiles: Vec<DiseaseProfile>,
}

/// Path of the profile file kept next to `cohort_path`.
pub fn profiles_path(cohort_path: &Path) -> PathBuf {
    let stem = cohort_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    cohort_path.with_file_name(format!("{stem}.profiles.json"))
}

pub fn render_cohort(cohort: &Cohort) -> String {
    let mut out = String::new();
    push_json_line(
        &mut out,
        &Header {
            format_version: COHORT_FORMAT_VERSION,
            symptoms: cohort.symptoms,
            first_layer: cohort.first_layer,
            diseases: cohort.diseases,
            d: cohort.history_dim,
            seed: cohort.seed,
            size: cohort.records.len(),
        },
    );
    for r in &cohort.records {
        push_json_line(
            &mut out,
            &RecordLine {
                id: r.id.clone(),
                label: r.label,
                symptoms: set_bits(&r.oracle_symptoms),
                denials: set_bits(&r.explicit_denials),
                history: r.history.clone(),
                findings: r.findings.clone(),
            },
        );
    }
    out
}

pub fn render_profiles(profiles: &[DiseaseProfile]) -> String {
    let file = ProfilesFile { format_version: COHORT_FORMAT_VERSION, profiles: profiles.to_vec() };
    let mut s = serde_json::to_string_pretty(&file).expect("profiles always serialize");
    s.push('\n');
    s
}

fn bits(indices: &[usize], m: usize, path: &Path, line: usize, what: &str) -> Result<Vec<bool>> {
    let mut v = vec![false; m];
    for &i in indices {
        *v.get_mut(i).ok_or_else(|| Error::format(path, line, format!("{what} index {i} out of range (M = {m})")))? = true;
    }
    Ok(v)
}

/// Parses cohort text. Profiles are left empty.
pub fn parse_cohort(text: &str, path: &Path) -> Result<Cohort> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, head) = lines.next().ok_or_else(|| Error::format(path, 1, "missing header line"))?;
    let header: Header =
        serde_json::from_str(head).map_err(|e| Error::format(path, 1, format!("bad header: {e}")))?;
    if header.format_version != COHORT_FORMAT_VERSION {
        return Err(Error::format(
            path,
            1,
            format!("cohort format version {} is not supported (expected {COHORT_FORMAT_VERSION})", header.format_version),
        ));
    }
    let mut records = Vec::with_capacity(header.size);
    for (i, line) in lines {
        let r: RecordLine = serde_json::from_str(line).map_err(|e| Error::format(path, i + 1, e.to_string()))?;
        records.push(PatientRecord {
            oracle_symptoms: bits(&r.symptoms, header.symptoms, path, i + 1, "symptom")?,
            explicit_denials: bits(&r.denials, header.symptoms, path, i + 1, "denial")?,
            id: r.id,
            label: r.label,
            history: r.history,
            findings: r.findings,
        });
    }
    if records.len() != header.size {
        return Err(Error::format(
            path,
            1,
            format!("header announces {} records but the file holds {}", header.size, records.len()),
        ));
    }
    Ok(Cohort {
        symptoms: header.symptoms,
        first_layer: header.first_layer,
        diseases: header.diseases,
        history_dim: header.d,
        seed: header.seed,
        records,
        profiles: Vec::new(),
    })
}

pub fn parse_profiles(text: &str, path: &Path) -> Result<Vec<DiseaseProfile>> {
    let file: ProfilesFile = serde_json::from_str(text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
    if file.format_version != COHORT_FORMAT_VERSION {
        return Err(Error::format(path, 1, format!("profile format version {} is not supported", file.format_version)));
    }
    Ok(file.profiles)
}

/// A cohort read from disk with the ids of records that violate hierarchy
/// consistency (accepted, but worth a warning).
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedCohort {
    pub cohort: Cohort,
    pub hierarchy_warnings: Vec<String>,
}

/// Reads a cohort and, when present, its profile file; validates it against
/// `ontology`.
pub fn load_cohort(path: &Path, ontology: &Ontology) -> Result<LoadedCohort> {
    let mut cohort = parse_cohort(&super::read(path)?, path)?;
    let ppath = profiles_path(path);
    if ppath.exists() {
        cohort.profiles = parse_profiles(&super::read(&ppath)?, &ppath)?;
        if cohort.profiles.len() != cohort.diseases {
            return Err(Error::format(
                &ppath,
                1,
                format!("{} profiles for {} diseases", cohort.profiles.len(), cohort.diseases),
            ));
        }
    }
    let hierarchy_warnings = cohort.check(ontology)?;
    Ok(LoadedCohort { cohort, hierarchy_warnings })
}

/// Writes the cohort and its profile file.
pub fn save_cohort(cohort: &Cohort, path: &Path) -> Result<()> {
    super::write(path, &render_cohort(cohort))?;
    super::write(&profiles_path(path), &render_profiles(&cohort.profiles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddx_core::cohort::CohortConfig;

    fn small() -> (Ontology, Cohort) {
        let o = Ontology::synthetic(4, 2, 0).unwrap();
        let c = Cohort::generate(&o, &CohortConfig { diseases: 3, size: 40, history_dim: 4, ..CohortConfig::default() })
            .unwrap();
        (o, c)
    }

    #[test]
    fn round_trip_through_files() {
        let (o, c) = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cohort.jsonl");
        save_cohort(&c, &path).unwrap();
        assert!(dir.path().join("cohort.profiles.json").exists());
        let loaded = load_cohort(&path, &o).unwrap();
        assert_eq!(loaded.cohort, c);
        assert!(loaded.hierarchy_warnings.is_empty());
        assert_eq!(render_cohort(&loaded.cohort), render_cohort(&c));
    }

    #[test]
    fn header_carries_dimensions() {
        let (_, c) = small();
        let text = render_cohort(&c);
        let head: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(head["M"], 12);
        assert_eq!(head["F"], 4);
        assert_eq!(head["D"], 3);
        assert_eq!(head["d"], 4);
        assert_eq!(head["size"], 40);
        assert_eq!(text.lines().count(), 41);
    }

    #[test]
    fn hierarchy_violations_load_with_warning() {
        let (o, mut c) = small();
        let r = &mut c.records[0];
        r.oracle_symptoms[0] = false;
        r.oracle_symptoms[1] = true;
        r.explicit_denials[0] = false;
        r.explicit_denials[1] = false;
        r.oracle_symptoms[4] = true;
        r.explicit_denials[4] = false;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        super::super::write(&path, &render_cohort(&c)).unwrap();
        let loaded = load_cohort(&path, &o).unwrap();
        assert_eq!(loaded.hierarchy_warnings, vec![c.records[0].id.clone()]);
        assert!(loaded.cohort.profiles.is_empty());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let (o, c) = small();
        let p = Path::new("c.jsonl");
        let text = render_cohort(&c);
        let truncated: String = text.lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(parse_cohort(&truncated, p).unwrap_err().to_string().contains("announces"));
        let bad = text.replacen("\"symptoms\":[", "\"symptoms\":[999,", 1);
        assert!(parse_cohort(&bad, p).is_err());
        assert!(parse_cohort("", p).is_err());
        let other = Ontology::synthetic(5, 2, 0).unwrap();
        let mut loaded = parse_cohort(&text, p).unwrap();
        assert!(loaded.check(&other).is_err());
        loaded.records[0].label = 7;
        assert!(loaded.check(&o).is_err());
    }
}
