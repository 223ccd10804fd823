use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
seed = 3

[ontology]
n_first = 4
children_per_first = 2

[cohort]
diseases = 3
size = 300
history_dim = 4

[env]
budget = 4

[ppo]
steps_per_update = 256
total_steps = 768
minibatch_size = 64

[ppo.network]
trunk_hidden = [16]
head_hidden = 16

[screener]
hidden = [16]
max_epochs = 5
"#;

const PROCEDURE: &str = r#"procedure "cat0-check" for "d0" {
  start: a
  node a { ask: "Any cat0 complaints?" when: symptom("cat0") yes -> b no -> exclude }
  node b { ask: "Any sym0.0?" when: symptom("sym0.0") yes -> confirm no -> exclude }
}
"#;

const CYCLIC: &str = r#"procedure "loop" for "d0" {
  start: a
  node a { ask: "a?" when: symptom("cat0") yes -> b no -> exclude }
  node b { ask: "b?" when: symptom("cat1") yes -> a no -> confirm }
}
"#;

fn ddx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddx")).current_dir(dir).args(args).output().expect("ddx runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ddx(dir, args);
    assert!(
        out.status.success(),
        "ddx {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("exp.toml"), CONFIG).unwrap();
    fs::write(dir.path().join("cat0.dproc"), PROCEDURE).unwrap();
    fs::write(dir.path().join("cyclic.dproc"), CYCLIC).unwrap();
    dir
}

fn pipeline(dir: &Path) {
    let c = ["--config", "exp.toml", "--out-dir", "out"];
    let with = |extra: &[&'static str]| -> Vec<&'static str> {
        let mut v: Vec<&str> = c.to_vec();
        v.extend_from_slice(extra);
        v
    };
    ok(dir, &with(&["gen-ontology"]));
    ok(dir, &with(&["gen-cohort", "--ontology", "out/ontology.tsv"]));
    ok(dir, &with(&["train-policy", "--ontology", "out/ontology.tsv"]));
    ok(dir, &with(&["train-screener", "--ontology", "out/ontology.tsv"]));
    ok(dir, &with(&["eval-screening", "--ontology", "out/ontology.tsv", "--channel", "noisy"]));
    ok(dir, &with(&["eval-differential", "--ontology", "out/ontology.tsv", "--procedure", "cat0.dproc", "--disease", "0"]));
    ok(dir, &with(&["consult", "--ontology", "out/ontology.tsv", "--procedure", "0=cat0.dproc"]));
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        files.insert(p.clone(), fs::read(&p).unwrap());
    }
    files
}

#[test]
fn pipeline_is_byte_identical_on_rerun() {
    let dir = setup();
    pipeline(dir.path());
    let first = snapshot(&dir.path().join("out"));
    for name in [
        "ontology.tsv",
        "cohort.jsonl",
        "cohort.profiles.json",
        "policy.json",
        "training.jsonl",
        "screener.json",
        "screening.jsonl",
        "screening-transcripts.jsonl",
        "differential.jsonl",
        "differential-transcripts.jsonl",
        "differential-errors.txt",
        "consultations.jsonl",
        "consultation-transcripts.jsonl",
        "consultation-metrics.jsonl",
        "run-gen-cohort.log",
        "run-consult.log",
    ] {
        assert!(first.contains_key(&dir.path().join("out").join(name)), "{name} missing");
    }
    pipeline(dir.path());
    let second = snapshot(&dir.path().join("out"));
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (path, bytes) in &first {
        assert!(bytes == &second[path], "{} differs between runs", path.display());
    }
}

#[test]
fn run_log_records_config_and_sources() {
    let dir = setup();
    ok(dir.path(), &["--config", "exp.toml", "--out-dir", "out", "--seed", "5", "gen-ontology"]);
    let log: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/run-gen-ontology.log")).unwrap()).unwrap();
    assert_eq!(log["command"], "gen-ontology");
    assert_eq!(log["seed"], 5);
    assert_eq!(log["config"]["cohort"]["size"], 300);
    assert_eq!(log["provenance"]["seed"], "flag");
    assert_eq!(log["provenance"]["cohort.size"], "file");
    assert_eq!(log["provenance"]["cohort.seed"], "seed");
    assert_eq!(log["provenance"]["ppo.gamma"], "default");
    assert_eq!(log["ddx_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn report_renders_table_and_jsonl() {
    let dir = setup();
    let c = ["--config", "exp.toml", "--out-dir", "out"];
    ok(dir.path(), &[&c[..], &["gen-cohort"]].concat());
    ok(dir.path(), &[&c[..], &["eval-differential", "--procedure", "cat0.dproc", "--disease", "0", "--split", "all"]].concat());
    let table = ok(dir.path(), &["report", "--in", "out/differential.jsonl"]);
    let table = String::from_utf8(table.stdout).unwrap();
    assert!(table.starts_with("[differential cat0-check]"), "{table}");
    for field in ["cases", "success_rate", "accuracy", "precision", "recall", "f1", "confusion.tp"] {
        assert!(table.lines().any(|l| l.trim_start().starts_with(field)), "{field} missing:\n{table}");
    }
    let row = |k: &str| table.lines().map(|l| l.split_whitespace().collect::<Vec<_>>()).find(|w| w[0] == k).unwrap();
    assert_eq!(row("cases")[1], "300");
    assert_eq!(row("failures")[1], "0");
    let jsonl = ok(dir.path(), &["report", "--in", "out/differential.jsonl", "--format", "jsonl"]);
    assert_eq!(jsonl.stdout, fs::read(dir.path().join("out/differential.jsonl")).unwrap());
}

#[test]
fn procedure_check_exit_codes() {
    let dir = setup();
    let good = ok(dir.path(), &["procedure-check", "cat0.dproc"]);
    assert!(String::from_utf8_lossy(&good.stdout).contains("cat0.dproc: ok"));

    let bad = ddx(dir.path(), &["procedure-check", "cat0.dproc", "cyclic.dproc"]);
    assert_eq!(bad.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("cyclic.dproc:") && stderr.contains("cycle"), "{stderr}");

    fs::write(dir.path().join("broken.dproc"), "procedure \"p\" for \"d\" {\n start a }").unwrap();
    let broken = ddx(dir.path(), &["procedure-check", "broken.dproc"]);
    assert_eq!(broken.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("broken.dproc:2:"));

    ok(dir.path(), &["--out-dir", "out", "gen-ontology", "--n-first", "4", "--children", "2"]);
    fs::write(dir.path().join("unknown.dproc"), PROCEDURE.replace("sym0.0", "sym9.9")).unwrap();
    let unknown = ddx(dir.path(), &["procedure-check", "--ontology", "out/ontology.tsv", "unknown.dproc"]);
    assert_eq!(unknown.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("sym9.9"));
}

#[test]
fn usage_errors_exit_two() {
    let dir = setup();
    assert_eq!(ddx(dir.path(), &["gen-cohort", "--bogus"]).status.code(), Some(2));
    assert_eq!(ddx(dir.path(), &["no-such-command"]).status.code(), Some(2));
    assert_eq!(ddx(dir.path(), &["eval-differential"]).status.code(), Some(2));
    assert_eq!(ddx(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn runtime_failures_exit_one() {
    let dir = setup();
    let missing = ddx(dir.path(), &["--out-dir", "out", "train-policy", "--cohort", "nope.jsonl"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.jsonl"));

    fs::write(dir.path().join("typo.toml"), "[ppo]\ngama = 0.9\n").unwrap();
    let typo = ddx(dir.path(), &["--config", "typo.toml", "gen-ontology"]);
    assert_eq!(typo.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&typo.stderr).contains("did you mean `ppo.gamma`"));

    let llm = Command::new(env!("CARGO_BIN_EXE_ddx"))
        .current_dir(dir.path())
        .env_remove("DDX_LLM_ENDPOINT")
        .args(["--out-dir", "out", "eval-differential", "--procedure", "cat0.dproc", "--disease", "0", "--channel", "llm"])
        .output()
        .unwrap();
    assert_eq!(llm.status.code(), Some(1));
}
