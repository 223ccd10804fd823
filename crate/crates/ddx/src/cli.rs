//! The `ddx` command line. Exit status is 0 on success, 1 when a run or a
//! validation fails and 2 on a usage error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use toml::Value;

use ddx_core::cohort::{Cohort, PatientRecord};
use ddx_core::dialogue::Doctor;
use ddx_core::ontology::Ontology;
use ddx_core::procedure;
use ddx_core::screener::Provenance;

use crate::config::{load_config, parse_override, ResolvedConfig};
use crate::error::{Error, Result};
use crate::formats;
use crate::formats::metrics::MetricRecord;
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "ddx", version, about = "Automated diagnosis: symptom inquiry, screening and differential procedures")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Top-level seed; section seeds follow it unless set explicitly.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides a configuration value, e.g. `--set ppo.total_steps=5000`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Directory for outputs and run logs.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads for batch dialogues.
    #[arg(long, global = true, value_name = "N")]
    parallelism: Option<usize>,
}

#[derive(Debug, Args)]
struct Inputs {
    /// Ontology file; defaults to the configured or synthetic ontology.
    #[arg(long, value_name = "PATH")]
    ontology: Option<PathBuf>,
    /// Cohort file [default: <out-dir>/cohort.jsonl].
    #[arg(long, value_name = "PATH")]
    cohort: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitName {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ChannelArg {
    Exact,
    Noisy,
    Llm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProvenanceArg {
    PolicyRollout,
    FullOracle,
    HistoryOnly,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportFormat {
    Table,
    Jsonl,
}

#[derive(Debug, Args)]
struct Dialogue {
    /// Answer channel.
    #[arg(long, value_enum)]
    channel: Option<ChannelArg>,
    /// Cohort split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    split: SplitName,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Writes a synthetic two-layer symptom ontology.
    GenOntology {
        #[arg(long)]
        n_first: Option<usize>,
        #[arg(long)]
        children: Option<usize>,
        /// Output file [default: <out-dir>/ontology.tsv].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Generates a synthetic patient cohort and its disease profiles.
    GenCohort {
        #[arg(long, value_name = "PATH")]
        ontology: Option<PathBuf>,
        #[arg(long)]
        diseases: Option<usize>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        history_dim: Option<usize>,
        /// Output file [default: <out-dir>/cohort.jsonl].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Trains the inquiry policy with PPO on the training split.
    TrainPolicy {
        #[command(flatten)]
        inputs: Inputs,
        /// Question budget per episode.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        total_steps: Option<usize>,
        /// Policy weights [default: <out-dir>/policy.json].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Training curve [default: <out-dir>/training.jsonl].
        #[arg(long, value_name = "PATH")]
        curve: Option<PathBuf>,
    },
    /// Trains the screening classifier.
    TrainScreener {
        #[command(flatten)]
        inputs: Inputs,
        /// Policy weights [default: <out-dir>/policy.json].
        #[arg(long, value_name = "PATH")]
        policy: Option<PathBuf>,
        /// Dataset provenance.
        #[arg(long, value_enum)]
        variant: Option<ProvenanceArg>,
        /// Classifier weights [default: <out-dir>/screener.json].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Runs screening dialogues and reports Top-k hit rates.
    EvalScreening {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        dialogue: Dialogue,
        #[arg(long, value_name = "PATH")]
        policy: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        screener: Option<PathBuf>,
        /// Metrics [default: <out-dir>/screening.jsonl].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Transcripts [default: <out-dir>/screening-transcripts.jsonl].
        #[arg(long, value_name = "PATH")]
        transcripts: Option<PathBuf>,
    },
    /// Parses and validates procedure files; diagnostics go to stderr.
    ProcedureCheck {
        #[arg(required = true, value_name = "FILE")]
        files: Vec<PathBuf>,
        /// Ontology that symptom references must resolve against.
        #[arg(long, value_name = "PATH")]
        ontology: Option<PathBuf>,
        /// Comma-separated finding names that tests may reference.
        #[arg(long, value_delimiter = ',')]
        findings: Option<Vec<String>>,
    },
    /// Runs one differential procedure over a cohort split.
    EvalDifferential {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        dialogue: Dialogue,
        #[arg(long, value_name = "PATH")]
        procedure: PathBuf,
        /// Disease label treated as the positive class.
        #[arg(long)]
        disease: usize,
        /// Metrics [default: <out-dir>/differential.jsonl].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Transcripts [default: <out-dir>/differential-transcripts.jsonl].
        #[arg(long, value_name = "PATH")]
        transcripts: Option<PathBuf>,
        /// Error analysis [default: <out-dir>/differential-errors.txt].
        #[arg(long, value_name = "PATH")]
        errors: Option<PathBuf>,
    },
    /// Runs full consultations: screening, then differential procedures.
    Consult {
        #[command(flatten)]
        inputs: Inputs,
        #[command(flatten)]
        dialogue: Dialogue,
        #[arg(long, value_name = "PATH")]
        policy: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        screener: Option<PathBuf>,
        /// Procedure for a disease, as `DISEASE=PATH`; replaces configured ones.
        #[arg(long = "procedure", value_name = "DISEASE=PATH")]
        procedures: Vec<String>,
        /// Per-case results [default: <out-dir>/consultations.jsonl].
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Transcripts [default: <out-dir>/consultation-transcripts.jsonl].
        #[arg(long, value_name = "PATH")]
        transcripts: Option<PathBuf>,
        /// Summary metrics [default: <out-dir>/consultation-metrics.jsonl].
        #[arg(long, value_name = "PATH")]
        metrics: Option<PathBuf>,
    },
    /// Prints a metrics file.
    Report {
        #[arg(long = "in", value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "table")]
        format: ReportFormat,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenOntology { .. } => "gen-ontology",
            Command::GenCohort { .. } => "gen-cohort",
            Command::TrainPolicy { .. } => "train-policy",
            Command::TrainScreener { .. } => "train-screener",
            Command::EvalScreening { .. } => "eval-screening",
            Command::ProcedureCheck { .. } => "procedure-check",
            Command::EvalDifferential { .. } => "eval-differential",
            Command::Consult { .. } => "consult",
            Command::Report { .. } => "report",
        }
    }

    /// Configuration overrides implied by subcommand flags.
    fn overrides(&self) -> Result<Vec<(String, Value)>> {
        let mut out = Vec::new();
        let mut int = |k: &str, v: Option<usize>| {
            if let Some(v) = v {
                out.push((k.to_string(), Value::Integer(v as i64)));
            }
        };
        match self {
            Command::GenOntology { n_first, children, .. } => {
                int("ontology.n_first", *n_first);
                int("ontology.children_per_first", *children);
            }
            Command::GenCohort { diseases, size, history_dim, .. } => {
                int("cohort.diseases", *diseases);
                int("cohort.size", *size);
                int("cohort.history_dim", *history_dim);
            }
            Command::TrainPolicy { budget, total_steps, .. } => {
                int("env.budget", *budget);
                int("ppo.total_steps", *total_steps);
            }
            _ => {}
        }
        let ontology = match self {
            Command::GenCohort { ontology, .. } => ontology.as_ref(),
            Command::TrainPolicy { inputs, .. }
            | Command::TrainScreener { inputs, .. }
            | Command::EvalScreening { inputs, .. }
            | Command::EvalDifferential { inputs, .. }
            | Command::Consult { inputs, .. } => inputs.ontology.as_ref(),
            _ => None,
        };
        if let Some(p) = ontology {
            out.push(("ontology.path".into(), path_value(p)));
        }
        if let Command::TrainScreener { variant: Some(v), .. } = self {
            let name = match v {
                ProvenanceArg::PolicyRollout => "policy_rollout",
                ProvenanceArg::FullOracle => "full_oracle",
                ProvenanceArg::HistoryOnly => "history_only",
            };
            out.push(("dataset.provenance".into(), Value::String(name.into())));
        }
        let dialogue = match self {
            Command::EvalScreening { dialogue, .. }
            | Command::EvalDifferential { dialogue, .. }
            | Command::Consult { dialogue, .. } => Some(dialogue),
            _ => None,
        };
        if let Some(ch) = dialogue.and_then(|d| d.channel) {
            let name = match ch {
                ChannelArg::Exact => "exact",
                ChannelArg::Noisy => "noisy",
                ChannelArg::Llm => "llm",
            };
            out.push(("channel.kind".into(), Value::String(name.into())));
        }
        if let Command::Consult { procedures, .. } = self {
            if !procedures.is_empty() {
                let entries = procedures.iter().map(|s| procedure_entry(s)).collect::<Result<Vec<_>>>()?;
                out.push(("procedures".into(), Value::Array(entries)));
            }
        }
        Ok(out)
    }
}

fn path_value(p: &Path) -> Value {
    Value::String(p.to_string_lossy().into_owned())
}

fn procedure_entry(s: &str) -> Result<Value> {
    let (d, p) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--procedure `{s}` must have the form DISEASE=PATH")))?;
    let disease: i64 = d.trim().parse().map_err(|_| Error::Config(format!("--procedure `{s}`: `{d}` is not a disease label")))?;
    let mut t = toml::Table::new();
    t.insert("disease".into(), Value::Integer(disease));
    t.insert("path".into(), Value::String(p.into()));
    Ok(Value::Table(t))
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<ResolvedConfig> {
    let g = &cli.global;
    let mut overrides = Vec::new();
    if let Some(seed) = g.seed {
        overrides.push(("seed".to_string(), Value::Integer(seed as i64)));
    }
    if let Some(n) = g.parallelism {
        overrides.push(("parallelism".to_string(), Value::Integer(n as i64)));
    }
    if let Some(dir) = &g.out_dir {
        overrides.push(("output.dir".to_string(), path_value(dir)));
    }
    overrides.extend(cli.command.overrides()?);
    for s in &g.set {
        overrides.push(parse_override(s)?);
    }
    load_config(g.config.as_deref(), &overrides)
}

/// Writes the run header: version, command, seed and the resolved
/// configuration with the source of every value.
fn write_run_log(command: &str, resolved: &ResolvedConfig) -> Result<()> {
    let header = json!({
        "ddx_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": resolved.config.seed,
        "config": resolved.config,
        "provenance": resolved.provenance,
    });
    let mut text = serde_json::to_string_pretty(&header).expect("config serializes");
    text.push('\n');
    formats::write(&resolved.config.output.dir.join(format!("run-{command}.log")), &text)
}

fn note(msg: impl AsRef<str>) {
    eprintln!("{}", msg.as_ref());
}

struct Context {
    resolved: ResolvedConfig,
}

impl Context {
    fn config(&self) -> &crate::config::ExperimentConfig {
        &self.resolved.config
    }

    fn out(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.config().output.dir.join(default))
    }

    fn ontology(&self) -> Result<Ontology> {
        pipeline::ontology(self.config())
    }

    fn cohort(&self, inputs: &Inputs, ontology: &Ontology) -> Result<Cohort> {
        let path = self.out(&inputs.cohort, "cohort.jsonl");
        let loaded = formats::cohort::load_cohort(&path, ontology)?;
        if !loaded.hierarchy_warnings.is_empty() {
            note(format!(
                "warning: {} records confirm a child symptom without its parent category",
                loaded.hierarchy_warnings.len()
            ));
        }
        Ok(loaded.cohort)
    }

    fn records(&self, cohort: &Cohort, split: SplitName) -> Result<Vec<PatientRecord>> {
        if let SplitName::All = split {
            return Ok(cohort.records.clone());
        }
        let s = pipeline::split_cohort(cohort, self.config())?;
        Ok(match split {
            SplitName::Train => s.train,
            SplitName::Validation => s.validation,
            _ => s.test,
        })
    }
}

fn execute(cli: Cli) -> Result<i32> {
    let command = cli.command.name();
    let ctx = Context { resolved: resolve_config(&cli)? };
    write_run_log(command, &ctx.resolved)?;
    let cfg = ctx.config();
    match &cli.command {
        Command::Report { input, format } => return report(input, *format),
        Command::ProcedureCheck { files, ontology, findings } => {
            return procedure_check(files, ontology.as_deref(), findings.as_deref())
        }
        Command::GenOntology { out, .. } => {
            let o = pipeline::ontology(&crate::config::ExperimentConfig {
                ontology: crate::config::OntologySection { path: PathBuf::new(), ..cfg.ontology.clone() },
                ..cfg.clone()
            })?;
            let path = ctx.out(out, "ontology.tsv");
            formats::ontology::save_ontology(&o, &path)?;
            note(format!("wrote {} ({} symptoms, {} categories)", path.display(), o.len(), o.n_first()));
        }
        Command::GenCohort { out, .. } => {
            let o = ctx.ontology()?;
            let cohort = pipeline::generate_cohort(&o, cfg)?;
            let path = ctx.out(out, "cohort.jsonl");
            formats::cohort::save_cohort(&cohort, &path)?;
            note(format!("wrote {} ({} records, {} diseases)", path.display(), cohort.records.len(), cohort.diseases));
        }
        Command::TrainPolicy { inputs, out, curve, .. } => {
            let o = ctx.ontology()?;
            let cohort = ctx.cohort(inputs, &o)?;
            let train = ctx.records(&cohort, SplitName::Train)?;
            let (net, points) = pipeline::train_inquiry_policy(&o, &train, cfg)?;
            let path = ctx.out(out, "policy.json");
            formats::weights::save_actor_critic(&net, &path)?;
            let curve_path = ctx.out(curve, "training.jsonl");
            let records: Vec<MetricRecord> = points.iter().cloned().map(MetricRecord::Training).collect();
            formats::metrics::save_metrics(&records, &curve_path)?;
            if let Some(last) = points.last() {
                note(format!("final mean return {:.4} after {} steps", last.mean_return, last.steps));
            }
            note(format!("wrote {} and {}", path.display(), curve_path.display()));
        }
        Command::TrainScreener { inputs, policy, out, .. } => {
            let o = ctx.ontology()?;
            let cohort = ctx.cohort(inputs, &o)?;
            let splits = pipeline::split_cohort(&cohort, cfg)?;
            let net = if cfg.dataset.provenance == Provenance::PolicyRollout {
                Some(formats::weights::load_actor_critic(&ctx.out(policy, "policy.json"))?)
            } else {
                None
            };
            let trained = pipeline::train_screening_classifier(&o, net.as_ref(), &splits, cohort.diseases, cfg)?;
            let path = ctx.out(out, "screener.json");
            formats::weights::save_classifier(&trained.model, &path)?;
            note(format!(
                "validation top-1 {:.4} at epoch {} of {}; wrote {}",
                trained.best_validation_top1,
                trained.best_epoch,
                trained.epochs_run,
                path.display()
            ));
        }
        Command::EvalScreening { inputs, dialogue, policy, screener, out, transcripts } => {
            let o = ctx.ontology()?;
            let cohort = ctx.cohort(inputs, &o)?;
            let records = ctx.records(&cohort, dialogue.split)?;
            let net = formats::weights::load_actor_critic(&ctx.out(policy, "policy.json"))?;
            let clf = formats::weights::load_classifier(&ctx.out(screener, "screener.json"))?;
            let name = split_name(dialogue.split);
            let (metrics, ts) = pipeline::evaluate_screening(&o, &net, &clf, &records, name, cfg)?;
            let path = ctx.out(out, "screening.jsonl");
            let record = MetricRecord::Screening(metrics);
            formats::metrics::save_metrics([&record], &path)?;
            formats::transcript::save_transcripts(&ts, &ctx.out(transcripts, "screening-transcripts.jsonl"))?;
            print!("{}", formats::metrics::render_table(std::slice::from_ref(&record)));
        }
        Command::EvalDifferential { inputs, dialogue, procedure, disease, out, transcripts, errors } => {
            let o = ctx.ontology()?;
            let cohort = ctx.cohort(inputs, &o)?;
            let records = ctx.records(&cohort, dialogue.split)?;
            let graph = pipeline::load_procedure(procedure, Some(&o))?;
            let eval = pipeline::evaluate_differential(&o, &graph, *disease, &records, cfg)?;
            let record = MetricRecord::Differential(eval.record);
            formats::metrics::save_metrics([&record], &ctx.out(out, "differential.jsonl"))?;
            formats::transcript::save_transcripts(
                &eval.transcripts,
                &ctx.out(transcripts, "differential-transcripts.jsonl"),
            )?;
            formats::write(&ctx.out(errors, "differential-errors.txt"), &eval.report.render())?;
            print!("{}", formats::metrics::render_table(std::slice::from_ref(&record)));
        }
        Command::Consult { inputs, dialogue, policy, screener, out, transcripts, metrics, .. } => {
            let o = ctx.ontology()?;
            let cohort = ctx.cohort(inputs, &o)?;
            let records = ctx.records(&cohort, dialogue.split)?;
            let net = formats::weights::load_actor_critic(&ctx.out(policy, "policy.json"))?;
            let clf = formats::weights::load_classifier(&ctx.out(screener, "screener.json"))?;
            let procedures = pipeline::load_procedures(cfg, &o)?;
            let doctor = Doctor { policy: &net, screener: &clf, procedures: &procedures };
            let run = pipeline::consult(&o, &doctor, &records, cohort.diseases, split_name(dialogue.split), cfg)?;
            let mut text = String::new();
            for r in &run.results {
                formats::push_json_line(&mut text, r);
            }
            formats::write(&ctx.out(out, "consultations.jsonl"), &text)?;
            formats::transcript::save_transcripts(&run.transcripts, &ctx.out(transcripts, "consultation-transcripts.jsonl"))?;
            let record = MetricRecord::Consultation(run.summary);
            formats::metrics::save_metrics([&record], &ctx.out(metrics, "consultation-metrics.jsonl"))?;
            for (id, msg) in &run.errors {
                note(format!("consultation {id} failed: {msg}"));
            }
            print!("{}", formats::metrics::render_table(std::slice::from_ref(&record)));
            if !run.errors.is_empty() {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn split_name(split: SplitName) -> &'static str {
    match split {
        SplitName::Train => "train",
        SplitName::Validation => "validation",
        SplitName::Test => "test",
        SplitName::All => "all",
    }
}

fn report(input: &Path, format: ReportFormat) -> Result<i32> {
    let records = formats::metrics::load_metrics(input)?;
    let text = match format {
        ReportFormat::Table => formats::metrics::render_table(&records),
        ReportFormat::Jsonl => formats::metrics::render_metrics(&records),
    };
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(text.as_bytes()).map_err(|e| Error::io(Path::new("<stdout>"), e))?;
    Ok(0)
}

fn procedure_check(files: &[PathBuf], ontology: Option<&Path>, findings: Option<&[String]>) -> Result<i32> {
    let ontology = ontology.map(formats::ontology::load_ontology).transpose()?;
    let findings: Option<BTreeSet<String>> = findings.map(|f| f.iter().map(|s| s.trim().to_string()).collect());
    let mut failed = false;
    for path in files {
        let text = formats::read(path)?;
        let graph = match procedure::parse(&text) {
            Ok(g) => g,
            Err(e) => {
                eprintln!("{}:{e}", path.display());
                failed = true;
                continue;
            }
        };
        let diags = procedure::validate(&graph, ontology.as_ref(), findings.as_ref());
        for d in &diags {
            eprintln!("{}:{d}", path.display());
        }
        if procedure::has_errors(&diags) {
            failed = true;
        } else {
            println!("{}: ok ({} nodes)", path.display(), graph.nodes.len());
        }
    }
    Ok(i32::from(failed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> std::result::Result<Cli, clap::Error> {
        Cli::try_parse_from(std::iter::once("ddx").chain(args.iter().copied()))
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        let e = parse(&["gen-cohort", "--bogus"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert_eq!(run(["ddx", "gen-cohort", "--bogus"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(run(["ddx", "--help"]), 0);
    }

    #[test]
    fn flags_become_overrides() {
        let cli = parse(&["--seed", "9", "--set", "ppo.gamma=0.5", "train-policy", "--budget", "4"]).unwrap();
        let r = resolve_config(&cli).unwrap();
        assert_eq!(r.config.seed, 9);
        assert_eq!(r.config.cohort.seed, 9);
        assert_eq!(r.config.env.budget, 4);
        assert_eq!(r.config.ppo.gamma, 0.5);
        assert_eq!(r.provenance["env.budget"], crate::config::Source::Flag);
    }

    #[test]
    fn procedure_flags_replace_config_entries() {
        let cli = parse(&["consult", "--procedure", "2=a.dproc", "--procedure", "0=b.dproc"]).unwrap();
        let r = resolve_config(&cli).unwrap();
        let got: Vec<(usize, String)> =
            r.config.procedures.iter().map(|p| (p.disease, p.path.display().to_string())).collect();
        assert_eq!(got, vec![(2, "a.dproc".into()), (0, "b.dproc".into())]);
        assert!(resolve_config(&parse(&["consult", "--procedure", "x"]).unwrap()).is_err());
    }

    #[test]
    fn bad_override_is_reported() {
        let cli = parse(&["--set", "ppo.gama=0.5", "gen-ontology"]).unwrap();
        let e = resolve_config(&cli).unwrap_err().to_string();
        assert!(e.contains("ppo.gamma"), "{e}");
    }
}
