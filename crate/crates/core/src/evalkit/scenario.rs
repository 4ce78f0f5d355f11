//! Scenario files and the k-repetition runner.
//!
//! Every repetition gets a fresh working directory under
//! `<out>/<scenario-id>/run_<i>/work`, staged from the scenario's template and
//! inputs. The run's NDJSON trace is written next to it as
//! `run_<i>/trace.ndjson`; the aggregated report goes to
//! `<out>/<scenario-id>/report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::checks::{self, Diff};
use super::judge::{self, JudgeRegistry, Verdict};
use super::passk::{pass_lower_bound, DEFAULT_ALPHA};
use super::trace::{self, FileDigest, TraceEvent, TraceSink, TraceWriter};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StagedInput {
    /// Copied to the same relative path inside the working directory.
    Same(String),
    Renamed {
        from: String,
        to: String,
    },
}

impl StagedInput {
    fn paths(&self) -> (&str, &str) {
        match self {
            StagedInput::Same(p) => (p, p),
            StagedInput::Renamed { from, to } => (from, to),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionProbe {
    pub name: String,
    pub argv: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    /// Directory copied recursively into every fresh working directory.
    #[serde(default)]
    pub workdir_template: Option<String>,
    #[serde(default)]
    pub inputs: Vec<StagedInput>,
    #[serde(default)]
    pub record_versions: Vec<VersionProbe>,
    pub subject_command: Vec<String>,
    #[serde(default)]
    pub env: BTreeMap<String, String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Check {
    NumericFileCompare {
        actual: String,
        reference: String,
        #[serde(default)]
        abs_tol: f64,
        #[serde(default)]
        rel_tol: f64,
    },
    FileSet {
        dir: String,
        expected: Vec<String>,
        #[serde(default = "yes")]
        exact: bool,
    },
    TextGolden {
        actual: String,
        reference: String,
    },
    Judge {
        #[serde(default)]
        rubric: Option<String>,
        #[serde(default)]
        rubric_file: Option<String>,
        #[serde(default = "stub_id")]
        adapter: String,
        /// Artifacts to show the judge; defaults to those named by stub rules.
        #[serde(default)]
        artifacts: Vec<String>,
    },
}

fn yes() -> bool {
    true
}

fn stub_id() -> String {
    "stub".into()
}

impl Check {
    pub fn kind(&self) -> &'static str {
        match self {
            Check::NumericFileCompare { .. } => "numeric_file_compare",
            Check::FileSet { .. } => "file_set",
            Check::TextGolden { .. } => "text_golden",
            Check::Judge { .. } => "judge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub environment: Environment,
    pub checks: Vec<Check>,
    pub k: u32,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Directory that relative paths resolve against; set by [`Scenario::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl Scenario {
    pub fn from_json(raw: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let mut s: Scenario =
            serde_json::from_str(raw).map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        s.base_dir = base_dir.to_path_buf();
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let raw = fs::read_to_string(path).map_err(|e| ScenarioError::Read {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::from_json(&raw, &base)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: &str| Err(ScenarioError::Invalid(m.to_string()));
        if self.id.is_empty() || self.id.contains(['/', '\\']) || self.id.starts_with('.') {
            return bad("id must be a non-empty plain name");
        }
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.checks.is_empty() {
            return bad("at least one check is required");
        }
        if self.environment.subject_command.is_empty() {
            return bad("subject_command must not be empty");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        for c in &self.checks {
            match c {
                Check::NumericFileCompare {
                    abs_tol, rel_tol, ..
                } if !(*abs_tol >= 0.0 && *rel_tol >= 0.0) => {
                    return bad("tolerances must be non-negative");
                }
                Check::Judge {
                    rubric,
                    rubric_file,
                    ..
                } if rubric.is_some() == rubric_file.is_some() => {
                    return bad("a judge check needs exactly one of rubric or rubric_file");
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check could not be evaluated (unreadable reference, judge transport).
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub kind: String,
    pub status: CheckStatus,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diffs: Vec<Diff>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolVersion {
    pub name: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub run: u32,
    pub argv: Vec<String>,
    pub started_at: String,
    pub ended_at: String,
    pub exit_status: Option<i32>,
    pub timed_out: bool,
    pub stdout: String,
    pub stderr: String,
    pub tool_versions: Vec<ToolVersion>,
    pub staged_inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Passed,
    Failed,
    /// The repetition is void; it counts neither as a pass nor as a check failure.
    InfrastructureError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run: u32,
    pub status: RunStatus,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infrastructure_error: Option<String>,
    pub checks: Vec<CheckVerdict>,
    pub trace_file: String,
    pub trace: Option<RunTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario_id: String,
    pub k: u32,
    pub alpha: f64,
    pub passes: u32,
    pub failures: u32,
    pub infrastructure_failures: u32,
    pub pass_hat_k: bool,
    /// `alpha^(1/k)` when every run passed, otherwise absent.
    pub lower_bound: Option<f64>,
    pub runs: Vec<RunRecord>,
}

impl EvalReport {
    fn aggregate(scenario: &Scenario, k: u32, runs: Vec<RunRecord>) -> EvalReport {
        let count = |s: RunStatus| runs.iter().filter(|r| r.status == s).count() as u32;
        let passes = count(RunStatus::Passed);
        let pass_hat_k = passes == k;
        EvalReport {
            scenario_id: scenario.id.clone(),
            k,
            alpha: scenario.alpha,
            passes,
            failures: count(RunStatus::Failed),
            infrastructure_failures: count(RunStatus::InfrastructureError),
            pass_hat_k,
            lower_bound: if pass_hat_k {
                pass_lower_bound(k, scenario.alpha).ok()
            } else {
                None
            },
            runs,
        }
    }
}

pub struct Runner<'a> {
    pub out_root: PathBuf,
    pub judges: &'a JudgeRegistry,
    pub sink: Option<&'a dyn TraceSink>,
    pub parallel: bool,
}

impl<'a> Runner<'a> {
    pub fn new(out_root: impl Into<PathBuf>, judges: &'a JudgeRegistry) -> Self {
        Runner {
            out_root: out_root.into(),
            judges,
            sink: None,
            parallel: false,
        }
    }

    pub fn scenario_dir(&self, s: &Scenario) -> PathBuf {
        self.out_root.join(&s.id)
    }

    /// Runs `k` repetitions (the scenario's own `k` unless overridden) and
    /// writes `report.json`.
    pub fn run(&self, s: &Scenario, k_override: Option<u32>) -> Result<EvalReport, ScenarioError> {
        let k = k_override.unwrap_or(s.k);
        if k == 0 {
            return Err(ScenarioError::Invalid("k must be at least 1".into()));
        }
        let dir = self.scenario_dir(s);
        fs::create_dir_all(&dir).map_err(|source| ScenarioError::Io {
            context: format!("create {}", dir.display()),
            source,
        })?;
        let runs: Vec<RunRecord> = if self.parallel {
            std::thread::scope(|scope| {
                let handles: Vec<_> = (1..=k)
                    .map(|i| scope.spawn(move || self.run_once(s, i)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("run thread panicked"))
                    .collect()
            })
        } else {
            (1..=k).map(|i| self.run_once(s, i)).collect()
        };
        let report = EvalReport::aggregate(s, k, runs);
        let path = dir.join("report.json");
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|source| ScenarioError::Io {
            context: format!("write {}", path.display()),
            source,
        })?;
        Ok(report)
    }

    fn run_once(&self, s: &Scenario, run: u32) -> RunRecord {
        let run_dir = self.scenario_dir(s).join(format!("run_{run}"));
        let trace_path = run_dir.join("trace.ndjson");
        let trace_file = format!("run_{run}/trace.ndjson");
        let infra = |message: String, trace: Option<RunTrace>| RunRecord {
            run,
            status: RunStatus::InfrastructureError,
            pass: false,
            infrastructure_error: Some(message),
            checks: Vec::new(),
            trace_file: trace_file.clone(),
            trace,
        };

        if run_dir.exists() {
            if let Err(e) = fs::remove_dir_all(&run_dir) {
                return infra(format!("cannot clear {}: {e}", run_dir.display()), None);
            }
        }
        let workdir = run_dir.join("work");
        let mut writer = match fs::create_dir_all(&workdir)
            .and_then(|_| TraceWriter::create(&trace_path, self.sink))
        {
            Ok(w) => w,
            Err(e) => return infra(format!("cannot create run directory: {e}"), None),
        };
        let mut emit = |ev: TraceEvent| {
            // A trace that cannot be written is reported by the final check below.
            let _ = writer.emit(&ev);
        };
        let started_at = trace::now_rfc3339();
        emit(TraceEvent::RunStart {
            scenario: s.id.clone(),
            run,
            timestamp: started_at.clone(),
        });

        let staged = match stage(s, &workdir) {
            Ok(staged) => staged,
            Err(message) => {
                emit(TraceEvent::InfrastructureError {
                    message: message.clone(),
                });
                emit(TraceEvent::RunEnd {
                    status: "infrastructure_error".into(),
                    timestamp: trace::now_rfc3339(),
                });
                return infra(message, None);
            }
        };
        for f in &staged {
            emit(TraceEvent::StagedInput { file: f.clone() });
        }

        let env = &s.environment;
        let tool_versions: Vec<ToolVersion> = env
            .record_versions
            .iter()
            .map(|probe| ToolVersion {
                name: probe.name.clone(),
                output: probe_version(&probe.argv, &workdir, &env.env),
            })
            .collect();
        for v in &tool_versions {
            emit(TraceEvent::ToolVersion {
                name: v.name.clone(),
                output: v.output.clone(),
            });
        }

        let argv: Vec<String> = env
            .subject_command
            .iter()
            .map(|a| a.replace("{workdir}", &workdir.to_string_lossy()))
            .collect();
        emit(TraceEvent::Command {
            argv: argv.clone(),
            timestamp: trace::now_rfc3339(),
        });
        let executed = execute(
            &argv,
            &workdir,
            &run_dir,
            &env.env,
            Duration::from_secs(env.timeout_secs),
        );
        let (exit_status, timed_out, stdout, stderr) = match executed {
            Ok(x) => x,
            Err(message) => {
                emit(TraceEvent::InfrastructureError {
                    message: message.clone(),
                });
                emit(TraceEvent::RunEnd {
                    status: "infrastructure_error".into(),
                    timestamp: trace::now_rfc3339(),
                });
                return infra(message, None);
            }
        };
        let ended_at = trace::now_rfc3339();
        emit(TraceEvent::Exit {
            status: exit_status,
            timestamp: ended_at.clone(),
        });
        emit(TraceEvent::Stdout {
            text: stdout.clone(),
        });
        emit(TraceEvent::Stderr {
            text: stderr.clone(),
        });

        let artifacts: Vec<FileDigest> = match trace::digest_tree(&workdir) {
            Ok(all) => all.into_iter().filter(|f| !staged.contains(f)).collect(),
            Err(e) => return infra(format!("cannot scan working directory: {e}"), None),
        };
        for f in &artifacts {
            emit(TraceEvent::Artifact { file: f.clone() });
        }

        let trace = RunTrace {
            run,
            argv,
            started_at,
            ended_at,
            exit_status,
            timed_out,
            stdout,
            stderr,
            tool_versions,
            staged_inputs: staged,
            artifacts,
        };

        let mut verdicts = Vec::with_capacity(s.checks.len() + 1);
        if timed_out {
            verdicts.push(CheckVerdict {
                kind: "timeout".into(),
                status: CheckStatus::Fail,
                detail: format!("subject exceeded {} s", env.timeout_secs),
                diffs: Vec::new(),
            });
        }
        for check in &s.checks {
            verdicts.push(self.apply(s, check, &workdir));
        }
        for (index, v) in verdicts.iter().enumerate() {
            emit(TraceEvent::Check {
                index,
                kind: v.kind.clone(),
                status: serde_json::to_value(v.status)
                    .ok()
                    .and_then(|x| x.as_str().map(str::to_string))
                    .unwrap_or_default(),
                detail: v.detail.clone(),
            });
        }

        let status = if verdicts.iter().any(|v| v.status == CheckStatus::Error) {
            RunStatus::InfrastructureError
        } else if verdicts.iter().all(|v| v.status == CheckStatus::Pass) {
            RunStatus::Passed
        } else {
            RunStatus::Failed
        };
        let status_text = match status {
            RunStatus::Passed => "passed",
            RunStatus::Failed => "failed",
            RunStatus::InfrastructureError => "infrastructure_error",
        };
        emit(TraceEvent::RunEnd {
            status: status_text.into(),
            timestamp: trace::now_rfc3339(),
        });
        drop(writer);

        RunRecord {
            run,
            status,
            pass: status == RunStatus::Passed,
            infrastructure_error: (status == RunStatus::InfrastructureError).then(|| {
                verdicts
                    .iter()
                    .filter(|v| v.status == CheckStatus::Error)
                    .map(|v| format!("{}: {}", v.kind, v.detail))
                    .collect::<Vec<_>>()
                    .join("; ")
            }),
            checks: verdicts,
            trace_file,
            trace: Some(trace),
        }
    }

    fn apply(&self, s: &Scenario, check: &Check, workdir: &Path) -> CheckVerdict {
        let verdict = |status, detail: String, diffs| CheckVerdict {
            kind: check.kind().into(),
            status,
            detail,
            diffs,
        };
        match check {
            Check::NumericFileCompare {
                actual,
                reference,
                abs_tol,
                rel_tol,
            } => {
                let reference_path = s.resolve(reference);
                if let Err(e) = fs::metadata(&reference_path) {
                    return verdict(
                        CheckStatus::Error,
                        format!("reference {}: {e}", reference_path.display()),
                        Vec::new(),
                    );
                }
                match checks::numeric_file_compare(
                    &workdir.join(actual),
                    &reference_path,
                    *abs_tol,
                    *rel_tol,
                ) {
                    Ok(cmp) if cmp.pass => {
                        verdict(CheckStatus::Pass, format!("{actual} matches"), Vec::new())
                    }
                    Ok(cmp) => verdict(
                        CheckStatus::Fail,
                        format!("{actual}: {} values out of tolerance", cmp.diffs.len()),
                        cmp.diffs,
                    ),
                    // A missing or malformed actual file is the subject's failure.
                    Err(e) => verdict(CheckStatus::Fail, e.to_string(), Vec::new()),
                }
            }
            Check::FileSet {
                dir,
                expected,
                exact,
            } => {
                let (ok, detail) = checks::file_set(&workdir.join(dir), expected, *exact);
                verdict(
                    if ok {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    },
                    detail,
                    Vec::new(),
                )
            }
            Check::TextGolden { actual, reference } => {
                match checks::text_golden(&workdir.join(actual), &s.resolve(reference)) {
                    Ok((true, d)) => verdict(CheckStatus::Pass, d, Vec::new()),
                    Ok((false, d)) => verdict(CheckStatus::Fail, d, Vec::new()),
                    Err(e) => verdict(CheckStatus::Error, e.to_string(), Vec::new()),
                }
            }
            Check::Judge {
                rubric,
                rubric_file,
                adapter,
                artifacts,
            } => {
                let rubric_text = match (rubric, rubric_file) {
                    (Some(r), _) => r.clone(),
                    (None, Some(f)) => match fs::read_to_string(s.resolve(f)) {
                        Ok(t) => t,
                        Err(e) => {
                            return verdict(
                                CheckStatus::Error,
                                format!("rubric {f}: {e}"),
                                Vec::new(),
                            )
                        }
                    },
                    (None, None) => unreachable!("validated"),
                };
                let adapter_impl = match self.judges.get(adapter) {
                    Ok(a) => a,
                    Err(e) => return verdict(CheckStatus::Error, e.to_string(), Vec::new()),
                };
                let paths = if artifacts.is_empty() {
                    judge::rubric_artifacts(&rubric_text).unwrap_or_default()
                } else {
                    artifacts.clone()
                };
                let outcome = judge::judge_check(
                    judge::collect_artifacts(workdir, &paths),
                    &rubric_text,
                    adapter_impl,
                );
                match outcome.verdict {
                    Verdict::Pass => verdict(CheckStatus::Pass, outcome.rationale, Vec::new()),
                    Verdict::Fail => verdict(CheckStatus::Fail, outcome.rationale, Vec::new()),
                    Verdict::Error(reason) => verdict(CheckStatus::Error, reason, Vec::new()),
                }
            }
        }
    }
}

fn copy_tree(from: &Path, to: &Path) -> io::Result<()> {
    for file in trace::list_files(from)? {
        let dest = to.join(file.strip_prefix(from).expect("listed under root"));
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::copy(&file, &dest)?;
    }
    Ok(())
}

fn stage(s: &Scenario, workdir: &Path) -> Result<Vec<FileDigest>, String> {
    let env = &s.environment;
    if let Some(template) = &env.workdir_template {
        let src = s.resolve(template);
        if !src.is_dir() {
            return Err(format!(
                "workdir template {} is not a directory",
                src.display()
            ));
        }
        copy_tree(&src, workdir).map_err(|e| format!("staging template: {e}"))?;
    }
    for input in &env.inputs {
        let (from, to) = input.paths();
        let src = s.resolve(from);
        let dest = workdir.join(to);
        if let Some(parent) = dest.parent() {
            fs::create_dir_all(parent).map_err(|e| format!("staging {to}: {e}"))?;
        }
        fs::copy(&src, &dest).map_err(|e| format!("staging {}: {e}", src.display()))?;
    }
    trace::digest_tree(workdir).map_err(|e| format!("digesting staged inputs: {e}"))
}

fn expand_env(value: &str) -> String {
    // `${NAME}` from the harness environment; unknown names expand to empty.
    let re = regex::Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex");
    re.replace_all(value, |caps: &regex::Captures| {
        std::env::var(&caps[1]).unwrap_or_default()
    })
    .into_owned()
}

fn command(argv: &[String], cwd: &Path, env: &BTreeMap<String, String>) -> Command {
    let mut cmd = Command::new(expand_env(&argv[0]));
    cmd.args(argv[1..].iter().map(|a| expand_env(a)))
        .current_dir(cwd)
        .stdin(Stdio::null());
    for (k, v) in env {
        cmd.env(k, expand_env(v));
    }
    cmd
}

fn probe_version(argv: &[String], cwd: &Path, env: &BTreeMap<String, String>) -> String {
    if argv.is_empty() {
        return String::new();
    }
    match command(argv, cwd, env).output() {
        Ok(out) => String::from_utf8_lossy(&out.stdout).trim().to_string(),
        Err(e) => format!("unavailable: {e}"),
    }
}

type Execution = (Option<i32>, bool, String, String);

fn execute(
    argv: &[String],
    workdir: &Path,
    run_dir: &Path,
    env: &BTreeMap<String, String>,
    timeout: Duration,
) -> Result<Execution, String> {
    let stdout_path = run_dir.join("stdout.txt");
    let stderr_path = run_dir.join("stderr.txt");
    let stdout = fs::File::create(&stdout_path).map_err(|e| e.to_string())?;
    let stderr = fs::File::create(&stderr_path).map_err(|e| e.to_string())?;
    let mut child = command(argv, workdir, env)
        .stdout(stdout)
        .stderr(stderr)
        .spawn()
        .map_err(|e| format!("cannot start `{}`: {e}", argv[0]))?;
    let deadline = Instant::now() + timeout;
    let mut timed_out = false;
    let status = loop {
        match child.try_wait().map_err(|e| e.to_string())? {
            Some(status) => break status,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                timed_out = true;
                break child.wait().map_err(|e| e.to_string())?;
            }
            None => std::thread::sleep(Duration::from_millis(10)),
        }
    };
    let read = |p: &Path| fs::read(p).map(|b| String::from_utf8_lossy(&b).into_owned());
    Ok((
        status.code(),
        timed_out,
        read(&stdout_path).map_err(|e| e.to_string())?,
        read(&stderr_path).map_err(|e| e.to_string())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, text: &str) {
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }

    fn copy_scenario(base: &Path, k: u32, command: &str) -> Scenario {
        write(&base.join("references/expected.txt"), "hello golden\n");
        write(&base.join("inputs/source.txt"), "hello golden\n");
        let raw = serde_json::json!({
            "id": "copy",
            "description": "subject copies its input verbatim",
            "k": k,
            "environment": {
                "inputs": ["inputs/source.txt"],
                "subject_command": ["sh", "-c", command]
            },
            "checks": [
                {"kind": "text_golden", "actual": "out.txt", "reference": "references/expected.txt"}
            ]
        });
        Scenario::from_json(&raw.to_string(), base).unwrap()
    }

    #[test]
    fn verbatim_copy_passes_all_runs() {
        let dir = tempfile::tempdir().unwrap();
        let s = copy_scenario(dir.path(), 3, "cp inputs/source.txt out.txt");
        let judges = JudgeRegistry::default();
        let report = Runner::new(dir.path().join("runs"), &judges)
            .run(&s, None)
            .unwrap();
        assert_eq!(report.passes, 3);
        assert!(report.pass_hat_k);
        assert!((report.lower_bound.unwrap() - 0.05f64.powf(1.0 / 3.0)).abs() < 1e-15);
        let run = &report.runs[0];
        let trace = run.trace.as_ref().unwrap();
        assert_eq!(trace.exit_status, Some(0));
        assert_eq!(trace.staged_inputs.len(), 1);
        assert_eq!(trace.artifacts.len(), 1);
        assert_eq!(trace.artifacts[0].path, "out.txt");
        assert_eq!(trace.artifacts[0].checksum, trace.staged_inputs[0].checksum);
        let ndjson = fs::read_to_string(dir.path().join("runs/copy/run_1/trace.ndjson")).unwrap();
        let events = trace::read_trace(&ndjson).unwrap();
        assert!(matches!(events.first(), Some(TraceEvent::RunStart { .. })));
        assert!(matches!(events.last(), Some(TraceEvent::RunEnd { .. })));
        assert!(dir.path().join("runs/copy/report.json").exists());
    }

    #[test]
    fn wrong_output_fails_without_infrastructure_error() {
        let dir = tempfile::tempdir().unwrap();
        let s = copy_scenario(dir.path(), 2, "echo nope > out.txt; exit 1");
        let judges = JudgeRegistry::default();
        let report = Runner::new(dir.path().join("runs"), &judges)
            .run(&s, None)
            .unwrap();
        assert_eq!(report.passes, 0);
        assert_eq!(report.failures, 2);
        assert_eq!(report.infrastructure_failures, 0);
        assert!(!report.pass_hat_k);
        assert_eq!(report.lower_bound, None);
        assert_eq!(report.runs[0].trace.as_ref().unwrap().exit_status, Some(1));
    }

    #[test]
    fn staging_failure_is_infrastructure() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = copy_scenario(dir.path(), 2, "true");
        s.environment
            .inputs
            .push(StagedInput::Same("inputs/absent.txt".into()));
        let judges = JudgeRegistry::default();
        let report = Runner::new(dir.path().join("runs"), &judges)
            .run(&s, Some(1))
            .unwrap();
        assert_eq!(report.k, 1);
        assert_eq!(report.passes, 0);
        assert_eq!(report.failures, 0);
        assert_eq!(report.infrastructure_failures, 1);
        assert!(!report.pass_hat_k);
    }

    #[test]
    fn runs_are_isolated() {
        let dir = tempfile::tempdir().unwrap();
        // Fails if a previous run's output leaks into this working directory.
        let s = copy_scenario(
            dir.path(),
            3,
            "test ! -e marker && touch marker && cp inputs/source.txt out.txt",
        );
        let judges = JudgeRegistry::default();
        let runner = Runner {
            parallel: true,
            ..Runner::new(dir.path().join("runs"), &judges)
        };
        let report = runner.run(&s, None).unwrap();
        assert_eq!(report.passes, 3);
        fs::remove_dir_all(dir.path().join("runs/copy/run_1")).unwrap();
        let again = runner.run(&s, Some(2)).unwrap();
        assert_eq!(again.passes, 2);
    }

    #[test]
    fn numeric_and_judge_checks() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path();
        write(&base.join("references/values.json"), "{\"x\": 100.0}\n");
        let raw = serde_json::json!({
            "id": "numeric",
            "k": 1,
            "environment": {
                "subject_command": ["sh", "-c", "echo '{\"x\": 100.002}' > values.json; echo 'scale FX=1.04' > script.sh"]
            },
            "checks": [
                {"kind": "numeric_file_compare", "actual": "values.json", "reference": "references/values.json", "rel_tol": 1e-5},
                {"kind": "judge", "rubric": "[factor] script.sh ~ FX=1\\.04", "adapter": "stub"}
            ]
        });
        let s = Scenario::from_json(&raw.to_string(), base).unwrap();
        let judges = JudgeRegistry::default();
        let report = Runner::new(base.join("runs"), &judges)
            .run(&s, None)
            .unwrap();
        let checks = &report.runs[0].checks;
        assert_eq!(checks[0].status, CheckStatus::Fail);
        assert_eq!(checks[0].diffs[0].path, "$.x");
        assert_eq!(checks[1].status, CheckStatus::Pass);
        assert_eq!(report.runs[0].status, RunStatus::Failed);
    }

    #[test]
    fn invalid_scenarios_rejected() {
        let base = Path::new(".");
        let ok = serde_json::json!({
            "id": "x", "k": 1,
            "environment": {"subject_command": ["true"]},
            "checks": [{"kind": "file_set", "dir": ".", "expected": []}]
        });
        assert!(Scenario::from_json(&ok.to_string(), base).is_ok());
        let mut zero_k = ok.clone();
        zero_k["k"] = 0.into();
        assert!(Scenario::from_json(&zero_k.to_string(), base).is_err());
        let mut no_checks = ok.clone();
        no_checks["checks"] = serde_json::json!([]);
        assert!(Scenario::from_json(&no_checks.to_string(), base).is_err());
        let mut neg_tol = ok.clone();
        neg_tol["checks"] = serde_json::json!([{"kind": "numeric_file_compare", "actual": "a", "reference": "b", "abs_tol": -1.0}]);
        assert!(Scenario::from_json(&neg_tol.to_string(), base).is_err());
    }
}
