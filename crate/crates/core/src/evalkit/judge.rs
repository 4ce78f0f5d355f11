//! Rubric-based judging behind a pluggable adapter.
//!
//! Two adapters ship: a local rule-based stub (no network) and a generic HTTP
//! adapter that posts `{rubric, artifacts}` and expects `{verdict, rationale}`.
//! Transport problems and unparseable verdicts are `ERROR`, never `FAIL`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest artifact excerpt sent to a judge, in bytes.
pub const EXCERPT_LIMIT: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactExcerpt {
    pub path: String,
    pub content: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeRequest {
    pub rubric: String,
    pub artifacts: Vec<ArtifactExcerpt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeResponse {
    pub verdict: String,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JudgeError {
    #[error("judge transport failure: {0}")]
    Transport(String),
    #[error("rubric not usable by this adapter: {0}")]
    Rubric(String),
    #[error("unknown judge adapter `{0}`")]
    UnknownAdapter(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
    Error(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("PASS"),
            Verdict::Fail => f.write_str("FAIL"),
            Verdict::Error(reason) => write!(f, "ERROR({reason})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeOutcome {
    pub verdict: Verdict,
    pub rationale: String,
}

pub trait JudgeAdapter: Send + Sync {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError>;
}

/// Strict verdict token: exactly `PASS` or `FAIL` after trimming.
pub fn parse_verdict(token: &str) -> Option<Verdict> {
    match token.trim() {
        "PASS" => Some(Verdict::Pass),
        "FAIL" => Some(Verdict::Fail),
        _ => None,
    }
}

/// Reads the named artifacts (relative to `root`) into excerpts. Missing
/// files become empty excerpts marked in the content.
pub fn collect_artifacts(root: &Path, paths: &[String]) -> Vec<ArtifactExcerpt> {
    paths
        .iter()
        .map(|p| match fs::read(root.join(p)) {
            Ok(bytes) => {
                let truncated = bytes.len() > EXCERPT_LIMIT;
                let mut end = bytes.len().min(EXCERPT_LIMIT);
                let text = loop {
                    match std::str::from_utf8(&bytes[..end]) {
                        Ok(s) => break s.to_string(),
                        Err(e) if e.valid_up_to() > 0 && end > e.valid_up_to() => {
                            end = e.valid_up_to()
                        }
                        Err(_) => break String::from_utf8_lossy(&bytes[..end]).into_owned(),
                    }
                };
                ArtifactExcerpt {
                    path: p.clone(),
                    content: text,
                    truncated,
                }
            }
            Err(_) => ArtifactExcerpt {
                path: p.clone(),
                content: String::new(),
                truncated: false,
            },
        })
        .collect()
}

/// Dispatches the request and maps the response to a verdict.
pub fn judge_check(
    artifacts: Vec<ArtifactExcerpt>,
    rubric: &str,
    adapter: &dyn JudgeAdapter,
) -> JudgeOutcome {
    let request = JudgeRequest {
        rubric: rubric.to_string(),
        artifacts,
    };
    match adapter.judge(&request) {
        Err(e) => JudgeOutcome {
            verdict: Verdict::Error(e.to_string()),
            rationale: String::new(),
        },
        Ok(resp) => match parse_verdict(&resp.verdict) {
            Some(verdict) => JudgeOutcome {
                verdict,
                rationale: resp.rationale,
            },
            None => JudgeOutcome {
                verdict: Verdict::Error(format!("unparseable verdict `{}`", resp.verdict)),
                rationale: resp.rationale,
            },
        },
    }
}

#[derive(Debug, Clone)]
struct StubRule {
    name: String,
    artifact: String,
    negate: bool,
    pattern: Regex,
}

/// Rule-based local judge.
///
/// Rubric lines of the form `[name] <artifact> ~ <regex>` require a match in
/// that artifact; `!~` forbids one. Other lines are free text and ignored, so
/// the same rubric can also be sent to a model-backed judge.
#[derive(Debug, Default, Clone, Copy)]
pub struct StubJudge;

fn parse_rules(rubric: &str) -> Result<Vec<StubRule>, JudgeError> {
    let shape = Regex::new(r"^\[([^\]]+)\]\s+(\S+)\s+(!~|~)\s+(.+)$").expect("static regex");
    let mut rules = Vec::new();
    for line in rubric.lines().map(str::trim) {
        let Some(caps) = shape.captures(line) else {
            continue;
        };
        let pattern = Regex::new(&caps[4])
            .map_err(|e| JudgeError::Rubric(format!("rule [{}]: {e}", &caps[1])))?;
        rules.push(StubRule {
            name: caps[1].to_string(),
            artifact: caps[2].to_string(),
            negate: &caps[3] == "!~",
            pattern,
        });
    }
    if rules.is_empty() {
        return Err(JudgeError::Rubric(
            "no `[name] artifact ~ regex` rules found".into(),
        ));
    }
    Ok(rules)
}

/// Artifact paths a stub rubric refers to, in first-mention order.
pub fn rubric_artifacts(rubric: &str) -> Result<Vec<String>, JudgeError> {
    let mut out: Vec<String> = Vec::new();
    for rule in parse_rules(rubric)? {
        if !out.contains(&rule.artifact) {
            out.push(rule.artifact);
        }
    }
    Ok(out)
}

impl JudgeAdapter for StubJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError> {
        let rules = parse_rules(&request.rubric)?;
        let by_path: BTreeMap<&str, &ArtifactExcerpt> = request
            .artifacts
            .iter()
            .map(|a| (a.path.as_str(), a))
            .collect();
        let mut failed = Vec::new();
        for rule in &rules {
            let ok = match by_path.get(rule.artifact.as_str()) {
                None => false,
                Some(a) => rule.pattern.is_match(&a.content) != rule.negate,
            };
            if !ok {
                let how = if rule.negate {
                    "forbidden pattern present"
                } else {
                    "required pattern absent"
                };
                failed.push(format!("[{}] {}: {how}", rule.name, rule.artifact));
            }
        }
        Ok(if failed.is_empty() {
            JudgeResponse {
                verdict: "PASS".into(),
                rationale: format!("all {} rules satisfied", rules.len()),
            }
        } else {
            JudgeResponse {
                verdict: "FAIL".into(),
                rationale: failed.join("; "),
            }
        })
    }
}

/// Posts the request as JSON to `url` and reads `{verdict, rationale}`.
#[derive(Debug, Clone)]
pub struct HttpJudge {
    pub url: String,
    pub timeout: Duration,
}

impl HttpJudge {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpJudge {
            url: url.into(),
            timeout,
        }
    }
}

impl JudgeAdapter for HttpJudge {
    fn judge(&self, request: &JudgeRequest) -> Result<JudgeResponse, JudgeError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(self.timeout))
            .build()
            .into();
        let body =
            serde_json::to_string(request).map_err(|e| JudgeError::Transport(e.to_string()))?;
        let mut resp = agent
            .post(&self.url)
            .header("Content-Type", "application/json")
            .send(body.as_str())
            .map_err(|e| JudgeError::Transport(e.to_string()))?;
        resp.body_mut()
            .read_json::<JudgeResponse>()
            .map_err(|e| JudgeError::Transport(format!("bad response body: {e}")))
    }
}

/// Adapter configuration, as found in a judge config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AdapterConfig {
    Stub,
    Http {
        url: String,
        #[serde(default = "default_timeout")]
        timeout_secs: u64,
    },
}

fn default_timeout() -> u64 {
    60
}

/// Adapters selectable by id at runtime. Always contains `stub`.
pub struct JudgeRegistry {
    adapters: BTreeMap<String, Box<dyn JudgeAdapter>>,
}

impl Default for JudgeRegistry {
    fn default() -> Self {
        let mut adapters: BTreeMap<String, Box<dyn JudgeAdapter>> = BTreeMap::new();
        adapters.insert("stub".into(), Box::new(StubJudge));
        JudgeRegistry { adapters }
    }
}

impl JudgeRegistry {
    pub fn register(&mut self, id: impl Into<String>, adapter: Box<dyn JudgeAdapter>) {
        self.adapters.insert(id.into(), adapter);
    }

    pub fn get(&self, id: &str) -> Result<&dyn JudgeAdapter, JudgeError> {
        self.adapters
            .get(id)
            .map(|b| b.as_ref())
            .ok_or_else(|| JudgeError::UnknownAdapter(id.to_string()))
    }

    /// Builds a registry from `{"adapters": {"<id>": {"kind": "http", "url": ...}}}`.
    pub fn from_config_json(raw: &str) -> Result<Self, String> {
        #[derive(Deserialize)]
        struct File {
            adapters: BTreeMap<String, AdapterConfig>,
        }
        let file: File = serde_json::from_str(raw).map_err(|e| e.to_string())?;
        let mut reg = JudgeRegistry::default();
        for (id, cfg) in file.adapters {
            match cfg {
                AdapterConfig::Stub => reg.register(id, Box::new(StubJudge)),
                AdapterConfig::Http { url, timeout_secs } => reg.register(
                    id,
                    Box::new(HttpJudge::new(url, Duration::from_secs(timeout_secs))),
                ),
            }
        }
        Ok(reg)
    }
}
