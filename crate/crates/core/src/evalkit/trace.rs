//! Run provenance: file digests and newline-delimited JSON trace files.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// `sha256:<hex>` of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(7 + 64);
    s.push_str("sha256:");
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the directory that was scanned, `/`-separated.
    pub path: String,
    pub size: u64,
    pub checksum: String,
}

impl FileDigest {
    pub fn of(path: &Path, display: String) -> io::Result<FileDigest> {
        let bytes = fs::read(path)?;
        Ok(FileDigest {
            path: display,
            size: bytes.len() as u64,
            checksum: sha256_hex(&bytes),
        })
    }
}

/// Regular files under `root`, sorted by relative path.
pub fn list_files(root: &Path) -> io::Result<Vec<PathBuf>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let ty = entry.file_type()?;
            if ty.is_dir() {
                walk(&entry.path(), out)?;
            } else if ty.is_file() {
                out.push(entry.path());
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if root.exists() {
        walk(root, &mut out)?;
    }
    out.sort();
    Ok(out)
}

pub fn relative_display(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Digests of every file under `root`.
pub fn digest_tree(root: &Path) -> io::Result<Vec<FileDigest>> {
    list_files(root)?
        .into_iter()
        .map(|p| FileDigest::of(&p, relative_display(root, &p)))
        .collect()
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// One line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    RunStart {
        scenario: String,
        run: u32,
        timestamp: String,
    },
    ToolVersion {
        name: String,
        output: String,
    },
    StagedInput {
        #[serde(flatten)]
        file: FileDigest,
    },
    Command {
        argv: Vec<String>,
        timestamp: String,
    },
    Exit {
        status: Option<i32>,
        timestamp: String,
    },
    Stdout {
        text: String,
    },
    Stderr {
        text: String,
    },
    Artifact {
        #[serde(flatten)]
        file: FileDigest,
    },
    Check {
        index: usize,
        kind: String,
        status: String,
        detail: String,
    },
    InfrastructureError {
        message: String,
    },
    RunEnd {
        status: String,
        timestamp: String,
    },
    /// Used by CLI sidecar traces.
    Invocation {
        argv: Vec<String>,
        timestamp: String,
    },
    Input {
        #[serde(flatten)]
        file: FileDigest,
    },
    Output {
        #[serde(flatten)]
        file: FileDigest,
    },
    Finish {
        exit_code: i32,
        timestamp: String,
    },
}

/// Forwarding hook for an external observability platform.
pub trait TraceSink: Send + Sync {
    fn forward(&self, event: &TraceEvent);
}

/// Appends events to an NDJSON file, optionally forwarding each one.
pub struct TraceWriter<'a> {
    file: fs::File,
    sink: Option<&'a dyn TraceSink>,
}

impl<'a> TraceWriter<'a> {
    pub fn create(path: &Path, sink: Option<&'a dyn TraceSink>) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(TraceWriter {
            file: fs::File::create(path)?,
            sink,
        })
    }

    pub fn emit(&mut self, event: &TraceEvent) -> io::Result<()> {
        let line = serde_json::to_string(event).map_err(io::Error::other)?;
        writeln!(self.file, "{line}")?;
        if let Some(sink) = self.sink {
            sink.forward(event);
        }
        Ok(())
    }
}

/// Parses an NDJSON trace back into events.
pub fn read_trace(raw: &str) -> Result<Vec<TraceEvent>, serde_json::Error> {
    raw.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
