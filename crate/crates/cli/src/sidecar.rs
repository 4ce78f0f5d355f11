//! Provenance sidecars written next to every output.

use std::path::{Path, PathBuf};

use loadsmith::evalkit::trace::{
    now_rfc3339, relative_display, FileDigest, TraceEvent, TraceWriter,
};

/// Collects inputs and outputs of one invocation and writes them as NDJSON.
pub struct Sidecar {
    path: PathBuf,
    argv: Vec<String>,
    started: String,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Sidecar {
    /// Sidecar of a single output file: `<file>.trace.ndjson`.
    pub fn for_file(output: &Path) -> Self {
        let mut name = output.as_os_str().to_owned();
        name.push(".trace.ndjson");
        Self::at(PathBuf::from(name))
    }

    /// Sidecar of a command that fills a directory: `<dir>/<command>.trace.ndjson`.
    pub fn for_dir(dir: &Path, command: &str) -> Self {
        Self::at(dir.join(format!("{command}.trace.ndjson")))
    }

    fn at(path: PathBuf) -> Self {
        Sidecar {
            path,
            argv: std::env::args().collect(),
            started: now_rfc3339(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn write(self, exit_code: i32) -> std::io::Result<()> {
        let mut w = TraceWriter::create(&self.path, None)?;
        w.emit(&TraceEvent::Invocation {
            argv: self.argv,
            timestamp: self.started,
        })?;
        let digest = |p: &Path| FileDigest::of(p, relative_display(Path::new(""), p));
        for p in &self.inputs {
            w.emit(&TraceEvent::Input { file: digest(p)? })?;
        }
        for p in &self.outputs {
            w.emit(&TraceEvent::Output { file: digest(p)? })?;
        }
        w.emit(&TraceEvent::Finish {
            exit_code,
            timestamp: now_rfc3339(),
        })
    }
}
