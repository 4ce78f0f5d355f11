//! Deterministic acceptance checks applied to a run's working directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("{path} is not valid JSON: {message}")]
    Parse { path: String, message: String },
}

/// A numeric leaf or structural difference between actual and reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diff {
    pub path: String,
    pub actual: Option<Value>,
    pub reference: Option<Value>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericComparison {
    pub pass: bool,
    pub diffs: Vec<Diff>,
}

fn read_json(path: &Path) -> Result<Value, CheckError> {
    let raw = fs::read_to_string(path).map_err(|e| CheckError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&raw).map_err(|e| CheckError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Compares two JSON documents: identical structure, every numeric leaf
/// within `max(abs_tol, rel_tol * |reference|)`, all other leaves equal.
pub fn compare_json_values(
    actual: &Value,
    reference: &Value,
    abs_tol: f64,
    rel_tol: f64,
) -> NumericComparison {
    let mut diffs = Vec::new();
    walk(actual, reference, "$", abs_tol, rel_tol, &mut diffs);
    NumericComparison {
        pass: diffs.is_empty(),
        diffs,
    }
}

/// [`compare_json_values`] over two files. Unreadable or non-JSON files are errors.
pub fn numeric_file_compare(
    actual: &Path,
    reference: &Path,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<NumericComparison, CheckError> {
    let reference = read_json(reference)?;
    let actual = read_json(actual)?;
    Ok(compare_json_values(&actual, &reference, abs_tol, rel_tol))
}

fn walk(a: &Value, r: &Value, path: &str, abs_tol: f64, rel_tol: f64, out: &mut Vec<Diff>) {
    let diff = |message: String| Diff {
        path: path.to_string(),
        actual: Some(a.clone()),
        reference: Some(r.clone()),
        message,
    };
    match (a, r) {
        (Value::Object(am), Value::Object(rm)) => {
            let keys: BTreeSet<&String> = am.keys().chain(rm.keys()).collect();
            for key in keys {
                let child = format!("{path}.{key}");
                match (am.get(key), rm.get(key)) {
                    (Some(av), Some(rv)) => walk(av, rv, &child, abs_tol, rel_tol, out),
                    (None, Some(rv)) => out.push(Diff {
                        path: child,
                        actual: None,
                        reference: Some(rv.clone()),
                        message: format!("missing key `{key}`"),
                    }),
                    (Some(av), None) => out.push(Diff {
                        path: child,
                        actual: Some(av.clone()),
                        reference: None,
                        message: format!("unexpected key `{key}`"),
                    }),
                    (None, None) => unreachable!(),
                }
            }
        }
        (Value::Array(aa), Value::Array(ra)) => {
            if aa.len() != ra.len() {
                out.push(Diff {
                    path: path.to_string(),
                    actual: None,
                    reference: None,
                    message: format!("array length {} vs reference {}", aa.len(), ra.len()),
                });
                return;
            }
            for (i, (av, rv)) in aa.iter().zip(ra).enumerate() {
                walk(av, rv, &format!("{path}[{i}]"), abs_tol, rel_tol, out);
            }
        }
        (Value::Number(an), Value::Number(rn)) => {
            let (av, rv) = (
                an.as_f64().unwrap_or(f64::NAN),
                rn.as_f64().unwrap_or(f64::NAN),
            );
            let allowed = abs_tol.max(rel_tol * rv.abs());
            let err = (av - rv).abs();
            if err.is_nan() || err > allowed {
                out.push(diff(format!("|{av} - {rv}| = {err:e} exceeds {allowed:e}")));
            }
        }
        _ if a == r => {}
        _ => out.push(diff("values differ".to_string())),
    }
}

/// Checks the regular files directly in `dir`. Sidecar traces
/// (`*.trace.ndjson`) are ignored. With `exact`, no other files may exist.
pub fn file_set(dir: &Path, expected: &[String], exact: bool) -> (bool, String) {
    let present: BTreeSet<String> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(Result::ok)
            .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| !n.ends_with(".trace.ndjson"))
            .collect(),
        Err(e) => return (false, format!("cannot list {}: {e}", dir.display())),
    };
    let expected: BTreeSet<String> = expected.iter().cloned().collect();
    let missing: Vec<_> = expected.difference(&present).cloned().collect();
    let extra: Vec<_> = present.difference(&expected).cloned().collect();
    let ok = missing.is_empty() && (!exact || extra.is_empty());
    let detail = if ok {
        format!("{} expected files present", expected.len())
    } else {
        format!("missing {missing:?}, unexpected {extra:?}")
    };
    (ok, detail)
}

/// Byte-exact comparison against a reference file.
pub fn text_golden(actual: &Path, reference: &Path) -> Result<(bool, String), CheckError> {
    let reference_bytes = fs::read(reference).map_err(|e| CheckError::Read {
        path: reference.display().to_string(),
        message: e.to_string(),
    })?;
    let actual_bytes = match fs::read(actual) {
        Ok(b) => b,
        Err(e) => return Ok((false, format!("cannot read {}: {e}", actual.display()))),
    };
    if actual_bytes == reference_bytes {
        return Ok((true, "identical".into()));
    }
    let at = actual_bytes
        .iter()
        .zip(&reference_bytes)
        .position(|(a, b)| a != b)
        .unwrap_or(actual_bytes.len().min(reference_bytes.len()));
    Ok((
        false,
        format!(
            "first difference at byte {at} (actual {} bytes, reference {} bytes)",
            actual_bytes.len(),
            reference_bytes.len()
        ),
    ))
}
