//! Read-only catalog of versioned design-practice documents, served as
//! JSON-RPC 2.0 over line-delimited standard streams.
//!
//! Catalog directory layout:
//!
//! ```text
//! catalog.json              {"documents": [{"document_id", "title", "versions": [{"version", "added_at", "checksum"?}]}]}
//! docs/<id>/v<version>.md   content of one version
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::evalkit::trace::sha256_hex;

pub const PARSE_ERROR: i64 = -32700;
pub const INVALID_REQUEST: i64 = -32600;
pub const METHOD_NOT_FOUND: i64 = -32601;
pub const INVALID_PARAMS: i64 = -32602;
pub const DOCUMENT_NOT_FOUND: i64 = -32001;
pub const VERSION_NOT_FOUND: i64 = -32002;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("invalid catalog.json: {0}")]
    Metadata(String),
    #[error("document {document_id}: {message}")]
    Document { document_id: u64, message: String },
    #[error(
        "document {document_id} v{version}: checksum {actual} does not match recorded {recorded}"
    )]
    Checksum {
        document_id: u64,
        version: u32,
        recorded: String,
        actual: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentVersion {
    pub content: String,
    pub checksum: String,
    pub added_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocumentRecord {
    pub document_id: u64,
    pub title: String,
    pub versions: BTreeMap<u32, DocumentVersion>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    documents: Vec<DocumentEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentEntry {
    document_id: u64,
    title: String,
    versions: Vec<VersionEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VersionEntry {
    version: u32,
    added_at: String,
    #[serde(default)]
    checksum: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    documents: BTreeMap<u64, DocumentRecord>,
}

impl Catalog {
    pub fn new(records: Vec<DocumentRecord>) -> Result<Catalog, CatalogError> {
        let mut documents = BTreeMap::new();
        for r in records {
            let fail = |message: &str| CatalogError::Document {
                document_id: r.document_id,
                message: message.to_string(),
            };
            if r.document_id == 0 {
                return Err(fail("document_id must be positive"));
            }
            if r.versions.is_empty() {
                return Err(fail("no versions"));
            }
            if r.versions.contains_key(&0) {
                return Err(fail("version numbers must be positive"));
            }
            if documents.contains_key(&r.document_id) {
                return Err(fail("duplicate document_id"));
            }
            documents.insert(r.document_id, r);
        }
        Ok(Catalog { documents })
    }

    pub fn load(dir: &Path) -> Result<Catalog, CatalogError> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|e| CatalogError::Read {
                path: p.display().to_string(),
                message: e.to_string(),
            })
        };
        let meta: CatalogFile = serde_json::from_str(&read(&dir.join("catalog.json"))?)
            .map_err(|e| CatalogError::Metadata(e.to_string()))?;
        let mut records = Vec::with_capacity(meta.documents.len());
        for doc in meta.documents {
            let mut versions = BTreeMap::new();
            for v in doc.versions {
                let dup = || CatalogError::Document {
                    document_id: doc.document_id,
                    message: format!("version {} listed twice", v.version),
                };
                if versions.contains_key(&v.version) {
                    return Err(dup());
                }
                if chrono::DateTime::parse_from_rfc3339(&v.added_at).is_err() {
                    return Err(CatalogError::Document {
                        document_id: doc.document_id,
                        message: format!("added_at `{}` is not an RFC 3339 timestamp", v.added_at),
                    });
                }
                let path = dir
                    .join("docs")
                    .join(doc.document_id.to_string())
                    .join(format!("v{}.md", v.version));
                let content = read(&path)?;
                let checksum = sha256_hex(content.as_bytes());
                if let Some(recorded) = v.checksum {
                    if recorded != checksum {
                        return Err(CatalogError::Checksum {
                            document_id: doc.document_id,
                            version: v.version,
                            recorded,
                            actual: checksum,
                        });
                    }
                }
                versions.insert(
                    v.version,
                    DocumentVersion {
                        content,
                        checksum,
                        added_at: v.added_at,
                    },
                );
            }
            records.push(DocumentRecord {
                document_id: doc.document_id,
                title: doc.title,
                versions,
            });
        }
        Catalog::new(records)
    }

    pub fn documents(&self) -> impl Iterator<Item = &DocumentRecord> {
        self.documents.values()
    }

    pub fn get(&self, document_id: u64) -> Option<&DocumentRecord> {
        self.documents.get(&document_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub document_id: u64,
    pub title: String,
    pub versions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentContent {
    pub document_id: u64,
    pub version: u32,
    pub title: String,
    pub content: String,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("document {0} not found")]
    NotFound(u64),
    #[error("document {document_id} has no version {version}")]
    VersionNotFound {
        document_id: u64,
        version: u32,
        available: Vec<u32>,
    },
}

/// All documents in ascending id order, without content.
pub fn browse_catalog(catalog: &Catalog) -> Vec<CatalogEntry> {
    catalog
        .documents()
        .map(|d| CatalogEntry {
            document_id: d.document_id,
            title: d.title.clone(),
            versions: d.versions.keys().copied().collect(),
        })
        .collect()
}

pub fn get_document_content(
    catalog: &Catalog,
    document_id: u64,
    version: u32,
) -> Result<DocumentContent, LookupError> {
    let doc = catalog
        .get(document_id)
        .ok_or(LookupError::NotFound(document_id))?;
    let v = doc
        .versions
        .get(&version)
        .ok_or_else(|| LookupError::VersionNotFound {
            document_id,
            version,
            available: doc.versions.keys().copied().collect(),
        })?;
    debug_assert_eq!(sha256_hex(v.content.as_bytes()), v.checksum);
    Ok(DocumentContent {
        document_id,
        version,
        title: doc.title.clone(),
        content: v.content.clone(),
        checksum: v.checksum.clone(),
    })
}

#[derive(Serialize)]
struct RpcError {
    code: i64,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<Value>,
}

#[derive(Serialize)]
struct Response {
    jsonrpc: &'static str,
    id: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<RpcError>,
}

impl Response {
    fn ok(id: Value, result: Value) -> String {
        Self::line(Response {
            jsonrpc: "2.0",
            id,
            result: Some(result),
            error: None,
        })
    }

    fn err(id: Value, code: i64, message: impl Into<String>, data: Option<Value>) -> String {
        Self::line(Response {
            jsonrpc: "2.0",
            id,
            result: None,
            error: Some(RpcError {
                code,
                message: message.into(),
                data,
            }),
        })
    }

    fn line(r: Response) -> String {
        serde_json::to_string(&r).expect("response serializes")
    }
}

fn positive_int(v: Option<&Value>) -> Option<u64> {
    v.and_then(Value::as_u64).filter(|&n| n > 0)
}

pub struct Server {
    catalog: Catalog,
}

impl Server {
    pub fn new(catalog: Catalog) -> Self {
        Server { catalog }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// Answers one frame. Notifications (requests without `id`) get no reply.
    pub fn handle_line(&self, line: &str) -> Option<String> {
        let msg: Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                return Some(Response::err(
                    Value::Null,
                    PARSE_ERROR,
                    format!("Parse error: {e}"),
                    None,
                ))
            }
        };
        let Value::Object(obj) = &msg else {
            return Some(Response::err(
                Value::Null,
                INVALID_REQUEST,
                "Invalid Request: expected a single request object",
                None,
            ));
        };
        let id = match obj.get("id") {
            None => None,
            Some(v @ (Value::Null | Value::Number(_) | Value::String(_))) => Some(v.clone()),
            Some(_) => {
                return Some(Response::err(
                    Value::Null,
                    INVALID_REQUEST,
                    "Invalid Request: bad id",
                    None,
                ));
            }
        };
        let method = match (obj.get("jsonrpc"), obj.get("method")) {
            (Some(Value::String(v)), Some(Value::String(m))) if v == "2.0" => m.as_str(),
            _ => {
                return Some(Response::err(
                    id.unwrap_or(Value::Null),
                    INVALID_REQUEST,
                    "Invalid Request: need jsonrpc \"2.0\" and a method name",
                    None,
                ));
            }
        };
        let params = obj.get("params");
        let outcome = self.dispatch(method, params);
        let id = id?;
        Some(match outcome {
            Ok(result) => Response::ok(id, result),
            Err((code, message, data)) => Response::err(id, code, message, data),
        })
    }

    fn dispatch(
        &self,
        method: &str,
        params: Option<&Value>,
    ) -> Result<Value, (i64, String, Option<Value>)> {
        let invalid = |m: &str| (INVALID_PARAMS, format!("Invalid params: {m}"), None);
        match method {
            "browse_catalog" => {
                match params {
                    None | Some(Value::Null) => {}
                    Some(Value::Object(m)) if m.is_empty() => {}
                    Some(Value::Array(a)) if a.is_empty() => {}
                    _ => return Err(invalid("browse_catalog takes no parameters")),
                }
                Ok(json!({ "documents": browse_catalog(&self.catalog) }))
            }
            "get_document_content" => {
                let (doc, ver) = match params {
                    Some(Value::Object(m)) => {
                        let unknown: BTreeSet<&str> = m
                            .keys()
                            .map(String::as_str)
                            .filter(|k| *k != "document_id" && *k != "version")
                            .collect();
                        if !unknown.is_empty() {
                            return Err(invalid(&format!("unknown parameters {unknown:?}")));
                        }
                        (
                            positive_int(m.get("document_id")),
                            positive_int(m.get("version")),
                        )
                    }
                    Some(Value::Array(a)) if a.len() == 2 => {
                        (positive_int(a.first()), positive_int(a.get(1)))
                    }
                    _ => (None, None),
                };
                let (Some(document_id), Some(version)) = (doc, ver) else {
                    return Err(invalid("document_id and version must be positive integers"));
                };
                let version =
                    u32::try_from(version).map_err(|_| invalid("version out of range"))?;
                match get_document_content(&self.catalog, document_id, version) {
                    Ok(c) => Ok(serde_json::to_value(c).expect("content serializes")),
                    Err(e @ LookupError::NotFound(_)) => Err((
                        DOCUMENT_NOT_FOUND,
                        e.to_string(),
                        Some(json!({ "document_id": document_id })),
                    )),
                    Err(ref e @ LookupError::VersionNotFound { ref available, .. }) => Err((
                        VERSION_NOT_FOUND,
                        e.to_string(),
                        Some(
                            json!({ "document_id": document_id, "available_versions": available }),
                        ),
                    )),
                }
            }
            other => Err((METHOD_NOT_FOUND, format!("Method not found: {other}"), None)),
        }
    }

    /// Serves until end of input. Blank lines are ignored.
    pub fn serve<R: BufRead, W: Write>(&self, input: R, mut output: W) -> io::Result<()> {
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Some(reply) = self.handle_line(&line) {
                writeln!(output, "{reply}")?;
                output.flush()?;
            }
        }
        Ok(())
    }
}
