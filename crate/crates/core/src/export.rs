//! Byte-deterministic emitters: APDL nodal-force decks, markdown envelope
//! tables and the extremes JSON file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Component, EnvelopeExtremes, ExtremeCell, LoadCase, LoadsDelivery};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("point `{0}` has no node mapping")]
    UnmappedPoint(String),
    #[error("every point of case {0} is excluded; refusing to write an empty deck")]
    EmptyDeck(u32),
    #[error("EMPTY_SELECTION: no load cases selected for export")]
    EmptySelection,
    #[error("case {0} is not in the delivery")]
    UnknownCase(u32),
    #[error("node map is not injective: node {0} is used twice")]
    DuplicateNode(u32),
    #[error("node ids must be positive (point `{0}`)")]
    ZeroNode(String),
    #[error("invalid node map: {0}")]
    NodeMapFormat(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Point name to mesh node id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeMap(BTreeMap<String, u32>);

impl NodeMap {
    pub fn new(map: BTreeMap<String, u32>) -> Result<Self, ExportError> {
        let mut seen = BTreeSet::new();
        for (point, node) in &map {
            if *node == 0 {
                return Err(ExportError::ZeroNode(point.clone()));
            }
            if !seen.insert(*node) {
                return Err(ExportError::DuplicateNode(*node));
            }
        }
        Ok(NodeMap(map))
    }

    /// Reads the `{"<point>": <node>, ...}` config file format.
    pub fn from_json(raw: &str) -> Result<Self, ExportError> {
        let map: BTreeMap<String, u32> =
            serde_json::from_str(raw).map_err(|e| ExportError::NodeMapFormat(e.to_string()))?;
        Self::new(map)
    }

    pub fn get(&self, point: &str) -> Option<u32> {
        self.0.get(point).copied()
    }

    pub fn as_map(&self) -> &BTreeMap<String, u32> {
        &self.0
    }
}

/// Upper-case scientific notation, six fractional digits, signed two-digit
/// minimum exponent: `1.234500E+02`. Negative zero prints as zero.
pub fn format_sci(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    let s = format!("{v:.6E}");
    let (mantissa, exp) = s.split_once('E').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}E{sign}{:02}", exp.abs())
}

pub const DECK_BANNER: &str = "/COM, loadsmith";

/// One APDL deck with an `F,<node>,<LABEL>,<value>` line per point and component.
pub fn write_ansys_inp(
    case: &LoadCase,
    nodes: &NodeMap,
    exclude: &BTreeSet<String>,
) -> Result<String, ExportError> {
    let points: Vec<(&String, _)> = case
        .loads()
        .iter()
        .filter(|(p, _)| !exclude.contains(*p))
        .collect();
    if points.is_empty() {
        return Err(ExportError::EmptyDeck(case.id()));
    }
    let mut out = String::new();
    out.push_str(DECK_BANNER);
    out.push('\n');
    match case.label() {
        Some(label) => writeln!(out, "/COM, case {} {}", case.id(), label).unwrap(),
        None => writeln!(out, "/COM, case {}", case.id()).unwrap(),
    }
    for (point, cs) in points {
        let node = nodes
            .get(point)
            .ok_or_else(|| ExportError::UnmappedPoint(point.clone()))?;
        for c in Component::ALL {
            writeln!(out, "F,{node},{},{}", c.label(), format_sci(cs.get(c))).unwrap();
        }
    }
    Ok(out)
}

pub fn inp_file_name(case_id: u32) -> String {
    format!("limit_load_{case_id}.inp")
}

/// Writes `limit_load_<id>.inp` for each selected case, in ascending id order.
pub fn export_all_inp(
    d: &LoadsDelivery,
    selected: &[u32],
    nodes: &NodeMap,
    exclude: &BTreeSet<String>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ExportError> {
    if selected.is_empty() {
        return Err(ExportError::EmptySelection);
    }
    let ids: BTreeSet<u32> = selected.iter().copied().collect();
    let mut decks = Vec::with_capacity(ids.len());
    for id in ids {
        let case = d.case(id).ok_or(ExportError::UnknownCase(id))?;
        decks.push((
            out_dir.join(inp_file_name(id)),
            write_ansys_inp(case, nodes, exclude)?,
        ));
    }
    std::fs::create_dir_all(out_dir).map_err(|source| ExportError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::with_capacity(decks.len());
    for (path, text) in decks {
        std::fs::write(&path, text).map_err(|source| ExportError::Io {
            path: path.clone(),
            source,
        })?;
        paths.push(path);
    }
    Ok(paths)
}

/// One table per point, components in canonical order.
pub fn envelope_to_markdown(e: &EnvelopeExtremes) -> String {
    let mut out = String::new();
    writeln!(out, "# Envelope: {} (version {})", e.name, e.version).unwrap();
    out.push('\n');
    writeln!(
        out,
        "Units: force {}, moment {}",
        e.units.force, e.units.moment
    )
    .unwrap();
    for (point, row) in &e.cells {
        out.push('\n');
        writeln!(out, "## {point}").unwrap();
        out.push('\n');
        out.push_str("| Component | Max | Max case | Min | Min case |\n");
        out.push_str("|---|---|---|---|---|\n");
        for (c, cell) in row {
            writeln!(
                out,
                "| {} | {} | {} | {} | {} |",
                c.label(),
                format_sci(cell.max),
                cell.max_case,
                format_sci(cell.min),
                cell.min_case
            )
            .unwrap();
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
pub(crate) struct UnitsJson {
    pub force: String,
    pub moment: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeJson {
    name: String,
    version: u32,
    units: UnitsJson,
    extremes: BTreeMap<String, BTreeMap<Component, ExtremeCell>>,
}

/// Compact canonical JSON, trailing newline.
pub fn write_envelope_json(e: &EnvelopeExtremes) -> String {
    let doc = EnvelopeJson {
        name: e.name.clone(),
        version: e.version,
        units: UnitsJson {
            force: e.units.force.token().into(),
            moment: e.units.moment.token().into(),
        },
        extremes: e.cells.clone(),
    };
    let mut s = serde_json::to_string(&doc).expect("envelope serializes");
    s.push('\n');
    s
}

/// Inverse of [`write_envelope_json`].
pub fn read_envelope_json(raw: &str) -> Result<EnvelopeExtremes, String> {
    let doc: EnvelopeJson = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    let units = crate::model::UnitSystem::new(
        doc.units
            .force
            .parse()
            .map_err(|e: crate::model::ModelError| e.to_string())?,
        doc.units
            .moment
            .parse()
            .map_err(|e: crate::model::ModelError| e.to_string())?,
    );
    for (point, row) in &doc.extremes {
        for (c, cell) in row {
            if cell.min > cell.max {
                return Err(format!(
                    "{point}.{c}: min {} exceeds max {}",
                    cell.min, cell.max
                ));
            }
        }
    }
    Ok(EnvelopeExtremes {
        name: doc.name,
        version: doc.version,
        units,
        cells: doc.extremes,
    })
}
