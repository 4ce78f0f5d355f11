//! Exceedance check of a new envelope against a previously substantiated one.
//!
//! A bound "exceeds" when the envelope widens: the max rises or the min
//! drops. Percentages are signed in the widening direction, so a positive
//! delta always means the envelope grew at that bound.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::export::UnitsJson;
use crate::model::{Component, EnvelopeExtremes, UnitSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompareError {
    #[error("envelopes cover different cells: {0}")]
    CellMismatch(String),
    #[error("unit mismatch: new is {new}, old is {old}")]
    UnitMismatch { new: UnitSystem, old: UnitSystem },
    #[error("widening tolerance must be finite and non-negative")]
    InvalidTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub old_max: f64,
    pub new_max: f64,
    /// `None` when the old bound is zero and the new one is not.
    pub max_delta_pct: Option<f64>,
    pub max_exceeds: bool,
    pub old_min: f64,
    pub new_min: f64,
    pub min_delta_pct: Option<f64>,
    pub min_exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub name: String,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub new: Provenance,
    pub old: Provenance,
    pub units: UnitSystem,
    pub widen_tol: f64,
    pub new_exceeds_old: bool,
    pub cells: BTreeMap<String, BTreeMap<Component, CellComparison>>,
}

impl ComparisonReport {
    pub fn exceeding_cells(&self) -> impl Iterator<Item = (&str, Component, &CellComparison)> {
        self.cells
            .iter()
            .flat_map(|(p, row)| row.iter().map(move |(c, cell)| (p.as_str(), *c, cell)))
            .filter(|(_, _, cell)| cell.max_exceeds || cell.min_exceeds)
    }

    /// Suggested file name, `v<old>_vs_v<new>.json`.
    pub fn suggested_file_name(&self) -> String {
        format!("v{}_vs_v{}.json", self.old.version, self.new.version)
    }
}

/// Percentage change of `new` relative to `old`, positive when widening.
fn widening_pct(old: f64, new: f64, upper: bool) -> Option<f64> {
    let growth = if upper { new - old } else { old - new };
    if old == 0.0 {
        if new == 0.0 {
            Some(0.0)
        } else {
            None
        }
    } else {
        Some(100.0 * growth / old.abs())
    }
}

pub fn compare_envelopes(
    new: &EnvelopeExtremes,
    old: &EnvelopeExtremes,
    widen_tol: f64,
) -> Result<ComparisonReport, CompareError> {
    if !(widen_tol.is_finite() && widen_tol >= 0.0) {
        return Err(CompareError::InvalidTolerance);
    }
    if new.units != old.units {
        return Err(CompareError::UnitMismatch {
            new: new.units,
            old: old.units,
        });
    }
    let new_keys: Vec<(&str, Component)> = new.iter_cells().map(|(p, c, _)| (p, c)).collect();
    let old_keys: Vec<(&str, Component)> = old.iter_cells().map(|(p, c, _)| (p, c)).collect();
    if new_keys != old_keys {
        let new_pts = new.point_names();
        let old_pts = old.point_names();
        let only_new: Vec<_> = new_pts.iter().filter(|p| !old_pts.contains(p)).collect();
        let only_old: Vec<_> = old_pts.iter().filter(|p| !new_pts.contains(p)).collect();
        return Err(CompareError::CellMismatch(format!(
            "only in new {only_new:?}, only in old {only_old:?}"
        )));
    }

    let mut cells: BTreeMap<String, BTreeMap<Component, CellComparison>> = BTreeMap::new();
    let mut any = false;
    for (point, c, n) in new.iter_cells() {
        let o = old.cell(point, c).expect("cell sets checked equal");
        let max_exceeds = n.max > o.max + widen_tol;
        let min_exceeds = n.min < o.min - widen_tol;
        any |= max_exceeds || min_exceeds;
        cells.entry(point.to_string()).or_default().insert(
            c,
            CellComparison {
                old_max: o.max,
                new_max: n.max,
                max_delta_pct: widening_pct(o.max, n.max, true),
                max_exceeds,
                old_min: o.min,
                new_min: n.min,
                min_delta_pct: widening_pct(o.min, n.min, false),
                min_exceeds,
            },
        );
    }
    Ok(ComparisonReport {
        new: Provenance {
            name: new.name.clone(),
            version: new.version,
        },
        old: Provenance {
            name: old.name.clone(),
            version: old.version,
        },
        units: new.units,
        widen_tol,
        new_exceeds_old: any,
        cells,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportJson {
    report_version: u32,
    new: Provenance,
    old: Provenance,
    units: UnitsJson,
    widen_tol: f64,
    new_exceeds_old: bool,
    cells: BTreeMap<String, BTreeMap<Component, CellComparison>>,
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Compact canonical JSON with a trailing newline.
pub fn write_comparison_report(r: &ComparisonReport) -> String {
    let doc = ReportJson {
        report_version: REPORT_SCHEMA_VERSION,
        new: r.new.clone(),
        old: r.old.clone(),
        units: UnitsJson {
            force: r.units.force.token().into(),
            moment: r.units.moment.token().into(),
        },
        widen_tol: r.widen_tol,
        new_exceeds_old: r.new_exceeds_old,
        cells: r.cells.clone(),
    };
    let mut s = serde_json::to_string(&doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn read_comparison_report(raw: &str) -> Result<ComparisonReport, String> {
    let doc: ReportJson = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    if doc.report_version != REPORT_SCHEMA_VERSION {
        return Err(format!("unsupported report_version {}", doc.report_version));
    }
    let units = UnitSystem::new(
        doc.units
            .force
            .parse()
            .map_err(|e: crate::model::ModelError| e.to_string())?,
        doc.units
            .moment
            .parse()
            .map_err(|e: crate::model::ModelError| e.to_string())?,
    );
    Ok(ComparisonReport {
        new: doc.new,
        old: doc.old,
        units,
        widen_tol: doc.widen_tol,
        new_exceeds_old: doc.new_exceeds_old,
        cells: doc.cells,
    })
}

fn pct(v: Option<f64>) -> String {
    match v {
        Some(p) => format!("{p:+.1}%"),
        None => "n/a".to_string(),
    }
}

/// Human-readable summary listing only the widened bounds.
pub fn comparison_to_markdown(r: &ComparisonReport) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    writeln!(
        out,
        "# Exceedance: {} (version {}) vs {} (version {})",
        r.new.name, r.new.version, r.old.name, r.old.version
    )
    .unwrap();
    out.push('\n');
    writeln!(
        out,
        "Units: force {}, moment {}",
        r.units.force, r.units.moment
    )
    .unwrap();
    writeln!(out, "New exceeds old: {}", r.new_exceeds_old).unwrap();
    if !r.new_exceeds_old {
        return out;
    }
    out.push('\n');
    out.push_str("| Point | Component | Bound | Old | New | Change |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for (point, c, cell) in r.exceeding_cells() {
        if cell.max_exceeds {
            writeln!(
                out,
                "| {point} | {c} | max | {} | {} | {} |",
                crate::export::format_sci(cell.old_max),
                crate::export::format_sci(cell.new_max),
                pct(cell.max_delta_pct)
            )
            .unwrap();
        }
        if cell.min_exceeds {
            writeln!(
                out,
                "| {point} | {c} | min | {} | {} | {} |",
                crate::export::format_sci(cell.old_min),
                crate::export::format_sci(cell.new_min),
                pct(cell.min_delta_pct)
            )
            .unwrap();
        }
    }
    out
}
