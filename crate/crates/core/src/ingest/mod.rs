//! Reading, validating and canonically writing OEM load deliveries.

mod schema;
mod validate;
mod yaml;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::model::{LoadsDelivery, PointCoordinates};

pub use validate::{validate_delivery, Finding, Severity, ValidationReport};

/// Version of the delivery file schema written by [`write_delivery_json`].
pub const DELIVERY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeliveryFormat {
    Json,
    Yaml,
}

impl fmt::Display for DeliveryFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeliveryFormat::Json => "JSON",
            DeliveryFormat::Yaml => "YAML",
        })
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("empty input")]
    EmptyInput,
    #[error("{format} syntax error at line {line}, column {column}: {message}")]
    Syntax {
        format: DeliveryFormat,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at {location}: {message}")]
    Schema { location: String, message: String },
    #[error("unknown unit `{token}` at {location}")]
    UnknownUnit { location: String, token: String },
    #[error("delivery failed validation: {}", summarize(.0))]
    Invalid(ValidationReport),
}

fn summarize(report: &ValidationReport) -> String {
    report
        .errors()
        .map(|f| format!("{} at {}", f.code, f.location))
        .collect::<Vec<_>>()
        .join(", ")
}

/// JSON when the first non-whitespace byte opens an object or array.
pub fn detect_format(raw: &str) -> Result<DeliveryFormat, IngestError> {
    match raw.trim_start().bytes().next() {
        None => Err(IngestError::EmptyInput),
        Some(b'{') | Some(b'[') => Ok(DeliveryFormat::Json),
        Some(_) => Ok(DeliveryFormat::Yaml),
    }
}

/// Parses without running the cross-case checks, so that callers can report
/// every finding through [`validate_delivery`] instead of stopping at the first.
pub fn parse_delivery_unvalidated(
    raw: &str,
    fmt: DeliveryFormat,
) -> Result<LoadsDelivery, IngestError> {
    if raw.trim().is_empty() {
        return Err(IngestError::EmptyInput);
    }
    let tree = match fmt {
        DeliveryFormat::Json => serde_json::from_str(raw).map_err(|e| IngestError::Syntax {
            format: DeliveryFormat::Json,
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?,
        DeliveryFormat::Yaml => yaml::load(raw)?,
    };
    schema::delivery_from_value(&tree)
}

/// Parses and validates a delivery. Warnings (such as non-SI units) do not fail.
pub fn parse_delivery(raw: &str, fmt: DeliveryFormat) -> Result<LoadsDelivery, IngestError> {
    let d = parse_delivery_unvalidated(raw, fmt)?;
    let report = validate_delivery(&d);
    if !report.ok {
        return Err(IngestError::Invalid(report));
    }
    Ok(d)
}

/// [`detect_format`] followed by [`parse_delivery`].
pub fn read_delivery(raw: &str) -> Result<LoadsDelivery, IngestError> {
    parse_delivery(raw, detect_format(raw)?)
}

#[derive(Serialize)]
struct UnitsOut<'a> {
    force: &'a str,
    moment: &'a str,
}

#[derive(Serialize)]
struct LoadsOut {
    fx: f64,
    fy: f64,
    fz: f64,
    mx: f64,
    my: f64,
    mz: f64,
}

#[derive(Serialize)]
struct CaseOut<'a> {
    id: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    label: Option<&'a str>,
    point_loads: BTreeMap<&'a str, LoadsOut>,
}

#[derive(Serialize)]
struct DeliveryOut<'a> {
    name: &'a str,
    version: u32,
    units: UnitsOut<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coordinate_system: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    point_coordinates: Option<&'a PointCoordinates>,
    load_cases: Vec<CaseOut<'a>>,
}

fn delivery_out(d: &LoadsDelivery) -> DeliveryOut<'_> {
    DeliveryOut {
        name: d.name(),
        version: d.version(),
        units: UnitsOut {
            force: d.units().force.token(),
            moment: d.units().moment.token(),
        },
        coordinate_system: d.coordinate_system(),
        point_coordinates: d.point_coordinates(),
        load_cases: d
            .cases()
            .iter()
            .map(|c| CaseOut {
                id: c.id(),
                label: c.label(),
                point_loads: c
                    .loads()
                    .iter()
                    .map(|(p, cs)| {
                        let [fx, fy, fz, mx, my, mz] = cs.as_array();
                        (
                            p.as_str(),
                            LoadsOut {
                                fx,
                                fy,
                                fz,
                                mx,
                                my,
                                mz,
                            },
                        )
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// Canonical JSON: schema field order, points sorted, shortest round-trip
/// numbers, two-space indentation, trailing newline.
pub fn write_delivery_json(d: &LoadsDelivery) -> String {
    let mut s = serde_json::to_string_pretty(&delivery_out(d)).expect("delivery serializes");
    s.push('\n');
    s
}

fn yaml_str(s: &str) -> String {
    // A JSON string literal is a valid YAML double-quoted scalar.
    serde_json::to_string(s).expect("string serializes")
}

fn yaml_num(v: f64) -> String {
    serde_json::to_string(&v).expect("finite number serializes")
}

/// Block-style YAML carrying the same content as [`write_delivery_json`].
pub fn write_delivery_yaml(d: &LoadsDelivery) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    let _ = writeln!(out, "name: {}", yaml_str(d.name()));
    let _ = writeln!(out, "version: {}", d.version());
    let _ = writeln!(out, "units:");
    let _ = writeln!(out, "  force: {}", yaml_str(d.units().force.token()));
    let _ = writeln!(out, "  moment: {}", yaml_str(d.units().moment.token()));
    if let Some(cs) = d.coordinate_system() {
        let _ = writeln!(out, "coordinate_system: {}", yaml_str(cs));
    }
    if let Some(coords) = d.point_coordinates() {
        let _ = writeln!(out, "point_coordinates:");
        for (p, [x, y, z]) in coords {
            let _ = writeln!(
                out,
                "  {}: [{}, {}, {}]",
                yaml_str(p),
                yaml_num(*x),
                yaml_num(*y),
                yaml_num(*z)
            );
        }
    }
    let _ = writeln!(out, "load_cases:");
    for case in d.cases() {
        let _ = writeln!(out, "  - id: {}", case.id());
        if let Some(label) = case.label() {
            let _ = writeln!(out, "    label: {}", yaml_str(label));
        }
        let _ = writeln!(out, "    point_loads:");
        for (p, cs) in case.loads() {
            let [fx, fy, fz, mx, my, mz] = cs.as_array().map(yaml_num);
            let _ = writeln!(
                out,
                "      {}: {{fx: {fx}, fy: {fy}, fz: {fz}, mx: {mx}, my: {my}, mz: {mz}}}",
                yaml_str(p)
            );
        }
    }
    out
}

/// Writes in the requested format.
pub fn write_delivery(d: &LoadsDelivery, fmt: DeliveryFormat) -> String {
    match fmt {
        DeliveryFormat::Json => write_delivery_json(d),
        DeliveryFormat::Yaml => write_delivery_yaml(d),
    }
}
