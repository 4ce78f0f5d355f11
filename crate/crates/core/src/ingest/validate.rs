use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::{Component, LoadsDelivery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub location: String,
}

/// Outcome of [`validate_delivery`]. `ok` is true iff no finding is an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn from_findings(findings: Vec<Finding>) -> Self {
        let ok = findings.iter().all(|f| f.severity != Severity::Error);
        ValidationReport { ok, findings }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Warning)
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn finding(severity: Severity, code: &str, location: String, message: String) -> Finding {
    Finding {
        severity,
        code: code.to_string(),
        message,
        location,
    }
}

/// Checks the cross-case delivery invariants and flags non-SI units.
pub fn validate_delivery(d: &LoadsDelivery) -> ValidationReport {
    use Severity::{Error, Warning};
    let mut out = Vec::new();

    if d.version == 0 {
        out.push(finding(
            Error,
            "INVALID_VERSION",
            "version".into(),
            "version must be a positive integer".into(),
        ));
    }

    if d.cases.is_empty() {
        out.push(finding(
            Error,
            "NO_LOAD_CASES",
            "load_cases".into(),
            "a delivery needs at least one load case".into(),
        ));
    }

    let mut seen: BTreeMap<u32, usize> = BTreeMap::new();
    for (i, case) in d.cases.iter().enumerate() {
        if case.id() == 0 {
            out.push(finding(
                Error,
                "INVALID_CASE_ID",
                format!("load_cases[{i}].id"),
                "case id must be positive".into(),
            ));
        }
        if let Some(first) = seen.insert(case.id(), i) {
            out.push(finding(
                Error,
                "DUPLICATE_CASE_ID",
                format!("load_cases[{i}].id"),
                format!("case id {} already used at load_cases[{first}]", case.id()),
            ));
        }
    }

    if let Some(first) = d.cases.first() {
        let reference: BTreeSet<&String> = first.loads().keys().collect();
        for (i, case) in d.cases.iter().enumerate().skip(1) {
            let points: BTreeSet<&String> = case.loads().keys().collect();
            if points != reference {
                let missing: Vec<_> = reference.difference(&points).map(|s| s.as_str()).collect();
                let extra: Vec<_> = points.difference(&reference).map(|s| s.as_str()).collect();
                out.push(finding(
                    Error,
                    "POINT_SET_MISMATCH",
                    format!("load_cases[{i}].point_loads"),
                    format!(
                        "case {} point set differs from case {}: missing [{}], extra [{}]",
                        case.id(),
                        first.id(),
                        missing.join(", "),
                        extra.join(", ")
                    ),
                ));
            }
        }
    }

    for (i, case) in d.cases.iter().enumerate() {
        for (point, cs) in case.loads() {
            for c in Component::ALL {
                if !cs.get(c).is_finite() {
                    out.push(finding(
                        Error,
                        "NON_FINITE_VALUE",
                        format!("load_cases[{i}].point_loads.{point}.{}", c.field()),
                        "value is not finite".into(),
                    ));
                }
            }
        }
    }

    if let Some(coords) = &d.point_coordinates {
        let have: BTreeSet<String> = coords.keys().cloned().collect();
        let need: BTreeSet<String> = d.point_names().into_iter().collect();
        if have != need {
            let missing: Vec<_> = need.difference(&have).map(|s| s.as_str()).collect();
            let extra: Vec<_> = have.difference(&need).map(|s| s.as_str()).collect();
            out.push(finding(
                Error,
                "COORDINATES_MISMATCH",
                "point_coordinates".into(),
                format!(
                    "coordinates do not match the point set: missing [{}], extra [{}]",
                    missing.join(", "),
                    extra.join(", ")
                ),
            ));
        }
    }

    if !d.units.is_si() {
        out.push(finding(
            Warning,
            "NON_SI_UNITS",
            "units".into(),
            format!(
                "delivery is in {} / {}; convert to SI before export",
                d.units.force, d.units.moment
            ),
        ));
    }

    ValidationReport::from_findings(out)
}
