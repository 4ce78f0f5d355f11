//! Equilibrium verification and envelope downselection.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::model::{
    Component, EnvelopeExtremes, ExtremeCell, ForceUnit, LoadCase, LoadsDelivery, MomentUnit,
    PointCoordinates, UnitSystem,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("moment equilibrium needs consistent SI units (N with N·m, or kN with kN·m), delivery is in {0}")]
    NonSiCoordinates(UnitSystem),
    #[error("no coordinates for point `{0}`")]
    MissingCoordinates(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-9,
            rel: 1e-3,
        }
    }
}

impl Tolerance {
    fn allows(&self, residual: f64, reference: f64) -> bool {
        residual <= self.abs.max(self.rel * reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub components: [f64; 3],
    pub magnitude: f64,
    /// Largest single-component magnitude the residual is judged against.
    pub reference: f64,
}

impl Residual {
    fn new(components: [f64; 3], reference: f64) -> Self {
        let magnitude = components.iter().map(|v| v * v).sum::<f64>().sqrt();
        Residual {
            components,
            magnitude,
            reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumResult {
    pub case_id: u32,
    pub force_residual: Residual,
    /// Only computed when point coordinates are available.
    pub moment_residual: Option<Residual>,
    pub balanced: bool,
    pub tolerance_used: Tolerance,
}

fn cross(r: [f64; 3], f: [f64; 3]) -> [f64; 3] {
    [
        r[1] * f[2] - r[2] * f[1],
        r[2] * f[0] - r[0] * f[2],
        r[0] * f[1] - r[1] * f[0],
    ]
}

fn max_abs(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn consistent_si(units: UnitSystem) -> bool {
    matches!(
        (units.force, units.moment),
        (ForceUnit::Newton, MomentUnit::NewtonMeter)
            | (ForceUnit::Kilonewton, MomentUnit::KilonewtonMeter)
    )
}

/// Sums forces over all points and, with coordinates, moments about the
/// origin including `r x F`.
pub fn check_equilibrium(
    case: &LoadCase,
    coords: Option<&PointCoordinates>,
    units: UnitSystem,
    tol: Tolerance,
) -> Result<EquilibriumResult, AnalysisError> {
    let mut force_sum = [0.0; 3];
    for cs in case.loads().values() {
        for (acc, v) in force_sum.iter_mut().zip(cs.force()) {
            *acc += v;
        }
    }
    let force_ref = max_abs(case.loads().values().flat_map(|cs| cs.force()));
    let force_residual = Residual::new(force_sum, force_ref);
    let mut balanced = tol.allows(force_residual.magnitude, force_ref);

    let moment_residual = match coords {
        None => None,
        Some(coords) => {
            if !consistent_si(units) {
                return Err(AnalysisError::NonSiCoordinates(units));
            }
            let mut sum = [0.0; 3];
            let mut reference: f64 = 0.0;
            for (point, cs) in case.loads() {
                let r = *coords
                    .get(point)
                    .ok_or_else(|| AnalysisError::MissingCoordinates(point.clone()))?;
                let arm = cross(r, cs.force());
                let m = cs.moment();
                for i in 0..3 {
                    sum[i] += m[i] + arm[i];
                }
                reference = reference.max(max_abs(m)).max(max_abs(arm));
            }
            let residual = Residual::new(sum, reference);
            balanced &= tol.allows(residual.magnitude, reference);
            Some(residual)
        }
    };

    Ok(EquilibriumResult {
        case_id: case.id(),
        force_residual,
        moment_residual,
        balanced,
        tolerance_used: tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSummary {
    pub all_balanced: bool,
    pub results: Vec<EquilibriumResult>,
}

/// One result per case in delivery order.
pub fn check_equilibrium_all(
    d: &LoadsDelivery,
    coords: Option<&PointCoordinates>,
    tol: Tolerance,
) -> Result<EquilibriumSummary, AnalysisError> {
    let results = d
        .cases()
        .iter()
        .map(|c| check_equilibrium(c, coords, d.units(), tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EquilibriumSummary {
        all_balanced: results.iter().all(|r| r.balanced),
        results,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtremeKind {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SelectionReason {
    pub point: String,
    pub component: Component,
    pub kind: ExtremeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSelection {
    pub selected_case_ids: Vec<u32>,
    pub extremes: EnvelopeExtremes,
    pub reasons: BTreeMap<u32, Vec<SelectionReason>>,
}

/// Per (point, component) max and min with originating case. Ties go to the
/// earliest case in delivery order.
pub fn envelope_extremes(d: &LoadsDelivery) -> EnvelopeExtremes {
    let mut cells: BTreeMap<String, BTreeMap<Component, ExtremeCell>> = BTreeMap::new();
    for case in d.cases() {
        for (point, cs) in case.loads() {
            let row = cells.entry(point.clone()).or_default();
            for c in Component::ALL {
                let v = cs.get(c);
                row.entry(c)
                    .and_modify(|cell| {
                        if v > cell.max {
                            cell.max = v;
                            cell.max_case = case.id();
                        }
                        if v < cell.min {
                            cell.min = v;
                            cell.min_case = case.id();
                        }
                    })
                    .or_insert(ExtremeCell {
                        max: v,
                        max_case: case.id(),
                        min: v,
                        min_case: case.id(),
                    });
            }
        }
    }
    EnvelopeExtremes {
        name: d.name().to_string(),
        version: d.version(),
        units: d.units(),
        cells,
    }
}

/// Critical cases: the max case of every cell, plus the min case of every
/// cell whose min is strictly negative.
pub fn envelope_select(d: &LoadsDelivery) -> EnvelopeSelection {
    let extremes = envelope_extremes(d);
    let mut reasons: BTreeMap<u32, Vec<SelectionReason>> = BTreeMap::new();
    for (point, component, cell) in extremes.iter_cells() {
        reasons
            .entry(cell.max_case)
            .or_default()
            .push(SelectionReason {
                point: point.to_string(),
                component,
                kind: ExtremeKind::Max,
            });
        if cell.min < 0.0 {
            reasons
                .entry(cell.min_case)
                .or_default()
                .push(SelectionReason {
                    point: point.to_string(),
                    component,
                    kind: ExtremeKind::Min,
                });
        }
    }
    let selected: BTreeSet<u32> = reasons.keys().copied().collect();
    EnvelopeSelection {
        selected_case_ids: selected.into_iter().collect(),
        extremes,
        reasons,
    }
}
