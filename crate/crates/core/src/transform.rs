//! Pure delivery transformations. Every function returns a new delivery and
//! leaves its input untouched.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::model::{Component, ForceUnit, LoadsDelivery, ModelError, MomentUnit, UnitSystem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("point `{0}` does not exist in the delivery")]
    UnknownPoint(String),
    #[error("renaming onto `{0}` collides with another point")]
    Collision(String),
    #[error("factor must be finite and positive, got {0}")]
    InvalidFactor(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Exact conversion constants. Inch and pound-force are exact by definition
/// (0.0254 m; 0.45359237 kg x 9.80665 m/s^2), so every entry is an exact decimal.
pub mod factors {
    use super::{ForceUnit, MomentUnit};

    pub const LBF_TO_N: f64 = 4.4482216152605;
    pub const INCH_TO_M: f64 = 0.0254;
    pub const KLBF_TO_N: f64 = 4448.2216152605;
    pub const LBF_IN_TO_NM: f64 = 0.1129848290276167;
    pub const KLBF_IN_TO_NM: f64 = 112.9848290276167;

    /// Newtons per unit.
    pub fn force(u: ForceUnit) -> f64 {
        match u {
            ForceUnit::Newton => 1.0,
            ForceUnit::Kilonewton => 1000.0,
            ForceUnit::PoundForce => LBF_TO_N,
            ForceUnit::KiloPoundForce => KLBF_TO_N,
        }
    }

    /// Newton-meters per unit.
    pub fn moment(u: MomentUnit) -> f64 {
        match u {
            MomentUnit::NewtonMeter => 1.0,
            MomentUnit::KilonewtonMeter => 1000.0,
            MomentUnit::PoundForceInch => LBF_IN_TO_NM,
            MomentUnit::KiloPoundForceInch => KLBF_IN_TO_NM,
        }
    }
}

pub type RenameMap = BTreeMap<String, String>;

/// Renames points in every case and in the coordinate table.
///
/// Returns the renamed delivery and `|map| x cases`, the number of point
/// entries touched.
pub fn rename_points(
    d: &LoadsDelivery,
    map: &RenameMap,
) -> Result<(LoadsDelivery, usize), TransformError> {
    let existing: BTreeSet<String> = d.point_names().into_iter().collect();
    if let Some(unknown) = map.keys().find(|k| !existing.contains(*k)) {
        return Err(TransformError::UnknownPoint(unknown.clone()));
    }
    let mut targets = BTreeSet::new();
    for new in map.values() {
        if !targets.insert(new) {
            return Err(TransformError::Collision(new.clone()));
        }
        if existing.contains(new) && !map.contains_key(new) {
            return Err(TransformError::Collision(new.clone()));
        }
    }

    let rename = |p: &String| map.get(p).unwrap_or(p).clone();
    let cases = d
        .cases
        .iter()
        .map(|c| c.with_loads(c.loads().iter().map(|(p, cs)| (rename(p), *cs)).collect()))
        .collect();
    let point_coordinates = d
        .point_coordinates
        .as_ref()
        .map(|coords| coords.iter().map(|(p, xyz)| (rename(p), *xyz)).collect());
    let count = map.len() * d.cases.len();
    Ok((
        LoadsDelivery {
            cases,
            point_coordinates,
            ..d.clone()
        },
        count,
    ))
}

fn check_factor(factor: f64) -> Result<(), TransformError> {
    if factor.is_finite() && factor > 0.0 {
        Ok(())
    } else {
        Err(TransformError::InvalidFactor(factor))
    }
}

/// Multiplies one component by `factor` at every point of every case.
pub fn scale_component(
    d: &LoadsDelivery,
    component: Component,
    factor: f64,
) -> Result<LoadsDelivery, TransformError> {
    check_factor(factor)?;
    Ok(d.try_map_values(|c, v| if c == component { v * factor } else { v })?)
}

pub const DEFAULT_ULTIMATE_FACTOR: f64 = 1.5;

/// Multiplies all six components everywhere (limit to ultimate loads).
pub fn apply_ultimate_factor(
    d: &LoadsDelivery,
    factor: f64,
) -> Result<LoadsDelivery, TransformError> {
    check_factor(factor)?;
    Ok(d.try_map_values(|_, v| v * factor)?)
}

/// Re-expresses every value in `target` units with one multiplication per value.
pub fn convert_units(
    d: &LoadsDelivery,
    target: UnitSystem,
) -> Result<LoadsDelivery, TransformError> {
    let src = d.units;
    if src == target {
        return Ok(d.clone());
    }
    let force = factors::force(src.force) / factors::force(target.force);
    let moment = factors::moment(src.moment) / factors::moment(target.moment);
    let mut out = d.try_map_values(|c, v| if c.is_force() { v * force } else { v * moment })?;
    out.units = target;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoordinateVerdict {
    Match,
    Mismatch(String),
    Unlabeled,
}

/// Compares the delivery's coordinate-system label with `expected`,
/// ignoring case and surrounding whitespace. No transformation is performed.
pub fn verify_coordinate_system(d: &LoadsDelivery, expected: &str) -> CoordinateVerdict {
    match d.coordinate_system() {
        None => CoordinateVerdict::Unlabeled,
        Some(found) if found.trim().eq_ignore_ascii_case(expected.trim()) => {
            CoordinateVerdict::Match
        }
        Some(found) => CoordinateVerdict::Mismatch(found.to_string()),
    }
}
