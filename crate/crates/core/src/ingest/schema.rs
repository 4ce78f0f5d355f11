//! Maps a parsed document tree onto the delivery model.
//!
//! Top level: `{name, version, units:{force, moment}, coordinate_system?,
//! point_coordinates?, load_cases:[{id, label?, point_loads:{<point>:{fx..mz}}}]}`.
//! Unknown fields are errors, as are missing components.

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::IngestError;
use crate::model::{
    Component, ComponentSet, ForceUnit, LoadCase, LoadsDelivery, MomentUnit, PointCoordinates,
    UnitSystem,
};

const TOP_FIELDS: &[&str] = &[
    "name",
    "version",
    "units",
    "coordinate_system",
    "point_coordinates",
    "load_cases",
];
const UNIT_FIELDS: &[&str] = &["force", "moment"];
const CASE_FIELDS: &[&str] = &["id", "label", "point_loads"];
const LOAD_FIELDS: &[&str] = &["fx", "fy", "fz", "mx", "my", "mz"];

fn schema(location: impl Into<String>, message: impl Into<String>) -> IngestError {
    IngestError::Schema {
        location: location.into(),
        message: message.into(),
    }
}

fn object<'a>(v: &'a Value, loc: &str) -> Result<&'a Map<String, Value>, IngestError> {
    v.as_object()
        .ok_or_else(|| schema(loc, "expected a mapping"))
}

fn only_fields(map: &Map<String, Value>, allowed: &[&str], loc: &str) -> Result<(), IngestError> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(extra) => Err(schema(
            join(loc, extra),
            format!("unexpected field `{extra}`"),
        )),
        None => Ok(()),
    }
}

fn required<'a>(
    map: &'a Map<String, Value>,
    field: &str,
    loc: &str,
) -> Result<&'a Value, IngestError> {
    map.get(field)
        .ok_or_else(|| schema(join(loc, field), format!("missing field `{field}`")))
}

fn optional<'a>(map: &'a Map<String, Value>, field: &str) -> Option<&'a Value> {
    map.get(field).filter(|v| !v.is_null())
}

fn join(loc: &str, field: &str) -> String {
    if loc.is_empty() {
        field.to_string()
    } else {
        format!("{loc}.{field}")
    }
}

fn string(v: &Value, loc: &str) -> Result<String, IngestError> {
    v.as_str()
        .map(str::to_string)
        .ok_or_else(|| schema(loc, "expected a string"))
}

fn positive_int(v: &Value, loc: &str) -> Result<u32, IngestError> {
    v.as_u64()
        .filter(|&n| n >= 1)
        .and_then(|n| u32::try_from(n).ok())
        .ok_or_else(|| schema(loc, "expected a positive integer"))
}

fn number(v: &Value, loc: &str) -> Result<f64, IngestError> {
    v.as_f64()
        .filter(|f| f.is_finite())
        .ok_or_else(|| schema(loc, "expected a finite number"))
}

pub(crate) fn delivery_from_value(root: &Value) -> Result<LoadsDelivery, IngestError> {
    let top = object(root, "$")?;
    only_fields(top, TOP_FIELDS, "")?;

    let name = string(required(top, "name", "")?, "name")?;
    let version = positive_int(required(top, "version", "")?, "version")?;
    let units = units(required(top, "units", "")?)?;
    let coordinate_system = optional(top, "coordinate_system")
        .map(|v| string(v, "coordinate_system"))
        .transpose()?;
    let point_coordinates = optional(top, "point_coordinates")
        .map(coordinates)
        .transpose()?;

    let raw_cases = required(top, "load_cases", "")?
        .as_array()
        .ok_or_else(|| schema("load_cases", "expected a sequence"))?;
    let cases = raw_cases
        .iter()
        .enumerate()
        .map(|(i, v)| load_case(v, &format!("load_cases[{i}]")))
        .collect::<Result<Vec<_>, _>>()?;

    LoadsDelivery::new_unvalidated(
        name,
        version,
        units,
        coordinate_system,
        point_coordinates,
        cases,
    )
    .map_err(|e| schema("point_coordinates", e.to_string()))
}

fn units(v: &Value) -> Result<UnitSystem, IngestError> {
    let map = object(v, "units")?;
    only_fields(map, UNIT_FIELDS, "units")?;
    let force_tok = string(required(map, "force", "units")?, "units.force")?;
    let moment_tok = string(required(map, "moment", "units")?, "units.moment")?;
    let force: ForceUnit = force_tok.parse().map_err(|_| IngestError::UnknownUnit {
        location: "units.force".into(),
        token: force_tok.clone(),
    })?;
    let moment: MomentUnit = moment_tok.parse().map_err(|_| IngestError::UnknownUnit {
        location: "units.moment".into(),
        token: moment_tok.clone(),
    })?;
    Ok(UnitSystem::new(force, moment))
}

fn coordinates(v: &Value) -> Result<PointCoordinates, IngestError> {
    let map = object(v, "point_coordinates")?;
    let mut out = BTreeMap::new();
    for (point, xyz) in map {
        let loc = join("point_coordinates", point);
        let arr = xyz
            .as_array()
            .filter(|a| a.len() == 3)
            .ok_or_else(|| schema(&loc, "expected [x, y, z]"))?;
        let mut p = [0.0; 3];
        for (i, item) in arr.iter().enumerate() {
            p[i] = number(item, &format!("{loc}[{i}]"))?;
        }
        out.insert(point.clone(), p);
    }
    Ok(out)
}

fn load_case(v: &Value, loc: &str) -> Result<LoadCase, IngestError> {
    let map = object(v, loc)?;
    only_fields(map, CASE_FIELDS, loc)?;
    let id = positive_int(required(map, "id", loc)?, &join(loc, "id"))?;
    let label = optional(map, "label")
        .map(|v| string(v, &join(loc, "label")))
        .transpose()?;
    let loads_loc = join(loc, "point_loads");
    let raw_loads = object(required(map, "point_loads", loc)?, &loads_loc)?;
    if raw_loads.is_empty() {
        return Err(schema(loads_loc, "at least one point is required"));
    }
    let mut loads = BTreeMap::new();
    for (point, comps) in raw_loads {
        let point_loc = join(&loads_loc, point);
        let comps_map = object(comps, &point_loc)?;
        only_fields(comps_map, LOAD_FIELDS, &point_loc)?;
        let mut values = [0.0; 6];
        for (i, c) in Component::ALL.into_iter().enumerate() {
            let field_loc = join(&point_loc, c.field());
            let raw = comps_map.get(c.field()).ok_or_else(|| {
                schema(
                    &field_loc,
                    format!("missing component `{}` at point `{point}`", c.field()),
                )
            })?;
            values[i] = number(raw, &field_loc)?;
        }
        let cs = ComponentSet::from_array(values).map_err(|e| schema(&point_loc, e.to_string()))?;
        loads.insert(point.clone(), cs);
    }
    LoadCase::new(id, label, loads).map_err(|e| schema(loc, e.to_string()))
}
