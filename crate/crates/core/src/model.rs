//! Domain model shared by every processing stage.
//!
//! All values are immutable once constructed. Orderings used by exporters are
//! fixed here: points lexicographic, components canonical (FX..MZ), cases in
//! delivery order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("component {component} is not finite ({value})")]
    NonFinite { component: Component, value: f64 },
    #[error("coordinate of point `{point}` is not finite")]
    NonFiniteCoordinate { point: String },
    #[error("load case id must be a positive integer")]
    ZeroCaseId,
    #[error("load case {0} has no point loads")]
    EmptyCase(u32),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("unknown force unit `{0}`")]
    UnknownForceUnit(String),
    #[error("unknown moment unit `{0}`")]
    UnknownMomentUnit(String),
    #[error("invalid delivery: {0}")]
    Invalid(String),
}

/// One of the six load components at an interface point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "FX")]
    Fx,
    #[serde(rename = "FY")]
    Fy,
    #[serde(rename = "FZ")]
    Fz,
    #[serde(rename = "MX")]
    Mx,
    #[serde(rename = "MY")]
    My,
    #[serde(rename = "MZ")]
    Mz,
}

impl Component {
    /// Canonical order.
    pub const ALL: [Component; 6] = [
        Component::Fx,
        Component::Fy,
        Component::Fz,
        Component::Mx,
        Component::My,
        Component::Mz,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Component::Fx => "FX",
            Component::Fy => "FY",
            Component::Fz => "FZ",
            Component::Mx => "MX",
            Component::My => "MY",
            Component::Mz => "MZ",
        }
    }

    /// Lower-case field name used in delivery files.
    pub fn field(self) -> &'static str {
        match self {
            Component::Fx => "fx",
            Component::Fy => "fy",
            Component::Fz => "fz",
            Component::Mx => "mx",
            Component::My => "my",
            Component::Mz => "mz",
        }
    }

    pub fn is_force(self) -> bool {
        matches!(self, Component::Fx | Component::Fy | Component::Fz)
    }

    pub fn is_moment(self) -> bool {
        !self.is_force()
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Component {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Component::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModelError::UnknownComponent(s.to_string()))
    }
}

/// Fx, Fy, Fz, Mx, My, Mz at one point. Always finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComponentSet {
    values: [f64; 6],
}

impl ComponentSet {
    pub const ZERO: ComponentSet = ComponentSet { values: [0.0; 6] };

    pub fn new(fx: f64, fy: f64, fz: f64, mx: f64, my: f64, mz: f64) -> Result<Self, ModelError> {
        Self::from_array([fx, fy, fz, mx, my, mz])
    }

    /// Values in canonical component order.
    pub fn from_array(values: [f64; 6]) -> Result<Self, ModelError> {
        for c in Component::ALL {
            let value = values[c.index()];
            if !value.is_finite() {
                return Err(ModelError::NonFinite {
                    component: c,
                    value,
                });
            }
        }
        Ok(ComponentSet { values })
    }

    pub fn get(&self, c: Component) -> f64 {
        self.values[c.index()]
    }

    pub fn as_array(&self) -> [f64; 6] {
        self.values
    }

    pub fn force(&self) -> [f64; 3] {
        [self.values[0], self.values[1], self.values[2]]
    }

    pub fn moment(&self) -> [f64; 3] {
        [self.values[3], self.values[4], self.values[5]]
    }

    /// Applies `f` to every component. Fails if `f` produces a non-finite value.
    pub fn try_map(&self, mut f: impl FnMut(Component, f64) -> f64) -> Result<Self, ModelError> {
        let mut out = [0.0; 6];
        for c in Component::ALL {
            out[c.index()] = f(c, self.values[c.index()]);
        }
        Self::from_array(out)
    }
}

/// Projection of one component out of a [`ComponentSet`].
pub fn component_value(cs: &ComponentSet, c: Component) -> f64 {
    cs.get(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForceUnit {
    Newton,
    Kilonewton,
    PoundForce,
    KiloPoundForce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentUnit {
    NewtonMeter,
    KilonewtonMeter,
    PoundForceInch,
    KiloPoundForceInch,
}

// Closed alias tables. Anything else is rejected.
const FORCE_TOKENS: &[(&str, ForceUnit)] = &[
    ("N", ForceUnit::Newton),
    ("kN", ForceUnit::Kilonewton),
    ("lbf", ForceUnit::PoundForce),
    ("lbs", ForceUnit::PoundForce),
    ("klbf", ForceUnit::KiloPoundForce),
    ("klbs", ForceUnit::KiloPoundForce),
];

const MOMENT_TOKENS: &[(&str, MomentUnit)] = &[
    ("N·m", MomentUnit::NewtonMeter),
    ("N.m", MomentUnit::NewtonMeter),
    ("Nm", MomentUnit::NewtonMeter),
    ("kN·m", MomentUnit::KilonewtonMeter),
    ("kN.m", MomentUnit::KilonewtonMeter),
    ("kNm", MomentUnit::KilonewtonMeter),
    ("lbf·in", MomentUnit::PoundForceInch),
    ("lbf.in", MomentUnit::PoundForceInch),
    ("lbs.in", MomentUnit::PoundForceInch),
    ("klbf·in", MomentUnit::KiloPoundForceInch),
    ("klbf.in", MomentUnit::KiloPoundForceInch),
    ("klbs.in", MomentUnit::KiloPoundForceInch),
];

impl ForceUnit {
    pub fn token(self) -> &'static str {
        match self {
            ForceUnit::Newton => "N",
            ForceUnit::Kilonewton => "kN",
            ForceUnit::PoundForce => "lbf",
            ForceUnit::KiloPoundForce => "klbf",
        }
    }

    pub fn is_si(self) -> bool {
        matches!(self, ForceUnit::Newton | ForceUnit::Kilonewton)
    }
}

impl MomentUnit {
    pub fn token(self) -> &'static str {
        match self {
            MomentUnit::NewtonMeter => "N·m",
            MomentUnit::KilonewtonMeter => "kN·m",
            MomentUnit::PoundForceInch => "lbf·in",
            MomentUnit::KiloPoundForceInch => "klbf·in",
        }
    }

    pub fn is_si(self) -> bool {
        matches!(self, MomentUnit::NewtonMeter | MomentUnit::KilonewtonMeter)
    }
}

impl FromStr for ForceUnit {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        FORCE_TOKENS
            .iter()
            .find(|(tok, _)| *tok == s)
            .map(|(_, u)| *u)
            .ok_or_else(|| ModelError::UnknownForceUnit(s.to_string()))
    }
}

impl FromStr for MomentUnit {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        MOMENT_TOKENS
            .iter()
            .find(|(tok, _)| *tok == s)
            .map(|(_, u)| *u)
            .ok_or_else(|| ModelError::UnknownMomentUnit(s.to_string()))
    }
}

impl fmt::Display for ForceUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl fmt::Display for MomentUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UnitSystem {
    pub force: ForceUnit,
    pub moment: MomentUnit,
}

impl UnitSystem {
    pub const SI: UnitSystem = UnitSystem {
        force: ForceUnit::Newton,
        moment: MomentUnit::NewtonMeter,
    };

    pub const IMPERIAL_KIPS: UnitSystem = UnitSystem {
        force: ForceUnit::KiloPoundForce,
        moment: MomentUnit::KiloPoundForceInch,
    };

    pub fn new(force: ForceUnit, moment: MomentUnit) -> Self {
        UnitSystem { force, moment }
    }

    pub fn is_si(&self) -> bool {
        self.force.is_si() && self.moment.is_si()
    }

    /// Parses `"<force>,<moment>"`, e.g. `N,N·m` or `klbs,klbs.in`.
    pub fn parse_pair(s: &str) -> Result<Self, ModelError> {
        let (force, moment) = s
            .split_once(',')
            .ok_or_else(|| ModelError::UnknownForceUnit(s.to_string()))?;
        Ok(UnitSystem {
            force: force.parse()?,
            moment: moment.parse()?,
        })
    }
}

impl fmt::Display for UnitSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {}", self.force, self.moment)
    }
}

/// Point name to (x, y, z) in meters.
pub type PointCoordinates = BTreeMap<String, [f64; 3]>;

#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase {
    id: u32,
    label: Option<String>,
    loads: BTreeMap<String, ComponentSet>,
}

impl LoadCase {
    pub fn new(
        id: u32,
        label: Option<String>,
        loads: BTreeMap<String, ComponentSet>,
    ) -> Result<Self, ModelError> {
        if id == 0 {
            return Err(ModelError::ZeroCaseId);
        }
        if loads.is_empty() {
            return Err(ModelError::EmptyCase(id));
        }
        Ok(LoadCase { id, label, loads })
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn loads(&self) -> &BTreeMap<String, ComponentSet> {
        &self.loads
    }

    pub fn load(&self, point: &str) -> Option<&ComponentSet> {
        self.loads.get(point)
    }

    pub(crate) fn with_loads(&self, loads: BTreeMap<String, ComponentSet>) -> LoadCase {
        LoadCase {
            id: self.id,
            label: self.label.clone(),
            loads,
        }
    }
}

/// An OEM load delivery: ordered load cases over a fixed set of interface points.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadsDelivery {
    pub(crate) name: String,
    pub(crate) version: u32,
    pub(crate) units: UnitSystem,
    pub(crate) coordinate_system: Option<String>,
    pub(crate) point_coordinates: Option<PointCoordinates>,
    pub(crate) cases: Vec<LoadCase>,
}

impl LoadsDelivery {
    /// Builds a delivery and rejects it unless every delivery invariant holds
    /// (see [`crate::ingest::validate_delivery`]).
    pub fn new(
        name: impl Into<String>,
        version: u32,
        units: UnitSystem,
        coordinate_system: Option<String>,
        point_coordinates: Option<PointCoordinates>,
        cases: Vec<LoadCase>,
    ) -> Result<Self, ModelError> {
        let d = Self::new_unvalidated(
            name,
            version,
            units,
            coordinate_system,
            point_coordinates,
            cases,
        )?;
        let report = crate::ingest::validate_delivery(&d);
        if !report.ok {
            let msg = report
                .errors()
                .map(|f| format!("{} at {}: {}", f.code, f.location, f.message))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(ModelError::Invalid(msg));
        }
        Ok(d)
    }

    /// Builds a delivery enforcing only per-value invariants (finite numbers,
    /// positive ids). Cross-case consistency is left to
    /// [`crate::ingest::validate_delivery`], which reports instead of refusing.
    pub fn new_unvalidated(
        name: impl Into<String>,
        version: u32,
        units: UnitSystem,
        coordinate_system: Option<String>,
        point_coordinates: Option<PointCoordinates>,
        cases: Vec<LoadCase>,
    ) -> Result<Self, ModelError> {
        if let Some(coords) = &point_coordinates {
            for (point, xyz) in coords {
                if xyz.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::NonFiniteCoordinate {
                        point: point.clone(),
                    });
                }
            }
        }
        Ok(LoadsDelivery {
            name: name.into(),
            version,
            units,
            coordinate_system,
            point_coordinates,
            cases,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn units(&self) -> UnitSystem {
        self.units
    }

    pub fn coordinate_system(&self) -> Option<&str> {
        self.coordinate_system.as_deref()
    }

    pub fn point_coordinates(&self) -> Option<&PointCoordinates> {
        self.point_coordinates.as_ref()
    }

    pub fn cases(&self) -> &[LoadCase] {
        &self.cases
    }

    pub fn case(&self, id: u32) -> Option<&LoadCase> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn case_ids(&self) -> Vec<u32> {
        self.cases.iter().map(|c| c.id).collect()
    }

    /// Sorted, de-duplicated point names over all cases.
    pub fn point_names(&self) -> Vec<String> {
        point_names(self)
    }

    /// Same delivery restricted to the given case ids, delivery order kept.
    pub fn restrict_to(&self, ids: &[u32]) -> LoadsDelivery {
        let keep: BTreeSet<u32> = ids.iter().copied().collect();
        LoadsDelivery {
            cases: self
                .cases
                .iter()
                .filter(|c| keep.contains(&c.id))
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// Applies `f` to every component of every point in every case.
    pub(crate) fn try_map_values(
        &self,
        mut f: impl FnMut(Component, f64) -> f64,
    ) -> Result<LoadsDelivery, ModelError> {
        let mut cases = Vec::with_capacity(self.cases.len());
        for case in &self.cases {
            let mut loads = BTreeMap::new();
            for (point, cs) in &case.loads {
                loads.insert(point.clone(), cs.try_map(&mut f)?);
            }
            cases.push(case.with_loads(loads));
        }
        Ok(LoadsDelivery {
            cases,
            ..self.clone()
        })
    }
}

/// Lexicographically sorted unique point names of a delivery.
pub fn point_names(d: &LoadsDelivery) -> Vec<String> {
    let set: BTreeSet<&String> = d.cases.iter().flat_map(|c| c.loads.keys()).collect();
    set.into_iter().cloned().collect()
}

/// Max and min of one (point, component) cell with the case that produced each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremeCell {
    pub max: f64,
    pub max_case: u32,
    pub min: f64,
    pub min_case: u32,
}

/// Per (point, component) extremes of a delivery, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeExtremes {
    pub name: String,
    pub version: u32,
    pub units: UnitSystem,
    pub cells: BTreeMap<String, BTreeMap<Component, ExtremeCell>>,
}

impl EnvelopeExtremes {
    pub fn cell(&self, point: &str, c: Component) -> Option<&ExtremeCell> {
        self.cells.get(point).and_then(|m| m.get(&c))
    }

    /// Iterates cells in point-lexicographic, component-canonical order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (&str, Component, &ExtremeCell)> {
        self.cells
            .iter()
            .flat_map(|(p, m)| m.iter().map(move |(c, cell)| (p.as_str(), *c, cell)))
    }

    pub fn point_names(&self) -> Vec<String> {
        self.cells.keys().cloned().collect()
    }
}
