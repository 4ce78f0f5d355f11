//! Deterministic structural loads processing: ingest OEM deliveries,
//! transform them, select the critical envelope, export solver decks, compare
//! against a previous envelope, and evaluate pipelines with pass^k statistics.

pub mod analysis;
pub mod compare;
pub mod docserver;
pub mod evalkit;
pub mod export;
pub mod ingest;
pub mod model;
pub mod transform;

pub use model::{
    component_value, point_names, Component, ComponentSet, EnvelopeExtremes, ExtremeCell,
    ForceUnit, LoadCase, LoadsDelivery, ModelError, MomentUnit, PointCoordinates, UnitSystem,
};
