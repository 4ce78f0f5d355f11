//! Python bindings: deliveries, transforms, envelope selection, deck export,
//! envelope comparison and pass^k arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use loadsmith::analysis::{check_equilibrium_all, envelope_extremes, envelope_select, Tolerance};
use loadsmith::compare::{compare_envelopes, comparison_to_markdown, write_comparison_report};
use loadsmith::evalkit::{generate_fixture_with, min_k_for, pass_lower_bound, FixtureSpec};
use loadsmith::export::{
    envelope_to_markdown, export_all_inp, read_envelope_json, write_ansys_inp, write_envelope_json,
    NodeMap,
};
use loadsmith::ingest::{
    read_delivery, validate_delivery, write_delivery_json, write_delivery_yaml,
};
use loadsmith::transform::{apply_ultimate_factor, convert_units, rename_points, scale_component};
use loadsmith::{Component, EnvelopeExtremes, LoadsDelivery, UnitSystem};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(loadsmith, LoadsmithError, PyValueError);

fn err(e: impl ToString) -> PyErr {
    LoadsmithError::new_err(e.to_string())
}

fn json_to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

fn component(label: &str) -> PyResult<Component> {
    label.to_ascii_uppercase().parse().map_err(err)
}

/// A validated loads delivery.
#[pyclass(name = "Delivery", module = "loadsmith", frozen)]
pub struct PyDelivery(LoadsDelivery);

#[pymethods]
impl PyDelivery {
    /// Parses JSON or YAML text (format detected from the first character).
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        read_delivery(text).map(PyDelivery).map_err(err)
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        let text =
            std::fs::read_to_string(&path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.name().to_string()
    }

    #[getter]
    fn version(&self) -> u32 {
        self.0.version()
    }

    /// `(force, moment)` unit tokens.
    #[getter]
    fn units(&self) -> (String, String) {
        let u = self.0.units();
        (u.force.token().to_string(), u.moment.token().to_string())
    }

    #[getter]
    fn case_ids(&self) -> Vec<u32> {
        self.0.case_ids()
    }

    #[getter]
    fn point_names(&self) -> Vec<String> {
        self.0.point_names()
    }

    /// Value of one component, e.g. `d.value(2, "lpt", "FX")`.
    fn value(&self, case_id: u32, point: &str, component_label: &str) -> PyResult<f64> {
        let c = component(component_label)?;
        self.0
            .case(case_id)
            .and_then(|case| case.load(point))
            .map(|cs| cs.get(c))
            .ok_or_else(|| err(format!("no load for case {case_id} at point `{point}`")))
    }

    fn to_json(&self) -> String {
        write_delivery_json(&self.0)
    }

    fn to_yaml(&self) -> String {
        write_delivery_yaml(&self.0)
    }

    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &validate_delivery(&self.0).to_json())
    }

    /// Returns `(renamed, rename_count)`.
    fn rename_points(&self, mapping: BTreeMap<String, String>) -> PyResult<(Self, usize)> {
        rename_points(&self.0, &mapping)
            .map(|(d, n)| (PyDelivery(d), n))
            .map_err(err)
    }

    fn scale_component(&self, component_label: &str, factor: f64) -> PyResult<Self> {
        scale_component(&self.0, component(component_label)?, factor)
            .map(PyDelivery)
            .map_err(err)
    }

    #[pyo3(signature = (factor = 1.5))]
    fn apply_ultimate_factor(&self, factor: f64) -> PyResult<Self> {
        apply_ultimate_factor(&self.0, factor)
            .map(PyDelivery)
            .map_err(err)
    }

    /// Target units as `"force,moment"`, e.g. `"N,N·m"`.
    fn convert_units(&self, units: &str) -> PyResult<Self> {
        let target = UnitSystem::parse_pair(units).map_err(err)?;
        convert_units(&self.0, target).map(PyDelivery).map_err(err)
    }

    #[pyo3(signature = (abs_tol = 1e-9, rel_tol = 1e-3))]
    fn check_equilibrium<'py>(
        &self,
        py: Python<'py>,
        abs_tol: f64,
        rel_tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let tol = Tolerance {
            abs: abs_tol,
            rel: rel_tol,
        };
        let summary =
            check_equilibrium_all(&self.0, self.0.point_coordinates(), tol).map_err(err)?;
        json_to_py(py, &serde_json::to_string(&summary).map_err(err)?)
    }

    fn envelope_select(&self) -> Vec<u32> {
        envelope_select(&self.0).selected_case_ids
    }

    fn envelope(&self) -> PyEnvelope {
        PyEnvelope(envelope_extremes(&self.0))
    }

    /// Deck text of one case.
    #[pyo3(signature = (case_id, node_map, exclude = Vec::new()))]
    fn ansys_deck(
        &self,
        case_id: u32,
        node_map: BTreeMap<String, u32>,
        exclude: Vec<String>,
    ) -> PyResult<String> {
        let case = self
            .0
            .case(case_id)
            .ok_or_else(|| err(format!("case {case_id} is not in the delivery")))?;
        let nodes = NodeMap::new(node_map).map_err(err)?;
        write_ansys_inp(case, &nodes, &exclude.into_iter().collect()).map_err(err)
    }

    /// Writes `limit_load_<id>.inp` files and returns their paths.
    #[pyo3(signature = (selected, node_map, out_dir, exclude = Vec::new()))]
    fn export_ansys(
        &self,
        selected: Vec<u32>,
        node_map: BTreeMap<String, u32>,
        out_dir: PathBuf,
        exclude: Vec<String>,
    ) -> PyResult<Vec<PathBuf>> {
        let nodes = NodeMap::new(node_map).map_err(err)?;
        let exclude: BTreeSet<String> = exclude.into_iter().collect();
        std::fs::create_dir_all(&out_dir).map_err(err)?;
        export_all_inp(&self.0, &selected, &nodes, &exclude, &out_dir).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.0.cases().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Delivery(name={:?}, version={}, cases={}, points={})",
            self.0.name(),
            self.0.version(),
            self.0.cases().len(),
            self.0.point_names().len()
        )
    }

    fn __eq__(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

/// Per (point, component) max and min with originating case ids.
#[pyclass(name = "Envelope", module = "loadsmith", frozen)]
pub struct PyEnvelope(EnvelopeExtremes);

#[pymethods]
impl PyEnvelope {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        read_envelope_json(text).map(PyEnvelope).map_err(err)
    }

    fn to_json(&self) -> String {
        write_envelope_json(&self.0)
    }

    fn to_markdown(&self) -> String {
        envelope_to_markdown(&self.0)
    }

    /// `{"max", "max_case", "min", "min_case"}` of one cell.
    fn cell<'py>(
        &self,
        py: Python<'py>,
        point: &str,
        component_label: &str,
    ) -> PyResult<Bound<'py, PyAny>> {
        let c = component(component_label)?;
        let cell = self
            .0
            .cell(point, c)
            .ok_or_else(|| err(format!("no cell {point}/{component_label}")))?;
        json_to_py(py, &serde_json::to_string(cell).map_err(err)?)
    }

    /// Comparison report of `self` (new) against `old`, as a dict.
    #[pyo3(signature = (old, widen_tol = 0.0))]
    fn compare<'py>(
        &self,
        py: Python<'py>,
        old: &PyEnvelope,
        widen_tol: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let report = compare_envelopes(&self.0, &old.0, widen_tol).map_err(err)?;
        json_to_py(py, &write_comparison_report(&report))
    }

    #[pyo3(signature = (old, widen_tol = 0.0))]
    fn compare_markdown(&self, old: &PyEnvelope, widen_tol: f64) -> PyResult<String> {
        let report = compare_envelopes(&self.0, &old.0, widen_tol).map_err(err)?;
        Ok(comparison_to_markdown(&report))
    }
}

#[pyfunction(name = "min_k_for")]
#[pyo3(signature = (p, alpha = 0.05))]
fn py_min_k_for(p: f64, alpha: f64) -> PyResult<u32> {
    min_k_for(p, alpha).map_err(err)
}

#[pyfunction(name = "pass_lower_bound")]
#[pyo3(signature = (k, alpha = 0.05))]
fn py_pass_lower_bound(k: u32, alpha: f64) -> PyResult<f64> {
    pass_lower_bound(k, alpha).map_err(err)
}

/// Seeded synthetic delivery whose envelope selects exactly `n_critical` cases.
#[pyfunction]
#[pyo3(signature = (seed, n_cases, points, n_critical, balanced = false))]
fn generate_fixture(
    seed: u64,
    n_cases: u32,
    points: Vec<String>,
    n_critical: u32,
    balanced: bool,
) -> PyResult<PyDelivery> {
    let names: Vec<&str> = points.iter().map(String::as_str).collect();
    let spec = FixtureSpec {
        balanced,
        ..FixtureSpec::new(seed, n_cases, &names, n_critical)
    };
    generate_fixture_with(&spec).map(PyDelivery).map_err(err)
}

#[pymodule]
#[pyo3(name = "loadsmith")]
fn loadsmith_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDelivery>()?;
    m.add_class::<PyEnvelope>()?;
    m.add_function(wrap_pyfunction!(py_min_k_for, m)?)?;
    m.add_function(wrap_pyfunction!(py_pass_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(generate_fixture, m)?)?;
    m.add("LoadsmithError", m.py().get_type::<LoadsmithError>())?;
    Ok(())
}
