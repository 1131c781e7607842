//! Python bindings: `import hyperspecifics`.

use std::collections::BTreeSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use hsp_core::classify::{self, CommunityConfig};
use hsp_core::registry::{self, RoaRecord};
use hsp_core::route::format_as_path;
use hsp_core::timeline::{self, ObservationWindow};
use hsp_core::{mrt, Community, Family, RecordKind, RouteRecord, Timestamp};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_prefix(text: &str) -> PyResult<hsp_core::Prefix> {
    text.parse().map_err(value_error)
}

/// An IPv4 or IPv6 prefix in canonical form.
#[pyclass(frozen, eq, ord, skip_from_py_object, module = "hyperspecifics")]
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Prefix(hsp_core::Prefix);

#[pymethods]
impl Prefix {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_prefix(text).map(Prefix)
    }

    #[getter]
    fn family(&self) -> u8 {
        self.0.family().number()
    }

    #[getter]
    fn length(&self) -> u8 {
        self.0.len()
    }

    #[getter]
    fn is_hyper_specific(&self) -> bool {
        self.0.is_hyper_specific()
    }

    /// The covering /24 or /48. Raises ValueError for non-HSPs.
    fn anchor(&self) -> PyResult<Prefix> {
        self.0.anchor().map(Prefix).map_err(value_error)
    }

    fn contains(&self, other: &Prefix) -> bool {
        self.0.contains(&other.0)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Prefix('{}')", self.0)
    }

    fn __hash__(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.0.hash(&mut h);
        h.finish()
    }
}

#[pyfunction]
fn is_hyper_specific(prefix: &str) -> PyResult<bool> {
    Ok(parse_prefix(prefix)?.is_hyper_specific())
}

/// Use-case bucket name of an HSP, e.g. "TrafficEngineering".
#[pyfunction]
fn cidr_bucket(prefix: &str) -> PyResult<&'static str> {
    classify::cidr_bucket(&parse_prefix(prefix)?).map(|h| h.as_str()).map_err(value_error)
}

/// Labels for a list of `(asn, value)` communities, in label order.
#[pyfunction]
#[pyo3(signature = (communities, x666_heuristic = true))]
fn classify_communities(communities: Vec<(u16, u16)>, x666_heuristic: bool) -> Vec<&'static str> {
    let cfg = CommunityConfig { x666_heuristic, ..CommunityConfig::default() };
    let comms: Vec<Community> = communities.into_iter().map(|(a, v)| Community(a, v)).collect();
    classify::classify_communities(&comms, &cfg).iter().map(|l| l.as_str()).collect()
}

#[pyfunction]
fn relative_hit_rate_diff(scope: f64, baseline: f64) -> PyResult<f64> {
    classify::relative_hit_rate_diff(scope, baseline).map_err(|_| PyValueError::new_err("baseline hit rate is zero"))
}

/// Validated ROA payloads indexed for origin validation.
#[pyclass(module = "hyperspecifics")]
#[derive(Default)]
struct RoaSet(registry::RoaSet);

#[pymethods]
impl RoaSet {
    #[new]
    fn new() -> Self {
        RoaSet::default()
    }

    /// Reads `prefix,max_length,asn[,date]` rows.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        let roas = registry::parse_roa_csv(text).map_err(value_error)?;
        Ok(RoaSet(roas.into_iter().collect()))
    }

    fn add(&mut self, prefix: &str, max_length: u8, asn: u32) -> PyResult<()> {
        self.0.insert(RoaRecord::new(parse_prefix(prefix)?, max_length, asn).map_err(value_error)?);
        Ok(())
    }

    /// One of Valid, InvalidLength, InvalidOrigin, InvalidBoth, NotFound.
    fn validate(&self, prefix: &str, origin: u32) -> PyResult<&'static str> {
        Ok(self.0.validate(&parse_prefix(prefix)?, origin).as_str())
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

/// route/route6 objects as `(prefix, origin, source)` tuples.
#[pyfunction]
fn parse_rpsl(text: &str) -> Vec<(String, u32, String)> {
    registry::parse_rpsl(text, None).objects.into_iter().map(|o| (o.prefix.to_string(), o.origin_asn, o.source)).collect()
}

/// A decoded route record.
#[pyclass(frozen, module = "hyperspecifics")]
struct Record(RouteRecord);

#[pymethods]
impl Record {
    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind.as_str()
    }

    #[getter]
    fn timestamp(&self) -> f64 {
        self.0.timestamp.0 as f64 / 1e6
    }

    #[getter]
    fn peer_asn(&self) -> u32 {
        self.0.peer_asn
    }

    #[getter]
    fn peer_address(&self) -> String {
        self.0.peer_address.to_string()
    }

    #[getter]
    fn prefix(&self) -> Prefix {
        Prefix(self.0.prefix)
    }

    #[getter]
    fn as_path(&self) -> String {
        format_as_path(&self.0.as_path)
    }

    #[getter]
    fn origin_asn(&self) -> Option<u32> {
        self.0.origin_asn()
    }

    #[getter]
    fn communities(&self) -> Vec<(u16, u16)> {
        self.0.communities.iter().map(|c| (c.0, c.1)).collect()
    }

    #[getter]
    fn aggregator_asn(&self) -> Option<u32> {
        self.0.aggregator.map(|a| a.asn)
    }

    #[getter]
    fn atomic_aggregate(&self) -> bool {
        self.0.atomic_aggregate
    }

    fn __repr__(&self) -> String {
        format!("Record({} {} AS{} [{}])", self.0.kind.as_str(), self.0.prefix, self.0.peer_asn, format_as_path(&self.0.as_path))
    }
}

/// Decodes a complete MRT buffer. Returns `(records, malformed)`; a
/// truncated tail raises ValueError.
#[pyfunction]
#[pyo3(signature = (data, collector = "default"))]
fn decode_mrt(py: Python<'_>, data: &[u8], collector: &str) -> PyResult<(Vec<Record>, u64)> {
    let out = py.detach(|| mrt::decode_mrt(data, collector));
    if let Some(e) = out.error {
        return Err(value_error(e));
    }
    Ok((out.records.into_iter().map(Record).collect(), out.stats.malformed))
}

/// Replays RIB entries and updates over `[start, end)` (Unix seconds) and
/// returns `{prefix: (visibility, consistency)}`.
#[pyfunction]
fn replay<'py>(py: Python<'py>, records: Vec<PyRef<'py, Record>>, start: u64, end: u64) -> PyResult<Bound<'py, PyDict>> {
    let window = ObservationWindow::new(Timestamp::from_secs(start), Timestamp::from_secs(end)).map_err(value_error)?;
    let (ribs, mut updates): (Vec<RouteRecord>, Vec<RouteRecord>) =
        records.iter().map(|r| r.0.clone()).partition(|r| r.kind == RecordKind::RibEntry);
    updates.sort_by_key(|r| r.timestamp);
    let out = timeline::replay(&ribs, &updates, window).map_err(value_error)?;
    let dict = PyDict::new(py);
    for s in timeline::prefix_stats(&out.intervals, &window) {
        dict.set_item(s.prefix.to_string(), (s.visibility, s.consistency))?;
    }
    Ok(dict)
}

/// Window consistency over daily sets of prefix strings.
#[pyfunction]
fn window_consistency<'py>(py: Python<'py>, daily: Vec<BTreeSet<String>>, w: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = timeline::window_consistency(&daily, w).map_err(value_error)?;
    let dict = PyDict::new(py);
    dict.set_item("w", r.w)?;
    dict.set_item("fractions", r.fractions)?;
    dict.set_item("skipped", r.skipped)?;
    dict.set_item("mean", r.mean)?;
    dict.set_item("q25", r.q25)?;
    dict.set_item("q75", r.q75)?;
    Ok(dict)
}

#[pyfunction]
fn hsp_boundary(family: u8) -> PyResult<u8> {
    match family {
        4 => Ok(Family::V4.hsp_boundary()),
        6 => Ok(Family::V6.hsp_boundary()),
        _ => Err(PyValueError::new_err("family must be 4 or 6")),
    }
}

#[pymodule]
fn hyperspecifics(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Prefix>()?;
    m.add_class::<RoaSet>()?;
    m.add_class::<Record>()?;
    m.add_function(wrap_pyfunction!(is_hyper_specific, m)?)?;
    m.add_function(wrap_pyfunction!(hsp_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(cidr_bucket, m)?)?;
    m.add_function(wrap_pyfunction!(classify_communities, m)?)?;
    m.add_function(wrap_pyfunction!(relative_hit_rate_diff, m)?)?;
    m.add_function(wrap_pyfunction!(parse_rpsl, m)?)?;
    m.add_function(wrap_pyfunction!(decode_mrt, m)?)?;
    m.add_function(wrap_pyfunction!(replay, m)?)?;
    m.add_function(wrap_pyfunction!(window_consistency, m)?)?;
    Ok(())
}
