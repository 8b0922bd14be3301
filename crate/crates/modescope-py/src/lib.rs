//! Python bindings. Results of the composite procedures are returned as
//! JSON strings in the same `modescope/1` payload shapes the CLI emits, so
//! Python callers can `json.loads` them without a schema translation layer.

use modescope::error::Error;
use modescope::geometry::{build_grid, Grid, Point, Sample, ScaleParams};
use modescope::inference::{self, ProcedureConfig, ThresholdMode, WedgeFamily};
use modescope::nullsim::{NullConfig, NullFlavor};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_point(coords: Vec<f64>) -> PyResult<Point> {
    Point::new(coords).map_err(err)
}

fn to_box(b: Option<(Vec<f64>, Vec<f64>)>) -> PyResult<Option<(Point, Point)>> {
    b.map(|(l, u)| Ok::<_, PyErr>((to_point(l)?, to_point(u)?))).transpose()
}

/// An immutable point sample.
#[pyclass(name = "Sample")]
#[derive(Clone)]
struct PySample {
    inner: Sample,
}

#[pymethods]
impl PySample {
    #[new]
    fn new(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let points = points.into_iter().map(Point::new).collect::<Result<Vec<_>, _>>().map_err(err)?;
        Ok(PySample { inner: Sample::new(points).map_err(err)? })
    }

    /// Parses comma- or whitespace-separated rows, like the CLI input.
    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        Ok(PySample { inner: modescope::io::parse_points_str(text).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let (l, u) = self.inner.bounding_box();
        (l.coords, u.coords)
    }
}

/// A wedge shape (length, half-opening angle, direction set).
#[pyclass(name = "WedgeFamily")]
#[derive(Clone)]
struct PyWedgeFamily {
    inner: WedgeFamily,
}

#[pymethods]
impl PyWedgeFamily {
    /// Derives length, angle, and directions from the sample-size rule.
    #[staticmethod]
    #[pyo3(signature = (n, d, c1=2.0, c2=9.65, epsilon=0.01))]
    fn from_scales(n: usize, d: usize, c1: f64, c2: f64, epsilon: f64) -> PyResult<Self> {
        let params = ScaleParams::new(c1, c2, epsilon, n, d).map_err(err)?;
        Ok(PyWedgeFamily { inner: WedgeFamily::from_scales(&params).map_err(err)? })
    }

    #[staticmethod]
    fn explicit(length: f64, angle: f64, directions: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyWedgeFamily { inner: WedgeFamily::explicit(length, angle, directions).map_err(err)? })
    }

    #[getter]
    fn length(&self) -> f64 {
        self.inner.length
    }

    #[getter]
    fn angle(&self) -> f64 {
        self.inner.angle
    }

    #[getter]
    fn directions(&self) -> Vec<Vec<f64>> {
        self.inner.directions.clone()
    }
}

/// An axis-aligned equidistant grid.
#[pyclass(name = "Grid")]
#[derive(Clone)]
struct PyGrid {
    inner: Grid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(lower: Vec<f64>, upper: Vec<f64>, mesh: f64) -> PyResult<Self> {
        Ok(PyGrid { inner: build_grid(to_point(lower)?, to_point(upper)?, mesh).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn vertices(&self) -> Vec<Vec<f64>> {
        self.inner.vertices().into_iter().map(|p| p.coords).collect()
    }
}

fn config(
    alpha: f64,
    calibrated: bool,
    reps: usize,
    seed: u64,
    reference_box: Option<(Point, Point)>,
    max_scales: Option<usize>,
) -> ProcedureConfig {
    ProcedureConfig {
        alpha,
        mode: if calibrated { ThresholdMode::Calibrated } else { ThresholdMode::Raw },
        reps,
        seed,
        reference_box,
        max_scales,
    }
}

/// Local mode test at `x0`; returns the result as a JSON string.
#[pyfunction]
#[pyo3(signature = (sample, x0, family, seed, alpha=0.05, calibrated=false, reps=1000, reference_box=None))]
#[allow(clippy::too_many_arguments)]
fn local_mode_test(
    sample: &PySample,
    x0: Vec<f64>,
    family: &PyWedgeFamily,
    seed: u64,
    alpha: f64,
    calibrated: bool,
    reps: usize,
    reference_box: Option<(Vec<f64>, Vec<f64>)>,
) -> PyResult<String> {
    let cfg = config(alpha, calibrated, reps, seed, to_box(reference_box)?, None);
    let result = inference::local_mode_test(&sample.inner, &to_point(x0)?, &family.inner, &cfg)
        .map_err(err)?;
    json(&result)
}

/// Global monotonicity map over a grid; returns JSON.
#[pyfunction]
#[pyo3(signature = (sample, grid, family, seed, alpha=0.05, use_subsections=false, reps=1000, max_scales=None))]
#[allow(clippy::too_many_arguments)]
fn monotonicity_map(
    sample: &PySample,
    grid: &PyGrid,
    family: &PyWedgeFamily,
    seed: u64,
    alpha: f64,
    use_subsections: bool,
    reps: usize,
    max_scales: Option<usize>,
) -> PyResult<String> {
    let cfg = config(alpha, false, reps, seed, None, max_scales);
    let map =
        inference::monotonicity_map(&sample.inner, &grid.inner, &family.inner, use_subsections, &cfg)
            .map_err(err)?;
    json(&map)
}

/// Renders a map (as returned by `monotonicity_map`) to an SVG string.
#[pyfunction]
fn render_map_svg(map_json: &str) -> PyResult<String> {
    let map: inference::MonotonicityMap =
        serde_json::from_str(map_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    modescope::io::render_map_to_string(&map).map_err(err)
}

/// Grid-wide mode detection; returns JSON with the flagged vertices.
#[pyfunction]
#[pyo3(signature = (sample, grid, family, seed, alpha=0.05, calibrated=false, reps=1000, reference_box=None))]
#[allow(clippy::too_many_arguments)]
fn detect_modes(
    sample: &PySample,
    grid: &PyGrid,
    family: &PyWedgeFamily,
    seed: u64,
    alpha: f64,
    calibrated: bool,
    reps: usize,
    reference_box: Option<(Vec<f64>, Vec<f64>)>,
) -> PyResult<String> {
    let cfg = config(alpha, calibrated, reps, seed, to_box(reference_box)?, None);
    let det = inference::detect_modes(&sample.inner, &grid.inner, &family.inner, &cfg).map_err(err)?;
    json(&det)
}

/// Simulated null quantile for the given wedge counts; returns (kappa, JSON).
#[pyfunction]
#[pyo3(signature = (counts, n, seed, alpha=0.05, reps=1000, flavor="two_sided", max_scales=None))]
fn simulate_null(
    counts: Vec<usize>,
    n: usize,
    seed: u64,
    alpha: f64,
    reps: usize,
    flavor: &str,
    max_scales: Option<usize>,
) -> PyResult<(f64, String)> {
    let flavor = match flavor {
        "two_sided" => NullFlavor::TwoSidedWedge,
        "one_sided" => NullFlavor::OneSidedWedge,
        "multiscale" => NullFlavor::MultiscaleSubsections,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown flavor '{other}' (two_sided, one_sided, multiscale)"
            )))
        }
    };
    let q = modescope::nullsim::simulate_null(&NullConfig {
        counts,
        n,
        alpha,
        reps,
        seed,
        flavor,
        max_scales,
    })
    .map_err(err)?;
    Ok((q.kappa, json(&q)?))
}

/// Quantile of the one-dimensional multiscale spacing statistic.
#[pyfunction]
#[pyo3(signature = (n, seed, alpha=0.05, reps=1000))]
fn univariate_quantile(n: usize, seed: u64, alpha: f64, reps: usize) -> PyResult<f64> {
    modescope::univariate::univariate_quantile(n, alpha, reps, seed).map_err(err)
}

#[pyfunction]
fn beta(z: f64) -> f64 {
    modescope::statistics::beta(z)
}

#[pyfunction]
fn gamma_penalty(delta: f64) -> PyResult<f64> {
    modescope::statistics::gamma_penalty(delta).map_err(err)
}

#[pyfunction]
fn critical_value(span: usize, n: usize, kappa: f64) -> PyResult<f64> {
    inference::critical_value(span, n, kappa).map_err(err)
}

/// Closed-form guidance constants: returns (D, lower bound on C1^{d+4} C2^{d-1}).
#[pyfunction]
fn theory_constants(d: usize, j: usize, c: f64, f_at_mode: f64) -> PyResult<(f64, f64)> {
    let t = inference::theory_constants(d, j, c, f_at_mode).map_err(err)?;
    Ok((t.d_value, t.c_bound))
}

#[pymodule]
fn modescope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySample>()?;
    m.add_class::<PyWedgeFamily>()?;
    m.add_class::<PyGrid>()?;
    m.add_function(wrap_pyfunction!(local_mode_test, m)?)?;
    m.add_function(wrap_pyfunction!(monotonicity_map, m)?)?;
    m.add_function(wrap_pyfunction!(render_map_svg, m)?)?;
    m.add_function(wrap_pyfunction!(detect_modes, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_null, m)?)?;
    m.add_function(wrap_pyfunction!(univariate_quantile, m)?)?;
    m.add_function(wrap_pyfunction!(beta, m)?)?;
    m.add_function(wrap_pyfunction!(gamma_penalty, m)?)?;
    m.add_function(wrap_pyfunction!(critical_value, m)?)?;
    m.add_function(wrap_pyfunction!(theory_constants, m)?)?;
    Ok(())
}
