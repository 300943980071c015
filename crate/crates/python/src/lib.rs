//! Python bindings. Arrays cross the boundary as sequences of triples, so
//! NumPy `(n, 3)` arrays and plain lists both work.

use std::collections::HashMap;

use pyo3::exceptions::{PyFileNotFoundError, PyValueError};
use pyo3::prelude::*;

use watertight::geom::Vec3;
use watertight::mesh_io::{self, Format, IoError, PointCloud, TriangleSoup};
use watertight::pipeline::{self, PipelineError};
use watertight::validate as checks;

fn to_py(e: PipelineError) -> PyErr {
    match e {
        PipelineError::Io(IoError::FileNotFound(p)) => PyFileNotFoundError::new_err(p.display().to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn io_to_py(e: IoError) -> PyErr {
    to_py(PipelineError::Io(e))
}

fn vecs(rows: Vec<[f64; 3]>) -> Vec<Vec3> {
    rows.into_iter().map(Vec3::from).collect()
}

type Row = (f64, f64, f64);

fn rows(v: &[Vec3]) -> Vec<Row> {
    v.iter().map(|p| (p.x, p.y, p.z)).collect()
}

#[pyclass(name = "RemeshConfig", from_py_object)]
#[derive(Clone)]
struct PyRemeshConfig {
    inner: pipeline::RemeshConfig,
}

#[pymethods]
impl PyRemeshConfig {
    #[new]
    #[pyo3(signature = (depth=8, sharp=true, sharp_threshold=1.0, max_passes=50, seed=0, samples=0, optimize=true))]
    fn new(
        depth: u32,
        sharp: bool,
        sharp_threshold: f64,
        max_passes: usize,
        seed: u64,
        samples: usize,
        optimize: bool,
    ) -> PyResult<Self> {
        if !(1..=14).contains(&depth) {
            return Err(PyValueError::new_err("depth must be in 1..=14"));
        }
        Ok(PyRemeshConfig {
            inner: pipeline::RemeshConfig { depth, sharp, sharp_threshold, max_passes, seed, samples, optimize },
        })
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.inner.depth
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "ValidationReport", frozen, skip_from_py_object)]
struct PyValidationReport {
    #[pyo3(get)]
    boundary_edges: usize,
    #[pyo3(get)]
    nonmanifold_edges: usize,
    #[pyo3(get)]
    nonmanifold_vertices: usize,
    #[pyo3(get)]
    inversions: usize,
    #[pyo3(get)]
    misoriented_edges: usize,
    #[pyo3(get)]
    is_watertight_manifold: bool,
}

impl From<&checks::ValidationReport> for PyValidationReport {
    fn from(v: &checks::ValidationReport) -> Self {
        PyValidationReport {
            boundary_edges: v.boundary_edge_count,
            nonmanifold_edges: v.nonmanifold_edge_count,
            nonmanifold_vertices: v.nonmanifold_vertex_count,
            inversions: v.inversion_count,
            misoriented_edges: v.misoriented_edge_count,
            is_watertight_manifold: v.is_watertight_manifold,
        }
    }
}

#[pymethods]
impl PyValidationReport {
    fn __repr__(&self) -> String {
        format!(
            "ValidationReport(watertight_manifold={}, boundary={}, nm_edges={}, nm_vertices={}, inversions={})",
            self.is_watertight_manifold, self.boundary_edges, self.nonmanifold_edges, self.nonmanifold_vertices, self.inversions
        )
    }
}

#[pyclass(name = "RemeshResult", frozen, skip_from_py_object)]
struct PyRemeshResult {
    inner: pipeline::RemeshResult,
}

#[pymethods]
impl PyRemeshResult {
    /// Output vertices in the input's frame.
    #[getter]
    fn vertices(&self) -> Vec<Row> {
        rows(&self.inner.world_vertices())
    }

    #[getter]
    fn faces(&self) -> Vec<[u32; 3]> {
        self.inner.faces.clone()
    }

    /// Per-vertex normals certifying the output is inversion-free.
    #[getter]
    fn normals(&self) -> Vec<Row> {
        rows(&self.inner.normals)
    }

    #[getter]
    fn validation(&self) -> PyValidationReport {
        (&self.inner.validation).into()
    }

    #[getter]
    fn voxel_size(&self) -> f64 {
        self.inner.voxel_size()
    }

    /// Report values as strings, keyed like the CLI's `--metrics` output.
    fn metrics(&self) -> HashMap<String, String> {
        self.inner.metrics().into_iter().collect()
    }

    /// Writes OBJ, OFF or PLY by extension.
    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        let r = &self.inner;
        mesh_io::save_mesh(&r.vertices, &r.faces, Some(&r.normals), &r.transform, path, Format::Auto).map_err(io_to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "RemeshResult(vertices={}, faces={}, watertight_manifold={})",
            self.inner.vertices.len(),
            self.inner.faces.len(),
            self.inner.validation.is_watertight_manifold
        )
    }
}

fn config_or_default(config: Option<PyRemeshConfig>) -> pipeline::RemeshConfig {
    config.map(|c| c.inner).unwrap_or(pipeline::RemeshConfig { samples: 0, ..Default::default() })
}

/// Remeshes a triangle soup given as vertex rows and index triples.
#[pyfunction]
#[pyo3(signature = (vertices, faces, config=None))]
fn remesh(
    py: Python<'_>,
    vertices: Vec<[f64; 3]>,
    faces: Vec<[u32; 3]>,
    config: Option<PyRemeshConfig>,
) -> PyResult<PyRemeshResult> {
    let n = vertices.len() as u32;
    if faces.iter().flatten().any(|&i| i >= n) {
        return Err(PyValueError::new_err("face index out of range"));
    }
    let soup = TriangleSoup::new(vecs(vertices), faces);
    let config = config_or_default(config);
    let inner = py.detach(|| pipeline::remesh(&soup, &config)).map_err(to_py)?;
    Ok(PyRemeshResult { inner })
}

/// Scan mode: reconstructs a closed surface around a point cloud.
#[pyfunction]
#[pyo3(signature = (points, config=None))]
fn remesh_points(py: Python<'_>, points: Vec<[f64; 3]>, config: Option<PyRemeshConfig>) -> PyResult<PyRemeshResult> {
    let cloud = PointCloud { points: vecs(points) };
    let config = config_or_default(config);
    let inner = py.detach(|| pipeline::remesh_points(&cloud, &config)).map_err(to_py)?;
    Ok(PyRemeshResult { inner })
}

/// Loads a mesh and remeshes it.
#[pyfunction]
#[pyo3(signature = (path, config=None))]
fn remesh_file(py: Python<'_>, path: std::path::PathBuf, config: Option<PyRemeshConfig>) -> PyResult<PyRemeshResult> {
    let soup = mesh_io::load_mesh(&path, Format::Auto).map_err(io_to_py)?;
    let config = config_or_default(config);
    let inner = py.detach(|| pipeline::remesh(&soup, &config)).map_err(to_py)?;
    Ok(PyRemeshResult { inner })
}

/// Returns `(vertices, faces)` of an OBJ, OFF or PLY file.
#[pyfunction]
fn load_mesh(path: std::path::PathBuf) -> PyResult<(Vec<Row>, Vec<[u32; 3]>)> {
    let soup = mesh_io::load_mesh(&path, Format::Auto).map_err(io_to_py)?;
    Ok((rows(&soup.vertices), soup.faces))
}

/// Topology and inversion counts. Without `normals`, inversions are judged
/// against area-weighted vertex normals.
#[pyfunction]
#[pyo3(signature = (vertices, faces, normals=None))]
fn validate(vertices: Vec<[f64; 3]>, faces: Vec<[u32; 3]>, normals: Option<Vec<[f64; 3]>>) -> PyResult<PyValidationReport> {
    let n = vertices.len();
    if faces.iter().flatten().any(|&i| i as usize >= n) {
        return Err(PyValueError::new_err("face index out of range"));
    }
    let normals = normals.map(vecs);
    if normals.as_ref().is_some_and(|v| v.len() != n) {
        return Err(PyValueError::new_err("need one normal per vertex"));
    }
    Ok((&checks::validate_with_normals(&vecs(vertices), &faces, normals.as_deref())).into())
}

#[pymodule]
fn pywatertight(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRemeshConfig>()?;
    m.add_class::<PyRemeshResult>()?;
    m.add_class::<PyValidationReport>()?;
    m.add_function(wrap_pyfunction!(remesh, m)?)?;
    m.add_function(wrap_pyfunction!(remesh_points, m)?)?;
    m.add_function(wrap_pyfunction!(remesh_file, m)?)?;
    m.add_function(wrap_pyfunction!(load_mesh, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
