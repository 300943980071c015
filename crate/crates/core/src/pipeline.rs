//! End-to-end remeshing: normalize, voxelize, extract, optimize, recover
//! sharp features, validate.

use std::time::Instant;

use log::info;
use thiserror::Error;

use crate::extract::{extract_surface, RepairStats};
use crate::geom::Vec3;
use crate::halfedge::TopologyError;
use crate::mesh_io::{normalize, IoError, NormalizationTransform, PointCloud, TriangleSoup};
use crate::octree::{construct_volume, Octree, OctreeError};
use crate::optimize::{init_state, optimize, GsStats, OptimError, OptimState, DEFAULT_MAX_PASSES};
use crate::sharp::{sharp_pass, SharpStats};
use crate::spatial::{NearestPointIndex, SpatialError};
use crate::validate::{
    accuracy, chamfer, sample_surface, validate_topology, validate_with_normals, AccuracyInput,
    AccuracyReport, ValidationReport, DEFAULT_SAMPLES,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Octree(#[from] OctreeError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RemeshConfig {
    pub depth: u32,
    /// Run the optimizer; off gives the raw voxel surface.
    pub optimize: bool,
    pub sharp: bool,
    /// Multiplies the sharp-edge detection threshold.
    pub sharp_threshold: f64,
    pub max_passes: usize,
    /// Seed for the accuracy sampler.
    pub seed: u64,
    /// Reference samples for R2T (and output samples for chamfer); 0 skips
    /// the accuracy metrics.
    pub samples: usize,
}

impl Default for RemeshConfig {
    fn default() -> Self {
        RemeshConfig {
            depth: 8,
            optimize: true,
            sharp: true,
            sharp_threshold: 1.0,
            max_passes: DEFAULT_MAX_PASSES,
            seed: 0,
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RemeshResult {
    /// Output in the normalized frame.
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// The optimizer's per-vertex normals: every face sees each of its
    /// corners' normals at a positive angle.
    pub normals: Vec<Vec3>,
    pub transform: NormalizationTransform,
    /// Extracted surface before optimization (normalized frame).
    pub raw_vertices: Vec<Vec3>,
    pub raw_faces: Vec<[u32; 3]>,
    pub tree: Octree,
    pub input_faces: usize,
    pub repair: RepairStats,
    pub optimization: GsStats,
    pub sharp: SharpStats,
    /// Counts with inversions judged against [`RemeshResult::normals`].
    pub validation: ValidationReport,
    /// Inversions judged against area-weighted vertex normals instead.
    pub area_weighted_inversions: usize,
    pub accuracy: Option<AccuracyReport>,
    /// Mean distances input points to output and back (scan mode,
    /// normalized units).
    pub chamfer: Option<(f64, f64)>,
    pub timings: Vec<(&'static str, f64)>,
}

impl RemeshResult {
    pub fn world_vertices(&self) -> Vec<Vec3> {
        self.vertices.iter().map(|v| self.transform.invert(v)).collect()
    }

    pub fn voxel_size(&self) -> f64 {
        self.tree.voxel_size()
    }

    /// `key=value` pairs for machine-readable reports.
    pub fn metrics(&self) -> Vec<(String, String)> {
        let v = &self.validation;
        let mut m: Vec<(String, String)> = vec![
            ("vertices".into(), self.vertices.len().to_string()),
            ("faces".into(), self.faces.len().to_string()),
            ("watertight_manifold".into(), v.is_watertight_manifold.to_string()),
            ("boundary_edges".into(), v.boundary_edge_count.to_string()),
            ("nonmanifold_edges".into(), v.nonmanifold_edge_count.to_string()),
            ("nonmanifold_vertices".into(), v.nonmanifold_vertex_count.to_string()),
            ("inversions".into(), v.inversion_count.to_string()),
            ("misoriented_edges".into(), v.misoriented_edge_count.to_string()),
            ("area_weighted_inversions".into(), self.area_weighted_inversions.to_string()),
            ("passes".into(), self.optimization.passes.to_string()),
            ("vertex_updates".into(), self.optimization.vertex_updates.to_string()),
            ("sharp_passes".into(), self.sharp.passes.to_string()),
        ];
        if let Some(a) = &self.accuracy {
            for (k, x) in [("t2r_max", a.t2r_max), ("t2r_mean", a.t2r_mean), ("r2t_max", a.r2t_max), ("r2t_mean", a.r2t_mean)] {
                m.push((k.into(), format!("{x:.6e}")));
            }
        }
        if let Some((a, b)) = self.chamfer {
            m.push(("chamfer_in2out".into(), format!("{a:.6e}")));
            m.push(("chamfer_out2in".into(), format!("{b:.6e}")));
        }
        for (stage, s) in &self.timings {
            m.push((format!("time_{stage}"), format!("{s:.4}")));
        }
        m
    }
}

struct Clock {
    t: Instant,
    out: Vec<(&'static str, f64)>,
}

impl Clock {
    fn new() -> Self {
        Clock { t: Instant::now(), out: Vec::new() }
    }

    fn lap(&mut self, stage: &'static str) {
        let s = self.t.elapsed().as_secs_f64();
        info!("{stage}: {s:.3}s");
        self.out.push((stage, s));
        self.t = Instant::now();
    }
}

/// Remeshes a triangle soup into a watertight manifold.
pub fn remesh(soup: &TriangleSoup, config: &RemeshConfig) -> Result<RemeshResult, PipelineError> {
    let mut clock = Clock::new();
    let (norm, transform) = normalize(soup)?;
    if norm.faces.is_empty() {
        return Err(IoError::EmptyMesh.into());
    }
    let tris: Vec<[Vec3; 3]> = (0..norm.faces.len()).map(|f| norm.triangle(f)).collect();
    let index = NearestPointIndex::from_triangles(tris.clone())?;
    clock.lap("load");
    let tree = build_tree(&tris, config.depth, &mut clock)?;
    let mut result = finish(tree, &index, transform, norm.faces.len(), config, &mut clock)?;
    if config.samples > 0 {
        let samples = sample_surface(&norm.vertices, &norm.faces, config.samples, config.seed);
        result.accuracy = Some(accuracy(&AccuracyInput {
            vertices: &result.vertices,
            faces: &result.faces,
            reference: &index,
            reference_samples: &samples,
            exterior: Some(&result.tree),
            frame_scale: transform.to_evaluation_frame(),
        }));
        clock.lap("metrics");
    }
    result.timings = clock.out;
    Ok(result)
}

/// Scan mode: occupancy from points, vertices pulled to nearest points.
/// Sharp recovery is skipped (there are no reference planes).
pub fn remesh_points(cloud: &PointCloud, config: &RemeshConfig) -> Result<RemeshResult, PipelineError> {
    let mut clock = Clock::new();
    let (norm, transform) = cloud.normalize()?;
    let index = NearestPointIndex::from_points(norm.points.clone())?;
    clock.lap("load");
    let tree = build_tree(&norm.points, config.depth, &mut clock)?;
    let config = RemeshConfig { sharp: false, ..config.clone() };
    let mut result = finish(tree, &index, transform, 0, &config, &mut clock)?;
    if config.samples > 0 {
        let out = PointCloud {
            points: sample_surface(&result.vertices, &result.faces, config.samples, config.seed),
        };
        result.chamfer = Some(chamfer(&norm, &out));
        result.accuracy = Some(accuracy(&AccuracyInput {
            vertices: &result.vertices,
            faces: &result.faces,
            reference: &index,
            reference_samples: &norm.points,
            exterior: None,
            frame_scale: transform.to_evaluation_frame(),
        }));
        clock.lap("metrics");
    }
    result.timings = clock.out;
    Ok(result)
}

fn build_tree<P: crate::octree::Occupant>(prims: &[P], depth: u32, clock: &mut Clock) -> Result<Octree, PipelineError> {
    let mut tree = construct_volume(prims, depth)?;
    clock.lap("octree");
    tree.connect();
    clock.lap("connect");
    tree.label_exterior();
    clock.lap("label");
    Ok(tree)
}

fn finish(
    tree: Octree,
    index: &NearestPointIndex,
    transform: NormalizationTransform,
    input_faces: usize,
    config: &RemeshConfig,
    clock: &mut Clock,
) -> Result<RemeshResult, PipelineError> {
    let (mesh, repair) = extract_surface(&tree)?;
    let raw_vertices = mesh.positions.clone();
    let raw_faces = mesh.faces.clone();
    clock.lap("extract");
    let voxel = tree.voxel_size();
    let mut state: OptimState = init_state(mesh, voxel)?;
    let mut optimization = GsStats::default();
    let mut sharp = SharpStats::default();
    if config.optimize {
        optimization = optimize(&mut state, index, config.max_passes, |p| {
            log::debug!("pass {}: {} active, max E_D {:.3e}", p.pass, p.active, p.max_ed)
        });
        clock.lap("optimize");
        if config.sharp && !index.is_point_cloud() {
            (state, sharp) = sharp_pass(state, index, voxel, config.sharp_threshold)?;
            clock.lap("sharp");
        }
    }
    let OptimState { mesh, normals, .. } = state;
    let validation = validate_with_normals(&mesh.positions, &mesh.faces, Some(&normals));
    let area_weighted_inversions = validate_topology(&mesh.positions, &mesh.faces).inversion_count;
    clock.lap("validate");
    Ok(RemeshResult {
        vertices: mesh.positions,
        faces: mesh.faces,
        normals,
        transform,
        raw_vertices,
        raw_faces,
        tree,
        input_faces,
        repair,
        optimization,
        sharp,
        validation,
        area_weighted_inversions,
        accuracy: None,
        chamfer: None,
        timings: Vec::new(),
    })
}
