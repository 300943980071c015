//! Topology checks and distance metrics for remeshing results.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::geom::{face_normal, triangle_area, Vec3};
use crate::mesh_io::PointCloud;
use crate::octree::{Octree, Status};
use crate::spatial::NearestPointIndex;

pub const DEFAULT_SAMPLES: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub boundary_edge_count: usize,
    pub nonmanifold_edge_count: usize,
    pub nonmanifold_vertex_count: usize,
    pub inversion_count: usize,
    /// Manifold edges whose two faces traverse them in the same direction.
    pub misoriented_edge_count: usize,
    pub is_watertight_manifold: bool,
}

/// Counts boundary edges (one face), non-manifold edges (three or more),
/// vertices whose incident faces split into several edge-connected fans,
/// and inverted faces: a face is inverted when its normal has a negative dot
/// product with the area-weighted normal of any of its corners (a corner
/// whose normal vanishes also counts).
pub fn validate_topology(vertices: &[Vec3], faces: &[[u32; 3]]) -> ValidationReport {
    validate_with_normals(vertices, faces, None)
}

/// Same counts, but inversions are judged against the given per-vertex
/// normals (the optimizer's certificate): a face is inverted unless its
/// normal has a strictly positive dot product with each corner's normal.
pub fn validate_with_normals(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
    certificate: Option<&[Vec3]>,
) -> ValidationReport {
    let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::with_capacity(faces.len() * 3 / 2);
    for f in faces {
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            let e = edges.entry((a.min(b), a.max(b))).or_default();
            // total faces, and faces running from the smaller index
            e.0 += 1;
            e.1 += (a < b) as u32;
        }
    }
    let mut r = ValidationReport::default();
    for &(n, fwd) in edges.values() {
        match n {
            1 => r.boundary_edge_count += 1,
            2 if fwd != 1 => r.misoriented_edge_count += 1,
            2 => {}
            _ => r.nonmanifold_edge_count += 1,
        }
    }

    let mut incident: Vec<Vec<u32>> = vec![Vec::new(); vertices.len()];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            incident[v as usize].push(fi as u32);
        }
    }
    r.nonmanifold_vertex_count = incident
        .iter()
        .enumerate()
        .filter(|(v, fs)| fan_count(*v as u32, fs, faces) > 1)
        .count();

    let normals: Vec<Vec3> = faces
        .iter()
        .map(|f| face_normal(&vertices[f[0] as usize], &vertices[f[1] as usize], &vertices[f[2] as usize]))
        .collect();
    r.inversion_count = match certificate {
        Some(cert) => faces
            .iter()
            .zip(&normals)
            .filter(|(f, n)| f.iter().any(|&v| n.dot(&cert[v as usize]) <= 0.0))
            .count(),
        None => {
            let vnormals: Vec<Option<Vec3>> = incident
                .iter()
                .map(|fs| {
                    let s: Vec3 = fs.iter().map(|&f| normals[f as usize]).sum();
                    let n = s.norm();
                    (n > 0.0).then(|| s / n)
                })
                .collect();
            faces
                .iter()
                .zip(&normals)
                .filter(|(f, n)| {
                    f.iter().any(|&v| match vnormals[v as usize] {
                        Some(vn) => n.dot(&vn) < 0.0,
                        None => true,
                    })
                })
                .count()
        }
    };
    r.is_watertight_manifold = r.boundary_edge_count == 0
        && r.nonmanifold_edge_count == 0
        && r.nonmanifold_vertex_count == 0
        && r.inversion_count == 0
        && r.misoriented_edge_count == 0;
    r
}

/// Number of groups of faces around `v` connected through edges at `v`.
fn fan_count(v: u32, fs: &[u32], faces: &[[u32; 3]]) -> usize {
    if fs.is_empty() {
        return 0;
    }
    let mut parent: Vec<usize> = (0..fs.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut by_other: HashMap<u32, usize> = HashMap::new();
    for (i, &f) in fs.iter().enumerate() {
        for &w in &faces[f as usize] {
            if w == v {
                continue;
            }
            if let Some(&j) = by_other.get(&w) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            } else {
                by_other.insert(w, i);
            }
        }
    }
    (0..fs.len()).filter(|&i| find(&mut parent, i) == i).count()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AccuracyReport {
    pub t2r_max: f64,
    pub t2r_mean: f64,
    pub r2t_max: f64,
    pub r2t_mean: f64,
    /// Reference samples kept after the exterior filter.
    pub samples_used: usize,
    /// Factor from normalized units to the reported frame.
    pub frame_scale: f64,
}

impl AccuracyReport {
    /// The same distances in normalized units.
    pub fn normalized(&self) -> AccuracyReport {
        let s = 1.0 / self.frame_scale;
        AccuracyReport {
            t2r_max: self.t2r_max * s,
            t2r_mean: self.t2r_mean * s,
            r2t_max: self.r2t_max * s,
            r2t_mean: self.r2t_mean * s,
            samples_used: self.samples_used,
            frame_scale: 1.0,
        }
    }
}

/// `n` area-uniform samples over the triangles, from a seeded generator.
pub fn sample_surface(vertices: &[Vec3], faces: &[[u32; 3]], n: usize, seed: u64) -> Vec<Vec3> {
    let tri = |f: &[u32; 3]| f.map(|v| vertices[v as usize]);
    let mut cdf = Vec::with_capacity(faces.len());
    let mut total = 0.0;
    for f in faces {
        let [a, b, c] = tri(f);
        total += triangle_area(&a, &b, &c);
        cdf.push(total);
    }
    if total <= 0.0 || n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = rng.random_range(0.0..total);
            let i = cdf.partition_point(|&c| c <= x).min(faces.len() - 1);
            let [a, b, c] = tri(&faces[i]);
            let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
            if u + v > 1.0 {
                u = 1.0 - u;
                v = 1.0 - v;
            }
            a + (b - a) * u + (c - a) * v
        })
        .collect()
}

/// A reference sample counts as visible when its leaf is exterior, or is
/// occupied with an exterior neighbour.
pub fn is_exterior_visible(tree: &Octree, p: &Vec3) -> bool {
    let Some(id) = tree.locate(p) else { return true };
    match tree.node(id).status {
        Status::Exterior => true,
        Status::Empty => false,
        Status::Occupied => (0..6).any(|g| {
            tree.neighbors(id, g)
                .iter()
                .any(|&n| tree.node(n).status == Status::Exterior)
        }),
    }
}

pub struct AccuracyInput<'a> {
    pub vertices: &'a [Vec3],
    pub faces: &'a [[u32; 3]],
    pub reference: &'a NearestPointIndex,
    /// Points on the reference surface for the coverage direction.
    pub reference_samples: &'a [Vec3],
    /// When present, only exterior-visible samples are measured.
    pub exterior: Option<&'a Octree>,
    pub frame_scale: f64,
}

/// Vertex-to-reference and reference-to-output distances.
pub fn accuracy(input: &AccuracyInput) -> AccuracyReport {
    let t2r: Vec<f64> = input
        .vertices
        .par_iter()
        .map(|v| input.reference.nearest_point(v).sq_dist.sqrt())
        .collect();
    let samples: Vec<Vec3> = match input.exterior {
        Some(t) => input
            .reference_samples
            .iter()
            .copied()
            .filter(|p| is_exterior_visible(t, p))
            .collect(),
        None => input.reference_samples.to_vec(),
    };
    let tris: Vec<[Vec3; 3]> = input
        .faces
        .iter()
        .map(|f| f.map(|v| input.vertices[v as usize]))
        .collect();
    let r2t: Vec<f64> = match NearestPointIndex::from_triangles(tris) {
        Ok(out) => samples
            .par_iter()
            .map(|p| out.nearest_point(p).sq_dist.sqrt())
            .collect(),
        Err(_) => Vec::new(),
    };
    let s = input.frame_scale;
    let (t2r_max, t2r_mean) = max_mean(&t2r);
    let (r2t_max, r2t_mean) = max_mean(&r2t);
    AccuracyReport {
        t2r_max: t2r_max * s,
        t2r_mean: t2r_mean * s,
        r2t_max: r2t_max * s,
        r2t_mean: r2t_mean * s,
        samples_used: r2t.len(),
        frame_scale: s,
    }
}

fn max_mean(d: &[f64]) -> (f64, f64) {
    if d.is_empty() {
        return (0.0, 0.0);
    }
    let max = d.iter().cloned().fold(0.0, f64::max);
    (max, d.iter().sum::<f64>() / d.len() as f64)
}

/// Mean nearest-neighbour distance from `a` to `b` and from `b` to `a`.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> (f64, f64) {
    let one_way = |from: &[Vec3], to: &[Vec3]| -> f64 {
        let Ok(idx) = NearestPointIndex::from_points(to.to_vec()) else { return f64::INFINITY };
        if from.is_empty() {
            return 0.0;
        }
        from.par_iter()
            .map(|p| idx.nearest_point(p).sq_dist.sqrt())
            .sum::<f64>()
            / from.len() as f64
    };
    (one_way(&a.points, &b.points), one_way(&b.points, &a.points))
}
