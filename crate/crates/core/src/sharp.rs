//! Crease and corner recovery after optimization.
//!
//! Vertices sit on the reference after optimization but edges may cut across
//! a crease. Such an edge has a midpoint off the reference; it is split and
//! the new vertex is carried to the intersection of the reference planes its
//! endpoints lie on. A triangle with all three edges cut also gets a centre
//! vertex aimed at the intersection of three planes.

use std::collections::{BTreeMap, HashSet};

use log::debug;
use nalgebra::Matrix3;

use crate::geom::{face_normal, Vec3};
use crate::halfedge::HalfEdgeMesh;
use crate::optimize::{init_state_keeping, OptimError, OptimState, UNTANGLE_ROUNDS};
use crate::spatial::NearestPointIndex;

/// Midpoint distance (in voxels) above which an edge is cut.
pub const CUT_FRACTION: f64 = 1e-3;
pub const MAX_SHARP_PASSES: usize = 2;
/// Planes closer than this angle are treated as the same plane.
const PARALLEL_DEG: f64 = 1.0;
/// Two reference planes form a crease worth cutting toward only if their
/// normals differ by at least this much; gentler folds (tessellated curved
/// surfaces) are left alone.
pub const FEATURE_DEG: f64 = 15.0;
const MAX_CONDITION: f64 = 1e8;
/// Distance slack (in voxels) for picking every reference triangle an
/// endpoint touches.
const TIE_FRACTION: f64 = 1e-4;
const PROJECTION_ROUNDS: usize = 12;

/// Cuts per face plus the undirected edges being cut, sorted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SharpCutPlan {
    pub edges: Vec<[u32; 2]>,
    pub face_cuts: Vec<u8>,
}

impl SharpCutPlan {
    pub fn from_edges(mesh: &HalfEdgeMesh, edges: &[[u32; 2]]) -> Self {
        let mut edges: Vec<[u32; 2]> = edges.iter().map(|&[a, b]| [a.min(b), a.max(b)]).collect();
        edges.sort_unstable();
        edges.dedup();
        let set: HashSet<[u32; 2]> = edges.iter().copied().collect();
        let face_cuts = mesh
            .faces
            .iter()
            .map(|f| (0..3).filter(|&i| set.contains(&key(f[i], f[(i + 1) % 3]))).count() as u8)
            .collect();
        SharpCutPlan { edges, face_cuts }
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

fn key(a: u32, b: u32) -> [u32; 2] {
    [a.min(b), a.max(b)]
}

/// What a vertex created by [`subdivide`] should be moved to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NewVertex {
    /// Midpoint of a cut edge: target on a two-plane line.
    Blue { vertex: u32, edge: [u32; 2] },
    /// Centre of a triangle with three cuts: target at a three-plane point.
    Red { vertex: u32, corners: [u32; 3] },
}

impl NewVertex {
    pub fn vertex(&self) -> u32 {
        match *self {
            NewVertex::Blue { vertex, .. } | NewVertex::Red { vertex, .. } => vertex,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SharpStats {
    pub passes: usize,
    /// Crease edges before the first pass and after each accepted one.
    pub flagged: Vec<usize>,
    /// Passes thrown away for lack of progress or for breaking validity.
    pub rejected: usize,
    pub blue: usize,
    pub red: usize,
    /// New vertices aimed at the plain nearest point instead of a plane
    /// intersection.
    pub fallbacks: usize,
    /// New vertices whose move was cut short by the inversion constraints.
    pub unreached: usize,
}

/// Undirected edges whose midpoint is farther than
/// `CUT_FRACTION * voxel_size * multiplier` from the reference.
pub fn detect_cut_edges(
    mesh: &HalfEdgeMesh,
    index: &NearestPointIndex,
    voxel_size: f64,
    multiplier: f64,
) -> Vec<[u32; 2]> {
    let thr = CUT_FRACTION * voxel_size * multiplier;
    let mut out = Vec::new();
    for f in &mesh.faces {
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            // each interior edge is seen from both sides; keep one
            if a > b {
                continue;
            }
            let m = (mesh.positions[a as usize] + mesh.positions[b as usize]) * 0.5;
            if index.nearest_point(&m).sq_dist > thr * thr {
                out.push([a, b]);
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Applies the plan: 1 cut gives 2 triangles, 2 cuts give 3, 3 cuts give 6
/// around a centre vertex. Midpoints start at the edge midpoint, centres at
/// the centroid. Face tags are inherited and twins relinked.
pub fn subdivide(mesh: &mut HalfEdgeMesh, plan: &SharpCutPlan) -> Vec<NewVertex> {
    if plan.is_empty() {
        return Vec::new();
    }
    let mut mid: BTreeMap<[u32; 2], u32> = BTreeMap::new();
    let mut created = Vec::new();
    let mut positions = std::mem::take(&mut mesh.positions);
    for &[a, b] in &plan.edges {
        let id = positions.len() as u32;
        positions.push((positions[a as usize] + positions[b as usize]) * 0.5);
        mid.insert([a, b], id);
        created.push(NewVertex::Blue { vertex: id, edge: [a, b] });
    }
    let mut faces = Vec::with_capacity(mesh.faces.len() + 2 * plan.edges.len());
    let mut tags = Vec::with_capacity(faces.capacity());
    for (f, &tri) in mesh.faces.iter().enumerate() {
        let tag = mesh.face_tag[f];
        let cut: [Option<u32>; 3] = std::array::from_fn(|i| mid.get(&key(tri[i], tri[(i + 1) % 3])).copied());
        let mut push = |t: [u32; 3]| {
            faces.push(t);
            tags.push(tag);
        };
        match cut.iter().filter(|c| c.is_some()).count() {
            0 => push(tri),
            1 => {
                let i = cut.iter().position(|c| c.is_some()).unwrap();
                let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let m = cut[i].unwrap();
                push([a, m, c]);
                push([m, b, c]);
            }
            2 => {
                // edge a-b is the uncut one
                let i = cut.iter().position(|c| c.is_none()).unwrap();
                let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
                let m1 = cut[(i + 1) % 3].unwrap();
                let m2 = cut[(i + 2) % 3].unwrap();
                push([m1, c, m2]);
                let p = |v: u32| positions[v as usize];
                // quad a b m1 m2: split along its shorter diagonal
                if (p(a) - p(m1)).norm_squared() <= (p(b) - p(m2)).norm_squared() {
                    push([a, b, m1]);
                    push([a, m1, m2]);
                } else {
                    push([a, b, m2]);
                    push([b, m1, m2]);
                }
            }
            _ => {
                let r = positions.len() as u32;
                let centroid = tri.iter().map(|&v| positions[v as usize]).sum::<Vec3>() / 3.0;
                positions.push(centroid);
                created.push(NewVertex::Red { vertex: r, corners: tri });
                for i in 0..3 {
                    let m = cut[i].unwrap();
                    let prev = cut[(i + 2) % 3].unwrap();
                    push([prev, tri[i], r]);
                    push([tri[i], m, r]);
                }
            }
        }
    }
    *mesh = HalfEdgeMesh::unlinked(positions, faces, tags);
    mesh.link_all()
        .expect("subdividing a closed manifold keeps it closed");
    created
}

#[derive(Clone, Copy, Debug)]
struct Plane {
    n: Vec3,
    d: f64,
}

fn parallel(a: &Plane, b: &Plane) -> bool {
    a.n.dot(&b.n).abs() > PARALLEL_DEG.to_radians().cos()
}

fn is_feature(a: &Plane, b: &Plane) -> bool {
    a.n.dot(&b.n).abs() <= FEATURE_DEG.to_radians().cos()
}

/// Supporting planes of every reference triangle nearest to `p`.
fn planes_at(index: &NearestPointIndex, p: &Vec3, tol: f64, out: &mut Vec<Plane>) {
    for hit in index.nearest_all(p, tol) {
        let Some(t) = index.triangle(hit.primitive) else { continue };
        let n = face_normal(&t[0], &t[1], &t[2]);
        let len = n.norm();
        if len == 0.0 {
            continue;
        }
        let plane = Plane { n: n / len, d: n.dot(&t[0]) / len };
        if !out.iter().any(|q| parallel(q, &plane)) {
            out.push(plane);
        }
    }
}

/// Closest point to `m` on the line where two planes meet.
fn line_point(a: &Plane, b: &Plane, m: &Vec3) -> Option<Vec3> {
    if parallel(a, b) {
        return None;
    }
    let c = a.n.dot(&b.n);
    let det = 1.0 - c * c;
    let ra = a.d - a.n.dot(m);
    let rb = b.d - b.n.dot(m);
    let alpha = (ra - c * rb) / det;
    let beta = (rb - c * ra) / det;
    Some(m + a.n * alpha + b.n * beta)
}

fn corner_point(p: [&Plane; 3]) -> Option<Vec3> {
    let m = Matrix3::from_rows(&[p[0].n.transpose(), p[1].n.transpose(), p[2].n.transpose()]);
    let sv = m.singular_values();
    let (hi, lo) = (sv.max(), sv.min());
    if lo <= 0.0 || hi / lo > MAX_CONDITION {
        return None;
    }
    m.lu().solve(&Vec3::new(p[0].d, p[1].d, p[2].d))
}

fn best_line(planes: &[Plane], m: &Vec3) -> Option<Vec3> {
    let mut best: Option<Vec3> = None;
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            if !is_feature(&planes[i], &planes[j]) {
                continue;
            }
            if let Some(x) = line_point(&planes[i], &planes[j], m) {
                if best.is_none_or(|b| (x - m).norm_squared() < (b - m).norm_squared()) {
                    best = Some(x);
                }
            }
        }
    }
    best
}

fn best_corner(planes: &[Plane], m: &Vec3) -> Option<Vec3> {
    let mut best: Option<Vec3> = None;
    for i in 0..planes.len() {
        for j in i + 1..planes.len() {
            for k in j + 1..planes.len() {
                let (a, b, c) = (&planes[i], &planes[j], &planes[k]);
                if !(is_feature(a, b) && is_feature(b, c) && is_feature(a, c)) {
                    continue;
                }
                if let Some(x) = corner_point([&planes[i], &planes[j], &planes[k]]) {
                    if best.is_none_or(|b| (x - m).norm_squared() < (b - m).norm_squared()) {
                        best = Some(x);
                    }
                }
            }
        }
    }
    best
}

/// Plane-intersection target for a new vertex, planes taken at the current
/// `positions` of its parents.
///
/// Only trusted when it lies on the reference and within one voxel of the
/// starting point; planes that never meet on the reference give `None`.
pub fn plane_target(
    positions: &[Vec3],
    index: &NearestPointIndex,
    v: &NewVertex,
    voxel_size: f64,
) -> Option<Vec3> {
    let tol = TIE_FRACTION * voxel_size;
    let mut planes = Vec::new();
    let (start, candidate) = match *v {
        NewVertex::Blue { edge, .. } => {
            for &e in &edge {
                planes_at(index, &positions[e as usize], tol, &mut planes);
            }
            let m = (positions[edge[0] as usize] + positions[edge[1] as usize]) * 0.5;
            (m, best_line(&planes, &m))
        }
        NewVertex::Red { corners, .. } => {
            for &c in &corners {
                planes_at(index, &positions[c as usize], tol, &mut planes);
            }
            let m = corners.iter().map(|&c| positions[c as usize]).sum::<Vec3>() / 3.0;
            (m, best_corner(&planes, &m).or_else(|| best_line(&planes, &m)))
        }
    };
    let x = candidate?;
    let on_reference = index.nearest_point(&x).sq_dist.sqrt() <= CUT_FRACTION * voxel_size;
    ((x - start).norm() <= voxel_size && on_reference).then_some(x)
}

/// Target for a new vertex and whether it is the nearest-point fallback.
pub fn sharp_target(
    state: &OptimState,
    index: &NearestPointIndex,
    v: &NewVertex,
    voxel_size: f64,
) -> (Vec3, bool) {
    if let Some(x) = plane_target(state.positions(), index, v, voxel_size) {
        return (x, false);
    }
    let p = state.positions();
    let start = match *v {
        NewVertex::Blue { edge, .. } => (p[edge[0] as usize] + p[edge[1] as usize]) * 0.5,
        NewVertex::Red { corners, .. } => corners.iter().map(|&c| p[c as usize]).sum::<Vec3>() / 3.0,
    };
    (index.nearest_point(&start).point, true)
}

/// Moves the new vertices toward their targets through the constrained
/// vertex and normal updates. Returns how many fell short.
pub fn project_sharp(
    state: &mut OptimState,
    index: &NearestPointIndex,
    created: &[NewVertex],
    voxel_size: f64,
) -> (usize, usize) {
    let mut fallbacks = 0;
    let targets: Vec<(u32, Vec3)> = created
        .iter()
        .map(|v| {
            let (t, fb) = sharp_target(state, index, v, voxel_size);
            fallbacks += fb as usize;
            (v.vertex(), t)
        })
        .collect();
    for _ in 0..PROJECTION_ROUNDS {
        let mut progress = false;
        for &(k, t) in &targets {
            if (state.positions()[k as usize] - t).norm() <= 1e-14 {
                continue;
            }
            progress |= state.update_vertex_to(k, &t);
            let _ = state.update_normal(k);
            for i in 0..state.one_ring(k).len() {
                let j = state.one_ring(k)[i];
                let _ = state.update_normal(j);
            }
        }
        if !progress {
            break;
        }
    }
    let unreached = targets
        .iter()
        .filter(|(k, t)| (state.positions()[*k as usize] - t).norm() > 1e-9 * voxel_size.max(1e-3))
        .count();
    (fallbacks, unreached)
}

/// Detect, subdivide and project, at most [`MAX_SHARP_PASSES`] times or
/// until no flagged edge crosses a crease. Flagged edges without a
/// plane-intersection target (curvature, folds of zero-volume sheets) are
/// not cut.
pub fn sharp_pass(
    state: OptimState,
    index: &NearestPointIndex,
    voxel_size: f64,
    multiplier: f64,
) -> Result<(OptimState, SharpStats), OptimError> {
    let mut state = state;
    let mut stats = SharpStats::default();
    let mut cuts = crease_edges(&state, index, voxel_size, multiplier);
    let mut bad = state.violating_vertices().len();
    stats.flagged.push(cuts.len());
    for _ in 0..MAX_SHARP_PASSES {
        if cuts.is_empty() {
            break;
        }
        let plan = SharpCutPlan::from_edges(&state.mesh, &cuts);
        let mut mesh = state.mesh.clone();
        let created = subdivide(&mut mesh, &plan);
        let mut next = init_state_keeping(mesh, voxel_size, &state.normals)?;
        next.untangle(UNTANGLE_ROUNDS);
        let (fb, un) = project_sharp(&mut next, index, &created, voxel_size);
        let next_cuts = crease_edges(&next, index, voxel_size, multiplier);
        let next_bad = next.violating_vertices().len();
        // a pass must make progress and must not cost validity
        if next_cuts.len() >= cuts.len() || next_bad > bad {
            debug!("sharp pass rejected: {} -> {} creases, {} -> {} bad vertices", cuts.len(), next_cuts.len(), bad, next_bad);
            stats.rejected += 1;
            break;
        }
        stats.blue += created.iter().filter(|v| matches!(v, NewVertex::Blue { .. })).count();
        stats.red += created.iter().filter(|v| matches!(v, NewVertex::Red { .. })).count();
        stats.fallbacks += fb;
        stats.unreached += un;
        stats.passes += 1;
        debug!("sharp pass {}: {} cut edges, {} new vertices", stats.passes, plan.edges.len(), created.len());
        stats.flagged.push(next_cuts.len());
        (state, cuts, bad) = (next, next_cuts, next_bad);
    }
    Ok((state, stats))
}

/// Flagged edges that cross a reference crease: those with a usable
/// plane-intersection target. Sagging chords on smooth patches are left
/// alone.
pub fn crease_edges(state: &OptimState, index: &NearestPointIndex, voxel_size: f64, multiplier: f64) -> Vec<[u32; 2]> {
    detect_cut_edges(&state.mesh, index, voxel_size, multiplier)
        .into_iter()
        .filter(|&[a, b]| {
            let v = NewVertex::Blue { vertex: 0, edge: [a, b] };
            plane_target(state.positions(), index, &v, voxel_size).is_some()
        })
        .collect()
}

#[cfg(test)]
mod tests;
