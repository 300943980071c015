//! Inversion-free projection of the extracted mesh onto the reference.
//!
//! Positions and per-vertex normals are updated one vertex at a time. Each
//! update is a small convex projection: face normals are linear in the moving
//! vertex, so "every incident face stays consistent with the normals of its
//! three corners" is a set of halfspaces.
//!
//! Face normals are measured in grid units (divided by the squared voxel
//! side) so the thresholds mean the same thing at every depth. A constraint
//! that starts below its threshold (voxel saddles do this) is held at its
//! current value instead: no accepted fitting update makes any constraint
//! worse.
//!
//! Those held constraints can leave a vertex stuck at a violation, so
//! [`OptimState::untangle`] runs before and between fitting sweeps. It is a
//! repair step, not a fitting step: it may move a vertex off its projection
//! target, or smooth a small neighbourhood, whenever that strictly lowers the
//! number (then total depth) of violated constraints nearby.

pub mod qp;

use log::{debug, warn};
use rayon::prelude::*;
use thiserror::Error;

use crate::geom::Vec3;
use crate::halfedge::HalfEdgeMesh;
use crate::spatial::NearestPointIndex;
pub use qp::{solve_projection_qp, ConvexQP, Halfspace};

pub const EPS_V: f64 = 1e-5;
pub const EPS_N: f64 = 1e-2;
/// Displacement (normalized units) above which a vertex counts as updated.
pub const MOVE_TOL: f64 = 1e-7;
/// Change of a unit normal above which it counts as updated.
pub const NORMAL_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_PASSES: usize = 50;
const DEGENERATE: f64 = 1e-12;
/// Slack allowed on post-update constraint checks (grid units).
const CHECK_TOL: f64 = 1e-13;
const MAX_BACKTRACK: usize = 40;
/// Largest neighbourhood (in edges) smoothed by the untangling fallback.
const RELAX_RADIUS: usize = 6;

/// Rounding slack for a bound; never enough to let a positive value reach
/// zero.
fn slack(bound: f64) -> f64 {
    if bound > 0.0 {
        CHECK_TOL.min(0.5 * bound)
    } else {
        CHECK_TOL
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum OptimError {
    #[error("vertex {0} has no well-defined initial normal")]
    InfeasibleInit(u32),
    #[error("vertex {0} has a degenerate normal")]
    DegenerateNormal(u32),
}

#[derive(Clone, Debug)]
pub struct OptimState {
    pub mesh: HalfEdgeMesh,
    pub normals: Vec<Vec3>,
    pub eps_v: f64,
    pub eps_n: f64,
    /// Squared voxel side; face normals are divided by it.
    pub area_unit: f64,
    pub active: Vec<bool>,
    /// Accepted position updates that moved a vertex by more than
    /// [`MOVE_TOL`].
    pub update_counter: usize,
    pub normal_updates: usize,
    vertex_faces: Vec<Vec<u32>>,
    ring: Vec<Vec<u32>>,
}

/// Summary of one Gauss-Seidel pass, handed to the progress hook.
#[derive(Clone, Copy, Debug)]
pub struct PassInfo {
    pub pass: usize,
    pub active: usize,
    pub max_ed: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GsStats {
    pub passes: usize,
    pub vertex_updates: usize,
    pub normal_updates: usize,
    pub degenerate_normals: usize,
    pub converged: bool,
}

/// Positions from the mesh; each normal the normalized sum of its incident
/// face normals. Fails only when that sum vanishes.
pub fn init_state(mesh: HalfEdgeMesh, voxel_size: f64) -> Result<OptimState, OptimError> {
    init_state_keeping(mesh, voxel_size, &[])
}

/// Like [`init_state`], but vertices `0..known.len()` keep the given normals
/// (used after subdivision, which only appends vertices).
pub fn init_state_keeping(
    mesh: HalfEdgeMesh,
    voxel_size: f64,
    known: &[Vec3],
) -> Result<OptimState, OptimError> {
    let vertex_faces = mesh.vertex_faces();
    let mut ring: Vec<Vec<u32>> = vec![Vec::new(); mesh.num_vertices()];
    for f in &mesh.faces {
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            ring[a as usize].push(b);
            ring[b as usize].push(a);
        }
    }
    for r in &mut ring {
        r.sort_unstable();
        r.dedup();
    }
    let n = mesh.num_vertices();
    let mut state = OptimState {
        mesh,
        normals: vec![Vec3::zeros(); n],
        eps_v: EPS_V,
        eps_n: EPS_N,
        area_unit: voxel_size * voxel_size,
        active: vec![true; n],
        update_counter: 0,
        normal_updates: 0,
        vertex_faces,
        ring,
    };
    state.normals[..known.len()].copy_from_slice(known);
    for k in known.len() as u32..n as u32 {
        state.normals[k as usize] = state.initial_normal(k)?;
    }
    Ok(state)
}

impl OptimState {
    pub fn positions(&self) -> &[Vec3] {
        &self.mesh.positions
    }

    pub fn vertex_faces(&self, k: u32) -> &[u32] {
        &self.vertex_faces[k as usize]
    }

    pub fn one_ring(&self, k: u32) -> &[u32] {
        &self.ring[k as usize]
    }

    /// Face normal in grid units.
    fn scaled_normal(&self, f: u32) -> Vec3 {
        self.mesh.face_normal(f as usize) / self.area_unit
    }

    /// Normalized sum of incident face normals, if it does not vanish.
    pub fn interpolated_normal(&self, k: u32) -> Option<Vec3> {
        let s: Vec3 = self.vertex_faces[k as usize]
            .iter()
            .map(|&f| self.scaled_normal(f))
            .sum();
        let n = s.norm();
        (n >= DEGENERATE).then(|| s / n)
    }

    /// The interpolated normal, unless some incident face sees it below
    /// `eps_v`; then the direction with the largest angular margin over the
    /// incident faces is tried and the better of the two kept.
    fn initial_normal(&self, k: u32) -> Result<Vec3, OptimError> {
        let interp = self.interpolated_normal(k).ok_or(OptimError::InfeasibleInit(k))?;
        if self.worst_value(k, &interp) >= self.eps_v {
            return Ok(interp);
        }
        Ok(match self.margin_normal(k) {
            Some(m) if self.worst_value(k, &m) > self.worst_value(k, &interp) => m,
            _ => interp,
        })
    }

    /// Smallest incident `n_f . n` in grid units.
    fn worst_value(&self, k: u32, n: &Vec3) -> f64 {
        self.vertex_faces[k as usize]
            .iter()
            .map(|&f| self.scaled_normal(f).dot(n))
            .fold(f64::INFINITY, f64::min)
    }

    /// Unit direction maximizing the smallest angle-cosine to the incident
    /// face normals, if that is positive.
    pub fn margin_normal(&self, k: u32) -> Option<Vec3> {
        let mut dirs: Vec<Vec3> = Vec::new();
        for &f in &self.vertex_faces[k as usize] {
            let n = self.mesh.face_normal(f as usize);
            let len = n.norm();
            if len == 0.0 {
                return None;
            }
            let u = n / len;
            if !dirs.iter().any(|d| (d - u).norm() < 1e-12) {
                dirs.push(u);
            }
        }
        max_margin_direction(&dirs)
    }

    /// Smallest `n_abc . n_i` (grid units) over every face and corner.
    pub fn min_constraint_value(&self) -> f64 {
        let mut m = f64::INFINITY;
        for (f, tri) in self.mesh.faces.iter().enumerate() {
            let nf = self.scaled_normal(f as u32);
            for &v in tri {
                m = m.min(nf.dot(&self.normals[v as usize]));
            }
        }
        m
    }

    /// Every `(face, corner)` constraint value in a fixed order.
    pub fn constraint_values(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.mesh.faces.len() * 3);
        for (f, tri) in self.mesh.faces.iter().enumerate() {
            let nf = self.scaled_normal(f as u32);
            out.extend(tri.iter().map(|&v| nf.dot(&self.normals[v as usize])));
        }
        out
    }

    /// Projects vertex `k` toward its nearest reference point.
    pub fn update_vertex(&mut self, k: u32, index: &NearestPointIndex) -> bool {
        let p = index.nearest_point(&self.mesh.positions[k as usize]).point;
        self.update_vertex_to(k, &p)
    }

    /// Constrained move of vertex `k` toward `target`. Returns whether it
    /// moved by more than [`MOVE_TOL`].
    pub fn update_vertex_to(&mut self, k: u32, target: &Vec3) -> bool {
        let v0 = self.mesh.positions[k as usize];
        let inv = 1.0 / self.area_unit;
        // Rows in the local frame d = v - v0: value(d) = (c0 . m + d . row) / A.
        let mut rows: Vec<(Vec3, Vec3, Vec3, f64)> = Vec::new();
        let mut q = ConvexQP::new(target - v0);
        for &f in &self.vertex_faces[k as usize] {
            let tri = self.mesh.faces[f as usize];
            let i = tri.iter().position(|&v| v == k).expect("incident face");
            let a = tri[(i + 1) % 3];
            let b = tri[(i + 2) % 3];
            let ea = self.mesh.positions[a as usize] - v0;
            let eb = self.mesh.positions[b as usize] - v0;
            let c0 = ea.cross(&eb);
            for m in [k, a, b] {
                let n = self.normals[m as usize];
                let row = (ea - eb).cross(&n) * inv;
                let cur = c0.dot(&n) * inv;
                let bound = self.eps_v.min(cur);
                q.push(row, bound - cur);
                rows.push((ea, eb, n, bound));
            }
        }
        let mut d = solve_projection_qp(&q, &Vec3::zeros());
        let mut ok = false;
        for _ in 0..MAX_BACKTRACK {
            let feasible = rows.iter().all(|&(ea, eb, n, bound)| {
                // Exact face normal at the new position.
                let nf = (ea - d).cross(&(eb - d));
                nf.dot(&n) * inv >= bound - slack(bound)
            });
            if feasible {
                ok = true;
                break;
            }
            d *= 0.5;
        }
        if !ok {
            debug!("vertex {k}: update rejected after backtracking");
            return false;
        }
        self.mesh.positions[k as usize] = v0 + d;
        let moved = d.norm() > MOVE_TOL;
        if moved {
            self.update_counter += 1;
        }
        moved
    }

    /// Normal update: project the interpolated normal onto the halfspaces
    /// `n_kab . n >= eps_n`, then normalize. Returns whether it changed.
    pub fn update_normal(&mut self, k: u32) -> Result<bool, OptimError> {
        let target = self
            .interpolated_normal(k)
            .ok_or(OptimError::DegenerateNormal(k))?;
        let cur_n = self.normals[k as usize];
        let faces: Vec<Vec3> = self.vertex_faces[k as usize]
            .iter()
            .map(|&f| self.scaled_normal(f))
            .collect();
        // When the current normal sees every face at a positive angle, a
        // scaled copy of it meets the full eps_n bounds (the relaxed problem
        // is not restricted to unit vectors), and the projection no longer
        // depends on the current normal. Otherwise hold each violated bound
        // at its current value.
        let worst = faces.iter().map(|nf| nf.dot(&cur_n) / self.eps_n).fold(f64::INFINITY, f64::min);
        let mut q = ConvexQP::new(target);
        let start = if worst > 0.0 {
            for nf in &faces {
                q.push(*nf, self.eps_n);
            }
            cur_n / worst.min(1.0)
        } else {
            for nf in &faces {
                q.push(*nf, self.eps_n.min(nf.dot(&cur_n)));
            }
            cur_n
        };
        let relaxed = solve_projection_qp(&q, &start);
        let len = relaxed.norm();
        if len < DEGENERATE {
            return Err(OptimError::DegenerateNormal(k));
        }
        let next = relaxed / len;
        let keeps = faces.iter().all(|nf| {
            let cur = nf.dot(&cur_n);
            let bound = self.eps_v.min(cur);
            nf.dot(&next) >= bound - slack(bound)
        });
        if !keeps {
            return Ok(false);
        }
        let changed = (next - cur_n).norm() > NORMAL_TOL;
        self.normals[k as usize] = next;
        if changed {
            self.normal_updates += 1;
        }
        Ok(changed)
    }

    /// Vertices of faces that some corner normal sees at a non-positive
    /// angle, sorted.
    pub fn violating_vertices(&self) -> Vec<u32> {
        let mut out = Vec::new();
        for (f, tri) in self.mesh.faces.iter().enumerate() {
            let nf = self.mesh.face_normal(f);
            if tri.iter().any(|&v| nf.dot(&self.normals[v as usize]) <= 0.0) {
                out.extend_from_slice(tri);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Unit direction that raises the non-positive constraints of the faces
    /// around `k` when `k` moves (each is linear in its position).
    fn violation_gradient(&self, k: u32) -> Option<Vec3> {
        let v0 = self.mesh.positions[k as usize];
        let mut g = Vec3::zeros();
        for &f in &self.vertex_faces[k as usize] {
            let tri = self.mesh.faces[f as usize];
            let i = tri.iter().position(|&v| v == k).expect("incident face");
            let ea = self.mesh.positions[tri[(i + 1) % 3] as usize] - v0;
            let eb = self.mesh.positions[tri[(i + 2) % 3] as usize] - v0;
            for &m in &tri {
                let n = self.normals[m as usize];
                if ea.cross(&eb).dot(&n) <= 0.0 {
                    let row = (ea - eb).cross(&n);
                    let len = row.norm();
                    if len > 0.0 {
                        g += row / len;
                    }
                }
            }
        }
        let len = g.norm();
        (len > 1e-12).then(|| g / len)
    }

    /// Smooths vertices around violated constraints: each is moved toward
    /// its one-ring centroid (constrained as usual, so nothing gets worse)
    /// and the nearby normals re-projected. Voxel saddles, whose incident
    /// faces include opposite normals, admit no valid normal until their fan
    /// flattens. Returns how many vertices still touch a violation.
    pub fn untangle(&mut self, rounds: usize) -> usize {
        let mut bad = self.violating_vertices();
        for _ in 0..rounds {
            if bad.is_empty() {
                break;
            }
            for &k in &bad {
                // the normal alone may be enough
                if let Some(m) = self.margin_normal(k) {
                    if self.worst_value(k, &m) > 0.0 && self.worst_value(k, &m) > self.worst_value(k, &self.normals[k as usize]) {
                        self.normals[k as usize] = m;
                        continue;
                    }
                }
                let v0 = self.mesh.positions[k as usize];
                let step = 0.1 * self.area_unit.sqrt();
                let moved = match self.violation_gradient(k) {
                    Some(g) => self.update_vertex_to(k, &(v0 + g * step)),
                    None => false,
                };
                if !moved {
                    let ring = &self.ring[k as usize];
                    let c = ring.iter().map(|&j| self.mesh.positions[j as usize]).sum::<Vec3>() / ring.len() as f64;
                    self.update_vertex_to(k, &c);
                }
                let _ = self.update_normal(k);
                for i in 0..self.ring[k as usize].len() {
                    let j = self.ring[k as usize][i];
                    let _ = self.update_normal(j);
                }
                if self.violations_around(&[k]).0 > 0 {
                    self.search_position(k);
                }
                for radius in 1..=RELAX_RADIUS {
                    if self.violations_around(&[k]).0 == 0 || self.relax_region(k, radius) {
                        break;
                    }
                }
                self.activate_ring(k);
            }
            bad = self.violating_vertices();
        }
        bad.len()
    }

    /// Number and total depth of the non-positive (face, corner) values
    /// over the faces incident to `verts`.
    fn violations_around(&self, verts: &[u32]) -> (usize, f64) {
        let mut faces: Vec<u32> = verts.iter().flat_map(|&v| self.vertex_faces[v as usize].iter().copied()).collect();
        faces.sort_unstable();
        faces.dedup();
        let mut count = 0;
        let mut depth = 0.0;
        for &f in &faces {
            let nf = self.scaled_normal(f);
            for &m in &self.mesh.faces[f as usize] {
                let d = nf.dot(&self.normals[m as usize]);
                if d <= 0.0 {
                    count += 1;
                    depth -= d;
                }
            }
        }
        (count, depth)
    }

    /// Tries a fixed set of nearby positions for `k`, refreshing the normals
    /// around it, and keeps the one that most reduces the nearby violations.
    fn search_position(&mut self, k: u32) -> bool {
        let mut region = vec![k];
        region.extend_from_slice(&self.ring[k as usize]);
        let v0 = self.mesh.positions[k as usize];
        let old_n: Vec<Vec3> = region.iter().map(|&v| self.normals[v as usize]).collect();
        let mut best = self.violations_around(&region);
        let mut best_at: Option<(Vec3, Vec<Vec3>)> = None;
        let h = self.area_unit.sqrt();
        for r in [0.1, 0.25, 0.5] {
            for dx in -1i32..=1 {
                for dy in -1i32..=1 {
                    for dz in -1i32..=1 {
                        if dx == 0 && dy == 0 && dz == 0 {
                            continue;
                        }
                        let d = Vec3::new(dx as f64, dy as f64, dz as f64).normalize();
                        self.mesh.positions[k as usize] = v0 + d * (r * h);
                        for (&v, n) in region.iter().zip(&old_n) {
                            self.normals[v as usize] = *n;
                        }
                        self.refresh_normals(&region);
                        let score = self.violations_around(&region);
                        if score.0 < best.0 || (score.0 == best.0 && score.1 < best.1) {
                            best = score;
                            let ns = region.iter().map(|&v| self.normals[v as usize]).collect();
                            best_at = Some((self.mesh.positions[k as usize], ns));
                        }
                    }
                }
            }
        }
        let found = best_at.is_some();
        let (p, ns) = best_at.unwrap_or((v0, old_n));
        self.mesh.positions[k as usize] = p;
        for (&v, n) in region.iter().zip(ns) {
            self.normals[v as usize] = n;
        }
        found
    }

    /// Replaces each normal in `verts` that fails its fan by the initial
    /// choice for the current geometry, when that does better.
    fn refresh_normals(&mut self, verts: &[u32]) {
        for &v in verts {
            let cur = self.normals[v as usize];
            let now = self.worst_value(v, &cur);
            if now <= 0.0 {
                if let Ok(n) = self.initial_normal(v) {
                    if self.worst_value(v, &n) > now {
                        self.normals[v as usize] = n;
                    }
                }
            }
        }
    }

    /// Last resort for a fan no single-vertex move can fix: one unconstrained
    /// smoothing step of the vertices within `radius` edges of `k`, with
    /// fresh normals where the old ones stop working. Kept only if the
    /// violations nearby drop.
    fn relax_region(&mut self, k: u32, radius: usize) -> bool {
        let mut region = vec![k];
        for _ in 0..radius {
            let grown: Vec<u32> = region.iter().flat_map(|&v| self.ring[v as usize].iter().copied()).collect();
            region.extend(grown);
            region.sort_unstable();
            region.dedup();
        }
        let mut touched: Vec<u32> = region.iter().flat_map(|&v| self.ring[v as usize].iter().copied()).collect();
        touched.extend_from_slice(&region);
        touched.sort_unstable();
        touched.dedup();
        let before = self.violations_around(&region);
        let old_pos: Vec<Vec3> = region.iter().map(|&v| self.mesh.positions[v as usize]).collect();
        let old_n: Vec<Vec3> = touched.iter().map(|&v| self.normals[v as usize]).collect();
        let smoothed: Vec<Vec3> = region
            .iter()
            .map(|&v| {
                let r = &self.ring[v as usize];
                let c = r.iter().map(|&j| self.mesh.positions[j as usize]).sum::<Vec3>() / r.len() as f64;
                (self.mesh.positions[v as usize] + c) * 0.5
            })
            .collect();
        for (&v, p) in region.iter().zip(&smoothed) {
            self.mesh.positions[v as usize] = *p;
        }
        self.refresh_normals(&touched);
        let after = self.violations_around(&region);
        if after.0 < before.0 || (after.0 == before.0 && after.1 < before.1) {
            for &v in &region {
                self.active[v as usize] = true;
            }
            return true;
        }
        for (&v, p) in region.iter().zip(old_pos) {
            self.mesh.positions[v as usize] = p;
        }
        for (&v, n) in touched.iter().zip(old_n) {
            self.normals[v as usize] = n;
        }
        false
    }

    fn activate_ring(&mut self, k: u32) {
        self.active[k as usize] = true;
        for i in 0..self.ring[k as usize].len() {
            let j = self.ring[k as usize][i];
            self.active[j as usize] = true;
        }
    }
}

/// Runs passes over the active vertices in decreasing order of squared
/// distance to the reference until nothing moves or `max_passes` is hit.
pub fn gauss_seidel(
    state: &mut OptimState,
    index: &NearestPointIndex,
    max_passes: usize,
    mut progress: impl FnMut(&PassInfo),
) -> GsStats {
    let start_updates = state.update_counter;
    let start_normals = state.normal_updates;
    let mut stats = GsStats::default();
    for pass in 0..max_passes {
        let list: Vec<u32> = (0..state.active.len() as u32)
            .filter(|&k| state.active[k as usize])
            .collect();
        if list.is_empty() {
            stats.converged = true;
            break;
        }
        let positions = &state.mesh.positions;
        let mut order: Vec<(f64, u32)> = list
            .par_iter()
            .map(|&k| (index.nearest_point(&positions[k as usize]).sq_dist, k))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let info = PassInfo {
            pass,
            active: order.len(),
            max_ed: order.first().map_or(0.0, |o| o.0),
        };
        progress(&info);
        state.active.iter_mut().for_each(|a| *a = false);
        for &(_, k) in &order {
            let moved = state.update_vertex(k, index);
            let turned = match state.update_normal(k) {
                Ok(c) => c,
                Err(e) => {
                    debug!("{e}");
                    stats.degenerate_normals += 1;
                    false
                }
            };
            if moved || turned {
                state.activate_ring(k);
            }
        }
        stats.passes = pass + 1;
    }
    if !stats.converged && state.active.iter().all(|a| !a) {
        stats.converged = true;
    }
    if !stats.converged {
        let left = state.active.iter().filter(|a| **a).count();
        warn!("optimization stopped after {max_passes} passes with {left} active vertices");
    }
    stats.vertex_updates = state.update_counter - start_updates;
    stats.normal_updates = state.normal_updates - start_normals;
    stats
}

/// Minimizes `|x|` subject to `d . x >= 1` for every `d`; `x / |x|` then
/// maximizes the smallest `d . n` over unit `n`. The optimum is the
/// min-norm point of the affine hull of at most three active constraints,
/// so those are enumerated.
pub fn max_margin_direction(dirs: &[Vec3]) -> Option<Vec3> {
    let m = dirs.len();
    let mut best: Option<(f64, Vec3)> = None;
    let mut consider = |x: Vec3| {
        if !x.iter().all(|c| c.is_finite()) {
            return;
        }
        if dirs.iter().all(|d| d.dot(&x) >= 1.0 - 1e-9) {
            let n = x.norm_squared();
            if best.is_none_or(|(b, _)| n < b) {
                best = Some((n, x));
            }
        }
    };
    for i in 0..m {
        consider(dirs[i]);
        for j in i + 1..m {
            // x = alpha a + beta b with a.x = b.x = 1
            let (a, b) = (dirs[i], dirs[j]);
            let c = a.dot(&b);
            let det = 1.0 - c * c;
            if det > 1e-14 {
                let w = (1.0 - c) / det;
                consider((a + b) * w);
            }
            for l in j + 1..m {
                let mat = nalgebra::Matrix3::from_rows(&[a.transpose(), b.transpose(), dirs[l].transpose()]);
                if mat.determinant().abs() > 1e-12 {
                    if let Some(x) = mat.lu().solve(&Vec3::repeat(1.0)) {
                        consider(x);
                    }
                }
            }
        }
    }
    best.map(|(_, x)| x.normalize())
}

pub const UNTANGLE_ROUNDS: usize = 20;
const UNTANGLE_TRIES: usize = 3;

/// Gauss-Seidel projection, then a few rounds of [`OptimState::untangle`]
/// followed by more projection while any constraint is still non-positive.
pub fn optimize(
    state: &mut OptimState,
    index: &NearestPointIndex,
    max_passes: usize,
    mut progress: impl FnMut(&PassInfo),
) -> GsStats {
    // voxel saddles start infeasible; fixing them on the clean grid is easier
    // than after the fit has folded thin regions
    let left = state.untangle(UNTANGLE_ROUNDS);
    debug!("untangle before fitting: {left} vertices still touch a violation");
    let mut stats = gauss_seidel(state, index, max_passes, &mut progress);
    for _ in 0..UNTANGLE_TRIES {
        if state.violating_vertices().is_empty() {
            break;
        }
        let left = state.untangle(UNTANGLE_ROUNDS);
        debug!("untangle: {left} vertices still touch a violation");
        let more = gauss_seidel(state, index, max_passes, &mut progress);
        stats.passes += more.passes;
        stats.vertex_updates += more.vertex_updates;
        stats.normal_updates += more.normal_updates;
        stats.degenerate_normals += more.degenerate_normals;
        stats.converged = more.converged;
    }
    let left = state.violating_vertices().len();
    if left > 0 {
        warn!("{left} vertices still touch a face their normal does not see");
    }
    stats
}
