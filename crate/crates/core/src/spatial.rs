//! Exact nearest-point queries against triangles or points through a
//! bounding-volume hierarchy.

use thiserror::Error;

use crate::geom::{closest_point_on_triangle, Aabb, Vec3};
use crate::mesh_io::{PointCloud, TriangleSoup, DEGENERATE_AREA};

const LEAF_SIZE: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SpatialError {
    #[error("reference has no usable primitives")]
    EmptyReference,
}

#[derive(Clone, Debug)]
enum Primitives {
    Triangles(Vec<[Vec3; 3]>),
    Points(Vec<Vec3>),
}

#[derive(Clone, Copy, Debug)]
struct BvhNode {
    bounds: Aabb,
    /// Leaves: first primitive slot; internal: index of the left child
    /// (the right child follows the whole left subtree at `right`).
    start: u32,
    count: u32,
    right: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub point: Vec3,
    pub sq_dist: f64,
    /// Index of the primitive in the source soup or cloud.
    pub primitive: usize,
}

/// Immutable BVH; safe to query from many threads.
#[derive(Clone, Debug)]
pub struct NearestPointIndex {
    prims: Primitives,
    /// Source index of each stored primitive.
    source: Vec<usize>,
    /// Stored primitives in hierarchy order.
    order: Vec<u32>,
    nodes: Vec<BvhNode>,
}

/// Index over the non-degenerate triangles of `soup`.
pub fn build_index(soup: &TriangleSoup) -> Result<NearestPointIndex, SpatialError> {
    let mut tris = Vec::new();
    let mut source = Vec::new();
    for f in 0..soup.faces.len() {
        let t = soup.triangle(f);
        if crate::geom::triangle_area(&t[0], &t[1], &t[2]) >= DEGENERATE_AREA {
            tris.push(t);
            source.push(f);
        }
    }
    NearestPointIndex::build(Primitives::Triangles(tris), source)
}

pub fn build_point_index(cloud: &PointCloud) -> Result<NearestPointIndex, SpatialError> {
    let source = (0..cloud.points.len()).collect();
    NearestPointIndex::build(Primitives::Points(cloud.points.clone()), source)
}

impl NearestPointIndex {
    pub fn from_triangles(tris: Vec<[Vec3; 3]>) -> Result<Self, SpatialError> {
        let source = (0..tris.len()).collect();
        Self::build(Primitives::Triangles(tris), source)
    }

    pub fn from_points(points: Vec<Vec3>) -> Result<Self, SpatialError> {
        let source = (0..points.len()).collect();
        Self::build(Primitives::Points(points), source)
    }

    fn build(prims: Primitives, source: Vec<usize>) -> Result<Self, SpatialError> {
        let n = source.len();
        if n == 0 {
            return Err(SpatialError::EmptyReference);
        }
        let mut idx = NearestPointIndex {
            prims,
            source,
            order: (0..n as u32).collect(),
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
        };
        let bounds: Vec<Aabb> = (0..n).map(|i| idx.prim_bounds(i)).collect();
        let centers: Vec<Vec3> = bounds.iter().map(|b| b.center()).collect();
        let mut order = std::mem::take(&mut idx.order);
        idx.build_node(&mut order, 0, &bounds, &centers);
        idx.order = order;
        Ok(idx)
    }

    fn build_node(&mut self, order: &mut [u32], start: usize, bounds: &[Aabb], centers: &[Vec3]) -> u32 {
        let mut bb = Aabb::empty();
        let mut cb = Aabb::empty();
        for &i in order.iter() {
            bb = bb.union(&bounds[i as usize]);
            cb.grow(&centers[i as usize]);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(BvhNode {
            bounds: bb,
            start: start as u32,
            count: order.len() as u32,
            right: 0,
        });
        if order.len() <= LEAF_SIZE {
            return id;
        }
        let axis = cb.longest_axis();
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            centers[a as usize][axis]
                .total_cmp(&centers[b as usize][axis])
                .then(a.cmp(&b))
        });
        let (lo, hi) = order.split_at_mut(mid);
        self.build_node(lo, start, bounds, centers);
        let right = self.build_node(hi, start + mid, bounds, centers);
        let node = &mut self.nodes[id as usize];
        node.count = 0;
        node.right = right;
        id
    }

    fn prim_bounds(&self, i: usize) -> Aabb {
        match &self.prims {
            Primitives::Triangles(t) => Aabb::from_points(t[i].iter()),
            Primitives::Points(p) => Aabb::from_points([&p[i]]),
        }
    }

    fn closest_on(&self, i: usize, q: &Vec3) -> Vec3 {
        match &self.prims {
            Primitives::Triangles(t) => {
                let [a, b, c] = &t[i];
                closest_point_on_triangle(q, a, b, c)
            }
            Primitives::Points(p) => p[i],
        }
    }

    pub fn is_point_cloud(&self) -> bool {
        matches!(self.prims, Primitives::Points(_))
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    /// Triangle by source index, if this is a triangle index.
    pub fn triangle(&self, source: usize) -> Option<[Vec3; 3]> {
        let Primitives::Triangles(t) = &self.prims else { return None };
        let i = self.source.binary_search(&source).ok()?;
        Some(t[i])
    }

    /// Closest point over all primitives; ties go to the lowest source index.
    pub fn nearest_point(&self, q: &Vec3) -> Nearest {
        let mut best = Nearest {
            point: *q,
            sq_dist: f64::INFINITY,
            primitive: usize::MAX,
        };
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.sq_dist(q) > best.sq_dist {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let i = self.order[slot as usize] as usize;
                    let p = self.closest_on(i, q);
                    let d = (p - q).norm_squared();
                    let src = self.source[i];
                    if d < best.sq_dist || (d == best.sq_dist && src < best.primitive) {
                        best = Nearest {
                            point: p,
                            sq_dist: d,
                            primitive: src,
                        };
                    }
                }
                continue;
            }
            let (l, r) = (id + 1, node.right);
            let dl = self.nodes[l as usize].bounds.sq_dist(q);
            let dr = self.nodes[r as usize].bounds.sq_dist(q);
            // Push the farther child first so the nearer one is searched first.
            if dl <= dr {
                stack.push(r);
                stack.push(l);
            } else {
                stack.push(l);
                stack.push(r);
            }
        }
        best
    }

    /// Every primitive whose distance to `q` is within `tol` of the minimum,
    /// sorted by source index.
    pub fn nearest_all(&self, q: &Vec3, tol: f64) -> Vec<Nearest> {
        let d0 = self.nearest_point(q).sq_dist.sqrt();
        let limit = (d0 + tol).powi(2);
        let mut out = Vec::new();
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.bounds.sq_dist(q) > limit {
                continue;
            }
            if node.count > 0 {
                for slot in node.start..node.start + node.count {
                    let i = self.order[slot as usize] as usize;
                    let p = self.closest_on(i, q);
                    let d = (p - q).norm_squared();
                    if d <= limit {
                        out.push(Nearest {
                            point: p,
                            sq_dist: d,
                            primitive: self.source[i],
                        });
                    }
                }
                continue;
            }
            stack.push(node.right);
            stack.push(id + 1);
        }
        out.sort_by_key(|n| n.primitive);
        out
    }
}
