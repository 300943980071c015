//! Adaptive occupancy octree over `[-1.1, 1.1]^3` with face-neighbour wiring.
//!
//! Nodes live in a flat arena; the eight children of an internal node are
//! stored contiguously. Child `i` sits at octant bits
//! `(x, y, z) = (i & 1, (i >> 1) & 1, (i >> 2) & 1)`.
//!
//! Leaf neighbours are kept in six groups per leaf, one per cube face:
//! group `2 * axis` is the `-axis` face and `2 * axis + 1` the `+axis` face.

use std::cell::Cell;
use std::collections::VecDeque;

use thiserror::Error;

use crate::geom::{tri_box_intersect, Aabb, Vec3};

pub const ROOT_MIN: f64 = -1.1;
pub const ROOT_SIZE: f64 = 2.2;
pub const MAX_DEPTH: u32 = 14;

/// Inflation applied to internal-node boxes so that rounding in the box
/// corners never prunes a face that touches a finest-level cell.
const INTERNAL_SLACK: f64 = 1e-10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OctreeError {
    #[error("depth limit {0} outside [1, {MAX_DEPTH}]")]
    DepthLimitInvalid(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Occupied,
    Empty,
    Exterior,
}

pub type NodeId = u32;

#[derive(Clone, Debug)]
pub struct Node {
    /// Integer cell coordinate at this node's level.
    pub coord: [u32; 3],
    pub level: u8,
    pub status: Status,
    /// Index of the first of eight contiguous children.
    pub children: Option<NodeId>,
    /// Reference primitives intersecting the volume. Kept only on leaves.
    pub faces: Vec<u32>,
}

/// Anything that can mark an octree cell as occupied.
pub trait Occupant: Sync {
    fn bounds(&self) -> Aabb;
    /// Test against the closed box; `leaf` is true at the finest level.
    fn intersects(&self, min: &Vec3, size: f64, leaf: bool) -> bool;
}

impl Occupant for [Vec3; 3] {
    fn bounds(&self) -> Aabb {
        Aabb::from_points(self.iter())
    }

    fn intersects(&self, min: &Vec3, size: f64, _leaf: bool) -> bool {
        tri_box_intersect(self, min, &Vec3::repeat(size))
    }
}

impl Occupant for Vec3 {
    fn bounds(&self) -> Aabb {
        Aabb { min: *self, max: *self }
    }

    /// Points use half-open cells at the finest level so each point occupies
    /// exactly one voxel.
    fn intersects(&self, min: &Vec3, size: f64, leaf: bool) -> bool {
        (0..3).all(|i| {
            let lo = min[i];
            let hi = min[i] + size;
            if leaf {
                // Compare integer cell indices so every point lands in exactly
                // one voxel regardless of rounding at grid lines.
                let cell = ((self[i] - ROOT_MIN) / size).floor();
                cell == ((lo - ROOT_MIN) / size).round()
            } else {
                self[i] >= lo && self[i] <= hi
            }
        })
    }
}

#[derive(Clone, Debug)]
pub struct Octree {
    pub nodes: Vec<Node>,
    pub depth: u32,
    /// Number of primitive-box tests performed during construction.
    pub box_tests: u64,
    /// CSR neighbour storage: `neighbor_offsets[node * 6 + group]`.
    neighbor_offsets: Vec<u32>,
    neighbor_data: Vec<NodeId>,
}

impl Octree {
    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id as usize].children.is_none()
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as NodeId).filter(move |&i| self.is_leaf(i))
    }

    /// Side length of a node at `level`.
    pub fn cell_size(level: u32) -> f64 {
        ROOT_SIZE / (1u64 << level) as f64
    }

    pub fn voxel_size(&self) -> f64 {
        Self::cell_size(self.depth)
    }

    pub fn node_box(&self, id: NodeId) -> (Vec3, f64) {
        let n = self.node(id);
        cell_box(n.coord, n.level as u32)
    }

    /// Coordinate of the node's min corner on the finest grid.
    pub fn fine_coord(&self, id: NodeId) -> [i64; 3] {
        let n = self.node(id);
        let shift = self.depth - n.level as u32;
        n.coord.map(|c| (c as i64) << shift)
    }

    /// Width of the node in finest-grid cells.
    pub fn fine_width(&self, id: NodeId) -> i64 {
        1i64 << (self.depth - self.node(id).level as u32)
    }

    pub fn grid_point(&self, g: [i64; 3]) -> Vec3 {
        let s = self.voxel_size();
        Vec3::new(
            ROOT_MIN + g[0] as f64 * s,
            ROOT_MIN + g[1] as f64 * s,
            ROOT_MIN + g[2] as f64 * s,
        )
    }

    /// Neighbours of a leaf across face group `group` (empty before
    /// [`Octree::connect`]).
    pub fn neighbors(&self, id: NodeId, group: usize) -> &[NodeId] {
        if self.neighbor_offsets.is_empty() {
            return &[];
        }
        let k = id as usize * 6 + group;
        let lo = self.neighbor_offsets[k] as usize;
        let hi = self.neighbor_offsets[k + 1] as usize;
        &self.neighbor_data[lo..hi]
    }

    pub fn is_connected(&self) -> bool {
        !self.neighbor_offsets.is_empty()
    }

    /// Leaf containing `p` (half-open cells); `None` outside the root volume.
    pub fn locate(&self, p: &Vec3) -> Option<NodeId> {
        let s = Self::cell_size(self.depth);
        let mut g = [0i64; 3];
        for i in 0..3 {
            let c = ((p[i] - ROOT_MIN) / s).floor() as i64;
            if c < 0 || c >= (1i64 << self.depth) {
                return None;
            }
            g[i] = c;
        }
        let mut id = 0;
        loop {
            let n = self.node(id);
            let Some(first) = n.children else { return Some(id) };
            let shift = self.depth - n.level as u32 - 1;
            let bit = |i: usize| ((g[i] >> shift) & 1) as u32;
            id = first + (bit(0) | (bit(1) << 1) | (bit(2) << 2));
        }
    }
}

fn cell_box(coord: [u32; 3], level: u32) -> (Vec3, f64) {
    let s = Octree::cell_size(level);
    (
        Vec3::new(
            ROOT_MIN + coord[0] as f64 * s,
            ROOT_MIN + coord[1] as f64 * s,
            ROOT_MIN + coord[2] as f64 * s,
        ),
        s,
    )
}

/// Builds the occupancy octree: a node is split while it intersects any
/// primitive and has not reached `depth_limit`.
pub fn construct_volume<P: Occupant>(prims: &[P], depth_limit: u32) -> Result<Octree, OctreeError> {
    if !(1..=MAX_DEPTH).contains(&depth_limit) {
        return Err(OctreeError::DepthLimitInvalid(depth_limit));
    }
    let bounds: Vec<Aabb> = prims.iter().map(|p| p.bounds()).collect();
    let mut tree = Octree {
        nodes: vec![Node {
            coord: [0; 3],
            level: 0,
            status: Status::Occupied,
            children: None,
            faces: Vec::new(),
        }],
        depth: depth_limit,
        box_tests: 0,
        neighbor_offsets: Vec::new(),
        neighbor_data: Vec::new(),
    };
    let tests = Cell::new(0u64);
    let all: Vec<u32> = (0..prims.len() as u32).collect();
    build(&mut tree, 0, all, prims, &bounds, &tests);
    tree.box_tests = tests.get();
    Ok(tree)
}

fn build<P: Occupant>(
    tree: &mut Octree,
    id: NodeId,
    faces: Vec<u32>,
    prims: &[P],
    bounds: &[Aabb],
    tests: &Cell<u64>,
) {
    let (level, coord) = {
        let n = &tree.nodes[id as usize];
        (n.level as u32, n.coord)
    };
    if level >= tree.depth {
        tree.nodes[id as usize].faces = faces;
        return;
    }
    let first = tree.nodes.len() as NodeId;
    tree.nodes[id as usize].children = Some(first);
    let child_level = level + 1;
    let leaf = child_level == tree.depth;
    let mut child_faces: Vec<Vec<u32>> = Vec::with_capacity(8);
    for i in 0..8u32 {
        let cc = [
            coord[0] * 2 + (i & 1),
            coord[1] * 2 + ((i >> 1) & 1),
            coord[2] * 2 + ((i >> 2) & 1),
        ];
        let (mut min, mut size) = cell_box(cc, child_level);
        if !leaf {
            min -= Vec3::repeat(INTERNAL_SLACK);
            size += 2.0 * INTERNAL_SLACK;
        }
        let max = min + Vec3::repeat(size);
        let sub: Vec<u32> = faces
            .iter()
            .copied()
            .filter(|&f| {
                let b = &bounds[f as usize];
                if (0..3).any(|k| b.min[k] > max[k] || b.max[k] < min[k]) {
                    return false;
                }
                tests.set(tests.get() + 1);
                prims[f as usize].intersects(&min, size, leaf)
            })
            .collect();
        tree.nodes.push(Node {
            coord: cc,
            level: child_level as u8,
            status: if sub.is_empty() { Status::Empty } else { Status::Occupied },
            children: None,
            faces: Vec::new(),
        });
        child_faces.push(sub);
    }
    drop(faces);
    for (i, sub) in child_faces.into_iter().enumerate() {
        if !sub.is_empty() {
            build(tree, first + i as NodeId, sub, prims, bounds, tests);
        }
    }
}

const PAIRS: [[(u32, u32); 4]; 3] = [
    [(0, 1), (2, 3), (4, 5), (6, 7)],
    [(0, 2), (1, 3), (4, 6), (5, 7)],
    [(0, 4), (1, 5), (2, 6), (3, 7)],
];
/// Children of the negative-side node touching the shared face.
const FACE_CHILDREN_NEG: [[u32; 4]; 3] = [[1, 3, 5, 7], [2, 3, 6, 7], [4, 5, 6, 7]];
/// Children of the positive-side node touching the shared face.
const FACE_CHILDREN_POS: [[u32; 4]; 3] = [[0, 2, 4, 6], [0, 1, 4, 5], [0, 1, 2, 3]];

impl Octree {
    /// Wires every pair of face-sharing leaves (including across levels).
    pub fn connect(&mut self) {
        let mut edges: Vec<(NodeId, NodeId, u8)> = Vec::new();
        self.connect_octree(0, &mut edges);
        let n = self.nodes.len();
        let mut counts = vec![0u32; n * 6 + 1];
        for &(a, b, axis) in &edges {
            counts[a as usize * 6 + 2 * axis as usize + 1] += 1;
            counts[b as usize * 6 + 2 * axis as usize] += 1;
        }
        let mut offsets = vec![0u32; n * 6 + 1];
        for k in 0..n * 6 {
            offsets[k + 1] = offsets[k] + counts[k];
        }
        let mut fill = offsets.clone();
        let mut data = vec![0; offsets[n * 6] as usize];
        for &(a, b, axis) in &edges {
            let ka = a as usize * 6 + 2 * axis as usize + 1;
            data[fill[ka] as usize] = b;
            fill[ka] += 1;
            let kb = b as usize * 6 + 2 * axis as usize;
            data[fill[kb] as usize] = a;
            fill[kb] += 1;
        }
        self.neighbor_offsets = offsets;
        self.neighbor_data = data;
    }

    fn connect_octree(&self, id: NodeId, edges: &mut Vec<(NodeId, NodeId, u8)>) {
        let Some(first) = self.node(id).children else { return };
        for i in 0..8 {
            self.connect_octree(first + i, edges);
        }
        for (axis, pairs) in PAIRS.iter().enumerate() {
            for &(a, b) in pairs {
                self.connect_nodes(first + a, first + b, axis as u8, edges);
            }
        }
    }

    /// `a` lies on the negative side of `b` along `axis`.
    fn connect_nodes(&self, a: NodeId, b: NodeId, axis: u8, edges: &mut Vec<(NodeId, NodeId, u8)>) {
        let ca = self.node(a).children;
        let cb = self.node(b).children;
        if ca.is_none() && cb.is_none() {
            edges.push((a, b, axis));
            return;
        }
        let ax = axis as usize;
        let na = match ca {
            None => [a; 4],
            Some(f) => FACE_CHILDREN_NEG[ax].map(|i| f + i),
        };
        let nb = match cb {
            None => [b; 4],
            Some(f) => FACE_CHILDREN_POS[ax].map(|i| f + i),
        };
        for i in 0..4 {
            self.connect_nodes(na[i], nb[i], axis, edges);
        }
    }

    /// Leaves with at least one empty neighbour group, i.e. touching the
    /// boundary of the root volume.
    pub fn boundary_leaves(&self) -> Vec<NodeId> {
        self.leaves()
            .filter(|&id| (0..6).any(|g| self.neighbors(id, g).is_empty()))
            .collect()
    }

    /// Breadth-first search from empty boundary leaves through empty leaves;
    /// everything reached becomes [`Status::Exterior`].
    pub fn label_exterior(&mut self) {
        let mut queue: VecDeque<NodeId> = VecDeque::new();
        for id in self.boundary_leaves() {
            if self.nodes[id as usize].status == Status::Empty {
                self.nodes[id as usize].status = Status::Exterior;
                queue.push_back(id);
            }
        }
        while let Some(id) = queue.pop_front() {
            for g in 0..6 {
                let k = id as usize * 6 + g;
                let lo = self.neighbor_offsets[k] as usize;
                let hi = self.neighbor_offsets[k + 1] as usize;
                for j in lo..hi {
                    let nb = self.neighbor_data[j] as usize;
                    if self.nodes[nb].status == Status::Empty {
                        self.nodes[nb].status = Status::Exterior;
                        queue.push_back(nb as NodeId);
                    }
                }
            }
        }
    }

    /// Finest-level cells with the given status, as fine-grid coordinates.
    pub fn cells_with_status(&self, status: Status) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for id in self.leaves() {
            if self.node(id).status != status {
                continue;
            }
            let base = self.fine_coord(id);
            let w = self.fine_width(id);
            for x in 0..w {
                for y in 0..w {
                    for z in 0..w {
                        out.push([base[0] + x, base[1] + y, base[2] + z]);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Debug dump: one PLY vertex per leaf center with its status and size.
    pub fn write_debug_ply(&self, path: &std::path::Path) -> std::io::Result<()> {
        use std::io::Write;
        let leaves: Vec<NodeId> = self.leaves().collect();
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(
            w,
            "ply\nformat ascii 1.0\nelement vertex {}\nproperty float x\nproperty float y\n\
             property float z\nproperty float size\nproperty uchar status\nend_header\n",
            leaves.len()
        )?;
        for id in leaves {
            let (min, s) = self.node_box(id);
            let c = min + Vec3::repeat(s * 0.5);
            let st = match self.node(id).status {
                Status::Occupied => 0,
                Status::Empty => 1,
                Status::Exterior => 2,
            };
            writeln!(w, "{} {} {} {} {}", c.x, c.y, c.z, s, st)?;
        }
        w.flush()
    }
}
