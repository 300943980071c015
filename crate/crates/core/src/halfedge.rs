//! Triangle half-edge mesh with implicit `next` links.
//!
//! Half-edge `3 * f + i` runs from corner `i` to corner `(i + 1) % 3` of face
//! `f`, so `next`, `prev` and `face` are arithmetic and only the origin
//! (the face corner) and the twin are stored.

use std::collections::HashMap;

use thiserror::Error;

use crate::geom::{face_normal, Vec3};

pub const NO_TWIN: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("edge ({0}, {1}) has {2} incident faces after repair")]
    StitchFailure(u32, u32, usize),
}

#[derive(Clone, Debug, Default)]
pub struct HalfEdgeMesh {
    pub positions: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    twin: Vec<u32>,
    /// Source tag per face (the occupied voxel it was extracted from).
    pub face_tag: Vec<u32>,
}

impl HalfEdgeMesh {
    /// Mesh with no twin links set.
    pub fn unlinked(positions: Vec<Vec3>, faces: Vec<[u32; 3]>, face_tag: Vec<u32>) -> Self {
        let twin = vec![NO_TWIN; faces.len() * 3];
        HalfEdgeMesh {
            positions,
            faces,
            twin,
            face_tag,
        }
    }

    /// Links a closed manifold face list. Every directed edge must appear once
    /// and its reverse exactly once.
    pub fn from_faces(positions: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self, TopologyError> {
        let tags = vec![0; faces.len()];
        let mut m = HalfEdgeMesh::unlinked(positions, faces, tags);
        m.link_all()?;
        Ok(m)
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_half_edges(&self) -> usize {
        self.faces.len() * 3
    }

    #[inline]
    pub fn origin(&self, h: u32) -> u32 {
        self.faces[(h / 3) as usize][(h % 3) as usize]
    }

    #[inline]
    pub fn dest(&self, h: u32) -> u32 {
        self.origin(Self::next(h))
    }

    #[inline]
    pub fn next(h: u32) -> u32 {
        h - h % 3 + (h % 3 + 1) % 3
    }

    #[inline]
    pub fn prev(h: u32) -> u32 {
        h - h % 3 + (h % 3 + 2) % 3
    }

    #[inline]
    pub fn face(h: u32) -> u32 {
        h / 3
    }

    #[inline]
    pub fn twin(&self, h: u32) -> Option<u32> {
        let t = self.twin[h as usize];
        (t != NO_TWIN).then_some(t)
    }

    pub fn set_twins(&mut self, a: u32, b: u32) {
        self.twin[a as usize] = b;
        self.twin[b as usize] = a;
    }

    pub fn unpaired(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.num_half_edges() as u32).filter(|&h| self.twin[h as usize] == NO_TWIN)
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        face_normal(
            &self.positions[a as usize],
            &self.positions[b as usize],
            &self.positions[c as usize],
        )
    }

    fn undirected_groups(&self, only_unpaired: bool) -> HashMap<(u32, u32), Vec<u32>> {
        let mut groups: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
        for h in 0..self.num_half_edges() as u32 {
            if only_unpaired && self.twin[h as usize] != NO_TWIN {
                continue;
            }
            let (a, b) = (self.origin(h), self.dest(h));
            groups.entry((a.min(b), a.max(b))).or_default().push(h);
        }
        groups
    }

    /// Pairs every edge that has exactly two opposite half-edges, leaving
    /// other edges unpaired. Returns the number of edges linked.
    pub fn link_manifold_edges(&mut self) -> usize {
        let mut linked = 0;
        let groups = self.undirected_groups(true);
        for hs in groups.values() {
            if hs.len() == 2 && self.origin(hs[0]) == self.dest(hs[1]) {
                self.set_twins(hs[0], hs[1]);
                linked += 1;
            }
        }
        linked
    }

    /// Re-links every edge from scratch; fails unless every edge has exactly
    /// two opposite half-edges.
    pub fn link_all(&mut self) -> Result<(), TopologyError> {
        self.twin.iter_mut().for_each(|t| *t = NO_TWIN);
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.num_half_edges());
        for h in 0..self.num_half_edges() as u32 {
            let key = (self.origin(h), self.dest(h));
            if directed.insert(key, h).is_some() {
                let n = self.undirected_groups(false)[&(key.0.min(key.1), key.0.max(key.1))].len();
                return Err(TopologyError::StitchFailure(key.0, key.1, n));
            }
        }
        for h in 0..self.num_half_edges() as u32 {
            let (a, b) = (self.origin(h), self.dest(h));
            match directed.get(&(b, a)) {
                Some(&t) => self.twin[h as usize] = t,
                None => return Err(TopologyError::StitchFailure(a, b, 1)),
            }
        }
        Ok(())
    }

    /// Fails if any half-edge is still unpaired.
    pub fn check_closed(&self) -> Result<(), TopologyError> {
        if let Some(h) = self.unpaired().next() {
            let (a, b) = (self.origin(h), self.dest(h));
            let n = self
                .undirected_groups(false)
                .get(&(a.min(b), a.max(b)))
                .map_or(1, |v| v.len());
            return Err(TopologyError::StitchFailure(a, b, n));
        }
        Ok(())
    }

    /// Next outgoing half-edge around the origin of `h`.
    #[inline]
    pub fn rotate(&self, h: u32) -> Option<u32> {
        self.twin(Self::prev(h))
    }

    /// Splits the edge of `h` (and its twin) at `point`, producing four faces
    /// from two. Twins must be re-linked afterwards.
    pub fn split_edge_unlinked(&mut self, h: u32, point: Vec3) -> u32 {
        let t = self.twin(h).expect("split_edge_unlinked needs a paired edge");
        let m = self.positions.len() as u32;
        self.positions.push(point);
        for he in [h, t] {
            let f = Self::face(he) as usize;
            let i = (he % 3) as usize;
            let a = self.faces[f][i];
            let b = self.faces[f][(i + 1) % 3];
            let c = self.faces[f][(i + 2) % 3];
            self.faces[f] = [a, m, c];
            self.faces.push([m, b, c]);
            let tag = self.face_tag[f];
            self.face_tag.push(tag);
        }
        self.twin.resize(self.faces.len() * 3, NO_TWIN);
        m
    }

    pub fn vertex_faces(&self) -> Vec<Vec<u32>> {
        let mut vf = vec![Vec::new(); self.positions.len()];
        for (f, tri) in self.faces.iter().enumerate() {
            for &v in tri {
                vf[v as usize].push(f as u32);
            }
        }
        vf
    }

    pub fn euler_characteristic(&self) -> i64 {
        let v = self.positions.len() as i64;
        let f = self.faces.len() as i64;
        let e = (self.faces.len() * 3 / 2) as i64;
        v - e + f
    }

    /// Number of connected components over faces.
    pub fn components(&self) -> usize {
        let n = self.faces.len();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s as u32);
            while let Some(f) = stack.pop() {
                for i in 0..3 {
                    if let Some(t) = self.twin(f * 3 + i) {
                        let g = Self::face(t) as usize;
                        if !seen[g] {
                            seen[g] = true;
                            stack.push(g as u32);
                        }
                    }
                }
            }
        }
        count
    }

    /// Removes vertices referenced by no face, remapping indices.
    pub fn compact_vertices(&mut self) {
        let mut map = vec![u32::MAX; self.positions.len()];
        let mut positions = Vec::new();
        for f in &mut self.faces {
            for v in f.iter_mut() {
                if map[*v as usize] == u32::MAX {
                    map[*v as usize] = positions.len() as u32;
                    positions.push(self.positions[*v as usize]);
                }
                *v = map[*v as usize];
            }
        }
        self.positions = positions;
    }
}
