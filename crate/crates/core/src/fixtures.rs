//! Synthetic reference meshes, including deliberately broken soups, and a
//! tiny orthographic depth renderer for scan-mode tests.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::geom::Vec3;
use crate::mesh_io::{PointCloud, TriangleSoup};

fn soup(name: &str, vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleSoup {
    let mut s = TriangleSoup::new(vertices, faces);
    s.provenance = name.to_string();
    s
}

fn append(dst: &mut TriangleSoup, src: &TriangleSoup) {
    let off = dst.vertices.len() as u32;
    dst.vertices.extend_from_slice(&src.vertices);
    dst.faces.extend(src.faces.iter().map(|f| f.map(|i| i + off)));
}

fn transformed(s: &TriangleSoup, scale: f64, shift: Vec3) -> TriangleSoup {
    let mut t = s.clone();
    for v in &mut t.vertices {
        *v = *v * scale + shift;
    }
    t
}

/// Axis-aligned box with outward-facing triangles.
pub fn cuboid(min: Vec3, max: Vec3) -> TriangleSoup {
    let v: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let f = vec![
        [0, 2, 3], [0, 3, 1], [4, 5, 7], [4, 7, 6],
        [0, 1, 5], [0, 5, 4], [2, 6, 7], [2, 7, 3],
        [0, 4, 6], [0, 6, 2], [1, 3, 7], [1, 7, 5],
    ];
    soup("cuboid", v, f)
}

pub fn cube() -> TriangleSoup {
    let mut s = cuboid(Vec3::zeros(), Vec3::repeat(2.0));
    s.provenance = "cube".into();
    s
}

/// Cube with every face split into an n x n grid.
pub fn subdivided_cube(n: usize) -> TriangleSoup {
    let mut s = TriangleSoup::new(Vec::new(), Vec::new());
    for axis in 0..3 {
        for side in [0.0, 1.0] {
            let u = (axis + 1) % 3;
            let w = (axis + 2) % 3;
            let base = s.vertices.len() as u32;
            for j in 0..=n {
                for i in 0..=n {
                    let mut p = Vec3::zeros();
                    p[axis] = side;
                    p[u] = i as f64 / n as f64;
                    p[w] = j as f64 / n as f64;
                    s.vertices.push(p);
                }
            }
            let id = |i: usize, j: usize| base + (j * (n + 1) + i) as u32;
            for j in 0..n {
                for i in 0..n {
                    let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                    if side > 0.5 {
                        s.faces.push([a, b, c]);
                        s.faces.push([a, c, d]);
                    } else {
                        s.faces.push([a, c, b]);
                        s.faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    s.provenance = "subdivided_cube".into();
    weld(s)
}

pub fn uv_sphere(rings: usize, segments: usize) -> TriangleSoup {
    let mut v = vec![Vec3::new(0.0, 0.0, 1.0)];
    for r in 1..rings {
        let th = PI * r as f64 / rings as f64;
        for s in 0..segments {
            let ph = 2.0 * PI * s as f64 / segments as f64;
            v.push(Vec3::new(th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()));
        }
    }
    v.push(Vec3::new(0.0, 0.0, -1.0));
    let south = (v.len() - 1) as u32;
    let id = |r: usize, s: usize| (1 + (r - 1) * segments + s % segments) as u32;
    let mut f = Vec::new();
    for s in 0..segments {
        f.push([0, id(1, s), id(1, s + 1)]);
        f.push([south, id(rings - 1, s + 1), id(rings - 1, s)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b, c, d) = (id(r, s), id(r + 1, s), id(r + 1, s + 1), id(r, s + 1));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    soup("sphere", v, f)
}

pub fn sphere() -> TriangleSoup {
    uv_sphere(96, 192)
}

pub fn torus(major: f64, minor: f64, nu: usize, nv: usize) -> TriangleSoup {
    let mut v = Vec::new();
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let w = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * w.cos();
            v.push(Vec3::new(r * u.cos(), r * u.sin(), minor * w.sin()));
        }
    }
    let id = |i: usize, j: usize| ((i % nu) * nv + j % nv) as u32;
    let mut f = Vec::new();
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            f.push([a, b, c]);
            f.push([a, c, d]);
        }
    }
    soup("torus", v, f)
}

/// Unit square grid in the plane z = 0: a zero-volume structure.
pub fn sheet(n: usize) -> TriangleSoup {
    let mut v = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            v.push(Vec3::new(i as f64 / n as f64, j as f64 / n as f64, 0.0));
        }
    }
    let id = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    let mut f = Vec::new();
    for j in 0..n {
        for i in 0..n {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    soup("sheet", v, f)
}

fn flip_some(mut s: TriangleSoup, every: usize) -> TriangleSoup {
    for (i, f) in s.faces.iter_mut().enumerate() {
        if i % every == 0 {
            f.swap(1, 2);
        }
    }
    s
}

/// Sheet made of patches whose vertices land on neighbouring edges
/// (T-junctions) instead of shared corners.
pub fn t_junction_sheet() -> TriangleSoup {
    let mut s = TriangleSoup::new(Vec::new(), Vec::new());
    // left half: one big quad; right half: four quads
    let big = [
        Vec3::new(0.0, 0.0, 0.0),
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(1.0, 2.0, 0.0),
        Vec3::new(0.0, 2.0, 0.0),
    ];
    s.vertices.extend_from_slice(&big);
    s.faces.extend([[0, 1, 2], [0, 2, 3]]);
    for j in 0..4 {
        let y0 = j as f64 * 0.5;
        let b = s.vertices.len() as u32;
        s.vertices.extend([
            Vec3::new(1.0, y0, 0.0),
            Vec3::new(2.0, y0, 0.0),
            Vec3::new(2.0, y0 + 0.5, 0.0),
            Vec3::new(1.0, y0 + 0.5, 0.0),
        ]);
        s.faces.extend([[b, b + 1, b + 2], [b, b + 2, b + 3]]);
    }
    s.provenance = "t_junction_sheet".into();
    s
}

pub fn mobius(n: usize, width: f64) -> TriangleSoup {
    let m = 4;
    let mut v = Vec::new();
    for i in 0..n {
        let t = 2.0 * PI * i as f64 / n as f64;
        for j in 0..=m {
            let s = width * (j as f64 / m as f64 - 0.5);
            let r = 1.0 + s * (t / 2.0).cos();
            v.push(Vec3::new(r * t.cos(), r * t.sin(), s * (t / 2.0).sin()));
        }
    }
    let id = |i: usize, j: usize| (i * (m + 1) + j) as u32;
    let mut f = Vec::new();
    for i in 0..n {
        for j in 0..m {
            let (a, b) = (id(i, j), id(i, j + 1));
            let (c, d) = if i + 1 < n {
                (id(i + 1, j + 1), id(i + 1, j))
            } else {
                // the half twist glues the strip back reversed
                (id(0, m - j - 1), id(0, m - j))
            };
            f.push([a, d, c]);
            f.push([a, c, b]);
        }
    }
    soup("mobius", v, f)
}

fn tetra() -> TriangleSoup {
    soup(
        "tetra",
        vec![
            Vec3::new(1.0, 1.0, 1.0),
            Vec3::new(1.0, -1.0, -1.0),
            Vec3::new(-1.0, 1.0, -1.0),
            Vec3::new(-1.0, -1.0, 1.0),
        ],
        vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]],
    )
}

/// Triangles not sharing any vertex index, in shuffled order.
fn unindexed(s: &TriangleSoup) -> TriangleSoup {
    let mut out = TriangleSoup::new(Vec::new(), Vec::new());
    let n = s.faces.len();
    for k in 0..n {
        let f = s.faces[(k * 7919) % n];
        let b = out.vertices.len() as u32;
        for &i in &f {
            out.vertices.push(s.vertices[i as usize]);
        }
        out.faces.push([b, b + 1, b + 2]);
    }
    out
}

fn cylinder_tube(n: usize, h: f64) -> TriangleSoup {
    let mut v = Vec::new();
    for i in 0..n {
        let t = 2.0 * PI * i as f64 / n as f64;
        v.push(Vec3::new(t.cos(), t.sin(), 0.0));
        v.push(Vec3::new(t.cos(), t.sin(), h));
    }
    let mut f = Vec::new();
    for i in 0..n {
        let (a, b) = (2 * i as u32, 2 * i as u32 + 1);
        let (c, d) = (2 * ((i + 1) % n) as u32, 2 * ((i + 1) % n) as u32 + 1);
        f.push([a, c, d]);
        f.push([a, d, b]);
    }
    soup("open_tube", v, f)
}

fn prism_house() -> TriangleSoup {
    let mut s = cuboid(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
    // gable roof sitting on the box, sharing no vertices with it
    let b = s.vertices.len() as u32;
    s.vertices.extend([
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(2.0, 0.0, 1.0),
        Vec3::new(2.0, 1.0, 1.0),
        Vec3::new(0.0, 1.0, 1.0),
        Vec3::new(0.0, 0.5, 1.6),
        Vec3::new(2.0, 0.5, 1.6),
    ]);
    s.faces.extend([
        [b, b + 1, b + 5], [b, b + 5, b + 4],
        [b + 2, b + 3, b + 4], [b + 2, b + 4, b + 5],
        [b, b + 4, b + 3], [b + 1, b + 2, b + 5],
    ]);
    s
}

fn random_soup(n: usize, seed: u64) -> TriangleSoup {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut s = TriangleSoup::new(Vec::new(), Vec::new());
    for _ in 0..n {
        let c = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let b = s.vertices.len() as u32;
        for _ in 0..3 {
            let d = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
            s.vertices.push(c + d);
        }
        s.faces.push([b, b + 1, b + 2]);
    }
    s
}

/// Merges vertices with identical coordinates.
fn weld(mut s: TriangleSoup) -> TriangleSoup {
    let mut ids: HashMap<[u64; 3], u32> = HashMap::new();
    let mut vertices = Vec::new();
    let remap: Vec<u32> = s
        .vertices
        .iter()
        .map(|p| {
            *ids.entry([p.x.to_bits(), p.y.to_bits(), p.z.to_bits()]).or_insert_with(|| {
                vertices.push(*p);
                vertices.len() as u32 - 1
            })
        })
        .collect();
    for f in &mut s.faces {
        for v in f.iter_mut() {
            *v = remap[*v as usize];
        }
    }
    s.vertices = vertices;
    s
}

fn named(mut s: TriangleSoup, name: &str) -> TriangleSoup {
    s.provenance = name.to_string();
    s
}

/// The adversarial corpus: every entry must come out watertight.
pub fn corpus() -> Vec<TriangleSoup> {
    let mut out = Vec::new();
    out.push(cube());
    out.push(named(flip_some(cube(), 3), "cube_flipped_faces"));
    let mut open = cube();
    open.faces.truncate(10);
    out.push(named(open, "open_box"));
    let mut gap = cube();
    // the top face gets its own vertices pulled in by far less than a
    // voxel: a crack, not a hole
    let mut copies = HashMap::new();
    for f in 0..gap.faces.len() {
        let tri = gap.faces[f];
        if tri.iter().all(|&v| gap.vertices[v as usize].z > 1.0) {
            for i in 0..3 {
                let v = tri[i];
                let id = *copies.entry(v).or_insert_with(|| {
                    let p = gap.vertices[v as usize];
                    gap.vertices.push(Vec3::new(1.0 + (p.x - 1.0) * 0.9999, 1.0 + (p.y - 1.0) * 0.9999, p.z));
                    gap.vertices.len() as u32 - 1
                });
                gap.faces[f][i] = id;
            }
        }
    }
    out.push(named(gap, "cracked_box"));
    out.push(t_junction_sheet());
    let mut double = sphere_coarse();
    let copy = flip_some(sphere_coarse(), 1);
    append(&mut double, &copy);
    out.push(named(double, "double_surface"));
    let mut boxes = cuboid(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
    append(&mut boxes, &cuboid(Vec3::new(0.5, -0.5, 0.5), Vec3::new(1.5, 1.5, 1.5)));
    out.push(named(boxes, "self_intersecting_boxes"));
    out.push(mobius(120, 0.6));
    out.push(sheet(10));
    let mut nested = sphere_coarse();
    append(&mut nested, &transformed(&sphere_coarse(), 0.5, Vec3::zeros()));
    out.push(named(nested, "nested_shells"));
    out.push(sphere());
    out.push(torus(1.0, 0.35, 96, 48));
    out.push(cylinder_tube(64, 1.5));
    let mut two = cube();
    append(&mut two, &transformed(&cube(), 1.0, Vec3::new(3.0, 0.0, 0.0)));
    out.push(named(two, "disjoint_cubes"));
    let mut cross = TriangleSoup::new(Vec::new(), Vec::new());
    for axis in 0..3 {
        let mut p = sheet(4);
        for v in &mut p.vertices {
            let q = *v - Vec3::new(0.5, 0.5, 0.0);
            let mut r = Vec3::zeros();
            r[(axis + 1) % 3] = q.x;
            r[(axis + 2) % 3] = q.y;
            *v = r;
        }
        append(&mut cross, &p);
    }
    out.push(named(cross, "crossed_planes"));
    let mut fin = sheet(4);
    let b = fin.vertices.len() as u32;
    fin.vertices.extend([Vec3::new(0.0, 0.5, 0.0), Vec3::new(1.0, 0.5, 0.0), Vec3::new(1.0, 0.5, 0.7), Vec3::new(0.0, 0.5, 0.7)]);
    fin.faces.extend([[b, b + 1, b + 2], [b, b + 2, b + 3]]);
    out.push(named(fin, "fin"));
    let mut bowtie = tetra();
    append(&mut bowtie, &transformed(&tetra(), -1.0, Vec3::repeat(2.0)));
    out.push(named(weld(bowtie), "bowtie_tetrahedra"));
    let mut degen = cube();
    let b = degen.vertices.len() as u32;
    degen.vertices.extend([Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.5, 0.5, 0.5), Vec3::new(1.0, 1.0, 1.0)]);
    degen.faces.extend([[b, b + 1, b + 2], [0, 0, 1], [b, b + 2, b + 2]]);
    out.push(named(degen, "degenerate_faces"));
    out.push(named(cuboid(Vec3::zeros(), Vec3::new(2.0, 1.0, 0.002)), "thin_slab"));
    let mut l = cuboid(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0));
    append(&mut l, &cuboid(Vec3::new(0.0, 1.0, 0.0), Vec3::new(1.0, 2.0, 1.0)));
    out.push(named(l, "l_shape"));
    out.push(named(prism_house(), "house"));
    out.push(named(random_soup(60, 17), "random_soup"));
    out.push(named(tetra(), "tetrahedron"));
    out.push(named(unindexed(&flip_some(sphere_coarse(), 2)), "unindexed_sphere"));
    let mut holes = sphere_coarse();
    let n = holes.faces.len();
    holes.faces = holes.faces.iter().enumerate().filter(|(i, _)| i % 17 != 0).map(|(_, f)| *f).collect();
    debug_assert!(holes.faces.len() < n);
    out.push(named(holes, "sphere_missing_faces"));
    let mut ts = torus(1.0, 0.3, 48, 24);
    append(&mut ts, &transformed(&sphere_coarse(), 0.6, Vec3::new(1.0, 0.0, 0.0)));
    out.push(named(ts, "torus_sphere_overlap"));
    out
}

fn sphere_coarse() -> TriangleSoup {
    uv_sphere(24, 48)
}

/// Ray against triangle: distance along `dir` or `None`.
fn ray_triangle(o: &Vec3, dir: &Vec3, t: &[Vec3; 3]) -> Option<f64> {
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - t[0];
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let d = e2.dot(&q) * inv;
    (d > 0.0).then_some(d)
}

/// Orthographic depth views along the six axis directions (`views` picks
/// which: 0..6 as -x,+x,-y,+y,-z,+z camera positions). Each view casts
/// `res x res` rays over the mesh's bounding box and keeps first hits.
pub fn render_views(mesh: &TriangleSoup, views: &[usize], res: usize) -> Vec<PointCloud> {
    let bb = crate::geom::Aabb::from_points(mesh.vertices.iter());
    let c = bb.center();
    let r = bb.extent().norm() * 0.6 + 1e-9;
    let tris: Vec<[Vec3; 3]> = (0..mesh.faces.len()).map(|f| mesh.triangle(f)).collect();
    views
        .iter()
        .map(|&view| {
            let axis = view / 2;
            let sign = if view % 2 == 0 { -1.0 } else { 1.0 };
            let mut dir = Vec3::zeros();
            dir[axis] = -sign;
            let u = (axis + 1) % 3;
            let w = (axis + 2) % 3;
            let mut points = Vec::new();
            for i in 0..res {
                for j in 0..res {
                    let mut o = c - dir * (2.0 * r);
                    o[u] += r * (2.0 * (i as f64 + 0.5) / res as f64 - 1.0);
                    o[w] += r * (2.0 * (j as f64 + 0.5) / res as f64 - 1.0);
                    let hit = tris
                        .iter()
                        .filter_map(|t| ray_triangle(&o, &dir, t))
                        .min_by(|a, b| a.total_cmp(b));
                    if let Some(d) = hit {
                        points.push(o + dir * d);
                    }
                }
            }
            PointCloud { points }
        })
        .collect()
}
