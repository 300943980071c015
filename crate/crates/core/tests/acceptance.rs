//! Acceptance criteria 1-9, one PASS/FAIL line each. Runs as a plain binary
//! (no libtest harness) so the lines come out in order.

use std::collections::{HashSet, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use watertight::fixtures::{corpus, cube, render_views};
use watertight::geom::{closest_point_on_triangle, Vec3};
use watertight::mesh_io::{PointCloud, TriangleSoup};
use watertight::octree::{construct_volume, Octree, Status, ROOT_MIN, ROOT_SIZE};
use watertight::optimize::{solve_projection_qp, ConvexQP, EPS_N};
use watertight::pipeline::{remesh, remesh_points, RemeshConfig, RemeshResult};
use watertight::spatial::NearestPointIndex;
use watertight::validate::chamfer;

const CORPUS_DEPTH: u32 = 8;
const TIME_BUDGET_S: f64 = 30.0;
const T2R_MEAN_MAX: f64 = 5e-5;
const T2R_MAX_MAX: f64 = 5e-3;
const SHEET_R2T_MEAN_MAX: f64 = 1e-4;
const QP_TOL: f64 = 1e-6;
const QP_BUDGET_S: f64 = 5.0;
const DOMINANCE_TOL: f64 = 1e-9;
const UPDATES_PER_FACE: f64 = 10.0;
const ORACLE_TOL: f64 = 1e-12;
const SHARP_TOL: f64 = 1e-6;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

struct Run {
    name: String,
    seconds: f64,
    result: RemeshResult,
}

fn run_corpus() -> Vec<Run> {
    corpus()
        .into_iter()
        .map(|soup| {
            let t = Instant::now();
            let cfg = RemeshConfig { depth: CORPUS_DEPTH, ..RemeshConfig::default() };
            let result = remesh(&soup, &cfg).unwrap_or_else(|e| panic!("{}: {e}", soup.provenance));
            Run { name: soup.provenance.clone(), seconds: t.elapsed().as_secs_f64(), result }
        })
        .collect()
}

fn criterion_1(runs: &[Run]) -> Verdict {
    let mut bad = Vec::new();
    for r in runs {
        let v = &r.result.validation;
        let counts = [v.boundary_edge_count, v.nonmanifold_edge_count, v.nonmanifold_vertex_count, v.inversion_count];
        if counts != [0; 4] || !v.is_watertight_manifold || r.seconds >= TIME_BUDGET_S {
            bad.push(format!("{} {:?} {:.1}s", r.name, counts, r.seconds));
        }
    }
    let slowest = runs.iter().map(|r| r.seconds).fold(0.0, f64::max);
    verdict(
        runs.len() >= 25 && bad.is_empty(),
        format!("{} fixtures at H={CORPUS_DEPTH}, slowest {slowest:.1}s, failing: {bad:?}", runs.len()),
    )
}

fn find<'a>(runs: &'a [Run], name: &str) -> &'a RemeshResult {
    &runs.iter().find(|r| r.name == name).unwrap_or_else(|| panic!("no fixture {name}")).result
}

fn criterion_2(runs: &[Run]) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["sphere", "cube", "torus", "sheet"] {
        let a = find(runs, name).accuracy.expect("accuracy computed");
        pass &= a.t2r_mean <= T2R_MEAN_MAX && a.t2r_max <= T2R_MAX_MAX;
        parts.push(format!("{name} t2r mean {:.2e} max {:.2e}", a.t2r_mean, a.t2r_max));
    }
    verdict(pass, parts.join(", "))
}

fn criterion_3(runs: &[Run]) -> Verdict {
    let r = find(runs, "sheet");
    let a = r.accuracy.expect("accuracy computed");
    let (mut up, mut down) = (0, 0);
    for f in &r.faces {
        let [p, q, s] = f.map(|v| r.vertices[v as usize]);
        let n = (q - p).cross(&(s - p));
        if n.z > 0.0 {
            up += 1;
        } else if n.z < 0.0 {
            down += 1;
        }
    }
    // accuracy is reported in the evaluation frame
    let diagonal = 3f64.sqrt() * r.voxel_size() * r.transform.to_evaluation_frame();
    verdict(
        up > 0 && down > 0 && a.r2t_max <= 2.0 * diagonal && a.r2t_mean <= SHEET_R2T_MEAN_MAX,
        format!(
            "{up} faces up, {down} down, r2t max {:.2e} (limit {:.2e}), mean {:.2e}",
            a.r2t_max,
            2.0 * diagonal,
            a.r2t_mean
        ),
    )
}

/// Projection onto an intersection of halfspaces by enumerating active sets
/// of at most three independent rows (enough in 3D) and keeping the closest
/// feasible candidate.
fn brute_projection(target: &Vec3, rows: &[(Vec3, f64)]) -> Vec3 {
    let feasible = |x: &Vec3| rows.iter().all(|(a, b)| a.dot(x) >= b - 1e-9 * a.norm());
    let mut best: Option<(f64, Vec3)> = None;
    let mut consider = |x: Vec3| {
        if feasible(&x) {
            let d = (x - target).norm_squared();
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, x));
            }
        }
    };
    consider(*target);
    let m = rows.len();
    let affine = |set: &[usize]| -> Option<Vec3> {
        let k = set.len();
        let a = nalgebra::DMatrix::from_fn(k, 3, |i, j| rows[set[i]].0[j]);
        let r = nalgebra::DVector::from_fn(k, |i, _| rows[set[i]].0.dot(target) - rows[set[i]].1);
        let gram = &a * a.transpose();
        if gram.determinant().abs() < 1e-12 {
            return None;
        }
        let lam = gram.lu().solve(&r)?;
        let step = a.transpose() * lam;
        Some(target - Vec3::new(step[0], step[1], step[2]))
    };
    for i in 0..m {
        if let Some(x) = affine(&[i]) {
            consider(x);
        }
        for j in i + 1..m {
            if let Some(x) = affine(&[i, j]) {
                consider(x);
            }
            for k in j + 1..m {
                if let Some(x) = affine(&[i, j, k]) {
                    consider(x);
                }
            }
        }
    }
    best.expect("instances are feasible").1
}

fn random_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
    Vec3::new(rng.random_range(-r..r), rng.random_range(-r..r), rng.random_range(-r..r))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = random_vec(rng, 1.0);
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn criterion_4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    let mut solver_time = 0.0;
    for inst in 0..1000 {
        let m = inst % 31;
        let x0 = random_vec(&mut rng, 1.0);
        let rows: Vec<(Vec3, f64)> = (0..m)
            .map(|_| {
                let a = random_unit(&mut rng) * rng.random_range(0.1..3.0);
                let b = a.dot(&x0) - rng.random_range(0.0..1.0);
                (a, b)
            })
            .collect();
        let target = random_vec(&mut rng, 3.0);
        let mut q = ConvexQP::new(target);
        for (a, b) in &rows {
            q.push(*a, *b);
        }
        let t = Instant::now();
        let x = solve_projection_qp(&q, &x0);
        solver_time += t.elapsed().as_secs_f64();
        worst = worst.max((x - brute_projection(&target, &rows)).norm());
    }
    verdict(
        worst <= QP_TOL && solver_time < QP_BUDGET_S,
        format!("1000 instances, max deviation {worst:.2e}, solver time {solver_time:.3}s"),
    )
}

/// Counts feasible unit samples closer to the target than the normalized
/// relaxed optimum. `interpolated` draws the target as a positive blend of
/// the face normals instead of uniformly on the sphere.
fn dominance_trials(seed: u64, eps: f64, interpolated: bool) -> (usize, f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0usize;
    let mut worst_gap = f64::NEG_INFINITY;
    let mut samples_total = 0usize;
    for inst in 0..1000 {
        let axis = random_unit(&mut rng);
        let spread = [0.3, 0.8, 1.5][inst % 3];
        let faces: Vec<Vec3> = (0..1 + inst % 12)
            .map(|_| loop {
                let n = (axis + random_vec(&mut rng, spread)).normalize();
                if n.dot(&axis) > 2.0 * EPS_N {
                    break n;
                }
            })
            .collect();
        let target = if interpolated {
            faces.iter().map(|n| n * rng.random_range(0.1..1.0)).sum::<Vec3>().normalize()
        } else {
            random_unit(&mut rng)
        };
        let mut q = ConvexQP::new(target);
        for n in &faces {
            q.push(*n, eps);
        }
        let lift = faces.iter().map(|n| EPS_N / n.dot(&axis)).fold(1.0, f64::max);
        let relaxed = solve_projection_qp(&q, &(axis * lift));
        let best = relaxed.normalize();
        let d_best = (best - target).norm();
        let feasible = |u: &Vec3| faces.iter().all(|n| n.dot(u) >= eps);
        let mut found = 0;
        let mut tries = 0;
        while found < 10_000 && tries < 2_000_000 {
            tries += 1;
            let centre = if tries % 2 == 0 { best } else { axis };
            let sigma = [1e-4, 1e-2, 0.3, 3.0][tries % 4];
            let u = (centre + random_vec(&mut rng, sigma)).normalize();
            if !feasible(&u) {
                continue;
            }
            found += 1;
            let gap = d_best - (u - target).norm();
            worst_gap = worst_gap.max(gap);
            if gap > DOMINANCE_TOL {
                violations += 1;
            }
        }
        samples_total += found;
    }
    (violations, worst_gap, samples_total)
}

fn criterion_5() -> Verdict {
    let (violations, worst_gap, samples_total) = dominance_trials(5, EPS_N, false);
    // not gated: where the claim does hold (cone constraints, blended target)
    let (cone_violations, _, _) = dominance_trials(6, 0.0, true);
    verdict(
        violations == 0 && samples_total == 1000 * 10_000,
        format!(
            "{samples_total} feasible samples, {violations} closer than the relaxed optimum \
             (largest gap {worst_gap:.2e}); with eps 0 and blended targets: {cone_violations}"
        ),
    )
}

fn criterion_6(runs: &[Run]) -> Verdict {
    let ratio = |r: &Run| r.result.optimization.vertex_updates as f64 / r.result.faces.len() as f64;
    let worst = runs.iter().max_by(|a, b| ratio(a).total_cmp(&ratio(b))).expect("corpus");
    verdict(
        runs.iter().all(|r| ratio(r) <= UPDATES_PER_FACE),
        format!("largest updates/|F| {:.2} ({})", ratio(worst), worst.name),
    )
}

/// Clips the triangle against the closed box slab by slab; a non-empty
/// remainder means they touch.
fn clip_touches(tri: &[Vec3; 3], lo: &Vec3, hi: &Vec3) -> bool {
    let mut poly: Vec<Vec3> = tri.to_vec();
    for axis in 0..3 {
        for (bound, keep_below) in [(lo[axis], false), (hi[axis], true)] {
            let inside = |p: &Vec3| if keep_below { p[axis] <= bound } else { p[axis] >= bound };
            let mut out = Vec::new();
            for i in 0..poly.len() {
                let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                if inside(&p) {
                    out.push(p);
                }
                if inside(&p) != inside(&q) {
                    let t = (bound - p[axis]) / (q[axis] - p[axis]);
                    let mut x = p + (q - p) * t;
                    x[axis] = bound;
                    out.push(x);
                }
            }
            poly = out;
            if poly.is_empty() {
                return false;
            }
        }
    }
    true
}

/// Cells whose closed box, grown by `pad` on every side (negative shrinks),
/// touches some triangle.
fn brute_voxelize(tris: &[[Vec3; 3]], depth: u32, pad: f64) -> HashSet<[i64; 3]> {
    let n = 1i64 << depth;
    let s = ROOT_SIZE / n as f64;
    let cell = |x: f64| (((x - ROOT_MIN) / s).floor() as i64).clamp(0, n - 1);
    let mut out = HashSet::new();
    for t in tris {
        let lo: Vec<i64> = (0..3).map(|i| cell(t.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min)) - 1).collect();
        let hi: Vec<i64> = (0..3).map(|i| cell(t.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max)) + 1).collect();
        for x in lo[0].max(0)..=hi[0].min(n - 1) {
            for y in lo[1].max(0)..=hi[1].min(n - 1) {
                for z in lo[2].max(0)..=hi[2].min(n - 1) {
                    let min = Vec3::new(ROOT_MIN + x as f64 * s, ROOT_MIN + y as f64 * s, ROOT_MIN + z as f64 * s);
                    let max = min + Vec3::repeat(s + pad);
                    if clip_touches(t, &(min - Vec3::repeat(pad)), &max) {
                        out.insert([x, y, z]);
                    }
                }
            }
        }
    }
    out
}

fn dense_exterior(occupied: &HashSet<[i64; 3]>, depth: u32) -> HashSet<[i64; 3]> {
    let n = 1i64 << depth;
    let mut seen = HashSet::new();
    let mut queue = VecDeque::new();
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                let on_rim = [x, y, z].iter().any(|&c| c == 0 || c == n - 1);
                if on_rim && !occupied.contains(&[x, y, z]) && seen.insert([x, y, z]) {
                    queue.push_back([x, y, z]);
                }
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        for axis in 0..3 {
            for d in [-1, 1] {
                let mut m = c;
                m[axis] += d;
                if (0..n).contains(&m[axis]) && !occupied.contains(&m) && seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
    }
    seen
}

fn soup_triangles(s: &TriangleSoup) -> Vec<[Vec3; 3]> {
    let (norm, _) = watertight::mesh_io::normalize(s).expect("non-empty fixture");
    (0..norm.faces.len()).map(|f| norm.triangle(f)).collect()
}

fn labelled_tree(tris: &[[Vec3; 3]], depth: u32) -> Octree {
    let mut tree = construct_volume(tris, depth).expect("valid depth");
    tree.connect();
    tree.label_exterior();
    tree
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut problems = Vec::new();
    // occupancy and exterior labels
    let mut scenes: Vec<(String, Vec<[Vec3; 3]>)> = corpus()
        .iter()
        .filter(|s| ["nested_shells", "cube", "t_junction_sheet", "torus", "bowtie_tetrahedra"].contains(&s.provenance.as_str()))
        .map(|s| (s.provenance.clone(), soup_triangles(s)))
        .collect();
    for i in 0..3 {
        let tris = (0..40)
            .map(|_| {
                let c = random_vec(&mut rng, 0.8);
                [c + random_vec(&mut rng, 0.3), c + random_vec(&mut rng, 0.3), c + random_vec(&mut rng, 0.3)]
            })
            .collect();
        scenes.push((format!("random{i}"), tris));
    }
    let mut cells_checked = 0;
    let mut ties = 0;
    for (name, tris) in &scenes {
        for depth in [3, 4, 5] {
            let tree = labelled_tree(tris, depth);
            let occ: HashSet<[i64; 3]> = tree.cells_with_status(Status::Occupied).into_iter().collect();
            // Cells that only touch within ORACLE_TOL are ties either answer
            // may take; everything else must agree exactly.
            let strict = brute_voxelize(tris, depth, -ORACLE_TOL);
            let loose = brute_voxelize(tris, depth, ORACLE_TOL);
            ties += loose.len() - strict.len();
            if !strict.is_subset(&occ) || !occ.is_subset(&loose) {
                let off = strict.difference(&occ).count() + occ.difference(&loose).count();
                problems.push(format!("{name} H={depth}: occupancy differs outside ties in {off} cells"));
            }
            let ext: HashSet<[i64; 3]> = tree.cells_with_status(Status::Exterior).into_iter().collect();
            if ext != dense_exterior(&occ, depth) {
                problems.push(format!("{name} H={depth}: exterior differs"));
            }
            if !dense_exterior(&loose, depth).is_subset(&ext) || !ext.is_subset(&dense_exterior(&strict, depth)) {
                problems.push(format!("{name} H={depth}: exterior outside the tie bracket"));
            }
            cells_checked += 1usize << (3 * depth);
        }
    }
    // nearest-point index against a linear scan
    let tris: Vec<[Vec3; 3]> = (0..300)
        .map(|_| {
            let c = random_vec(&mut rng, 1.0);
            [c + random_vec(&mut rng, 0.2), c + random_vec(&mut rng, 0.2), c + random_vec(&mut rng, 0.2)]
        })
        .collect();
    let index = NearestPointIndex::from_triangles(tris.clone()).expect("non-empty");
    let mut index_dev: f64 = 0.0;
    for _ in 0..100 {
        let q = random_vec(&mut rng, 1.5);
        let scan = tris
            .iter()
            .map(|t| (closest_point_on_triangle(&q, &t[0], &t[1], &t[2]) - q).norm())
            .fold(f64::INFINITY, f64::min);
        index_dev = index_dev.max((index.nearest_point(&q).sq_dist.sqrt() - scan).abs());
    }
    if index_dev > ORACLE_TOL {
        problems.push(format!("index deviates by {index_dev:.2e}"));
    }
    // chamfer against the double loop
    let a = PointCloud { points: (0..300).map(|_| random_vec(&mut rng, 1.0)).collect() };
    let b = PointCloud { points: (0..400).map(|_| random_vec(&mut rng, 1.0)).collect() };
    let mean_min = |from: &[Vec3], to: &[Vec3]| {
        from.iter().map(|p| to.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min)).sum::<f64>() / from.len() as f64
    };
    let (ab, ba) = chamfer(&a, &b);
    let chamfer_dev = (ab - mean_min(&a.points, &b.points)).abs().max((ba - mean_min(&b.points, &a.points)).abs());
    if chamfer_dev > ORACLE_TOL {
        problems.push(format!("chamfer deviates by {chamfer_dev:.2e}"));
    }
    verdict(
        problems.is_empty(),
        format!(
            "{} scenes x H=3..5 ({cells_checked} cells, {ties} contact ties), index dev {index_dev:.1e}, chamfer dev {chamfer_dev:.1e}; problems: {problems:?}",
            scenes.len()
        ),
    )
}

fn dist_to_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> (f64, f64) {
    let d = b - a;
    let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    ((a + d * t - p).norm(), t * d.norm())
}

fn criterion_8() -> Verdict {
    let cfg = RemeshConfig { depth: 6, samples: 0, ..RemeshConfig::default() };
    let r = remesh(&cube(), &cfg).expect("cube remeshes");
    let world = r.world_vertices();
    // cube() spans [0, 2]^3
    let centre = Vec3::repeat(1.0);
    let surface_dist = |p: &Vec3| {
        let q = (p - centre).abs() - Vec3::repeat(1.0);
        let outside = q.map(|x| x.max(0.0)).norm();
        (outside + q.max().min(0.0)).abs()
    };
    let worst_vertex = world.iter().map(surface_dist).fold(0.0, f64::max);
    let mut edges = HashSet::new();
    for f in &r.faces {
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut worst_gap: f64 = 0.0;
    let corners: Vec<Vec3> = (0..8).map(|i| Vec3::new((i & 1) as f64 * 2.0, (i >> 1 & 1) as f64 * 2.0, (i >> 2 & 1) as f64 * 2.0)).collect();
    for i in 0..8 {
        for j in i + 1..8 {
            let (a, b) = (corners[i], corners[j]);
            let len = (b - a).norm();
            if (len - 2.0).abs() > 1e-12 {
                continue;
            }
            // parameter intervals covered by mesh edges lying on the crease
            let mut spans: Vec<(f64, f64)> = edges
                .iter()
                .filter_map(|&(u, v)| {
                    let (du, tu) = dist_to_segment(&world[u as usize], &a, &b);
                    let (dv, tv) = dist_to_segment(&world[v as usize], &a, &b);
                    (du <= SHARP_TOL && dv <= SHARP_TOL).then(|| (tu.min(tv), tu.max(tv)))
                })
                .collect();
            spans.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut reach = 0.0;
            let mut gap: f64 = 0.0;
            for (s, e) in spans {
                gap = gap.max(s - reach);
                reach = f64::max(reach, e);
            }
            gap = gap.max(len - reach);
            // a point in a gap is half the gap away from the nearest edge
            worst_gap = worst_gap.max(gap / 2.0);
        }
    }
    verdict(
        worst_vertex <= SHARP_TOL && worst_gap <= SHARP_TOL && r.validation.is_watertight_manifold,
        format!("H=6 max vertex-to-cube {worst_vertex:.2e}, max crease-to-edges {worst_gap:.2e}"),
    )
}

fn criterion_9() -> Verdict {
    let views = render_views(&cube(), &[0, 1, 2, 3, 4], 96);
    let points: Vec<Vec3> = views.into_iter().flat_map(|v| v.points).collect();
    let n = points.len();
    let cfg = RemeshConfig { depth: 6, samples: 50_000, ..RemeshConfig::default() };
    let r = remesh_points(&PointCloud { points }, &cfg).expect("scan remeshes");
    let (a, b) = r.chamfer.expect("chamfer computed");
    let limit = 2.0 * r.voxel_size();
    verdict(
        r.validation.is_watertight_manifold && a < limit && b < limit,
        format!("{n} points from 5 views, H=6, chamfer {a:.2e} / {b:.2e} (limit {limit:.2e}), watertight {}", r.validation.is_watertight_manifold),
    )
}

/// Criteria whose claim does not hold for this formulation; see the README.
/// They still print FAIL, but only an unexpected outcome fails the target.
const KNOWN_FALSE: &[usize] = &[5];

fn main() {
    let started = Instant::now();
    let mut unexpected = Vec::new();
    let mut failing = 0;
    let mut print = |id: usize, v: Verdict| {
        println!("criterion {id}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failing += usize::from(!v.pass);
        if v.pass == KNOWN_FALSE.contains(&id) {
            unexpected.push(id);
        }
    };
    let runs = run_corpus();
    print(1, criterion_1(&runs));
    print(2, criterion_2(&runs));
    print(3, criterion_3(&runs));
    print(4, criterion_4());
    print(5, criterion_5());
    print(6, criterion_6(&runs));
    print(7, criterion_7());
    print(8, criterion_8());
    print(9, criterion_9());
    println!(
        "acceptance: {failing} failing (known false: {KNOWN_FALSE:?}), unexpected: {unexpected:?}, {:.0}s",
        started.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
