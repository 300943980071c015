use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use watertight::fixtures::{corpus, cube, sphere, t_junction_sheet};
use watertight::geom::Vec3;
use watertight::mesh_io::{load_mesh, save_mesh, Format, NormalizationTransform, TriangleSoup};
use watertight::validate::validate_with_normals;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_watertight"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_soup(dir: &Path, name: &str, s: &TriangleSoup) -> PathBuf {
    let path = dir.join(name);
    save_mesh(&s.vertices, &s.faces, None, &NormalizationTransform::identity(), &path, Format::Auto).unwrap();
    path
}

fn write_xyz(dir: &Path, name: &str, points: &[Vec3]) -> PathBuf {
    let path = dir.join(name);
    let text: String = points.iter().map(|p| format!("{} {} {}\n", p.x, p.y, p.z)).collect();
    fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn euler(m: &TriangleSoup) -> i64 {
    let f = m.faces.len() as i64;
    m.vertices.len() as i64 - 3 * f / 2 + f
}

#[test]
fn t_junction_output_is_valid_with_its_own_normals() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_soup(dir.path(), "t.obj", &t_junction_sheet());
    let out = dir.path().join("t_out.obj");
    let o = run(&["-i", s(&input), "-o", s(&out), "--depth", "6"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = load_mesh(&out, Format::Auto).unwrap();
    assert_eq!(m.normals.len(), m.vertices.len());
    let v = validate_with_normals(&m.vertices, &m.faces, Some(&m.normals));
    assert!(v.is_watertight_manifold, "{v:?}");
}

#[test]
fn missing_file_is_reported_and_others_still_run() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_soup(dir.path(), "cube.obj", &cube());
    let missing = dir.path().join("nope.obj");
    let o = run(&["-i", s(&missing), "-i", s(&good), "-o", s(dir.path()), "--depth", "4"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("file not found"));
    assert!(dir.path().join("cube.obj").is_file());
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&["--depth", "3"]).status.code(), Some(2));
    assert_eq!(run(&["-i", "a.obj", "--depth", "20"]).status.code(), Some(2));
}

#[test]
fn batch_reports_one_line_per_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let outdir = dir.path().join("out");
    fs::create_dir(&outdir).unwrap();
    let inputs: Vec<PathBuf> = corpus()
        .iter()
        .take(20)
        .enumerate()
        .map(|(i, f)| write_soup(dir.path(), &format!("{i:02}_{}.obj", f.provenance), f))
        .collect();
    let mut args = vec!["--depth", "4", "--metrics", "-o", s(&outdir)];
    for p in &inputs {
        args.extend(["-i", s(p)]);
    }
    let o = run(&args);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 20);
    assert!(lines.iter().all(|l| l.contains("watertight_manifold=true") && l.contains("t2r_max=")));
    assert_eq!(fs::read_dir(&outdir).unwrap().count(), 20);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_soup(dir.path(), "sphere.obj", &sphere());
    let (a, b) = (dir.path().join("a.obj"), dir.path().join("b.obj"));
    for (out, threads) in [(&a, "1"), (&b, "4")] {
        let o = bin().args(["-i", s(&input), "-o", s(out), "--depth", "5"]).env("MF_THREADS", threads).output().unwrap();
        assert!(o.status.success());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn side_outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_soup(dir.path(), "cube.off", &cube());
    let out = dir.path().join("cube.ply");
    let o = run(&["-i", s(&input), "-o", s(&out), "--depth", "4", "--save-raw", "--dump-octree", "--sharp=off"]);
    assert!(o.status.success());
    for f in ["cube.ply", "cube.raw.ply", "cube.octree.ply"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let raw = load_mesh(dir.path().join("cube.raw.ply"), Format::Auto).unwrap();
    assert!(!raw.faces.is_empty());
}

#[test]
fn scan_of_sphere_points_is_a_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let pts: Vec<Vec3> = (0..4000)
        .map(|i| {
            // Fibonacci sphere
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / 4000.0;
            let r = (1.0 - y * y).sqrt();
            let a = i as f64 * 2.399963229728653;
            Vec3::new(r * a.cos(), y, r * a.sin())
        })
        .collect();
    let half = pts.len() / 2;
    let a = write_xyz(dir.path(), "a.xyz", &pts[..half]);
    let b = write_xyz(dir.path(), "b.xyz", &pts[half..]);
    let out = dir.path().join("scan.obj");
    let o = run(&["--scan", "-i", s(&a), "-i", s(&b), "-o", s(&out), "--depth", "5", "--metrics"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 1);
    assert_eq!(euler(&load_mesh(&out, Format::Auto).unwrap()), 2);
}

#[test]
fn scan_of_one_point_is_a_closed_box() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_xyz(dir.path(), "p.xyz", &[Vec3::new(0.3, -2.0, 7.0)]);
    let out = dir.path().join("p.obj");
    let o = run(&["--scan", "-i", s(&p), "-o", s(&out), "--depth", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = load_mesh(&out, Format::Auto).unwrap();
    assert_eq!(euler(&m), 2);
    let v = validate_with_normals(&m.vertices, &m.faces, Some(&m.normals));
    assert!(v.is_watertight_manifold, "{v:?}");
}
