//! Mesh and point-cloud file formats, plus the canonical normalization frame.
//!
//! Readers: OBJ, PLY (ASCII and binary little/big endian), OFF and XYZ.
//! Writers: OBJ (9 significant digits), OFF and binary little-endian PLY.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geom::{triangle_area, Aabb, Vec3};

/// Half-extent of the largest axis after normalization.
pub const NORMALIZED_HALF_EXTENT: f64 = 0.9;

/// Faces with area below this (normalized units) are discarded.
pub const DEGENERATE_AREA: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("parse error at line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("mesh has no vertices")]
    EmptyMesh,
    #[error("point cloud has no points")]
    EmptyCloud,
    #[error("unsupported format for {0}")]
    UnsupportedFormat(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(line: usize, reason: impl Into<String>) -> IoError {
    IoError::ParseError {
        line,
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Obj,
    Ply,
    Off,
    Xyz,
    Auto,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Format> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(Format::Obj),
            "ply" => Some(Format::Ply),
            "off" => Some(Format::Off),
            "xyz" | "txt" | "pts" => Some(Format::Xyz),
            _ => None,
        }
    }

    fn resolve(self, path: &Path) -> Result<Format, IoError> {
        match self {
            Format::Auto => {
                Format::from_path(path).ok_or_else(|| IoError::UnsupportedFormat(path.into()))
            }
            f => Ok(f),
        }
    }
}

/// Raw indexed triangles with no topological guarantees.
#[derive(Clone, Debug, Default)]
pub struct TriangleSoup {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub provenance: String,
    /// Degenerate or otherwise dropped input faces.
    pub warnings: Vec<String>,
    /// Per-vertex normals when the file carries exactly one per vertex
    /// (OBJ `vn` indexed like `v`); empty otherwise.
    pub normals: Vec<Vec3>,
}

impl TriangleSoup {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        TriangleSoup {
            vertices,
            faces,
            provenance: String::new(),
            warnings: Vec::new(),
            normals: Vec::new(),
        }
    }

    /// Builds a soup from polygons, fan-triangulating and dropping faces with
    /// repeated or out-of-range indices.
    pub fn from_polygons(vertices: Vec<Vec3>, polygons: &[Vec<u32>]) -> Self {
        let mut soup = TriangleSoup::new(vertices, Vec::new());
        for poly in polygons {
            soup.push_polygon(poly);
        }
        soup
    }

    pub fn push_polygon(&mut self, poly: &[u32]) {
        let n = self.vertices.len() as u32;
        if poly.len() < 3 {
            self.warnings
                .push(format!("face {} has fewer than 3 vertices", poly.len()));
            return;
        }
        for i in 1..poly.len() - 1 {
            let tri = [poly[0], poly[i], poly[i + 1]];
            if tri.iter().any(|&v| v >= n) {
                self.warnings.push(format!("face {tri:?} index out of range"));
            } else if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                self.warnings
                    .push(format!("face {tri:?} is degenerate (repeated index)"));
            } else {
                self.faces.push(tri);
            }
        }
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Drops faces whose area is below `min_area`; returns how many were removed.
    pub fn drop_degenerate(&mut self, min_area: f64) -> usize {
        let before = self.faces.len();
        let verts = &self.vertices;
        let mut dropped = Vec::new();
        self.faces.retain(|&[a, b, c]| {
            let keep = triangle_area(&verts[a as usize], &verts[b as usize], &verts[c as usize])
                >= min_area;
            if !keep {
                dropped.push([a, b, c]);
            }
            keep
        });
        for f in dropped {
            self.warnings.push(format!("face {f:?} has zero area"));
        }
        before - self.faces.len()
    }
}

/// Uniform scale plus translation into the canonical frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizationTransform {
    pub center: Vec3,
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn identity() -> Self {
        NormalizationTransform {
            center: Vec3::zeros(),
            scale: 1.0,
        }
    }

    /// Transform fitted to a bounding box: center at the box center, largest
    /// half-extent mapped to 0.9.
    pub fn fit(bbox: &Aabb) -> Self {
        let half = bbox.extent().max() * 0.5;
        let scale = if half > 0.0 && half.is_finite() {
            NORMALIZED_HALF_EXTENT / half
        } else {
            1.0
        };
        NormalizationTransform {
            center: bbox.center(),
            scale,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        (p - self.center) * self.scale
    }

    pub fn invert(&self, p: &Vec3) -> Vec3 {
        p / self.scale + self.center
    }

    /// Factor from the normalized frame to the frame where the largest
    /// bounding-box axis is two units long.
    pub fn to_evaluation_frame(&self) -> f64 {
        1.0 / NORMALIZED_HALF_EXTENT
    }
}

/// Normalizes the soup and drops zero-area faces in the normalized frame.
pub fn normalize(soup: &TriangleSoup) -> Result<(TriangleSoup, NormalizationTransform), IoError> {
    if soup.vertices.is_empty() {
        return Err(IoError::EmptyMesh);
    }
    let t = NormalizationTransform::fit(&Aabb::from_points(&soup.vertices));
    let mut out = soup.clone();
    for v in &mut out.vertices {
        *v = t.apply(v);
    }
    out.drop_degenerate(DEGENERATE_AREA);
    Ok((out, t))
}

/// Merged point samples in a shared world frame.
#[derive(Clone, Debug, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn normalize(&self) -> Result<(PointCloud, NormalizationTransform), IoError> {
        if self.points.is_empty() {
            return Err(IoError::EmptyCloud);
        }
        let t = NormalizationTransform::fit(&Aabb::from_points(&self.points));
        let points = self.points.iter().map(|p| t.apply(p)).collect();
        Ok((PointCloud { points }, t))
    }
}

fn open(path: &Path) -> Result<File, IoError> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IoError::FileNotFound(path.into()),
        _ => IoError::Io(e),
    })
}

pub fn load_mesh(path: impl AsRef<Path>, format: Format) -> Result<TriangleSoup, IoError> {
    let path = path.as_ref();
    let format = format.resolve(path)?;
    let file = open(path)?;
    let mut reader = BufReader::new(file);
    let mut soup = match format {
        Format::Obj => read_obj(&mut reader)?,
        Format::Off => read_off(&mut reader)?,
        Format::Ply => {
            let (vertices, polys) = read_ply(&mut reader)?;
            TriangleSoup::from_polygons(vertices, &polys)
        }
        Format::Xyz | Format::Auto => return Err(IoError::UnsupportedFormat(path.into())),
    };
    if soup.vertices.is_empty() {
        return Err(IoError::EmptyMesh);
    }
    soup.provenance = path.display().to_string();
    Ok(soup)
}

/// Loads and concatenates point files (PLY vertices or XYZ text).
pub fn load_point_cloud<P: AsRef<Path>>(paths: &[P]) -> Result<PointCloud, IoError> {
    let mut points = Vec::new();
    for path in paths {
        let path = path.as_ref();
        let format = Format::Auto.resolve(path).unwrap_or(Format::Xyz);
        let mut reader = BufReader::new(open(path)?);
        match format {
            Format::Ply => points.extend(read_ply(&mut reader)?.0),
            Format::Obj => points.extend(read_obj(&mut reader)?.vertices),
            Format::Off => points.extend(read_off(&mut reader)?.vertices),
            _ => points.extend(read_xyz(&mut reader)?),
        }
    }
    if points.is_empty() {
        return Err(IoError::EmptyCloud);
    }
    Ok(PointCloud { points })
}

fn parse_f64(tok: Option<&str>, line: usize) -> Result<f64, IoError> {
    let tok = tok.ok_or_else(|| parse_err(line, "missing coordinate"))?;
    tok.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid number '{tok}'")))
}

pub fn read_obj(reader: &mut impl BufRead) -> Result<TriangleSoup, IoError> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    // whether every face corner names the normal with its vertex's index
    let mut normals_per_vertex = true;
    let mut polys: Vec<Vec<u32>> = Vec::new();
    let point = |toks: &mut std::str::SplitWhitespace, lineno| -> Result<Vec3, IoError> {
        let x = parse_f64(toks.next(), lineno)?;
        let y = parse_f64(toks.next(), lineno)?;
        let z = parse_f64(toks.next(), lineno)?;
        Ok(Vec3::new(x, y, z))
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => vertices.push(point(&mut toks, lineno)?),
            Some("vn") => normals.push(point(&mut toks, lineno)?),
            Some("f") => {
                let mut poly = Vec::new();
                for tok in toks {
                    let mut parts = tok.split('/');
                    let idx = parts.next().unwrap_or("");
                    let idx: i64 = idx
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid index '{tok}'")))?;
                    let resolved = if idx > 0 {
                        idx - 1
                    } else if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        return Err(parse_err(lineno, "index 0 is invalid in OBJ"));
                    };
                    if resolved < 0 {
                        return Err(parse_err(lineno, format!("index {idx} out of range")));
                    }
                    let vn = parts.nth(1).and_then(|n| n.parse::<i64>().ok());
                    normals_per_vertex &= vn == Some(idx);
                    poly.push(resolved as u32);
                }
                polys.push(poly);
            }
            _ => {}
        }
    }
    let mut soup = TriangleSoup::from_polygons(vertices, &polys);
    if normals_per_vertex && normals.len() == soup.vertices.len() {
        soup.normals = normals;
    }
    Ok(soup)
}

/// Iterator over non-empty, non-comment lines with their line numbers.
fn data_lines(reader: &mut impl BufRead) -> Result<Vec<(usize, String)>, IoError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim().to_string();
        if !content.is_empty() {
            out.push((i + 1, content));
        }
    }
    Ok(out)
}

pub fn read_off(reader: &mut impl BufRead) -> Result<TriangleSoup, IoError> {
    let lines = data_lines(reader)?;
    let mut toks: Vec<(usize, &str)> = Vec::new();
    for (n, l) in &lines {
        for t in l.split_whitespace() {
            toks.push((*n, t));
        }
    }
    let mut it = toks.into_iter();
    match it.next() {
        Some((_, h)) if h.ends_with("OFF") => {}
        Some((n, h)) => return Err(parse_err(n, format!("expected OFF header, found '{h}'"))),
        None => return Err(IoError::EmptyMesh),
    }
    let mut next_usize = |what: &str| -> Result<usize, IoError> {
        let (n, t) = it
            .next()
            .ok_or_else(|| parse_err(lines.len(), format!("missing {what}")))?;
        t.parse::<usize>()
            .map_err(|_| parse_err(n, format!("invalid {what} '{t}'")))
    };
    let nv = next_usize("vertex count")?;
    let nf = next_usize("face count")?;
    let _ne = next_usize("edge count")?;
    // The closure above borrows `it`; collect the remaining tokens.
    let rest: Vec<(usize, &str)> = it.collect();
    let mut pos = 0;
    let take = |pos: &mut usize, what: &str| -> Result<(usize, &str), IoError> {
        let tok = rest
            .get(*pos)
            .copied()
            .ok_or_else(|| parse_err(lines.len(), format!("missing {what}")))?;
        *pos += 1;
        Ok(tok)
    };
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut c = [0.0; 3];
        for v in &mut c {
            let (n, t) = take(&mut pos, "coordinate")?;
            *v = parse_f64(Some(t), n)?;
        }
        vertices.push(Vec3::new(c[0], c[1], c[2]));
    }
    let mut polys = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, t) = take(&mut pos, "face size")?;
        let k: usize = t
            .parse()
            .map_err(|_| parse_err(n, format!("invalid face size '{t}'")))?;
        let mut poly = Vec::with_capacity(k);
        for _ in 0..k {
            let (n, t) = take(&mut pos, "face index")?;
            poly.push(
                t.parse::<u32>()
                    .map_err(|_| parse_err(n, format!("invalid index '{t}'")))?,
            );
        }
        polys.push(poly);
        // Trailing colour values on the same line are not consumed here;
        // skip any remaining tokens that share this face's line.
        while let Some(&(m, _)) = rest.get(pos) {
            if m == n {
                pos += 1;
            } else {
                break;
            }
        }
    }
    Ok(TriangleSoup::from_polygons(vertices, &polys))
}

pub fn read_xyz(reader: &mut impl BufRead) -> Result<Vec<Vec3>, IoError> {
    let mut out = Vec::new();
    for (n, line) in data_lines(reader)? {
        let mut toks = line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty());
        let x = parse_f64(toks.next(), n)?;
        let y = parse_f64(toks.next(), n)?;
        let z = parse_f64(toks.next(), n)?;
        out.push(Vec3::new(x, y, z));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
    BinaryBe,
}

#[derive(Clone, Copy, Debug)]
enum PlyScalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyScalar {
    fn parse(name: &str) -> Option<PlyScalar> {
        Some(match name {
            "char" | "int8" => PlyScalar::I8,
            "uchar" | "uint8" => PlyScalar::U8,
            "short" | "int16" => PlyScalar::I16,
            "ushort" | "uint16" => PlyScalar::U16,
            "int" | "int32" => PlyScalar::I32,
            "uint" | "uint32" => PlyScalar::U32,
            "float" | "float32" => PlyScalar::F32,
            "double" | "float64" => PlyScalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyScalar::I8 | PlyScalar::U8 => 1,
            PlyScalar::I16 | PlyScalar::U16 => 2,
            PlyScalar::I32 | PlyScalar::U32 | PlyScalar::F32 => 4,
            PlyScalar::F64 => 8,
        }
    }

    fn read(self, r: &mut (impl Read + ?Sized), enc: PlyEncoding) -> std::io::Result<f64> {
        let mut buf = [0u8; 8];
        let n = self.size();
        r.read_exact(&mut buf[..n])?;
        let b = &buf[..n];
        macro_rules! conv {
            ($t:ty) => {{
                let arr: [u8; std::mem::size_of::<$t>()] = b.try_into().unwrap();
                (if enc == PlyEncoding::BinaryBe {
                    <$t>::from_be_bytes(arr)
                } else {
                    <$t>::from_le_bytes(arr)
                }) as f64
            }};
        }
        Ok(match self {
            PlyScalar::I8 => conv!(i8),
            PlyScalar::U8 => conv!(u8),
            PlyScalar::I16 => conv!(i16),
            PlyScalar::U16 => conv!(u16),
            PlyScalar::I32 => conv!(i32),
            PlyScalar::U32 => conv!(u32),
            PlyScalar::F32 => conv!(f32),
            PlyScalar::F64 => conv!(f64),
        })
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar(String, PlyScalar),
    List(String, PlyScalar, PlyScalar),
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    props: Vec<PlyProperty>,
}

/// Reads vertex positions and face index lists from a PLY stream.
fn read_ply(reader: &mut impl BufRead) -> Result<(Vec<Vec3>, Vec<Vec<u32>>), IoError> {
    let mut line = String::new();
    let mut lineno = 0;
    let mut read_line = |reader: &mut dyn BufRead, line: &mut String| -> Result<usize, IoError> {
        line.clear();
        let n = reader.read_line(line)?;
        lineno += 1;
        if n == 0 {
            return Err(parse_err(lineno, "unexpected end of PLY header"));
        }
        Ok(lineno)
    };
    let n = read_line(reader, &mut line)?;
    if line.trim() != "ply" {
        return Err(parse_err(n, "missing 'ply' magic"));
    }
    let mut encoding = None;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        let n = read_line(reader, &mut line)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                encoding = Some(match toks.get(1).copied() {
                    Some("ascii") => PlyEncoding::Ascii,
                    Some("binary_little_endian") => PlyEncoding::BinaryLe,
                    Some("binary_big_endian") => PlyEncoding::BinaryBe,
                    other => return Err(parse_err(n, format!("unknown PLY format {other:?}"))),
                })
            }
            Some("element") => {
                let name = toks.get(1).ok_or_else(|| parse_err(n, "element without name"))?;
                let count = toks
                    .get(2)
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(n, "element without count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(n, "property before element"))?;
                if toks.get(1) == Some(&"list") {
                    let (Some(ct), Some(it), Some(name)) = (
                        toks.get(2).and_then(|t| PlyScalar::parse(t)),
                        toks.get(3).and_then(|t| PlyScalar::parse(t)),
                        toks.get(4),
                    ) else {
                        return Err(parse_err(n, "malformed list property"));
                    };
                    el.props.push(PlyProperty::List(name.to_string(), ct, it));
                } else {
                    let (Some(ty), Some(name)) =
                        (toks.get(1).and_then(|t| PlyScalar::parse(t)), toks.get(2))
                    else {
                        return Err(parse_err(n, "malformed property"));
                    };
                    el.props.push(PlyProperty::Scalar(name.to_string(), ty));
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let encoding = encoding.ok_or_else(|| parse_err(lineno, "missing format line"))?;
    let mut vertices = Vec::new();
    let mut polys = Vec::new();

    let mut ascii_tokens: Vec<(usize, String)> = Vec::new();
    let mut tok_pos = 0;
    if encoding == PlyEncoding::Ascii {
        for (i, l) in reader.lines().enumerate() {
            let l = l?;
            for t in l.split_whitespace() {
                ascii_tokens.push((lineno + i + 1, t.to_string()));
            }
        }
    }
    let mut next_value = |reader: &mut dyn BufRead, ty: PlyScalar| -> Result<f64, IoError> {
        if encoding == PlyEncoding::Ascii {
            let (n, t) = ascii_tokens
                .get(tok_pos)
                .ok_or_else(|| parse_err(lineno, "unexpected end of PLY data"))?;
            tok_pos += 1;
            t.parse::<f64>()
                .map_err(|_| parse_err(*n, format!("invalid value '{t}'")))
        } else {
            ty.read(reader, encoding)
                .map_err(|_| parse_err(lineno, "unexpected end of binary PLY data"))
        }
    };

    for el in &elements {
        for _ in 0..el.count {
            let mut pos = [0.0f64; 3];
            let mut poly: Option<Vec<u32>> = None;
            for prop in &el.props {
                match prop {
                    PlyProperty::Scalar(name, ty) => {
                        let v = next_value(reader, *ty)?;
                        match name.as_str() {
                            "x" => pos[0] = v,
                            "y" => pos[1] = v,
                            "z" => pos[2] = v,
                            _ => {}
                        }
                    }
                    PlyProperty::List(name, ct, it) => {
                        let k = next_value(reader, *ct)? as usize;
                        let mut idx = Vec::with_capacity(k);
                        for _ in 0..k {
                            idx.push(next_value(reader, *it)? as u32);
                        }
                        if name == "vertex_indices" || name == "vertex_index" {
                            poly = Some(idx);
                        }
                    }
                }
            }
            match el.name.as_str() {
                "vertex" => vertices.push(Vec3::new(pos[0], pos[1], pos[2])),
                "face" => polys.extend(poly),
                _ => {}
            }
        }
    }
    Ok((vertices, polys))
}

/// Formats `x` with nine significant digits.
pub fn fmt_sig9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let e = x.abs().log10().floor() as i32;
    if (-5..9).contains(&e) {
        let decimals = (8 - e).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.8e}")
    }
}

/// Writes an indexed mesh in model units (the inverse transform is applied).
/// Per-vertex `normals`, if given, go to OBJ `vn` and PLY `nx ny nz`.
pub fn save_mesh(
    vertices: &[Vec3],
    faces: &[[u32; 3]],
    normals: Option<&[Vec3]>,
    transform: &NormalizationTransform,
    path: impl AsRef<Path>,
    format: Format,
) -> Result<(), IoError> {
    let path = path.as_ref();
    let format = format.resolve(path)?;
    let mut w = BufWriter::new(File::create(path)?);
    let world: Vec<Vec3> = vertices.iter().map(|v| transform.invert(v)).collect();
    match format {
        Format::Obj => {
            for v in &world {
                writeln!(w, "v {} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z))?;
            }
            if let Some(ns) = normals {
                for n in ns {
                    writeln!(w, "vn {} {} {}", fmt_sig9(n.x), fmt_sig9(n.y), fmt_sig9(n.z))?;
                }
                for f in faces {
                    let [a, b, c] = f.map(|i| i + 1);
                    writeln!(w, "f {a}//{a} {b}//{b} {c}//{c}")?;
                }
            } else {
                for f in faces {
                    writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
                }
            }
        }
        Format::Off => {
            writeln!(w, "OFF\n{} {} 0", world.len(), faces.len())?;
            for v in &world {
                writeln!(w, "{} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z))?;
            }
            for f in faces {
                writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
            }
        }
        Format::Ply => {
            let normal_props = if normals.is_some() {
                "property double nx\nproperty double ny\nproperty double nz\n"
            } else {
                ""
            };
            write!(
                w,
                "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
                 property double x\nproperty double y\nproperty double z\n{normal_props}\
                 element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
                world.len(),
                faces.len()
            )?;
            for (i, v) in world.iter().enumerate() {
                for c in [v.x, v.y, v.z] {
                    w.write_all(&c.to_le_bytes())?;
                }
                if let Some(ns) = normals {
                    for c in [ns[i].x, ns[i].y, ns[i].z] {
                        w.write_all(&c.to_le_bytes())?;
                    }
                }
            }
            for f in faces {
                w.write_all(&[3u8])?;
                for i in f {
                    w.write_all(&i.to_le_bytes())?;
                }
            }
        }
        Format::Xyz | Format::Auto => {
            for v in &world {
                writeln!(w, "{} {} {}", fmt_sig9(v.x), fmt_sig9(v.y), fmt_sig9(v.z))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn obj(s: &str) -> TriangleSoup {
        read_obj(&mut Cursor::new(s)).unwrap()
    }

    #[test]
    fn obj_normals_round_trip_when_indexed_like_vertices() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        let n = vec![Vec3::z(); 3];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.obj");
        save_mesh(&v, &[[0, 1, 2]], Some(&n), &NormalizationTransform::identity(), &path, Format::Auto).unwrap();
        assert_eq!(load_mesh(&path, Format::Auto).unwrap().normals, n);
        // normals listed but not indexed per vertex are dropped
        let s = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvn 0 0 1\nvn 0 0 1\nf 1//1 2//1 3//1\n");
        assert!(s.normals.is_empty());
    }

    #[test]
    fn obj_single_face() {
        let s = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
        assert_eq!(s.vertices.len(), 3);
        assert_eq!(s.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_quad_fan() {
        let s = obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
        assert_eq!(s.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_repeated_index_is_warned() {
        let s = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n");
        assert!(s.faces.is_empty());
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn obj_negative_and_slashed_indices() {
        let s = obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nf -3/1/1 -2//2 -1/3\n");
        assert_eq!(s.faces, vec![[0, 1, 2]]);
    }

    #[test]
    fn obj_parse_error_line() {
        let e = read_obj(&mut Cursor::new("v 0 0 0\nv 1 x 0\n")).unwrap_err();
        assert!(matches!(e, IoError::ParseError { line: 2, .. }));
    }

    #[test]
    fn ngon_gives_n_minus_2() {
        let verts = (0..7)
            .map(|i| {
                let a = i as f64;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        let s = TriangleSoup::from_polygons(verts, &[(0..7).collect()]);
        assert_eq!(s.faces.len(), 5);
        assert_eq!(s.vertices.len(), 7);
    }

    #[test]
    fn off_and_ply_ascii() {
        let off = "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let s = read_off(&mut Cursor::new(off)).unwrap();
        assert_eq!(s.faces.len(), 2);
        let ply = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\n\
                   property float z\nelement face 1\nproperty list uchar int vertex_indices\n\
                   end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n";
        let (v, f) = read_ply(&mut Cursor::new(ply)).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(f, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn normalize_cube_example() {
        let verts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(2.0, 2.0, 2.0), Vec3::new(2.0, 0.0, 0.0)];
        let soup = TriangleSoup::new(verts, vec![[0, 1, 2]]);
        let (n, t) = normalize(&soup).unwrap();
        assert_eq!(t.center, Vec3::new(1.0, 1.0, 1.0));
        assert!((t.scale - 0.9).abs() < 1e-15);
        assert!((n.vertices[0] - Vec3::repeat(-0.9)).norm() < 1e-15);
        assert!((n.vertices[1] - Vec3::repeat(0.9)).norm() < 1e-15);
        // inverse: v / 0.9 + (1,1,1)
        let back = t.invert(&Vec3::new(0.45, 0.0, -0.9));
        assert!((back - Vec3::new(1.5, 1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn normalize_flat_and_small() {
        let verts = vec![Vec3::new(-0.2, -0.2, 0.0), Vec3::new(0.2, -0.2, 0.0), Vec3::new(0.0, 0.2, 0.0)];
        let (n, t) = normalize(&TriangleSoup::new(verts, vec![[0, 1, 2]])).unwrap();
        assert!(t.scale.is_finite() && t.scale > 0.0);
        for v in &n.vertices {
            assert!(v.iter().all(|c| c.abs() < 1.0));
        }
        assert!(matches!(normalize(&TriangleSoup::default()), Err(IoError::EmptyMesh)));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(1.0), "1");
        assert_eq!(fmt_sig9(0.123456789123), "0.123456789");
        assert_eq!(fmt_sig9(-2.5), "-2.5");
        assert!(fmt_sig9(1.5e-9).parse::<f64>().unwrap() - 1.5e-9 < 1e-20);
    }
}
