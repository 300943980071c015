//! Batch command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, ValueEnum};
use log::{error, info};

use crate::mesh_io::{load_mesh, load_point_cloud, save_mesh, Format};
use crate::pipeline::{remesh, remesh_points, PipelineError, RemeshConfig, RemeshResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

/// Converts triangle soups (or point scans) into watertight manifold meshes.
#[derive(Debug, Parser)]
#[command(name = "watertight", version)]
pub struct PipelineConfig {
    /// Input mesh (OBJ, OFF, PLY). Repeat for a batch; in scan mode all
    /// inputs are views of one scan.
    #[arg(short, long = "input", required = true, action = ArgAction::Append)]
    pub inputs: Vec<PathBuf>,
    /// Output file, or directory for a batch.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Octree depth H.
    #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u32).range(1..=14))]
    pub depth: u32,
    #[arg(long, value_enum, num_args = 0..=1, default_value = "on", default_missing_value = "on")]
    pub sharp: Switch,
    /// Multiplies the crease detection threshold.
    #[arg(long, default_value_t = 1.0)]
    pub sharp_threshold: f64,
    /// Treat inputs as point clouds.
    #[arg(long)]
    pub scan: bool,
    /// Print one `key=value` report line per output.
    #[arg(long)]
    pub metrics: bool,
    /// Also write the extracted surface before optimization (`*.raw.*`).
    #[arg(long)]
    pub save_raw: bool,
    /// Also write octree leaf centres with their labels (`*.octree.ply`).
    #[arg(long)]
    pub dump_octree: bool,
    #[arg(long, default_value_t = crate::optimize::DEFAULT_MAX_PASSES)]
    pub max_passes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Log progress and per-stage timings to stderr.
    #[arg(short, long)]
    pub verbose: bool,
}

impl PipelineConfig {
    fn remesh_config(&self) -> RemeshConfig {
        RemeshConfig {
            depth: self.depth,
            sharp: self.sharp == Switch::On,
            sharp_threshold: self.sharp_threshold,
            max_passes: self.max_passes,
            seed: self.seed,
            // accuracy sampling costs time; only pay for it when reported
            samples: if self.metrics { crate::validate::DEFAULT_SAMPLES } else { 0 },
            ..RemeshConfig::default()
        }
    }

    /// Output path for `input`, or `None` when nothing should be written.
    fn output_for(&self, input: &Path) -> Option<PathBuf> {
        let out = self.output.as_ref()?;
        let batch = self.inputs.len() > 1 && !self.scan;
        if batch || out.is_dir() {
            // same format as the input when we can write it
            let ext = match Format::from_path(input) {
                Some(Format::Off) => "off",
                Some(Format::Ply) => "ply",
                _ => "obj",
            };
            let stem = input.file_stem().map(|s| s.to_owned()).unwrap_or_else(|| "out".into());
            Some(out.join(stem).with_extension(ext))
        } else {
            Some(out.clone())
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum RunError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] crate::mesh_io::IoError),
    #[error("output is not a watertight inversion-free manifold: {0}")]
    Invalid(String),
}

/// Side file next to `out`: `a/b.obj` with tag `raw` gives `a/b.raw.obj`.
fn sibling(out: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.{tag}.{ext}"))
}

fn write_outputs(cfg: &PipelineConfig, r: &RemeshResult, out: &Path) -> Result<(), RunError> {
    save_mesh(&r.vertices, &r.faces, Some(&r.normals), &r.transform, out, Format::Auto)?;
    if cfg.save_raw {
        let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "obj".into());
        save_mesh(&r.raw_vertices, &r.raw_faces, None, &r.transform, sibling(out, "raw", &ext), Format::Auto)?;
    }
    if cfg.dump_octree {
        let path = sibling(out, "octree", "ply");
        r.tree.write_debug_ply(&path).map_err(crate::mesh_io::IoError::Io)?;
    }
    Ok(())
}

fn process(cfg: &PipelineConfig, name: &Path, inputs: &[PathBuf]) -> Result<RemeshResult, RunError> {
    let rc = cfg.remesh_config();
    let result = if cfg.scan {
        remesh_points(&load_point_cloud(inputs)?, &rc)?
    } else {
        remesh(&load_mesh(&inputs[0], Format::Auto)?, &rc)?
    };
    if let Some(out) = cfg.output_for(name) {
        write_outputs(cfg, &result, &out)?;
    }
    if cfg.verbose {
        for (stage, s) in &result.timings {
            eprintln!("{}: {stage} {s:.3}s", name.display());
        }
    }
    let v = &result.validation;
    if !v.is_watertight_manifold {
        return Err(RunError::Invalid(format!(
            "{} boundary edges, {} non-manifold edges, {} non-manifold vertices, {} inversions",
            v.boundary_edge_count, v.nonmanifold_edge_count, v.nonmanifold_vertex_count, v.inversion_count
        )));
    }
    Ok(result)
}

fn report(out: &mut impl Write, name: &Path, r: &RemeshResult) {
    let pairs: Vec<String> = r.metrics().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(out, "{} {}", name.display(), pairs.join(" "));
}

/// Runs the tool on parsed arguments; returns the process exit status
/// (0 only if every input was processed and validated).
pub fn run(cfg: &PipelineConfig) -> i32 {
    if let Some(n) = std::env::var("MF_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // only the first call in a process can size the global pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let mut failed = false;
    let missing: Vec<&PathBuf> = cfg.inputs.iter().filter(|p| !p.is_file()).collect();
    for p in &missing {
        error!("file not found: {}", p.display());
        eprintln!("error: file not found: {}", p.display());
        failed = true;
    }
    let present: Vec<PathBuf> = cfg.inputs.iter().filter(|p| p.is_file()).cloned().collect();
    let jobs: Vec<(PathBuf, Vec<PathBuf>)> = if cfg.scan {
        if present.is_empty() {
            vec![]
        } else {
            vec![(present[0].clone(), present.clone())]
        }
    } else {
        present.iter().map(|p| (p.clone(), vec![p.clone()])).collect()
    };
    let stdout = std::io::stdout();
    for (name, inputs) in jobs {
        info!("processing {}", name.display());
        match process(cfg, &name, &inputs) {
            Ok(r) => {
                if cfg.metrics {
                    report(&mut stdout.lock(), &name, &r);
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", name.display());
                failed = true;
            }
        }
    }
    i32::from(failed)
}

/// Entry point for the binary: parse `std::env::args`, set up logging, run.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = match PipelineConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let level = if cfg.verbose { "info" } else { "warn" };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    run(&cfg)
}
