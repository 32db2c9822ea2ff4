//! Command-line front end: `render`, `optimize`, `eval`, `make-dataset`,
//! `selftest`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 divergence halt.

mod eval;
mod make_dataset;
mod selftest;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

pub use eval::{eval_csv, eval_dirs, mean_psnr, EvalRow};
pub use make_dataset::{dataset_cameras, is_test_view, make_dataset, DatasetOptions};
pub use selftest::{run_all as selftest, Check};

use crate::error::{Error, Result};
use crate::integrator::{render, RenderConfig};
use crate::optimizer::{evaluate, optimize, Dataset, OptimConfig};
use crate::parallel::{threads_from_env, with_threads};
use crate::scene_desc::Scene;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "refmc", version, about = "Monte Carlo renderer and inverse-rendering optimizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render one camera of a scene to Radiance HDR.
    Render(RenderArgs),
    /// Recover materials, environment and cache from posed images.
    Optimize(OptimizeArgs),
    /// Per-image and mean PSNR of renders against ground truth.
    Eval(EvalArgs),
    /// Render a posed ground-truth dataset around a scene.
    MakeDataset(MakeDatasetArgs),
    /// Run quick oracle checks.
    Selftest,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Scene description (TOML).
    #[arg(long)]
    pub scene: PathBuf,
    /// Output radiance image; the diffuse channel goes to `<stem>_diff.hdr`.
    #[arg(long)]
    pub out: PathBuf,
    /// Camera samples per pixel.
    #[arg(long)]
    pub spp: Option<u32>,
    /// Surface interactions per path (1-3).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub depth: Option<u32>,
    /// Shade secondary hits with full MIS instead of the diffuse cache.
    #[arg(long)]
    pub no_adaptive: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Index of the scene camera to use.
    #[arg(long, default_value_t = 0)]
    pub camera: usize,
    /// Render settings (TOML, same keys as the `[render]` table of an
    /// optimizer config); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Parameter checkpoint directory to render with.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub scene: PathBuf,
    /// Dataset directory with `transforms_train.json`.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML with optional `[optimizer]` and `[render]` tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured iteration count.
    #[arg(long)]
    pub iterations: Option<u32>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory of rendered images.
    #[arg(long)]
    pub renders: PathBuf,
    /// Directory of ground-truth images with matching file names.
    #[arg(long)]
    pub gt: PathBuf,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MakeDatasetArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 12)]
    pub views: usize,
    #[arg(long, default_value_t = 256)]
    pub spp: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub width: usize,
    #[arg(long, default_value_t = 64)]
    pub height: usize,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 40.0)]
    pub fov: f64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=3))]
    pub depth: u32,
}

/// Contents of an `optimize --config` file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub optimizer: OptimConfig,
    pub render: RenderConfig,
    /// Samples per pixel when scoring test views; the training spp if unset.
    pub eval_spp: Option<u32>,
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    toml::from_str(&text).map_err(|e| Error::Data(format!("{}: {}", path.display(), e.message())))
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    let mut scene = Scene::load(&a.scene)?;
    let mut cfg: RenderConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => RenderConfig { spp: 64, ..RenderConfig::default() },
    };
    if let Some(s) = a.spp {
        cfg.spp = s;
    }
    if let Some(d) = a.depth {
        cfg.depth = d;
    }
    if a.no_adaptive {
        cfg.adaptive = false;
    }
    cfg.validate()?;
    if let Some(dir) = &a.params {
        crate::assets::io::load_checkpoint(dir, &mut scene.params)?;
    }
    let cam = scene
        .cameras
        .get(a.camera)
        .ok_or_else(|| Error::Data(format!("scene has {} camera(s), asked for index {}", scene.cameras.len(), a.camera)))?;
    let img = render(&scene.geometry, &scene.params, cam, &cfg, a.seed)?;
    img.write_hdr(&a.out)?;
    img.write_diffuse_hdr(&diffuse_path(&a.out))?;
    let s = &img.stats;
    println!(
        "rays {} rays/s {:.4e} camera_samples {} nan {} seconds {:.3}",
        s.rays,
        s.rays_per_second(),
        s.camera_samples,
        s.nan_samples,
        s.seconds
    );
    Ok(())
}

/// `out.hdr` → `out_diff.hdr`.
pub fn diffuse_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
    let ext = out.extension().map_or_else(|| "hdr".into(), |e| e.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}_diff.{ext}"))
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    let mut scene = Scene::load(&a.scene)?;
    let mut rc: RunConfig = match &a.config {
        Some(p) => read_toml(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        rc.optimizer.seed = s;
    }
    if let Some(n) = a.iterations {
        rc.optimizer.iterations = n;
    }
    let data = Dataset::load(&a.data)?;
    let report = optimize(&scene.geometry, &mut scene.params, &data, &rc.optimizer, &rc.render, Some(&a.out))?;
    if let Some(last) = report.metrics.last() {
        println!(
            "steps {} l_rgb {:.6e} l_diff {:.6e} train_psnr {:.3} skipped_leaves {} nan {}",
            report.metrics.len(),
            last.l_rgb,
            last.l_diff,
            last.psnr,
            report.skipped_leaves,
            report.nan_samples
        );
    }
    if !data.test.is_empty() {
        let eval = RenderConfig { spp: rc.eval_spp.unwrap_or(rc.render.spp), ..rc.render.clone() };
        let ps = evaluate(&scene.geometry, &scene.params, &data.test, &eval, rc.optimizer.seed)?;
        let mut csv = String::from("view,psnr\n");
        for (v, p) in data.test.iter().zip(&ps) {
            csv.push_str(&format!("{},{p:.4}\n", v.name));
        }
        let mean = ps.iter().sum::<f64>() / ps.len() as f64;
        csv.push_str(&format!("mean,{mean:.4}\n"));
        let p = a.out.join("test_psnr.csv");
        std::fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
        println!("test_psnr {mean:.3}");
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let rows = eval_dirs(&a.renders, &a.gt)?;
    for r in &rows {
        if let Err(e) = &r.psnr {
            eprintln!("eval: {}: {e}", r.file);
        }
    }
    let csv = eval_csv(&rows);
    match &a.out {
        Some(p) => std::fs::write(p, csv).map_err(|e| Error::io(p, e))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_make_dataset(a: &MakeDatasetArgs) -> Result<()> {
    let scene = Scene::load(&a.scene)?;
    let opts = DatasetOptions {
        views: a.views,
        spp: a.spp,
        seed: a.seed,
        width: a.width,
        height: a.height,
        fov_x: a.fov.to_radians(),
        depth: a.depth,
        ..DatasetOptions::default()
    };
    let (train, test) = make_dataset(&scene, &opts, &a.out)?;
    println!("train {train} test {test}");
    Ok(())
}

fn cmd_selftest() -> Result<bool> {
    let checks = selftest();
    for c in &checks {
        println!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(checks.iter().all(|c| c.passed))
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Diverged(_) => EXIT_DIVERGED,
        _ => EXIT_DATA,
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let threads = threads_from_env().unwrap_or(0);
    let result = with_threads(threads, || match &cli.command {
        Command::Render(a) => cmd_render(a).map(|_| true),
        Command::Optimize(a) => cmd_optimize(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::MakeDataset(a) => cmd_make_dataset(a).map(|_| true),
        Command::Selftest => cmd_selftest(),
    });
    match result {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_DATA,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
