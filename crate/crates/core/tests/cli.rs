use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use refmc::assets::io::write_hdr;
use refmc::integrator::display_value;
use refmc::optimizer::read_image;

const SCENE: &str = r#"
[environment]
radiance = [1.0, 0.9, 0.8]

[[material]]
name = "clay"
base_color = [0.7, 0.4, 0.3]
roughness = 0.5

[[mesh]]
material = "clay"
sphere = { center = [0.0, 0.0, 0.0], radius = 0.5, segments = 16, rings = 8 }

[[camera]]
eye = [0.0, 0.0, 2.5]
target = [0.0, 0.0, 0.0]
fov_x = 40.0
width = 16
height = 16
"#;

fn refmc(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refmc"))
        .args(args.iter().map(|a| a.as_ref()))
        .env("REFMC_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn scene_in(dir: &Path) -> PathBuf {
    let p = dir.join("scene.toml");
    std::fs::write(&p, SCENE).unwrap();
    p
}

fn make_dataset(scene: &Path, out: &Path, views: &str) -> Output {
    refmc(&[&"make-dataset", &"--scene", &scene, &"--out", &out, &"--views", &views, &"--spp", &"4", &"--width", &"12", &"--height", &"12", &"--seed", &"3"])
}

/// Every regular file under `dir`, relative path → bytes, sorted.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(refmc(&[&"bogus"]).status.code(), Some(1));
    assert_eq!(refmc(&[&"render", &"--scene", &"x.toml"]).status.code(), Some(1));
    assert_eq!(refmc(&[&"render", &"--scene", &"x.toml", &"--out", &"y.hdr", &"--depth", &"9"]).status.code(), Some(1));
    assert_eq!(refmc(&[&"--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    let out = refmc(&[&"render", &"--scene", &missing, &"--out", &dir.path().join("o.hdr")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.toml"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SCENE.replace("[environment]", "colour = 1\n[environment]")).unwrap();
    let out = refmc(&[&"render", &"--scene", &bad, &"--out", &dir.path().join("o.hdr")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn render_writes_both_channels() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_in(dir.path());
    let out = dir.path().join("img.hdr");
    let o = refmc(&[&"render", &"--scene", &scene, &"--out", &out, &"--spp", &"2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let (w, h, px) = read_image(&out).unwrap();
    assert_eq!((w, h), (16, 16));
    assert!(px.iter().all(|p| p.is_finite()));
    assert!(dir.path().join("img_diff.hdr").is_file());
}

#[test]
fn make_dataset_splits_two_to_one_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_in(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = make_dataset(&scene, &a, "3");
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "train 2 test 1");
    assert_eq!(make_dataset(&scene, &b, "3").status.code(), Some(0));
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert_eq!(sa.len(), 5);
    assert_eq!(sa, sb);
    for (p, _) in sa.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "hdr")) {
        let (_, _, px) = read_image(&a.join(p)).unwrap();
        assert!(px.iter().all(|c| c.is_finite() && c.x >= 0.0 && c.y >= 0.0 && c.z >= 0.0));
    }
}

#[test]
fn optimize_divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_in(dir.path());
    let data = dir.path().join("data");
    assert_eq!(make_dataset(&scene, &data, "3").status.code(), Some(0));
    // A guard this tight trips on the first noisy step above the minimum.
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[optimizer]\niterations = 50\nlr = 1.0\nwarmup = 0\ndivergence_factor = 1.0001\ndivergence_window = 1\n[render]\nspp = 1\n").unwrap();
    let o = refmc(&[&"optimize", &"--scene", &scene, &"--data", &data, &"--config", &cfg, &"--out", &dir.path().join("out")]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn optimize_writes_checkpoint_and_test_scores() {
    let dir = tempfile::tempdir().unwrap();
    let scene = scene_in(dir.path());
    let data = dir.path().join("data");
    assert_eq!(make_dataset(&scene, &data, "3").status.code(), Some(0));
    let out = dir.path().join("out");
    let o = refmc(&[&"optimize", &"--scene", &scene, &"--data", &data, &"--out", &out, &"--iterations", &"5"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("test_psnr"));
    let csv = std::fs::read_to_string(out.join("test_psnr.csv")).unwrap();
    assert!(csv.starts_with("view,psnr\n") && csv.contains("\nmean,"));
    assert!(out.join("final").is_dir());
}

fn write_gray(path: &Path, w: usize, h: usize, v: f32) {
    write_hdr(path, w, h, &vec![v; w * h * 3]).unwrap();
}

fn eval_rows(renders: &Path, gt: &Path) -> Vec<(String, String)> {
    let o = refmc(&[&"eval", &"--renders", &renders, &"--gt", &gt]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("file,psnr,error"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect()
}

#[test]
fn eval_identical_dirs_give_infinity() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt");
    std::fs::create_dir(&gt).unwrap();
    write_gray(&gt.join("a.hdr"), 4, 4, 0.5);
    write_gray(&gt.join("b.hdr"), 4, 4, 2.0);
    let rows = eval_rows(&gt, &gt);
    assert_eq!(rows, [("a.hdr", "inf"), ("b.hdr", "inf"), ("mean", "inf")].map(|(a, b)| (a.into(), b.into())));
}

/// Two gray levels that survive the HDR round trip and sit one display
/// unit apart.
fn one_unit_pair(dir: &Path) -> (f32, f32) {
    let p = dir.join("ramp.hdr");
    let ramp: Vec<f32> = (0..2048).map(|i| 0.02 * 200f32.powf(i as f32 / 2048.0)).collect();
    write_hdr(&p, 2048, 1, &ramp.iter().flat_map(|&v| [v; 3]).collect::<Vec<_>>()).unwrap();
    let (_, _, px) = read_image(&p).unwrap();
    let mut vals: Vec<f64> = px.iter().map(|c| c.x).collect();
    vals.dedup();
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for &a in &vals {
        for &b in &vals {
            let err = (display_value(b) - display_value(a) - 1.0).abs();
            if err < best.0 {
                best = (err, a, b);
            }
        }
    }
    assert!(best.0 < 1e-3, "no pair within 1e-3 of one display unit");
    (best.1 as f32, best.2 as f32)
}

#[test]
fn eval_one_unit_offset_is_48_13_db_and_mean_is_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let (gt, rd) = (dir.path().join("gt"), dir.path().join("r"));
    std::fs::create_dir(&gt).unwrap();
    std::fs::create_dir(&rd).unwrap();
    let (a, b) = one_unit_pair(dir.path());
    write_gray(&gt.join("one.hdr"), 8, 8, a);
    write_gray(&rd.join("one.hdr"), 8, 8, b);
    write_gray(&gt.join("two.hdr"), 8, 8, 0.3);
    write_gray(&rd.join("two.hdr"), 8, 8, 0.7);
    // Mismatched sizes are reported and excluded from the mean.
    write_gray(&gt.join("three.hdr"), 8, 8, 0.3);
    write_gray(&rd.join("three.hdr"), 4, 4, 0.3);

    let rows = eval_rows(&rd, &gt);
    let get = |name: &str| rows.iter().find(|r| r.0 == name).unwrap().1.clone();
    let one: f64 = get("one.hdr").parse().unwrap();
    assert!((one - 48.13).abs() < 0.01, "{one}");
    let two: f64 = get("two.hdr").parse().unwrap();
    assert_eq!(get("three.hdr"), "");
    let mean: f64 = get("mean").parse().unwrap();
    assert!((mean - (one + two) / 2.0).abs() < 1e-3, "{mean} vs {one}, {two}");
}
