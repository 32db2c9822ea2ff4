use std::path::Path;

use crate::error::{Error, Result};
use crate::integrator::psnr;
use crate::optimizer::read_image;

/// One compared file: its PSNR, or why it could not be compared.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub file: String,
    pub psnr: std::result::Result<f64, String>,
}

fn image_files(dir: &Path) -> Result<Vec<String>> {
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut names: Vec<String> = rd
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .filter_map(|e| e.file_name().into_string().ok())
        .filter(|n| {
            let l = n.to_ascii_lowercase();
            l.ends_with(".hdr") || l.ends_with(".png")
        })
        .collect();
    names.sort();
    Ok(names)
}

/// Compares every image of `gt_dir` with the same-named file in
/// `render_dir`. Per-file problems are reported in the row.
pub fn eval_dirs(render_dir: &Path, gt_dir: &Path) -> Result<Vec<EvalRow>> {
    let names = image_files(gt_dir)?;
    if !render_dir.is_dir() {
        return Err(Error::Data(format!("{} is not a directory", render_dir.display())));
    }
    Ok(names
        .into_iter()
        .map(|file| {
            let psnr = (|| {
                let (gw, gh, gt) = read_image(&gt_dir.join(&file)).map_err(|e| e.to_string())?;
                let rp = render_dir.join(&file);
                if !rp.is_file() {
                    return Err("missing render".to_string());
                }
                let (w, h, img) = read_image(&rp).map_err(|e| e.to_string())?;
                if (w, h) != (gw, gh) {
                    return Err(format!("size mismatch {w}x{h} vs {gw}x{gh}"));
                }
                Ok(psnr(&img, &gt))
            })();
            EvalRow { file, psnr }
        })
        .collect())
}

/// Arithmetic mean over rows that could be compared.
pub fn mean_psnr(rows: &[EvalRow]) -> Option<f64> {
    let ok: Vec<f64> = rows.iter().filter_map(|r| r.psnr.as_ref().ok().copied()).collect();
    (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
}

/// `file,psnr,error` rows followed by a `mean` row.
pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from("file,psnr,error\n");
    for r in rows {
        match &r.psnr {
            Ok(p) => s.push_str(&format!("{},{},\n", r.file, fmt_db(*p))),
            Err(e) => s.push_str(&format!("{},,{}\n", r.file, e.replace(',', ";"))),
        }
    }
    s.push_str(&format!("mean,{},\n", mean_psnr(rows).map_or(String::new(), fmt_db)));
    s
}

fn fmt_db(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p:.4}")
    }
}
