//! Image and checkpoint file formats.
//!
//! * Radiance `.hdr` (RGBE) for radiance images and environment maps.
//! * 8-bit PNG for previews and texture export. Texture PNGs hold linear
//!   values scaled by 255; previews are tonemapped and sRGB encoded.
//! * `RFM1` raw float dumps: magic `RFM1`, then little-endian `u32` width,
//!   height, channel count, then `width * height * channels` little-endian
//!   `f32` values, row-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::codecs::hdr::{HdrDecoder, HdrEncoder};
use image::ImageDecoder;

use super::texture::Texture2D;
use super::{EnvironmentMap, ParamLeaf, ParamSet};
use crate::error::{Error, Result};
use crate::math::{reinhard, srgb_encode};

pub const RFM_MAGIC: &[u8; 4] = b"RFM1";

fn image_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Image { path: path.to_path_buf(), message: e.to_string() }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

/// Writes interleaved linear RGB as Radiance RGBE.
pub fn write_hdr(path: &Path, width: usize, height: usize, rgb: &[f32]) -> Result<()> {
    if rgb.len() != width * height * 3 {
        return Err(Error::Data(format!("hdr write: {} values for {width}x{height}", rgb.len())));
    }
    let pixels: Vec<image::Rgb<f32>> = rgb.chunks_exact(3).map(|c| image::Rgb([c[0], c[1], c[2]])).collect();
    let mut w = create(path)?;
    HdrEncoder::new(&mut w).encode(&pixels, width, height).map_err(|e| image_err(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a Radiance `.hdr` file into `(width, height, rgb)`.
pub fn read_hdr(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let dec = HdrDecoder::new(BufReader::new(f)).map_err(|e| image_err(path, e))?;
    let (w, h) = dec.dimensions();
    let mut bytes = vec![0u8; dec.total_bytes() as usize];
    dec.read_image(&mut bytes).map_err(|e| image_err(path, e))?;
    let data = bytes.chunks_exact(4).map(|b| f32::from_ne_bytes([b[0], b[1], b[2], b[3]])).collect();
    Ok((w as usize, h as usize, data))
}

/// Writes `channels`-interleaved values in `[0, 1]` as an 8-bit PNG.
pub fn write_png(path: &Path, width: usize, height: usize, channels: usize, values: &[f32]) -> Result<()> {
    let color = match channels {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        4 => image::ExtendedColorType::Rgba8,
        c => return Err(Error::Data(format!("png write: unsupported channel count {c}"))),
    };
    let bytes: Vec<u8> = values.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    image::save_buffer(path, &bytes, width as u32, height as u32, color).map_err(|e| image_err(path, e))
}

/// Reads an 8-bit PNG as `(width, height, channels, values in [0,1])`.
pub fn read_png(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let img = image::open(path).map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let (channels, bytes) = match img.color().channel_count() {
        1 => (1, img.to_luma8().into_raw()),
        2 | 4 => (4, img.to_rgba8().into_raw()),
        _ => (3, img.to_rgb8().into_raw()),
    };
    Ok((w, h, channels, bytes.into_iter().map(|b| b as f32 / 255.0).collect()))
}

/// Tonemapped (Reinhard) and sRGB-encoded preview of linear RGB radiance.
pub fn write_preview_png(path: &Path, width: usize, height: usize, rgb: &[f32]) -> Result<()> {
    let display: Vec<f32> = rgb.iter().map(|&v| srgb_encode(reinhard(v.max(0.0) as f64)) as f32).collect();
    write_png(path, width, height, 3, &display)
}

pub fn write_rfm(path: &Path, width: usize, height: usize, channels: usize, data: &[f32]) -> Result<()> {
    if data.len() != width * height * channels {
        return Err(Error::Data(format!("rfm write: {} values for {width}x{height}x{channels}", data.len())));
    }
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(16 + data.len() * 4);
    buf.extend_from_slice(RFM_MAGIC);
    for d in [width, height, channels] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_rfm(path: &Path) -> Result<(usize, usize, usize, Vec<f32>)> {
    let mut bytes = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 || &bytes[..4] != RFM_MAGIC {
        return Err(Error::Data(format!("{}: not an RFM1 file", path.display())));
    }
    let dim = |k: usize| u32::from_le_bytes(bytes[4 + 4 * k..8 + 4 * k].try_into().unwrap()) as usize;
    let (w, h, c) = (dim(0), dim(1), dim(2));
    let n = w.checked_mul(h).and_then(|x| x.checked_mul(c)).unwrap_or(usize::MAX);
    if n == usize::MAX || bytes.len() != 16 + n * 4 {
        return Err(Error::Data(format!("{}: RFM1 payload size mismatch", path.display())));
    }
    let data = bytes[16..].chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
    Ok((w, h, c, data))
}

pub fn save_texture_rfm(path: &Path, tex: &Texture2D) -> Result<()> {
    write_rfm(path, tex.width, tex.height, tex.channels, &tex.data)
}

/// Loads an `.rfm`, `.hdr`, or `.png` file as a texture.
pub fn load_texture(path: &Path) -> Result<Texture2D> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "rfm" => {
            let (w, h, c, d) = read_rfm(path)?;
            Texture2D::new(w, h, c, d)
        }
        "hdr" => {
            let (w, h, d) = read_hdr(path)?;
            Texture2D::new(w, h, 3, d)
        }
        "png" => {
            let (w, h, c, d) = read_png(path)?;
            Texture2D::new(w, h, c, d)
        }
        _ => Err(Error::Data(format!("{}: unknown texture format", path.display()))),
    }
}

pub fn load_environment(path: &Path) -> Result<EnvironmentMap> {
    let mut tex = load_texture(path)?;
    if tex.channels != 3 {
        let c = tex.channels;
        let data = tex.data.chunks_exact(c).flat_map(|t| [t[0], t[1.min(c - 1)], t[2.min(c - 1)]]).collect();
        tex = Texture2D::new(tex.width, tex.height, 3, data)?;
    }
    EnvironmentMap::new(tex)
}

fn leaf_file(leaf: ParamLeaf) -> String {
    match leaf {
        ParamLeaf::Kd(m) => format!("kd_{m}.rfm"),
        ParamLeaf::Orm(m) => format!("orm_{m}.rfm"),
        ParamLeaf::Normal(m) => format!("normal_{m}.rfm"),
        ParamLeaf::Cache(m) => format!("cache_{m}.rfm"),
        ParamLeaf::Env => "env.rfm".to_string(),
    }
}

/// Writes one `RFM1` file per leaf into `dir`.
pub fn save_checkpoint(dir: &Path, params: &ParamSet) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for leaf in params.leaves() {
        save_texture_rfm(&dir.join(leaf_file(leaf)), params.texture(leaf))?;
    }
    Ok(())
}

/// Overwrites the texels of `params` from a checkpoint written by
/// [`save_checkpoint`]; shapes must match.
pub fn load_checkpoint(dir: &Path, params: &mut ParamSet) -> Result<()> {
    for leaf in params.leaves() {
        let path = dir.join(leaf_file(leaf));
        let (w, h, c, data) = read_rfm(&path)?;
        let tex = params.texture(leaf);
        if (w, h, c) != (tex.width, tex.height, tex.channels) {
            return Err(Error::Data(format!("{}: shape {w}x{h}x{c} does not match parameter set", path.display())));
        }
        params.data_mut(leaf).copy_from_slice(&data);
    }
    params.env.build_cdf();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::MaterialParams;
    use crate::math::Vec3;
    use crate::sampling::Rng;

    #[test]
    fn rfm_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(1);
        let data: Vec<f32> = (0..5 * 3 * 2).map(|_| (rng.next_f64() * 1e3 - 5e2) as f32).collect();
        let p = dir.path().join("t.rfm");
        write_rfm(&p, 5, 3, 2, &data).unwrap();
        let (w, h, c, back) = read_rfm(&p).unwrap();
        assert_eq!((w, h, c), (5, 3, 2));
        assert_eq!(data.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), back.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"RFM1");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 5);
        assert_eq!(bytes.len(), 16 + 30 * 4);
    }

    #[test]
    fn rfm_rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.rfm");
        std::fs::write(&p, b"RFM2\0\0\0\0").unwrap();
        assert!(read_rfm(&p).is_err());
    }

    #[test]
    fn png_round_trip_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = Rng::new(2);
        let data: Vec<f32> = (0..7 * 4 * 4).map(|_| rng.next_f64() as f32).collect();
        let p = dir.path().join("t.png");
        write_png(&p, 7, 4, 4, &data).unwrap();
        let tex = load_texture(&p).unwrap();
        assert_eq!((tex.width, tex.height, tex.channels), (7, 4, 4));
        for (a, b) in data.iter().zip(&tex.data) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn hdr_round_trip_within_rgbe_precision() {
        let dir = tempfile::tempdir().unwrap();
        let data: Vec<f32> = (0..6 * 2 * 3).map(|i| 0.05 + i as f32 * 0.37).collect();
        let p = dir.path().join("t.hdr");
        write_hdr(&p, 6, 2, &data).unwrap();
        let (w, h, back) = read_hdr(&p).unwrap();
        assert_eq!((w, h), (6, 2));
        for px in data.chunks(3).zip(back.chunks(3)) {
            let m = px.0.iter().cloned().fold(0.0f32, f32::max);
            for (a, b) in px.0.iter().zip(px.1) {
                // RGBE keeps 8 mantissa bits relative to the largest channel.
                assert!((a - b).abs() <= m / 128.0, "{a} {b}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = ParamSet {
            materials: vec![MaterialParams::constant(Vec3::splat(0.3), 0.6, 0.2, 4, 2)],
            env: EnvironmentMap::constant(8, 4, Vec3::splat(0.9)),
        };
        p.data_mut(ParamLeaf::Kd(0))[5] = 0.123_456_7;
        p.data_mut(ParamLeaf::Env)[2] = 3.25;
        p.project();
        save_checkpoint(dir.path(), &p).unwrap();
        let mut q = ParamSet {
            materials: vec![MaterialParams::constant(Vec3::ZERO, 0.0, 0.0, 4, 2)],
            env: EnvironmentMap::constant(8, 4, Vec3::ZERO),
        };
        load_checkpoint(dir.path(), &mut q).unwrap();
        for leaf in p.leaves() {
            assert_eq!(p.texture(leaf).data, q.texture(leaf).data);
        }
        assert!(!q.env.uses_uniform_fallback());
    }
}
