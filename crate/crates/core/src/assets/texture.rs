use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wrap {
    Clamp,
    Repeat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    Nearest,
    Bilinear,
}

/// Texels touched by one filtered lookup and their weights.
///
/// Weights sum to one; unused slots have zero weight.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Footprint {
    pub texels: [u32; 4],
    pub weights: [f64; 4],
    pub len: u8,
}

impl Footprint {
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (0..self.len as usize).map(|k| (self.texels[k] as usize, self.weights[k]))
    }
}

/// Row-major grid of `f32` texels with 1 to 4 channels.
///
/// `v` indexes rows: row `j` covers `v` in `[j/H, (j+1)/H)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture2D {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
    pub wrap_u: Wrap,
    pub wrap_v: Wrap,
    pub filter: Filter,
}

impl Texture2D {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || !(1..=4).contains(&channels) {
            return Err(Error::Data(format!("bad texture shape {width}x{height}x{channels}")));
        }
        if data.len() != width * height * channels {
            return Err(Error::Data(format!(
                "texture data has {} values, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("texture contains non-finite values".into()));
        }
        Ok(Self { width, height, channels, data, wrap_u: Wrap::Clamp, wrap_v: Wrap::Clamp, filter: Filter::Bilinear })
    }

    pub fn constant(width: usize, height: usize, value: &[f32]) -> Self {
        let channels = value.len();
        assert!((1..=4).contains(&channels));
        let data = value.iter().copied().cycle().take(width * height * channels).collect();
        Self { width, height, channels, data, wrap_u: Wrap::Clamp, wrap_v: Wrap::Clamp, filter: Filter::Bilinear }
    }

    pub fn with_wrap(mut self, wrap: Wrap) -> Self {
        self.wrap_u = wrap;
        self.wrap_v = wrap;
        self
    }

    pub fn with_filter(mut self, filter: Filter) -> Self {
        self.filter = filter;
        self
    }

    #[inline]
    pub fn texel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn texel(&self, index: usize) -> &[f32] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    #[inline]
    pub fn texel_mut(&mut self, index: usize) -> &mut [f32] {
        &mut self.data[index * self.channels..(index + 1) * self.channels]
    }

    #[inline]
    fn wrap_coord(i: i64, n: usize, wrap: Wrap) -> usize {
        match wrap {
            Wrap::Clamp => i.clamp(0, n as i64 - 1) as usize,
            Wrap::Repeat => i.rem_euclid(n as i64) as usize,
        }
    }

    /// Which texels a lookup at `uv` blends, and with what weights.
    pub fn footprint(&self, uv: [f64; 2]) -> Footprint {
        let (w, h) = (self.width, self.height);
        let u = if uv[0].is_finite() { uv[0] } else { 0.0 };
        let v = if uv[1].is_finite() { uv[1] } else { 0.0 };
        match self.filter {
            Filter::Nearest => {
                let x = Self::wrap_coord((u * w as f64).floor() as i64, w, self.wrap_u);
                let y = Self::wrap_coord((v * h as f64).floor() as i64, h, self.wrap_v);
                Footprint { texels: [(y * w + x) as u32, 0, 0, 0], weights: [1.0, 0.0, 0.0, 0.0], len: 1 }
            }
            Filter::Bilinear => {
                let x = u * w as f64 - 0.5;
                let y = v * h as f64 - 0.5;
                let (x0, y0) = (x.floor(), y.floor());
                let (fx, fy) = (x - x0, y - y0);
                let (x0, y0) = (x0 as i64, y0 as i64);
                let xa = Self::wrap_coord(x0, w, self.wrap_u);
                let xb = Self::wrap_coord(x0 + 1, w, self.wrap_u);
                let ya = Self::wrap_coord(y0, h, self.wrap_v);
                let yb = Self::wrap_coord(y0 + 1, h, self.wrap_v);
                Footprint {
                    texels: [(ya * w + xa) as u32, (ya * w + xb) as u32, (yb * w + xa) as u32, (yb * w + xb) as u32],
                    weights: [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy],
                    len: 4,
                }
            }
        }
    }

    /// Blends the texels of `fp`; channels beyond `self.channels` are zero.
    #[inline]
    pub fn blend(&self, fp: &Footprint) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (t, w) in fp.iter() {
            let texel = self.texel(t);
            for c in 0..self.channels {
                out[c] += w * texel[c] as f64;
            }
        }
        out
    }

    /// Filtered value at `uv` together with its texel footprint.
    pub fn lookup(&self, uv: [f64; 2]) -> ([f64; 4], Footprint) {
        let fp = self.footprint(uv);
        (self.blend(&fp), fp)
    }

    pub fn clamp_values(&mut self, lo: f32, hi: f32) {
        for v in &mut self.data {
            *v = v.clamp(lo, hi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp2x2() -> Texture2D {
        Texture2D::new(2, 2, 1, vec![1.0, 2.0, 3.0, 4.0]).unwrap()
    }

    #[test]
    fn nearest_at_center_is_exact() {
        let t = ramp2x2().with_filter(Filter::Nearest);
        assert_eq!(t.lookup([0.25, 0.25]).0[0], 1.0);
        assert_eq!(t.lookup([0.75, 0.75]).0[0], 4.0);
        let b = ramp2x2();
        assert_eq!(b.lookup([0.75, 0.25]).0[0], 2.0);
    }

    #[test]
    fn bilinear_midpoint_is_mean() {
        assert_eq!(ramp2x2().lookup([0.5, 0.5]).0[0], 2.5);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(Texture2D::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Texture2D::new(2, 2, 5, vec![0.0; 20]).is_err());
        assert!(Texture2D::new(1, 1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn repeat_wraps() {
        let t = ramp2x2().with_wrap(Wrap::Repeat).with_filter(Filter::Nearest);
        assert_eq!(t.lookup([1.25, -0.75]).0[0], 1.0);
    }

    proptest! {
        #[test]
        fn weights_partition_unity_and_convex(u in -2.0f64..3.0, v in -2.0f64..3.0, repeat in any::<bool>()) {
            let data: Vec<f32> = (0..12).map(|i| ((i * 7) % 5) as f32).collect();
            let t = Texture2D::new(4, 3, 1, data).unwrap()
                .with_wrap(if repeat { Wrap::Repeat } else { Wrap::Clamp });
            let (val, fp) = t.lookup([u, v]);
            let s: f64 = fp.iter().map(|(_, w)| w).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let vals: Vec<f64> = fp.iter().map(|(i, _)| t.texel(i)[0] as f64).collect();
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(val[0] >= lo - 1e-12 && val[0] <= hi + 1e-12);
        }
    }
}
