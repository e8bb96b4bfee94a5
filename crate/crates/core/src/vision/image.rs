use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// BT.601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Extension of the dependency-free fixture format: a text line `H W`
/// followed by `H·W·3` RGB bytes.
pub const FIXTURE_EXTENSION: &str = "rgb";

/// RGB image with values in `[0, 1]`, row-major HWC.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::contract(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * CHANNELS {
            return Err(Error::dim("image", format!("{} values for {height}x{width}x3", data.len())));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::contract("image values must lie in [0, 1]"));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self::new(height, width, data).expect("valid fill")
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| f64::from(b) / 255.0).collect())
    }

    /// Builds an image from a per-pixel function; values are clamped.
    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(height * width * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                data.extend(f(y, x).map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, y: usize, x: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * CHANNELS;
        for (c, v) in rgb.into_iter().enumerate() {
            self.data[i + c] = v.clamp(0.0, 1.0);
        }
    }

    pub(crate) fn map_pixels(&mut self, f: impl Fn([f64; 3]) -> [f64; 3]) {
        for px in self.data.chunks_exact_mut(CHANNELS) {
            let out = f([px[0], px[1], px[2]]);
            for (d, v) in px.iter_mut().zip(out) {
                *d = v.clamp(0.0, 1.0);
            }
        }
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|v| (v * 255.0).round() as u8).collect()
    }

    pub fn grayscale(&self) -> Vec<f64> {
        self.data
            .chunks_exact(CHANNELS)
            .map(|p| LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2])
            .collect()
    }

    pub fn mean_intensity(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn flip_horizontal(&self) -> Self {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.set_pixel(y, x, self.pixel(y, self.width - 1 - x));
            }
        }
        out
    }

    /// Bilinear resampling with half-pixel centers and edge clamping.
    pub fn resize_bilinear(&self, height: usize, width: usize) -> Self {
        if (height, width) == (self.height, self.width) {
            return self.clone();
        }
        let sy = self.height as f64 / height as f64;
        let sx = self.width as f64 / width as f64;
        Self::from_fn(height, width, |y, x| {
            let fy = ((y as f64 + 0.5) * sy - 0.5).max(0.0);
            let fx = ((x as f64 + 0.5) * sx - 0.5).max(0.0);
            self.sample_bilinear(fy, fx)
        })
    }

    /// Bilinear sample at fractional coordinates, clamped to the border.
    pub(crate) fn sample_bilinear(&self, fy: f64, fx: f64) -> [f64; 3] {
        let fy = fy.clamp(0.0, (self.height - 1) as f64);
        let fx = fx.clamp(0.0, (self.width - 1) as f64);
        let (y0, x0) = (fy.floor() as usize, fx.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(self.height - 1), (x0 + 1).min(self.width - 1));
        let (ty, tx) = (fy - y0 as f64, fx - x0 as f64);
        let (a, b, c, d) = (self.pixel(y0, x0), self.pixel(y0, x1), self.pixel(y1, x0), self.pixel(y1, x1));
        let mut out = [0.0; 3];
        for ch in 0..CHANNELS {
            let top = a[ch] + (b[ch] - a[ch]) * tx;
            let bottom = c[ch] + (d[ch] - c[ch]) * tx;
            out[ch] = top + (bottom - top) * ty;
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path)?;
        let is_fixture = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case(FIXTURE_EXTENSION));
        if is_fixture {
            return Self::decode_fixture(&bytes).map_err(|message| Error::Image {
                path: path.to_path_buf(),
                message,
            });
        }
        let img = image::load_from_memory(&bytes).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        Self::from_rgb8(rgb.height() as usize, rgb.width() as usize, rgb.as_raw())
    }

    pub fn decode_fixture(bytes: &[u8]) -> std::result::Result<Self, String> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or("missing fixture header")?;
        let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| "header is not UTF-8")?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad dimension `{t}`")))
            .collect::<std::result::Result<_, _>>()?;
        let [h, w] = dims[..] else {
            return Err(format!("header must be `H W`, got `{header}`"));
        };
        let body = &bytes[nl + 1..];
        if body.len() != h * w * CHANNELS {
            return Err(format!("expected {} pixel bytes, got {}", h * w * CHANNELS, body.len()));
        }
        Self::from_rgb8(h, w, body).map_err(|e| e.to_string())
    }

    pub fn encode_fixture(&self) -> Vec<u8> {
        let mut out = format!("{} {}\n", self.height, self.width).into_bytes();
        out.extend(self.to_rgb8());
        out
    }

    /// Writes the fixture format for `.rgb` paths and PNG otherwise.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case(FIXTURE_EXTENSION))
        {
            fs::File::create(path)?.write_all(&self.encode_fixture())?;
            return Ok(());
        }
        image::save_buffer(
            path,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Area-weighted resampling of a single-channel plane: every output cell
/// is the mean of the source region it covers.
pub fn resize_area(src: &[f64], height: usize, width: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    let wy = area_weights(height, out_h);
    let wx = area_weights(width, out_w);
    let mut out = vec![0.0; out_h * out_w];
    for (oy, ys) in wy.iter().enumerate() {
        for (ox, xs) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for &(y, a) in ys {
                for &(x, b) in xs {
                    acc += a * b * src[y * width + x];
                }
            }
            out[oy * out_w + ox] = acc;
        }
    }
    out
}

/// For each output index, the source indices it overlaps and their
/// normalized overlap weights.
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let (lo, hi) = (o as f64 * scale, (o + 1) as f64 * scale);
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            (first..last)
                .filter_map(|i| {
                    let overlap = hi.min((i + 1) as f64) - lo.max(i as f64);
                    (overlap > 0.0).then(|| (i, overlap / scale))
                })
                .collect()
        })
        .collect()
}
