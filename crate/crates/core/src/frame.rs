//! Single-channel raster frames and binary PGM I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Grayscale image with values on the 0..=255 scale.
///
/// Pixel `(x, y)` has its center at integer coordinates; storage is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize) -> Self {
        Frame::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Frame {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} frame",
                data.len()
            )));
        }
        Ok(Frame {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Frame {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample; `None` when `(x, y)` lies outside the pixel-center hull.
    #[inline]
    pub fn sample(&self, x: f64, y: f64) -> Option<f32> {
        bilinear(&self.data, self.width, self.height, x, y)
    }

    /// Rounds every value to the nearest gray level in 0..=255.
    pub fn quantize(&mut self) {
        for v in &mut self.data {
            *v = v.round().clamp(0.0, 255.0);
        }
    }

    /// Centered sub-image of `w x h` pixels.
    pub fn crop_centered(&self, w: usize, h: usize) -> Frame {
        let w = w.min(self.width);
        let h = h.min(self.height);
        let x0 = (self.width - w) / 2;
        let y0 = (self.height - h) / 2;
        self.sub_image(x0, y0, w, h)
    }

    pub fn sub_image(&self, x0: usize, y0: usize, w: usize, h: usize) -> Frame {
        Frame::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y))
    }

    /// Halves resolution by 2x2 box averaging (odd trailing rows/columns dropped).
    pub fn downsample(&self) -> Frame {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        Frame::from_fn(w, h, |x, y| {
            let x0 = (2 * x).min(self.width - 1);
            let y0 = (2 * y).min(self.height - 1);
            let x1 = (x0 + 1).min(self.width - 1);
            let y1 = (y0 + 1).min(self.height - 1);
            0.25 * (self.get(x0, y0) + self.get(x1, y0) + self.get(x0, y1) + self.get(x1, y1))
        })
    }

    /// Bilinear resize where output pixel `q` samples `q / factor`.
    pub fn resize(&self, w: usize, h: usize) -> Frame {
        let fx = self.width as f64 / w as f64;
        let fy = self.height as f64 / h as f64;
        Frame::from_fn(w, h, |x, y| {
            let sx = ((x as f64 + 0.5) * fx - 0.5).clamp(0.0, (self.width - 1) as f64);
            let sy = ((y as f64 + 0.5) * fy - 0.5).clamp(0.0, (self.height - 1) as f64);
            self.sample(sx, sy).unwrap_or(0.0)
        })
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, &self.to_pgm_bytes())
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.data.len() + 20);
        write!(out, "P5\n{} {}\n255\n", self.width, self.height).expect("write to vec");
        out.extend(self.data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
        out
    }

    pub fn read_pgm(path: &Path) -> Result<Frame> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Frame::from_pgm_bytes(&bytes).map_err(|reason| Error::format(path, reason))
    }

    pub fn from_pgm_bytes(bytes: &[u8]) -> std::result::Result<Frame, String> {
        let mut pos = 0;
        let mut tokens = Vec::with_capacity(4);
        while tokens.len() < 4 {
            // Skip whitespace and comments between header tokens.
            while pos < bytes.len() {
                match bytes[pos] {
                    b'#' => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    c if c.is_ascii_whitespace() => pos += 1,
                    _ => break,
                }
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated PGM header".into());
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        if tokens[0] != "P5" {
            return Err(format!("unsupported magic {:?}", tokens[0]));
        }
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| format!("bad header field {t:?}: {e}"))
        };
        let (w, h, maxval) = (parse(&tokens[1])?, parse(&tokens[2])?, parse(&tokens[3])?);
        if maxval == 0 || maxval > 255 {
            return Err(format!("unsupported maxval {maxval}"));
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let raster = bytes
            .get(pos..pos + w * h)
            .ok_or_else(|| format!("raster truncated: need {} bytes", w * h))?;
        let scale = 255.0 / maxval as f32;
        Ok(Frame {
            width: w,
            height: h,
            data: raster.iter().map(|&b| b as f32 * scale).collect(),
        })
    }
}

#[inline]
pub(crate) fn bilinear(data: &[f32], width: usize, height: usize, x: f64, y: f64) -> Option<f32> {
    if !(x >= 0.0 && y >= 0.0) || x > (width - 1) as f64 || y > (height - 1) as f64 {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let p00 = data[y0 * width + x0] as f64;
    let p10 = data[y0 * width + x1] as f64;
    let p01 = data[y1 * width + x0] as f64;
    let p11 = data[y1 * width + x1] as f64;
    let top = p00 + fx * (p10 - p00);
    let bottom = p01 + fx * (p11 - p01);
    Some((top + fy * (bottom - top)) as f32)
}
