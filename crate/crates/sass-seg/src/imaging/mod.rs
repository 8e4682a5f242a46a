//! Image containers, grayscale conversion, histograms, resizing and tiling.
//!
//! All operations here are pure functions on immutable inputs and are safe
//! to call from many threads at once.

pub mod io;

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major interleaved triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// 8-bit single-channel raster, the unit of thresholding and training input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// 256-bin intensity counts over a grayscale image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram {
    pub counts: [u64; 256],
    pub total: u64,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != 3 * width * height {
            return Err(Error::dims(format!(
                "rgb data length {} != 3*{}*{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be at least 1x1"));
        }
        if data.len() != width * height {
            return Err(Error::dims(format!(
                "gray data length {} != {}*{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height])
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Mean and standard deviation of the pixel intensities.
    pub fn intensity_stats(&self) -> (f64, f64) {
        let n = self.data.len() as f64;
        let sum: u64 = self.data.iter().map(|&v| v as u64).sum();
        let sum_sq: u64 = self.data.iter().map(|&v| v as u64 * v as u64).sum();
        let mean = sum as f64 / n;
        let var = (sum_sq as f64 / n - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// ITU-R BT.601 luma conversion: gray = round(0.299 R + 0.587 G + 0.114 B).
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.width * img.height);
    for px in img.data.chunks_exact(3) {
        let lum = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
        data.push(lum.round().clamp(0.0, 255.0) as u8);
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Count pixels per intensity. Errors on an empty image.
pub fn compute_histogram(img: &GrayImage) -> Result<Histogram> {
    if img.data.is_empty() {
        return Err(Error::invalid("empty input"));
    }
    let mut counts = [0u64; 256];
    for &v in &img.data {
        counts[v as usize] += 1;
    }
    Ok(Histogram {
        counts,
        total: img.data.len() as u64,
    })
}

impl Histogram {
    /// Build directly from bin counts; total must be >= 1.
    pub fn from_counts(counts: [u64; 256]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("empty histogram"));
        }
        Ok(Histogram { counts, total })
    }

    /// Intensity mean and standard deviation of the underlying distribution.
    pub fn stats(&self) -> (f64, f64) {
        let mut sum = 0u64;
        let mut sum_sq = 0u64;
        for (i, &n) in self.counts.iter().enumerate() {
            sum += i as u64 * n;
            sum_sq += (i * i) as u64 * n;
        }
        let total = self.total as f64;
        let mean = sum as f64 / total;
        let var = (sum_sq as f64 / total - mean * mean).max(0.0);
        (mean, var.sqrt())
    }
}

/// Bilinear resize with half-pixel-center sampling: the source coordinate of
/// output pixel `d` along an axis is `(d + 0.5) * src/dst - 0.5`, clamped to
/// the valid range. Output values are rounded to nearest and clamped.
pub fn resize_bilinear(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let (xs, ys) = (
        axis_samples(img.width, out_w),
        axis_samples(img.height, out_h),
    );
    let mut data = Vec::with_capacity(out_w * out_h);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let p00 = img.get(x0, y0) as f64;
            let p10 = img.get(x1, y0) as f64;
            let p01 = img.get(x0, y1) as f64;
            let p11 = img.get(x1, y1) as f64;
            let top = p00 * (1.0 - fx) + p10 * fx;
            let bot = p01 * (1.0 - fx) + p11 * fx;
            let v = top * (1.0 - fy) + bot * fy;
            data.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    GrayImage::new(out_w, out_h, data)
}

/// Per-output-pixel (floor index, ceil index, fraction) for one axis.
fn axis_samples(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let s = ((d as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

/// Nearest-neighbor resize with half-pixel centers; used for masks, where
/// interpolation would invent values.
pub fn resize_nearest(img: &GrayImage, out_w: usize, out_h: usize) -> Result<GrayImage> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let sx = img.width as f64 / out_w as f64;
    let sy = img.height as f64 / out_h as f64;
    let mut data = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let src_y = (((y as f64 + 0.5) * sy).floor() as usize).min(img.height - 1);
        for x in 0..out_w {
            let src_x = (((x as f64 + 0.5) * sx).floor() as usize).min(img.width - 1);
            data.push(img.get(src_x, src_y));
        }
    }
    GrayImage::new(out_w, out_h, data)
}

/// Cut the image into non-overlapping `tile_w` x `tile_h` tiles in row-major
/// order. Right and bottom remainders smaller than a full tile are discarded.
pub fn tile_image(img: &GrayImage, tile_w: usize, tile_h: usize) -> Result<Vec<GrayImage>> {
    if tile_w == 0 || tile_h == 0 {
        return Err(Error::invalid("tile dimensions must be at least 1x1"));
    }
    if tile_w > img.width || tile_h > img.height {
        return Err(Error::invalid(format!(
            "tile {}x{} larger than image {}x{}",
            tile_w, tile_h, img.width, img.height
        )));
    }
    let nx = img.width / tile_w;
    let ny = img.height / tile_h;
    let mut tiles = Vec::with_capacity(nx * ny);
    for ty in 0..ny {
        for tx in 0..nx {
            let mut data = Vec::with_capacity(tile_w * tile_h);
            for row in 0..tile_h {
                let y = ty * tile_h + row;
                let start = y * img.width + tx * tile_w;
                data.extend_from_slice(&img.data[start..start + tile_w]);
            }
            tiles.push(GrayImage {
                width: tile_w,
                height: tile_h,
                data,
            });
        }
    }
    Ok(tiles)
}
