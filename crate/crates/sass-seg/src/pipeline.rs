//! Dataset manifests, deterministic splits, augmentation, and a synthetic
//! blob dataset generator for desk-scale experiments.
//!
//! The manifest is a CSV with header `image,mask,split`; the mask field may
//! be empty for unlabeled (self-supervised) entries. Per-sample randomness
//! is keyed by `(seed, sample_index)`, so loading and augmentation can run
//! concurrently without changing results.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::imaging::{self, io as imgio, GrayImage};
use crate::rng::SplitMix64;
use crate::thresholding::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub image_path: PathBuf,
    pub mask_path: Option<PathBuf>,
    pub split: Split,
}

impl ManifestEntry {
    pub fn load_image(&self) -> Result<GrayImage> {
        imgio::load_gray(&self.image_path)
    }

    /// Load the ground-truth mask, checking that its dims match the image.
    pub fn load_mask(&self) -> Result<BinaryMask> {
        let path = self
            .mask_path
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("{}: no mask", self.image_path.display())))?;
        let mask = imgio::load_mask(path)?;
        let img = self.load_image()?;
        if mask.width != img.width || mask.height != img.height {
            return Err(Error::format(
                path,
                format!(
                    "mask {}x{} does not match image {}x{}",
                    mask.width, mask.height, img.width, img.height
                ),
            ));
        }
        Ok(mask)
    }
}

/// Parse and validate a manifest CSV. Paths are resolved relative to the
/// manifest's directory; each image must exist on disk. Errors carry the
/// 1-based row number (counting the header).
pub fn load_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::format(path, format!("cannot read manifest: {e}")))?;
    let base = path.parent().unwrap_or(Path::new(""));
    let mut lines = text.lines().enumerate();

    match lines.next() {
        None => return Ok(Vec::new()), // zero-byte file
        Some((_, header)) if header.trim() == "image,mask,split" => {}
        Some((_, header)) => {
            return Err(Error::Manifest {
                row: 1,
                msg: format!("expected header `image,mask,split`, found `{header}`"),
            })
        }
    }

    let mut entries = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::Manifest {
                row,
                msg: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let image_path = base.join(fields[0].trim());
        if !image_path.is_file() {
            return Err(Error::Manifest {
                row,
                msg: format!("image not found: {}", image_path.display()),
            });
        }
        let mask_field = fields[1].trim();
        let mask_path = if mask_field.is_empty() {
            None
        } else {
            let p = base.join(mask_field);
            if !p.is_file() {
                return Err(Error::Manifest {
                    row,
                    msg: format!("mask not found: {}", p.display()),
                });
            }
            Some(p)
        };
        let split = Split::parse(fields[2].trim()).ok_or_else(|| Error::Manifest {
            row,
            msg: format!("unknown split `{}` (train|val|test)", fields[2].trim()),
        })?;
        entries.push(ManifestEntry {
            image_path,
            mask_path,
            split,
        });
    }
    Ok(entries)
}

/// Write a manifest with paths relative to `dir`.
pub fn write_manifest(dir: &Path, entries: &[(String, Option<String>, Split)]) -> Result<PathBuf> {
    let path = dir.join("manifest.csv");
    let mut text = String::from("image,mask,split\n");
    for (img, mask, split) in entries {
        text.push_str(img);
        text.push(',');
        if let Some(m) = mask {
            text.push_str(m);
        }
        text.push(',');
        text.push_str(&split.to_string());
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}

/// Deterministically assign splits: shuffle by seed, then partition with
/// floor rounding for train and val and the remainder going to test.
pub fn make_splits(count: usize, ratios: (f64, f64, f64), seed: u64) -> Result<Vec<Split>> {
    let (tr, va, te) = ratios;
    if tr < 0.0 || va < 0.0 || te < 0.0 || (tr + va + te - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!(
            "split ratios must be nonnegative and sum to 1, got ({tr}, {va}, {te})"
        )));
    }
    let n_train = (count as f64 * tr).floor() as usize;
    let n_val = (count as f64 * va).floor() as usize;

    let mut order: Vec<usize> = (0..count).collect();
    SplitMix64::new(seed).shuffle(&mut order);

    let mut splits = vec![Split::Test; count];
    for (rank, &idx) in order.iter().enumerate() {
        splits[idx] = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(splits)
}

/// Augmentation policy. Geometric ops (resize, flips) apply identically to
/// image and mask; photometric jitter touches the image only. Contrast
/// pivots at 128: `v' = clamp(contrast * (v - 128) + 128 + brightness)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSpec {
    pub resize_to: (usize, usize),
    pub hflip_p: f64,
    pub vflip_p: f64,
    pub brightness_delta: f64,
    pub contrast_range: (f64, f64),
    pub seed: u64,
}

impl AugmentSpec {
    /// Resize plus 50/50 flips, no photometric jitter.
    pub fn flips_only(resize_to: (usize, usize), seed: u64) -> Self {
        AugmentSpec {
            resize_to,
            hflip_p: 0.5,
            vflip_p: 0.5,
            brightness_delta: 0.0,
            contrast_range: (1.0, 1.0),
            seed,
        }
    }

    /// Deterministic resize only.
    pub fn resize_only(resize_to: (usize, usize)) -> Self {
        AugmentSpec {
            resize_to,
            hflip_p: 0.0,
            vflip_p: 0.0,
            brightness_delta: 0.0,
            contrast_range: (1.0, 1.0),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.hflip_p) || !(0.0..=1.0).contains(&self.vflip_p) {
            return Err(Error::invalid("flip probabilities must lie in [0,1]"));
        }
        if self.contrast_range.0 <= 0.0 || self.contrast_range.1 < self.contrast_range.0 {
            return Err(Error::invalid("contrast bounds must be positive and ordered"));
        }
        if self.brightness_delta < 0.0 {
            return Err(Error::invalid("brightness delta must be >= 0"));
        }
        if self.resize_to.0 == 0 || self.resize_to.1 == 0 {
            return Err(Error::invalid("resize target must be at least 1x1"));
        }
        Ok(())
    }
}

fn flip_h(img: &GrayImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.data.len());
    for y in 0..img.height {
        let row = &img.data[y * img.width..(y + 1) * img.width];
        data.extend(row.iter().rev());
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

fn flip_v(img: &GrayImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.data.len());
    for y in (0..img.height).rev() {
        data.extend_from_slice(&img.data[y * img.width..(y + 1) * img.width]);
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

fn mask_as_gray(mask: &BinaryMask) -> GrayImage {
    GrayImage {
        width: mask.width,
        height: mask.height,
        data: mask.data.clone(),
    }
}

fn gray_as_mask(img: GrayImage) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        data: img.data,
    }
}

/// Augment one sample. The random draws come from a stream keyed by
/// `(spec.seed, sample_index)` and are taken in a fixed order (hflip, vflip,
/// brightness, contrast) whether or not each op fires.
pub fn augment(
    img: &GrayImage,
    mask: Option<&BinaryMask>,
    spec: &AugmentSpec,
    sample_index: u64,
) -> Result<(GrayImage, Option<BinaryMask>)> {
    spec.validate()?;
    let (w, h) = spec.resize_to;
    let mut out = imaging::resize_bilinear(img, w, h)?;
    let mut out_mask = match mask {
        Some(m) => Some(imaging::resize_nearest(&mask_as_gray(m), w, h)?),
        None => None,
    };

    let mut rng = SplitMix64::from_pair(spec.seed, sample_index);
    let do_h = rng.next_f64() < spec.hflip_p;
    let do_v = rng.next_f64() < spec.vflip_p;
    let brightness = rng.uniform(-spec.brightness_delta, spec.brightness_delta);
    let contrast = rng.uniform(spec.contrast_range.0, spec.contrast_range.1);

    if do_h {
        out = flip_h(&out);
        out_mask = out_mask.map(|m| flip_h(&m));
    }
    if do_v {
        out = flip_v(&out);
        out_mask = out_mask.map(|m| flip_v(&m));
    }
    if brightness != 0.0 || contrast != 1.0 {
        for v in &mut out.data {
            let shifted = contrast * (*v as f64 - 128.0) + 128.0 + brightness;
            *v = shifted.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok((out, out_mask.map(gray_as_mask)))
}

/// Parameters of the synthetic blob generator: bright ellipses on a dark
/// background, both with Gaussian pixel noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    /// Ellipse count range (inclusive).
    pub ellipses: (u64, u64),
    /// Semi-axis bounds as fractions of min(width, height).
    pub axis_frac: (f64, f64),
    pub background: (f64, f64),
    pub foreground: (f64, f64),
    pub noise_std: f64,
}

impl SynthSpec {
    /// 1-4 ellipses with semi-axes in [0.10, 0.20] of the short side; the
    /// per-image foreground fraction stays within (0.01, 0.6).
    pub fn new(width: usize, height: usize) -> Self {
        SynthSpec {
            width,
            height,
            ellipses: (1, 4),
            axis_frac: (0.10, 0.20),
            background: (70.0, 10.0),
            foreground: (180.0, 10.0),
            noise_std: 8.0,
        }
    }

    /// One small ellipse per image; foreground fraction around 5%.
    pub fn sparse(width: usize, height: usize) -> Self {
        SynthSpec {
            ellipses: (1, 1),
            axis_frac: (0.11, 0.14),
            ..SynthSpec::new(width, height)
        }
    }
}

/// Generate one image and its ground-truth mask from `(seed, index)`.
pub fn synth_blob_image(spec: &SynthSpec, seed: u64, index: u64) -> (GrayImage, BinaryMask) {
    let (w, h) = (spec.width, spec.height);
    let mut rng = SplitMix64::from_pair(seed, index);

    let bg = rng.normal(spec.background.0, spec.background.1);
    let short = w.min(h) as f64;
    let count = spec.ellipses.0 + rng.below(spec.ellipses.1 - spec.ellipses.0 + 1);

    struct Ellipse {
        cx: f64,
        cy: f64,
        a: f64,
        b: f64,
        intensity: f64,
    }
    let ellipses: Vec<Ellipse> = (0..count)
        .map(|_| {
            let a = rng.uniform(spec.axis_frac.0 * short, spec.axis_frac.1 * short);
            let b = rng.uniform(spec.axis_frac.0 * short, spec.axis_frac.1 * short);
            Ellipse {
                cx: rng.uniform(a, w as f64 - a),
                cy: rng.uniform(b, h as f64 - b),
                a,
                b,
                intensity: rng.normal(spec.foreground.0, spec.foreground.1),
            }
        })
        .collect();

    let mut pixels = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            // Last-painted ellipse wins where they overlap.
            let mut base = bg;
            let mut fg = 0u8;
            for e in &ellipses {
                let dx = (fx - e.cx) / e.a;
                let dy = (fy - e.cy) / e.b;
                if dx * dx + dy * dy <= 1.0 {
                    base = e.intensity;
                    fg = 1;
                }
            }
            let v = base + rng.normal(0.0, spec.noise_std);
            pixels.push(v.round().clamp(0.0, 255.0) as u8);
            mask.push(fg);
        }
    }
    (
        GrayImage {
            width: w,
            height: h,
            data: pixels,
        },
        BinaryMask {
            width: w,
            height: h,
            data: mask,
        },
    )
}

/// Generate `n` image/mask pairs, reproducible from the seed.
pub fn synth_blobs(n: usize, spec: &SynthSpec, seed: u64) -> Vec<(GrayImage, BinaryMask)> {
    (0..n)
        .map(|i| synth_blob_image(spec, seed, i as u64))
        .collect()
}

/// Materialize a synthetic dataset: `img_%05d.png` / `msk_%05d.png` pairs
/// plus a manifest with a 70/10/20 split. Returns the manifest path.
pub fn materialize_synth(
    dir: &Path,
    n: usize,
    spec: &SynthSpec,
    seed: u64,
) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let splits = make_splits(n, (0.7, 0.1, 0.2), seed)?;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let (img, mask) = synth_blob_image(spec, seed, i as u64);
        let img_name = format!("img_{i:05}.png");
        let msk_name = format!("msk_{i:05}.png");
        imgio::save_gray(&dir.join(&img_name), &img)?;
        imgio::save_mask(&dir.join(&msk_name), &mask)?;
        rows.push((img_name, Some(msk_name), splits[i]));
    }
    write_manifest(dir, &rows)
}
