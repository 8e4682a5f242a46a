//! Reading and writing images on disk.
//!
//! Supported: 8-bit RGB or grayscale PNG, and binary PGM (P5, maxval 255).
//! Anything else (16-bit, palettes, alpha) is rejected with a descriptive
//! error. Masks are written with values {0, 255}.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::ColorType;

use super::{GrayImage, RgbImage};
use crate::error::{Error, Result};
use crate::thresholding::BinaryMask;

/// Load a PNG or PGM as grayscale; RGB inputs are converted with
/// [`super::to_grayscale`].
pub fn load_gray(path: &Path) -> Result<GrayImage> {
    match extension(path) {
        Ext::Pgm => read_pgm(path),
        Ext::Png => {
            let img = decode_png(path)?;
            match img {
                Decoded::Gray(g) => Ok(g),
                Decoded::Rgb(rgb) => Ok(super::to_grayscale(&rgb)),
            }
        }
    }
}

/// Load a PNG or PGM and binarize: any nonzero pixel is foreground.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let gray = load_gray(path)?;
    Ok(BinaryMask {
        width: gray.width,
        height: gray.height,
        data: gray.data.iter().map(|&v| (v != 0) as u8).collect(),
    })
}

pub fn save_gray(path: &Path, img: &GrayImage) -> Result<()> {
    match extension(path) {
        Ext::Pgm => write_pgm(path, img),
        Ext::Png => {
            image::save_buffer(
                path,
                &img.data,
                img.width as u32,
                img.height as u32,
                ColorType::L8,
            )
            .map_err(|e| Error::format(path, e.to_string()))
        }
    }
}

/// Write a mask as an 8-bit grayscale image with foreground 255.
pub fn save_mask(path: &Path, mask: &BinaryMask) -> Result<()> {
    let img = GrayImage {
        width: mask.width,
        height: mask.height,
        data: mask.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect(),
    };
    save_gray(path, &img)
}

enum Ext {
    Png,
    Pgm,
}

fn extension(path: &Path) -> Ext {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pgm") => Ext::Pgm,
        _ => Ext::Png,
    }
}

enum Decoded {
    Gray(GrayImage),
    Rgb(RgbImage),
}

fn decode_png(path: &Path) -> Result<Decoded> {
    let dynimg = image::open(path).map_err(|e| Error::format(path, e.to_string()))?;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    match dynimg {
        image::DynamicImage::ImageLuma8(buf) => {
            Ok(Decoded::Gray(GrayImage::new(w, h, buf.into_raw())?))
        }
        image::DynamicImage::ImageRgb8(buf) => {
            Ok(Decoded::Rgb(RgbImage::new(w, h, buf.into_raw())?))
        }
        other => Err(Error::format(
            path,
            format!(
                "unsupported pixel format {:?}; expected 8-bit grayscale or RGB",
                other.color()
            ),
        )),
    }
}

fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let magic = next_token(&bytes, &mut pos)
        .ok_or_else(|| Error::format(path, "missing PGM magic"))?;
    if magic != b"P5" {
        return Err(Error::format(path, "not a binary PGM (expected P5)"));
    }
    let mut field = |name: &str| -> Result<usize> {
        next_token(&bytes, &mut pos)
            .ok_or_else(|| Error::format(path, format!("missing {name}")))
            .and_then(|tok| {
                std::str::from_utf8(tok)
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::format(path, format!("bad {name}")))
            })
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(Error::format(
            path,
            format!("unsupported maxval {maxval}; only 8-bit PGM is accepted"),
        ));
    }
    // Exactly one whitespace byte separates the header from pixel data.
    pos += 1;
    let expected = width * height;
    if bytes.len() < pos + expected {
        return Err(Error::format(path, "truncated PGM pixel data"));
    }
    GrayImage::new(width, height, bytes[pos..pos + expected].to_vec())
}

/// Next whitespace-delimited token, skipping `#` comments.
fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(&bytes[start..*pos])
}

fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", img.width, img.height)?;
    f.write_all(&img.data)?;
    Ok(())
}
