//! Image containers, PGM/PBM file I/O and Otsu global thresholding.
//!
//! Grayscale pixels are stored as their original 8-bit levels and exposed
//! as normalized luminance `level / 255` in `[0, 1]`. Bilevel images use
//! the DIBCO convention: ink (text) is dark and is the foreground label.

use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

/// Errors from image loading, saving and validation.
#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed {format} header in {path}: {detail}")]
    MalformedHeader {
        path: String,
        format: &'static str,
        detail: String,
    },
    #[error("unsupported image format in {path}: {detail}")]
    Unsupported { path: String, detail: String },
    #[error("truncated pixel payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: String,
        expected: usize,
        found: usize,
    },
    #[error("{path} is not bilevel: contains intermediate gray level {level}")]
    NotBilevel { path: String, level: u8 },
    #[error("invalid dimensions {width}x{height}: {detail}")]
    InvalidDimensions {
        width: usize,
        height: usize,
        detail: &'static str,
    },
    #[error("pixel buffer length {got} does not match {width}x{height}")]
    LengthMismatch {
        width: usize,
        height: usize,
        got: usize,
    },
}

/// A grayscale raster with normalized luminance values.
///
/// Levels are kept as the original 8-bit quantization so that histogram
/// operations (Otsu) are bit-exact; `intensity` exposes the normalized
/// `[0, 1]` value `level / 255`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    levels: Vec<u8>,
}

impl GrayImage {
    /// Builds an image from row-major 8-bit levels.
    pub fn from_levels(width: usize, height: usize, levels: Vec<u8>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        if levels.len() != width * height {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                got: levels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            levels,
        })
    }

    /// Builds an image from row-major normalized intensities, quantizing
    /// each value to the nearest 8-bit level (values are clamped to `[0, 1]`).
    pub fn from_intensities(
        width: usize,
        height: usize,
        intensities: &[f64],
    ) -> Result<Self, ImageError> {
        let levels = intensities
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        Self::from_levels(width, height, levels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Original 8-bit level at `(x, y)`.
    pub fn level(&self, x: usize, y: usize) -> u8 {
        self.levels[y * self.width + x]
    }

    /// Normalized luminance `level / 255` at `(x, y)`.
    pub fn intensity(&self, x: usize, y: usize) -> f64 {
        f64::from(self.level(x, y)) / 255.0
    }

    /// Row-major 8-bit levels.
    pub fn levels(&self) -> &[u8] {
        &self.levels
    }

    /// Row-major normalized intensities.
    pub fn intensities(&self) -> Vec<f64> {
        self.levels.iter().map(|&v| f64::from(v) / 255.0).collect()
    }
}

/// A bilevel raster distinguishing ink (foreground) from paper (background).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryImage {
    /// Builds an image from a row-major mask; `true` marks foreground (ink).
    pub fn from_mask(width: usize, height: usize, mask: Vec<bool>) -> Result<Self, ImageError> {
        check_dims(width, height)?;
        if mask.len() != width * height {
            return Err(ImageError::LengthMismatch {
                width,
                height,
                got: mask.len(),
            });
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    /// All-background image of the given size.
    pub fn blank(width: usize, height: usize) -> Result<Self, ImageError> {
        Self::from_mask(width, height, vec![false; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    /// Row-major foreground mask.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Image with every label flipped.
    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            mask: self.mask.iter().map(|m| !m).collect(),
        }
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), ImageError> {
    if width == 0 || height == 0 {
        return Err(ImageError::InvalidDimensions {
            width,
            height,
            detail: "width and height must be >= 1",
        });
    }
    Ok(())
}

/// Loads a grayscale image from a P5 PGM file, or an 8-bit grayscale PNG.
pub fn load_gray<P: AsRef<Path>>(path: P) -> Result<GrayImage, ImageError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    match sniff_format(&bytes) {
        Some(Format::Pgm) => {
            let (w, h, pixels) = parse_pgm(path, &bytes)?;
            GrayImage::from_levels(w, h, pixels)
        }
        Some(Format::Pbm) => Err(ImageError::Unsupported {
            path: display(path),
            detail: "PBM is bilevel; use load_binary".into(),
        }),
        Some(Format::Png) => load_gray_png(path, &bytes),
        None => Err(ImageError::Unsupported {
            path: display(path),
            detail: "expected P5 PGM or 8-bit grayscale PNG".into(),
        }),
    }
}

/// Loads a bilevel image from a P4 PBM file, or from a P5 PGM that contains
/// only the two extreme levels 0 and 255.
///
/// Dark pixels (gray level 0, PBM bit 1) map to foreground.
pub fn load_binary<P: AsRef<Path>>(path: P) -> Result<BinaryImage, ImageError> {
    let path = path.as_ref();
    let bytes = read_file(path)?;
    match sniff_format(&bytes) {
        Some(Format::Pbm) => parse_pbm(path, &bytes),
        Some(Format::Pgm) => {
            let (w, h, pixels) = parse_pgm(path, &bytes)?;
            let mut mask = Vec::with_capacity(pixels.len());
            for &level in &pixels {
                match level {
                    0 => mask.push(true),
                    255 => mask.push(false),
                    other => {
                        return Err(ImageError::NotBilevel {
                            path: display(path),
                            level: other,
                        })
                    }
                }
            }
            BinaryImage::from_mask(w, h, mask)
        }
        Some(Format::Png) => {
            let gray = load_gray_png(path, &bytes)?;
            let mut mask = Vec::with_capacity(gray.levels().len());
            for &level in gray.levels() {
                match level {
                    0 => mask.push(true),
                    255 => mask.push(false),
                    other => {
                        return Err(ImageError::NotBilevel {
                            path: display(path),
                            level: other,
                        })
                    }
                }
            }
            BinaryImage::from_mask(gray.width(), gray.height(), mask)
        }
        None => Err(ImageError::Unsupported {
            path: display(path),
            detail: "expected P4 PBM, bilevel P5 PGM or bilevel PNG".into(),
        }),
    }
}

/// Writes a grayscale image as binary P5 PGM.
pub fn save_gray<P: AsRef<Path>>(img: &GrayImage, path: P) -> Result<(), ImageError> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(32 + img.levels().len());
    write!(out, "P5\n{} {}\n255\n", img.width(), img.height()).expect("vec write");
    out.extend_from_slice(img.levels());
    write_file(path, &out)
}

/// Writes a bilevel image; the extension picks the container
/// (`.pbm` packs bits as P4, `.pgm` stores levels {0, 255} as P5).
pub fn save_binary<P: AsRef<Path>>(img: &BinaryImage, path: P) -> Result<(), ImageError> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("pbm") => {
            let row_bytes = img.width().div_ceil(8);
            let mut out = Vec::with_capacity(32 + row_bytes * img.height());
            write!(out, "P4\n{} {}\n", img.width(), img.height()).expect("vec write");
            for y in 0..img.height() {
                let mut row = vec![0u8; row_bytes];
                for x in 0..img.width() {
                    if img.is_foreground(x, y) {
                        row[x / 8] |= 0x80 >> (x % 8);
                    }
                }
                out.extend_from_slice(&row);
            }
            write_file(path, &out)
        }
        Some("pgm") => {
            let mut out = Vec::with_capacity(32 + img.mask().len());
            write!(out, "P5\n{} {}\n255\n", img.width(), img.height()).expect("vec write");
            out.extend(img.mask().iter().map(|&fg| if fg { 0u8 } else { 255u8 }));
            write_file(path, &out)
        }
        _ => Err(ImageError::Unsupported {
            path: display(path),
            detail: "bilevel output requires a .pbm or .pgm extension".into(),
        }),
    }
}

/// Global Otsu threshold over the 256-bin histogram of 8-bit levels.
///
/// Returns the level `t` maximizing the between-class variance of the
/// split `{level <= t} / {level > t}`; when several thresholds achieve the
/// maximum (a histogram plateau) the midpoint of the first maximal run is
/// used. Returns `None` for a constant image, where no split exists.
pub fn otsu_threshold(img: &GrayImage) -> Option<u8> {
    let mut hist = [0u64; 256];
    for &level in img.levels() {
        hist[level as usize] += 1;
    }
    let total: u64 = img.levels().len() as u64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &c)| v as f64 * c as f64)
        .sum();

    let mut best = f64::NEG_INFINITY;
    let mut run_start: Option<usize> = None;
    let mut run_end = 0usize;
    let mut low_count = 0u64;
    let mut low_sum = 0.0f64;
    for (t, &count) in hist.iter().enumerate() {
        low_count += count;
        low_sum += t as f64 * count as f64;
        let high_count = total - low_count;
        if low_count == 0 || high_count == 0 {
            continue;
        }
        let mean_low = low_sum / low_count as f64;
        let mean_high = (total_sum - low_sum) / high_count as f64;
        let diff = mean_low - mean_high;
        let variance = low_count as f64 * high_count as f64 * diff * diff;
        if variance > best {
            best = variance;
            run_start = Some(t);
            run_end = t;
        } else if variance == best && run_end + 1 == t {
            run_end = t;
        }
    }
    run_start.map(|start| ((start + run_end) / 2) as u8)
}

/// Binarizes by the global Otsu threshold: levels `<= t` become foreground.
///
/// A constant image yields all background (no ink detected).
pub fn otsu_binarize(img: &GrayImage) -> BinaryImage {
    let mask = match otsu_threshold(img) {
        Some(t) => img.levels().iter().map(|&v| v <= t).collect(),
        None => vec![false; img.levels().len()],
    };
    BinaryImage {
        width: img.width(),
        height: img.height(),
        mask,
    }
}

enum Format {
    Pgm,
    Pbm,
    Png,
}

fn sniff_format(bytes: &[u8]) -> Option<Format> {
    match bytes {
        [b'P', b'5', ..] => Some(Format::Pgm),
        [b'P', b'4', ..] => Some(Format::Pbm),
        [0x89, b'P', b'N', b'G', ..] => Some(Format::Png),
        _ => None,
    }
}

fn load_gray_png(path: &Path, bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let decoded = image::load_from_memory_with_format(bytes, image::ImageFormat::Png).map_err(
        |e| ImageError::MalformedHeader {
            path: display(path),
            format: "PNG",
            detail: e.to_string(),
        },
    )?;
    match decoded {
        image::DynamicImage::ImageLuma8(img) => {
            let (w, h) = (img.width() as usize, img.height() as usize);
            GrayImage::from_levels(w, h, img.into_raw())
        }
        other => Err(ImageError::Unsupported {
            path: display(path),
            detail: format!("PNG must be 8-bit grayscale, got {:?}", other.color()),
        }),
    }
}

/// Parses a PNM header after the magic: whitespace-separated decimal fields
/// with `#` comments. Returns the field values and the raster offset.
fn parse_pnm_fields(
    path: &Path,
    format: &'static str,
    bytes: &[u8],
    n_fields: usize,
) -> Result<(Vec<usize>, usize), ImageError> {
    let bad = |detail: String| ImageError::MalformedHeader {
        path: display(path),
        format,
        detail,
    };
    let mut fields = Vec::with_capacity(n_fields);
    let mut pos = 2; // past the magic
    while fields.len() < n_fields {
        match bytes.get(pos) {
            None => return Err(bad("unexpected end of header".into())),
            Some(b'#') => {
                while let Some(&c) = bytes.get(pos) {
                    pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            }
            Some(c) if c.is_ascii_whitespace() => pos += 1,
            Some(c) if c.is_ascii_digit() => {
                let mut value: usize = 0;
                while let Some(&c) = bytes.get(pos) {
                    if !c.is_ascii_digit() {
                        break;
                    }
                    value = value
                        .checked_mul(10)
                        .and_then(|v| v.checked_add((c - b'0') as usize))
                        .ok_or_else(|| bad("header field overflows".into()))?;
                    pos += 1;
                }
                fields.push(value);
            }
            Some(&c) => return Err(bad(format!("unexpected byte 0x{c:02x} in header"))),
        }
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(c) if c.is_ascii_whitespace() => Ok((fields, pos + 1)),
        _ => Err(bad("missing whitespace before raster".into())),
    }
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), ImageError> {
    let (fields, offset) = parse_pnm_fields(path, "PGM", bytes, 3)?;
    let (width, height, maxval) = (fields[0], fields[1], fields[2]);
    if maxval != 255 {
        return Err(ImageError::Unsupported {
            path: display(path),
            detail: format!("only 8-bit PGM supported (maxval 255), got {maxval}"),
        });
    }
    check_dims(width, height)?;
    let expected = width * height;
    let raster = &bytes[offset.min(bytes.len())..];
    if raster.len() < expected {
        return Err(ImageError::Truncated {
            path: display(path),
            expected,
            found: raster.len(),
        });
    }
    Ok((width, height, raster[..expected].to_vec()))
}

fn parse_pbm(path: &Path, bytes: &[u8]) -> Result<BinaryImage, ImageError> {
    let (fields, offset) = parse_pnm_fields(path, "PBM", bytes, 2)?;
    let (width, height) = (fields[0], fields[1]);
    check_dims(width, height)?;
    let row_bytes = width.div_ceil(8);
    let expected = row_bytes * height;
    let raster = &bytes[offset.min(bytes.len())..];
    if raster.len() < expected {
        return Err(ImageError::Truncated {
            path: display(path),
            expected,
            found: raster.len(),
        });
    }
    let mut mask = Vec::with_capacity(width * height);
    for y in 0..height {
        let row = &raster[y * row_bytes..(y + 1) * row_bytes];
        for x in 0..width {
            // PBM bit 1 = black = ink.
            mask.push(row[x / 8] & (0x80 >> (x % 8)) != 0);
        }
    }
    BinaryImage::from_mask(width, height, mask)
}

fn read_file(path: &Path) -> Result<Vec<u8>, ImageError> {
    fs::read(path).map_err(|source| ImageError::Io {
        path: display(path),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ImageError> {
    fs::write(path, bytes).map_err(|source| ImageError::Io {
        path: display(path),
        source,
    })
}

fn display(path: &Path) -> String {
    path.display().to_string()
}
