//! File formats: binary PGM/PPM images, landmark CSV, and the DFLD1
//! displacement-field container.
//!
//! All writers go through a temp-file-plus-rename so a failing run never
//! leaves partial artifacts behind.

use std::fs;
use std::io::{ErrorKind, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::LandmarkSet;
use crate::field::DisplacementField;
use crate::image::Image;

fn io_err(path: &Path, source: std::io::Error) -> Error {
    if source.kind() == ErrorKind::NotFound {
        Error::FileNotFound(path.to_path_buf())
    } else {
        Error::IoFailure {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Write `bytes` atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = PathBuf::from(path);
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| ".artifact".into());
    name.push(".tmp");
    tmp.set_file_name(name);

    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut f = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_all().ok();
    drop(f);
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

/// Pull the next whitespace-delimited token, skipping `#` comment lines.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    while *pos < bytes.len() {
        let b = bytes[*pos];
        if b == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

/// Load a binary PGM (P5) or PPM (P6) image, 8-bit, maxval 255. Intensities
/// map to `[0, 1]` by `v / 255`; color inputs collapse to luminance
/// `0.299 R + 0.587 G + 0.114 B` before normalization.
pub fn load_image(path: &Path) -> Result<Image> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let mut pos = 0usize;
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| malformed(path, "missing magic"))?;
    if magic != "P5" && magic != "P6" {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("magic {magic:?}, want P5 or P6"),
        });
    }
    let mut dim = |what: &str| -> Result<usize> {
        next_token(&bytes, &mut pos)
            .ok_or_else(|| malformed(path, format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|_| malformed(path, format!("non-numeric {what}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("maxval")?;
    if maxval != 255 {
        return Err(Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: format!("maxval {maxval}, only 8-bit (255) supported"),
        });
    }
    if width == 0 || height == 0 {
        return Err(malformed(path, "zero dimension"));
    }
    // exactly one whitespace byte separates header and payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(malformed(path, "missing payload separator"));
    }
    pos += 1;

    let channels = if magic == "P5" { 1 } else { 3 };
    let need = width * height * channels;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(malformed(
            path,
            format!(
                "payload truncated: need {need} bytes, found {}",
                payload.len()
            ),
        ));
    }
    let data: Vec<f64> = if channels == 1 {
        payload[..need].iter().map(|&b| b as f64 / 255.0).collect()
    } else {
        payload[..need]
            .chunks_exact(3)
            .map(|px| (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0)
            .collect()
    };
    Image::from_vec(width, height, data)
}

/// Save as binary PGM (P5): intensities clamped to `[0, 1]`, then
/// `round(v * 255)`.
pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    let mut bytes = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    bytes.extend(
        img.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    write_atomic(path, &bytes)
}

/// Load a landmark CSV: one `x,y` pair per line, real-valued, with an
/// optional `x,y` header. Order is preserved.
pub fn load_landmarks(path: &Path) -> Result<LandmarkSet> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if idx == 0 && trimmed.eq_ignore_ascii_case("x,y") {
            continue;
        }
        let mut parts = trimmed.split(',');
        let parse = |s: Option<&str>| -> Result<f64> {
            s.map(str::trim)
                .and_then(|t| t.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::ParseError {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: format!("expected `x,y` reals, got {trimmed:?}"),
                })
        };
        let x = parse(parts.next())?;
        let y = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::ParseError {
                path: path.to_path_buf(),
                line: line_no,
                reason: "more than two fields".into(),
            });
        }
        points.push((x, y));
    }
    Ok(LandmarkSet::new(points))
}

/// Save landmarks as CSV, one `x,y` per line.
pub fn save_landmarks(set: &LandmarkSet, path: &Path) -> Result<()> {
    let mut text = String::new();
    for &(x, y) in &set.points {
        text.push_str(&format!("{x},{y}\n"));
    }
    write_atomic(path, text.as_bytes())
}

const FIELD_MAGIC: &str = "DFLD1";

/// Save a displacement field: ASCII header `DFLD1 <width> <height>\n`, then
/// row-major little-endian f32 `(dx, dy)` pairs.
pub fn save_field(field: &DisplacementField, path: &Path) -> Result<()> {
    let mut bytes = format!("{FIELD_MAGIC} {} {}\n", field.width(), field.height()).into_bytes();
    bytes.reserve(field.width() * field.height() * 8);
    for (&dx, &dy) in field.dx().iter().zip(field.dy()) {
        bytes.extend_from_slice(&(dx as f32).to_le_bytes());
        bytes.extend_from_slice(&(dy as f32).to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Load a DFLD1 displacement field. Round-trips through [`save_field`] are
/// exact at f32 precision.
pub fn load_field(path: &Path) -> Result<DisplacementField> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| malformed(path, "missing header line"))?;
    let header = String::from_utf8_lossy(&bytes[..newline]);
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some(FIELD_MAGIC) {
        return Err(Error::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse::<usize>().ok())
            .ok_or_else(|| malformed(path, format!("bad {what}")))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let payload = &bytes[newline + 1..];
    let expected = width * height * 8;
    if payload.len() != expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            found: payload.len(),
        });
    }
    let mut dx = Vec::with_capacity(width * height);
    let mut dy = Vec::with_capacity(width * height);
    for pair in payload.chunks_exact(8) {
        dx.push(f32::from_le_bytes(pair[0..4].try_into().unwrap()) as f64);
        dy.push(f32::from_le_bytes(pair[4..8].try_into().unwrap()) as f64);
    }
    DisplacementField::from_components(width, height, dx, dy)
}
