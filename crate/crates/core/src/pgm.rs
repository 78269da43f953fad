//! PGM (portable graymap) reading and writing, P2 ASCII and P5 binary.
//!
//! Pixels map linearly between the file's 0..=255 range and `[0,1]` grids;
//! maxval is fixed at 255 on write.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::morph2d::ImageGrid;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// P2, ASCII decimal samples.
    Ascii,
    /// P5, one raw byte per sample.
    Binary,
}

/// Read either PGM flavour into a single-channel grid scaled to `[0,1]`.
pub fn read_pgm<T: Real, R: BufRead>(mut input: R) -> Result<ImageGrid<T>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    let mut cursor = 0usize;

    let magic = next_token(&bytes, &mut cursor)
        .ok_or_else(|| Error::Parse("missing PGM magic".into()))?;
    let format = match magic.as_slice() {
        b"P2" => PgmFormat::Ascii,
        b"P5" => PgmFormat::Binary,
        other => {
            return Err(Error::Parse(format!(
                "unsupported magic {:?}; expected P2 or P5",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = parse_header_number(&bytes, &mut cursor, "width")?;
    let height = parse_header_number(&bytes, &mut cursor, "height")?;
    let maxval = parse_header_number(&bytes, &mut cursor, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("maxval {maxval} outside 1..=255")));
    }
    let count = width * height;
    let scale = T::of(1.0 / maxval as f64);
    let data: Vec<T> = match format {
        PgmFormat::Ascii => {
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let v = parse_header_number(&bytes, &mut cursor, "pixel")?;
                if v > maxval {
                    return Err(Error::Parse(format!("pixel {v} exceeds maxval {maxval}")));
                }
                out.push(T::of_usize(v) * scale);
            }
            out
        }
        PgmFormat::Binary => {
            // the header ends with exactly one whitespace byte before raster data
            let raster = &bytes[cursor..];
            if raster.len() < count {
                return Err(Error::Parse(format!(
                    "raster has {} bytes, needs {count}",
                    raster.len()
                )));
            }
            raster[..count]
                .iter()
                .map(|&b| {
                    if b as usize > maxval {
                        return Err(Error::Parse(format!("pixel {b} exceeds maxval {maxval}")));
                    }
                    Ok(T::of(b as f64) * scale)
                })
                .collect::<Result<_>>()?
        }
    };
    ImageGrid::new(height, width, 1, data)
}

/// Skip whitespace and `#` comments, returning the next token's bytes.
fn next_token(bytes: &[u8], cursor: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor < bytes.len() && bytes[*cursor] == b'#' {
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            continue;
        }
        break;
    }
    if *cursor >= bytes.len() {
        return None;
    }
    let start = *cursor;
    while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    let token = bytes[start..*cursor].to_vec();
    // consume the single delimiter so binary rasters start cleanly
    if *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
        *cursor += 1;
    }
    Some(token)
}

fn parse_header_number(bytes: &[u8], cursor: &mut usize, what: &str) -> Result<usize> {
    let token = next_token(bytes, cursor)
        .ok_or_else(|| Error::Parse(format!("unexpected end of file reading {what}")))?;
    std::str::from_utf8(&token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| {
            Error::Parse(format!(
                "bad {what} token '{}'",
                String::from_utf8_lossy(&token)
            ))
        })
}

/// Write a single-channel grid as PGM with maxval 255; values are clamped to
/// `[0,1]` and rounded to the nearest level.
pub fn write_pgm<T: Real, W: Write>(
    image: &ImageGrid<T>,
    format: PgmFormat,
    mut out: W,
) -> Result<()> {
    if image.channels() != 1 {
        return Err(Error::Unsupported("PGM holds a single channel".into()));
    }
    let magic = match format {
        PgmFormat::Ascii => "P2",
        PgmFormat::Binary => "P5",
    };
    write!(out, "{magic}\n{} {}\n255\n", image.width(), image.height())?;
    let quantize = |v: T| -> u8 {
        let clamped = v.max(T::zero()).min(T::one());
        (clamped.as_f64() * 255.0).round() as u8
    };
    match format {
        PgmFormat::Ascii => {
            for i in 0..image.height() {
                let row: Vec<String> = (0..image.width())
                    .map(|j| quantize(image.get(0, i, j)).to_string())
                    .collect();
                writeln!(out, "{}", row.join(" "))?;
            }
        }
        PgmFormat::Binary => {
            let raster: Vec<u8> = image.data().iter().map(|&v| quantize(v)).collect();
            out.write_all(&raster)?;
        }
    }
    Ok(())
}

pub fn load_pgm<T: Real>(path: &Path) -> Result<ImageGrid<T>> {
    let file = std::fs::File::open(path)?;
    read_pgm(std::io::BufReader::new(file))
}

pub fn save_pgm<T: Real>(image: &ImageGrid<T>, format: PgmFormat, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_pgm(image, format, std::io::BufWriter::new(file))
}
