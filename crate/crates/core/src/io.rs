//! Raster file I/O: binary PGM (`P5`, maxval 255) for reading and writing,
//! 8-bit PNG for reading. Masks and ground truth must be single-channel;
//! input video frames may be color and are reduced to luma on load.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, GrayFrame, GroundTruthFrame};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

/// Reads an 8-bit single-channel raster, dispatching on the file's magic bytes.
pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayFrame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(path, &bytes, false)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(path, &bytes)
    } else {
        Err(malformed(path, "unrecognised format (expected binary PGM or PNG)"))
    }
}

/// Reads an input video frame. Unlike [`read_gray`], 8-bit RGB and RGBA
/// PNGs are accepted and converted with the integer luma approximation
/// `(77 R + 150 G + 29 B) >> 8`.
pub fn read_frame(path: impl AsRef<Path>) -> Result<GrayFrame> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(path, &bytes, true)
    } else if bytes.starts_with(b"P5") {
        decode_pgm(path, &bytes)
    } else {
        Err(malformed(path, "unrecognised format (expected binary PGM or PNG)"))
    }
}

pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    ((77 * u32::from(r) + 150 * u32::from(g) + 29 * u32::from(b)) >> 8) as u8
}

/// Writes a binary PGM with maxval 255.
pub fn write_gray(frame: &GrayFrame, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(frame.data().len() + 20);
    write!(out, "P5\n{} {}\n255\n", frame.width(), frame.height()).expect("vec write");
    out.extend_from_slice(frame.data());
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a foreground mask; bytes >= 128 decode to foreground.
pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    Ok(read_gray(path)?.to_mask())
}

pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_gray(&GrayFrame::from_mask(mask), path)
}

/// Reads a CDNET ground-truth frame (labels 0, 50, 85, 170, 255).
pub fn read_groundtruth(path: impl AsRef<Path>) -> Result<GroundTruthFrame> {
    let path = path.as_ref();
    let frame = read_gray(path)?;
    GroundTruthFrame::from_bytes(frame.width(), frame.height(), frame.data()).map_err(|e| match e {
        Error::UnknownLabel { value, index, .. } => Error::UnknownLabel {
            value,
            index,
            path: Some(path.to_path_buf()),
        },
        other => other,
    })
}

pub fn write_groundtruth(gt: &GroundTruthFrame, path: impl AsRef<Path>) -> Result<()> {
    write_gray(
        &GrayFrame::new(gt.width(), gt.height(), gt.to_bytes())?,
        path,
    )
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedRaster {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self) -> Option<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()?
            .parse()
            .ok()
    }
}

fn decode_pgm(path: &Path, bytes: &[u8]) -> Result<GrayFrame> {
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number().ok_or_else(|| malformed(path, "bad width in header"))?;
    let height = cur.number().ok_or_else(|| malformed(path, "bad height in header"))?;
    let maxval = cur.number().ok_or_else(|| malformed(path, "bad maxval in header"))?;
    if width == 0 || height == 0 {
        return Err(malformed(path, format!("degenerate size {width}x{height}")));
    }
    if maxval != 255 {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!("PGM maxval {maxval}, only 255 is supported"),
        });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(malformed(path, "missing separator after header")),
    }
    let need = width * height;
    let body = &bytes[cur.pos..];
    if body.len() < need {
        return Err(malformed(
            path,
            format!("truncated body: {} of {need} bytes", body.len()),
        ));
    }
    GrayFrame::new(width, height, body[..need].to_vec())
}

fn decode_png(path: &Path, bytes: &[u8], allow_color: bool) -> Result<GrayFrame> {
    let decoder = png::Decoder::new(bytes);
    let mut reader = decoder
        .read_info()
        .map_err(|e| malformed(path, format!("png header: {e}")))?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| malformed(path, format!("png body: {e}")))?;
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::Rgb if allow_color => 3,
        png::ColorType::Rgba if allow_color => 4,
        _ => 0,
    };
    if channels == 0 || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedBitDepth {
            path: path.to_path_buf(),
            detail: format!(
                "png {:?} at {:?}; only 8-bit grayscale is supported here",
                info.color_type, info.bit_depth
            ),
        });
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut data = Vec::with_capacity(width * height);
    for row in buf.chunks(info.line_size).take(height) {
        if channels == 1 {
            data.extend_from_slice(&row[..width]);
        } else {
            data.extend(row[..width * channels].chunks(channels).map(|px| luma(px[0], px[1], px[2])));
        }
    }
    GrayFrame::new(width, height, data)
}
