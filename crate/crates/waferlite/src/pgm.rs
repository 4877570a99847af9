//! Binary PGM (P5, maxval 255) reading and writing.
//!
//! Writing always emits the canonical header `P5\n{w} {h}\n255\n` so a
//! write/read round trip is byte-lossless. Reading accepts the general
//! format: whitespace-separated header tokens and `#` comments.

use std::fs;
use std::io::Write;
use std::path::Path;

use waferlite_core::image::ImageU8;

use crate::error::{Error, Result};

pub fn write_pgm(img: &ImageU8, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(img.pixels().len() + 32);
    write!(buf, "P5\n{} {}\n255\n", img.width(), img.height())
        .expect("writing to a Vec cannot fail");
    buf.extend_from_slice(img.pixels());
    fs::write(path, buf).map_err(|e| Error::file(path, e))
}

pub fn read_pgm(path: &Path) -> Result<ImageU8> {
    let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_pgm(&bytes).map_err(|msg| Error::ImageFormat { path: path.into(), msg })
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<ImageU8, String> {
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err("missing P5 magic".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3]; // width, height, maxval

    for field in fields.iter_mut() {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        let token = std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII header")?;
        *field = token.parse::<usize>().map_err(|e| format!("bad header value: {e}"))?;
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(format!("unsupported maxval {maxval}, only 255 is supported"));
    }
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err("missing header terminator".into());
    }
    pos += 1;
    let need = width * height;
    let payload = &bytes[pos..];
    if payload.len() < need {
        return Err(format!("payload holds {} bytes, image needs {need}", payload.len()));
    }
    ImageU8::new(height, width, payload[..need].to_vec()).map_err(|e| e.to_string())
}
