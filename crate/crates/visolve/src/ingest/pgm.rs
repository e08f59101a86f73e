//! Portable graymap (PGM) in plain (`P2`) and raw (`P5`) encodings.

use std::fs;
use std::path::Path;

use visolve_core::image::GrayImage;

use crate::error::{io_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmEncoding {
    Plain,
    Raw,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Pgm(msg.into())
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(bad(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(format!("bad {what}")))
    }
}

/// Decodes a PGM and scales samples by `1/maxval` into `[0, 1]`.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let raw = match bytes.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        _ => return Err(bad("bad magic number (expected P2 or P5)")),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(bad("empty image"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| bad("image too large"))?;
    let scale = 1.0 / maxval as f64;
    let mut values = Vec::with_capacity(count);
    if raw {
        if !bytes.get(h.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(bad("missing separator before raster"));
        }
        let data = &bytes[h.pos + 1..];
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if data.len() < need {
            return Err(bad(format!(
                "truncated raster: {} of {need} bytes",
                data.len()
            )));
        }
        for k in 0..count {
            let v = if wide {
                u16::from_be_bytes([data[2 * k], data[2 * k + 1]]) as usize
            } else {
                data[k] as usize
            };
            values.push(v);
        }
    } else {
        for k in 0..count {
            let v = h
                .number("sample")
                .map_err(|_| bad(format!("truncated raster after {k} of {count} samples")))?;
            values.push(v);
        }
    }
    if let Some(v) = values.iter().find(|&&v| v > maxval) {
        return Err(bad(format!("sample {v} exceeds maxval {maxval}")));
    }
    let pixels = values.into_iter().map(|v| v as f64 * scale).collect();
    Ok(GrayImage::new(height, width, pixels)?)
}

/// Encodes with values clamped to `[0, 1]` and rounded to `maxval` levels.
pub fn save_pgm(image: &GrayImage, encoding: PgmEncoding, maxval: u16) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(bad("maxval must be positive"));
    }
    let m = maxval as f64;
    let quant = image
        .pixels()
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * m).round() as u16);
    let magic = match encoding {
        PgmEncoding::Plain => "P2",
        PgmEncoding::Raw => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", image.width(), image.height()).into_bytes();
    match encoding {
        PgmEncoding::Raw if maxval > 255 => quant.for_each(|v| out.extend(v.to_be_bytes())),
        PgmEncoding::Raw => quant.for_each(|v| out.push(v as u8)),
        PgmEncoding::Plain => {
            let w = image.width();
            for (k, v) in quant.enumerate() {
                out.extend(v.to_string().bytes());
                out.push(if (k + 1) % w == 0 { b'\n' } else { b' ' });
            }
        }
    }
    Ok(out)
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    load_pgm(&fs::read(path).map_err(io_err(path))?)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    fs::write(path, save_pgm(image, PgmEncoding::Raw, 255)?).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_plain() {
        let img = load_pgm(b"P2\n2 2\n255\n0 255\n128 64\n").unwrap();
        assert_eq!((img.height(), img.width()), (2, 2));
        assert_eq!(img.pixels(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn comments_in_header() {
        let img = load_pgm(b"P2 # made by hand\n# another\n3 1 # w h\n4\n0 2 4").unwrap();
        assert_eq!(img.pixels(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn plain_and_raw_agree() {
        let plain = load_pgm(b"P2\n3 2\n255\n0 10 20\n30 40 255\n").unwrap();
        let mut raw = b"P5\n3 2\n255\n".to_vec();
        raw.extend([0u8, 10, 20, 30, 40, 255]);
        assert_eq!(load_pgm(&raw).unwrap(), plain);
        let mut wide = b"P5 3 2 65535\n".to_vec();
        for v in [0u16, 2570, 5140, 7710, 10280, 65535] {
            wide.extend(v.to_be_bytes());
        }
        assert_eq!(load_pgm(&wide).unwrap(), plain);
    }

    #[test]
    fn rejects_malformed() {
        for bytes in [
            &b"P3\n1 1\n255\n0"[..],
            b"",
            b"P2\n2 2\n255\n0 1 2",
            b"P5\n2 2\n255\n\x00\x01\x02",
            b"P2\n2 x\n255\n0 0 0 0",
            b"P2\n1 1\n70000\n0",
            b"P2\n1 1\n0\n0",
            b"P2\n1 1\n10\n11",
            b"P2\n0 1\n10\n",
        ] {
            assert!(matches!(load_pgm(bytes), Err(Error::Pgm(_))), "{bytes:?}");
        }
    }

    #[test]
    fn save_clamps() {
        let img = GrayImage::new(1, 3, vec![-0.5, 0.5, 2.0]).unwrap();
        let bytes = save_pgm(&img, PgmEncoding::Plain, 255).unwrap();
        assert_eq!(bytes, b"P2\n3 1\n255\n0 128 255\n");
    }

    proptest! {
        #[test]
        fn round_trip_within_quantization(
            h in 1usize..6,
            w in 1usize..6,
            seed in proptest::collection::vec(0.0f64..=1.0, 36),
            wide in any::<bool>(),
            plain in any::<bool>(),
        ) {
            let img = GrayImage::new(h, w, seed[..h * w].to_vec()).unwrap();
            let maxval = if wide { 65535 } else { 255 };
            let enc = if plain { PgmEncoding::Plain } else { PgmEncoding::Raw };
            let back = load_pgm(&save_pgm(&img, enc, maxval).unwrap()).unwrap();
            prop_assert_eq!((back.height(), back.width()), (h, w));
            for (a, b) in img.pixels().iter().zip(back.pixels()) {
                prop_assert!((a - b).abs() <= 1.0 / maxval as f64);
            }
        }
    }
}
