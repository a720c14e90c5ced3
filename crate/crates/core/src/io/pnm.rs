use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::segmentation::{Bitmap, GrayImage};

/// Reads a binary PGM (P5) or PPM (P6) with maxval 255. Color images are
/// reduced to luma with `0.299 R + 0.587 G + 0.114 B`.
pub fn read_pnm(reader: impl Read) -> Result<GrayImage> {
    let mut r = BufReader::new(reader);
    let magic = token(&mut r)?;
    let channels = match magic.as_str() {
        "P5" => 1,
        "P6" => 3,
        other => return Err(Error::Format(format!("unsupported PNM magic {other:?}"))),
    };
    let width: usize = parse(&token(&mut r)?)?;
    let height: usize = parse(&token(&mut r)?)?;
    let maxval: usize = parse(&token(&mut r)?)?;
    if maxval != 255 {
        return Err(Error::Format(format!("only 8-bit PNM is supported, maxval {maxval}")));
    }
    let mut raw = vec![0u8; width * height * channels];
    r.read_exact(&mut raw).map_err(|e| Error::Format(format!("truncated pixel data: {e}")))?;
    let data = if channels == 1 {
        raw
    } else {
        raw.chunks_exact(3)
            .map(|px| {
                let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect()
    };
    GrayImage::new(width, height, data)
}

pub fn write_pgm(mut w: impl Write, img: &GrayImage) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", img.width(), img.height())?;
    w.write_all(img.data())?;
    Ok(())
}

/// Writes a mask as a PGM with values {0, 255}.
pub fn write_mask_pgm(w: impl Write, bits: &Bitmap) -> Result<()> {
    let data = bits.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_pgm(w, &GrayImage::new(bits.width(), bits.height(), data)?)
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Format(format!("bad PNM header field {s:?}")))
}

/// Next whitespace-delimited header token, skipping `#` comments. Consumes
/// exactly one whitespace byte after the token.
fn token(r: &mut impl BufRead) -> Result<String> {
    let mut out = String::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format("unexpected end of PNM header".into()));
        }
        let c = byte[0];
        if c == b'#' && out.is_empty() {
            let mut line = Vec::new();
            r.read_until(b'\n', &mut line)?;
            continue;
        }
        if c.is_ascii_whitespace() {
            if out.is_empty() {
                continue;
            }
            return Ok(out);
        }
        out.push(c as char);
    }
}
