//! Binary PGM (P5) and PPM (P6) with maxval 255.

use std::io::{Read, Write};
use std::path::Path;

use crate::augment::RasterImage;
use crate::{CalibError, Result};

fn parse_err(msg: impl Into<String>) -> CalibError {
    CalibError::Parse {
        source_name: "pnm".into(),
        line: 1,
        msg: msg.into(),
    }
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => return Err(parse_err("not a binary PGM/PPM file (expected P5 or P6)")),
    };
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        // whitespace and comments before each header field
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(parse_err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err("malformed header number"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(parse_err("missing whitespace after maxval"));
    }
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(parse_err(format!("only maxval 255 is supported, got {maxval}")));
    }
    Ok(Header {
        channels,
        width,
        height,
        data_offset: pos + 1,
    })
}

pub fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let h = parse_header(bytes)?;
    let n = h.width * h.height * h.channels;
    let data = bytes
        .get(h.data_offset..h.data_offset + n)
        .ok_or_else(|| parse_err(format!("expected {n} bytes of pixel data")))?;
    RasterImage::new(h.width, h.height, h.channels, data.to_vec())
}

pub fn encode(img: &RasterImage) -> Vec<u8> {
    let magic = if img.channels() == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

/// `ppm` for RGB, `pgm` for grayscale.
pub fn extension(img: &RasterImage) -> &'static str {
    if img.channels() == 1 {
        "pgm"
    } else {
        "ppm"
    }
}

pub fn read(path: &Path) -> Result<RasterImage> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes).map_err(|e| match e {
        CalibError::Parse { line, msg, .. } => CalibError::Parse {
            source_name: path.display().to_string(),
            line,
            msg,
        },
        other => other,
    })
}

pub fn write(path: &Path, img: &RasterImage) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(img))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_both_kinds() {
        let gray = RasterImage::new(3, 2, 1, vec![0, 1, 2, 253, 254, 255]).unwrap();
        assert_eq!(decode(&encode(&gray)).unwrap(), gray);
        let rgb = RasterImage::new(2, 1, 3, vec![9, 8, 7, 6, 5, 4]).unwrap();
        let bytes = encode(&rgb);
        assert!(bytes.starts_with(b"P6\n2 1\n255\n"));
        assert_eq!(decode(&bytes).unwrap(), rgb);
        assert_eq!(extension(&rgb), "ppm");
        assert_eq!(extension(&gray), "pgm");
    }

    #[test]
    fn header_comments_and_whitespace() {
        let mut bytes = b"P5 # made by hand\n# another\n 2\t1 255\n".to_vec();
        bytes.extend([10, 32]);
        let img = decode(&bytes).unwrap();
        assert_eq!(img.pixels(), &[10, 32]);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(decode(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode(b"P5\n1 1\n65535\n\x00\x00").is_err());
        assert!(decode(b"P5\n1").is_err());
    }
}
