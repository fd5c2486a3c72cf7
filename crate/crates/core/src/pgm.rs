//! Minimal PGM (portable graymap) reader and writer.
//!
//! Supports the ASCII (`P2`) and binary (`P5`) variants with `#` comments
//! anywhere in the header. Writing always uses `P2`, which keeps exported
//! stimuli diffable.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub pixels: Grid<u16>,
    pub maxval: u16,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Graymap(msg.into())
}

/// Pulls the next whitespace-separated token, skipping `#` comments to end of line.
fn next_token(bytes: &[u8], pos: &mut usize) -> Result<String> {
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
        return Err(bad("unexpected end of header"));
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
}

fn parse_number(token: &str, what: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| bad(format!("invalid {what}: {token:?}")))
}

pub fn decode(bytes: &[u8]) -> Result<Graymap> {
    let mut pos = 0usize;
    let magic = next_token(bytes, &mut pos)?;
    let binary = match magic.as_str() {
        "P2" => false,
        "P5" => true,
        other => return Err(bad(format!("unsupported magic {other:?}"))),
    };
    let width = parse_number(&next_token(bytes, &mut pos)?, "width")?;
    let height = parse_number(&next_token(bytes, &mut pos)?, "height")?;
    let maxval = parse_number(&next_token(bytes, &mut pos)?, "maxval")?;
    if width == 0 || height == 0 {
        return Err(bad("zero width or height"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad(format!("maxval {maxval} outside 1..=65535")));
    }
    let count = width * height;
    let mut data = Vec::with_capacity(count);
    if binary {
        // A single whitespace byte separates the header from raster data.
        pos += 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        let raster = bytes
            .get(pos..pos + need)
            .ok_or_else(|| bad("raster shorter than header promises"))?;
        if wide {
            for pair in raster.chunks_exact(2) {
                data.push(u16::from_be_bytes([pair[0], pair[1]]));
            }
        } else {
            data.extend(raster.iter().map(|&b| b as u16));
        }
    } else {
        for _ in 0..count {
            let token = next_token(bytes, &mut pos)
                .map_err(|_| bad("raster shorter than header promises"))?;
            data.push(parse_number(&token, "sample")? as u16);
        }
    }
    if data.iter().any(|&v| v as usize > maxval) {
        return Err(bad("sample exceeds maxval"));
    }
    Ok(Graymap {
        pixels: Grid::from_vec(height, width, data),
        maxval: maxval as u16,
    })
}

pub fn read(path: &Path) -> Result<Graymap> {
    let bytes = std::fs::read(path)?;
    decode(&bytes)
}

/// Serializes as ASCII `P2`; rows of the grid become lines of the file.
pub fn encode(map: &Graymap) -> Vec<u8> {
    let mut out = Vec::new();
    let (h, w) = map.pixels.dims();
    writeln!(out, "P2").unwrap();
    writeln!(out, "{} {}", w, h).unwrap();
    writeln!(out, "{}", map.maxval).unwrap();
    for row in 0..h {
        let line: Vec<String> = (0..w)
            .map(|col| map.pixels[(row, col)].to_string())
            .collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    out
}

pub fn write(path: &Path, map: &Graymap) -> Result<()> {
    let bytes = encode(map);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&bytes)?;
    Ok(())
}

/// Reads from any `BufRead`, for callers that already hold a stream.
pub fn read_from(reader: &mut impl BufRead) -> Result<Graymap> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ascii_round_trip() {
        let map = Graymap {
            pixels: Grid::from_vec(2, 3, vec![0, 5, 10, 10, 5, 0]),
            maxval: 10,
        };
        let bytes = encode(&map);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, map);
    }

    #[test]
    fn comments_are_skipped() {
        let src = b"P2 # magic\n# a comment line\n3 2\n# another\n255\n1 2 3\n4 5 6\n";
        let map = decode(src).unwrap();
        assert_eq!(map.pixels.dims(), (2, 3));
        assert_eq!(map.pixels[(1, 2)], 6);
        assert_eq!(map.maxval, 255);
    }

    #[test]
    fn binary_narrow_and_wide() {
        let narrow = b"P5\n2 2\n255\n\x00\x7f\xff\x01";
        let map = decode(narrow).unwrap();
        assert_eq!(map.pixels[(0, 1)], 0x7f);
        assert_eq!(map.pixels[(1, 0)], 0xff);

        let wide = b"P5\n1 2\n65535\n\x01\x00\x00\xff";
        let map = decode(wide).unwrap();
        assert_eq!(map.pixels[(0, 0)], 256);
        assert_eq!(map.pixels[(1, 0)], 255);
    }

    #[test]
    fn truncated_raster_is_rejected() {
        let src = b"P2\n2 2\n255\n1 2 3";
        assert!(decode(src).is_err());
        let src = b"P5\n2 2\n255\n\x00\x01";
        assert!(decode(src).is_err());
    }

    #[test]
    fn sample_above_maxval_is_rejected() {
        let src = b"P2\n1 1\n10\n11\n";
        assert!(decode(src).is_err());
    }
}
