//! Portable float map, single channel (`Pf`).
//!
//! Layout: three ASCII header lines (`Pf`, `W H`, scale) followed by
//! `4·W·H` bytes of `f32`, rows stored bottom-to-top. A negative scale means
//! little-endian payload, positive means big-endian.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub fn write_pfm(grid: &Grid) -> Vec<u8> {
    let (w, h) = grid.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(4 * w * h);
    for y in (0..h).rev() {
        for &v in &grid.values()[y * w..(y + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_pfm(bytes: &[u8]) -> Result<Grid> {
    let mut cursor = 0;
    let magic = next_token(bytes, &mut cursor)?;
    match magic {
        "Pf" => {}
        "PF" => {
            return Err(Error::UnsupportedChannels(
                "PF (3-channel) maps are not supported".into(),
            ))
        }
        other => return Err(Error::BadHeader(format!("unknown magic {other:?}"))),
    }
    let width = parse_dim(next_token(bytes, &mut cursor)?)?;
    let height = parse_dim(next_token(bytes, &mut cursor)?)?;
    let scale: f64 = next_token(bytes, &mut cursor)?
        .parse()
        .map_err(|e| Error::BadHeader(format!("scale: {e}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::BadHeader(format!(
            "scale must be finite and nonzero, got {scale}"
        )));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if bytes.get(cursor).is_none_or(|b| !b.is_ascii_whitespace()) {
        return Err(Error::BadHeader("missing separator after scale".into()));
    }
    cursor += 1;

    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::BadHeader("dimensions overflow".into()))?;
    let payload = &bytes[cursor..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    let little = scale < 0.0;
    let mut values = vec![0.0f32; width * height];
    for (k, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, x) = (k / width, k % width);
        values[(height - 1 - file_row) * width + x] = v;
    }
    Grid::new(width, height, values)
}

fn next_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Result<&'a str> {
    while bytes.get(*cursor).is_some_and(|b| b.is_ascii_whitespace()) {
        *cursor += 1;
    }
    let start = *cursor;
    while bytes.get(*cursor).is_some_and(|b| !b.is_ascii_whitespace()) {
        *cursor += 1;
    }
    if start == *cursor {
        return Err(Error::BadHeader("unexpected end of header".into()));
    }
    std::str::from_utf8(&bytes[start..*cursor]).map_err(|_| Error::BadHeader("non-ASCII header".into()))
}

fn parse_dim(token: &str) -> Result<usize> {
    match token.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(Error::BadHeader(format!("bad dimension {token:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_pixel_layout() {
        let g = Grid::new(1, 1, vec![2.5]).unwrap();
        let bytes = write_pfm(&g);
        assert_eq!(&bytes[..12], b"Pf\n1 1\n-1.0\n");
        assert_eq!(&bytes[12..], &2.5f32.to_le_bytes());
        assert_eq!(read_pfm(&bytes).unwrap(), g);
    }

    #[test]
    fn rows_are_stored_bottom_up() {
        let g = Grid::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = write_pfm(&g);
        let payload: Vec<f32> = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        assert_eq!(payload, vec![3.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn reads_big_endian() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-3.0f32).to_be_bytes());
        assert_eq!(read_pfm(&bytes).unwrap().values(), &[1.5, -3.0]);
    }

    #[test]
    fn malformed_inputs() {
        let g = Grid::new(3, 2, vec![1.0; 6]).unwrap();
        let bytes = write_pfm(&g);
        assert!(matches!(
            read_pfm(&bytes[..bytes.len() - 1]),
            Err(Error::TruncatedPayload {
                expected: 24,
                actual: 23
            })
        ));
        assert!(matches!(
            read_pfm(b"PF\n1 1\n-1.0\n\0\0\0\0"),
            Err(Error::UnsupportedChannels(_))
        ));
        assert!(matches!(read_pfm(b"P5\n1 1\n-1.0\n\0\0\0\0"), Err(Error::BadHeader(_))));
        assert!(matches!(read_pfm(b"Pf\n0 1\n-1.0\n"), Err(Error::BadHeader(_))));
        assert!(matches!(read_pfm(b"Pf\n1 1\n0\n\0\0\0\0"), Err(Error::BadHeader(_))));
        assert!(matches!(read_pfm(b"Pf\n1"), Err(Error::BadHeader(_))));
        let mut nan = b"Pf\n1 1\n-1.0\n".to_vec();
        nan.extend_from_slice(&f32::NAN.to_le_bytes());
        assert!(read_pfm(&nan).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bitwise(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let mut state = seed;
            let values: Vec<f32> = (0..w * h).map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = f32::from_bits((state >> 32) as u32);
                if v.is_finite() { v } else { 0.0 }
            }).collect();
            let g = Grid::new(w, h, values).unwrap();
            let back = read_pfm(&write_pfm(&g)).unwrap();
            let a: Vec<u32> = g.values().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = back.values().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
