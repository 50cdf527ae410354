//! Binary field files: a text header `SCHLAB1 dim components N` and a
//! newline, then every coefficient as two little-endian f64 (re, im).
//! Components come outermost; within a component the wavenumbers run in
//! ascending order from −N/2 to N/2 − 1, row-major in 2-D.

use std::io::{Read, Write};
use std::path::Path;

use schlab::{Complex64, SpectralField};

pub const MAGIC: &str = "SCHLAB1";

#[derive(Debug, thiserror::Error)]
pub enum FieldIoError {
    #[error("not a field file: expected magic {MAGIC}, found {0:?}")]
    Magic(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated coefficient block: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{0} trailing bytes after the coefficient block")]
    Trailing(usize),
    #[error(transparent)]
    Field(#[from] schlab::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn ascending(n: usize) -> impl Iterator<Item = i64> + Clone {
    let h = (n / 2) as i64;
    -h..h
}

fn wavevectors(dim: usize, n: usize) -> Vec<[i64; 2]> {
    if dim == 1 {
        ascending(n).map(|k| [k, 0]).collect()
    } else {
        ascending(n).flat_map(|a| ascending(n).map(move |b| [a, b])).collect()
    }
}

pub fn encode(f: &SpectralField) -> Vec<u8> {
    let mut out = format!("{MAGIC} {} {} {}\n", f.dim(), f.components(), f.resolution()).into_bytes();
    let ks = wavevectors(f.dim(), f.resolution());
    for c in 0..f.components() {
        for k in &ks {
            let z = f.coeff(c, &k[..f.dim()]);
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<SpectralField, FieldIoError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| FieldIoError::Header("no header line".into()))?;
    let header = std::str::from_utf8(&bytes[..nl]).map_err(|_| FieldIoError::Header("header is not UTF-8".into()))?;
    let mut parts = header.split_whitespace();
    let magic = parts.next().unwrap_or("");
    if magic != MAGIC {
        return Err(FieldIoError::Magic(magic.to_string()));
    }
    let mut num = |what: &str| -> Result<usize, FieldIoError> {
        parts
            .next()
            .ok_or_else(|| FieldIoError::Header(format!("missing {what}")))?
            .parse()
            .map_err(|_| FieldIoError::Header(format!("bad {what}")))
    };
    let (dim, components, n) = (num("dim")?, num("components")?, num("N")?);
    let mut f = SpectralField::zeros(dim, components, n)?;
    let ks = wavevectors(dim, n);
    let body = &bytes[nl + 1..];
    let expected = components * ks.len() * 16;
    if body.len() < expected {
        return Err(FieldIoError::Truncated {
            expected,
            found: body.len(),
        });
    }
    if body.len() > expected {
        return Err(FieldIoError::Trailing(body.len() - expected));
    }
    let mut chunks = body
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")));
    for c in 0..components {
        for k in &ks {
            let re = chunks.next().expect("length checked");
            let im = chunks.next().expect("length checked");
            f.set_coeff(c, &k[..dim], Complex64::new(re, im));
        }
    }
    Ok(f)
}

pub fn write_field(path: &Path, f: &SpectralField) -> Result<(), FieldIoError> {
    std::fs::File::create(path)?.write_all(&encode(f))?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<SpectralField, FieldIoError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let f = SpectralField::from_fn_2d(16, 2, |x, y| vec![(x + 0.3).sin() * y.cos(), (2.0 * y).exp().ln()]).unwrap();
        let g = decode(&encode(&f)).unwrap();
        assert_eq!(f.coeffs().len(), g.coeffs().len());
        for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }

    #[test]
    fn cos3_coefficients_are_pi() {
        let f = SpectralField::from_fn_1d(32, |x| (3.0 * x).cos()).unwrap();
        let bytes = encode(&f);
        let body = &bytes[bytes.iter().position(|&b| b == b'\n').unwrap() + 1..];
        // ascending order starts at k = −16, so k = ±3 sit at offsets 13 and 19
        let re_at = |i: usize| f64::from_le_bytes(body[16 * i..16 * i + 8].try_into().unwrap());
        assert!((re_at(13) - std::f64::consts::PI).abs() < 1e-12);
        assert!((re_at(19) - std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn bad_files_are_rejected() {
        let f = SpectralField::from_fn_1d(16, |x| x.sin()).unwrap();
        let bytes = encode(&f);
        assert!(matches!(
            decode(&bytes[..bytes.len() - 5]),
            Err(FieldIoError::Truncated { .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(decode(&extra), Err(FieldIoError::Trailing(1))));
        let mut wrong = bytes.clone();
        wrong[6] = b'2';
        assert!(matches!(decode(&wrong), Err(FieldIoError::Magic(_))));
        assert!(matches!(decode(b"SCHLAB1 1 1\n"), Err(FieldIoError::Header(_))));
    }
}
