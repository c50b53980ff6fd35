//! File formats: TSR3 tensors, CSV point clouds, JSON documents.
//!
//! TSR3 layout (all little endian):
//!
//! ```text
//! 0..4   b"TSR3"
//! 4      version = 1
//! 5      dtype = 0 (complex64)
//! 6..8   reserved, zero
//! 8..20  d0, d1, d2 as u32
//! 20..   d0*d1*d2 elements, each f32 real then f32 imaginary,
//!        row-major with the last index fastest
//! ```
//!
//! Elements are stored in single precision, so writing rounds each
//! component to the nearest `f32`; a file read back and written again is
//! byte-identical.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sim::{PointCloud, ScatterPoint};
use crate::tensor::ComplexTensor3;

pub const TSR3_MAGIC: &[u8; 4] = b"TSR3";
pub const TSR3_VERSION: u8 = 1;
const HEADER_LEN: usize = 20;

pub fn encode_tsr3(t: &ComplexTensor3) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * t.len());
    out.extend_from_slice(TSR3_MAGIC);
    out.extend_from_slice(&[TSR3_VERSION, 0, 0, 0]);
    for d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Format(format!("dimension {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for z in t.data() {
        out.extend_from_slice(&(z.re as f32).to_le_bytes());
        out.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tsr3(bytes: &[u8]) -> Result<ComplexTensor3> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} bytes is shorter than the TSR3 header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != TSR3_MAGIC {
        return Err(Error::Format("bad magic, not a TSR3 file".into()));
    }
    if bytes[4] != TSR3_VERSION {
        return Err(Error::Format(format!("unsupported TSR3 version {}", bytes[4])));
    }
    if bytes[5] != 0 {
        return Err(Error::Format(format!("unsupported dtype {}", bytes[5])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let dims = [u32_at(8), u32_at(12), u32_at(16)];
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    let expected = count
        .checked_mul(8)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "dims {dims:?} need {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let f32_at = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as f64;
    let data = (0..count)
        .map(|n| {
            let o = HEADER_LEN + 8 * n;
            Complex64::new(f32_at(o), f32_at(o + 4))
        })
        .collect();
    ComplexTensor3::new(dims, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_tsr3(path: impl AsRef<Path>, t: &ComplexTensor3) -> Result<()> {
    fs::write(path, encode_tsr3(t)?)?;
    Ok(())
}

pub fn read_tsr3(path: impl AsRef<Path>) -> Result<ComplexTensor3> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_tsr3(&bytes)
}

/// Writes `x,y,z,amplitude,phase` rows.
pub fn write_cloud_csv(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "z", "amplitude", "phase"])?;
    for p in &cloud.points {
        w.write_record([p.x, p.y, p.z, p.amplitude, p.phase].map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud_csv(path: impl AsRef<Path>) -> Result<PointCloud> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != ["x", "y", "z", "amplitude", "phase"] {
        return Err(Error::Format(format!("unexpected point-cloud header {header:?}")));
    }
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let v: Vec<f64> = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number '{s}'")))
            })
            .collect::<Result<_>>()?;
        if v.len() != 5 {
            return Err(Error::Format(format!("expected 5 fields, got {}", v.len())));
        }
        points.push(ScatterPoint {
            x: v[0],
            y: v[1],
            z: v[2],
            amplitude: v[3],
            phase: v[4],
        });
    }
    Ok(PointCloud::new(points))
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ComplexTensor3 {
        ComplexTensor3::from_fn([2, 3, 4], |i, j, k| {
            Complex64::new(i as f64 + 0.5 * j as f64, -(k as f64) * 0.25)
        })
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let b = encode_tsr3(&sample()).unwrap();
        assert_eq!(&b[0..8], b"TSR3\x01\x00\x00\x00");
        assert_eq!(&b[8..20], &[2, 0, 0, 0, 3, 0, 0, 0, 4, 0, 0, 0]);
        assert_eq!(b.len(), 20 + 24 * 8);
        // element (0, 0, 1) = 0 - 0.25j
        assert_eq!(&b[28..32], &0.0f32.to_le_bytes());
        assert_eq!(&b[32..36], &(-0.25f32).to_le_bytes());
    }

    #[test]
    fn roundtrip_is_exact_for_f32_values() {
        let t = sample();
        let back = decode_tsr3(&encode_tsr3(&t).unwrap()).unwrap();
        assert_eq!(back, t);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsr3");
        write_tsr3(&path, &t).unwrap();
        assert_eq!(read_tsr3(&path).unwrap(), t);
    }

    #[test]
    fn rewrite_is_byte_identical() {
        let t = ComplexTensor3::from_fn([3, 1, 2], |i, j, k| {
            Complex64::new(0.1 * i as f64, 1.0 / (1.0 + (j + k) as f64))
        })
        .unwrap();
        let once = encode_tsr3(&t).unwrap();
        assert_eq!(encode_tsr3(&decode_tsr3(&once).unwrap()).unwrap(), once);
    }

    #[test]
    fn malformed_files_rejected() {
        let good = encode_tsr3(&sample()).unwrap();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_tsr3(&bad), Err(Error::Format(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_tsr3(&bad), Err(Error::Format(_))));
        assert!(matches!(decode_tsr3(&good[..good.len() - 1]), Err(Error::Format(_))));
        assert!(matches!(decode_tsr3(&good[..10]), Err(Error::Format(_))));
        let mut zero_dim = good.clone();
        zero_dim[8] = 0;
        assert!(decode_tsr3(&zero_dim).is_err());
    }

    #[test]
    fn cloud_csv_roundtrip() {
        let cloud = PointCloud::new(vec![
            ScatterPoint {
                x: 1.5,
                y: -2.0,
                z: 0.1,
                amplitude: 3.25,
                phase: -1.0,
            },
            ScatterPoint::at(0.0, 0.0, 7.0),
        ]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        write_cloud_csv(&path, &cloud).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,z,amplitude,phase\n"));
        assert_eq!(read_cloud_csv(&path).unwrap(), cloud);
    }
}
