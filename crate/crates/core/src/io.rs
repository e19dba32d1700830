//! Voxel file formats.
//!
//! Mask files (`CHVX1`): the magic line `CHVX1\n`, then three ASCII integers
//! `N N N` and a newline, then `N^3` occupancy bytes (0/1) in x-fastest
//! order.
//!
//! Field snapshots (`CHVF1`): the magic line `CHVF1\n`, then `N N N C` and a
//! newline (`C` = number of scalar planes), then `C * N^3` little-endian f64
//! values in x-fastest order. Complex vector fields are written as six
//! planes (re/im per component, component-major).

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{EdgeField, FaceField, FieldScalar};
use crate::mask::CellMask;

const MASK_MAGIC: &[u8] = b"CHVX1\n";
const FIELD_MAGIC: &[u8] = b"CHVF1\n";

pub fn write_mask(path: &Path, mask: &CellMask) -> Result<()> {
    let n = mask.grid().n();
    let mut buf = Vec::with_capacity(MASK_MAGIC.len() + 16 + mask.occupied().len());
    buf.extend_from_slice(MASK_MAGIC);
    buf.extend_from_slice(format!("{n} {n} {n}\n").as_bytes());
    buf.extend(mask.occupied().iter().map(|b| *b as u8));
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Read a mask file; returns the resolution and the raw occupancy (x-fastest).
pub fn read_mask(path: &Path) -> Result<(usize, Vec<bool>)> {
    let bytes = fs::read(path)?;
    let bad = |reason: &str| Error::VoxelFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < MASK_MAGIC.len() || &bytes[..MASK_MAGIC.len()] != MASK_MAGIC {
        return Err(bad("missing CHVX1 magic"));
    }
    let rest = &bytes[MASK_MAGIC.len()..];
    let nl = rest
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| bad("missing dimension line"))?;
    let dims: Vec<usize> = std::str::from_utf8(&rest[..nl])
        .map_err(|_| bad("dimension line is not ASCII"))?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("dimension line is not three integers"))?;
    if dims.len() != 3 || dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(bad("expected three equal dimensions"));
    }
    let n = dims[0];
    let data = &rest[nl + 1..];
    if data.len() != n * n * n {
        return Err(bad("payload length does not match N^3"));
    }
    Ok((n, data.iter().map(|b| *b != 0).collect()))
}

fn write_field_planes(path: &Path, n: usize, planes: &[&[f64]]) -> Result<()> {
    let mut buf = Vec::with_capacity(FIELD_MAGIC.len() + 24 + planes.len() * n * n * n * 8);
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(format!("{n} {n} {n} {}\n", planes.len()).as_bytes());
    for plane in planes {
        assert_eq!(plane.len(), n * n * n);
        for v in *plane {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn write_face_field(path: &Path, f: &FaceField<f64>) -> Result<()> {
    write_field_planes(path, f.n(), &[&f.comp[0], &f.comp[1], &f.comp[2]])
}

pub fn write_edge_field(path: &Path, f: &EdgeField<f64>) -> Result<()> {
    write_field_planes(path, f.n(), &[&f.comp[0], &f.comp[1], &f.comp[2]])
}

fn split_complex(data: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
    (
        data.iter().map(|z| z.re).collect(),
        data.iter().map(|z| z.im).collect(),
    )
}

pub fn write_face_field_complex(path: &Path, f: &FaceField<Complex64>) -> Result<()> {
    let parts: Vec<(Vec<f64>, Vec<f64>)> = f.comp.iter().map(|c| split_complex(c)).collect();
    let planes: Vec<&[f64]> = parts
        .iter()
        .flat_map(|(re, im)| [re.as_slice(), im.as_slice()])
        .collect();
    write_field_planes(path, f.n(), &planes)
}

pub fn write_edge_field_complex(path: &Path, f: &EdgeField<Complex64>) -> Result<()> {
    let parts: Vec<(Vec<f64>, Vec<f64>)> = f.comp.iter().map(|c| split_complex(c)).collect();
    let planes: Vec<&[f64]> = parts
        .iter()
        .flat_map(|(re, im)| [re.as_slice(), im.as_slice()])
        .collect();
    write_field_planes(path, f.n(), &planes)
}

/// Read back a field snapshot; returns `(n, planes)`.
pub fn read_field(path: &Path) -> Result<(usize, Vec<Vec<f64>>)> {
    let bytes = fs::read(path)?;
    let bad = |reason: &str| Error::VoxelFile {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if bytes.len() < FIELD_MAGIC.len() || &bytes[..FIELD_MAGIC.len()] != FIELD_MAGIC {
        return Err(bad("missing CHVF1 magic"));
    }
    let rest = &bytes[FIELD_MAGIC.len()..];
    let nl = rest
        .iter()
        .position(|b| *b == b'\n')
        .ok_or_else(|| bad("missing dimension line"))?;
    let dims: Vec<usize> = std::str::from_utf8(&rest[..nl])
        .map_err(|_| bad("dimension line is not ASCII"))?
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad("dimension line is not integers"))?;
    if dims.len() != 4 || dims[0] != dims[1] || dims[1] != dims[2] {
        return Err(bad("expected N N N C"));
    }
    let (n, c) = (dims[0], dims[3]);
    let data = &rest[nl + 1..];
    if data.len() != c * n * n * n * 8 {
        return Err(bad("payload length does not match C*N^3 f64 values"));
    }
    let mut planes = Vec::with_capacity(c);
    for p in 0..c {
        let start = p * n * n * n * 8;
        let plane: Vec<f64> = data[start..start + n * n * n * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        planes.push(plane);
    }
    Ok((n, planes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::mask::{voxelize, InclusionShape};

    #[test]
    fn mask_round_trip() {
        let grid = GridSpec::new(10).unwrap();
        let mask = voxelize(&InclusionShape::Cube { half_side: 0.3 }, grid).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mask.chvx");
        write_mask(&path, &mask).unwrap();
        let (n, occ) = read_mask(&path).unwrap();
        assert_eq!(n, 10);
        assert_eq!(&occ, mask.occupied());
    }

    #[test]
    fn field_round_trip() {
        let grid = GridSpec::new(5).unwrap();
        let mut f = FaceField::<f64>::zeros(grid);
        for a in 0..3 {
            for (i, v) in f.comp[a].iter_mut().enumerate() {
                *v = (a * 1000 + i) as f64 * 0.125 - 3.0;
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.chvf");
        write_face_field(&path, &f).unwrap();
        let (n, planes) = read_field(&path).unwrap();
        assert_eq!(n, 5);
        assert_eq!(planes.len(), 3);
        for a in 0..3 {
            assert_eq!(planes[a], f.comp[a]);
        }
    }

    #[test]
    fn rejects_corrupt_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.chvx");
        std::fs::write(&path, b"NOPE!\n2 2 2\n").unwrap();
        assert!(read_mask(&path).is_err());
    }
}
