//! MatrixMarket files and factor checkpoints.
//!
//! Sampled matrices use the `coordinate real general` format with 1-based
//! indices; dense factors use `array real general` in column-major order.
//! Values are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{FactoredPoint, GeometryKind};
use crate::sparse::SampledMatrix;

const COORD_BANNER: &str = "%%MatrixMarket matrix coordinate real general";
const ARRAY_BANNER: &str = "%%MatrixMarket matrix array real general";

pub fn sampled_to_string(m: &SampledMatrix) -> String {
    let (d1, d2) = m.shape();
    let mut out = String::with_capacity(32 * (m.nnz() + 2));
    writeln!(out, "{COORD_BANNER}\n{d1} {d2} {}", m.nnz()).expect("string write");
    for (i, j, v) in m.iter() {
        writeln!(out, "{} {} {v:e}", i + 1, j + 1).expect("string write");
    }
    out
}

/// Non-comment lines with their 1-based line numbers, after checking the banner.
fn body<'a>(text: &'a str, banner: &str) -> Result<impl Iterator<Item = (usize, &'a str)>> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l.trim()));
    match lines.next() {
        Some((_, first)) if first.eq_ignore_ascii_case(banner) => {}
        Some((_, first)) => {
            return Err(Error::Parse { line: 1, msg: format!("expected `{banner}`, found `{first}`") });
        }
        None => return Err(Error::Parse { line: 1, msg: "empty file".into() }),
    }
    Ok(lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%')))
}

fn parse_fields<T: std::str::FromStr>(line: usize, s: &str, want: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let f: Vec<&str> = s.split_whitespace().collect();
    if f.len() != want {
        return Err(Error::Parse { line, msg: format!("expected {want} fields, got {}", f.len()) });
    }
    f.iter()
        .map(|x| x.parse::<T>().map_err(|e| Error::Parse { line, msg: format!("`{x}`: {e}") }))
        .collect()
}

pub fn sampled_from_str(text: &str) -> Result<SampledMatrix> {
    let mut lines = body(text, COORD_BANNER)?;
    let (ln, size) = lines.next().ok_or(Error::Parse { line: 2, msg: "missing size line".into() })?;
    let dims: Vec<usize> = parse_fields(ln, size, 3)?;
    let (d1, d2, nnz) = (dims[0], dims[1], dims[2]);
    let mut entries = Vec::with_capacity(nnz);
    for (ln, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::Parse { line: ln, msg: format!("expected 3 fields, got {}", f.len()) });
        }
        let idx = |s: &str| -> Result<usize> {
            let k: usize = s.parse().map_err(|e| Error::Parse { line: ln, msg: format!("`{s}`: {e}") })?;
            k.checked_sub(1).ok_or(Error::Parse { line: ln, msg: "indices are 1-based".into() })
        };
        let v: f64 = f[2].parse().map_err(|e| Error::Parse { line: ln, msg: format!("`{}`: {e}", f[2]) })?;
        entries.push((idx(f[0])?, idx(f[1])?, v));
    }
    if entries.len() != nnz {
        return Err(Error::Parse { line: 2, msg: format!("header promises {nnz} entries, found {}", entries.len()) });
    }
    SampledMatrix::from_triplets(d1, d2, entries)
}

pub fn write_sampled(path: &Path, m: &SampledMatrix) -> Result<()> {
    fs::write(path, sampled_to_string(m))?;
    Ok(())
}

pub fn read_sampled(path: &Path) -> Result<SampledMatrix> {
    sampled_from_str(&fs::read_to_string(path)?)
}

pub fn dense_to_string(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(24 * (m.len() + 2));
    writeln!(out, "{ARRAY_BANNER}\n{} {}", m.nrows(), m.ncols()).expect("string write");
    for v in m.iter() {
        writeln!(out, "{v:e}").expect("string write");
    }
    out
}

pub fn dense_from_str(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = body(text, ARRAY_BANNER)?;
    let (ln, size) = lines.next().ok_or(Error::Parse { line: 2, msg: "missing size line".into() })?;
    let dims: Vec<usize> = parse_fields(ln, size, 2)?;
    let mut vals = Vec::with_capacity(dims[0] * dims[1]);
    for (ln, l) in lines {
        vals.push(parse_fields::<f64>(ln, l, 1)?[0]);
    }
    if vals.len() != dims[0] * dims[1] {
        return Err(Error::Parse {
            line: 2,
            msg: format!("{}×{} array needs {} values, found {}", dims[0], dims[1], dims[0] * dims[1], vals.len()),
        });
    }
    Ok(DMatrix::from_vec(dims[0], dims[1], vals))
}

/// `manifest.json` of a checkpoint directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub geometry: GeometryKind,
    pub rank: usize,
    /// Factor file names, in [`GeometryKind::factor_names`] order.
    pub factors: Vec<String>,
}

/// Writes one array file per factor plus `manifest.json` into `dir`.
pub fn save_checkpoint(dir: &Path, kind: GeometryKind, x: &FactoredPoint) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (name, f) in kind.factor_names().iter().zip(x.factors()) {
        let file = format!("{name}.mtx");
        fs::write(dir.join(&file), dense_to_string(&f))?;
        files.push(file);
    }
    let manifest = CheckpointManifest { geometry: kind, rank: x.rank(), factors: files };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<(GeometryKind, FactoredPoint)> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let factors = manifest
        .factors
        .iter()
        .map(|f| dense_from_str(&fs::read_to_string(dir.join(f))?))
        .collect::<Result<Vec<_>>>()?;
    let x = FactoredPoint::from_factors(manifest.geometry, factors)?;
    if x.rank() != manifest.rank {
        return Err(Error::Shape(format!("manifest rank {} but factors have rank {}", manifest.rank, x.rank())));
    }
    Ok((manifest.geometry, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn coordinate_round_trip() {
        let m = SampledMatrix::from_triplets(3, 4, vec![(2, 3, -1.0 / 3.0), (0, 1, 1e-300), (1, 0, 7.5)]).unwrap();
        let text = sampled_to_string(&m);
        assert!(text.starts_with(COORD_BANNER));
        assert!(text.contains("\n3 4 3\n"));
        assert_eq!(sampled_from_str(&text).unwrap(), m);
    }

    #[test]
    fn comments_and_case_are_tolerated() {
        let text = "%%MatrixMarket matrix coordinate real general\n% a comment\n2 2 1\n\n2 1 4.0\n";
        let m = sampled_from_str(text).unwrap();
        assert_eq!(m.iter().collect::<Vec<_>>(), vec![(1, 0, 4.0)]);
    }

    #[test]
    fn malformed_coordinate_files_are_rejected() {
        let bad_banner = "%%MatrixMarket matrix array real general\n1 1\n0\n";
        assert!(sampled_from_str(bad_banner).is_err());
        let zero_index = format!("{COORD_BANNER}\n2 2 1\n0 1 1.0\n");
        assert!(matches!(sampled_from_str(&zero_index), Err(Error::Parse { line: 3, .. })));
        let short = format!("{COORD_BANNER}\n2 2 2\n1 1 1.0\n");
        assert!(sampled_from_str(&short).is_err());
        let out_of_range = format!("{COORD_BANNER}\n2 2 1\n3 1 1.0\n");
        assert!(sampled_from_str(&out_of_range).is_err());
    }

    #[test]
    fn dense_round_trip_is_bit_exact() {
        let mut g = rng::stream(1, 0);
        let m = rng::gaussian(&mut g, 5, 3);
        let back = dense_from_str(&dense_to_string(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn checkpoint_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = rng::stream(2, 0);
        let x = FactoredPoint::Ubv(
            crate::geometry::PointUbv::new(rng::orthonormal(&mut g, 6, 2), rng::spd(&mut g, 2, 1.0, 2.0), rng::orthonormal(&mut g, 5, 2))
                .unwrap(),
        );
        save_checkpoint(dir.path(), GeometryKind::Ubv, &x).unwrap();
        let (kind, y) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(kind, GeometryKind::Ubv);
        assert_eq!(y.to_dense(), x.to_dense());
    }
}
