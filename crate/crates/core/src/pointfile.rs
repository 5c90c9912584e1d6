//! Plain-text point cloud format: one `x,y,z,surface` header line, then
//! one comma-separated row per point. Surface ids are integers >= 1.
//! Floats are written with the shortest representation that parses back
//! to the same value, so a write/parse round trip is bit-exact.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::geometry::{GeometryError, LabeledPointSet, Point3, SurfacePair};

pub const POINTS_HEADER: &str = "x,y,z,surface";

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PointFileError {
    #[error("line 1: expected header '{POINTS_HEADER}'")]
    MissingHeader,
    #[error("line {line}: expected 4 comma-separated fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("line {line}: invalid coordinate '{field}'")]
    BadCoordinate { line: usize, field: String },
    #[error("line {line}: invalid surface id '{field}' (integer >= 1 required)")]
    BadSurfaceId { line: usize, field: String },
    #[error("no data rows after the header")]
    NoRows,
    #[error("pair file must contain exactly surfaces 1 and 2, found {found:?}")]
    NotAPair { found: Vec<u32> },
    #[error("scene file must contain at least 2 distinct surfaces, found {found}")]
    TooFewSurfaces { found: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Parse every data row as `(point, surface_id)`, in file order.
pub fn parse_points_csv(text: &str) -> Result<Vec<(Point3, u32)>, PointFileError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((i, l)) if !l.trim().is_empty() => break (i, l),
            Some(_) => continue,
            None => return Err(PointFileError::MissingHeader),
        }
    };
    if !header.1.trim().eq_ignore_ascii_case(POINTS_HEADER) {
        return Err(PointFileError::MissingHeader);
    }
    let mut rows = Vec::new();
    for (i, raw) in lines {
        let line = i + 1; // 1-based, header included
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(PointFileError::FieldCount {
                line,
                got: fields.len(),
            });
        }
        let mut coords = [0.0_f64; 3];
        for (k, f) in fields[..3].iter().enumerate() {
            coords[k] = f.parse::<f64>().map_err(|_| PointFileError::BadCoordinate {
                line,
                field: f.to_string(),
            })?;
            if !coords[k].is_finite() {
                return Err(PointFileError::BadCoordinate {
                    line,
                    field: f.to_string(),
                });
            }
        }
        let surface: u32 = fields[3].parse().map_err(|_| PointFileError::BadSurfaceId {
            line,
            field: fields[3].to_string(),
        })?;
        if surface == 0 {
            return Err(PointFileError::BadSurfaceId {
                line,
                field: fields[3].to_string(),
            });
        }
        rows.push((Point3::new(coords[0], coords[1], coords[2]), surface));
    }
    if rows.is_empty() {
        return Err(PointFileError::NoRows);
    }
    Ok(rows)
}

/// Group rows into one set per surface id, ids ascending, original point
/// order preserved within each surface.
pub fn group_by_surface(rows: Vec<(Point3, u32)>) -> Vec<LabeledPointSet> {
    let mut ids: Vec<u32> = rows.iter().map(|r| r.1).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|&id| {
            let pts: Vec<Point3> = rows
                .iter()
                .filter(|r| r.1 == id)
                .map(|r| r.0)
                .collect();
            LabeledPointSet::new(pts, id).expect("grouped rows are non-empty and validated")
        })
        .collect()
}

/// Parse a two-surface file into a pair; surface 1 becomes side a.
pub fn parse_pair_csv(text: &str) -> Result<SurfacePair, PointFileError> {
    let sets = group_by_surface(parse_points_csv(text)?);
    let found: Vec<u32> = sets.iter().map(|s| s.surface_id()).collect();
    if found != [1, 2] {
        return Err(PointFileError::NotAPair { found });
    }
    let mut it = sets.into_iter();
    let a = it.next().expect("two sets present");
    let b = it.next().expect("two sets present");
    Ok(SurfacePair::new(a, b)?)
}

/// Parse a multi-surface file (two or more distinct ids).
pub fn parse_scene_csv(text: &str) -> Result<Vec<LabeledPointSet>, PointFileError> {
    let sets = group_by_surface(parse_points_csv(text)?);
    if sets.len() < 2 {
        return Err(PointFileError::TooFewSurfaces { found: sets.len() });
    }
    Ok(sets)
}

/// Serialize sets in the given order.
pub fn points_csv(sets: &[&LabeledPointSet]) -> String {
    let mut out = String::from(POINTS_HEADER);
    out.push('\n');
    for set in sets {
        let id = set.surface_id();
        for p in set.points() {
            out.push_str(&format!("{},{},{},{}\n", p.x, p.y, p.z, id));
        }
    }
    out
}

/// Serialize a pair, side a first.
pub fn pair_csv(pair: &SurfacePair) -> String {
    points_csv(&[pair.a(), pair.b()])
}
