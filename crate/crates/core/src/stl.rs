//! ASCII STL reader. Binary STL is detected and rejected with a clear
//! error instead of being misparsed. Facet normals in the file are
//! ignored (they are frequently wrong in the wild); exact duplicate
//! vertices are merged and degenerate facets are dropped with a count
//! the caller can surface as a warning.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::geometry::{GeometryError, Point3, TriangleMesh};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum StlError {
    #[error("binary STL detected; only ASCII STL is supported")]
    BinaryStl,
    #[error("not an STL file: expected 'solid' at the start")]
    MissingSolid,
    #[error("line {line}: expected '{expected}', got '{got}'")]
    UnexpectedToken {
        line: usize,
        expected: &'static str,
        got: String,
    },
    #[error("line {line}: invalid number '{field}'")]
    BadNumber { line: usize, field: String },
    #[error("truncated facet at end of file (line {line})")]
    TruncatedFacet { line: usize },
    #[error("no facets in solid")]
    NoFacets,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Outcome of a successful parse: the mesh plus how many degenerate
/// facets were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct StlMesh {
    pub mesh: TriangleMesh,
    pub dropped_degenerate: usize,
}

fn looks_binary(bytes: &[u8]) -> bool {
    // The binary layout is an 80-byte header plus a u32 facet count plus
    // 50 bytes per facet; a matching length is decisive. NUL bytes never
    // occur in valid ASCII STL.
    if bytes.len() >= 84 {
        let n = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + n * 50 && !bytes.starts_with(b"solid") {
            return true;
        }
    }
    bytes.contains(&0)
}

struct Lines<'a> {
    inner: core::str::Lines<'a>,
    line: usize,
}

impl<'a> Lines<'a> {
    /// Next non-empty line as whitespace-separated tokens.
    fn next_tokens(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for l in self.inner.by_ref() {
            self.line += 1;
            let tokens: Vec<&str> = l.split_whitespace().collect();
            if !tokens.is_empty() {
                return Some((self.line, tokens));
            }
        }
        None
    }
}

fn parse_f64(line: usize, field: &str) -> Result<f64, StlError> {
    let v: f64 = field.parse().map_err(|_| StlError::BadNumber {
        line,
        field: field.to_string(),
    })?;
    if !v.is_finite() {
        return Err(StlError::BadNumber {
            line,
            field: field.to_string(),
        });
    }
    Ok(v)
}

/// Parse ASCII STL bytes into a mesh with deduplicated vertices.
pub fn parse_stl_ascii(bytes: &[u8]) -> Result<StlMesh, StlError> {
    if looks_binary(bytes) {
        return Err(StlError::BinaryStl);
    }
    let text = core::str::from_utf8(bytes).map_err(|_| StlError::BinaryStl)?;
    let mut lines = Lines {
        inner: text.lines(),
        line: 0,
    };

    let (line, first) = lines.next_tokens().ok_or(StlError::MissingSolid)?;
    if !first[0].eq_ignore_ascii_case("solid") {
        let _ = line;
        return Err(StlError::MissingSolid);
    }

    // Vertices are merged on exact bit equality; the key is the bit
    // pattern so -0.0 and 0.0 stay distinct rather than colliding in a
    // float comparison.
    let mut vertex_ids: BTreeMap<(u64, u64, u64), usize> = BTreeMap::new();
    let mut vertices: Vec<Point3> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    loop {
        let (line, tokens) = lines
            .next_tokens()
            .ok_or(StlError::TruncatedFacet { line: lines.line })?;
        if tokens[0].eq_ignore_ascii_case("endsolid") {
            break;
        }
        // facet normal nx ny nz
        if !tokens[0].eq_ignore_ascii_case("facet") {
            return Err(StlError::UnexpectedToken {
                line,
                expected: "facet or endsolid",
                got: tokens[0].to_string(),
            });
        }
        if tokens.len() != 5 || !tokens[1].eq_ignore_ascii_case("normal") {
            return Err(StlError::UnexpectedToken {
                line,
                expected: "facet normal nx ny nz",
                got: tokens.join(" "),
            });
        }
        for t in &tokens[2..5] {
            parse_f64(line, t)?; // validated, then ignored
        }

        // outer loop
        let (line, tokens) = lines
            .next_tokens()
            .ok_or(StlError::TruncatedFacet { line: lines.line })?;
        if tokens.len() != 2
            || !tokens[0].eq_ignore_ascii_case("outer")
            || !tokens[1].eq_ignore_ascii_case("loop")
        {
            return Err(StlError::UnexpectedToken {
                line,
                expected: "outer loop",
                got: tokens.join(" "),
            });
        }

        // vertex x y z, three times
        let mut tri = [0usize; 3];
        for slot in &mut tri {
            let (line, tokens) = lines
                .next_tokens()
                .ok_or(StlError::TruncatedFacet { line: lines.line })?;
            if tokens.len() != 4 || !tokens[0].eq_ignore_ascii_case("vertex") {
                return Err(StlError::UnexpectedToken {
                    line,
                    expected: "vertex x y z",
                    got: tokens.join(" "),
                });
            }
            let x = parse_f64(line, tokens[1])?;
            let y = parse_f64(line, tokens[2])?;
            let z = parse_f64(line, tokens[3])?;
            let key = (x.to_bits(), y.to_bits(), z.to_bits());
            let next_id = vertices.len();
            let id = *vertex_ids.entry(key).or_insert(next_id);
            if id == next_id {
                vertices.push(Point3::new(x, y, z));
            }
            *slot = id;
        }

        // endloop, endfacet
        for expected in ["endloop", "endfacet"] {
            let (line, tokens) = lines
                .next_tokens()
                .ok_or(StlError::TruncatedFacet { line: lines.line })?;
            if !tokens[0].eq_ignore_ascii_case(expected) {
                return Err(StlError::UnexpectedToken {
                    line,
                    expected: if expected == "endloop" {
                        "endloop"
                    } else {
                        "endfacet"
                    },
                    got: tokens[0].to_string(),
                });
            }
        }

        triangles.push(tri);
    }

    if triangles.is_empty() {
        return Err(StlError::NoFacets);
    }
    let (mesh, dropped_degenerate) = TriangleMesh::new_dropping_degenerate(vertices, triangles)?;
    Ok(StlMesh {
        mesh,
        dropped_degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    const QUAD: &str = "solid quad\n\
        facet normal 0 0 1\n outer loop\n\
        vertex 0 0 0\n vertex 1 0 0\n vertex 0 1 0\n\
        endloop\n endfacet\n\
        facet normal 0 0 1\n outer loop\n\
        vertex 1 0 0\n vertex 1 1 0\n vertex 0 1 0\n\
        endloop\n endfacet\n\
        endsolid quad\n";

    #[test]
    fn parses_and_deduplicates_vertices() {
        let out = parse_stl_ascii(QUAD.as_bytes()).unwrap();
        assert_eq!(out.mesh.vertices().len(), 4);
        assert_eq!(out.mesh.triangles().len(), 2);
        assert_eq!(out.dropped_degenerate, 0);
    }

    #[test]
    fn drops_degenerate_facets_with_count() {
        let text = "solid s\n\
            facet normal 0 0 1\n outer loop\n\
            vertex 0 0 0\n vertex 1 0 0\n vertex 0 1 0\n\
            endloop\n endfacet\n\
            facet normal 0 0 1\n outer loop\n\
            vertex 0 0 0\n vertex 1 0 0\n vertex 1 0 0\n\
            endloop\n endfacet\n\
            endsolid s\n";
        let out = parse_stl_ascii(text.as_bytes()).unwrap();
        assert_eq!(out.mesh.triangles().len(), 1);
        assert_eq!(out.dropped_degenerate, 1);
    }

    #[test]
    fn rejects_binary_stl() {
        // Exact binary layout: 80-byte header, facet count 1, 50 bytes.
        let mut bytes = vec![0u8; 84 + 50];
        bytes[80..84].copy_from_slice(&1u32.to_le_bytes());
        assert_eq!(parse_stl_ascii(&bytes), Err(StlError::BinaryStl));
        // NUL bytes anywhere also mean binary.
        let mut sneaky = QUAD.as_bytes().to_vec();
        sneaky.push(0);
        assert_eq!(parse_stl_ascii(&sneaky), Err(StlError::BinaryStl));
    }

    #[test]
    fn reports_truncation_and_token_errors_with_lines() {
        let text = "solid s\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\n";
        assert!(matches!(
            parse_stl_ascii(text.as_bytes()),
            Err(StlError::TruncatedFacet { .. })
        ));
        let text = "solid s\nfacet normal 0 0 1\nouter loop\nvertex 0 zero 0\n";
        assert_eq!(
            parse_stl_ascii(text.as_bytes()),
            Err(StlError::BadNumber {
                line: 4,
                field: "zero".to_string()
            })
        );
        let text = "solid s\nfct normal 0 0 1\n";
        assert!(matches!(
            parse_stl_ascii(text.as_bytes()),
            Err(StlError::UnexpectedToken { line: 2, .. })
        ));
        assert_eq!(
            parse_stl_ascii(b"not an stl"),
            Err(StlError::MissingSolid)
        );
        assert_eq!(
            parse_stl_ascii(b"solid empty\nendsolid empty\n"),
            Err(StlError::NoFacets)
        );
    }

    #[test]
    fn sampling_a_parsed_mesh_works_end_to_end() {
        let out = parse_stl_ascii(QUAD.as_bytes()).unwrap();
        let cloud = crate::geometry::sample_mesh(&out.mesh, 25, 1, 3).unwrap();
        assert_eq!(cloud.len(), 4 + 25 * 2);
        let not_a_number = format!("{}", f64::NAN);
        let text = format!(
            "solid s\nfacet normal 0 0 {not_a_number}\nouter loop\n\
             vertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid s\n"
        );
        assert!(matches!(
            parse_stl_ascii(text.as_bytes()),
            Err(StlError::BadNumber { line: 2, .. })
        ));
    }
}
