//! Points, labeled point sets, surface pairs, triangle meshes and the
//! similarity transform (rotate, scale, translate) shared by the rest of
//! the crate.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Triangles whose area is at or below this are degenerate and are
/// dropped when meshes are loaded.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Relative margin added around a pair's bounding box before binning so
/// boundary points never sit exactly on a cell edge shared with the
/// outside. Applied as an absolute margin when the box has zero size.
pub const BOUNDS_MARGIN_REL: f64 = 1e-6;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("surface id must be >= 1, got {0}")]
    InvalidSurfaceId(u32),
    #[error("pair sides must have distinct surface ids, both are {0}")]
    DuplicateSurfaceId(u32),
    #[error("non-finite coordinate in point {index}")]
    NonFinitePoint { index: usize },
    #[error("scale must be positive and finite, got {0}")]
    InvalidScale(f64),
    #[error("rotation axis has zero length")]
    ZeroRotationAxis,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("triangle {triangle} references vertex {vertex}, mesh has {vertices} vertices")]
    VertexOutOfRange {
        triangle: usize,
        vertex: usize,
        vertices: usize,
    },
    #[error("triangle {0} is degenerate (area <= {DEGENERATE_AREA})")]
    DegenerateTriangle(usize),
}

/// A point or vector in 3-D. Field arithmetic only; all geometry in the
/// crate reduces to these operations so results are reproducible across
/// platforms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ZERO: Point3 = Point3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(&self, other: &Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: &Point3) -> Point3 {
        Point3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance_squared(&self, other: &Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near-)zero input.
    pub fn normalized(&self) -> Option<Point3> {
        let n = self.norm();
        if n <= 1e-300 {
            None
        } else {
            Some(*self * (1.0 / n))
        }
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, rhs: Point3) -> Point3 {
        Point3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, rhs: Point3) -> Point3 {
        Point3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Mean of a non-empty slice of points.
pub fn centroid(points: &[Point3]) -> Point3 {
    let mut sum = Point3::ZERO;
    for p in points {
        sum = sum + *p;
    }
    sum * (1.0 / points.len() as f64)
}

/// Axis-aligned bounding box, `min <= max` componentwise.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    pub fn from_points(points: &[Point3]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in &points[1..] {
            b.include(p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: &Point3) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.min.z = self.min.z.min(p.z);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
        self.max.z = self.max.z.max(p.z);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut b = *self;
        b.include(&other.min);
        b.include(&other.max);
        b
    }

    pub fn extents(&self) -> Point3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        (self.min + self.max) * 0.5
    }

    pub fn contains(&self, p: &Point3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    /// Main-diagonal length. The squared extents are sorted before the
    /// sum so the result is bit-identical under axis permutation.
    pub fn diagonal(&self) -> f64 {
        let e = self.extents();
        let mut sq = [e.x * e.x, e.y * e.y, e.z * e.z];
        sq.sort_by(|a, b| a.partial_cmp(b).expect("finite extents"));
        (sq[0] + sq[1] + sq[2]).sqrt()
    }

    /// Margin used before binning: relative to the diagonal, absolute
    /// for a degenerate (zero-size) box.
    pub fn standard_margin(&self) -> f64 {
        let d = self.diagonal();
        if d > 0.0 {
            BOUNDS_MARGIN_REL * d
        } else {
            BOUNDS_MARGIN_REL
        }
    }

    pub fn padded(&self, margin: f64) -> Aabb {
        let m = Point3::new(margin, margin, margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Point-to-box distance squared; zero for points inside.
    pub fn distance_squared(&self, p: &Point3) -> f64 {
        let dx = (self.min.x - p.x).max(0.0).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(0.0).max(p.y - self.max.y);
        let dz = (self.min.z - p.z).max(0.0).max(p.z - self.max.z);
        dx * dx + dy * dy + dz * dz
    }
}

/// Non-empty cloud of finite points tagged with a surface id (>= 1).
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPointSet {
    points: Vec<Point3>,
    surface_id: u32,
}

impl LabeledPointSet {
    pub fn new(points: Vec<Point3>, surface_id: u32) -> Result<Self, GeometryError> {
        if points.is_empty() {
            return Err(GeometryError::EmptyPointSet);
        }
        if surface_id == 0 {
            return Err(GeometryError::InvalidSurfaceId(surface_id));
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinitePoint { index });
        }
        Ok(LabeledPointSet { points, surface_id })
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn surface_id(&self) -> u32 {
        self.surface_id
    }

    pub fn centroid(&self) -> Point3 {
        centroid(&self.points)
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.points).expect("set is non-empty")
    }

    pub fn with_surface_id(&self, surface_id: u32) -> Result<Self, GeometryError> {
        if surface_id == 0 {
            return Err(GeometryError::InvalidSurfaceId(surface_id));
        }
        Ok(LabeledPointSet {
            points: self.points.clone(),
            surface_id,
        })
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }
}

/// Two point sets with distinct surface ids; side a is the reference
/// side for directed features.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePair {
    a: LabeledPointSet,
    b: LabeledPointSet,
}

impl SurfacePair {
    pub fn new(a: LabeledPointSet, b: LabeledPointSet) -> Result<Self, GeometryError> {
        if a.surface_id() == b.surface_id() {
            return Err(GeometryError::DuplicateSurfaceId(a.surface_id()));
        }
        Ok(SurfacePair { a, b })
    }

    pub fn a(&self) -> &LabeledPointSet {
        &self.a
    }

    pub fn b(&self) -> &LabeledPointSet {
        &self.b
    }

    /// Box around both sides.
    pub fn union_aabb(&self) -> Aabb {
        self.a.aabb().union(&self.b.aabb())
    }

    /// Union box expanded by the standard margin; every consumer that
    /// bins or normalizes by pair size uses these bounds.
    pub fn padded_bounds(&self) -> Aabb {
        let union = self.union_aabb();
        union.padded(union.standard_margin())
    }
}

/// Indexed triangle mesh. Constructors validate indices; triangles with
/// area <= [`DEGENERATE_AREA`] are rejected or dropped depending on the
/// constructor.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    triangles: Vec<[usize; 3]>,
}

fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    (*b - *a).cross(&(*c - *a)).norm() * 0.5
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, triangles: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        Self::validate_indices(&vertices, &triangles)?;
        for (i, t) in triangles.iter().enumerate() {
            let area = triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]);
            if area <= DEGENERATE_AREA {
                return Err(GeometryError::DegenerateTriangle(i));
            }
        }
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        Ok(TriangleMesh {
            vertices,
            triangles,
        })
    }

    /// Like [`TriangleMesh::new`] but silently drops degenerate
    /// triangles, returning how many were dropped. Used by loaders.
    pub fn new_dropping_degenerate(
        vertices: Vec<Point3>,
        triangles: Vec<[usize; 3]>,
    ) -> Result<(Self, usize), GeometryError> {
        Self::validate_indices(&vertices, &triangles)?;
        let before = triangles.len();
        let kept: Vec<[usize; 3]> = triangles
            .into_iter()
            .filter(|t| {
                triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]])
                    > DEGENERATE_AREA
            })
            .collect();
        let dropped = before - kept.len();
        if kept.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        Ok((
            TriangleMesh {
                vertices,
                triangles: kept,
            },
            dropped,
        ))
    }

    fn validate_indices(
        vertices: &[Point3],
        triangles: &[[usize; 3]],
    ) -> Result<(), GeometryError> {
        for (i, t) in triangles.iter().enumerate() {
            for &v in t {
                if v >= vertices.len() {
                    return Err(GeometryError::VertexOutOfRange {
                        triangle: i,
                        vertex: v,
                        vertices: vertices.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
}

/// Rotation described by an axis (any non-zero length) and an angle in
/// radians.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisAngle {
    pub axis: Point3,
    pub angle_rad: f64,
}

impl AxisAngle {
    pub fn new(axis: Point3, angle_rad: f64) -> Self {
        AxisAngle { axis, angle_rad }
    }

    pub const IDENTITY: AxisAngle = AxisAngle {
        axis: Point3 {
            x: 0.0,
            y: 0.0,
            z: 1.0,
        },
        angle_rad: 0.0,
    };

    /// Rodrigues rotation matrix (row-major).
    pub fn matrix(&self) -> Result<[[f64; 3]; 3], GeometryError> {
        let u = self
            .axis
            .normalized()
            .ok_or(GeometryError::ZeroRotationAxis)?;
        let (s, c) = self.angle_rad.sin_cos();
        let t = 1.0 - c;
        Ok([
            [
                c + u.x * u.x * t,
                u.x * u.y * t - u.z * s,
                u.x * u.z * t + u.y * s,
            ],
            [
                u.y * u.x * t + u.z * s,
                c + u.y * u.y * t,
                u.y * u.z * t - u.x * s,
            ],
            [
                u.z * u.x * t - u.y * s,
                u.z * u.y * t + u.x * s,
                c + u.z * u.z * t,
            ],
        ])
    }
}

fn apply_matrix(m: &[[f64; 3]; 3], p: &Point3) -> Point3 {
    Point3::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
    )
}

/// Rotate, scale and translate a point set about its centroid `c`:
/// every point maps to `translation + c + scale * R * (p - c)`, so the
/// shape rotates and scales in place and the centroid moves by
/// `translation`.
pub fn transform(
    set: &LabeledPointSet,
    rotation: &AxisAngle,
    translation: Point3,
    scale: f64,
) -> Result<LabeledPointSet, GeometryError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(GeometryError::InvalidScale(scale));
    }
    let m = rotation.matrix()?;
    let c = set.centroid();
    let points = set
        .points()
        .iter()
        .map(|p| translation + c + apply_matrix(&m, &(*p - c)) * scale)
        .collect();
    LabeledPointSet::new(points, set.surface_id())
}

/// Rotate a point set about an arbitrary pivot (no scale, no
/// translation). Used to rotate both sides of a pair jointly.
pub fn rotate_about(
    set: &LabeledPointSet,
    rotation: &AxisAngle,
    pivot: Point3,
) -> Result<LabeledPointSet, GeometryError> {
    let m = rotation.matrix()?;
    let points = set
        .points()
        .iter()
        .map(|p| pivot + apply_matrix(&m, &(*p - pivot)))
        .collect();
    LabeledPointSet::new(points, set.surface_id())
}

/// Sample a point cloud from a mesh: every vertex once (in order),
/// then `per_triangle` uniform interior samples per triangle (in
/// triangle order), so the output has `V + per_triangle * T` points.
/// Sampling uses the square-root trick for barycentric coordinates and
/// is fully determined by `seed`.
pub fn sample_mesh(
    mesh: &TriangleMesh,
    per_triangle: usize,
    surface_id: u32,
    seed: u64,
) -> Result<LabeledPointSet, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points =
        Vec::with_capacity(mesh.vertices().len() + per_triangle * mesh.triangles().len());
    points.extend_from_slice(mesh.vertices());
    for t in mesh.triangles() {
        let (a, b, c) = (
            mesh.vertices()[t[0]],
            mesh.vertices()[t[1]],
            mesh.vertices()[t[2]],
        );
        for _ in 0..per_triangle {
            let r1: f64 = rng.gen_range(0.0..1.0);
            let r2: f64 = rng.gen_range(0.0..1.0);
            let su = r1.sqrt();
            let p = a * (1.0 - su) + b * (su * (1.0 - r2)) + c * (su * r2);
            points.push(p);
        }
    }
    LabeledPointSet::new(points, surface_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_relative_eq;

    fn set(points: Vec<Point3>) -> LabeledPointSet {
        LabeledPointSet::new(points, 1).unwrap()
    }

    #[test]
    fn vector_algebra() {
        let a = Point3::new(1.0, 2.0, 3.0);
        let b = Point3::new(-2.0, 0.5, 4.0);
        assert_eq!(a + b, Point3::new(-1.0, 2.5, 7.0));
        assert_eq!(a - b, Point3::new(3.0, 1.5, -1.0));
        assert_eq!(a * 2.0, Point3::new(2.0, 4.0, 6.0));
        assert_relative_eq!(a.dot(&b), 11.0);
        let x = Point3::new(1.0, 0.0, 0.0);
        let y = Point3::new(0.0, 1.0, 0.0);
        assert_eq!(x.cross(&y), Point3::new(0.0, 0.0, 1.0));
        assert_relative_eq!(Point3::new(3.0, 4.0, 0.0).norm(), 5.0);
    }

    #[test]
    fn point_set_rejects_bad_input() {
        assert!(matches!(
            LabeledPointSet::new(vec![], 1),
            Err(GeometryError::EmptyPointSet)
        ));
        assert!(matches!(
            LabeledPointSet::new(vec![Point3::ZERO], 0),
            Err(GeometryError::InvalidSurfaceId(0))
        ));
        assert!(matches!(
            LabeledPointSet::new(vec![Point3::new(f64::NAN, 0.0, 0.0)], 1),
            Err(GeometryError::NonFinitePoint { index: 0 })
        ));
    }

    #[test]
    fn pair_requires_distinct_ids() {
        let a = set(vec![Point3::ZERO]);
        let b = set(vec![Point3::new(1.0, 0.0, 0.0)]);
        assert!(matches!(
            SurfacePair::new(a.clone(), b),
            Err(GeometryError::DuplicateSurfaceId(1))
        ));
        let b2 = LabeledPointSet::new(vec![Point3::new(1.0, 0.0, 0.0)], 2).unwrap();
        assert!(SurfacePair::new(a, b2).is_ok());
    }

    #[test]
    fn aabb_from_points_is_componentwise_min_max() {
        let pts = vec![
            Point3::new(1.0, -2.0, 0.5),
            Point3::new(-1.0, 3.0, 0.25),
            Point3::new(0.0, 0.0, 2.0),
        ];
        let b = Aabb::from_points(&pts).unwrap();
        assert_eq!(b.min, Point3::new(-1.0, -2.0, 0.25));
        assert_eq!(b.max, Point3::new(1.0, 3.0, 2.0));
    }

    #[test]
    fn union_aabb_covers_both_sides() {
        let a = set(vec![Point3::ZERO, Point3::new(1.0, 1.0, 1.0)]);
        let b = LabeledPointSet::new(vec![Point3::new(-1.0, 0.5, 2.0)], 2).unwrap();
        let pair = SurfacePair::new(a, b).unwrap();
        let u = pair.union_aabb();
        assert_eq!(u.min, Point3::new(-1.0, 0.0, 0.0));
        assert_eq!(u.max, Point3::new(1.0, 1.0, 2.0));
    }

    #[test]
    fn diagonal_is_permutation_stable() {
        let b1 = Aabb {
            min: Point3::ZERO,
            max: Point3::new(0.3, 0.7, 0.1),
        };
        let b2 = Aabb {
            min: Point3::ZERO,
            max: Point3::new(0.7, 0.1, 0.3),
        };
        // Bit-identical, not merely approximately equal.
        assert_eq!(b1.diagonal(), b2.diagonal());
    }

    #[test]
    fn degenerate_box_gets_absolute_margin() {
        let b = Aabb {
            min: Point3::new(2.0, 2.0, 2.0),
            max: Point3::new(2.0, 2.0, 2.0),
        };
        assert_eq!(b.standard_margin(), BOUNDS_MARGIN_REL);
        let p = b.padded(b.standard_margin());
        assert!(p.max.x > p.min.x);
    }

    #[test]
    fn scaling_about_centroid_expands_in_place() {
        let s = set(vec![
            Point3::new(0.5, 0.5, 0.5),
            Point3::new(1.5, 1.5, 1.5),
        ]);
        let out = transform(&s, &AxisAngle::IDENTITY, Point3::ZERO, 2.0).unwrap();
        assert_relative_eq!(out.points()[0].x, 0.0);
        assert_relative_eq!(out.points()[0].y, 0.0);
        assert_relative_eq!(out.points()[0].z, 0.0);
        assert_relative_eq!(out.points()[1].x, 2.0);
        assert_relative_eq!(out.points()[1].y, 2.0);
        assert_relative_eq!(out.points()[1].z, 2.0);
    }

    #[test]
    fn transform_moves_centroid_by_translation() {
        let s = set(vec![
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(0.9, -0.4, 0.5),
            Point3::new(-0.3, 0.8, -0.1),
        ]);
        let t = Point3::new(10.0, -3.0, 0.5);
        let rot = AxisAngle::new(Point3::new(1.0, 2.0, -0.5), 1.1);
        let out = transform(&s, &rot, t, 1.7).unwrap();
        let c0 = s.centroid();
        let c1 = out.centroid();
        assert_relative_eq!(c1.x, c0.x + t.x, epsilon = 1e-12);
        assert_relative_eq!(c1.y, c0.y + t.y, epsilon = 1e-12);
        assert_relative_eq!(c1.z, c0.z + t.z, epsilon = 1e-12);
    }

    #[test]
    fn transform_round_trips_through_inverse() {
        let s = set(vec![
            Point3::new(0.1, 0.2, 0.3),
            Point3::new(0.9, -0.4, 0.5),
            Point3::new(-0.3, 0.8, -0.1),
            Point3::new(0.4, 0.4, 0.9),
        ]);
        let axis = Point3::new(0.3, -1.0, 0.7);
        let angle = 0.9;
        let scale = 1.6;
        let t = Point3::new(0.25, -0.5, 1.0);
        let fwd = transform(&s, &AxisAngle::new(axis, angle), t, scale).unwrap();
        // Inverse of p' = t + c + sR(p - c) about the new centroid
        // c' = c + t is p = -t + c' + (1/s)R^T(p' - c').
        let back = transform(&fwd, &AxisAngle::new(axis, -angle), -t, 1.0 / scale).unwrap();
        for (p, q) in s.points().iter().zip(back.points()) {
            assert_relative_eq!(p.x, q.x, epsilon = 1e-9);
            assert_relative_eq!(p.y, q.y, epsilon = 1e-9);
            assert_relative_eq!(p.z, q.z, epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_rejects_zero_axis_and_scale_validates() {
        let s = set(vec![Point3::ZERO, Point3::new(1.0, 0.0, 0.0)]);
        let r = AxisAngle::new(Point3::ZERO, 0.5);
        assert!(matches!(
            transform(&s, &r, Point3::ZERO, 1.0),
            Err(GeometryError::ZeroRotationAxis)
        ));
        assert!(matches!(
            transform(&s, &AxisAngle::IDENTITY, Point3::ZERO, 0.0),
            Err(GeometryError::InvalidScale(_))
        ));
        assert!(matches!(
            transform(&s, &AxisAngle::IDENTITY, Point3::ZERO, -2.0),
            Err(GeometryError::InvalidScale(_))
        ));
    }

    #[test]
    fn quarter_turn_about_z_is_exact() {
        // Rotation happens about the centroid, so a symmetric two-point
        // set pins the centroid to the origin. cos(pi/2) is not exactly
        // zero in floats, hence the small epsilon.
        let s = set(vec![Point3::new(1.0, 0.0, 0.0), Point3::new(-1.0, 0.0, 0.0)]);
        let r = AxisAngle::new(Point3::new(0.0, 0.0, 1.0), core::f64::consts::FRAC_PI_2);
        let out = transform(&s, &r, Point3::ZERO, 1.0).unwrap();
        assert_relative_eq!(out.points()[0].x, 0.0, epsilon = 1e-12);
        assert_relative_eq!(out.points()[0].y, 1.0, epsilon = 1e-12);
        assert_relative_eq!(out.points()[1].y, -1.0, epsilon = 1e-12);
    }

    #[test]
    fn mesh_validates_indices_and_degenerates() {
        let verts = vec![
            Point3::ZERO,
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        assert!(matches!(
            TriangleMesh::new(verts.clone(), vec![[0, 1, 5]]),
            Err(GeometryError::VertexOutOfRange { vertex: 5, .. })
        ));
        assert!(matches!(
            TriangleMesh::new(verts.clone(), vec![[0, 1, 1]]),
            Err(GeometryError::DegenerateTriangle(0))
        ));
        let (mesh, dropped) =
            TriangleMesh::new_dropping_degenerate(verts, vec![[0, 1, 2], [1, 1, 2]]).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(mesh.triangles().len(), 1);
    }

    #[test]
    fn sampled_cloud_has_vertices_plus_per_triangle_points() {
        let verts = vec![
            Point3::ZERO,
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2], [1, 3, 2]]).unwrap();
        let cloud = sample_mesh(&mesh, 10, 1, 7).unwrap();
        assert_eq!(cloud.len(), 4 + 10 * 2);
        // First points are the vertices, in order.
        assert_eq!(cloud.points()[0], Point3::ZERO);
        assert_eq!(cloud.points()[3], Point3::new(1.0, 1.0, 0.0));
    }

    #[test]
    fn mesh_samples_stay_inside_their_triangles() {
        let verts = vec![
            Point3::new(0.0, 0.0, 1.0),
            Point3::new(2.0, 0.0, 1.0),
            Point3::new(0.0, 2.0, 1.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2]]).unwrap();
        let cloud = sample_mesh(&mesh, 500, 1, 99).unwrap();
        for p in &cloud.points()[3..] {
            // Barycentric containment for this right triangle in z=1.
            assert!(p.x >= -1e-12 && p.y >= -1e-12);
            assert!(p.x + p.y <= 2.0 + 1e-12);
            assert_relative_eq!(p.z, 1.0);
        }
    }

    #[test]
    fn mesh_sampling_is_deterministic() {
        let verts = vec![
            Point3::ZERO,
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        ];
        let mesh = TriangleMesh::new(verts, vec![[0, 1, 2]]).unwrap();
        let c1 = sample_mesh(&mesh, 50, 1, 1234).unwrap();
        let c2 = sample_mesh(&mesh, 50, 1, 1234).unwrap();
        assert_eq!(c1, c2);
        let c3 = sample_mesh(&mesh, 50, 1, 1235).unwrap();
        assert_ne!(c1, c3);
    }

    #[test]
    fn rotate_about_pivot_keeps_pivot_fixed() {
        let s = set(vec![Point3::new(2.0, 0.0, 0.0), Point3::new(3.0, 1.0, 0.0)]);
        let pivot = Point3::new(2.0, 0.0, 0.0);
        let r = AxisAngle::new(Point3::new(0.0, 0.0, 1.0), 1.234);
        let out = rotate_about(&s, &r, pivot).unwrap();
        assert_relative_eq!(out.points()[0].x, 2.0, epsilon = 1e-12);
        assert_relative_eq!(out.points()[0].y, 0.0, epsilon = 1e-12);
        // Distances to the pivot are preserved.
        assert_relative_eq!(
            out.points()[1].distance(&pivot),
            s.points()[1].distance(&pivot),
            epsilon = 1e-12
        );
    }
}
