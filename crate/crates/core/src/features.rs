//! Deterministic geometric features of a surface pair and the rule that
//! turns them into a class label with a target score band. These
//! features are the ground truth that the learned classifier is trained
//! to reproduce.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{Aabb, LabeledPointSet, Point3, SurfacePair};

/// Side length of the occupancy raster used for projected overlap.
pub const OVERLAP_RASTER: usize = 32;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("plane fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("plane fit is degenerate: points are coincident or collinear")]
    DegenerateFit,
}

/// Contact classes. The discriminants are the conventional label
/// numbers; `index()` gives the zero-based network class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ContactClass {
    Good = 1,
    Bad = 2,
    Neutral = 3,
}

impl ContactClass {
    pub const ALL: [ContactClass; 3] = [ContactClass::Good, ContactClass::Bad, ContactClass::Neutral];

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_index(i: usize) -> Option<ContactClass> {
        match i {
            0 => Some(ContactClass::Good),
            1 => Some(ContactClass::Bad),
            2 => Some(ContactClass::Neutral),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        self as u8
    }

    pub fn from_label(v: u8) -> Option<ContactClass> {
        match v {
            1 => Some(ContactClass::Good),
            2 => Some(ContactClass::Bad),
            3 => Some(ContactClass::Neutral),
            _ => None,
        }
    }
}

/// A class plus the score interval a correct prediction should land in.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabelBand {
    pub class: ContactClass,
    pub lo: f64,
    pub hi: f64,
}

impl LabelBand {
    pub fn for_class(class: ContactClass) -> LabelBand {
        let (lo, hi) = match class {
            ContactClass::Good => (90.0, 100.0),
            ContactClass::Bad => (0.0, 10.0),
            ContactClass::Neutral => (40.0, 60.0),
        };
        LabelBand { class, lo, hi }
    }

    pub fn contains(&self, score: f64) -> bool {
        score >= self.lo && score <= self.hi
    }
}

/// Feature thresholds of the labeling rule; all overridable.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OracleThresholds {
    /// Good contact: relative gap at or below this ...
    pub good_max_rel_gap: f64,
    /// ... and inter-surface angle (degrees) at or below this ...
    pub good_max_angle_deg: f64,
    /// ... and projected overlap at or above this.
    pub good_min_overlap: f64,
    /// Bad contact: relative gap at or above this ...
    pub bad_min_rel_gap: f64,
    /// ... or projected overlap at or below this.
    pub bad_max_overlap: f64,
}

impl Default for OracleThresholds {
    fn default() -> Self {
        OracleThresholds {
            good_max_rel_gap: 0.02,
            good_max_angle_deg: 10.0,
            good_min_overlap: 0.7,
            bad_min_rel_gap: 0.15,
            bad_max_overlap: 0.05,
        }
    }
}

/// The full feature vector of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ContactFeatures {
    /// Smallest point-to-point distance between the sides.
    pub min_gap: f64,
    /// `min_gap` normalized by the padded-bounds diagonal.
    pub rel_gap: f64,
    /// Angle between fitted plane normals, folded into [0, 90] degrees.
    pub angle_deg: f64,
    /// Fraction of side a's occupied footprint cells also hit by b.
    pub overlap_ab: f64,
    /// Same with the roles swapped.
    pub overlap_ba: f64,
}

/// Classify features: separation first (large relative gap or barely
/// any footprint overlap), then the strict good-contact test, neutral
/// otherwise.
pub fn oracle_label(f: &ContactFeatures, t: &OracleThresholds) -> LabelBand {
    if f.rel_gap >= t.bad_min_rel_gap || f.overlap_ab <= t.bad_max_overlap {
        LabelBand::for_class(ContactClass::Bad)
    } else if f.rel_gap <= t.good_max_rel_gap
        && f.angle_deg <= t.good_max_angle_deg
        && f.overlap_ab >= t.good_min_overlap
    {
        LabelBand::for_class(ContactClass::Good)
    } else {
        LabelBand::for_class(ContactClass::Neutral)
    }
}

// ---------------------------------------------------------------------
// Plane fitting
// ---------------------------------------------------------------------

/// Eigen-decomposition of a symmetric 3x3 matrix by cyclic Jacobi
/// rotations: returns (eigenvalues, eigenvector columns), unsorted.
fn jacobi_eigen_sym3(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let norm = {
        let mut s = 0.0;
        for row in &a {
            for x in row {
                s += x * x;
            }
        }
        s.sqrt().max(1e-300)
    };
    for _ in 0..64 {
        let off = (a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2]).sqrt();
        if off <= 1e-15 * norm {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let r = 3 - p - q; // the remaining index
            let (app, aqq) = (a[p][p], a[q][q]);
            a[p][p] = app - t * apq;
            a[q][q] = aqq + t * apq;
            a[p][q] = 0.0;
            a[q][p] = 0.0;
            let (arp, arq) = (a[r][p], a[r][q]);
            a[r][p] = c * arp - s * arq;
            a[p][r] = a[r][p];
            a[r][q] = s * arp + c * arq;
            a[q][r] = a[r][q];
            for row in &mut v {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Unit normal of the least-squares plane through a point set: the
/// eigenvector of the smallest covariance eigenvalue. The sign is
/// canonical: the first component larger than 1e-12 in magnitude is
/// made positive. Errors when fewer than 3 points are given or the
/// points are coincident/collinear.
pub fn fitted_plane_normal(set: &LabeledPointSet) -> Result<Point3, FeatureError> {
    let pts = set.points();
    if pts.len() < 3 {
        return Err(FeatureError::TooFewPoints(pts.len()));
    }
    let c = set.centroid();
    let mut cov = [[0.0f64; 3]; 3];
    for p in pts {
        let d = *p - c;
        let v = [d.x, d.y, d.z];
        for i in 0..3 {
            for j in i..3 {
                cov[i][j] += v[i] * v[j];
            }
        }
    }
    let inv_n = 1.0 / pts.len() as f64;
    for i in 0..3 {
        for j in i..3 {
            cov[i][j] *= inv_n;
            cov[j][i] = cov[i][j];
        }
    }
    let (vals, vecs) = jacobi_eigen_sym3(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).expect("finite eigenvalues"));
    let (l_min, l_mid, l_max) = (vals[order[0]], vals[order[1]], vals[order[2]]);
    let _ = l_min;
    if l_max <= 1e-24 || l_mid <= 1e-12 * l_max {
        return Err(FeatureError::DegenerateFit);
    }
    let k = order[0];
    let n = Point3::new(vecs[0][k], vecs[1][k], vecs[2][k]);
    let n = n.normalized().ok_or(FeatureError::DegenerateFit)?;
    let comps = [n.x, n.y, n.z];
    for c in comps {
        if c.abs() > 1e-12 {
            return Ok(if c < 0.0 { -n } else { n });
        }
    }
    Ok(n)
}

/// Angle between the two fitted normals, folded into [0, 90] degrees
/// (surface orientation has no sign).
pub fn inter_surface_angle(pair: &SurfacePair) -> Result<f64, FeatureError> {
    let na = fitted_plane_normal(pair.a())?;
    let nb = fitted_plane_normal(pair.b())?;
    let d = na.dot(&nb).abs().min(1.0);
    Ok(d.acos().to_degrees())
}

// ---------------------------------------------------------------------
// Minimum gap
// ---------------------------------------------------------------------

fn min_gap_brute(a: &[Point3], b: &[Point3]) -> f64 {
    let mut best = f64::INFINITY;
    for p in a {
        for q in b {
            let d = p.distance_squared(q);
            if d < best {
                best = d;
            }
        }
    }
    best.sqrt()
}

/// Smallest distance between any point of `a` and any point of `b`.
/// Exact: a uniform spatial hash over `b` only prunes cells that
/// provably cannot contain the nearest point, so the result equals the
/// brute-force scan bit for bit.
pub fn min_gap_points(a: &[Point3], b: &[Point3]) -> f64 {
    if a.len() * b.len() <= 4096 {
        return min_gap_brute(a, b);
    }
    let bb = Aabb::from_points(b).expect("b is non-empty");
    let diag = bb.diagonal();
    if diag <= 0.0 {
        // all of b coincident
        return min_gap_brute(a, &b[..1]);
    }
    let h = diag / (b.len() as f64).cbrt();
    let cell_of = |p: &Point3| -> (i64, i64, i64) {
        (
            ((p.x - bb.min.x) / h).floor() as i64,
            ((p.y - bb.min.y) / h).floor() as i64,
            ((p.z - bb.min.z) / h).floor() as i64,
        )
    };
    let mut cells: BTreeMap<(i64, i64, i64), Vec<usize>> = BTreeMap::new();
    let mut hi = (0i64, 0i64, 0i64);
    for (i, q) in b.iter().enumerate() {
        let key = cell_of(q);
        hi = (hi.0.max(key.0), hi.1.max(key.1), hi.2.max(key.2));
        cells.entry(key).or_default().push(i);
    }

    let mut best_sq = f64::INFINITY;
    for p in a {
        if bb.distance_squared(p) >= best_sq {
            continue; // cannot beat the best found so far
        }
        let (cx, cy, cz) = cell_of(p);
        // Chebyshev distance from p to the occupied index box, used to
        // skip rings that cannot intersect it.
        let axis_gap = |c: i64, hi: i64| -> i64 {
            if c < 0 {
                -c
            } else if c > hi {
                c - hi
            } else {
                0
            }
        };
        let cheb_rings = axis_gap(cx, hi.0).max(axis_gap(cy, hi.1)).max(axis_gap(cz, hi.2));
        let mut k = (cheb_rings - 1).max(0);
        loop {
            if k > 0 {
                let lower = (k - 1) as f64 * h;
                if lower * lower >= best_sq {
                    break;
                }
            }
            // Visit cells on the Chebyshev ring of radius k, clamped to
            // the occupied index range.
            let mut visit = |key: (i64, i64, i64)| {
                if let Some(ids) = cells.get(&key) {
                    for &i in ids {
                        let d = p.distance_squared(&b[i]);
                        if d < best_sq {
                            best_sq = d;
                        }
                    }
                }
            };
            if k == 0 {
                visit((cx, cy, cz));
            } else {
                let in_x = |x: i64| x >= 0 && x <= hi.0;
                let in_y = |y: i64| y >= 0 && y <= hi.1;
                let in_z = |z: i64| z >= 0 && z <= hi.2;
                for &dx in &[-k, k] {
                    let x = cx + dx;
                    if !in_x(x) {
                        continue;
                    }
                    for y in cy - k..=cy + k {
                        if !in_y(y) {
                            continue;
                        }
                        for z in cz - k..=cz + k {
                            if in_z(z) {
                                visit((x, y, z));
                            }
                        }
                    }
                }
                for &dy in &[-k, k] {
                    let y = cy + dy;
                    if !in_y(y) {
                        continue;
                    }
                    for x in cx - k + 1..=cx + k - 1 {
                        if !in_x(x) {
                            continue;
                        }
                        for z in cz - k..=cz + k {
                            if in_z(z) {
                                visit((x, y, z));
                            }
                        }
                    }
                }
                for &dz in &[-k, k] {
                    let z = cz + dz;
                    if !in_z(z) {
                        continue;
                    }
                    for x in cx - k + 1..=cx + k - 1 {
                        if !in_x(x) {
                            continue;
                        }
                        for y in cy - k + 1..=cy + k - 1 {
                            if in_y(y) {
                                visit((x, y, z));
                            }
                        }
                    }
                }
            }
            // Once the ring window swallows the whole occupied box,
            // every cell has been seen.
            if cx - k <= 0
                && cx + k >= hi.0
                && cy - k <= 0
                && cy + k >= hi.1
                && cz - k <= 0
                && cz + k >= hi.2
            {
                break;
            }
            k += 1;
        }
    }
    best_sq.sqrt()
}

pub fn min_gap(pair: &SurfacePair) -> f64 {
    min_gap_points(pair.a().points(), pair.b().points())
}

// ---------------------------------------------------------------------
// Projected overlap
// ---------------------------------------------------------------------

/// In-plane orthonormal basis for a unit normal.
fn plane_basis(n: &Point3) -> (Point3, Point3) {
    let axes = [
        Point3::new(1.0, 0.0, 0.0),
        Point3::new(0.0, 1.0, 0.0),
        Point3::new(0.0, 0.0, 1.0),
    ];
    let mut e = axes[0];
    let mut best = f64::INFINITY;
    for axis in axes {
        let d = n.dot(&axis).abs();
        if d < best {
            best = d;
            e = axis;
        }
    }
    let u = n
        .cross(&e)
        .normalized()
        .expect("chosen axis is not parallel to the normal");
    let v = n.cross(&u);
    (u, v)
}

/// Fraction of `reference`'s occupied footprint cells that `other` also
/// hits. Both sides are projected onto `reference`'s fitted plane and
/// rasterized over the reference footprint at [`OVERLAP_RASTER`]
/// resolution; `other` points falling outside that footprint are
/// ignored rather than clamped into boundary cells.
pub fn directed_overlap(
    reference: &LabeledPointSet,
    other: &LabeledPointSet,
) -> Result<f64, FeatureError> {
    let n = fitted_plane_normal(reference)?;
    let (u, v) = plane_basis(&n);
    let origin = reference.centroid();
    let project = |p: &Point3| -> (f64, f64) {
        let d = *p - origin;
        (d.dot(&u), d.dot(&v))
    };

    let ref_uv: Vec<(f64, f64)> = reference.points().iter().map(&project).collect();
    let (mut umin, mut umax, mut vmin, mut vmax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(pu, pv) in &ref_uv {
        umin = umin.min(pu);
        umax = umax.max(pu);
        vmin = vmin.min(pv);
        vmax = vmax.max(pv);
    }
    let ue = (umax - umin).max(0.0);
    let ve = (vmax - vmin).max(0.0);
    let r = OVERLAP_RASTER;
    let bin = |t: f64, min: f64, ext: f64| -> Option<usize> {
        let s = if ext <= 0.0 { 0.0 } else { (t - min) / ext };
        if !(0.0..=1.0).contains(&s) {
            return None;
        }
        Some(((s * r as f64).floor() as usize).min(r - 1))
    };

    let mut ref_occ = vec![false; r * r];
    for &(pu, pv) in &ref_uv {
        let (iu, iv) = (
            bin(pu, umin, ue).expect("reference points lie inside their own bounds"),
            bin(pv, vmin, ve).expect("reference points lie inside their own bounds"),
        );
        ref_occ[iu * r + iv] = true;
    }
    let mut other_occ = vec![false; r * r];
    for p in other.points() {
        let (pu, pv) = project(p);
        if let (Some(iu), Some(iv)) = (bin(pu, umin, ue), bin(pv, vmin, ve)) {
            other_occ[iu * r + iv] = true;
        }
    }

    let occupied = ref_occ.iter().filter(|&&o| o).count();
    let hit = ref_occ
        .iter()
        .zip(&other_occ)
        .filter(|(&a, &b)| a && b)
        .count();
    Ok(hit as f64 / occupied as f64)
}

/// Overlap in the primary direction: side b against side a's footprint.
pub fn projected_overlap(pair: &SurfacePair) -> Result<f64, FeatureError> {
    directed_overlap(pair.a(), pair.b())
}

/// All features of a pair in one pass.
pub fn contact_features(pair: &SurfacePair) -> Result<ContactFeatures, FeatureError> {
    let gap = min_gap(pair);
    let diag = pair.padded_bounds().diagonal();
    let angle_deg = inter_surface_angle(pair)?;
    let overlap_ab = directed_overlap(pair.a(), pair.b())?;
    let overlap_ba = directed_overlap(pair.b(), pair.a())?;
    Ok(ContactFeatures {
        min_gap: gap,
        rel_gap: gap / diag,
        angle_deg,
        overlap_ab,
        overlap_ba,
    })
}
