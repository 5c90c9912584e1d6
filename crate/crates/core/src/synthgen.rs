//! Synthetic dataset generation: parametric surface-pair families
//! (plane pairs and concentric cylinder shells), rule-based labeling,
//! joint-rotation augmentation and stratified train/validation splits.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::{build_multires, GridError};
use crate::features::{
    contact_features, oracle_label, ContactClass, ContactFeatures, FeatureError, LabelBand,
    OracleThresholds,
};
use crate::geometry::{
    rotate_about, AxisAngle, GeometryError, LabeledPointSet, Point3, SurfacePair,
};
use crate::model::TrainSample;

/// Default sampling density, points per unit of surface area.
pub const DEFAULT_DENSITY: f64 = 4000.0;

/// In-plane jitter amplitude as a fraction of the lattice spacing.
const JITTER_FRAC: f64 = 0.35;

/// Out-of-plane noise amplitude for plane lattices, in absolute units.
/// Grids normalize each axis to the pair's own span, so perfectly flat
/// parallel plates would collapse every gap to the same two cell
/// layers; a small scan-like thickness keeps the separation-to-
/// thickness ratio, and with it the gap, visible after normalization.
const ROUGHNESS_AMP: f64 = 0.01;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid pair spec: {0}")]
    InvalidSpec(&'static str),
    #[error("no samples of class {0} were generated")]
    EmptyClass(u8),
    #[error("class {label} has only {bases} base samples; at least 2 are needed to split")]
    ClassTooSmall { label: u8, bases: usize },
    #[error("train fraction must be strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Geometry family of a generated pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Family {
    PlanePair,
    ConcentricCylinders,
}

/// Full recipe for one deterministic surface pair.
///
/// `radius` and `height` only apply to the cylinder family; `angle_deg`,
/// `scale_b` and `lateral_offset` only to the plane family. `gap` is the
/// normal separation for planes and the radial clearance for cylinders.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairSpec {
    pub family: Family,
    pub gap: f64,
    pub angle_deg: f64,
    pub scale_b: f64,
    pub lateral_offset: Point3,
    pub density: f64,
    pub radius: f64,
    pub height: f64,
    pub seed: u64,
}

impl Default for PairSpec {
    fn default() -> Self {
        PairSpec {
            family: Family::PlanePair,
            gap: 0.0,
            angle_deg: 0.0,
            scale_b: 1.0,
            lateral_offset: Point3::ZERO,
            density: DEFAULT_DENSITY,
            radius: 0.4,
            height: 0.45,
            seed: 0,
        }
    }
}

impl PairSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.density > 0.0) || !self.density.is_finite() || self.density > 1e8 {
            return Err(SynthError::InvalidSpec("density must be in (0, 1e8]"));
        }
        if !(self.scale_b > 0.0) || !self.scale_b.is_finite() {
            return Err(SynthError::InvalidSpec("scale_b must be positive"));
        }
        if !(self.gap >= 0.0) || !self.gap.is_finite() {
            return Err(SynthError::InvalidSpec("gap must be non-negative"));
        }
        if !self.angle_deg.is_finite() || !self.lateral_offset.is_finite() {
            return Err(SynthError::InvalidSpec("angle and offset must be finite"));
        }
        if self.family == Family::ConcentricCylinders
            && (!(self.radius > 0.0) || !(self.height > 0.0))
        {
            return Err(SynthError::InvalidSpec(
                "cylinders need positive radius and height",
            ));
        }
        Ok(())
    }

    fn plane(gap: f64, angle_deg: f64, scale_b: f64, offset: (f64, f64), seed: u64) -> Self {
        PairSpec {
            family: Family::PlanePair,
            gap,
            angle_deg,
            scale_b,
            lateral_offset: Point3::new(offset.0, offset.1, 0.0),
            seed,
            ..PairSpec::default()
        }
    }

    fn cylinders(radius: f64, height: f64, gap: f64, seed: u64) -> Self {
        PairSpec {
            family: Family::ConcentricCylinders,
            gap,
            radius,
            height,
            seed,
            ..PairSpec::default()
        }
    }
}

/// Jittered lattice over a square of the given side, centered at the
/// origin around the z = 0 plane with [`ROUGHNESS_AMP`] thickness.
fn square_lattice<R: Rng>(rng: &mut R, side: f64, per_axis: usize) -> Vec<Point3> {
    let m = per_axis.max(2);
    let spacing = side / (m - 1) as f64;
    let mut points = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let jx = rng.gen_range(-JITTER_FRAC..JITTER_FRAC) * spacing;
            let jy = rng.gen_range(-JITTER_FRAC..JITTER_FRAC) * spacing;
            let jz = rng.gen_range(-ROUGHNESS_AMP..ROUGHNESS_AMP);
            points.push(Point3::new(
                -side / 2.0 + i as f64 * spacing + jx,
                -side / 2.0 + j as f64 * spacing + jy,
                jz,
            ));
        }
    }
    points
}

fn mat_apply(m: &[[f64; 3]; 3], p: Point3) -> Point3 {
    Point3::new(
        m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
        m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
        m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
    )
}

/// Side a is a jittered unit-square lattice spanning roughly [0,1]^2 at
/// z = 0. Side b is its own lattice of side `scale_b`, tilted by
/// `angle_deg` about the in-plane x axis through its centroid, then
/// placed over side a's center shifted by the lateral offset and raised
/// by `gap` along side a's normal.
pub fn gen_plane_pair(spec: &PairSpec) -> Result<SurfacePair, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let per_axis_a = (spec.density.sqrt().round() as usize).max(2);
    let a_points: Vec<Point3> = square_lattice(&mut rng, 1.0, per_axis_a)
        .into_iter()
        .map(|p| p + Point3::new(0.5, 0.5, 0.0))
        .collect();

    let per_axis_b = ((spec.density.sqrt() * spec.scale_b).round() as usize).max(2);
    let rot = AxisAngle {
        axis: Point3::new(1.0, 0.0, 0.0),
        angle_rad: spec.angle_deg.to_radians(),
    }
    .matrix()?;
    let center = Point3::new(
        0.5 + spec.lateral_offset.x,
        0.5 + spec.lateral_offset.y,
        spec.gap + spec.lateral_offset.z,
    );
    let b_points: Vec<Point3> = square_lattice(&mut rng, spec.scale_b, per_axis_b)
        .into_iter()
        .map(|p| mat_apply(&rot, p) + center)
        .collect();

    Ok(SurfacePair::new(
        LabeledPointSet::new(a_points, 1)?,
        LabeledPointSet::new(b_points, 2)?,
    )?)
}

/// Jittered lattice on a cylindrical shell of the given radius and
/// height, axis z, centered at the origin.
fn shell_lattice<R: Rng>(rng: &mut R, radius: f64, height: f64, density: f64) -> Vec<Point3> {
    let spacing = 1.0 / density.sqrt();
    let n_theta = ((core::f64::consts::TAU * radius / spacing).round() as usize).max(8);
    let n_z = ((height / spacing).round() as usize).max(2);
    let d_theta = core::f64::consts::TAU / n_theta as f64;
    let dz = height / n_z as f64;
    let mut points = Vec::with_capacity(n_theta * n_z);
    for i in 0..n_theta {
        for j in 0..n_z {
            let theta = (i as f64 + rng.gen_range(-JITTER_FRAC..JITTER_FRAC)) * d_theta;
            let z = -height / 2.0 + (j as f64 + 0.5 + rng.gen_range(-JITTER_FRAC..JITTER_FRAC)) * dz;
            points.push(Point3::new(
                radius * theta.cos(),
                radius * theta.sin(),
                z,
            ));
        }
    }
    points
}

/// Two coaxial shells of radii `radius` and `radius + gap`, equal
/// height, both sampled at `density`. The point count of each shell
/// grows linearly with height and radius.
pub fn gen_concentric_cylinders(spec: &PairSpec) -> Result<SurfacePair, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a_points = shell_lattice(&mut rng, spec.radius, spec.height, spec.density);
    let b_points = shell_lattice(&mut rng, spec.radius + spec.gap, spec.height, spec.density);
    Ok(SurfacePair::new(
        LabeledPointSet::new(a_points, 1)?,
        LabeledPointSet::new(b_points, 2)?,
    )?)
}

pub fn generate_pair(spec: &PairSpec) -> Result<SurfacePair, SynthError> {
    match spec.family {
        Family::PlanePair => gen_plane_pair(spec),
        Family::ConcentricCylinders => gen_concentric_cylinders(spec),
    }
}

/// A generated pair together with its measured features and rule label.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub spec: PairSpec,
    pub pair: SurfacePair,
    pub features: ContactFeatures,
    pub class: ContactClass,
    pub band: LabelBand,
}

pub fn label_pair(
    spec: &PairSpec,
    thresholds: &OracleThresholds,
) -> Result<LabeledPair, SynthError> {
    let pair = generate_pair(spec)?;
    let features = contact_features(&pair)?;
    let band = oracle_label(&features, thresholds);
    Ok(LabeledPair {
        spec: *spec,
        pair,
        features,
        class: band.class,
        band,
    })
}

// ---------------------------------------------------------------------
// Generation plans
// ---------------------------------------------------------------------

/// One planned spec and the class its parameters were designed to
/// produce; generation always re-derives the label from the rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanItem {
    pub spec: PairSpec,
    pub intended: ContactClass,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenPlan {
    pub items: Vec<PlanItem>,
}

impl GenPlan {
    /// The default 300-pair training plan: parameter lattices per class
    /// chosen so every spec sits well clear of the rule thresholds and
    /// stays on its side of them under joint rotations.
    pub fn default_plan() -> GenPlan {
        let mut items = Vec::with_capacity(300);
        let mut seed = 1000u64;
        let mut push = |spec: PairSpec, intended: ContactClass| {
            items.push(PlanItem { spec, intended });
        };
        let mut next = move || {
            seed += 1;
            seed
        };

        use ContactClass::{Bad, Good, Neutral};

        // Good: tight gaps, near-parallel, high footprint overlap.
        for gap in [0.0, 0.005, 0.01, 0.015, 0.02] {
            for angle in [0.0, 2.0, 4.0, 6.0, 8.0] {
                push(PairSpec::plane(gap, angle, 1.0, (0.0, 0.0), next()), Good);
            }
        }
        for scale in [0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2] {
            for gap in [0.0, 0.01, 0.02] {
                push(PairSpec::plane(gap, 0.0, scale, (0.0, 0.0), next()), Good);
            }
        }
        for off in [
            (0.02, 0.0),
            (-0.02, 0.0),
            (0.0, 0.02),
            (0.0, -0.02),
            (0.05, 0.0),
            (-0.05, 0.0),
            (0.0, 0.05),
            (0.0, -0.05),
        ] {
            for gap in [0.0, 0.01, 0.02] {
                push(PairSpec::plane(gap, 0.0, 1.0, off, next()), Good);
            }
        }
        for angle in [1.0, 3.0, 5.0, 7.0, 9.0] {
            for scale in [0.95, 1.05] {
                for gap in [0.005, 0.015] {
                    push(PairSpec::plane(gap, angle, scale, (0.0, 0.0), next()), Good);
                }
            }
        }
        for gap in [0.0, 0.008, 0.016] {
            for angle in [0.0, 3.0, 6.0] {
                push(PairSpec::plane(gap, angle, 1.0, (0.03, 0.03), next()), Good);
            }
        }
        for radius in [0.35, 0.4, 0.45] {
            for height in [0.4, 0.5] {
                push(PairSpec::cylinders(radius, height, 0.0, next()), Good);
            }
        }

        // Bad: wide gaps (kept above the relative threshold even after
        // rotation inflates the box diagonal), disjoint footprints,
        // perpendicular slivers, cylinder shells with real clearance.
        for gap in [0.40, 0.44, 0.48, 0.52, 0.56, 0.60] {
            for scale in [1.0, 0.9, 0.8] {
                push(PairSpec::plane(gap, 0.0, scale, (0.0, 0.0), next()), Bad);
            }
        }
        // The near edge of a tilted far plate sits sin(angle)/2 below
        // its centroid, so these keep gap - sin(angle)/2 well above the
        // relative-gap floor at the worst rotated box diagonal.
        for gap in [0.48, 0.58] {
            for angle in [5.0, 10.0] {
                push(PairSpec::plane(gap, angle, 1.0, (0.0, 0.0), next()), Bad);
            }
        }
        for gap in [0.45, 0.52, 0.6] {
            for off in [(0.2, 0.0), (0.0, 0.3), (0.3, 0.2)] {
                push(PairSpec::plane(gap, 0.0, 1.0, off, next()), Bad);
            }
        }
        for off_x in [1.2, 1.4, 1.6] {
            for gap in [0.0, 0.05, 0.1] {
                for scale in [1.0, 0.7] {
                    push(PairSpec::plane(gap, 0.0, scale, (off_x, 0.0), next()), Bad);
                }
            }
        }
        // Perpendicular slivers stay small: the projected strip of a
        // large crossing plate covers enough of the footprint raster to
        // clear the overlap floor once a rotated copy runs diagonally.
        for scale in [0.4, 0.5] {
            for gap in [0.0, 0.03] {
                push(PairSpec::plane(gap, 90.0, scale, (0.0, 0.0), next()), Bad);
            }
        }
        // Clearances stay >= 1.5 fine cells even after a joint rotation
        // inflates the box, so the shells never read as touching.
        for radius in [0.3, 0.35, 0.4] {
            for height in [0.4, 0.5] {
                for factor in [0.45, 0.7, 1.0] {
                    push(
                        PairSpec::cylinders(radius, height, factor * radius, next()),
                        Bad,
                    );
                }
            }
        }
        for radius in [0.3, 0.4] {
            for factor in [0.85, 1.15] {
                push(
                    PairSpec::cylinders(radius, 0.45, factor * radius, next()),
                    Bad,
                );
            }
        }
        for gap in [0.0, 0.03] {
            push(PairSpec::plane(gap, 90.0, 0.5, (0.3, 0.0), next()), Bad);
        }
        for off in [(1.1, 1.1), (1.3, 0.9)] {
            for gap in [0.0, 0.08] {
                push(PairSpec::plane(gap, 0.0, 1.0, off, next()), Bad);
            }
        }
        for gap in [0.55, 0.6] {
            push(PairSpec::plane(gap, 20.0, 1.0, (0.0, 0.0), next()), Bad);
        }
        for gap in [0.45, 0.52, 0.6] {
            for scale in [1.0, 0.85] {
                push(PairSpec::plane(gap, 0.0, scale, (0.15, 0.15), next()), Bad);
            }
        }

        // Neutral: everything in between, each item held away from the
        // good thresholds by angle, overlap or gap and from the bad
        // ones by contact or ample footprint overlap.
        for angle in [25.0, 35.0, 45.0, 55.0, 65.0] {
            for gap in [0.0, 0.02, 0.05] {
                push(PairSpec::plane(gap, angle, 1.0, (0.0, 0.0), next()), Neutral);
            }
        }
        for angle in [30.0, 50.0, 60.0] {
            for scale in [0.8, 1.0, 1.2] {
                push(PairSpec::plane(0.0, angle, scale, (0.0, 0.0), next()), Neutral);
            }
        }
        for mag in [0.4, 0.5, 0.6] {
            for off in [(mag, 0.0), (0.0, mag)] {
                for gap in [0.0, 0.03] {
                    push(PairSpec::plane(gap, 0.0, 1.0, off, next()), Neutral);
                }
            }
        }
        // Near-contact gaps leave roughly 10-12 empty cell layers
        // between the sheets; wide bad gaps leave 14+, touching good
        // pairs none, so the band count separates all three.
        for gap in [0.09, 0.11, 0.13] {
            for scale in [1.0, 0.9] {
                for off in [(0.0, 0.0), (0.2, 0.0)] {
                    push(PairSpec::plane(gap, 0.0, scale, off, next()), Neutral);
                }
            }
        }
        for gap in [0.09, 0.12] {
            for scale in [0.8, 1.2] {
                push(PairSpec::plane(gap, 0.0, scale, (0.0, 0.0), next()), Neutral);
            }
        }
        for scale in [0.4, 0.5, 0.6] {
            for gap in [0.0, 0.02] {
                for angle in [0.0, 15.0] {
                    push(PairSpec::plane(gap, angle, scale, (0.0, 0.0), next()), Neutral);
                }
            }
        }
        for gap in [0.10, 0.12] {
            for off_x in [0.45, 0.55] {
                push(PairSpec::plane(gap, 0.0, 1.0, (off_x, 0.0), next()), Neutral);
            }
        }
        for angle in [28.0, 38.0, 48.0] {
            for gap in [0.0, 0.01] {
                push(PairSpec::plane(gap, angle, 1.0, (0.0, 0.0), next()), Neutral);
            }
        }
        for angle in [28.0, 40.0, 60.0] {
            for off_x in [0.15, 0.3] {
                push(PairSpec::plane(0.0, angle, 1.0, (off_x, 0.0), next()), Neutral);
            }
        }
        for gap in [0.10, 0.12] {
            for angle in [25.0, 35.0] {
                push(PairSpec::plane(gap, angle, 1.0, (0.0, 0.0), next()), Neutral);
            }
        }
        for scale in [1.3, 1.5] {
            for gap in [0.09, 0.12] {
                push(PairSpec::plane(gap, 0.0, scale, (0.0, 0.0), next()), Neutral);
            }
        }
        for angle in [30.0, 45.0, 60.0] {
            for scale in [0.6, 0.7] {
                for gap in [0.0, 0.04] {
                    push(PairSpec::plane(gap, angle, scale, (0.0, 0.0), next()), Neutral);
                }
            }
        }
        for angle in [33.0, 48.0, 63.0] {
            for gap in [0.0, 0.03] {
                push(PairSpec::plane(gap, angle, 1.0, (0.1, 0.1), next()), Neutral);
            }
        }

        GenPlan { items }
    }

    /// A fixed 24-pair held-out set: full-overlap coincident pairs,
    /// concentric clearance cylinders plus far/disjoint/perpendicular
    /// pairs, and partially overlapping or near-contact pairs.
    pub fn table_plan() -> GenPlan {
        use ContactClass::{Bad, Good, Neutral};
        let s = |i: u64| 20000 + i;
        let items = vec![
            // Expected high band.
            PlanItem { spec: PairSpec::plane(0.0, 0.0, 1.0, (0.0, 0.0), s(1)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.005, 0.0, 1.0, (0.0, 0.0), s(2)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.0, 2.0, 1.0, (0.0, 0.0), s(3)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.01, 4.0, 1.0, (0.0, 0.0), s(4)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.0, 0.0, 1.05, (0.0, 0.0), s(5)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.005, 0.0, 0.95, (0.0, 0.0), s(6)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.0, 0.0, 1.0, (0.02, 0.0), s(7)), intended: Good },
            PlanItem { spec: PairSpec::plane(0.01, 0.0, 1.0, (0.0, 0.03), s(8)), intended: Good },
            // Expected low band.
            PlanItem { spec: PairSpec::cylinders(0.3, 0.45, 0.09, s(9)), intended: Bad },
            PlanItem { spec: PairSpec::cylinders(0.4, 0.45, 0.12, s(10)), intended: Bad },
            PlanItem { spec: PairSpec::cylinders(0.35, 0.4, 0.175, s(11)), intended: Bad },
            PlanItem { spec: PairSpec::cylinders(0.4, 0.5, 0.2, s(12)), intended: Bad },
            PlanItem { spec: PairSpec::plane(0.35, 0.0, 1.0, (0.0, 0.0), s(13)), intended: Bad },
            PlanItem { spec: PairSpec::plane(0.45, 0.0, 1.0, (0.0, 0.0), s(14)), intended: Bad },
            PlanItem { spec: PairSpec::plane(0.6, 0.0, 1.0, (0.0, 0.0), s(15)), intended: Bad },
            PlanItem { spec: PairSpec::plane(0.0, 0.0, 1.0, (1.3, 0.0), s(16)), intended: Bad },
            PlanItem { spec: PairSpec::plane(0.05, 0.0, 1.0, (1.5, 0.0), s(17)), intended: Bad },
            PlanItem { spec: PairSpec::plane(0.0, 90.0, 0.6, (0.0, 0.0), s(18)), intended: Bad },
            // Expected middle band.
            PlanItem { spec: PairSpec::plane(0.0, 45.0, 1.0, (0.0, 0.0), s(19)), intended: Neutral },
            PlanItem { spec: PairSpec::plane(0.02, 45.0, 0.8, (0.0, 0.0), s(20)), intended: Neutral },
            PlanItem { spec: PairSpec::plane(0.05, 0.0, 1.0, (0.45, 0.0), s(21)), intended: Neutral },
            PlanItem { spec: PairSpec::plane(0.05, 0.0, 1.0, (0.5, 0.0), s(22)), intended: Neutral },
            PlanItem { spec: PairSpec::plane(0.1, 0.0, 1.0, (0.0, 0.0), s(23)), intended: Neutral },
            PlanItem { spec: PairSpec::plane(0.0, 0.0, 0.5, (0.0, 0.0), s(24)), intended: Neutral },
        ];
        GenPlan { items }
    }
}

/// Gap sweep on a fixed partially overlapping plane pair: only the
/// normal separation moves.
pub fn translation_sweep(steps: usize) -> Vec<PairSpec> {
    let n = steps.max(2);
    (0..n)
        .map(|i| {
            PairSpec::plane(
                0.6 * i as f64 / (n - 1) as f64,
                0.0,
                1.0,
                (0.25, 0.0),
                9001,
            )
        })
        .collect()
}

/// Tilt sweep on coincident unit squares, 0 to 90 degrees.
pub fn rotation_sweep(steps: usize) -> Vec<PairSpec> {
    let n = steps.max(2);
    (0..n)
        .map(|i| PairSpec::plane(0.0, 90.0 * i as f64 / (n - 1) as f64, 1.0, (0.0, 0.0), 9002))
        .collect()
}

/// Shrink sweep of side b over side a, scale 1.0 down to 0.25.
pub fn scale_sweep(steps: usize) -> Vec<PairSpec> {
    let n = steps.max(2);
    (0..n)
        .map(|i| {
            let scale = 1.0 - 0.75 * i as f64 / (n - 1) as f64;
            PairSpec::plane(0.0, 0.0, scale, (0.0, 0.0), 9003)
        })
        .collect()
}

// ---------------------------------------------------------------------
// Manifest: labeling, augmentation, split
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "snake_case")
)]
pub enum Split {
    Train,
    Validation,
}

/// Joint rotation applied to both sides of an augmented copy: a
/// coordinate axis (0 = x, 1 = y, 2 = z) and a continuous angle.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotationRecord {
    pub axis: u8,
    pub angle_rad: f64,
}

impl RotationRecord {
    pub fn axis_angle(&self) -> AxisAngle {
        let axis = match self.axis {
            0 => Point3::new(1.0, 0.0, 0.0),
            1 => Point3::new(0.0, 1.0, 0.0),
            _ => Point3::new(0.0, 0.0, 1.0),
        };
        AxisAngle {
            axis,
            angle_rad: self.angle_rad,
        }
    }
}

/// Self-contained recipe for one dataset sample. Augmented entries
/// carry their base's spec plus the extra joint rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ManifestEntry {
    pub id: usize,
    pub spec: PairSpec,
    pub label: u8,
    pub band: [f64; 2],
    pub split: Split,
    pub augmentation_of: Option<usize>,
    pub rotation: Option<RotationRecord>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetManifest {
    pub seed: u64,
    pub train_fraction: f64,
    pub augmentations: usize,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn base_entries(&self) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(|e| e.augmentation_of.is_none())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildConfig {
    /// Augmented copies per base sample.
    pub augmentations: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub thresholds: OracleThresholds,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            augmentations: 4,
            train_fraction: 0.75,
            seed: 42,
            thresholds: OracleThresholds::default(),
        }
    }
}

const SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Label every planned pair, assign stratified splits on the base
/// samples and append rotation-augmented copies that inherit their
/// base's split and label.
pub fn build_manifest(plan: &GenPlan, config: &BuildConfig) -> Result<DatasetManifest, SynthError> {
    if !(config.train_fraction > 0.0 && config.train_fraction < 1.0) {
        return Err(SynthError::BadFraction(config.train_fraction));
    }
    if plan.items.is_empty() {
        return Err(SynthError::InvalidSpec("plan has no items"));
    }

    struct BaseRow {
        spec: PairSpec,
        class: ContactClass,
        band: LabelBand,
    }
    let mut bases = Vec::with_capacity(plan.items.len());
    for item in &plan.items {
        let labeled = label_pair(&item.spec, &config.thresholds)?;
        bases.push(BaseRow {
            spec: item.spec,
            class: labeled.class,
            band: labeled.band,
        });
    }

    // Stratified split over base ids, one shuffle stream, fixed class
    // order; each class keeps at least one sample on each side.
    let mut split_of = vec![Split::Validation; bases.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for class in ContactClass::ALL {
        let mut ids: Vec<usize> = bases
            .iter()
            .enumerate()
            .filter(|(_, b)| b.class == class)
            .map(|(i, _)| i)
            .collect();
        if ids.is_empty() {
            return Err(SynthError::EmptyClass(class.label()));
        }
        if ids.len() < 2 {
            return Err(SynthError::ClassTooSmall {
                label: class.label(),
                bases: ids.len(),
            });
        }
        use rand::seq::SliceRandom;
        ids.shuffle(&mut rng);
        let raw = (ids.len() as f64 * config.train_fraction).round() as usize;
        let n_train = raw.clamp(1, ids.len() - 1);
        for (rank, &id) in ids.iter().enumerate() {
            split_of[id] = if rank < n_train {
                Split::Train
            } else {
                Split::Validation
            };
        }
    }

    let mut entries = Vec::with_capacity(bases.len() * (1 + config.augmentations));
    for (id, base) in bases.iter().enumerate() {
        entries.push(ManifestEntry {
            id,
            spec: base.spec,
            label: base.class.label(),
            band: [base.band.lo, base.band.hi],
            split: split_of[id],
            augmentation_of: None,
            rotation: None,
        });
    }
    let n_bases = bases.len();
    for (base_id, base) in bases.iter().enumerate() {
        let mut aug_rng = ChaCha8Rng::seed_from_u64(
            config
                .seed
                .wrapping_add((base_id as u64 + 1).wrapping_mul(SEED_MIX)),
        );
        for k in 0..config.augmentations {
            let axis = aug_rng.gen_range(0..3u8);
            let angle_rad = aug_rng.gen_range(0.0..core::f64::consts::TAU);
            entries.push(ManifestEntry {
                id: n_bases + base_id * config.augmentations + k,
                spec: base.spec,
                label: base.class.label(),
                band: [base.band.lo, base.band.hi],
                split: split_of[base_id],
                augmentation_of: Some(base_id),
                rotation: Some(RotationRecord { axis, angle_rad }),
            });
        }
    }

    Ok(DatasetManifest {
        seed: config.seed,
        train_fraction: config.train_fraction,
        augmentations: config.augmentations,
        entries,
    })
}

/// Regenerate the exact pair an entry describes: the base pair from its
/// spec, with the recorded joint rotation (about the pair's box center)
/// applied for augmented entries.
pub fn materialize_pair(entry: &ManifestEntry) -> Result<SurfacePair, SynthError> {
    let pair = generate_pair(&entry.spec)?;
    match entry.rotation {
        None => Ok(pair),
        Some(rot) => {
            let pivot = pair.union_aabb().center();
            let axis_angle = rot.axis_angle();
            let a = rotate_about(pair.a(), &axis_angle, pivot)?;
            let b = rotate_about(pair.b(), &axis_angle, pivot)?;
            Ok(SurfacePair::new(a, b)?)
        }
    }
}

/// Bin an entry's pair at the given resolutions and attach its label.
pub fn materialize_sample(
    entry: &ManifestEntry,
    coarse_res: usize,
    fine_res: usize,
) -> Result<TrainSample, SynthError> {
    let pair = materialize_pair(entry)?;
    let input = build_multires(&pair, coarse_res, fine_res)?;
    let class = ContactClass::from_label(entry.label)
        .ok_or(SynthError::InvalidSpec("manifest entry has an unknown label"))?;
    Ok(TrainSample {
        input,
        class,
        band: LabelBand::for_class(class),
    })
}

/// Materialize the whole manifest into (train, validation) sample sets,
/// manifest order preserved within each split.
pub fn dataset_samples(
    manifest: &DatasetManifest,
    coarse_res: usize,
    fine_res: usize,
) -> Result<(Vec<TrainSample>, Vec<TrainSample>), SynthError> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for entry in &manifest.entries {
        let sample = materialize_sample(entry, coarse_res, fine_res)?;
        match entry.split {
            Split::Train => train.push(sample),
            Split::Validation => val.push(sample),
        }
    }
    Ok((train, val))
}
