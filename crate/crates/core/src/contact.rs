//! Candidate contact detection in scenes with several labeled surfaces:
//! every unordered pair whose minimum gap is within a tolerance derived
//! from the scene's body size is reported.

use alloc::vec::Vec;

use crate::features::min_gap_points;
use crate::geometry::{GeometryError, LabeledPointSet, SurfacePair};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ContactError {
    #[error("a scene needs at least 2 surfaces, got {0}")]
    TooFewSurfaces(usize),
    #[error("duplicate surface id {0} in scene")]
    DuplicateId(u32),
    #[error("tolerance fraction must be positive and finite, got {0}")]
    InvalidFraction(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Two or more surfaces with distinct ids, held sorted by id so every
/// derived report is independent of input order.
#[derive(Debug, Clone)]
pub struct Scene {
    surfaces: Vec<LabeledPointSet>,
}

impl Scene {
    pub fn new(mut surfaces: Vec<LabeledPointSet>) -> Result<Self, ContactError> {
        if surfaces.len() < 2 {
            return Err(ContactError::TooFewSurfaces(surfaces.len()));
        }
        surfaces.sort_by_key(|s| s.surface_id());
        for w in surfaces.windows(2) {
            if w[0].surface_id() == w[1].surface_id() {
                return Err(ContactError::DuplicateId(w[0].surface_id()));
            }
        }
        Ok(Scene { surfaces })
    }

    pub fn surfaces(&self) -> &[LabeledPointSet] {
        &self.surfaces
    }

    pub fn surface(&self, id: u32) -> Option<&LabeledPointSet> {
        self.surfaces.iter().find(|s| s.surface_id() == id)
    }

    /// Pair of two scene surfaces; the lower id becomes side a.
    pub fn pair_between(&self, id_1: u32, id_2: u32) -> Result<SurfacePair, ContactError> {
        let lo = id_1.min(id_2);
        let hi = id_1.max(id_2);
        let a = self
            .surface(lo)
            .ok_or(ContactError::TooFewSurfaces(0))?
            .clone();
        let b = self
            .surface(hi)
            .ok_or(ContactError::TooFewSurfaces(0))?
            .clone();
        Ok(SurfacePair::new(a, b)?)
    }
}

/// Size scale of the scene: the largest single-surface bounding box
/// diagonal. Using the per-surface boxes (not the union) keeps the
/// scale stable when far-apart surfaces are added.
pub fn body_diagonal(scene: &Scene) -> f64 {
    let mut best: f64 = 0.0;
    for s in scene.surfaces() {
        best = best.max(s.aabb().diagonal());
    }
    best
}

/// One detected candidate: ids ascending within the pair, pairs listed
/// in lexicographic id order.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CandidatePair {
    pub id_a: u32,
    pub id_b: u32,
    pub gap: f64,
    pub tolerance: f64,
}

/// All surface pairs whose minimum gap is at most `fraction` times the
/// body diagonal.
pub fn detect_pairs(scene: &Scene, fraction: f64) -> Result<Vec<CandidatePair>, ContactError> {
    if !(fraction > 0.0 && fraction.is_finite()) {
        return Err(ContactError::InvalidFraction(fraction));
    }
    let tolerance = fraction * body_diagonal(scene);
    let surfaces = scene.surfaces();
    let mut out = Vec::new();
    for i in 0..surfaces.len() {
        for j in i + 1..surfaces.len() {
            let gap = min_gap_points(surfaces[i].points(), surfaces[j].points());
            if gap <= tolerance {
                out.push(CandidatePair {
                    id_a: surfaces[i].surface_id(),
                    id_b: surfaces[j].surface_id(),
                    gap,
                    tolerance,
                });
            }
        }
    }
    Ok(out)
}
