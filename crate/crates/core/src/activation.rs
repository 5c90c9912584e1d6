//! Activation grids: a surface pair binned into an R x R x R lattice of
//! cell states. A cell is empty (0), touched only by side a (1), only
//! by side b (2), or by both (3). A coarse and a fine grid over the
//! same padded bounds form the network input.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{Aabb, Point3, SurfacePair};
use crate::neural::{Scalar, Tensor};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid resolution must be >= 2, got {0}")]
    ResolutionTooSmall(usize),
    #[error("coarse resolution {coarse} must be strictly below fine resolution {fine}")]
    CoarseNotBelowFine { coarse: usize, fine: usize },
    #[error("bounds must be finite with min <= max on every axis")]
    InvalidBounds,
}

/// Occupancy of one grid cell. The numeric values matter: side a
/// contributes bit 1, side b bit 2, so overlap is their union.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum CellState {
    Empty = 0,
    SideA = 1,
    SideB = 2,
    Overlap = 3,
}

impl CellState {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<CellState> {
        match v {
            0 => Some(CellState::Empty),
            1 => Some(CellState::SideA),
            2 => Some(CellState::SideB),
            3 => Some(CellState::Overlap),
            _ => None,
        }
    }
}

/// Cubic lattice of cell states over explicit bounds. Cells are indexed
/// `(ix, iy, iz)` with z contiguous in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationGrid {
    resolution: usize,
    bounds: Aabb,
    states: Vec<CellState>,
}

/// Per-state cell tallies of one grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateCounts {
    pub empty: usize,
    pub side_a: usize,
    pub side_b: usize,
    pub overlap: usize,
}

impl StateCounts {
    pub fn total(&self) -> usize {
        self.empty + self.side_a + self.side_b + self.overlap
    }
}

/// The two-resolution network input; both grids share one bounds box.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiResInput {
    pub coarse: ActivationGrid,
    pub fine: ActivationGrid,
}

/// Axis bin: `floor((x - min) / extent * r)` clamped into `[0, r - 1]`.
/// A zero-extent axis acts as extent 1, mapping every point to bin 0.
#[inline]
fn axis_bin(x: f64, min: f64, extent: f64, r: usize) -> usize {
    if extent <= 0.0 {
        return 0;
    }
    let t = (x - min) / extent * r as f64;
    let i = t.floor();
    if i < 0.0 {
        0
    } else if i >= r as f64 {
        r - 1
    } else {
        i as usize
    }
}

impl ActivationGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn states(&self) -> &[CellState] {
        &self.states
    }

    #[inline]
    pub fn linear_index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.resolution + iy) * self.resolution + iz
    }

    pub fn state_at(&self, ix: usize, iy: usize, iz: usize) -> CellState {
        self.states[self.linear_index(ix, iy, iz)]
    }

    /// Cell coordinates for a point under this grid's bounds.
    pub fn cell_of(&self, p: &Point3) -> (usize, usize, usize) {
        let e = self.bounds.extents();
        (
            axis_bin(p.x, self.bounds.min.x, e.x, self.resolution),
            axis_bin(p.y, self.bounds.min.y, e.y, self.resolution),
            axis_bin(p.z, self.bounds.min.z, e.z, self.resolution),
        )
    }
}

/// Bin both sides of a pair into one grid over explicit bounds.
pub fn bin_points(
    pair: &SurfacePair,
    resolution: usize,
    bounds: &Aabb,
) -> Result<ActivationGrid, GridError> {
    if resolution < 2 {
        return Err(GridError::ResolutionTooSmall(resolution));
    }
    if !(bounds.min.is_finite()
        && bounds.max.is_finite()
        && bounds.min.x <= bounds.max.x
        && bounds.min.y <= bounds.max.y
        && bounds.min.z <= bounds.max.z)
    {
        return Err(GridError::InvalidBounds);
    }
    let mut grid = ActivationGrid {
        resolution,
        bounds: *bounds,
        states: vec![CellState::Empty; resolution * resolution * resolution],
    };
    let mut mark = |points: &[Point3], bit: u8| {
        for p in points {
            let (ix, iy, iz) = grid.cell_of(p);
            let idx = grid.linear_index(ix, iy, iz);
            let merged = grid.states[idx].as_u8() | bit;
            grid.states[idx] = CellState::from_u8(merged).expect("bits stay within 0..=3");
        }
    };
    mark(pair.a().points(), CellState::SideA.as_u8());
    mark(pair.b().points(), CellState::SideB.as_u8());
    Ok(grid)
}

/// Bin a pair at both resolutions over its padded union bounds.
pub fn build_multires(
    pair: &SurfacePair,
    coarse_res: usize,
    fine_res: usize,
) -> Result<MultiResInput, GridError> {
    if coarse_res >= fine_res {
        return Err(GridError::CoarseNotBelowFine {
            coarse: coarse_res,
            fine: fine_res,
        });
    }
    let bounds = pair.padded_bounds();
    Ok(MultiResInput {
        coarse: bin_points(pair, coarse_res, &bounds)?,
        fine: bin_points(pair, fine_res, &bounds)?,
    })
}

/// One-hot encode a grid as a `[4, r, r, r]` tensor: channel c holds 1
/// where the cell state is c.
pub fn encode_one_hot<T: Scalar>(grid: &ActivationGrid) -> Tensor<T> {
    let r = grid.resolution();
    let cells = r * r * r;
    let mut out = Tensor::zeros(&[4, r, r, r]);
    for (i, s) in grid.states().iter().enumerate() {
        out.data_mut()[s.as_u8() as usize * cells + i] = T::one();
    }
    out
}

/// Encode directly into a slice of an existing buffer (used when
/// assembling training batches without reallocating).
pub fn encode_one_hot_into<T: Scalar>(grid: &ActivationGrid, out: &mut [T]) {
    let r = grid.resolution();
    let cells = r * r * r;
    debug_assert_eq!(out.len(), 4 * cells);
    for v in out.iter_mut() {
        *v = T::zero();
    }
    for (i, s) in grid.states().iter().enumerate() {
        out[s.as_u8() as usize * cells + i] = T::one();
    }
}

pub fn grid_stats(grid: &ActivationGrid) -> StateCounts {
    let mut c = StateCounts::default();
    for s in grid.states() {
        match s {
            CellState::Empty => c.empty += 1,
            CellState::SideA => c.side_a += 1,
            CellState::SideB => c.side_b += 1,
            CellState::Overlap => c.overlap += 1,
        }
    }
    c
}
