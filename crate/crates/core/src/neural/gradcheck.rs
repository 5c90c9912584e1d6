//! Central-difference gradient verification. The function under test
//! is treated as a black box from flattened f64 coordinates to a
//! scalar; each probed coordinate is nudged by ±step and the slope is
//! compared against the provided analytic gradient.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NeuralError;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Half-width of the central difference.
    pub step: f64,
    /// Probe at most this many coordinates (0 means all), chosen
    /// without replacement from a seeded shuffle.
    pub max_coords: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-3,
            max_coords: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub coords_checked: usize,
    pub max_rel_err: f64,
    pub worst_coord: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Relative error with a floored denominator so near-zero gradients do
/// not blow the ratio up on rounding noise.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compare `analytic` against central differences of `f` at `point`.
pub fn finite_diff_check<F>(
    point: &[f64],
    analytic: &[f64],
    mut f: F,
    config: &GradCheckConfig,
) -> Result<GradCheckReport, NeuralError>
where
    F: FnMut(&[f64]) -> f64,
{
    if point.len() != analytic.len() {
        return Err(NeuralError::BadArgument {
            op: "finite_diff_check",
            why: "analytic gradient length must equal point length",
        });
    }
    if point.is_empty() {
        return Err(NeuralError::BadArgument {
            op: "finite_diff_check",
            why: "point must be non-empty",
        });
    }
    if !(config.step > 0.0 && config.step.is_finite()) {
        return Err(NeuralError::BadArgument {
            op: "finite_diff_check",
            why: "step must be positive and finite",
        });
    }

    let dim = point.len();
    let coords: Vec<usize> = if config.max_coords == 0 || config.max_coords >= dim {
        (0..dim).collect()
    } else {
        // Partial Fisher-Yates: the first max_coords entries are a
        // uniform sample without replacement.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut idx: Vec<usize> = (0..dim).collect();
        for i in 0..config.max_coords {
            let j = rng.gen_range(i..dim);
            idx.swap(i, j);
        }
        idx.truncate(config.max_coords);
        idx
    };

    let mut work = point.to_vec();
    let mut report = GradCheckReport {
        coords_checked: coords.len(),
        max_rel_err: 0.0,
        worst_coord: coords[0],
        worst_analytic: analytic[coords[0]],
        worst_numeric: 0.0,
    };
    let h = config.step;
    for &i in &coords {
        let saved = work[i];
        work[i] = saved + h;
        let f_plus = f(&work);
        work[i] = saved - h;
        let f_minus = f(&work);
        work[i] = saved;
        let numeric = (f_plus - f_minus) / (2.0 * h);
        let e = rel_err(analytic[i], numeric);
        if e > report.max_rel_err {
            report.max_rel_err = e;
            report.worst_coord = i;
            report.worst_analytic = analytic[i];
            report.worst_numeric = numeric;
        }
    }
    Ok(report)
}
