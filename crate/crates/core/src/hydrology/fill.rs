use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::{neighbors, D8_STEP};
use crate::error::{Error, Result};
use crate::raster::{Raster, NODATA};

/// Heap key: elevation first, then cell index so pops are deterministic.
#[derive(Clone, Copy, PartialEq)]
struct Key(f64, usize);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Raise depressions so every cell drains to an outlet.
///
/// Outlets are valid cells on the raster edge or next to a missing cell; they
/// keep their elevation. Every other cell ends at the lowest elevation from
/// which a D8 path reaches an outlet while dropping at least
/// `min_slope × step` per step, where a step is 1 for cardinal and √2 for
/// diagonal moves. With `min_slope == 0` this is plain priority-flood filling
/// and flats stay flat.
///
/// The raise for a neighbour depends on the move length, so the first visit
/// is not always the final one. Cells are therefore relaxed Dijkstra-style
/// and only settled when popped.
pub fn fill_sinks(dem: &Raster, min_slope: f64) -> Result<Raster> {
    if !(min_slope >= 0.0 && min_slope.is_finite()) {
        return Err(Error::Parameter(format!(
            "min_slope must be a finite non-negative gradient, got {min_slope}"
        )));
    }
    let (rows, cols) = (dem.rows(), dem.cols());
    let valid = dem.valid_mask();
    if !valid.iter().any(|&v| v) {
        return Err(Error::EmptyInput("DEM has no valid cells".into()));
    }
    let raise: [f64; 8] = D8_STEP.map(|d| min_slope * d);

    let n = rows * cols;
    let mut level = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut heap = BinaryHeap::new();
    for i in 0..n {
        if !valid[i] {
            continue;
        }
        let (r, c) = (i / cols, i % cols);
        let edge = r == 0 || c == 0 || r + 1 == rows || c + 1 == cols;
        let touches_void = neighbors(r, c, rows, cols).any(|(_, j)| !valid[j]);
        if edge || touches_void {
            level[i] = dem.values()[i];
            heap.push(Reverse(Key(level[i], i)));
        }
    }

    while let Some(Reverse(Key(z, i))) = heap.pop() {
        if settled[i] || z > level[i] {
            continue;
        }
        settled[i] = true;
        let (r, c) = (i / cols, i % cols);
        for (k, j) in neighbors(r, c, rows, cols) {
            if !valid[j] || settled[j] {
                continue;
            }
            let candidate = dem.values()[j].max(z + raise[k]);
            if candidate < level[j] {
                level[j] = candidate;
                heap.push(Reverse(Key(candidate, j)));
            }
        }
    }

    let values = (0..n)
        .map(|i| if valid[i] { level[i] } else { NODATA })
        .collect();
    Ok(dem.derive(values))
}

/// Depth of filling per cell, `filled − dem`. This is the closed-depression feature.
pub fn closed_depressions(dem: &Raster, filled: &Raster) -> Result<Raster> {
    dem.require_same_grid(filled, "closed_depressions")?;
    let values = (0..dem.len())
        .map(|i| match (dem.at(i), filled.at(i)) {
            (Some(z), Some(f)) => (f - z).max(0.0),
            _ => NODATA,
        })
        .collect();
    Ok(dem.derive(values))
}
