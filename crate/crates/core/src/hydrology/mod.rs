//! Hydrological conditioning and flow-routing derivatives.

mod distance;
mod fill;
mod flow;
mod relief;

pub use distance::{distance_to_mask, nearest_mask_cells, Nearest};
pub use fill::{closed_depressions, fill_sinks};
pub use flow::{d8_flow_direction, flow_accumulation, FlowDirGrid};
pub use relief::{
    altitude_above_channel, altitude_below_ridge, extract_channels, extract_ridges,
    relative_slope_position,
};

/// (Δrow, Δcol) per D8 code; index `k` is code `k + 1`: E, SE, S, SW, W, NW, N, NE.
pub const D8_OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

/// Move length in cell units per D8 code.
pub(crate) const D8_STEP: [f64; 8] = [
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
    1.0,
    std::f64::consts::SQRT_2,
];

/// In-bounds D8 neighbours of (r, c) as (offset index, cell index), in code order.
#[inline]
pub(crate) fn neighbors(
    r: usize,
    c: usize,
    rows: usize,
    cols: usize,
) -> impl Iterator<Item = (usize, usize)> {
    D8_OFFSETS
        .iter()
        .enumerate()
        .filter_map(move |(k, &(dr, dc))| {
            let nr = r as isize + dr;
            let nc = c as isize + dc;
            (nr >= 0 && nc >= 0 && (nr as usize) < rows && (nc as usize) < cols)
                .then(|| (k, nr as usize * cols + nc as usize))
        })
}
