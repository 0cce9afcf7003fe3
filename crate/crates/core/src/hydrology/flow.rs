use std::collections::VecDeque;

use super::{neighbors, D8_OFFSETS};
use crate::error::{Error, Result};
use crate::raster::{Raster, NODATA};

/// D8 flow directions.
///
/// Codes 1..=8 are E, SE, S, SW, W, NW, N, NE. Outlets (no lower neighbour)
/// and missing DEM cells both carry the sentinel in [`FlowDirGrid::codes`];
/// the `domain` mask tells them apart.
#[derive(Debug, Clone)]
pub struct FlowDirGrid {
    codes: Raster,
    domain: Vec<bool>,
}

impl FlowDirGrid {
    pub fn codes(&self) -> &Raster {
        &self.codes
    }

    pub fn into_codes(self) -> Raster {
        self.codes
    }

    /// True for cells that were valid in the source DEM.
    pub fn in_domain(&self, idx: usize) -> bool {
        self.domain[idx]
    }

    pub fn code(&self, idx: usize) -> Option<u8> {
        self.codes.at(idx).map(|v| v as u8)
    }

    /// Downstream cell index, if `idx` is not an outlet.
    pub fn target(&self, idx: usize) -> Option<usize> {
        let code = self.code(idx)?;
        let cols = self.codes.cols();
        let (dr, dc) = D8_OFFSETS[code as usize - 1];
        let r = (idx / cols) as isize + dr;
        let c = (idx % cols) as isize + dc;
        Some(r as usize * cols + c as usize)
    }

    pub fn is_outlet(&self, idx: usize) -> bool {
        self.domain[idx] && self.code(idx).is_none()
    }
}

/// Steepest-descent neighbour per cell, measured as drop over metric distance.
///
/// Ties go to the lowest code. Cells without a strictly lower neighbour
/// become outlets.
pub fn d8_flow_direction(filled: &Raster) -> FlowDirGrid {
    let (rows, cols) = (filled.rows(), filled.cols());
    let t = filled.transform();
    let (dx, dy) = (t.dx_m(), t.dy_m());
    let dist: [f64; 8] = std::array::from_fn(|k| match D8_OFFSETS[k] {
        (0, _) => dx,
        (_, 0) => dy,
        _ => dx.hypot(dy),
    });
    let domain = filled.valid_mask();
    let values = (0..rows * cols)
        .map(|i| {
            let Some(z) = filled.at(i) else {
                return NODATA;
            };
            let mut best = 0.0;
            let mut code = None;
            for (k, j) in neighbors(i / cols, i % cols, rows, cols) {
                let Some(zn) = filled.at(j) else { continue };
                let slope = (z - zn) / dist[k];
                if slope > best {
                    best = slope;
                    code = Some(k + 1);
                }
            }
            code.map_or(NODATA, |c| c as f64)
        })
        .collect();
    FlowDirGrid {
        codes: filled.derive(values),
        domain,
    }
}

/// Contributing cells per cell (itself included), accumulated in topological order.
pub fn flow_accumulation(flowdir: &FlowDirGrid) -> Result<Raster> {
    let n = flowdir.codes.len();
    let mut indegree = vec![0u32; n];
    for i in 0..n {
        if let Some(j) = flowdir.target(i) {
            indegree[j] += 1;
        }
    }
    let mut acc = vec![1.0f64; n];
    let mut queue: VecDeque<usize> = (0..n)
        .filter(|&i| flowdir.domain[i] && indegree[i] == 0)
        .collect();
    let mut done = 0usize;
    while let Some(i) = queue.pop_front() {
        done += 1;
        if let Some(j) = flowdir.target(i) {
            acc[j] += acc[i];
            indegree[j] -= 1;
            if indegree[j] == 0 {
                queue.push_back(j);
            }
        }
    }
    let total = flowdir.domain.iter().filter(|&&d| d).count();
    if done != total {
        return Err(Error::Cycle {
            unresolved: total - done,
        });
    }
    let values = (0..n)
        .map(|i| if flowdir.domain[i] { acc[i] } else { NODATA })
        .collect();
    Ok(flowdir.codes.derive(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoTransform;

    fn raster(rows: usize, cols: usize, v: Vec<f64>) -> Raster {
        let t = GeoTransform::new(0.0, rows as f64 * 30.0, 30.0, 30.0).unwrap();
        Raster::new(rows, cols, t, v, NODATA).unwrap()
    }

    #[test]
    fn eastward_plane() {
        let dem = raster(4, 5, (0..20).map(|i| 50.0 - (i % 5) as f64).collect());
        let fd = d8_flow_direction(&dem);
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(fd.code(r * 5 + c), Some(1), "({r},{c})");
            }
            assert!(fd.is_outlet(r * 5 + 4));
        }
    }

    #[test]
    fn diagonal_distance_is_longer() {
        // Centre drops 1 to the east and 1.3 to the south-east: 1/30 > 1.3/42.4.
        let mut v = vec![10.0; 9];
        v[4] = 5.0;
        v[5] = 4.0;
        v[8] = 3.7;
        let fd = d8_flow_direction(&raster(3, 3, v));
        assert_eq!(fd.code(4), Some(1));
    }

    #[test]
    fn ties_take_lowest_code() {
        let mut v = vec![10.0; 9];
        v[4] = 5.0;
        v[3] = 4.0; // W, code 5
        v[1] = 4.0; // N, code 7
        let fd = d8_flow_direction(&raster(3, 3, v));
        assert_eq!(fd.code(4), Some(5));
    }

    #[test]
    fn chain_accumulation() {
        let dem = raster(1, 5, vec![5.0, 4.0, 3.0, 2.0, 1.0]);
        let acc = flow_accumulation(&d8_flow_direction(&dem)).unwrap();
        assert_eq!(acc.values(), &[1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn all_outlets() {
        let dem = raster(3, 3, vec![7.0; 9]);
        let acc = flow_accumulation(&d8_flow_direction(&dem)).unwrap();
        assert!(acc.values().iter().all(|&a| a == 1.0));
    }

    #[test]
    fn cycle_detected() {
        let t = GeoTransform::new(0.0, 30.0, 30.0, 30.0).unwrap();
        // Two cells pointing at each other: E then W.
        let codes = Raster::new(1, 2, t, vec![1.0, 5.0], NODATA).unwrap();
        let fd = FlowDirGrid {
            codes,
            domain: vec![true, true],
        };
        assert!(matches!(
            flow_accumulation(&fd),
            Err(Error::Cycle { unresolved: 2 })
        ));
    }

    #[test]
    fn nodata_cells_stay_outside() {
        let dem = raster(1, 3, vec![3.0, NODATA, 1.0]);
        let fd = d8_flow_direction(&dem);
        assert!(!fd.in_domain(1));
        let acc = flow_accumulation(&fd).unwrap();
        assert_eq!(acc.get(0, 1), None);
        assert_eq!(acc.get(0, 0), Some(1.0));
    }
}
