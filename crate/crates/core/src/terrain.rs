//! Windowed surface derivatives: slope, aspect, curvature, TPI, convergence and wetness.
//!
//! Derivatives use the Zevenbergen–Thorne 3×3 central differences with metric
//! cell spacing. Cells whose window leaves the grid or touches a missing cell
//! are missing in every derived raster.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Raster, NODATA};

/// Slope tangent floor applied by [`twi`] so flat cells stay finite.
pub const TWI_TAN_FLOOR: f64 = 0.001;

/// Partial derivatives of the local quadratic surface (x east, y north, metric units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFit {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

impl SurfaceFit {
    pub fn gradient_sq(&self) -> f64 {
        self.p * self.p + self.q * self.q
    }

    pub fn slope(&self) -> f64 {
        self.gradient_sq().sqrt().atan()
    }

    /// Downslope azimuth in degrees clockwise from north; `None` on flat cells.
    pub fn aspect(&self) -> Option<f64> {
        if self.p == 0.0 && self.q == 0.0 {
            return None;
        }
        Some(normalize_deg((-self.p).atan2(-self.q).to_degrees()))
    }

    /// Contour curvature; positive where contours are concave (flow converges).
    pub fn plan_curvature(&self) -> f64 {
        let g2 = self.gradient_sq();
        if g2 == 0.0 {
            return 0.0;
        }
        let SurfaceFit { p, q, r, s, t } = *self;
        (q * q * r - 2.0 * p * q * s + p * p * t) / g2.powf(1.5)
    }

    /// Curvature along the steepest-descent line; positive where the profile is concave up.
    pub fn profile_curvature(&self) -> f64 {
        let g2 = self.gradient_sq();
        if g2 == 0.0 {
            return 0.0;
        }
        let SurfaceFit { p, q, r, s, t } = *self;
        (p * p * r + 2.0 * p * q * s + q * q * t) / (g2 * (1.0 + g2).powf(1.5))
    }
}

fn normalize_deg(a: f64) -> f64 {
    let a = a.rem_euclid(360.0);
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Surface fit at (row, col); `Ok(None)` if the 3×3 window is incomplete.
pub fn surface_fit(dem: &Raster, row: usize, col: usize) -> Result<Option<SurfaceFit>> {
    if row >= dem.rows() || col >= dem.cols() {
        return Err(Error::Bounds {
            row,
            col,
            rows: dem.rows(),
            cols: dem.cols(),
        });
    }
    Ok(fit_at(dem, row, col))
}

fn fit_at(dem: &Raster, row: usize, col: usize) -> Option<SurfaceFit> {
    if row == 0 || col == 0 || row + 1 >= dem.rows() || col + 1 >= dem.cols() {
        return None;
    }
    let z =
        |dr: isize, dc: isize| dem.get((row as isize + dr) as usize, (col as isize + dc) as usize);
    let (nw, n, ne) = (z(-1, -1)?, z(-1, 0)?, z(-1, 1)?);
    let (w, c, e) = (z(0, -1)?, z(0, 0)?, z(0, 1)?);
    let (sw, s, se) = (z(1, -1)?, z(1, 0)?, z(1, 1)?);
    let tr = dem.transform();
    let (dx, dy) = (tr.dx_m(), tr.dy_m());
    Some(SurfaceFit {
        p: (e - w) / (2.0 * dx),
        q: (n - s) / (2.0 * dy),
        r: (e - 2.0 * c + w) / (dx * dx),
        t: (n - 2.0 * c + s) / (dy * dy),
        s: (ne - nw - se + sw) / (4.0 * dx * dy),
    })
}

/// Evaluate `f` for every cell in parallel, row by row.
fn map_cells(like: &Raster, f: impl Fn(usize, usize) -> Option<f64> + Sync) -> Raster {
    let cols = like.cols();
    let mut values = vec![NODATA; like.len()];
    if cols > 0 {
        values
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(r, row)| {
                for (c, v) in row.iter_mut().enumerate() {
                    *v = f(r, c).unwrap_or(NODATA);
                }
            });
    }
    like.derive(values)
}

/// Slope in radians.
pub fn slope(dem: &Raster) -> Raster {
    map_cells(dem, |r, c| fit_at(dem, r, c).map(|f| f.slope()))
}

/// Aspect in degrees clockwise from north, `[0, 360)`; missing on flat cells.
pub fn aspect(dem: &Raster) -> Raster {
    map_cells(dem, |r, c| fit_at(dem, r, c).and_then(|f| f.aspect()))
}

pub fn plan_curvature(dem: &Raster) -> Raster {
    map_cells(dem, |r, c| fit_at(dem, r, c).map(|f| f.plan_curvature()))
}

pub fn profile_curvature(dem: &Raster) -> Raster {
    map_cells(dem, |r, c| fit_at(dem, r, c).map(|f| f.profile_curvature()))
}

/// Cell offsets whose centres lie within `radius_m` of the origin cell, origin excluded.
pub fn disk_offsets(dx: f64, dy: f64, radius_m: f64) -> Vec<(isize, isize)> {
    let rr = (radius_m / dy).floor() as isize;
    let rc = (radius_m / dx).floor() as isize;
    let r2 = radius_m * radius_m;
    let mut out = Vec::new();
    for dr in -rr..=rr {
        for dc in -rc..=rc {
            if dr == 0 && dc == 0 {
                continue;
            }
            let a = dx * dc as f64;
            let b = dy * dr as f64;
            if a * a + b * b <= r2 {
                out.push((dr, dc));
            }
        }
    }
    out
}

/// Topographic position index: elevation minus the mean of valid neighbours within `radius_m`.
pub fn tpi(dem: &Raster, radius_m: f64) -> Result<Raster> {
    let t = dem.transform();
    let (dx, dy) = (t.dx_m(), t.dy_m());
    if !(radius_m >= dx.max(dy)) {
        return Err(Error::Parameter(format!(
            "TPI radius {radius_m} m is below the cell size"
        )));
    }
    let offsets = disk_offsets(dx, dy, radius_m);
    let (rows, cols) = (dem.rows() as isize, dem.cols() as isize);
    Ok(map_cells(dem, |r, c| {
        let z = dem.get(r, c)?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for &(dr, dc) in &offsets {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr >= rows || nc >= cols {
                continue;
            }
            if let Some(v) = dem.get(nr as usize, nc as usize) {
                sum += v - z;
                n += 1;
            }
        }
        (n > 0).then(|| -(sum / n as f64))
    }))
}

/// Convergence index in `[-100, 100]` from an aspect raster.
///
/// For each neighbour with a defined aspect, the angle between its aspect and
/// the bearing from it to the centre cell is taken in `[0°, 180°]`. The mean
/// angle is mapped linearly so 0° → −100 (all flow converges on the cell) and
/// 180° → +100. Fewer than two usable neighbours give a missing cell.
pub fn convergence_index(aspect: &Raster) -> Raster {
    let tr = aspect.transform();
    let (dx, dy) = (tr.dx_m(), tr.dy_m());
    let (rows, cols) = (aspect.rows(), aspect.cols());
    let bearings: [(isize, isize, f64); 8] = std::array::from_fn(|k| {
        let (dr, dc) = crate::hydrology::D8_OFFSETS[k];
        let east = -(dc as f64) * dx;
        let north = dr as f64 * dy;
        (dr, dc, normalize_deg(east.atan2(north).to_degrees()))
    });
    map_cells(aspect, |r, c| {
        let mut total = 0.0;
        let mut n = 0usize;
        for &(dr, dc, bearing) in &bearings {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                continue;
            }
            let Some(a) = aspect.get(nr as usize, nc as usize) else {
                continue;
            };
            let mut d = (a - bearing).abs().rem_euclid(360.0);
            if d > 180.0 {
                d = 360.0 - d;
            }
            total += d;
            n += 1;
        }
        (n >= 2).then(|| (total / n as f64 - 90.0) * (100.0 / 90.0))
    })
}

/// Topographic wetness index, `ln(a / max(tan β, 0.001))`.
///
/// `acc` is in cells; the specific catchment area is `acc × cell width` in meters.
pub fn twi(acc: &Raster, slope: &Raster) -> Result<Raster> {
    acc.require_same_grid(slope, "twi")?;
    let t = acc.transform();
    let width = (t.dx_m() * t.dy_m()).sqrt();
    let values = (0..acc.len())
        .map(|i| match (acc.at(i), slope.at(i)) {
            (Some(a), Some(b)) => twi_value(a * width, b),
            _ => NODATA,
        })
        .collect();
    Ok(acc.derive(values))
}

/// Wetness index for one cell from specific catchment area and slope in radians.
pub fn twi_value(specific_area: f64, slope_rad: f64) -> f64 {
    (specific_area / slope_rad.tan().max(TWI_TAN_FLOOR)).ln()
}
