//! Raster grids, georeferencing and file formats.
//!
//! Every raster is north-up and row-major: row 0 is the northern edge and
//! columns increase eastward. Values are `f64`; a per-raster sentinel marks
//! missing cells, and non-finite values are treated as missing too.

mod ascii;
mod hgt;

pub use ascii::{read_ascii_grid, write_ascii_grid};
pub use hgt::{decode_hgt, parse_tile_name, read_hgt};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default sentinel written for missing cells in derived grids.
pub const NODATA: f64 = -9999.0;

/// Mean earth radius in meters, used for the degree → meter conversion.
const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Maps grid indices to planar coordinates.
///
/// `origin_x`/`origin_y` are the west and north edges of cell (0, 0). The
/// `meters_per_unit_*` factors convert coordinate differences into meters:
/// they are 1 for projected grids and the meters-per-degree at the tile
/// centre latitude for geographic ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoTransform {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size_x: f64,
    pub cell_size_y: f64,
    pub meters_per_unit_x: f64,
    pub meters_per_unit_y: f64,
}

impl GeoTransform {
    /// A projected (metric) transform.
    pub fn new(origin_x: f64, origin_y: f64, cell_size_x: f64, cell_size_y: f64) -> Result<Self> {
        Self::with_scale(origin_x, origin_y, cell_size_x, cell_size_y, 1.0, 1.0)
    }

    /// A geographic transform in degrees with metric factors taken at `center_lat`.
    pub fn geographic(
        origin_x: f64,
        origin_y: f64,
        cell_size_x: f64,
        cell_size_y: f64,
        center_lat: f64,
    ) -> Result<Self> {
        let (mx, my) = meters_per_degree(center_lat);
        Self::with_scale(origin_x, origin_y, cell_size_x, cell_size_y, mx, my)
    }

    pub fn with_scale(
        origin_x: f64,
        origin_y: f64,
        cell_size_x: f64,
        cell_size_y: f64,
        meters_per_unit_x: f64,
        meters_per_unit_y: f64,
    ) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(cell_size_x) || !positive(cell_size_y) {
            return Err(Error::Parameter(format!(
                "cell sizes must be positive (got {cell_size_x}, {cell_size_y}); \
                 only north-up grids are supported"
            )));
        }
        if !positive(meters_per_unit_x) || !positive(meters_per_unit_y) {
            return Err(Error::Parameter(
                "metric conversion factors must be positive".into(),
            ));
        }
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::Parameter("origin must be finite".into()));
        }
        Ok(Self {
            origin_x,
            origin_y,
            cell_size_x,
            cell_size_y,
            meters_per_unit_x,
            meters_per_unit_y,
        })
    }

    /// Cell width in meters.
    pub fn dx_m(&self) -> f64 {
        self.cell_size_x * self.meters_per_unit_x
    }

    /// Cell height in meters.
    pub fn dy_m(&self) -> f64 {
        self.cell_size_y * self.meters_per_unit_y
    }

    /// Metric distance between two points in this transform's coordinates.
    pub fn distance_m(&self, a: GeoPoint, b: GeoPoint) -> f64 {
        let ex = (a.x - b.x) * self.meters_per_unit_x;
        let ny = (a.y - b.y) * self.meters_per_unit_y;
        (ex * ex + ny * ny).sqrt()
    }

    /// True when the metric scale is the identity (planar coordinates in meters).
    pub fn is_metric(&self) -> bool {
        self.meters_per_unit_x == 1.0 && self.meters_per_unit_y == 1.0
    }
}

/// Meters per degree of longitude and latitude on a spherical earth.
pub fn meters_per_degree(lat_deg: f64) -> (f64, f64) {
    let per_deg = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    (per_deg * lat_deg.to_radians().cos(), per_deg)
}

/// A location in a raster's coordinate system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub x: f64,
    pub y: f64,
}

impl GeoPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    rows: usize,
    cols: usize,
    transform: GeoTransform,
    values: Vec<f64>,
    nodata: f64,
}

impl Raster {
    pub fn new(
        rows: usize,
        cols: usize,
        transform: GeoTransform,
        values: Vec<f64>,
        nodata: f64,
    ) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{} values supplied for a {rows}x{cols} raster",
                values.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            transform,
            values,
            nodata,
        })
    }

    pub fn filled(rows: usize, cols: usize, transform: GeoTransform, value: f64) -> Self {
        Self {
            rows,
            cols,
            transform,
            values: vec![value; rows * cols],
            nodata: NODATA,
        }
    }

    /// A raster on the same grid as `self` holding `values`, with the default sentinel.
    ///
    /// Non-finite entries in `values` are normalised to the sentinel.
    pub fn derive(&self, mut values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len(), "derived raster size");
        for v in &mut values {
            if !v.is_finite() {
                *v = NODATA;
            }
        }
        Self {
            rows: self.rows,
            cols: self.cols,
            transform: self.transform,
            values,
            nodata: NODATA,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn transform(&self) -> &GeoTransform {
        &self.transform
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    /// Raw cell values, sentinel included.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn is_valid_value(&self, v: f64) -> bool {
        v.is_finite() && v != self.nodata
    }

    #[inline]
    pub fn is_valid(&self, idx: usize) -> bool {
        self.is_valid_value(self.values[idx])
    }

    /// The value at `idx`, or `None` for missing cells.
    #[inline]
    pub fn at(&self, idx: usize) -> Option<f64> {
        let v = self.values[idx];
        self.is_valid_value(v).then_some(v)
    }

    /// The value at (row, col), or `None` for missing or out-of-range cells.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        if row < self.rows && col < self.cols {
            self.at(self.index(row, col))
        } else {
            None
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let i = self.index(row, col);
        self.values[i] = value;
    }

    pub fn valid_count(&self) -> usize {
        (0..self.len()).filter(|&i| self.is_valid(i)).count()
    }

    /// Validity of every cell, row-major.
    pub fn valid_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.is_valid(i)).collect()
    }

    pub fn same_grid(&self, other: &Raster) -> bool {
        self.rows == other.rows && self.cols == other.cols && self.transform == other.transform
    }

    pub(crate) fn require_same_grid(&self, other: &Raster, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{what}: {}x{} grid does not match {}x{} grid",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    /// Copy of `self` with every cell that is missing in `mask` set missing.
    pub fn masked_by(&self, mask: &Raster) -> Result<Raster> {
        self.require_same_grid(mask, "masked_by")?;
        let values = (0..self.len())
            .map(|i| match (self.at(i), mask.is_valid(i)) {
                (Some(v), true) => v,
                _ => NODATA,
            })
            .collect();
        Ok(self.derive(values))
    }

    pub fn cell_center(&self, row: usize, col: usize) -> Result<GeoPoint> {
        if row >= self.rows || col >= self.cols {
            return Err(Error::Bounds {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        let t = &self.transform;
        Ok(GeoPoint {
            x: t.origin_x + (col as f64 + 0.5) * t.cell_size_x,
            y: t.origin_y - (row as f64 + 0.5) * t.cell_size_y,
        })
    }

    /// Cell containing `point`; cells own their west and north edges.
    pub fn locate(&self, point: GeoPoint) -> Result<(usize, usize)> {
        let t = &self.transform;
        let fc = ((point.x - t.origin_x) / t.cell_size_x).floor();
        let fr = ((t.origin_y - point.y) / t.cell_size_y).floor();
        if !(fc >= 0.0 && fr >= 0.0 && fc < self.cols as f64 && fr < self.rows as f64) {
            return Err(Error::OutOfExtent {
                x: point.x,
                y: point.y,
            });
        }
        Ok((fr as usize, fc as usize))
    }

    /// Extent as (min_x, min_y, max_x, max_y).
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let t = &self.transform;
        (
            t.origin_x,
            t.origin_y - self.rows as f64 * t.cell_size_y,
            t.origin_x + self.cols as f64 * t.cell_size_x,
            t.origin_y,
        )
    }

    /// Reinterpret coordinates as degrees, taking metric factors at the centre latitude.
    pub fn into_geographic(mut self) -> Result<Raster> {
        let (_, south, _, north) = self.extent();
        let (mx, my) = meters_per_degree(0.5 * (south + north));
        self.transform.meters_per_unit_x = mx;
        self.transform.meters_per_unit_y = my;
        Ok(self)
    }

    /// Combine grid-aligned tiles sharing a cell size into one raster.
    ///
    /// Where tiles overlap (SRTM tiles share their edge row and column) the
    /// first valid value in tile order wins. Cells covered by no tile are missing.
    pub fn mosaic(tiles: &[Raster]) -> Result<Raster> {
        let first = tiles
            .first()
            .ok_or_else(|| Error::EmptyInput("no tiles to mosaic".into()))?;
        let t0 = first.transform;
        let aligned = |a: f64, b: f64, step: f64| {
            let k = (a - b) / step;
            (k - k.round()).abs() < 1e-6
        };
        let mut west = f64::INFINITY;
        let mut north = f64::NEG_INFINITY;
        let mut east = f64::NEG_INFINITY;
        let mut south = f64::INFINITY;
        for tile in tiles {
            let t = tile.transform;
            let same_size = (t.cell_size_x - t0.cell_size_x).abs() < 1e-9 * t0.cell_size_x
                && (t.cell_size_y - t0.cell_size_y).abs() < 1e-9 * t0.cell_size_y;
            if !same_size
                || !aligned(t.origin_x, t0.origin_x, t0.cell_size_x)
                || !aligned(t.origin_y, t0.origin_y, t0.cell_size_y)
            {
                return Err(Error::Shape("mosaic tiles are not grid-aligned".into()));
            }
            let (w, s, e, n) = tile.extent();
            west = west.min(w);
            south = south.min(s);
            east = east.max(e);
            north = north.max(n);
        }
        let cols = ((east - west) / t0.cell_size_x).round() as usize;
        let rows = ((north - south) / t0.cell_size_y).round() as usize;
        let transform = GeoTransform {
            origin_x: west,
            origin_y: north,
            ..t0
        };
        let mut out = Raster::filled(rows, cols, transform, NODATA);
        for tile in tiles {
            let t = tile.transform;
            let c0 = ((t.origin_x - west) / t0.cell_size_x).round() as usize;
            let r0 = ((north - t.origin_y) / t0.cell_size_y).round() as usize;
            for r in 0..tile.rows {
                for c in 0..tile.cols {
                    let Some(v) = tile.get(r, c) else { continue };
                    let i = out.index(r0 + r, c0 + c);
                    if !out.is_valid(i) {
                        out.values[i] = v;
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(rows: usize, cols: usize) -> Raster {
        let t = GeoTransform::new(0.0, 100.0, 30.0, 30.0).unwrap();
        Raster::filled(rows, cols, t, 0.0)
    }

    #[test]
    fn cell_center_formula() {
        let r = grid(4, 4);
        assert_eq!(r.cell_center(0, 0).unwrap(), GeoPoint::new(15.0, 85.0));
        assert_eq!(r.cell_center(1, 2).unwrap(), GeoPoint::new(75.0, 55.0));
        assert!(matches!(r.cell_center(4, 0), Err(Error::Bounds { .. })));
    }

    #[test]
    fn locate_conventions() {
        let r = grid(5, 5);
        let c = r.cell_center(2, 3).unwrap();
        assert_eq!(r.locate(c).unwrap(), (2, 3));
        assert_eq!(r.locate(GeoPoint::new(0.0, 100.0)).unwrap(), (0, 0));
        assert!(matches!(
            r.locate(GeoPoint::new(-1.0, 50.0)),
            Err(Error::OutOfExtent { .. })
        ));
        // East and south edges belong to the next (absent) cell.
        assert!(r.locate(GeoPoint::new(150.0, 50.0)).is_err());
        assert!(r.locate(GeoPoint::new(10.0, -50.0)).is_err());
    }

    #[test]
    fn rejects_non_positive_cells() {
        assert!(GeoTransform::new(0.0, 0.0, 30.0, -30.0).is_err());
        assert!(GeoTransform::new(0.0, 0.0, 0.0, 30.0).is_err());
    }

    #[test]
    fn values_length_checked() {
        let t = GeoTransform::new(0.0, 0.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            Raster::new(2, 2, t, vec![0.0; 3], NODATA),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn geographic_scale_near_equator() {
        let t = GeoTransform::geographic(-2.0, 7.0, 1.0 / 3600.0, 1.0 / 3600.0, 6.5).unwrap();
        assert!((t.dy_m() - 30.887).abs() < 0.01, "{}", t.dy_m());
        assert!(t.dx_m() < t.dy_m());
    }

    #[test]
    fn mosaic_abutting_tiles() {
        let t1 = GeoTransform::new(0.0, 60.0, 30.0, 30.0).unwrap();
        let t2 = GeoTransform::new(60.0, 60.0, 30.0, 30.0).unwrap();
        let a = Raster::new(2, 2, t1, vec![1.0, 2.0, 3.0, 4.0], NODATA).unwrap();
        let b = Raster::new(2, 2, t2, vec![5.0, 6.0, 7.0, 8.0], NODATA).unwrap();
        let m = Raster::mosaic(&[a, b]).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 4));
        assert_eq!(m.values(), &[1.0, 2.0, 5.0, 6.0, 3.0, 4.0, 7.0, 8.0]);
    }

    #[test]
    fn mosaic_rejects_misaligned() {
        let t1 = GeoTransform::new(0.0, 60.0, 30.0, 30.0).unwrap();
        let t2 = GeoTransform::new(45.0, 60.0, 30.0, 30.0).unwrap();
        let a = Raster::filled(2, 2, t1, 1.0);
        let b = Raster::filled(2, 2, t2, 1.0);
        assert!(Raster::mosaic(&[a, b]).is_err());
    }

    proptest! {
        #[test]
        fn locate_round_trip(
            ox in -1000.0f64..1000.0,
            oy in -1000.0f64..1000.0,
            cs in 0.5f64..50.0,
            fx in 0.0f64..1.0,
            fy in 0.0f64..1.0,
        ) {
            let t = GeoTransform::new(ox, oy, cs, cs).unwrap();
            let r = Raster::filled(17, 23, t, 0.0);
            let p = GeoPoint::new(ox + fx * 23.0 * cs, oy - fy * 17.0 * cs);
            if let Ok((row, col)) = r.locate(p) {
                let c = r.cell_center(row, col).unwrap();
                prop_assert!((c.x - p.x).abs() <= cs / 2.0 + 1e-9);
                prop_assert!((c.y - p.y).abs() <= cs / 2.0 + 1e-9);
            }
        }

        #[test]
        fn center_locates_to_itself(row in 0usize..17, col in 0usize..23, cs in 0.001f64..100.0) {
            let t = GeoTransform::new(-3.0, 8.0, cs, cs).unwrap();
            let r = Raster::filled(17, 23, t, 0.0);
            let c = r.cell_center(row, col).unwrap();
            prop_assert_eq!(r.locate(c).unwrap(), (row, col));
        }
    }
}
