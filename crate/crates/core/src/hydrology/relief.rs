//! Channel and ridge networks and the altitude measures relative to them.

use super::distance::nearest_mask_cells;
use crate::error::{Error, Result};
use crate::raster::{Raster, NODATA};

/// Cells whose contributing area reaches `threshold_cells`.
pub fn extract_channels(acc: &Raster, threshold_cells: f64) -> Result<Raster> {
    if !(threshold_cells >= 1.0) {
        return Err(Error::Parameter(format!(
            "channel threshold must be at least 1 cell, got {threshold_cells}"
        )));
    }
    Ok(binary(acc, |a| a >= threshold_cells))
}

/// Cells without upslope contributors.
pub fn extract_ridges(acc: &Raster) -> Raster {
    binary(acc, |a| a == 1.0)
}

fn binary(acc: &Raster, pred: impl Fn(f64) -> bool) -> Raster {
    let values = (0..acc.len())
        .map(|i| match acc.at(i) {
            Some(a) if pred(a) => 1.0,
            Some(_) => 0.0,
            None => NODATA,
        })
        .collect();
    acc.derive(values)
}

/// Height above the nearest channel cell, clamped at zero.
pub fn altitude_above_channel(dem: &Raster, channels: &Raster) -> Result<Raster> {
    relative_altitude(dem, channels, "channel", |z, base| z - base)
}

/// Height below the nearest ridge cell, clamped at zero.
pub fn altitude_below_ridge(dem: &Raster, ridges: &Raster) -> Result<Raster> {
    relative_altitude(dem, ridges, "ridge", |z, crest| crest - z)
}

fn relative_altitude(
    dem: &Raster,
    mask: &Raster,
    what: &'static str,
    offset: impl Fn(f64, f64) -> f64,
) -> Result<Raster> {
    dem.require_same_grid(mask, what)?;
    // Sites only count where the DEM is defined too.
    let sites = (0..mask.len())
        .map(|i| match (mask.at(i), dem.at(i)) {
            (Some(m), Some(_)) if m != 0.0 => 1.0,
            (Some(_), Some(_)) => 0.0,
            _ => NODATA,
        })
        .collect();
    let sites = mask.derive(sites);
    let key: Vec<f64> = (0..dem.len())
        .map(|i| dem.at(i).unwrap_or(f64::INFINITY))
        .collect();
    let nearest = nearest_mask_cells(&sites, Some(&key)).map_err(|e| match e {
        Error::EmptyMask(_) => Error::EmptyMask(what),
        other => other,
    })?;
    let values = (0..dem.len())
        .map(|i| match (dem.at(i), sites.is_valid(i)) {
            (Some(z), true) => offset(z, key[nearest[i].site]).max(0.0),
            _ => NODATA,
        })
        .collect();
    Ok(dem.derive(values))
}

/// Relative slope position, `aacl / (aacl + abrl)`; 0 where both vanish.
pub fn relative_slope_position(aacl: &Raster, abrl: &Raster) -> Result<Raster> {
    aacl.require_same_grid(abrl, "relative_slope_position")?;
    let values = (0..aacl.len())
        .map(|i| match (aacl.at(i), abrl.at(i)) {
            (Some(a), Some(b)) if a + b > 0.0 => a / (a + b),
            (Some(_), Some(_)) => 0.0,
            _ => NODATA,
        })
        .collect();
    Ok(aacl.derive(values))
}
