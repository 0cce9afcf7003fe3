//! SRTM `.hgt` tiles: N×N big-endian `i16` samples, north-west corner first.

use std::path::Path;

use byteorder::{BigEndian, ByteOrder};

use super::{GeoTransform, Raster, NODATA};
use crate::error::{Error, Result};

/// SRTM void marker.
const HGT_VOID: i16 = i16::MIN;

/// Read an SRTM tile. `arc_seconds` must be 1 (3601² samples) or 3 (1201²).
///
/// The tile's south-west corner comes from its file name (`N06W002.hgt`).
/// Samples sit on integer-degree lines, so the grid origin is shifted half a
/// cell north-west of the tile corner.
pub fn read_hgt(path: impl AsRef<Path>, arc_seconds: u32) -> Result<Raster> {
    let path = path.as_ref();
    let n = match arc_seconds {
        1 => 3601,
        3 => 1201,
        other => {
            return Err(Error::Parameter(format!(
                "arc_seconds must be 1 or 3, got {other}"
            )))
        }
    };
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let (lat, lon) = parse_tile_name(&stem)?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 2 * n * n {
        return Err(Error::MalformedTile {
            path: path.to_path_buf(),
            reason: format!("{} bytes, expected {} for {n}x{n}", bytes.len(), 2 * n * n),
        });
    }
    let cell = 1.0 / (n - 1) as f64;
    let transform = GeoTransform::geographic(
        lon as f64 - 0.5 * cell,
        (lat + 1) as f64 + 0.5 * cell,
        cell,
        cell,
        lat as f64 + 0.5,
    )?;
    Raster::new(n, n, transform, decode_hgt(&bytes), NODATA)
}

/// Decode big-endian samples; voids become [`NODATA`].
pub fn decode_hgt(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(2)
        .map(|pair| match BigEndian::read_i16(pair) {
            HGT_VOID => NODATA,
            v => v as f64,
        })
        .collect()
}

/// Parse `N06W002` style names into the south-west corner (lat, lon) in degrees.
pub fn parse_tile_name(name: &str) -> Result<(i32, i32)> {
    let bad = || Error::MissingGeoreference(name.to_string());
    let upper = name.to_ascii_uppercase();
    let b = upper.as_bytes();
    if b.len() != 7 {
        return Err(bad());
    }
    let lat_sign = match b[0] {
        b'N' => 1,
        b'S' => -1,
        _ => return Err(bad()),
    };
    let lon_sign = match b[3] {
        b'E' => 1,
        b'W' => -1,
        _ => return Err(bad()),
    };
    let lat: i32 = upper[1..3].parse().map_err(|_| bad())?;
    let lon: i32 = upper[4..7].parse().map_err(|_| bad())?;
    if lat > 90 || lon > 180 {
        return Err(bad());
    }
    Ok((lat_sign * lat, lon_sign * lon))
}
