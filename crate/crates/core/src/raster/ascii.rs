//! ESRI ASCII grid reader and writer.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{GeoTransform, Raster};
use crate::error::{Error, Result};

const REQUIRED: [&str; 4] = ["ncols", "nrows", "cellsize", "nodata_value"];

pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<Raster> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ascii_grid(&text)
}

pub(crate) fn parse_ascii_grid(text: &str) -> Result<Raster> {
    let mut header: HashMap<String, (usize, String)> = HashMap::new();
    let mut lines = text.lines().enumerate().peekable();
    while let Some(&(no, line)) = lines.peek() {
        let mut parts = line.split_whitespace();
        let Some(key) = parts.next() else {
            lines.next();
            continue;
        };
        if !key.starts_with(|c: char| c.is_ascii_alphabetic()) {
            break;
        }
        let value = parts
            .next()
            .ok_or_else(|| Error::parse(no + 1, format!("header key `{key}` has no value")))?;
        header.insert(key.to_ascii_lowercase(), (no + 1, value.to_string()));
        lines.next();
    }

    // `cellsize` may be replaced by the common dx/dy extension.
    let has_dxdy = header.contains_key("dx") && header.contains_key("dy");
    for key in REQUIRED {
        if key == "cellsize" && has_dxdy {
            continue;
        }
        if !header.contains_key(key) {
            return Err(Error::MissingKey(canonical(key).to_string()));
        }
    }
    let num = |key: &str| -> Result<f64> {
        let (line, raw) = &header[key];
        raw.parse::<f64>().map_err(|_| {
            Error::parse(
                *line,
                format!("`{}` is not a number: {raw}", canonical(key)),
            )
        })
    };
    let count = |key: &str| -> Result<usize> {
        let (line, raw) = &header[key];
        raw.parse::<usize>()
            .map_err(|_| Error::parse(*line, format!("`{}` is not a count: {raw}", canonical(key))))
    };
    let cols = count("ncols")?;
    let rows = count("nrows")?;
    let (csx, csy) = if has_dxdy {
        (num("dx")?, num("dy")?)
    } else {
        let c = num("cellsize")?;
        (c, c)
    };
    let west = match (
        header.contains_key("xllcorner"),
        header.contains_key("xllcenter"),
    ) {
        (true, _) => num("xllcorner")?,
        (false, true) => num("xllcenter")? - 0.5 * csx,
        _ => return Err(Error::MissingKey("xllcorner".into())),
    };
    let south = match (
        header.contains_key("yllcorner"),
        header.contains_key("yllcenter"),
    ) {
        (true, _) => num("yllcorner")?,
        (false, true) => num("yllcenter")? - 0.5 * csy,
        _ => return Err(Error::MissingKey("yllcorner".into())),
    };
    let nodata = num("nodata_value")?;

    let mut values = Vec::with_capacity(rows * cols);
    for (no, line) in lines {
        for tok in line.split_whitespace() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| Error::parse(no + 1, format!("bad cell value `{tok}`")))?;
            values.push(v);
        }
    }
    if values.len() != rows * cols {
        return Err(Error::parse(
            text.lines().count(),
            format!(
                "expected {} cell values, found {}",
                rows * cols,
                values.len()
            ),
        ));
    }
    let transform = GeoTransform::new(west, south + rows as f64 * csy, csx, csy)?;
    Raster::new(rows, cols, transform, values, nodata)
}

fn canonical(key: &str) -> &str {
    match key {
        "nodata_value" => "NODATA_value",
        other => other,
    }
}

pub fn write_ascii_grid(raster: &Raster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = format_ascii_grid(raster)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_ascii_grid(raster: &Raster) -> Result<String> {
    if raster.rows() == 0 || raster.cols() == 0 {
        return Err(Error::EmptyInput(
            "cannot write a raster with no cells".into(),
        ));
    }
    let t = raster.transform();
    let mut out = String::with_capacity(raster.len() * 8 + 128);
    let south = t.origin_y - raster.rows() as f64 * t.cell_size_y;
    let _ = writeln!(out, "ncols {}", raster.cols());
    let _ = writeln!(out, "nrows {}", raster.rows());
    let _ = writeln!(out, "xllcorner {}", t.origin_x);
    let _ = writeln!(out, "yllcorner {south}");
    if t.cell_size_x == t.cell_size_y {
        let _ = writeln!(out, "cellsize {}", t.cell_size_x);
    } else {
        let _ = writeln!(out, "dx {}", t.cell_size_x);
        let _ = writeln!(out, "dy {}", t.cell_size_y);
    }
    let _ = writeln!(out, "NODATA_value {}", raster.nodata());
    for row in raster.values().chunks(raster.cols()) {
        let mut first = true;
        for &v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            let v = if raster.is_valid_value(v) {
                v
            } else {
                raster.nodata()
            };
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    Ok(out)
}
