//! Labelled feature tables, raster sampling at points and the longitude split.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{GeoPoint, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub point: GeoPoint,
    pub positive: bool,
}

impl LabeledPoint {
    pub fn new(point: GeoPoint, positive: bool) -> Self {
        Self { point, positive }
    }
}

/// Points with their feature vectors, columns aligned to `names`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    names: Vec<String>,
    points: Vec<LabeledPoint>,
    rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, points: Vec<LabeledPoint>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != rows.len() {
            return Err(Error::Shape(format!(
                "{} points but {} feature rows",
                points.len(),
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::Shape(format!(
                    "row {i} has {} values for {} features",
                    row.len(),
                    names.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Shape(format!("row {i} contains a non-finite value")));
            }
        }
        Ok(Self {
            names,
            points,
            rows,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.positive).collect()
    }

    pub fn n_positive(&self) -> usize {
        self.points.iter().filter(|p| p.positive).count()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Keep only the named columns, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_index(n.as_ref())
                    .ok_or_else(|| Error::Config(format!("unknown feature `{}`", n.as_ref())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            names: names.iter().map(|n| n.as_ref().to_string()).collect(),
            points: self.points.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
        })
    }

    /// Rows at the given indices, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Format(e.to_string());
        let mut header = vec!["x".to_string(), "y".to_string(), "label".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (p, row) in self.points.iter().zip(&self.rows) {
            let mut rec = vec![
                p.point.x.to_string(),
                p.point.y.to_string(),
                u8::from(p.positive).to_string(),
            ];
            rec.extend(row.iter().map(f64::to_string));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<FeatureTable> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        let fixed: Vec<&str> = headers.iter().take(3).collect();
        if fixed != ["x", "y", "label"] {
            return Err(Error::parse(1, "header must start with x,y,label"));
        }
        let names: Vec<String> = headers.iter().skip(3).map(str::to_string).collect();
        let mut points = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(line, format!("invalid number {s:?}")))
            };
            let positive = match &rec[2] {
                "1" => true,
                "0" => false,
                other => return Err(Error::parse(line, format!("invalid label {other:?}"))),
            };
            points.push(LabeledPoint::new(
                GeoPoint::new(num(&rec[0])?, num(&rec[1])?),
                positive,
            ));
            rows.push(rec.iter().skip(3).map(num).collect::<Result<Vec<_>>>()?);
        }
        FeatureTable::new(names, points, rows)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<FeatureTable> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        FeatureTable::read_csv(std::io::BufReader::new(f))
    }
}

/// Rows dropped while sampling rasters at points.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub outside: usize,
    pub nodata: usize,
}

/// Sample each named raster at every point.
///
/// Points outside the grid, or over a missing value in any raster, are
/// dropped and counted.
pub fn extract_features(
    points: &[LabeledPoint],
    rasters: &[(&str, &Raster)],
) -> Result<(FeatureTable, ExtractStats)> {
    let Some((_, first)) = rasters.first() else {
        return Err(Error::Config("no feature rasters supplied".into()));
    };
    for (name, r) in rasters {
        first.require_same_grid(r, name)?;
    }
    let mut stats = ExtractStats::default();
    let mut kept = Vec::new();
    let mut rows = Vec::new();
    for lp in points {
        let Ok((r, c)) = first.locate(lp.point) else {
            stats.outside += 1;
            continue;
        };
        let row: Option<Vec<f64>> = rasters.iter().map(|(_, ras)| ras.get(r, c)).collect();
        match row {
            Some(row) => {
                kept.push(*lp);
                rows.push(row);
            }
            None => stats.nodata += 1,
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!(
            "all {} points dropped ({} outside extent, {} over missing values)",
            points.len(),
            stats.outside,
            stats.nodata
        )));
    }
    let names = rasters.iter().map(|(n, _)| n.to_string()).collect();
    Ok((FeatureTable::new(names, kept, rows)?, stats))
}

/// Nearest-rank percentile of `values` (0 < p ≤ 100).
pub fn nearest_rank(values: &[f64], percentile: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile of an empty list".into()));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::Parameter(format!(
            "percentile {percentile} outside (0, 100]"
        )));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * v.len() as f64).ceil() as usize;
    Ok(v[rank.clamp(1, v.len()) - 1])
}

#[derive(Debug, Clone)]
pub struct LongitudeSplit {
    pub threshold: f64,
    pub train: FeatureTable,
    pub test: FeatureTable,
}

/// Rows west of the x-percentile train; the rest test.
pub fn split_by_longitude(table: &FeatureTable, percentile: f64) -> Result<LongitudeSplit> {
    let xs: Vec<f64> = table.points().iter().map(|p| p.point.x).collect();
    let threshold = nearest_rank(&xs, percentile)?;
    let (train, test): (Vec<usize>, Vec<usize>) =
        (0..table.len()).partition(|&i| xs[i] < threshold);
    if train.is_empty() || test.is_empty() {
        return Err(Error::Split(format!(
            "threshold x = {threshold} leaves {} train and {} test rows",
            train.len(),
            test.len()
        )));
    }
    Ok(LongitudeSplit {
        threshold,
        train: table.subset(&train),
        test: table.subset(&test),
    })
}
