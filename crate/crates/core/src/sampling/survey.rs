//! Field-survey inputs: categorised water-source points and negative chunks.

use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::raster::GeoPoint;

/// Survey category of an observed water source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    Tracks,
    Swamp,
    Puddle,
    Pool,
    Pond,
    Fringe,
    Footprint,
    Construction,
    DrainageCanal,
    Other,
}

impl Category {
    pub const ALL: [Category; 10] = [
        Category::Tracks,
        Category::Swamp,
        Category::Puddle,
        Category::Pool,
        Category::Pond,
        Category::Fringe,
        Category::Footprint,
        Category::Construction,
        Category::DrainageCanal,
        Category::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Tracks => "tracks",
            Category::Swamp => "swamp",
            Category::Puddle => "puddle",
            Category::Pool => "pool",
            Category::Pond => "pond",
            Category::Fringe => "fringe",
            Category::Footprint => "footprint",
            Category::Construction => "construction",
            Category::DrainageCanal => "drainage_canal",
            Category::Other => "other",
        }
    }

    /// Natural water formations.
    pub fn is_natural(self) -> bool {
        matches!(
            self,
            Category::Swamp | Category::Puddle | Category::Pool | Category::Pond | Category::Fringe
        )
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_lowercase();
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == wanted)
            .ok_or_else(|| format!("unknown category {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurveyRecord {
    pub point: GeoPoint,
    pub category: Category,
}

/// Axis-aligned rectangle surveyed and found free of water sources.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct Chunk {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Chunk {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self> {
        let c = Chunk {
            min_x,
            min_y,
            max_x,
            max_y,
        };
        c.validate().map_err(Error::Parameter)?;
        Ok(c)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        let finite = [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.max_x <= self.min_x || self.max_y <= self.min_y {
            return Err(format!("degenerate chunk {self:?}"));
        }
        Ok(())
    }

    /// Half-open membership: west and south edges inside, east and north outside.
    pub fn contains(&self, p: GeoPoint) -> bool {
        p.x >= self.min_x && p.x < self.max_x && p.y >= self.min_y && p.y < self.max_y
    }
}

#[derive(Deserialize)]
struct RawPoint {
    x: f64,
    y: f64,
    category: String,
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

/// Read typed rows, reporting failures with their line numbers.
fn read_rows<T, R, F>(input: R, expected: &[&str], mut convert: F) -> Result<Vec<T>>
where
    R: Read,
    F: FnMut(csv::StringRecord, &csv::StringRecord) -> std::result::Result<T, String>,
{
    let mut rdr = reader(input);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    for key in expected {
        if !headers.iter().any(|h| h == *key) {
            return Err(Error::parse(1, format!("header lacks column `{key}`")));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push(convert(rec, &headers).map_err(|m| Error::parse(line, m))?);
    }
    Ok(out)
}

pub fn parse_positives<R: Read>(input: R) -> Result<Vec<SurveyRecord>> {
    read_rows(input, &["x", "y", "category"], |rec, headers| {
        let raw: RawPoint = rec.deserialize(Some(headers)).map_err(|e| e.to_string())?;
        if !(raw.x.is_finite() && raw.y.is_finite()) {
            return Err("non-finite coordinate".into());
        }
        Ok(SurveyRecord {
            point: GeoPoint::new(raw.x, raw.y),
            category: raw.category.parse()?,
        })
    })
}

pub fn parse_chunks<R: Read>(input: R) -> Result<Vec<Chunk>> {
    read_rows(
        input,
        &["min_x", "min_y", "max_x", "max_y"],
        |rec, headers| {
            let chunk: Chunk = rec.deserialize(Some(headers)).map_err(|e| e.to_string())?;
            chunk.validate()?;
            Ok(chunk)
        },
    )
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Load the positives file (`x,y,category`) and the chunks file (`min_x,min_y,max_x,max_y`).
pub fn load_survey(positives: &Path, chunks: &Path) -> Result<(Vec<SurveyRecord>, Vec<Chunk>)> {
    Ok((
        parse_positives(open(positives)?)?,
        parse_chunks(open(chunks)?)?,
    ))
}

/// Which survey categories count as positives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, Deserialize)]
pub enum Variant {
    /// Natural formations only.
    #[default]
    A,
    /// Natural formations plus canals, tracks and footprints.
    B,
}

impl Variant {
    pub fn keeps(self, c: Category) -> bool {
        match self {
            Variant::A => c.is_natural(),
            Variant::B => {
                c.is_natural()
                    || matches!(
                        c,
                        Category::DrainageCanal | Category::Tracks | Category::Footprint
                    )
            }
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Variant::A),
            "B" | "b" => Ok(Variant::B),
            other => Err(Error::Config(format!("unknown dataset variant {other:?}"))),
        }
    }
}

pub fn select_positives(records: &[SurveyRecord], variant: Variant) -> Vec<GeoPoint> {
    records
        .iter()
        .filter(|r| variant.keeps(r.category))
        .map(|r| r.point)
        .collect()
}
