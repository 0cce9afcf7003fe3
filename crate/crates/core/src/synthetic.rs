//! Synthetic terrain and survey generator for end-to-end runs.
//!
//! The terrain is a sum of Gaussian-smoothed noise octaves, sink-filled so
//! it drains, with bowls carved into it. Ground truth wet cells are closed depressions plus
//! low-TPI cells close to the channel network; the survey draws positives
//! from them and places empty chunks away from them, each with a fraction of
//! deliberately wrong records.

use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hydrology::{
    closed_depressions, d8_flow_direction, distance_to_mask, extract_channels, fill_sinks,
    flow_accumulation,
};
use crate::raster::{write_ascii_grid, GeoPoint, GeoTransform, Raster};
use crate::sampling::{Category, Chunk, SurveyRecord};
use crate::terrain::tpi;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub size: usize,
    pub cell: f64,
    /// Gaussian sigma (cells) and amplitude (m) of each noise octave.
    pub octaves: [(f64, f64); 3],
    /// Elevation drop per meter eastward.
    pub tilt: f64,
    /// Fill gradient applied to the noise field before bowls are carved, so
    /// the only closed depressions are the bowls.
    pub base_fill: f64,
    pub bowls: usize,
    pub bowl_radius: (f64, f64),
    pub bowl_depth: (f64, f64),
    /// Fill depth (m) above which a cell counts as a depression.
    pub depression_depth: f64,
    pub tpi_radius: f64,
    /// Wet cells off depressions: within this distance (m) of a channel...
    pub channel_distance: f64,
    /// ...and with TPI below this (m).
    pub tpi_below: f64,
    pub channel_threshold: f64,
    pub positives: usize,
    /// Records of non-natural categories scattered at random.
    pub artificial: usize,
    pub chunks: usize,
    pub chunk_size: f64,
    /// Fraction of positives placed off the wet cells, and of chunks placed
    /// without checking for wet cells.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            size: 512,
            cell: 30.0,
            octaves: [(24.0, 40.0), (8.0, 8.0), (2.5, 1.5)],
            tilt: 0.0,
            base_fill: 0.01,
            bowls: 120,
            bowl_radius: (3.0, 8.0),
            bowl_depth: (3.0, 8.0),
            depression_depth: 0.05,
            tpi_radius: 500.0,
            channel_distance: 60.0,
            tpi_below: -1.0,
            channel_threshold: 1112.0,
            positives: 3000,
            artificial: 150,
            chunks: 600,
            chunk_size: 100.0,
            label_noise: 0.1,
            seed: 7,
        }
    }
}

/// A generated terrain with its survey.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub dem: Raster,
    /// 1 on wet cells, 0 elsewhere.
    pub truth: Raster,
    pub records: Vec<SurveyRecord>,
    pub chunks: Vec<Chunk>,
}

/// Files written by [`Scenario::write`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFiles {
    pub dem: PathBuf,
    pub positives: PathBuf,
    pub chunks: PathBuf,
    pub truth: PathBuf,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = (3.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Separable Gaussian blur with mirrored edges.
fn blur(values: &[f64], size: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let half = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for r in 0..size {
        for c in 0..size {
            tmp[r * size + c] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * values[r * size + reflect(c as isize + j as isize - half, size)])
                .sum();
        }
    }
    let mut out = vec![0.0; values.len()];
    for r in 0..size {
        for c in 0..size {
            out[r * size + c] = k
                .iter()
                .enumerate()
                .map(|(j, w)| w * tmp[reflect(r as isize + j as isize - half, size) * size + c])
                .sum();
        }
    }
    out
}

fn standardize(v: &mut [f64]) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    for x in v.iter_mut() {
        *x = if sd > 0.0 { (*x - mean) / sd } else { 0.0 };
    }
}

/// Synthetic elevation model on a metric grid with its west edge at x = 0.
pub fn synthetic_dem(p: &SynthParams, rng: &mut ChaCha8Rng) -> Result<Raster> {
    let n = p.size;
    if n < 8 || !(p.cell > 0.0) {
        return Err(Error::Parameter(format!(
            "synthetic grid needs size >= 8 and a positive cell size, got {n} x {}",
            p.cell
        )));
    }
    let mut z = vec![0.0; n * n];
    for &(sigma, amp) in &p.octaves {
        let noise: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut field = blur(&noise, n, sigma);
        standardize(&mut field);
        for (zi, f) in z.iter_mut().zip(&field) {
            *zi += amp * f;
        }
    }
    for r in 0..n {
        for c in 0..n {
            z[r * n + c] += 200.0 - p.tilt * p.cell * c as f64;
        }
    }
    let t = GeoTransform::new(0.0, n as f64 * p.cell, p.cell, p.cell)?;
    let base = Raster::new(n, n, t, z, crate::NODATA)?;
    let mut z = fill_sinks(&base, p.base_fill)?.into_values();
    for _ in 0..p.bowls {
        let radius = rng.random_range(p.bowl_radius.0..=p.bowl_radius.1);
        let depth = rng.random_range(p.bowl_depth.0..=p.bowl_depth.1);
        let margin = radius.ceil() as usize + 2;
        let cr = rng.random_range(margin..n - margin);
        let cc = rng.random_range(margin..n - margin);
        let reach = radius.ceil() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let d = ((dr * dr + dc * dc) as f64).sqrt();
                if d < radius {
                    let i = (cr as isize + dr) as usize * n + (cc as isize + dc) as usize;
                    z[i] -= depth * (1.0 - (d / radius).powi(2));
                }
            }
        }
    }
    Raster::new(n, n, t, z, crate::NODATA)
}

/// Ground-truth wet cells of `dem` as a 0/1 raster.
pub fn wet_cells(dem: &Raster, p: &SynthParams) -> Result<Raster> {
    let pure = fill_sinks(dem, 0.0)?;
    let depth = closed_depressions(dem, &pure)?;
    let graded = fill_sinks(dem, 0.01)?;
    let acc = flow_accumulation(&d8_flow_direction(&graded))?;
    let cnd = distance_to_mask(&extract_channels(&acc, p.channel_threshold)?)?;
    let position = tpi(dem, p.tpi_radius)?;
    let values = (0..dem.len())
        .map(|i| {
            let deep = depth.at(i).is_some_and(|d| d > p.depression_depth);
            let low = cnd.at(i).is_some_and(|d| d <= p.channel_distance)
                && position.at(i).is_some_and(|t| t < p.tpi_below);
            f64::from(u8::from(deep || low))
        })
        .collect();
    Ok(dem.derive(values))
}

const NATURAL: [Category; 5] = [
    Category::Swamp,
    Category::Puddle,
    Category::Pool,
    Category::Pond,
    Category::Fringe,
];

const ARTIFICIAL: [Category; 5] = [
    Category::Tracks,
    Category::Footprint,
    Category::DrainageCanal,
    Category::Construction,
    Category::Other,
];

fn center(dem: &Raster, i: usize) -> GeoPoint {
    dem.cell_center(i / dem.cols(), i % dem.cols())
        .expect("index within grid")
}

impl Scenario {
    pub fn generate(p: &SynthParams) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let dem = synthetic_dem(p, &mut rng)?;
        let truth = wet_cells(&dem, p)?;
        let wet: Vec<usize> = (0..truth.len())
            .filter(|&i| truth.at(i) == Some(1.0))
            .collect();
        let dry: Vec<usize> = (0..truth.len())
            .filter(|&i| truth.at(i) == Some(0.0))
            .collect();
        if wet.is_empty() || dry.is_empty() {
            return Err(Error::Sampling(
                "synthetic terrain has no wet or no dry cells".into(),
            ));
        }

        let take = p.positives.min(wet.len());
        let mut records = Vec::with_capacity(take + p.artificial);
        for i in sample(&mut rng, wet.len(), take) {
            let cell = if rng.random_bool(p.label_noise) {
                dry[rng.random_range(0..dry.len())]
            } else {
                wet[i]
            };
            records.push(SurveyRecord {
                point: center(&dem, cell),
                category: NATURAL[rng.random_range(0..NATURAL.len())],
            });
        }
        for _ in 0..p.artificial {
            let cell = rng.random_range(0..dem.len());
            records.push(SurveyRecord {
                point: center(&dem, cell),
                category: ARTIFICIAL[rng.random_range(0..ARTIFICIAL.len())],
            });
        }

        let (x0, y0, x1, y1) = dem.extent();
        let s = p.chunk_size;
        let mut chunks = Vec::with_capacity(p.chunks);
        let mut attempts = 0usize;
        while chunks.len() < p.chunks {
            attempts += 1;
            if attempts > 1000 * p.chunks.max(1) {
                return Err(Error::Sampling("could not place enough dry chunks".into()));
            }
            let min_x = x0 + (rng.random_range(0.0..(x1 - x0 - s)) / s).floor() * s;
            let min_y = y0 + (rng.random_range(0.0..(y1 - y0 - s)) / s).floor() * s;
            let chunk = Chunk::new(min_x, min_y, min_x + s, min_y + s)?;
            let noisy = rng.random_bool(p.label_noise);
            if noisy || !touches_wet(&chunk, &truth) {
                chunks.push(chunk);
            }
        }
        Ok(Scenario {
            dem,
            truth,
            records,
            chunks,
        })
    }

    /// Write `dem.asc`, `truth.asc`, `positives.csv` and `chunks.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<ScenarioFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files = ScenarioFiles {
            dem: dir.join("dem.asc"),
            positives: dir.join("positives.csv"),
            chunks: dir.join("chunks.csv"),
            truth: dir.join("truth.asc"),
        };
        write_ascii_grid(&self.dem, &files.dem)?;
        write_ascii_grid(&self.truth, &files.truth)?;

        let mut w = csv_writer(&files.positives)?;
        write_row(&mut w, &files.positives, &["x", "y", "category"])?;
        for r in &self.records {
            let row = [
                r.point.x.to_string(),
                r.point.y.to_string(),
                r.category.as_str().into(),
            ];
            write_row(&mut w, &files.positives, &row)?;
        }
        w.flush().map_err(|e| Error::io(&files.positives, e))?;

        let mut w = csv_writer(&files.chunks)?;
        write_row(&mut w, &files.chunks, &["min_x", "min_y", "max_x", "max_y"])?;
        for c in &self.chunks {
            let row = [c.min_x, c.min_y, c.max_x, c.max_y].map(|v| v.to_string());
            write_row(&mut w, &files.chunks, &row)?;
        }
        w.flush().map_err(|e| Error::io(&files.chunks, e))?;
        Ok(files)
    }
}

fn touches_wet(chunk: &Chunk, truth: &Raster) -> bool {
    let t = truth.transform();
    let c0 = ((chunk.min_x - t.origin_x) / t.cell_size_x)
        .floor()
        .max(0.0) as usize;
    let r0 = ((t.origin_y - chunk.max_y) / t.cell_size_y)
        .floor()
        .max(0.0) as usize;
    let c1 = (((chunk.max_x - t.origin_x) / t.cell_size_x).ceil() as usize).min(truth.cols());
    let r1 = (((t.origin_y - chunk.min_y) / t.cell_size_y).ceil() as usize).min(truth.rows());
    (r0..r1).any(|r| {
        (c0..c1).any(|c| {
            truth.get(r, c) == Some(1.0) && truth.cell_center(r, c).is_ok_and(|p| chunk.contains(p))
        })
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn write_row<S: AsRef<[u8]>>(
    w: &mut csv::Writer<std::fs::File>,
    path: &Path,
    row: &[S],
) -> Result<()> {
    w.write_record(row)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::load_survey;

    fn small() -> SynthParams {
        SynthParams {
            size: 64,
            octaves: [(6.0, 10.0), (2.0, 2.0), (1.0, 0.5)],
            bowls: 6,
            tpi_radius: 150.0,
            channel_threshold: 50.0,
            positives: 80,
            artificial: 10,
            chunks: 20,
            ..Default::default()
        }
    }

    #[test]
    fn kernel_normalised_and_symmetric() {
        let k = gaussian_kernel(2.0);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..k.len() {
            assert_eq!(k[i], k[k.len() - 1 - i]);
        }
    }

    #[test]
    fn reflect_indices() {
        assert_eq!(reflect(-1, 5), 0);
        assert_eq!(reflect(-2, 5), 1);
        assert_eq!(reflect(5, 5), 4);
        assert_eq!(reflect(6, 5), 3);
        assert_eq!(reflect(2, 5), 2);
    }

    #[test]
    fn same_seed_same_scenario() {
        let a = Scenario::generate(&small()).unwrap();
        let b = Scenario::generate(&small()).unwrap();
        assert_eq!(a.dem, b.dem);
        assert_eq!(a.records, b.records);
        assert_eq!(a.chunks, b.chunks);
    }

    #[test]
    fn files_round_trip() {
        let s = Scenario::generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = s.write(dir.path()).unwrap();
        let (records, chunks) = load_survey(&files.positives, &files.chunks).unwrap();
        assert_eq!(records, s.records);
        assert_eq!(chunks, s.chunks);
        let dem = crate::raster::read_ascii_grid(&files.dem).unwrap();
        assert_eq!(dem.values(), s.dem.values());
    }

    #[test]
    fn clean_chunks_avoid_wet_cells() {
        let p = SynthParams {
            label_noise: 0.0,
            ..small()
        };
        let s = Scenario::generate(&p).unwrap();
        for c in &s.chunks {
            assert!(!touches_wet(c, &s.truth));
        }
        for r in s.records.iter().filter(|r| r.category.is_natural()) {
            let (row, col) = s.truth.locate(r.point).unwrap();
            assert_eq!(s.truth.get(row, col), Some(1.0));
        }
    }
}
