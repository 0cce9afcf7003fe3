//! Negative points drawn from surveyed-empty chunks under distance constraints.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::survey::Chunk;
use crate::error::{Error, Result};
use crate::raster::{GeoPoint, GeoTransform, Raster};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NegativeParams {
    /// Minimum distance in meters from any positive point.
    pub min_pos_dist: f64,
    /// Minimum distance in meters between accepted negatives.
    pub min_neg_dist: f64,
    pub seed: u64,
}

impl Default for NegativeParams {
    fn default() -> Self {
        Self {
            min_pos_dist: 100.0,
            min_neg_dist: 30.0,
            seed: 0,
        }
    }
}

/// Bucketed point set for "anything closer than d?" queries.
struct Proximity<'a> {
    transform: &'a GeoTransform,
    min_dist: f64,
    bucket: f64,
    cells: HashMap<(i64, i64), Vec<GeoPoint>>,
}

impl<'a> Proximity<'a> {
    fn new(transform: &'a GeoTransform, min_dist: f64) -> Self {
        Self {
            transform,
            min_dist,
            bucket: min_dist * (1.0 + 1e-9),
            cells: HashMap::new(),
        }
    }

    fn key(&self, p: GeoPoint) -> (i64, i64) {
        let t = self.transform;
        (
            (p.x * t.meters_per_unit_x / self.bucket).floor() as i64,
            (p.y * t.meters_per_unit_y / self.bucket).floor() as i64,
        )
    }

    fn insert(&mut self, p: GeoPoint) {
        if self.min_dist > 0.0 {
            let k = self.key(p);
            self.cells.entry(k).or_default().push(p);
        }
    }

    fn too_close(&self, p: GeoPoint) -> bool {
        if self.min_dist <= 0.0 {
            return false;
        }
        let (kx, ky) = self.key(p);
        (kx - 1..=kx + 1).any(|x| {
            (ky - 1..=ky + 1).any(|y| {
                self.cells.get(&(x, y)).is_some_and(|pts| {
                    pts.iter()
                        .any(|&q| self.transform.distance_m(p, q) < self.min_dist)
                })
            })
        })
    }
}

/// Valid DEM cell centres inside any chunk, as sorted unique cell indices.
pub fn chunk_candidates(chunks: &[Chunk], dem: &Raster) -> Vec<usize> {
    let t = dem.transform();
    let (rows, cols) = (dem.rows() as f64, dem.cols() as f64);
    let mut out = BTreeSet::new();
    for ch in chunks {
        let c0 = ((ch.min_x - t.origin_x) / t.cell_size_x - 1.0)
            .floor()
            .max(0.0);
        let c1 = ((ch.max_x - t.origin_x) / t.cell_size_x + 1.0)
            .ceil()
            .min(cols);
        let r0 = ((t.origin_y - ch.max_y) / t.cell_size_y - 1.0)
            .floor()
            .max(0.0);
        let r1 = ((t.origin_y - ch.min_y) / t.cell_size_y + 1.0)
            .ceil()
            .min(rows);
        if !(c0 < c1 && r0 < r1) {
            continue;
        }
        for r in r0 as usize..r1 as usize {
            for c in c0 as usize..c1 as usize {
                let idx = dem.index(r, c);
                if dem.is_valid(idx) && ch.contains(dem.cell_center(r, c).expect("in range")) {
                    out.insert(idx);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Greedy seeded selection of negative points from chunk cell centres.
///
/// Candidates are visited in a seeded shuffle of raster order; one is
/// accepted when no positive lies within `min_pos_dist` and no previously
/// accepted negative within `min_neg_dist`.
pub fn generate_negatives(
    chunks: &[Chunk],
    positives: &[GeoPoint],
    dem: &Raster,
    params: &NegativeParams,
) -> Result<Vec<GeoPoint>> {
    if chunks.is_empty() {
        return Err(Error::Config("no negative chunks supplied".into()));
    }
    for d in [params.min_pos_dist, params.min_neg_dist] {
        if !(d >= 0.0 && d.is_finite()) {
            return Err(Error::Parameter(format!("invalid distance constraint {d}")));
        }
    }
    let t = dem.transform();
    let mut pos = Proximity::new(t, params.min_pos_dist);
    for &p in positives {
        pos.insert(p);
    }
    let mut order = chunk_candidates(chunks, dem);
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));

    let mut accepted = Proximity::new(t, params.min_neg_dist);
    let mut out = Vec::new();
    for idx in order {
        let p = dem
            .cell_center(idx / dem.cols(), idx % dem.cols())
            .expect("candidate in range");
        if pos.too_close(p) || accepted.too_close(p) {
            continue;
        }
        accepted.insert(p);
        out.push(p);
    }
    log::debug!("accepted {} negative points", out.len());
    Ok(out)
}
