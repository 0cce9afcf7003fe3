//! Independent reference implementations used by the oracle and acceptance tests.
//!
//! Everything here is deliberately naive: fixed-point iteration, recursion and
//! exhaustive enumeration. None of it calls into the code paths it checks.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wetmap::{GeoTransform, Raster, NODATA};

pub const OFFSETS: [(isize, isize); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn grid(rows: usize, cols: usize, cell: f64, values: Vec<f64>) -> Raster {
    let t = GeoTransform::new(1000.0, 5000.0, cell, cell).unwrap();
    Raster::new(rows, cols, t, values, NODATA).unwrap()
}

/// Rough random terrain: integer heights (many ties and pits) with a few voids.
pub fn random_dem(rng: &mut ChaCha8Rng, rows: usize, cols: usize, void_rate: f64) -> Raster {
    let values = (0..rows * cols)
        .map(|_| {
            if rng.random::<f64>() < void_rate {
                NODATA
            } else {
                rng.random_range(0..40) as f64
            }
        })
        .collect();
    grid(rows, cols, 30.0, values)
}

fn in_bounds(r: isize, c: isize, rows: usize, cols: usize) -> bool {
    r >= 0 && c >= 0 && (r as usize) < rows && (c as usize) < cols
}

/// Fixed-point fill: start every interior cell at +∞ and repeatedly lower it
/// to `max(dem, min over neighbours of (level + min_slope × step))` until
/// nothing changes.
pub fn brute_fill(dem: &Raster, min_slope: f64) -> Vec<Option<f64>> {
    let (rows, cols) = (dem.rows(), dem.cols());
    let z: Vec<Option<f64>> = (0..dem.len()).map(|i| dem.at(i)).collect();
    let boundary = |r: usize, c: usize| {
        if r == 0 || c == 0 || r + 1 == rows || c + 1 == cols {
            return true;
        }
        OFFSETS.iter().any(|&(dr, dc)| {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            z[nr as usize * cols + nc as usize].is_none()
        })
    };
    let mut w: Vec<f64> = (0..dem.len())
        .map(|i| match z[i] {
            Some(v) if boundary(i / cols, i % cols) => v,
            Some(_) => f64::INFINITY,
            None => f64::NAN,
        })
        .collect();
    loop {
        let mut changed = false;
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let Some(zi) = z[i] else { continue };
                if boundary(r, c) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for &(dr, dc) in &OFFSETS {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    let j = nr as usize * cols + nc as usize;
                    let step = if dr != 0 && dc != 0 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    };
                    let cand = w[j] + min_slope * step;
                    if cand < best {
                        best = cand;
                    }
                }
                let next = zi.max(best);
                if next < w[i] {
                    w[i] = next;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    w.into_iter().zip(&z).map(|(v, zi)| zi.map(|_| v)).collect()
}

/// Steepest-descent code per cell by checking all eight neighbours.
pub fn brute_d8(filled: &Raster) -> Vec<Option<u8>> {
    let (rows, cols) = (filled.rows(), filled.cols());
    let t = filled.transform();
    let (dx, dy) = (t.dx_m(), t.dy_m());
    (0..filled.len())
        .map(|i| {
            let z = filled.at(i)?;
            let (r, c) = ((i / cols) as isize, (i % cols) as isize);
            let mut best: Option<(f64, u8)> = None;
            for (k, &(dr, dc)) in OFFSETS.iter().enumerate() {
                if !in_bounds(r + dr, c + dc, rows, cols) {
                    continue;
                }
                let Some(zn) = filled.get((r + dr) as usize, (c + dc) as usize) else {
                    continue;
                };
                let a = dc as f64 * dx;
                let b = dr as f64 * dy;
                let dist = (a * a + b * b).sqrt();
                let slope = (z - zn) / dist;
                if slope > 0.0 && best.is_none_or(|(s, _)| slope > s) {
                    best = Some((slope, k as u8 + 1));
                }
            }
            best.map(|(_, code)| code)
        })
        .collect()
}

/// Downstream index for each cell given D8 codes.
pub fn targets(codes: &[Option<u8>], cols: usize) -> Vec<Option<usize>> {
    codes
        .iter()
        .enumerate()
        .map(|(i, code)| {
            let (dr, dc) = OFFSETS[(*code)? as usize - 1];
            let r = (i / cols) as isize + dr;
            let c = (i % cols) as isize + dc;
            Some(r as usize * cols + c as usize)
        })
        .collect()
}

/// Contributing-cell count by memoised recursion over donors.
pub fn recursive_accumulation(targets: &[Option<usize>], valid: &[bool]) -> Vec<Option<f64>> {
    let n = targets.len();
    let mut donors = vec![Vec::new(); n];
    for (i, t) in targets.iter().enumerate() {
        if let Some(j) = t {
            donors[*j].push(i);
        }
    }
    fn count(i: usize, donors: &[Vec<usize>], memo: &mut [Option<f64>]) -> f64 {
        if let Some(v) = memo[i] {
            return v;
        }
        let mut total = 1.0;
        for &d in &donors[i] {
            total += count(d, donors, memo);
        }
        memo[i] = Some(total);
        total
    }
    let mut memo = vec![None; n];
    (0..n)
        .map(|i| valid[i].then(|| count(i, &donors, &mut memo)))
        .collect()
}

/// Nearest mask cell by scanning every mask cell, ranked by (squared
/// distance, tie key, index).
pub fn brute_nearest(mask: &Raster, key: Option<&[f64]>) -> Vec<(usize, f64)> {
    let (rows, cols) = (mask.rows(), mask.cols());
    let t = mask.transform();
    let (dx, dy) = (t.dx_m(), t.dy_m());
    let sites: Vec<usize> = (0..mask.len())
        .filter(|&i| mask.at(i).is_some_and(|v| v != 0.0))
        .collect();
    (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            let mut best: Option<(f64, f64, usize)> = None;
            for &s in &sites {
                let a = dx * (c as f64 - (s % cols) as f64);
                let b = dy * (r as f64 - (s / cols) as f64);
                let cand = (a * a + b * b, key.map_or(0.0, |k| k[s]), s);
                let better = match best {
                    None => true,
                    Some(cur) => cand
                        .0
                        .total_cmp(&cur.0)
                        .then(cand.1.total_cmp(&cur.1))
                        .then(cand.2.cmp(&cur.2))
                        .is_lt(),
                };
                if better {
                    best = Some(cand);
                }
            }
            let (d2, _, s) = best.expect("non-empty mask");
            (s, d2.sqrt())
        })
        .collect()
}

/// Mean over the enumerated disk, centre excluded, for TPI.
pub fn brute_tpi(dem: &Raster, radius: f64) -> Vec<Option<f64>> {
    let (rows, cols) = (dem.rows(), dem.cols());
    let t = dem.transform();
    let (dx, dy) = (t.dx_m(), t.dy_m());
    (0..dem.len())
        .map(|i| {
            let z = dem.at(i)?;
            let (r, c) = (i / cols, i % cols);
            let mut sum = 0.0;
            let mut n = 0;
            for rr in 0..rows {
                for cc in 0..cols {
                    if (rr, cc) == (r, c) {
                        continue;
                    }
                    let a = dx * (cc as f64 - c as f64);
                    let b = dy * (rr as f64 - r as f64);
                    if a * a + b * b > radius * radius {
                        continue;
                    }
                    if let Some(v) = dem.get(rr, cc) {
                        sum += v;
                        n += 1;
                    }
                }
            }
            (n > 0).then(|| z - sum / n as f64)
        })
        .collect()
}

/// Sample standard-normal via Box–Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One-sample Kolmogorov–Smirnov statistic against Uniform(0, 1).
pub fn ks_uniform(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &v)| {
            let lo = v - i as f64 / n;
            let hi = (i + 1) as f64 / n - v;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two well-separated Gaussian blobs in 2-D; returns (rows, labels).
pub fn blobs(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let pos = i % 2 == 0;
        let (cx, cy) = if pos { (3.0, 3.0) } else { (-3.0, -3.0) };
        x.push(vec![cx + normal(rng), cy + normal(rng)]);
        y.push(pos);
    }
    (x, y)
}

/// XOR: four tight clusters on the unit square corners.
pub fn xor(rng: &mut ChaCha8Rng, per_corner: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
        for _ in 0..per_corner {
            x.push(vec![
                a + 0.1 * (rng.random::<f64>() - 0.5),
                b + 0.1 * (rng.random::<f64>() - 0.5),
            ]);
            y.push((a == 1.0) != (b == 1.0));
        }
    }
    (x, y)
}

/// Plain Euclidean distance between planar points in meters.
pub fn dist(a: wetmap::GeoPoint, b: wetmap::GeoPoint) -> f64 {
    ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
}

/// Pairwise check of the negative-sampling constraints; returns the first violation.
pub fn negative_violation(
    negatives: &[wetmap::GeoPoint],
    positives: &[wetmap::GeoPoint],
    min_pos: f64,
    min_neg: f64,
) -> Option<String> {
    for (i, &n) in negatives.iter().enumerate() {
        for &p in positives {
            if dist(n, p) < min_pos {
                return Some(format!(
                    "negative {n:?} is {} m from positive {p:?}",
                    dist(n, p)
                ));
            }
        }
        for &m in &negatives[..i] {
            if dist(n, m) < min_neg {
                return Some(format!(
                    "negatives {n:?} and {m:?} are {} m apart",
                    dist(n, m)
                ));
            }
        }
    }
    None
}

/// Nearest-rank threshold by sorting, and the index partition it induces.
pub fn sort_split(xs: &[f64], percentile: f64) -> (f64, Vec<usize>, Vec<usize>) {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((percentile / 100.0 * xs.len() as f64).ceil() as usize).max(1);
    let thr = sorted[rank - 1];
    let train = (0..xs.len()).filter(|&i| xs[i] < thr).collect();
    let test = (0..xs.len()).filter(|&i| xs[i] >= thr).collect();
    (thr, train, test)
}
