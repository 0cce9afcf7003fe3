//! Exact nearest-mask-cell search on a raster grid.
//!
//! Separable two-pass transform: per column, the nearest mask row above and
//! below; per row, a lower envelope over the column candidates. Candidates are
//! ordered lexicographically by (squared metric distance, tie key, cell index),
//! so equidistant mask cells resolve deterministically. The envelope keeps
//! integer switch points and verifies them with the same comparison used to
//! rank candidates, which keeps results identical to an exhaustive search.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{Raster, NODATA};

const NONE: u32 = u32::MAX;

/// Nearest mask cell for one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub site: usize,
    pub distance: f64,
}

/// Nearest mask cell for every grid cell.
///
/// Mask cells are valid, non-zero cells of `mask`. `tie_key` (one value per
/// cell) breaks distance ties in favour of the smaller key; remaining ties go
/// to the lower cell index.
pub fn nearest_mask_cells(mask: &Raster, tie_key: Option<&[f64]>) -> Result<Vec<Nearest>> {
    let (rows, cols) = (mask.rows(), mask.cols());
    let is_site: Vec<bool> = (0..mask.len())
        .map(|i| mask.at(i).is_some_and(|v| v != 0.0))
        .collect();
    if !is_site.iter().any(|&s| s) {
        return Err(Error::EmptyMask("mask"));
    }
    if let Some(key) = tie_key {
        if key.len() != mask.len() {
            return Err(Error::Shape("tie key length differs from mask".into()));
        }
    }
    let t = mask.transform();
    let (dx, dy) = (t.dx_m(), t.dy_m());
    let key_of = |i: usize| tie_key.map_or(0.0, |k| k[i]);

    // Column pass, stored column-major: nearest site index and its squared
    // vertical distance.
    let column_pass: Vec<(Vec<u32>, Vec<f64>)> = (0..cols)
        .into_par_iter()
        .map(|c| {
            let mut above = vec![NONE; rows];
            let mut last = NONE;
            for r in 0..rows {
                if is_site[r * cols + c] {
                    last = r as u32;
                }
                above[r] = last;
            }
            let mut site = vec![NONE; rows];
            let mut g = vec![f64::INFINITY; rows];
            let mut next = NONE;
            for r in (0..rows).rev() {
                if is_site[r * cols + c] {
                    next = r as u32;
                }
                let mut best: Option<(f64, f64, usize)> = None;
                for cand in [above[r], next] {
                    if cand == NONE {
                        continue;
                    }
                    let dr = r as f64 - cand as f64;
                    let b = dy * dr;
                    let idx = cand as usize * cols + c;
                    let k = (b * b, key_of(idx), idx);
                    if best.is_none_or(|cur| lex_less(k, cur)) {
                        best = Some(k);
                    }
                }
                if let Some((gv, _, idx)) = best {
                    site[r] = idx as u32;
                    g[r] = gv;
                }
            }
            (site, g)
        })
        .collect();

    let rows_out: Vec<Vec<Nearest>> = (0..rows)
        .into_par_iter()
        .map(|r| {
            let cand: Vec<(usize, usize, f64)> = (0..cols)
                .filter_map(|c| {
                    let s = column_pass[c].0[r];
                    (s != NONE).then(|| (c, s as usize, column_pass[c].1[r]))
                })
                .collect();
            row_envelope(&cand, cols, dx, &key_of)
        })
        .collect();
    Ok(rows_out.into_iter().flatten().collect())
}

fn lex_less(a: (f64, f64, usize), b: (f64, f64, usize)) -> bool {
    a.0.total_cmp(&b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.cmp(&b.2))
        .is_lt()
}

/// Lower envelope of the per-column candidates along one row.
fn row_envelope(
    cand: &[(usize, usize, f64)],
    cols: usize,
    dx: f64,
    key_of: &impl Fn(usize) -> f64,
) -> Vec<Nearest> {
    // Ranking key of candidate `k` seen from column `x`.
    let rank = |k: usize, x: usize| {
        let (c, site, g) = cand[k];
        let a = dx * (x as f64 - c as f64);
        (a * a + g, key_of(site), site)
    };
    let beats = |q: usize, p: usize, x: usize| lex_less(rank(q, x), rank(p, x));
    // First column at which candidate `q` (east of `p`) wins over `p`.
    let switch = |p: usize, q: usize| -> usize {
        let (cp, _, gp) = cand[p];
        let (cq, _, gq) = cand[q];
        let (fp, fq) = (cp as f64 * dx, cq as f64 * dx);
        let s = ((gq + fq * fq) - (gp + fp * fp)) / (2.0 * dx * (fq - fp));
        let mut x = if s.is_nan() || s <= 0.0 {
            0
        } else if s >= cols as f64 {
            cols
        } else {
            s.ceil() as usize
        };
        while x > 0 && beats(q, p, x - 1) {
            x -= 1;
        }
        while x < cols && !beats(q, p, x) {
            x += 1;
        }
        x
    };

    let mut hull: Vec<usize> = Vec::with_capacity(cand.len());
    let mut start: Vec<usize> = Vec::with_capacity(cand.len());
    for q in 0..cand.len() {
        let mut from = 0;
        while let Some(&top) = hull.last() {
            let s = switch(top, q);
            if s <= *start.last().unwrap() {
                hull.pop();
                start.pop();
            } else {
                from = s;
                break;
            }
        }
        if hull.is_empty() {
            from = 0;
        }
        if from < cols {
            hull.push(q);
            start.push(from);
        }
    }

    let mut out = Vec::with_capacity(cols);
    let mut k = 0;
    for x in 0..cols {
        while k + 1 < hull.len() && start[k + 1] <= x {
            k += 1;
        }
        let (d2, _, site) = rank(hull[k], x);
        out.push(Nearest {
            site,
            distance: d2.sqrt(),
        });
    }
    out
}

/// Euclidean distance in meters from each cell centre to the nearest mask cell centre.
///
/// Mask cells get 0. Cells that are missing in `mask` stay missing.
pub fn distance_to_mask(mask: &Raster) -> Result<Raster> {
    let nearest = nearest_mask_cells(mask, None)?;
    let values = nearest
        .iter()
        .enumerate()
        .map(|(i, n)| if mask.is_valid(i) { n.distance } else { NODATA })
        .collect();
    Ok(mask.derive(values))
}
