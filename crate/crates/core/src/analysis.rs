//! Feature screening: univariate logistic significance, correlation and mutual information.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::FeatureTable;

const IRLS_TOL: f64 = 1e-8;
const IRLS_MAX_ITER: usize = 100;

/// Intercept-plus-slope logistic fit on a standardized feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnivariateFit {
    /// Slope on the standardized scale.
    pub coef: f64,
    pub stderr: f64,
    pub z: f64,
    pub p_value: f64,
    /// The classes are separable along this feature; the slope diverges.
    pub separated: bool,
    pub iterations: usize,
}

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y).count();
    (pos, labels.len() - pos)
}

fn standardize(x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    (sd > 0.0 && sd.is_finite()).then(|| x.iter().map(|v| (v - mean) / sd).collect())
}

/// Two-sided standard-normal tail probability of `|z|`.
pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Logistic regression of `labels` on one feature, with a Wald test on the slope.
pub fn univariate_logistic(feature: &[f64], labels: &[bool]) -> Result<UnivariateFit> {
    if feature.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} feature values for {} labels",
            feature.len(),
            labels.len()
        )));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos < 2 || n_neg < 2 {
        return Err(Error::Class(format!(
            "need at least 2 samples per class, got {n_pos} positive and {n_neg} negative"
        )));
    }
    let Some(x) = standardize(feature) else {
        return Ok(UnivariateFit {
            coef: 0.0,
            stderr: f64::INFINITY,
            z: 0.0,
            p_value: 1.0,
            separated: false,
            iterations: 0,
        });
    };

    let range = |want: bool| {
        x.iter()
            .zip(labels)
            .filter(|(_, &y)| y == want)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            })
    };
    let (pos_lo, pos_hi) = range(true);
    let (neg_lo, neg_hi) = range(false);
    let direction = if neg_hi <= pos_lo {
        Some(1.0)
    } else if pos_hi <= neg_lo {
        Some(-1.0)
    } else {
        None
    };
    if let Some(sign) = direction {
        return Ok(UnivariateFit {
            coef: sign * f64::INFINITY,
            stderr: f64::INFINITY,
            z: sign * f64::INFINITY,
            p_value: 0.0,
            separated: true,
            iterations: 0,
        });
    }

    let mut b0 = (n_pos as f64 / n_neg as f64).ln();
    let mut b1 = 0.0;
    let mut iterations = 0;
    let mut cov11 = f64::INFINITY;
    for it in 1..=IRLS_MAX_ITER {
        iterations = it;
        let (mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&xi, &yi) in x.iter().zip(labels) {
            let mu = sigmoid(b0 + b1 * xi);
            let w = mu * (1.0 - mu);
            let r = f64::from(u8::from(yi)) - mu;
            g0 += r;
            g1 += r * xi;
            h00 += w;
            h01 += w * xi;
            h11 += w * xi * xi;
        }
        let det = h00 * h11 - h01 * h01;
        if !(det > 0.0) {
            break;
        }
        let d0 = (h11 * g0 - h01 * g1) / det;
        let d1 = (h00 * g1 - h01 * g0) / det;
        b0 += d0;
        b1 += d1;
        cov11 = h00 / det;
        if d0.abs().max(d1.abs()) < IRLS_TOL {
            // Refresh the information matrix at the converged point.
            cov11 = information_inverse_slope(&x, b0, b1).unwrap_or(cov11);
            break;
        }
    }
    let stderr = cov11.sqrt();
    let z = b1 / stderr;
    Ok(UnivariateFit {
        coef: b1,
        stderr,
        z,
        p_value: normal_two_sided_p(z),
        separated: false,
        iterations,
    })
}

fn information_inverse_slope(x: &[f64], b0: f64, b1: f64) -> Option<f64> {
    let (mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0);
    for &xi in x {
        let mu = sigmoid(b0 + b1 * xi);
        let w = mu * (1.0 - mu);
        h00 += w;
        h01 += w * xi;
        h11 += w * xi * xi;
    }
    let det = h00 * h11 - h01 * h01;
    (det > 0.0).then(|| h00 / det)
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Sample Pearson correlation; `None` when either column has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Pairwise Pearson correlations between the table's feature columns.
pub fn pearson_matrix(table: &FeatureTable) -> Vec<Vec<Option<f64>>> {
    let cols: Vec<Vec<f64>> = (0..table.names().len()).map(|j| table.column(j)).collect();
    let k = cols.len();
    let mut m = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                pearson(&cols[i], &cols[i]).map(|_| 1.0)
            } else {
                pearson(&cols[i], &cols[j])
            };
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    m
}

/// Equal-frequency bin per value; tied values share the bin of their first rank.
pub fn equal_frequency_bins(x: &[f64], bins: usize) -> Vec<usize> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut out = vec![0; n];
    let mut first = 0;
    for (rank, &i) in order.iter().enumerate() {
        if rank > 0 && x[i] != x[order[rank - 1]] {
            first = rank;
        }
        out[i] = first * bins / n;
    }
    out
}

/// Mutual information in nats between a binned feature and binary labels.
pub fn mutual_information(feature: &[f64], labels: &[bool], bins: usize) -> Result<f64> {
    if feature.len() != labels.len() {
        return Err(Error::Shape("feature and label lengths differ".into()));
    }
    if feature.len() < 2 {
        return Err(Error::EmptyInput(
            "mutual information needs at least 2 rows".into(),
        ));
    }
    if bins == 0 {
        return Err(Error::Parameter("bin count must be positive".into()));
    }
    let b = equal_frequency_bins(feature, bins);
    let n = feature.len() as f64;
    let mut joint = vec![[0usize; 2]; bins];
    for (&bi, &y) in b.iter().zip(labels) {
        joint[bi][usize::from(y)] += 1;
    }
    let py = [0, 1].map(|y| joint.iter().map(|c| c[y]).sum::<usize>() as f64 / n);
    let mut mi = 0.0;
    for cell in &joint {
        let pb = (cell[0] + cell[1]) as f64 / n;
        for y in 0..2 {
            if cell[y] > 0 {
                let pby = cell[y] as f64 / n;
                mi += pby * (pby / (pb * py[y])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// Drop one member of every highly correlated feature pair, keeping the higher-MI one.
///
/// Pairs are visited by descending `|r|`; a feature that has been dropped no
/// longer takes part. Equal MI drops the later column.
pub fn redundancy_filter(
    table: &FeatureTable,
    labels: &[bool],
    r_threshold: f64,
    bins: usize,
) -> Result<Vec<String>> {
    let k = table.names().len();
    let mi: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|j| mutual_information(&table.column(j), labels, bins))
        .collect::<Result<_>>()?;
    Ok(filter_with_scores(
        table,
        &pearson_matrix(table),
        &mi,
        r_threshold,
    ))
}

fn filter_with_scores(
    table: &FeatureTable,
    r: &[Vec<Option<f64>>],
    mi: &[f64],
    r_threshold: f64,
) -> Vec<String> {
    let k = table.names().len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            if let Some(v) = r[i][j] {
                if v.abs() > r_threshold {
                    pairs.push((v.abs(), i, j));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut alive = vec![true; k];
    for (_, i, j) in pairs {
        if alive[i] && alive[j] {
            if mi[j] > mi[i] {
                alive[i] = false;
            } else {
                alive[j] = false;
            }
        }
    }
    (0..k)
        .filter(|&j| alive[j])
        .map(|j| table.names()[j].clone())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenParams {
    pub p_threshold: f64,
    pub r_threshold: f64,
    pub bins: usize,
}

impl Default for ScreenParams {
    fn default() -> Self {
        Self {
            p_threshold: 0.05,
            r_threshold: 0.85,
            bins: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScreen {
    pub name: String,
    #[serde(flatten)]
    pub fit: UnivariateFit,
    pub mutual_information: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub params: ScreenParams,
    pub n_rows: usize,
    pub selected: Vec<String>,
    pub features: Vec<FeatureScreen>,
    /// Row-major Pearson matrix over `features`; NaN where undefined.
    pub pearson: Vec<Vec<f64>>,
}

impl ScreeningReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Significance test per feature, then the redundancy filter over the significant ones.
pub fn screen(table: &FeatureTable, params: &ScreenParams) -> Result<ScreeningReport> {
    let labels = table.labels();
    let k = table.names().len();
    let features: Vec<FeatureScreen> = (0..k)
        .into_par_iter()
        .map(|j| {
            let col = table.column(j);
            Ok(FeatureScreen {
                name: table.names()[j].clone(),
                fit: univariate_logistic(&col, &labels)?,
                mutual_information: mutual_information(&col, &labels, params.bins)?,
            })
        })
        .collect::<Result<_>>()?;
    let r = pearson_matrix(table);
    let significant: Vec<usize> = (0..k)
        .filter(|&j| features[j].fit.p_value < params.p_threshold)
        .collect();
    let names: Vec<&str> = significant
        .iter()
        .map(|&j| table.names()[j].as_str())
        .collect();
    let sub = table.select(&names)?;
    let sub_r: Vec<Vec<Option<f64>>> = significant
        .iter()
        .map(|&i| significant.iter().map(|&j| r[i][j]).collect())
        .collect();
    let sub_mi: Vec<f64> = significant
        .iter()
        .map(|&j| features[j].mutual_information)
        .collect();
    let selected = filter_with_scores(&sub, &sub_r, &sub_mi, params.r_threshold);
    Ok(ScreeningReport {
        params: *params,
        n_rows: table.len(),
        selected,
        features,
        pearson: r
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GeoPoint;
    use crate::sampling::LabeledPoint;

    fn table(cols: &[(&str, Vec<f64>)], labels: &[bool]) -> FeatureTable {
        let n = labels.len();
        let points = labels
            .iter()
            .enumerate()
            .map(|(i, &y)| LabeledPoint::new(GeoPoint::new(i as f64, 0.0), y))
            .collect();
        let rows = (0..n)
            .map(|i| cols.iter().map(|(_, c)| c[i]).collect())
            .collect();
        FeatureTable::new(
            cols.iter().map(|(n, _)| n.to_string()).collect(),
            points,
            rows,
        )
        .unwrap()
    }

    #[test]
    fn constant_feature() {
        let f = univariate_logistic(&[2.0; 6], &[true, true, true, false, false, false]).unwrap();
        assert_eq!((f.coef, f.p_value), (0.0, 1.0));
        let mi =
            mutual_information(&[2.0; 6], &[true, true, true, false, false, false], 10).unwrap();
        assert_eq!(mi, 0.0);
    }

    #[test]
    fn separated_feature_flagged() {
        let f = univariate_logistic(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]).unwrap();
        assert!(f.separated);
        assert_eq!(f.p_value, 0.0);
        assert!(f.coef > 0.0);
    }

    #[test]
    fn class_precondition() {
        assert!(matches!(
            univariate_logistic(&[1.0, 2.0, 3.0], &[true, false, false]),
            Err(Error::Class(_))
        ));
    }

    #[test]
    fn overlapping_feature_converges() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let y = [false, false, true, false, true, false, true, true];
        let f = univariate_logistic(&x, &y).unwrap();
        assert!(!f.separated);
        assert!(f.coef > 0.0 && f.iterations < IRLS_MAX_ITER);
        assert!((0.0..=1.0).contains(&f.p_value));
    }

    #[test]
    fn pearson_identities() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let aff: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert!((pearson(&x, &aff).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &[1.0; 5]), None);
    }

    #[test]
    fn mi_of_label_copy_is_label_entropy() {
        let y: Vec<bool> = (0..100).map(|i| i % 2 == 0).collect();
        let x: Vec<f64> = y.iter().map(|&v| f64::from(u8::from(v))).collect();
        let mi = mutual_information(&x, &y, 10).unwrap();
        assert!((mi - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn bins_merge_ties() {
        let b = equal_frequency_bins(&[5.0, 1.0, 1.0, 1.0, 2.0, 3.0, 4.0, 6.0, 7.0, 8.0], 5);
        assert_eq!(b[1], b[2]);
        assert_eq!(b[2], b[3]);
        assert!(b.iter().all(|&v| v < 5));
    }

    #[test]
    fn duplicate_columns_leave_one() {
        let y = [true, false, true, false, true, true, false, false];
        let x = vec![1.0, 2.0, 3.5, 1.5, 5.0, 4.0, 0.5, 2.5];
        let t = table(&[("a", x.clone()), ("b", x)], &y);
        assert_eq!(redundancy_filter(&t, &y, 0.85, 10).unwrap(), vec!["a"]);
    }

    #[test]
    fn report_round_trips_through_toml() {
        let y = [true, false, true, false, true, true, false, false];
        let t = table(
            &[
                ("a", vec![1.0, 2.0, 3.5, 1.5, 5.0, 4.0, 0.5, 2.5]),
                ("c", vec![7.0; 8]),
            ],
            &y,
        );
        let rep = screen(&t, &ScreenParams::default()).unwrap();
        let text = rep.to_toml().unwrap();
        let back = ScreeningReport::from_toml(&text).unwrap();
        assert_eq!(back.selected, rep.selected);
        assert_eq!(back.features[0], rep.features[0]);
        assert!(back.pearson[1][1].is_nan());
    }
}
