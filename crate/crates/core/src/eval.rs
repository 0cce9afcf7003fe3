//! Classification metrics, balanced test sets and per-cell risk rasters.

use std::io::Write;
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::TrainedModel;
use crate::raster::{Raster, NODATA};
use crate::sampling::FeatureTable;

fn require_both_classes(labels: &[bool]) -> Result<(usize, usize)> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Class(format!(
            "both classes required, got {n_pos} positive and {n_neg} negative"
        )));
    }
    Ok((n_pos, n_neg))
}

fn same_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} predictions for {b} labels")));
    }
    Ok(())
}

/// Mid-ranks (1-based) with ties averaged.
fn midranks(scores: &[f64]) -> Vec<f64> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Area under the ROC curve from the Mann–Whitney rank sum; ties count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    same_len(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Parameter("scores contain NaN".into()));
    }
    let (n_pos, n_neg) = require_both_classes(labels)?;
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points for every distinct score, predicting positive at `score >= threshold`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    same_len(scores.len(), labels.len())?;
    let (n_pos, n_neg) = require_both_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    Ok(out)
}

pub fn write_roc_csv<W: Write>(points: &[RocPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["threshold", "fpr", "tpr"]).map_err(err)?;
    for p in points {
        w.write_record([
            p.threshold.to_string(),
            p.fpr.to_string(),
            p.tpr.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn specificity(&self) -> Option<f64> {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn f1(&self) -> Option<f64> {
        let (p, r) = (self.precision()?, self.recall()?);
        Some(if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        })
    }
}

fn ratio(a: usize, b: usize) -> Option<f64> {
    (b > 0).then(|| a as f64 / b as f64)
}

pub fn confusion_metrics(predictions: &[bool], labels: &[bool]) -> Result<Confusion> {
    same_len(predictions.len(), labels.len())?;
    let mut c = Confusion {
        tp: 0,
        fp: 0,
        tn: 0,
        fn_: 0,
    };
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Optional ratio written as the nodata sentinel when undefined.
mod nodata_opt {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::raster::NODATA;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(v.unwrap_or(NODATA))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        let v = f64::deserialize(d)?;
        Ok((v != NODATA).then_some(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub roc_auc: f64,
    #[serde(with = "nodata_opt")]
    pub recall: Option<f64>,
    #[serde(with = "nodata_opt")]
    pub precision: Option<f64>,
    #[serde(with = "nodata_opt")]
    pub specificity: Option<f64>,
    #[serde(with = "nodata_opt")]
    pub f1: Option<f64>,
    pub threshold: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub seed: u64,
    pub counts: Confusion,
}

impl EvalReport {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Threshold metrics at `threshold` plus rank AUC.
pub fn evaluate(scores: &[f64], labels: &[bool], threshold: f64, seed: u64) -> Result<EvalReport> {
    let roc_auc = roc_auc(scores, labels)?;
    let predictions: Vec<bool> = scores.iter().map(|&s| s >= threshold).collect();
    let counts = confusion_metrics(&predictions, labels)?;
    Ok(EvalReport {
        roc_auc,
        recall: counts.recall(),
        precision: counts.precision(),
        specificity: counts.specificity(),
        f1: counts.f1(),
        threshold,
        n_pos: counts.tp + counts.fn_,
        n_neg: counts.tn + counts.fp,
        seed,
        counts,
    })
}

/// All positives plus a seeded uniform draw of as many negatives, in table order.
pub fn undersample_negatives(table: &FeatureTable, seed: u64) -> Result<FeatureTable> {
    let labels = table.labels();
    let pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if neg.len() < pos.len() {
        return Err(Error::Sampling(format!(
            "{} negatives cannot balance {} positives",
            neg.len(),
            pos.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep: Vec<usize> = sample(&mut rng, neg.len(), pos.len())
        .into_iter()
        .map(|k| neg[k])
        .chain(pos)
        .collect();
    keep.sort_unstable();
    Ok(table.subset(&keep))
}

/// Probability per cell; missing wherever any input feature is missing.
pub fn predict_grid(model: &TrainedModel, rasters: &[(&str, &Raster)]) -> Result<Raster> {
    let ordered: Vec<&Raster> = model
        .feature_names
        .iter()
        .map(|name| {
            rasters
                .iter()
                .find(|(n, _)| n == name)
                .map(|(_, r)| *r)
                .ok_or_else(|| Error::Config(format!("no raster supplied for feature `{name}`")))
        })
        .collect::<Result<_>>()?;
    let first = ordered
        .first()
        .ok_or_else(|| Error::Config("model has no features".into()))?;
    for (name, r) in model.feature_names.iter().zip(&ordered) {
        first.require_same_grid(r, name)?;
    }
    let cols = first.cols();
    let mut values = vec![NODATA; first.len()];
    if cols > 0 {
        values
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(row, out)| {
                let mut x = vec![0.0; ordered.len()];
                for (c, v) in out.iter_mut().enumerate() {
                    let idx = row * cols + c;
                    let complete =
                        ordered
                            .iter()
                            .zip(x.iter_mut())
                            .all(|(r, slot)| match r.at(idx) {
                                Some(val) => {
                                    *slot = val;
                                    true
                                }
                                None => false,
                            });
                    if complete {
                        *v = model.proba_unchecked(&x);
                    }
                }
            });
    }
    Ok(first.derive(values))
}

/// Grayscale PNG: probability 0 black, 1 white; missing cells transparent.
pub fn write_probability_png(raster: &Raster, path: &Path) -> Result<()> {
    let (w, h) = (raster.cols() as u32, raster.rows() as u32);
    let mut img = image::GrayAlphaImage::new(w, h);
    for (i, px) in img.pixels_mut().enumerate() {
        *px = match raster.at(i) {
            Some(p) => image::LumaA([(p.clamp(0.0, 1.0) * 255.0).round() as u8, 255]),
            None => image::LumaA([0, 0]),
        };
    }
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}
