//! End-to-end orchestration: DEM to features, survey to labelled table,
//! screening, training, evaluation and the risk map.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{screen, ScreenParams, ScreeningReport};
use crate::error::{Error, Result, StageContext};
use crate::eval::{
    evaluate, predict_grid, roc_curve, undersample_negatives, write_probability_png, write_roc_csv,
    EvalReport,
};
use crate::hydrology::{
    altitude_above_channel, altitude_below_ridge, closed_depressions, d8_flow_direction,
    distance_to_mask, extract_channels, extract_ridges, fill_sinks, flow_accumulation,
    relative_slope_position,
};
use crate::learn::{balanced_weights, fit, Family, ModelSpec, TrainedModel};
use crate::raster::{read_ascii_grid, read_hgt, write_ascii_grid, Raster};
use crate::sampling::{
    extract_features, generate_negatives, load_survey, select_positives, split_by_longitude,
    FeatureTable, LabeledPoint, NegativeParams, Variant,
};
use crate::terrain::{
    aspect, convergence_index, plan_curvature, profile_curvature, slope, tpi, twi,
};

/// Every feature raster [`compute_features`] produces, in output order.
pub const FEATURES: [&str; 15] = [
    "elevation",
    "slope",
    "aspect",
    "plan_curvature",
    "profile_curvature",
    "tpi",
    "convergence_index",
    "flow_direction",
    "flow_accumulation",
    "twi",
    "closed_depressions",
    "cnd",
    "aacl",
    "abrl",
    "rps",
];

/// Features of the natural-formations model.
pub const DATASET_A: [&str; 5] = ["tpi", "twi", "rps", "closed_depressions", "flow_direction"];

/// Features of the all-sources model.
pub const DATASET_B: [&str; 6] = [
    "tpi",
    "twi",
    "rps",
    "plan_curvature",
    "profile_curvature",
    "convergence_index",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TerrainParams {
    /// TPI neighbourhood radius in meters.
    pub tpi_radius: f64,
    /// Fill gradient per cell step.
    pub min_slope: f64,
    /// Contributing cells that make a channel; 1 km² worth of cells when unset.
    pub channel_threshold: Option<f64>,
}

impl Default for TerrainParams {
    fn default() -> Self {
        Self {
            tpi_radius: 500.0,
            min_slope: 0.01,
            channel_threshold: None,
        }
    }
}

impl TerrainParams {
    pub fn channel_cells(&self, dem: &Raster) -> f64 {
        self.channel_threshold.unwrap_or_else(|| {
            let t = dem.transform();
            (1.0e6 / (t.dx_m() * t.dy_m())).ceil()
        })
    }
}

/// Named feature rasters on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub rasters: Vec<(String, Raster)>,
}

impl FeatureSet {
    pub fn get(&self, name: &str) -> Option<&Raster> {
        self.rasters.iter().find(|(n, _)| n == name).map(|(_, r)| r)
    }

    pub fn names(&self) -> Vec<&str> {
        self.rasters.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Borrowed `(name, raster)` pairs for the requested names, in that order.
    pub fn named<S: AsRef<str>>(&self, names: &[S]) -> Result<Vec<(&str, &Raster)>> {
        names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                self.rasters
                    .iter()
                    .find(|(name, _)| name == n)
                    .map(|(name, r)| (name.as_str(), r))
                    .ok_or_else(|| Error::Config(format!("unknown feature `{n}`")))
            })
            .collect()
    }

    pub fn all(&self) -> Vec<(&str, &Raster)> {
        self.rasters.iter().map(|(n, r)| (n.as_str(), r)).collect()
    }

    pub fn write_dir(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.rasters
            .iter()
            .map(|(name, r)| {
                let path = dir.join(format!("{name}.asc"));
                write_ascii_grid(r, &path)?;
                Ok(path)
            })
            .collect()
    }
}

/// Load one DEM from one or more tiles.
///
/// `.hgt` files are read as SRTM tiles; anything else as an ASCII grid,
/// optionally in geographic coordinates.
pub fn load_dem(paths: &[PathBuf], geographic: bool, arc_seconds: u32) -> Result<Raster> {
    let tiles = paths
        .iter()
        .map(|p| {
            let is_hgt = p
                .extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("hgt"));
            if is_hgt {
                read_hgt(p, arc_seconds)
            } else {
                let r = read_ascii_grid(p)?;
                if geographic {
                    r.into_geographic()
                } else {
                    Ok(r)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    match tiles.len() {
        0 => Err(Error::Config("no DEM files given".into())),
        1 => Ok(tiles.into_iter().next().expect("one tile")),
        _ => Raster::mosaic(&tiles),
    }
}

/// D8 codes as a raster, outlets as 0 and missing cells as missing.
fn flow_direction_raster(filled: &Raster) -> (Raster, crate::hydrology::FlowDirGrid) {
    let fd = d8_flow_direction(filled);
    let values = (0..filled.len())
        .map(|i| match fd.code(i) {
            Some(c) => f64::from(c),
            None if fd.in_domain(i) => 0.0,
            None => f64::NAN,
        })
        .collect();
    (filled.derive(values), fd)
}

/// Sink-filled DEM for the given parameters.
pub fn condition(dem: &Raster, p: &TerrainParams) -> Result<Raster> {
    fill_sinks(dem, p.min_slope)
}

/// All terrain features of `dem`.
///
/// Local shape measures (slope aside) come from the DEM as given; flow,
/// wetness and channel-relative measures from the filled surface.
pub fn compute_features(dem: &Raster, p: &TerrainParams) -> Result<FeatureSet> {
    let filled = condition(dem, p)?;
    let depth = closed_depressions(dem, &filled)?;
    let (codes, fd) = flow_direction_raster(&filled);
    let acc = flow_accumulation(&fd)?;
    let slope_f = slope(&filled);
    let wetness = twi(&acc, &slope_f)?;
    let channels = extract_channels(&acc, p.channel_cells(dem))?;
    let cnd = distance_to_mask(&channels)?;
    let ridges = extract_ridges(&acc);
    let aacl = altitude_above_channel(&filled, &channels)?;
    let abrl = altitude_below_ridge(&filled, &ridges)?;
    let rps = relative_slope_position(&aacl, &abrl)?;
    let asp = aspect(dem);
    let ci = convergence_index(&asp);
    let rasters = vec![
        (
            "elevation",
            dem.derive(
                (0..dem.len())
                    .map(|i| dem.at(i).unwrap_or(f64::NAN))
                    .collect(),
            ),
        ),
        ("slope", slope_f),
        ("aspect", asp),
        ("plan_curvature", plan_curvature(dem)),
        ("profile_curvature", profile_curvature(dem)),
        ("tpi", tpi(dem, p.tpi_radius)?),
        ("convergence_index", ci),
        ("flow_direction", codes),
        ("flow_accumulation", acc),
        ("twi", wetness),
        ("closed_depressions", depth),
        ("cnd", cnd),
        ("aacl", aacl),
        ("abrl", abrl),
        ("rps", rps),
    ];
    Ok(FeatureSet {
        rasters: rasters
            .into_iter()
            .map(|(n, r)| (n.to_string(), r))
            .collect(),
    })
}

/// Labelled points: selected positives first, then the generated negatives.
pub fn labelled_points(
    positives: &[crate::raster::GeoPoint],
    negatives: &[crate::raster::GeoPoint],
) -> Vec<LabeledPoint> {
    positives
        .iter()
        .map(|&p| LabeledPoint::new(p, true))
        .chain(negatives.iter().map(|&p| LabeledPoint::new(p, false)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub negatives: u64,
    pub model: u64,
    pub undersample: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub min_pos_dist: f64,
    pub min_neg_dist: f64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        let n = NegativeParams::default();
        Self {
            min_pos_dist: n.min_pos_dist,
            min_neg_dist: n.min_neg_dist,
        }
    }
}

fn default_model() -> ModelSpec {
    ModelSpec::default_for(Family::GradientBoosting)
}

fn default_percentile() -> f64 {
    80.0
}

fn default_threshold() -> f64 {
    0.5
}

fn default_arc_seconds() -> u32 {
    1
}

fn default_true() -> bool {
    true
}

/// Everything one run needs. Relative paths in a config file resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dem: Vec<PathBuf>,
    /// ASCII grids are in longitude/latitude degrees.
    #[serde(default)]
    pub geographic: bool,
    #[serde(default = "default_arc_seconds")]
    pub arc_seconds: u32,
    pub positives: PathBuf,
    pub chunks: PathBuf,
    #[serde(default)]
    pub variant: Variant,
    /// Fixed feature list; screening picks the features when absent.
    #[serde(default)]
    pub features: Option<Vec<String>>,
    /// Features of an additional logistic model scored on the same split.
    #[serde(default)]
    pub baseline: Option<Vec<String>>,
    #[serde(default = "default_percentile")]
    pub split_percentile: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub output: PathBuf,
    #[serde(default = "default_true")]
    pub png: bool,
    #[serde(default)]
    pub terrain: TerrainParams,
    #[serde(default)]
    pub screening: ScreenParams,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
}

impl PipelineConfig {
    /// A config with default settings for the given inputs.
    pub fn new(dem: PathBuf, positives: PathBuf, chunks: PathBuf, output: PathBuf) -> Self {
        Self {
            dem: vec![dem],
            geographic: false,
            arc_seconds: default_arc_seconds(),
            positives,
            chunks,
            variant: Variant::A,
            features: None,
            baseline: None,
            split_percentile: default_percentile(),
            threshold: default_threshold(),
            output,
            png: true,
            terrain: TerrainParams::default(),
            screening: ScreenParams::default(),
            sampling: SamplingParams::default(),
            seeds: Seeds::default(),
            model: default_model(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Read a config file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.dem.iter_mut().for_each(resolve);
        resolve(&mut cfg.positives);
        resolve(&mut cfg.chunks);
        resolve(&mut cfg.output);
        Ok(cfg)
    }

    /// Check inputs exist and parameters are usable.
    pub fn validate(&self) -> Result<()> {
        if self.dem.is_empty() {
            return Err(Error::Config("no DEM files given".into()));
        }
        for p in self.dem.iter().chain([&self.positives, &self.chunks]) {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "input file not found: {}",
                    p.display()
                )));
            }
        }
        if !(self.split_percentile > 0.0 && self.split_percentile <= 100.0) {
            return Err(Error::Config(format!(
                "split percentile must be in (0, 100], got {}",
                self.split_percentile
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Config(format!(
                "classification threshold must be in [0, 1], got {}",
                self.threshold
            )));
        }
        let unknown = self
            .features
            .iter()
            .chain(&self.baseline)
            .flatten()
            .find(|f| !FEATURES.contains(&f.as_str()));
        if let Some(f) = unknown {
            return Err(Error::Config(format!("unknown feature `{f}`")));
        }
        if self.features.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::Config("feature list is empty".into()));
        }
        Ok(())
    }
}

/// Row and point counts of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub survey_records: usize,
    pub positive_points: usize,
    pub negative_points: usize,
    pub dropped_outside: usize,
    pub dropped_nodata: usize,
    pub table_rows: usize,
    pub train_rows: usize,
    pub train_positive: usize,
    pub test_rows: usize,
    pub test_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub variant: Variant,
    pub features: Vec<String>,
    /// "config" or "screening".
    pub feature_source: String,
    pub family: Family,
    pub model: ModelSpec,
    pub seeds: Seeds,
    pub split_percentile: f64,
    pub split_threshold: f64,
    pub threshold: f64,
    pub terrain: TerrainParams,
    pub channel_cells: f64,
    pub sampling: SamplingParams,
    pub screening: ScreenParams,
    pub counts: RunCounts,
    pub metrics: EvalReport,
    #[serde(default)]
    pub baseline: Option<BaselineResult>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub features: Vec<String>,
    pub metrics: EvalReport,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: EvalReport,
    pub risk: Raster,
    pub screening: ScreeningReport,
    pub model: TrainedModel,
    pub baseline: Option<BaselineResult>,
    pub manifest: Manifest,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn score(model: &TrainedModel, test: &FeatureTable) -> Result<Vec<f64>> {
    let cols = test.select(&model.feature_names)?;
    model.predict_many(cols.rows())
}

/// Run every stage and write the artifacts into `cfg.output`.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.validate()?;

    let dem = load_dem(&cfg.dem, cfg.geographic, cfg.arc_seconds).stage("ingest")?;
    let (records, chunks) = load_survey(&cfg.positives, &cfg.chunks).stage("ingest")?;
    log::info!(
        "DEM {}x{}, {} survey records, {} chunks",
        dem.rows(),
        dem.cols(),
        records.len(),
        chunks.len()
    );

    let features = compute_features(&dem, &cfg.terrain).stage("features")?;

    let positives = select_positives(&records, cfg.variant);
    let neg_params = NegativeParams {
        min_pos_dist: cfg.sampling.min_pos_dist,
        min_neg_dist: cfg.sampling.min_neg_dist,
        seed: cfg.seeds.negatives,
    };
    let negatives = generate_negatives(&chunks, &positives, &dem, &neg_params).stage("sample")?;
    let points = labelled_points(&positives, &negatives);
    let (table, stats) = extract_features(&points, &features.all()).stage("sample")?;
    log::info!(
        "{} positives, {} negatives, {} rows kept",
        positives.len(),
        negatives.len(),
        table.len()
    );

    let screening = screen(&table, &cfg.screening).stage("screen")?;
    let (selected, source) = match &cfg.features {
        Some(f) => (f.clone(), "config"),
        None => (screening.selected.clone(), "screening"),
    };
    if selected.is_empty() {
        return Err(Error::Config("screening kept no features".into())).stage("screen");
    }

    let split = split_by_longitude(&table, cfg.split_percentile).stage("split")?;
    let train = split.train.select(&selected).stage("split")?;

    let weights = balanced_weights(&train.labels()).stage("train")?;
    let spec = cfg.model.with_seed(cfg.seeds.model);
    let model = fit(&spec, &train, &weights).stage("train")?;

    let test = undersample_negatives(&split.test, cfg.seeds.undersample).stage("undersample")?;
    let labels = test.labels();
    let scores = score(&model, &test).stage("evaluate")?;
    let report =
        evaluate(&scores, &labels, cfg.threshold, cfg.seeds.undersample).stage("evaluate")?;
    let roc = roc_curve(&scores, &labels).stage("evaluate")?;

    let baseline = match &cfg.baseline {
        Some(names) => {
            let base_train = split.train.select(names).stage("baseline")?;
            let base = fit(
                &ModelSpec::default_for(Family::Logistic),
                &base_train,
                &weights,
            )
            .stage("baseline")?;
            let s = score(&base, &test).stage("baseline")?;
            Some(BaselineResult {
                features: names.clone(),
                metrics: evaluate(&s, &labels, cfg.threshold, cfg.seeds.undersample)
                    .stage("baseline")?,
            })
        }
        None => None,
    };

    let risk = features
        .named(&selected)
        .and_then(|named| predict_grid(&model, &named))
        .stage("predict")?;

    let out = &cfg.output;
    fs::create_dir_all(out)
        .map_err(|e| Error::io(out, e))
        .stage("write")?;
    let mut artifacts = vec![
        "report.toml",
        "screening.toml",
        "roc.csv",
        "model.wm",
        "dataset.csv",
        "train.csv",
        "test.csv",
        "risk.asc",
    ];
    let write = || -> Result<()> {
        write_text(&out.join("report.toml"), &report.to_toml()?)?;
        write_text(&out.join("screening.toml"), &screening.to_toml()?)?;
        let roc_path = out.join("roc.csv");
        let f = fs::File::create(&roc_path).map_err(|e| Error::io(&roc_path, e))?;
        write_roc_csv(&roc, std::io::BufWriter::new(f))?;
        model.save(&out.join("model.wm"))?;
        table.save(&out.join("dataset.csv"))?;
        train.save(&out.join("train.csv"))?;
        test.select(&selected)?.save(&out.join("test.csv"))?;
        write_ascii_grid(&risk, out.join("risk.asc"))?;
        if cfg.png {
            write_probability_png(&risk, &out.join("risk.png"))?;
        }
        Ok(())
    };
    write().stage("write")?;
    if cfg.png {
        artifacts.push("risk.png");
    }
    artifacts.push("manifest.toml");

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        variant: cfg.variant,
        features: selected,
        feature_source: source.to_string(),
        family: model.family,
        model: spec,
        seeds: cfg.seeds,
        split_percentile: cfg.split_percentile,
        split_threshold: split.threshold,
        threshold: cfg.threshold,
        terrain: cfg.terrain,
        channel_cells: cfg.terrain.channel_cells(&dem),
        sampling: cfg.sampling,
        screening: cfg.screening,
        counts: RunCounts {
            survey_records: records.len(),
            positive_points: positives.len(),
            negative_points: negatives.len(),
            dropped_outside: stats.outside,
            dropped_nodata: stats.nodata,
            table_rows: table.len(),
            train_rows: train.len(),
            train_positive: train.n_positive(),
            test_rows: split.test.len(),
            test_positive: split.test.n_positive(),
        },
        metrics: report.clone(),
        baseline: baseline.clone(),
        artifacts: artifacts.iter().map(|s| s.to_string()).collect(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Format(e.to_string()));
    text.and_then(|t| write_text(&out.join("manifest.toml"), &t))
        .stage("write")?;

    Ok(PipelineOutput {
        report,
        risk,
        screening,
        model,
        baseline,
        manifest,
    })
}
