use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use wetmap::analysis::{screen, ScreenParams};
use wetmap::eval::{
    evaluate, predict_grid, roc_curve, undersample_negatives, write_probability_png, write_roc_csv,
};
use wetmap::hydrology::{closed_depressions, fill_sinks};
use wetmap::learn::{balanced_weights, fit, Family, ModelSpec, TrainedModel};
use wetmap::pipeline::{
    compute_features, labelled_points, load_dem, run_pipeline, FeatureSet, PipelineConfig,
    TerrainParams, DATASET_A, DATASET_B,
};
use wetmap::raster::{read_ascii_grid, write_ascii_grid, Raster};
use wetmap::sampling::{
    extract_features, generate_negatives, load_survey, select_positives, split_by_longitude,
    FeatureTable, NegativeParams, Variant,
};
use wetmap::synthetic::{Scenario, SynthParams};

#[derive(Parser)]
#[command(
    name = "wetmap",
    version,
    about = "Terrain features and water-site risk maps from DEMs"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill sinks in a DEM.
    Fill(FillArgs),
    /// Write every terrain feature raster.
    Features(FeaturesArgs),
    /// Build the labelled feature table from a survey.
    Sample(SampleArgs),
    /// Significance and redundancy screening of a feature table.
    Screen(ScreenArgs),
    /// Train a classifier on the western part of a table.
    Train(TrainArgs),
    /// Score a model on a held-out table.
    Evaluate(EvaluateArgs),
    /// Render a probability raster.
    Predict(PredictArgs),
    /// Run every stage from a config file.
    Pipeline(PipelineArgs),
    /// Generate a synthetic terrain, survey and config.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct DemArgs {
    /// DEM tiles (.hgt or ESRI ASCII grid); several are mosaicked.
    #[arg(long = "dem", required = true, num_args = 1..)]
    dem: Vec<PathBuf>,
    /// ASCII grid coordinates are degrees.
    #[arg(long)]
    geographic: bool,
    /// SRTM tile resolution.
    #[arg(long, default_value_t = 1)]
    arc_seconds: u32,
}

impl DemArgs {
    fn load(&self) -> Result<Raster> {
        load_dem(&self.dem, self.geographic, self.arc_seconds).context("loading DEM")
    }
}

#[derive(Args, Clone, Default)]
struct TerrainArgs {
    /// TPI radius in meters.
    #[arg(long)]
    tpi_radius: Option<f64>,
    /// Fill gradient per cell step.
    #[arg(long)]
    min_slope: Option<f64>,
    /// Contributing cells that make a channel.
    #[arg(long)]
    channel_threshold: Option<f64>,
}

impl TerrainArgs {
    fn apply(&self, mut p: TerrainParams) -> TerrainParams {
        if let Some(v) = self.tpi_radius {
            p.tpi_radius = v;
        }
        if let Some(v) = self.min_slope {
            p.min_slope = v;
        }
        if self.channel_threshold.is_some() {
            p.channel_threshold = self.channel_threshold;
        }
        p
    }
}

#[derive(Args)]
struct FillArgs {
    #[command(flatten)]
    dem: DemArgs,
    #[arg(long, default_value_t = 0.01)]
    min_slope: f64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the fill depth.
    #[arg(long)]
    depressions: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    dem: DemArgs,
    #[command(flatten)]
    terrain: TerrainArgs,
    /// Output directory for `<feature>.asc` files.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    dem: DemArgs,
    #[command(flatten)]
    terrain: TerrainArgs,
    #[arg(long)]
    positives: PathBuf,
    #[arg(long)]
    chunks: PathBuf,
    #[arg(long, default_value = "A")]
    variant: Variant,
    #[arg(long, default_value_t = 100.0)]
    min_pos_dist: f64,
    #[arg(long, default_value_t = 30.0)]
    min_neg_dist: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output table (CSV).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScreenArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    p_threshold: f64,
    #[arg(long, default_value_t = 0.85)]
    r_threshold: f64,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// Report file (TOML); printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value = "gradient_boosting")]
    family: Family,
    /// Feature columns, comma separated; `A`/`B` name the preset lists.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    n_trees: Option<usize>,
    /// Longitude percentile for the train/test split.
    #[arg(long, default_value_t = 80.0)]
    split_percentile: f64,
    /// Train on every row instead of the western part.
    #[arg(long)]
    no_split: bool,
    /// Model file.
    #[arg(long)]
    out: PathBuf,
    /// Where to write the eastern (test) rows.
    #[arg(long)]
    test_out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    table: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep every negative instead of undersampling to the positive count.
    #[arg(long)]
    no_undersample: bool,
    /// Report file (TOML); printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// ROC curve CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// DEM tiles; features are computed from them.
    #[arg(long = "dem", num_args = 1..)]
    dem: Vec<PathBuf>,
    #[arg(long)]
    geographic: bool,
    #[arg(long, default_value_t = 1)]
    arc_seconds: u32,
    /// Directory of `<feature>.asc` rasters, used instead of a DEM.
    #[arg(long, conflicts_with = "dem")]
    features_dir: Option<PathBuf>,
    #[command(flatten)]
    terrain: TerrainArgs,
    /// Probability raster (ASCII grid).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    png: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "dem", num_args = 1..)]
    dem: Vec<PathBuf>,
    #[arg(long)]
    positives: Option<PathBuf>,
    #[arg(long)]
    chunks: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    family: Option<Family>,
    /// Feature columns, comma separated; `A`/`B` name the preset lists.
    #[arg(long, value_delimiter = ',')]
    features: Vec<String>,
    /// Ignore any configured feature list and use screening.
    #[arg(long, conflicts_with = "features")]
    screen: bool,
    /// Features of a logistic baseline scored on the same split.
    #[arg(long, value_delimiter = ',')]
    baseline: Vec<String>,
    /// Seed for negatives, model and undersampling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    split_percentile: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    #[command(flatten)]
    terrain: TerrainArgs,
    #[arg(long)]
    no_png: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// Generator settings (TOML); flags below override it.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid side length in cells.
    #[arg(long)]
    size: Option<usize>,
    #[arg(long)]
    positives: Option<usize>,
    #[arg(long)]
    chunks: Option<usize>,
}

fn expand_features(list: &[String]) -> Vec<String> {
    match list {
        [one] if one.eq_ignore_ascii_case("a") => DATASET_A.map(String::from).to_vec(),
        [one] if one.eq_ignore_ascii_case("b") => DATASET_B.map(String::from).to_vec(),
        _ => list.to_vec(),
    }
}

fn write_or_print(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_fill(a: FillArgs) -> Result<()> {
    let dem = a.dem.load()?;
    let filled = fill_sinks(&dem, a.min_slope)?;
    write_ascii_grid(&filled, &a.out)?;
    if let Some(p) = &a.depressions {
        write_ascii_grid(&closed_depressions(&dem, &filled)?, p)?;
    }
    info!("filled {}x{} grid", dem.rows(), dem.cols());
    Ok(())
}

fn cmd_features(a: FeaturesArgs) -> Result<()> {
    let dem = a.dem.load()?;
    let set = compute_features(&dem, &a.terrain.apply(TerrainParams::default()))?;
    let written = set.write_dir(&a.out)?;
    info!("wrote {} rasters to {}", written.len(), a.out.display());
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let dem = a.dem.load()?;
    let (records, chunks) = load_survey(&a.positives, &a.chunks)?;
    let set = compute_features(&dem, &a.terrain.apply(TerrainParams::default()))?;
    let positives = select_positives(&records, a.variant);
    let params = NegativeParams {
        min_pos_dist: a.min_pos_dist,
        min_neg_dist: a.min_neg_dist,
        seed: a.seed,
    };
    let negatives = generate_negatives(&chunks, &positives, &dem, &params)?;
    let (table, stats) = extract_features(&labelled_points(&positives, &negatives), &set.all())?;
    table.save(&a.out)?;
    println!(
        "{} rows ({} positive); dropped {} outside the grid, {} over missing values",
        table.len(),
        table.n_positive(),
        stats.outside,
        stats.nodata
    );
    Ok(())
}

fn cmd_screen(a: ScreenArgs) -> Result<()> {
    let table = FeatureTable::load(&a.table)?;
    let params = ScreenParams {
        p_threshold: a.p_threshold,
        r_threshold: a.r_threshold,
        bins: a.bins,
    };
    let report = screen(&table, &params)?;
    eprintln!("selected: {}", report.selected.join(", "));
    write_or_print(&report.to_toml()?, a.out.as_deref())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let table = FeatureTable::load(&a.table)?;
    let names = match expand_features(&a.features) {
        v if v.is_empty() => table.names().to_vec(),
        v => v,
    };
    let (train, test) = if a.no_split {
        (table, None)
    } else {
        let split = split_by_longitude(&table, a.split_percentile)?;
        info!("split at x = {}", split.threshold);
        (split.train, Some(split.test))
    };
    let train = train.select(&names)?;
    let mut spec = ModelSpec::default_for(a.family).with_seed(a.seed);
    if let Some(n) = a.n_trees {
        match &mut spec {
            ModelSpec::RandomForest(p) => p.n_trees = n,
            ModelSpec::ExtraTrees(p) => p.n_trees = n,
            ModelSpec::GradientBoosting(p) => p.n_trees = n,
            ModelSpec::Logistic(_) | ModelSpec::LinearSvm(_) => {
                bail!("--n-trees does not apply to {}", a.family)
            }
        }
    }
    let weights = balanced_weights(&train.labels())?;
    let model = fit(&spec, &train, &weights)?;
    model.save(&a.out)?;
    if let (Some(path), Some(test)) = (&a.test_out, test) {
        test.select(&names)?.save(path)?;
    }
    println!("trained {} on {} rows", a.family, train.len());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let table = FeatureTable::load(&a.table)?;
    let table = if a.no_undersample {
        table
    } else {
        undersample_negatives(&table, a.seed)?
    };
    let rows = table.select(&model.feature_names)?;
    let scores = model.predict_many(rows.rows())?;
    let labels = table.labels();
    let report = evaluate(&scores, &labels, a.threshold, a.seed)?;
    if let Some(p) = &a.roc {
        let f = fs::File::create(p).with_context(|| format!("creating {}", p.display()))?;
        write_roc_csv(&roc_curve(&scores, &labels)?, std::io::BufWriter::new(f))?;
    }
    write_or_print(&report.to_toml()?, a.out.as_deref())
}

fn read_feature_dir(dir: &Path, names: &[String]) -> Result<FeatureSet> {
    let rasters = names
        .iter()
        .map(|n| {
            let p = dir.join(format!("{n}.asc"));
            let r = read_ascii_grid(&p).with_context(|| format!("reading {}", p.display()))?;
            Ok((n.clone(), r))
        })
        .collect::<Result<_>>()?;
    Ok(FeatureSet { rasters })
}

fn cmd_predict(a: PredictArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let set = match &a.features_dir {
        Some(dir) => read_feature_dir(dir, &model.feature_names)?,
        None => {
            if a.dem.is_empty() {
                bail!("either --dem or --features-dir is required");
            }
            let dem = load_dem(&a.dem, a.geographic, a.arc_seconds)?;
            compute_features(&dem, &a.terrain.apply(TerrainParams::default()))?
        }
    };
    let risk = predict_grid(&model, &set.named(&model.feature_names)?)?;
    write_ascii_grid(&risk, &a.out)?;
    if let Some(p) = &a.png {
        write_probability_png(&risk, p)?;
    }
    Ok(())
}

fn pipeline_config(a: &PipelineArgs) -> Result<PipelineConfig> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => {
            let (Some(pos), Some(ch), Some(out)) = (&a.positives, &a.chunks, &a.out) else {
                bail!("without --config, --dem, --positives, --chunks and --out are required");
            };
            let Some(dem) = a.dem.first() else {
                bail!("without --config, --dem is required");
            };
            PipelineConfig::new(dem.clone(), pos.clone(), ch.clone(), out.clone())
        }
    };
    if !a.dem.is_empty() {
        cfg.dem = a.dem.clone();
    }
    if let Some(p) = &a.positives {
        cfg.positives = p.clone();
    }
    if let Some(p) = &a.chunks {
        cfg.chunks = p.clone();
    }
    if let Some(p) = &a.out {
        cfg.output = p.clone();
    }
    if let Some(v) = a.variant {
        cfg.variant = v;
    }
    if let Some(f) = a.family {
        if f != cfg.model.family() {
            cfg.model = ModelSpec::default_for(f);
        }
    }
    if a.screen {
        cfg.features = None;
    } else if !a.features.is_empty() {
        cfg.features = Some(expand_features(&a.features));
    }
    if !a.baseline.is_empty() {
        cfg.baseline = Some(a.baseline.clone());
    }
    if let Some(s) = a.seed {
        cfg.seeds.negatives = s;
        cfg.seeds.model = s;
        cfg.seeds.undersample = s;
    }
    if let Some(p) = a.split_percentile {
        cfg.split_percentile = p;
    }
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    if a.no_png {
        cfg.png = false;
    }
    cfg.terrain = a.terrain.apply(cfg.terrain);
    Ok(cfg)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".into(), |v| format!("{v:.3}"))
}

fn cmd_pipeline(a: PipelineArgs) -> Result<()> {
    let cfg = pipeline_config(&a)?;
    let out = run_pipeline(&cfg)?;
    let r = &out.report;
    println!("features: {}", out.manifest.features.join(", "));
    println!(
        "{}: ROC {:.3}  recall {}  precision {}  specificity {}  f1 {}  ({} pos / {} neg)",
        out.model.family,
        r.roc_auc,
        fmt_opt(r.recall),
        fmt_opt(r.precision),
        fmt_opt(r.specificity),
        fmt_opt(r.f1),
        r.n_pos,
        r.n_neg
    );
    if let Some(b) = &out.baseline {
        println!(
            "baseline ({}): ROC {:.3}",
            b.features.join(", "),
            b.metrics.roc_auc
        );
    }
    println!("artifacts in {}", cfg.output.display());
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let mut p = match &a.params {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthParams::default(),
    };
    if let Some(s) = a.seed {
        p.seed = s;
    }
    if let Some(n) = a.size {
        p.size = n;
    }
    if let Some(n) = a.positives {
        p.positives = n;
    }
    if let Some(n) = a.chunks {
        p.chunks = n;
    }
    let scenario = Scenario::generate(&p)?;
    let files = scenario.write(&a.out)?;
    let rel = |path: &Path| PathBuf::from(path.file_name().expect("file name"));
    let mut cfg = PipelineConfig::new(
        rel(&files.dem),
        rel(&files.positives),
        rel(&files.chunks),
        PathBuf::from("run"),
    );
    cfg.features = Some(DATASET_A.map(String::from).to_vec());
    cfg.baseline = Some(vec!["slope".into()]);
    let cfg_path = a.out.join("pipeline.toml");
    fs::write(&cfg_path, cfg.to_toml()?)
        .with_context(|| format!("writing {}", cfg_path.display()))?;
    println!(
        "{} survey records, {} chunks; config at {}",
        scenario.records.len(),
        scenario.chunks.len(),
        cfg_path.display()
    );
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Fill(a) => cmd_fill(a),
        Command::Features(a) => cmd_features(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Screen(a) => cmd_screen(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Synth(a) => cmd_synth(a),
    }
}
