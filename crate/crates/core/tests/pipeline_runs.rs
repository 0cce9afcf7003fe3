use std::fs;
use std::path::Path;

use wetmap::learn::{Family, ModelSpec};
use wetmap::pipeline::{run_pipeline, PipelineConfig};
use wetmap::raster::read_ascii_grid;
use wetmap::synthetic::{Scenario, SynthParams};
use wetmap::Error;

fn small_params() -> SynthParams {
    SynthParams {
        size: 128,
        bowls: 12,
        positives: 400,
        artificial: 20,
        chunks: 150,
        seed: 3,
        ..Default::default()
    }
}

fn config(dir: &Path, out: &str) -> PipelineConfig {
    let files = Scenario::generate(&small_params())
        .unwrap()
        .write(dir)
        .unwrap();
    let mut cfg = PipelineConfig::new(files.dem, files.positives, files.chunks, dir.join(out));
    cfg.features = Some(vec![
        "tpi".into(),
        "twi".into(),
        "rps".into(),
        "closed_depressions".into(),
    ]);
    cfg.baseline = Some(vec!["slope".into()]);
    if let ModelSpec::GradientBoosting(mut p) = ModelSpec::default_for(Family::GradientBoosting) {
        p.n_trees = 60;
        cfg.model = ModelSpec::GradientBoosting(p);
    }
    cfg
}

#[test]
fn synthetic_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "out");
    let run = run_pipeline(&cfg).unwrap();
    for name in &run.manifest.artifacts {
        assert!(cfg.output.join(name).is_file(), "missing {name}");
    }
    for name in [
        "manifest.toml",
        "report.toml",
        "risk.asc",
        "risk.png",
        "roc.csv",
        "model.wm",
    ] {
        assert!(cfg.output.join(name).is_file(), "missing {name}");
    }
    let risk = read_ascii_grid(cfg.output.join("risk.asc")).unwrap();
    assert_eq!((risk.rows(), risk.cols()), (128, 128));
    assert!(risk
        .values()
        .iter()
        .all(|&v| v == risk.nodata() || (0.0..=1.0).contains(&v)));
    let c = run.manifest.counts;
    assert_eq!(c.train_rows + c.test_rows, c.table_rows);
    assert_eq!(run.report.n_pos, run.report.n_neg);
    assert!(run.report.roc_auc > 0.7, "AUC {}", run.report.roc_auc);
    assert!(run.baseline.is_some());
    assert_eq!(run.model.feature_names, cfg.features.clone().unwrap());
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a_cfg = config(dir.path(), "a");
    let mut b_cfg = a_cfg.clone();
    b_cfg.output = dir.path().join("b");
    let a = run_pipeline(&a_cfg).unwrap();
    let b = run_pipeline(&b_cfg).unwrap();
    assert_eq!(a.report, b.report);
    assert_eq!(a.manifest.metrics, b.manifest.metrics);
    for name in [
        "risk.asc",
        "report.toml",
        "manifest.toml",
        "model.wm",
        "dataset.csv",
    ] {
        let x = fs::read(a_cfg.output.join(name)).unwrap();
        let y = fs::read(b_cfg.output.join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
    }
}

#[test]
fn missing_dem_is_a_config_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), "out");
    let missing = dir.path().join("nowhere").join("dem.asc");
    cfg.dem = vec![missing.clone()];
    match run_pipeline(&cfg) {
        Err(Error::Config(msg)) => assert!(msg.contains(&missing.display().to_string()), "{msg}"),
        other => panic!("expected a config error, got {other:?}"),
    }
    assert!(!cfg.output.exists());
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "out");
    let mut rel = cfg.clone();
    rel.dem = vec!["dem.asc".into()];
    rel.positives = "positives.csv".into();
    rel.chunks = "chunks.csv".into();
    rel.output = "out".into();
    let path = dir.path().join("run.toml");
    fs::write(&path, rel.to_toml().unwrap()).unwrap();
    let loaded = PipelineConfig::load(&path).unwrap();
    assert_eq!(loaded.dem, cfg.dem);
    assert_eq!(loaded.positives, cfg.positives);
    assert_eq!(loaded.output, cfg.output);
    assert_eq!(loaded.model, cfg.model);
    loaded.validate().unwrap();
}
