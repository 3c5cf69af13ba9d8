use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gazeflow::diagnosis::FlagCode;
use gazeflow::llm::{LlmError, ScriptedProvider};
use gazeflow::pipeline::{run_pipeline, DetectorSelection, PipelineConfig, Stage};
use gazeflow::synth::{generate, SynthConfig};
use gazeflow::{CoordUnits, DetectorKind, EventLabel, GeometryConfig};
use sha2::{Digest, Sha256};

fn write_synth(dir: &Path, name: &str, seed: u64) -> PathBuf {
    let p = dir.join(name);
    let mut buf = Vec::new();
    generate(&SynthConfig::default(), seed).write_csv(&mut buf).unwrap();
    fs::write(&p, buf).unwrap();
    p
}

fn degree_config(dir: &Path, inputs: Vec<PathBuf>) -> PipelineConfig {
    PipelineConfig {
        inputs,
        output_dir: dir.join("out"),
        coord_units: CoordUnits::Degree,
        ..Default::default()
    }
}

fn tree_hashes(root: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
            }
        }
    }
    out
}

#[test]
fn end_to_end_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = vec![write_synth(dir.path(), "a.csv", 1), write_synth(dir.path(), "b.csv", 2)];
    let cfg = degree_config(dir.path(), inputs);
    let summary = run_pipeline(&cfg, None).unwrap();
    assert_eq!(summary.files.len(), 2);
    let out = &cfg.output_dir;
    for f in [
        "effective_config.toml",
        "summary.json",
        "metrics_table.txt",
        "a.schema.json",
        "a.clean.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for det in ["ivt", "idt"] {
        for ext in [
            "labels.csv",
            "segments.json",
            "metrics.json",
            "diagnosis.json",
            "diagnosis.txt",
        ] {
            assert!(out.join(det).join(format!("b.{ext}")).is_file(), "{det} {ext}");
        }
    }
    let table = summary.table().unwrap();
    assert_eq!(table.lines().count(), 5);
    let ivt = &summary.micro[&DetectorKind::Ivt];
    assert!(ivt.class(EventLabel::Fixation).f1.unwrap() > 0.95);
    let labels = fs::read_to_string(out.join("ivt/a.labels.csv")).unwrap();
    assert!(labels.starts_with("time_s,label\n0,fixation\n"));
    let effective = PipelineConfig::load(&out.join("effective_config.toml")).unwrap();
    assert_eq!(effective, cfg);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = degree_config(dir.path(), vec![write_synth(dir.path(), "a.csv", 5)]);
    run_pipeline(&cfg, None).unwrap();
    let first = tree_hashes(&cfg.output_dir);
    fs::remove_dir_all(&cfg.output_dir).unwrap();
    run_pipeline(&cfg, None).unwrap();
    assert_eq!(first, tree_hashes(&cfg.output_dir));
}

#[test]
fn raised_threshold_reuses_cleaned_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = degree_config(dir.path(), vec![write_synth(dir.path(), "a.csv", 9)]);
    cfg.detectors = DetectorSelection::Ivt;
    // far too low: everything becomes saccade
    cfg.ivt.velocity_threshold_dps = 0.5;
    let first = run_pipeline(&cfg, None).unwrap();
    let run = &first.files[0];
    assert!(!run.cache_hit);
    let d = &run.runs[0].diagnosis;
    let collapse = d
        .flags
        .iter()
        .find(|f| f.code == FlagCode::AllSaccadeCollapse)
        .expect("collapse flagged");
    let theta = collapse.suggested_params.unwrap().velocity_threshold_dps.unwrap();
    assert!((30.0..=100.0).contains(&theta));

    cfg.ivt.velocity_threshold_dps = theta;
    let second = run_pipeline(&cfg, None).unwrap();
    assert!(second.files[0].cache_hit);
    assert_ne!(first.micro, second.micro);
    assert!(!second.files[0].runs[0].diagnosis.has_critical());
}

#[test]
fn pixels_without_geometry_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = degree_config(dir.path(), vec![write_synth(dir.path(), "a.csv", 1)]);
    cfg.coord_units = CoordUnits::Pixel;
    let err = run_pipeline(&cfg, None).unwrap_err();
    assert_eq!(err.stage, Stage::Detect);
    assert_eq!(err.exit_code(), 4);
    cfg.geometry = Some(GeometryConfig::new(0.25, 600.0));
    run_pipeline(&cfg, None).unwrap();
}

#[test]
fn llm_in_offline_mode_fails_before_work() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = degree_config(dir.path(), vec![dir.path().join("missing.csv")]);
    cfg.llm.enabled = true;
    let err = run_pipeline(&cfg, None).unwrap_err();
    assert_eq!(err.stage, Stage::Config);
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("offline"));
    assert!(!cfg.output_dir.exists());
}

#[test]
fn mocked_model_run_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_synth(dir.path(), "a.csv", 4);
    let schema = gazeflow::ingest::sniff_schema(&fs::read(&input).unwrap(), 8192).unwrap();
    let schema_reply = format!("Four numeric columns with a label.\n{}", schema.to_json());
    let narrative = "Both detectors look consistent; no anomalies.";
    let mut cfg = degree_config(dir.path(), vec![input]);
    cfg.offline = false;
    cfg.llm.enabled = true;
    cfg.llm.audit_log = false;

    let mut hashes = Vec::new();
    for _ in 0..2 {
        let p = ScriptedProvider::replying(&[&schema_reply, narrative]);
        let s = run_pipeline(&cfg, Some(&p)).unwrap();
        assert_eq!(s.files[0].llm_diagnosis.as_ref().unwrap().narrative, narrative);
        assert_eq!(p.requests().len(), 2);
        hashes.push(tree_hashes(&cfg.output_dir));
        fs::remove_dir_all(&cfg.output_dir).unwrap();
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn provider_failure_without_fallback_exit_5() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = degree_config(dir.path(), vec![write_synth(dir.path(), "a.csv", 4)]);
    cfg.offline = false;
    cfg.llm.enabled = true;
    cfg.llm.fallback = false;
    let p = ScriptedProvider::new([Err(LlmError::ProviderTimeout)]);
    let err = run_pipeline(&cfg, Some(&p)).unwrap_err();
    assert_eq!(err.stage, Stage::Inspect);
    assert_eq!(err.exit_code(), 5);

    cfg.llm.fallback = true;
    let p = ScriptedProvider::new([Err(LlmError::ProviderTimeout), Err(LlmError::ProviderTimeout)]);
    let s = run_pipeline(&cfg, Some(&p)).unwrap();
    assert!(s.files[0].llm_diagnosis.is_none());
    assert!(cfg.output_dir.join("llm_audit.jsonl").is_file());
}
