//! inspect -> clean -> detect -> evaluate -> diagnose, driven by one config.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! effective_config.toml
//! summary.json, metrics_table.txt
//! <stem>.schema.json, <stem>.clean.csv, <stem>.clean_report.json
//! <ivt|idt>/<stem>.labels.csv, .segments.json, .metrics.json,
//!           .diagnosis.json, .diagnosis.txt
//! <stem>.llm_diagnosis.json, llm_audit.jsonl   (model runs only)
//! .cache/<sha256>.json                          (cleaned data)
//! ```
//!
//! Offline runs are byte-deterministic.

mod config;
mod error;
mod io;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::detect::{detect, DetectionResult};
use crate::diagnosis::{diagnose, DiagnosisReport};
use crate::eval::{evaluate, render_table, MetricsReport};
use crate::ingest::{
    clean, read_table, sniff_schema, CleanOptions, CleanOutput, ColumnMapping, IngestError, SchemaDescription,
};
use crate::llm::{self, AuditLog, ChatProvider, HttpChatProvider, LlmDiagnosis, PromptTemplate, TemplateName};
use crate::preprocess::{angular_velocity, DegreeSeries};
use crate::types::{DetectorKind, LabeledSeries};

pub use config::{
    file_stem, AlignmentSection, ColumnOverrides, DetectorSelection, IdtSection, IvtSection, LlmSection,
    PipelineConfig, SchemaPrompt,
};
pub use error::{PipelineError, Stage, StageError};
pub use io::{read_label_csv, write_labels_csv};

/// Bump when the cleaned-data format or cleaning semantics change.
const CACHE_VERSION: &str = "gazeflow-clean-v1";

/// Model access for one run. `None` provider means offline.
pub struct LlmContext<'a> {
    pub provider: &'a dyn ChatProvider,
    pub audit: Option<&'a AuditLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorRun {
    pub kind: DetectorKind,
    pub result: DetectionResult,
    pub metrics: Option<MetricsReport>,
    pub diagnosis: DiagnosisReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FileRun {
    pub path: PathBuf,
    pub stem: String,
    pub schema: SchemaDescription,
    pub mapping: ColumnMapping,
    pub cleaned: CleanOutput,
    pub cache_hit: bool,
    pub runs: Vec<DetectorRun>,
    pub llm_diagnosis: Option<LlmDiagnosis>,
}

/// What a run did, for the caller; not written to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub files: Vec<FileRun>,
    pub micro: BTreeMap<DetectorKind, MetricsReport>,
}

impl RunSummary {
    pub fn table(&self) -> Option<String> {
        (!self.micro.is_empty()).then(|| render_table(&self.micro.iter().map(|(k, m)| (*k, m)).collect::<Vec<_>>()))
    }
}

fn stage<E: Into<StageError>>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::new(stage, e.into())
}

/// Sniffs the structure of `raw`, or asks the model when `llm` is given.
pub fn inspect_bytes(
    raw: &[u8],
    cfg: &PipelineConfig,
    llm: Option<&LlmContext>,
) -> Result<SchemaDescription, PipelineError> {
    match llm {
        None => sniff_schema(raw, cfg.sample_chars).map_err(stage(Stage::Inspect)),
        Some(ctx) => {
            let mut provider_cfg = cfg.llm.provider.clone();
            provider_cfg.max_snippet_chars = cfg.sample_chars;
            let template = PromptTemplate::builtin(cfg.llm.template.template_name());
            llm::infer_schema_or_sniff(raw, &provider_cfg, &template, ctx.provider, ctx.audit, cfg.llm.fallback)
                .map(|(s, _)| s)
                .map_err(stage(Stage::Inspect))
        }
    }
}

/// Inferred mapping with config overrides applied.
pub fn column_mapping(schema: &SchemaDescription, o: &ColumnOverrides) -> Result<ColumnMapping, IngestError> {
    let mut m = match (ColumnMapping::infer(schema), &o.time_col, &o.x_col, &o.y_col) {
        (Ok(m), ..) => m,
        (Err(_), Some(t), Some(x), Some(y)) => ColumnMapping {
            time_col: t.clone(),
            x_col: x.clone(),
            y_col: y.clone(),
            label_col: None,
            drop_cols: Vec::new(),
        },
        (Err(e), ..) => return Err(e),
    };
    if let Some(t) = &o.time_col {
        m.time_col = t.clone();
    }
    if let Some(x) = &o.x_col {
        m.x_col = x.clone();
    }
    if let Some(y) = &o.y_col {
        m.y_col = y.clone();
    }
    if let Some(l) = &o.label_col {
        m.label_col = (!l.is_empty()).then(|| l.clone());
    }
    m.fill_drop_cols(schema);
    m.validate(schema)?;
    Ok(m)
}

pub fn clean_options(cfg: &PipelineConfig, source_id: &str) -> CleanOptions {
    CleanOptions {
        coord_units: cfg.coord_units,
        time_unit: cfg.time_unit,
        confidence: cfg.confidence.clone(),
        source_id: source_id.to_string(),
    }
}

fn cache_key(raw: &[u8], schema: &SchemaDescription, mapping: &ColumnMapping, opts: &CleanOptions) -> String {
    let mut h = Sha256::new();
    h.update(CACHE_VERSION.as_bytes());
    h.update([0]);
    h.update(raw);
    h.update([0]);
    let cfg = serde_json::json!({ "schema": schema, "mapping": mapping, "options": opts });
    h.update(cfg.to_string().as_bytes());
    hex::encode(h.finalize())
}

fn load_cached(path: &Path) -> Option<CleanOutput> {
    let text = fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

/// Inspected and cleaned input, before detection.
#[derive(Debug, Clone, PartialEq)]
pub struct CleanedFile {
    pub schema: SchemaDescription,
    pub mapping: ColumnMapping,
    pub cleaned: CleanOutput,
    pub cache_hit: bool,
}

/// Inspect and clean stages for one file. `cache_dir` enables the
/// cleaned-data cache.
pub fn clean_file(
    path: &Path,
    cfg: &PipelineConfig,
    llm: Option<&LlmContext>,
    cache_dir: Option<&Path>,
) -> Result<CleanedFile, PipelineError> {
    let raw = fs::read(path).map_err(|e| {
        PipelineError::new(
            Stage::Inspect,
            StageError::Ingest(IngestError::UnreadableInput(format!("{}: {e}", path.display()))),
        )
    })?;
    let schema = inspect_bytes(&raw, cfg, llm)?;

    let mapping = column_mapping(&schema, &cfg.columns).map_err(stage(Stage::Clean))?;
    let opts = clean_options(cfg, &file_stem(path));
    let cache_file = cache_dir.map(|d| d.join(format!("{}.json", cache_key(&raw, &schema, &mapping, &opts))));
    let (cleaned, cache_hit) = match cache_file.as_deref().and_then(load_cached) {
        Some(c) => (c, true),
        None => {
            let table = read_table(&raw, &schema).map_err(stage(Stage::Clean))?;
            let c = clean(&table, &mapping, &schema, &opts).map_err(stage(Stage::Clean))?;
            if let Some(f) = &cache_file {
                io::write_atomic(
                    f,
                    serde_json::to_string(&c).expect("clean output serializes").as_bytes(),
                )
                .map_err(stage(Stage::Clean))?;
            }
            (c, false)
        }
    };
    Ok(CleanedFile {
        schema,
        mapping,
        cleaned,
        cache_hit,
    })
}

/// Runs every stage for one file in memory.
pub fn analyze_file(
    path: &Path,
    cfg: &PipelineConfig,
    llm: Option<&LlmContext>,
    cache_dir: Option<&Path>,
) -> Result<FileRun, PipelineError> {
    let stem = file_stem(path);
    let CleanedFile {
        schema,
        mapping,
        cleaned,
        cache_hit,
    } = clean_file(path, cfg, llm, cache_dir)?;
    if cache_hit {
        log::info!("{stem}: reusing cached cleaned data");
    }
    log::info!(
        "{stem}: kept {} of {} rows, time unit {} ({:?})",
        cleaned.report.kept_rows,
        cleaned.report.input_rows,
        cleaned.report.time_unit,
        cleaned.report.time_unit_source
    );

    let truth = cleaned.truth.as_ref().map(|tr| {
        let t = cleaned.recording.timestamps();
        LabeledSeries::from_annotations(&t, tr)
    });
    let truth = truth.filter(|s| {
        if s.is_empty() {
            log::warn!("{stem}: label column has no fixation/saccade annotations; skipping evaluation");
        }
        !s.is_empty()
    });

    let mut runs = Vec::new();
    for &kind in cfg.detectors.kinds() {
        let params = cfg.params_for(kind);
        let ds = DegreeSeries::from_recording(&cleaned.recording, cfg.geometry.as_ref(), params.smooth_window())
            .map_err(stage(Stage::Detect))?;
        let result = detect(&ds, &params).map_err(stage(Stage::Detect))?;
        let metrics = truth
            .as_ref()
            .map(|tr| evaluate(&result.labels, tr, &cfg.alignment_config()))
            .transpose()
            .map_err(stage(Stage::Evaluate))?;
        let velocity = match &result.velocity_trace {
            Some(_) => None,
            None => Some(angular_velocity(&ds)),
        };
        let diagnosis = diagnose(metrics.as_ref(), &result, velocity.as_deref());
        for f in &diagnosis.flags {
            log::warn!("{stem} {}: [{}] {}", kind.display_name(), f.severity.as_str(), f.code);
        }
        runs.push(DetectorRun {
            kind,
            result,
            metrics,
            diagnosis,
        });
    }

    let llm_diagnosis = match llm {
        Some(ctx) if runs.iter().any(|r| r.metrics.is_some()) => {
            let payload: serde_json::Map<String, serde_json::Value> = runs
                .iter()
                .filter_map(|r| {
                    Some((
                        r.kind.as_str().to_string(),
                        serde_json::to_value(r.metrics.as_ref()?).ok()?,
                    ))
                })
                .collect();
            let template = PromptTemplate::builtin(TemplateName::Stage3Diagnose);
            match llm::diagnose_llm(&payload.into(), &template, ctx.provider, ctx.audit) {
                Ok(d) => Some(d),
                Err(e) if cfg.llm.fallback => {
                    log::warn!("{stem}: model diagnosis failed ({e}); rule-based report stands");
                    None
                }
                Err(e) => return Err(PipelineError::new(Stage::Diagnose, e.into())),
            }
        }
        _ => None,
    };

    Ok(FileRun {
        path: path.to_path_buf(),
        stem,
        schema,
        mapping,
        cleaned,
        cache_hit,
        runs,
        llm_diagnosis,
    })
}

/// Writes `<stem>.schema.json`, `<stem>.clean_report.json` and
/// `<stem>.clean.csv`.
pub fn write_clean_outputs(
    stem: &str,
    schema: &SchemaDescription,
    cleaned: &CleanOutput,
    out: &Path,
) -> Result<(), PipelineError> {
    let w = |e: std::io::Error| PipelineError::new(Stage::Write, e.into());
    io::write_atomic(&out.join(format!("{stem}.schema.json")), schema.to_json().as_bytes()).map_err(w)?;
    io::write_atomic(
        &out.join(format!("{stem}.clean_report.json")),
        io::pretty(&cleaned.report).as_bytes(),
    )
    .map_err(w)?;
    let mut buf = Vec::new();
    crate::ingest::write_clean_csv(&mut buf, &cleaned.recording, cleaned.truth.as_deref())
        .map_err(|e| PipelineError::new(Stage::Write, e.into()))?;
    io::write_atomic(&out.join(format!("{stem}.clean.csv")), &buf).map_err(w)
}

/// Persists one file's artifacts under `out`.
pub fn write_file_outputs(run: &FileRun, out: &Path) -> Result<(), PipelineError> {
    let w = |e: std::io::Error| PipelineError::new(Stage::Write, e.into());
    let stem = &run.stem;
    write_clean_outputs(stem, &run.schema, &run.cleaned, out)?;

    for r in &run.runs {
        let dir = out.join(r.kind.as_str());
        let mut buf = Vec::new();
        write_labels_csv(&mut buf, &r.result.labels).map_err(w)?;
        io::write_atomic(&dir.join(format!("{stem}.labels.csv")), &buf).map_err(w)?;
        let segments = serde_json::json!({
            "detector": r.kind.as_str(),
            "params_used": r.result.params_used,
            "n_samples": r.result.len(),
            "segments": r.result.segments,
        });
        io::write_atomic(
            &dir.join(format!("{stem}.segments.json")),
            io::pretty(&segments).as_bytes(),
        )
        .map_err(w)?;
        if let Some(m) = &r.metrics {
            io::write_atomic(&dir.join(format!("{stem}.metrics.json")), m.to_json().as_bytes()).map_err(w)?;
        }
        io::write_atomic(
            &dir.join(format!("{stem}.diagnosis.json")),
            r.diagnosis.to_json().as_bytes(),
        )
        .map_err(w)?;
        io::write_atomic(
            &dir.join(format!("{stem}.diagnosis.txt")),
            r.diagnosis.render_text(r.metrics.as_ref()).as_bytes(),
        )
        .map_err(w)?;
    }
    if let Some(d) = &run.llm_diagnosis {
        io::write_atomic(
            &out.join(format!("{stem}.llm_diagnosis.json")),
            io::pretty(d).as_bytes(),
        )
        .map_err(w)?;
    }
    Ok(())
}

pub fn summary_json(files: &[FileRun], micro: &BTreeMap<DetectorKind, MetricsReport>) -> serde_json::Value {
    let files: Vec<serde_json::Value> = files
        .iter()
        .map(|f| {
            let detectors: serde_json::Map<String, serde_json::Value> = f
                .runs
                .iter()
                .map(|r| {
                    let flags: Vec<&str> = r.diagnosis.flags.iter().map(|f| f.code.as_str()).collect();
                    (
                        r.kind.as_str().to_string(),
                        serde_json::json!({
                            "fixation_samples": r.result.count(crate::EventLabel::Fixation),
                            "saccade_samples": r.result.count(crate::EventLabel::Saccade),
                            "segments": r.result.segments.len(),
                            "metrics": r.metrics,
                            "flags": flags,
                        }),
                    )
                })
                .collect();
            serde_json::json!({
                "input": f.path,
                "stem": f.stem,
                "clean": f.cleaned.report,
                "detectors": detectors,
            })
        })
        .collect();
    serde_json::json!({ "files": files, "micro": micro })
}

/// Full run over every input. Files are processed in parallel; each file's
/// stages run sequentially and write only to that file's paths.
pub fn run_pipeline(cfg: &PipelineConfig, provider: Option<&dyn ChatProvider>) -> Result<RunSummary, PipelineError> {
    cfg.validate()
        .map_err(|errs| PipelineError::new(Stage::Config, StageError::Config(errs.join("; "))))?;
    let out = &cfg.output_dir;
    let w = |e: std::io::Error| PipelineError::new(Stage::Write, e.into());
    fs::create_dir_all(out).map_err(w)?;
    io::write_atomic(&out.join("effective_config.toml"), cfg.to_toml().as_bytes()).map_err(w)?;

    let http;
    let provider: Option<&dyn ChatProvider> = match (cfg.llm.enabled, provider) {
        (false, _) => None,
        (true, Some(p)) => Some(p),
        (true, None) => {
            http = HttpChatProvider::new(cfg.llm.provider.clone());
            Some(&http)
        }
    };
    let audit = match provider {
        Some(_) if cfg.llm.audit_log => Some(AuditLog::open(&out.join("llm_audit.jsonl")).map_err(w)?),
        _ => None,
    };
    let ctx = provider.map(|provider| LlmContext {
        provider,
        audit: audit.as_ref(),
    });
    let cache_dir = cfg.cache.then(|| out.join(".cache"));
    if let Some(d) = &cache_dir {
        fs::create_dir_all(d).map_err(w)?;
    }

    let results = crate::par::map_items(&cfg.inputs, |path| {
        let run = analyze_file(path, cfg, ctx.as_ref(), cache_dir.as_deref())?;
        write_file_outputs(&run, out)?;
        Ok::<_, PipelineError>(run)
    });
    let files = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut micro = BTreeMap::new();
    for &kind in cfg.detectors.kinds() {
        let reports: Vec<&MetricsReport> = files
            .iter()
            .flat_map(|f| {
                f.runs
                    .iter()
                    .filter(|r| r.kind == kind)
                    .filter_map(|r| r.metrics.as_ref())
            })
            .collect();
        if let Some(m) = MetricsReport::micro_average(reports) {
            micro.insert(kind, m);
        }
    }
    io::write_atomic(
        &out.join("summary.json"),
        io::pretty(&summary_json(&files, &micro)).as_bytes(),
    )
    .map_err(w)?;
    let summary = RunSummary { files, micro };
    if let Some(t) = summary.table() {
        io::write_atomic(&out.join("metrics_table.txt"), t.as_bytes()).map_err(w)?;
    }
    Ok(summary)
}
