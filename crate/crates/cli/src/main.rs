use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeflow::eval::{evaluate, render_named_table, AlignmentConfig};
use gazeflow::ingest::ConfidenceFilter;
use gazeflow::llm::HttpChatProvider;
use gazeflow::pipeline::{
    analyze_file, clean_file, file_stem, inspect_bytes, read_label_csv, run_pipeline, summary_json,
    write_clean_outputs, DetectorSelection, LlmContext, PipelineConfig, PipelineError, SchemaPrompt, Stage, StageError,
};
use gazeflow::synth::{generate, SynthConfig};
use gazeflow::{CoordUnits, GeometryConfig, TimeUnit};

#[derive(Parser)]
#[command(
    name = "gazeflow",
    version,
    about = "Fixation/saccade detection for raw eye-tracking data"
)]
struct Cli {
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Infer the structure of a raw file.
    Inspect {
        file: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Select time/x/y, drop unusable rows and normalize time to seconds.
    Clean {
        file: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Label samples and write labels, segments, metrics and diagnosis.
    Detect {
        file: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Score a labels file against ground truth.
    Evaluate {
        /// Predicted labels (time_s,label).
        #[arg(long)]
        pred: PathBuf,
        /// Ground truth with a time and a label column.
        #[arg(long)]
        truth: PathBuf,
        /// As-of matching tolerance.
        #[arg(long, default_value_t = 2.0)]
        tolerance_ms: f64,
    },
    /// Detect and print the diagnosis report without writing files.
    Diagnose {
        file: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run every stage over all inputs of a config file.
    Pipeline {
        /// Inputs added to those listed in the config.
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Write a synthetic recording with ground-truth labels.
    Synth {
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 40)]
        fixations: usize,
        #[arg(long, default_value_t = 250.0)]
        rate_hz: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Ivt,
    Idt,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Pixel,
    Degree,
}

#[derive(Clone, Copy, ValueEnum)]
enum PromptArg {
    Detailed,
    Simple,
}

#[derive(Args, Default)]
struct RunOpts {
    /// TOML config; flags override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    detector: Option<DetectorArg>,
    /// I-VT velocity threshold in deg/s.
    #[arg(long)]
    theta: Option<f64>,
    /// I-VT minimum fixation duration.
    #[arg(long)]
    min_fix_ms: Option<f64>,
    /// Keep I-VT fixation runs shorter than the minimum.
    #[arg(long)]
    no_min_fix: bool,
    /// I-DT dispersion threshold in degrees.
    #[arg(long)]
    dispersion: Option<f64>,
    /// I-DT minimum window duration.
    #[arg(long)]
    idt_min_fix_ms: Option<f64>,
    /// Median filter width for both detectors (odd).
    #[arg(long)]
    smooth_window: Option<usize>,
    #[arg(long, value_enum)]
    coord_units: Option<UnitsArg>,
    #[arg(long, requires = "distance_mm")]
    pitch_mm: Option<f64>,
    #[arg(long, requires = "pitch_mm")]
    distance_mm: Option<f64>,
    /// Raw timestamp unit (s, ms, us, ns); inferred when absent.
    #[arg(long)]
    time_unit: Option<TimeUnit>,
    #[arg(long)]
    time_col: Option<String>,
    #[arg(long)]
    x_col: Option<String>,
    #[arg(long)]
    y_col: Option<String>,
    /// Ground-truth column; pass "" to ignore annotations.
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long, requires = "min_confidence")]
    confidence_col: Option<String>,
    #[arg(long, requires = "confidence_col")]
    min_confidence: Option<f64>,
    #[arg(long)]
    tolerance_ms: Option<f64>,
    #[arg(long)]
    sample_chars: Option<usize>,
    /// Always re-clean instead of using the cache.
    #[arg(long)]
    no_cache: bool,
    /// Use the chat model for schema inference and diagnosis.
    #[arg(long)]
    llm: bool,
    #[arg(long, value_enum)]
    prompt: Option<PromptArg>,
    /// Forbid network access (the default).
    #[arg(long, conflicts_with = "online")]
    offline: bool,
    /// Allow network access for --llm.
    #[arg(long)]
    online: bool,
}

impl RunOpts {
    fn config(&self) -> Result<PipelineConfig, PipelineError> {
        let mut c = match &self.config {
            Some(p) => PipelineConfig::load(p).map_err(config_err)?,
            None => PipelineConfig::default(),
        };
        if let Some(o) = &self.output {
            c.output_dir = o.clone();
        }
        if let Some(d) = self.detector {
            c.detectors = match d {
                DetectorArg::Ivt => DetectorSelection::Ivt,
                DetectorArg::Idt => DetectorSelection::Idt,
                DetectorArg::Both => DetectorSelection::Both,
            };
        }
        set(&mut c.ivt.velocity_threshold_dps, self.theta);
        set(&mut c.ivt.min_fix_ms, self.min_fix_ms);
        if self.no_min_fix {
            c.ivt.enforce_min_fix = false;
        }
        set(&mut c.idt.dispersion_threshold_deg, self.dispersion);
        set(&mut c.idt.min_fix_ms, self.idt_min_fix_ms);
        if let Some(w) = self.smooth_window {
            c.ivt.smooth_window = w;
            c.idt.smooth_window = w;
        }
        if let Some(u) = self.coord_units {
            c.coord_units = match u {
                UnitsArg::Pixel => CoordUnits::Pixel,
                UnitsArg::Degree => CoordUnits::Degree,
            };
        }
        if let (Some(p), Some(d)) = (self.pitch_mm, self.distance_mm) {
            c.geometry = Some(GeometryConfig::new(p, d));
        }
        if self.time_unit.is_some() {
            c.time_unit = self.time_unit;
        }
        for (slot, v) in [
            (&mut c.columns.time_col, &self.time_col),
            (&mut c.columns.x_col, &self.x_col),
            (&mut c.columns.y_col, &self.y_col),
            (&mut c.columns.label_col, &self.label_col),
        ] {
            if v.is_some() {
                *slot = v.clone();
            }
        }
        if let (Some(col), Some(min)) = (&self.confidence_col, self.min_confidence) {
            c.confidence = Some(ConfidenceFilter {
                column: col.clone(),
                min_confidence: min,
            });
        }
        set(&mut c.alignment.tolerance_ms, self.tolerance_ms);
        set(&mut c.sample_chars, self.sample_chars);
        if self.no_cache {
            c.cache = false;
        }
        if self.llm {
            c.llm.enabled = true;
        }
        if let Some(p) = self.prompt {
            c.llm.template = match p {
                PromptArg::Detailed => SchemaPrompt::Detailed,
                PromptArg::Simple => SchemaPrompt::Simple,
            };
        }
        if self.offline {
            c.offline = true;
        }
        if self.online {
            c.offline = false;
        }
        Ok(c)
    }

    /// Config for a single-file command, validated before any work.
    fn single(&self, file: &Path) -> Result<PipelineConfig, PipelineError> {
        let mut c = self.config()?;
        c.inputs = vec![file.to_path_buf()];
        c.validate().map_err(|e| config_err(e.join("; ")))?;
        Ok(c)
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::new(Stage::Config, StageError::Config(msg.into()))
}

fn json_out(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

/// Runs `f` with a model context when the config enables one.
fn with_llm<T>(cfg: &PipelineConfig, f: impl FnOnce(Option<&LlmContext>) -> T) -> T {
    if cfg.llm.enabled {
        let provider = HttpChatProvider::new(cfg.llm.provider.clone());
        f(Some(&LlmContext {
            provider: &provider,
            audit: None,
        }))
    } else {
        f(None)
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Inspect { file, opts } => {
            let cfg = opts.single(&file)?;
            let raw = fs::read(&file).map_err(|e| {
                PipelineError::new(
                    Stage::Inspect,
                    StageError::Ingest(gazeflow::ingest::IngestError::UnreadableInput(format!(
                        "{}: {e}",
                        file.display()
                    ))),
                )
            })?;
            let schema = with_llm(&cfg, |ctx| inspect_bytes(&raw, &cfg, ctx))?;
            println!("{}", schema.to_json());
            if !json {
                println!("\n{}", schema.summary());
            }
        }
        Cmd::Clean { file, opts } => {
            let cfg = opts.single(&file)?;
            let c = with_llm(&cfg, |ctx| clean_file(&file, &cfg, ctx, None))?;
            let stem = file_stem(&file);
            write_clean_outputs(&stem, &c.schema, &c.cleaned, &cfg.output_dir)?;
            if json {
                json_out(&c.cleaned.report);
            } else {
                let r = &c.cleaned.report;
                println!(
                    "kept {} of {} rows (missing {}, unparseable {}, non-finite {}, low confidence {}); time unit {}",
                    r.kept_rows,
                    r.input_rows,
                    r.dropped_missing,
                    r.dropped_unparseable,
                    r.dropped_nonfinite,
                    r.dropped_low_confidence,
                    r.time_unit
                );
                println!("wrote {}", cfg.output_dir.join(format!("{stem}.clean.csv")).display());
            }
        }
        Cmd::Detect { file, opts } => {
            let cfg = opts.single(&file)?;
            report_run(&cfg, json)?;
        }
        Cmd::Pipeline { inputs, opts } => {
            let mut cfg = opts.config()?;
            cfg.inputs.extend(inputs);
            report_run(&cfg, json)?;
        }
        Cmd::Evaluate {
            pred,
            truth,
            tolerance_ms,
        } => {
            let read = |p: &Path| read_label_csv(p).map_err(|e| PipelineError::new(Stage::Evaluate, e.into()));
            let cfg = AlignmentConfig {
                asof_tolerance_s: tolerance_ms / 1000.0,
            };
            let m = evaluate(&read(&pred)?, &read(&truth)?, &cfg)
                .map_err(|e| PipelineError::new(Stage::Evaluate, e.into()))?;
            if json {
                println!("{}", m.to_json());
            } else {
                print!("{}", render_named_table(&[(&file_stem(&pred), &m)]));
                println!(
                    "matched {} samples, {} unmatched truth, {} unmatched predictions",
                    m.matched_samples, m.unmatched_gt, m.unmatched_pred
                );
            }
        }
        Cmd::Diagnose { file, opts } => {
            let cfg = opts.single(&file)?;
            let run = with_llm(&cfg, |ctx| analyze_file(&file, &cfg, ctx, None))?;
            if json {
                let mut out = serde_json::Map::new();
                for r in &run.runs {
                    out.insert(r.kind.as_str().into(), serde_json::to_value(&r.diagnosis).unwrap());
                }
                if let Some(d) = &run.llm_diagnosis {
                    out.insert("llm".into(), serde_json::to_value(d).unwrap());
                }
                json_out(&out);
            } else {
                for r in &run.runs {
                    println!(
                        "== {} ==\n{}",
                        r.kind.display_name(),
                        r.diagnosis.render_text(r.metrics.as_ref())
                    );
                }
                if let Some(d) = &run.llm_diagnosis {
                    println!("== model narrative ==\n{}", d.narrative);
                }
            }
        }
        Cmd::Synth {
            output,
            seed,
            fixations,
            rate_hz,
        } => {
            let cfg = SynthConfig {
                n_fixations: fixations,
                sample_rate_hz: rate_hz,
                ..Default::default()
            };
            let s = generate(&cfg, seed);
            let mut buf = Vec::new();
            s.write_csv(&mut buf)
                .map_err(|e| PipelineError::new(Stage::Write, e.into()))?;
            fs::write(&output, buf).map_err(|e| PipelineError::new(Stage::Write, e.into()))?;
            if json {
                json_out(&serde_json::json!({ "output": output, "samples": s.truth.len(), "seed": seed }));
            } else {
                println!("wrote {} samples to {}", s.truth.len(), output.display());
            }
        }
    }
    Ok(())
}

fn report_run(cfg: &PipelineConfig, json: bool) -> Result<(), PipelineError> {
    let summary = run_pipeline(cfg, None)?;
    if json {
        json_out(&summary_json(&summary.files, &summary.micro));
        return Ok(());
    }
    if let Some(t) = summary.table() {
        print!("{t}");
    }
    for f in &summary.files {
        for r in &f.runs {
            for flag in &r.diagnosis.flags {
                println!(
                    "{} {}: [{}] {} {}",
                    f.stem,
                    r.kind.display_name(),
                    flag.severity.as_str(),
                    flag.code,
                    flag.suggestion
                );
            }
        }
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
