use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eval::AlignmentConfig;
use crate::ingest::{ConfidenceFilter, DEFAULT_SAMPLE_CHARS};
use crate::llm::{LlmProviderConfig, TemplateName};
use crate::types::{CoordUnits, DetectorKind, DetectorParams, GeometryConfig, IdtParams, IvtParams, TimeUnit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorSelection {
    Ivt,
    Idt,
    Both,
}

impl DetectorSelection {
    pub fn kinds(self) -> &'static [DetectorKind] {
        match self {
            DetectorSelection::Ivt => &[DetectorKind::Ivt],
            DetectorSelection::Idt => &[DetectorKind::Idt],
            DetectorSelection::Both => &[DetectorKind::Ivt, DetectorKind::Idt],
        }
    }
}

/// Explicit column choices; unset fields are inferred from the header.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnOverrides {
    pub time_col: Option<String>,
    pub x_col: Option<String>,
    pub y_col: Option<String>,
    pub label_col: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IvtSection {
    pub velocity_threshold_dps: f64,
    pub min_fix_ms: f64,
    pub enforce_min_fix: bool,
    pub smooth_window: usize,
}

impl Default for IvtSection {
    fn default() -> Self {
        let p = IvtParams::default();
        Self {
            velocity_threshold_dps: p.velocity_threshold_dps,
            min_fix_ms: 60.0,
            enforce_min_fix: p.enforce_min_fix,
            smooth_window: p.smooth_window,
        }
    }
}

impl IvtSection {
    pub fn params(&self) -> IvtParams {
        IvtParams {
            velocity_threshold_dps: self.velocity_threshold_dps,
            min_fixation_s: self.min_fix_ms / 1000.0,
            enforce_min_fix: self.enforce_min_fix,
            smooth_window: self.smooth_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdtSection {
    pub dispersion_threshold_deg: f64,
    pub min_fix_ms: f64,
    pub smooth_window: usize,
}

impl Default for IdtSection {
    fn default() -> Self {
        let p = IdtParams::default();
        Self {
            dispersion_threshold_deg: p.dispersion_threshold_deg,
            min_fix_ms: 100.0,
            smooth_window: p.smooth_window,
        }
    }
}

impl IdtSection {
    pub fn params(&self) -> IdtParams {
        IdtParams {
            dispersion_threshold_deg: self.dispersion_threshold_deg,
            min_fixation_s: self.min_fix_ms / 1000.0,
            smooth_window: self.smooth_window,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentSection {
    pub tolerance_ms: f64,
}

impl Default for AlignmentSection {
    fn default() -> Self {
        Self { tolerance_ms: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaPrompt {
    #[default]
    Detailed,
    Simple,
}

impl SchemaPrompt {
    pub fn template_name(self) -> TemplateName {
        match self {
            SchemaPrompt::Detailed => TemplateName::Stage1Detailed,
            SchemaPrompt::Simple => TemplateName::Stage1Simple,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSection {
    pub enabled: bool,
    pub template: SchemaPrompt,
    /// Fall back to the deterministic path when the model fails.
    pub fallback: bool,
    /// Write request/response pairs to `llm_audit.jsonl` in the output dir.
    pub audit_log: bool,
    pub provider: LlmProviderConfig,
}

impl Default for LlmSection {
    fn default() -> Self {
        Self {
            enabled: false,
            template: SchemaPrompt::Detailed,
            fallback: true,
            audit_log: true,
            provider: LlmProviderConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub output_dir: PathBuf,
    /// Forbids any network access.
    pub offline: bool,
    pub detectors: DetectorSelection,
    pub coord_units: CoordUnits,
    pub time_unit: Option<TimeUnit>,
    pub sample_chars: usize,
    /// Reuse cleaned data from `<output_dir>/.cache` when possible.
    pub cache: bool,
    pub geometry: Option<GeometryConfig>,
    pub confidence: Option<ConfidenceFilter>,
    pub columns: ColumnOverrides,
    pub ivt: IvtSection,
    pub idt: IdtSection,
    pub alignment: AlignmentSection,
    pub llm: LlmSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            output_dir: PathBuf::from("gazeflow-out"),
            offline: true,
            detectors: DetectorSelection::Both,
            coord_units: CoordUnits::Pixel,
            time_unit: None,
            sample_chars: DEFAULT_SAMPLE_CHARS,
            cache: true,
            geometry: None,
            confidence: None,
            columns: ColumnOverrides::default(),
            ivt: IvtSection::default(),
            idt: IdtSection::default(),
            alignment: AlignmentSection::default(),
            llm: LlmSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn params_for(&self, kind: DetectorKind) -> DetectorParams {
        match kind {
            DetectorKind::Ivt => DetectorParams::Ivt(self.ivt.params()),
            DetectorKind::Idt => DetectorParams::Idt(self.idt.params()),
        }
    }

    pub fn alignment_config(&self) -> AlignmentConfig {
        AlignmentConfig {
            asof_tolerance_s: self.alignment.tolerance_ms / 1000.0,
        }
    }

    /// Checks everything that can be checked before touching any input.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.llm.enabled && self.offline {
            errs.push(
                "llm is enabled but offline mode forbids network calls (set offline = false or pass --online)"
                    .to_string(),
            );
        }
        if self.inputs.is_empty() {
            errs.push("no input files".to_string());
        }
        for &k in self.detectors.kinds() {
            if let Err(v) = self.params_for(k).validate() {
                errs.extend(v.iter().map(|v| format!("{}: {v}", k.as_str())));
            }
        }
        if self.alignment.tolerance_ms.is_nan() || self.alignment.tolerance_ms < 0.0 {
            errs.push("alignment.tolerance_ms must be >= 0".to_string());
        }
        if let Some(g) = &self.geometry {
            if let Err(v) = g.validate() {
                errs.extend(v.iter().map(|v| format!("geometry: {v}")));
            }
        }
        if self.sample_chars == 0 {
            errs.push("sample_chars must be > 0".to_string());
        }
        let mut stems: Vec<String> = self.inputs.iter().map(|p| file_stem(p)).collect();
        stems.sort();
        if let Some(w) = stems.windows(2).find(|w| w[0] == w[1]) {
            errs.push(format!("two inputs share the file stem `{}`", w[0]));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "input".to_string())
}
