//! Shared vocabulary: gaze samples, recordings, labels, segments and detector
//! parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One timestamped gaze position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    /// Seconds once the recording has been normalized.
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

impl GazeSample {
    pub fn new(t: f64, x: f64, y: f64) -> Self {
        Self { t, x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordUnits {
    Pixel,
    Degree,
}

impl fmt::Display for CoordUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoordUnits::Pixel => "pixel",
            CoordUnits::Degree => "degree",
        })
    }
}

/// Unit of the raw timestamp column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    S,
    Ms,
    Us,
    Ns,
}

impl TimeUnit {
    /// Multiplier that converts a value in this unit to seconds.
    pub fn to_seconds(self) -> f64 {
        match self {
            TimeUnit::S => 1.0,
            TimeUnit::Ms => 1e-3,
            TimeUnit::Us => 1e-6,
            TimeUnit::Ns => 1e-9,
        }
    }

    /// How many of this unit make one second.
    pub fn per_second(self) -> f64 {
        match self {
            TimeUnit::S => 1.0,
            TimeUnit::Ms => 1e3,
            TimeUnit::Us => 1e6,
            TimeUnit::Ns => 1e9,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeUnit::S => "s",
            TimeUnit::Ms => "ms",
            TimeUnit::Us => "us",
            TimeUnit::Ns => "ns",
        }
    }
}

impl fmt::Display for TimeUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TimeUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s" | "sec" | "seconds" => Ok(TimeUnit::S),
            "ms" | "msec" | "milliseconds" => Ok(TimeUnit::Ms),
            "us" | "µs" | "usec" | "microseconds" => Ok(TimeUnit::Us),
            "ns" | "nsec" | "nanoseconds" => Ok(TimeUnit::Ns),
            other => Err(format!("unknown time unit `{other}`")),
        }
    }
}

/// A normalized gaze stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazeRecording {
    pub samples: Vec<GazeSample>,
    pub coord_units: CoordUnits,
    pub time_units_detected: TimeUnit,
    pub source_id: String,
}

impl GazeRecording {
    pub fn new(samples: Vec<GazeSample>, coord_units: CoordUnits, source_id: impl Into<String>) -> Self {
        Self {
            samples,
            coord_units,
            time_units_detected: TimeUnit::S,
            source_id: source_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }
}

/// Screen geometry used for the small-angle pixel to degree conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub pixel_pitch_mm: f64,
    pub viewing_distance_mm: f64,
}

impl GeometryConfig {
    pub fn new(pixel_pitch_mm: f64, viewing_distance_mm: f64) -> Self {
        Self {
            pixel_pitch_mm,
            viewing_distance_mm,
        }
    }

    /// Degrees of visual angle per pixel: `(180/π) · pitch / distance`.
    pub fn degrees_per_pixel(&self) -> f64 {
        (180.0 / std::f64::consts::PI) * (self.pixel_pitch_mm / self.viewing_distance_mm)
    }

    pub fn validate(&self) -> Result<(), Vec<ParamViolation>> {
        let mut errs = Vec::new();
        if !(self.pixel_pitch_mm > 0.0 && self.pixel_pitch_mm.is_finite()) {
            errs.push(ParamViolation::new("pixel_pitch_mm", "must be > 0"));
        }
        if !(self.viewing_distance_mm > 0.0 && self.viewing_distance_mm.is_finite()) {
            errs.push(ParamViolation::new("viewing_distance_mm", "must be > 0"));
        }
        into_result(errs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventLabel {
    Fixation,
    Saccade,
}

impl EventLabel {
    pub const ALL: [EventLabel; 2] = [EventLabel::Fixation, EventLabel::Saccade];

    pub fn as_str(self) -> &'static str {
        match self {
            EventLabel::Fixation => "fixation",
            EventLabel::Saccade => "saccade",
        }
    }

    pub fn other(self) -> EventLabel {
        match self {
            EventLabel::Fixation => EventLabel::Saccade,
            EventLabel::Saccade => EventLabel::Fixation,
        }
    }

    /// Parses a ground-truth annotation. Returns `None` for classes outside
    /// the two-label set (pursuit, noise, blink, unknown, ...).
    ///
    /// Numeric codes follow the GazeCom convention: 1 = fixation, 2 = saccade.
    pub fn parse_annotation(raw: &str) -> Option<EventLabel> {
        match raw.trim().to_ascii_lowercase().as_str() {
            "fixation" | "fix" | "f" | "1" | "1.0" => Some(EventLabel::Fixation),
            "saccade" | "sacc" | "sac" | "s" | "2" | "2.0" => Some(EventLabel::Saccade),
            _ => None,
        }
    }
}

impl fmt::Display for EventLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-sample labels aligned one-to-one with a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub t: Vec<f64>,
    pub label: Vec<EventLabel>,
}

impl LabeledSeries {
    pub fn new(t: Vec<f64>, label: Vec<EventLabel>) -> Self {
        assert_eq!(t.len(), label.len(), "timestamps and labels must align");
        Self { t, label }
    }

    /// Keeps only samples whose annotation is in the two-class set.
    pub fn from_annotations(t: &[f64], annotations: &[Option<EventLabel>]) -> Self {
        let (t, label) = t
            .iter()
            .zip(annotations)
            .filter_map(|(&t, a)| a.map(|l| (t, l)))
            .unzip();
        Self { t, label }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn count(&self, label: EventLabel) -> usize {
        self.label.iter().filter(|&&l| l == label).count()
    }
}

/// A maximal run of equally labeled samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSegment {
    pub label: EventLabel,
    /// Inclusive.
    pub start_index: usize,
    /// Inclusive.
    pub end_index: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
}

impl EventSegment {
    pub fn len(&self) -> usize {
        self.end_index - self.start_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A single violated parameter invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamViolation {
    pub field: String,
    pub message: String,
}

impl ParamViolation {
    fn new(field: &str, message: &str) -> Self {
        Self {
            field: field.to_string(),
            message: message.to_string(),
        }
    }
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.field, self.message)
    }
}

fn into_result(errs: Vec<ParamViolation>) -> Result<(), Vec<ParamViolation>> {
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

fn check_window(errs: &mut Vec<ParamViolation>, w: usize) {
    if w == 0 {
        errs.push(ParamViolation::new("smooth_window", "must be >= 1"));
    } else if w.is_multiple_of(2) {
        errs.push(ParamViolation::new("smooth_window", "must be odd"));
    }
}

/// Velocity-threshold detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvtParams {
    pub velocity_threshold_dps: f64,
    pub min_fixation_s: f64,
    pub enforce_min_fix: bool,
    pub smooth_window: usize,
}

impl Default for IvtParams {
    fn default() -> Self {
        Self {
            velocity_threshold_dps: 30.0,
            min_fixation_s: 0.060,
            enforce_min_fix: true,
            smooth_window: 3,
        }
    }
}

impl IvtParams {
    /// Collects every violated invariant. Pure and idempotent.
    pub fn validate(&self) -> Result<(), Vec<ParamViolation>> {
        let mut errs = Vec::new();
        if !(self.velocity_threshold_dps.is_finite() && self.velocity_threshold_dps > 0.0) {
            errs.push(ParamViolation::new("velocity_threshold_dps", "must be > 0"));
        }
        if !(self.min_fixation_s.is_finite() && self.min_fixation_s >= 0.0) {
            errs.push(ParamViolation::new("min_fixation_s", "must be >= 0"));
        }
        check_window(&mut errs, self.smooth_window);
        into_result(errs)
    }
}

/// Dispersion-threshold detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdtParams {
    pub dispersion_threshold_deg: f64,
    pub min_fixation_s: f64,
    pub smooth_window: usize,
}

impl Default for IdtParams {
    fn default() -> Self {
        Self {
            dispersion_threshold_deg: 1.0,
            min_fixation_s: 0.100,
            smooth_window: 3,
        }
    }
}

impl IdtParams {
    pub fn validate(&self) -> Result<(), Vec<ParamViolation>> {
        let mut errs = Vec::new();
        if !(self.dispersion_threshold_deg.is_finite() && self.dispersion_threshold_deg > 0.0) {
            errs.push(ParamViolation::new("dispersion_threshold_deg", "must be > 0"));
        }
        if !(self.min_fixation_s.is_finite() && self.min_fixation_s > 0.0) {
            errs.push(ParamViolation::new("min_fixation_s", "must be > 0"));
        }
        check_window(&mut errs, self.smooth_window);
        into_result(errs)
    }
}

/// Parameters actually used for one detection run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "detector", rename_all = "lowercase")]
pub enum DetectorParams {
    Ivt(IvtParams),
    Idt(IdtParams),
}

impl DetectorParams {
    pub fn kind(&self) -> DetectorKind {
        match self {
            DetectorParams::Ivt(_) => DetectorKind::Ivt,
            DetectorParams::Idt(_) => DetectorKind::Idt,
        }
    }

    pub fn smooth_window(&self) -> usize {
        match self {
            DetectorParams::Ivt(p) => p.smooth_window,
            DetectorParams::Idt(p) => p.smooth_window,
        }
    }

    pub fn validate(&self) -> Result<(), Vec<ParamViolation>> {
        match self {
            DetectorParams::Ivt(p) => p.validate(),
            DetectorParams::Idt(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Ivt,
    Idt,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Ivt => "ivt",
            DetectorKind::Idt => "idt",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            DetectorKind::Ivt => "I-VT",
            DetectorKind::Idt => "I-DT",
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn messages(errs: Vec<ParamViolation>) -> Vec<String> {
        errs.into_iter().map(|e| e.to_string()).collect()
    }

    #[test]
    fn defaults_match_published_values() {
        let ivt = IvtParams::default();
        assert_eq!(ivt.velocity_threshold_dps, 30.0);
        assert_eq!(ivt.min_fixation_s, 0.060);
        assert!(ivt.enforce_min_fix);
        assert_eq!(ivt.smooth_window, 3);

        let idt = IdtParams::default();
        assert_eq!(idt.dispersion_threshold_deg, 1.0);
        assert_eq!(idt.min_fixation_s, 0.100);
        assert_eq!(idt.smooth_window, 3);
    }

    #[test]
    fn default_params_validate() {
        assert!(IvtParams::default().validate().is_ok());
        assert!(IdtParams::default().validate().is_ok());
    }

    #[test]
    fn even_window_rejected() {
        let p = IvtParams {
            smooth_window: 4,
            ..Default::default()
        };
        assert_eq!(messages(p.validate().unwrap_err()), ["smooth_window must be odd"]);
    }

    #[test]
    fn zero_dispersion_rejected() {
        let p = IdtParams {
            dispersion_threshold_deg: 0.0,
            ..Default::default()
        };
        assert_eq!(
            messages(p.validate().unwrap_err()),
            ["dispersion_threshold_deg must be > 0"]
        );
    }

    #[test]
    fn every_violation_reported() {
        let p = IvtParams {
            velocity_threshold_dps: -1.0,
            min_fixation_s: f64::NAN,
            enforce_min_fix: true,
            smooth_window: 0,
        };
        let errs = p.validate().unwrap_err();
        assert_eq!(errs.len(), 3);
        // idempotent
        assert_eq!(p.validate().unwrap_err(), errs);
    }

    #[test]
    fn annotation_vocabulary() {
        assert_eq!(EventLabel::parse_annotation("Fixation"), Some(EventLabel::Fixation));
        assert_eq!(EventLabel::parse_annotation("2"), Some(EventLabel::Saccade));
        assert_eq!(EventLabel::parse_annotation("pursuit"), None);
        assert_eq!(EventLabel::parse_annotation("4"), None);
    }

    #[test]
    fn labels_serialize_lowercase() {
        assert_eq!(serde_json::to_string(&EventLabel::Saccade).unwrap(), "\"saccade\"");
    }
}
