//! Rule-based checks for degenerate detection outcomes.
//!
//! Rules are pure functions of the metrics, the predicted labels and the
//! velocity trace. Suggestions are advisory; nothing here changes parameters.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::detect::DetectionResult;
use crate::eval::MetricsReport;
use crate::types::{DetectorParams, EventLabel};

pub const COLLAPSE_SACCADE_RECALL: f64 = 0.99;
pub const COLLAPSE_SACCADE_PRECISION: f64 = 0.30;
pub const STARVATION_FIXATION_RECALL: f64 = 0.05;
pub const STARVATION_FIXATION_PRECISION: f64 = 0.90;
pub const UNIT_SUSPECT_MEDIAN_DPS: f64 = 1000.0;
/// Range a suggested velocity threshold is clamped into.
pub const THETA_RANGE_DPS: (f64, f64) = (30.0, 100.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlagCode {
    AllSaccadeCollapse,
    FixationStarvation,
    NoSaccades,
    NoFixations,
    UnitSuspect,
}

impl FlagCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FlagCode::AllSaccadeCollapse => "ALL_SACCADE_COLLAPSE",
            FlagCode::FixationStarvation => "FIXATION_STARVATION",
            FlagCode::NoSaccades => "NO_SACCADES",
            FlagCode::NoFixations => "NO_FIXATIONS",
            FlagCode::UnitSuspect => "UNIT_SUSPECT",
        }
    }
}

impl fmt::Display for FlagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Critical,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Info => "info",
            Severity::Warning => "warning",
            Severity::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub name: String,
    pub value: f64,
}

fn ev(name: &str, value: f64) -> Evidence {
    Evidence {
        name: name.to_string(),
        value,
    }
}

/// Partial parameter set; only changed fields are present.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SuggestedParams {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub velocity_threshold_dps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub dispersion_threshold_deg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min_fixation_s: Option<f64>,
}

impl SuggestedParams {
    pub fn is_empty(&self) -> bool {
        *self == SuggestedParams::default()
    }

    /// Returns `params` with the suggested fields substituted. Fields that do
    /// not belong to the detector are ignored.
    pub fn apply_to(&self, params: &DetectorParams) -> DetectorParams {
        match *params {
            DetectorParams::Ivt(mut p) => {
                if let Some(v) = self.velocity_threshold_dps {
                    p.velocity_threshold_dps = v;
                }
                if let Some(v) = self.min_fixation_s {
                    p.min_fixation_s = v;
                }
                DetectorParams::Ivt(p)
            }
            DetectorParams::Idt(mut p) => {
                if let Some(v) = self.dispersion_threshold_deg {
                    p.dispersion_threshold_deg = v;
                }
                if let Some(v) = self.min_fixation_s {
                    p.min_fixation_s = v;
                }
                DetectorParams::Idt(p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flag {
    pub code: FlagCode,
    pub severity: Severity,
    pub evidence: Vec<Evidence>,
    pub suggestion: String,
    pub suggested_params: Option<SuggestedParams>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    pub median_velocity_dps: Option<f64>,
    pub p95_velocity_dps: Option<f64>,
    pub saccade_sample_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub flags: Vec<Flag>,
    pub signal_stats: SignalStats,
}

/// Linear-interpolated percentile of the finite values, `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

fn clamp_theta(v: f64) -> f64 {
    v.clamp(THETA_RANGE_DPS.0, THETA_RANGE_DPS.1)
}

/// Runs every rule. `velocity` overrides the trace stored in `result` (the
/// dispersion detector does not compute one).
pub fn diagnose(
    metrics: Option<&MetricsReport>,
    result: &DetectionResult,
    velocity: Option<&[f64]>,
) -> DiagnosisReport {
    let trace = velocity.or(result.velocity_trace.as_deref());
    let n = result.len();
    let n_sac = result.count(EventLabel::Saccade);
    let stats = SignalStats {
        median_velocity_dps: trace.and_then(|v| percentile(v, 0.5)),
        p95_velocity_dps: trace.and_then(|v| percentile(v, 0.95)),
        saccade_sample_ratio: if n == 0 { 0.0 } else { n_sac as f64 / n as f64 },
    };
    let params = &result.params_used;
    let mut flags = Vec::new();

    if let Some(m) = metrics {
        let sac = m.class(EventLabel::Saccade);
        let fix = m.class(EventLabel::Fixation);
        if let (Some(p), Some(r)) = (sac.precision, sac.recall) {
            if r > COLLAPSE_SACCADE_RECALL && p < COLLAPSE_SACCADE_PRECISION {
                flags.push(collapse_flag(p, r, params, &stats));
            }
        }
        if let (Some(p), Some(r)) = (fix.precision, fix.recall) {
            if r < STARVATION_FIXATION_RECALL && p > STARVATION_FIXATION_PRECISION {
                flags.push(Flag {
                    code: FlagCode::FixationStarvation,
                    severity: Severity::Warning,
                    evidence: vec![ev("fixation_recall", r), ev("fixation_precision", p)],
                    suggestion: "Fixations are detected correctly but almost never; the fixation criterion is too \
                                 strict for this recording."
                        .to_string(),
                    suggested_params: None,
                });
            }
        }
    }

    for (label, code) in [
        (EventLabel::Saccade, FlagCode::NoSaccades),
        (EventLabel::Fixation, FlagCode::NoFixations),
    ] {
        if n > 0 && result.count(label) == 0 {
            flags.push(missing_class_flag(label, code, n, params, &stats));
        }
    }

    if let Some(med) = stats.median_velocity_dps {
        if med > UNIT_SUSPECT_MEDIAN_DPS {
            flags.push(Flag {
                code: FlagCode::UnitSuspect,
                severity: Severity::Warning,
                evidence: vec![ev("median_velocity_dps", med)],
                suggestion: "Median velocity is implausible for eye movements. Check that pixel coordinates \
                             were converted to degrees and that the timestamp unit and sampling rate are right."
                    .to_string(),
                suggested_params: None,
            });
        }
    }

    DiagnosisReport {
        flags,
        signal_stats: stats,
    }
}

fn collapse_flag(p: f64, r: f64, params: &DetectorParams, stats: &SignalStats) -> Flag {
    let mut evidence = vec![ev("saccade_recall", r), ev("saccade_precision", p)];
    let (suggestion, suggested) = match params {
        DetectorParams::Ivt(ivt) => {
            let theta = match stats.p95_velocity_dps {
                Some(p95) => {
                    evidence.push(ev("p95_velocity_dps", p95));
                    clamp_theta(p95)
                }
                None => clamp_theta(ivt.velocity_threshold_dps * 2.0),
            };
            evidence.push(ev("velocity_threshold_dps", ivt.velocity_threshold_dps));
            (
                format!(
                    "Almost every sample is labeled saccade. The velocity threshold of {:.1} deg/s is likely too \
                     low for this recording; try {:.1} deg/s and verify coordinate and time units.",
                    ivt.velocity_threshold_dps, theta
                ),
                SuggestedParams {
                    velocity_threshold_dps: Some(theta),
                    ..Default::default()
                },
            )
        }
        DetectorParams::Idt(idt) => {
            let delta = idt.dispersion_threshold_deg * 2.0;
            evidence.push(ev("dispersion_threshold_deg", idt.dispersion_threshold_deg));
            (
                format!(
                    "Almost every sample is labeled saccade. The dispersion threshold of {:.2} deg is likely too \
                     tight; try {:.2} deg and verify coordinate units.",
                    idt.dispersion_threshold_deg, delta
                ),
                SuggestedParams {
                    dispersion_threshold_deg: Some(delta),
                    ..Default::default()
                },
            )
        }
    };
    Flag {
        code: FlagCode::AllSaccadeCollapse,
        severity: Severity::Critical,
        evidence,
        suggestion,
        suggested_params: Some(suggested),
    }
}

fn missing_class_flag(
    label: EventLabel,
    code: FlagCode,
    n: usize,
    params: &DetectorParams,
    stats: &SignalStats,
) -> Flag {
    let mut evidence = vec![
        ev(&format!("predicted_{}_samples", label.as_str()), 0.0),
        ev("samples", n as f64),
    ];
    let mut suggested = SuggestedParams::default();
    let suggestion = match (label, params) {
        (EventLabel::Saccade, DetectorParams::Ivt(p)) => {
            evidence.push(ev("velocity_threshold_dps", p.velocity_threshold_dps));
            if let Some(p95) = stats
                .p95_velocity_dps
                .filter(|&v| clamp_theta(v) < p.velocity_threshold_dps)
            {
                suggested.velocity_threshold_dps = Some(clamp_theta(p95));
            }
            "No saccades were predicted; the velocity threshold is overly strict for this recording.".to_string()
        }
        (EventLabel::Saccade, DetectorParams::Idt(p)) => {
            evidence.push(ev("dispersion_threshold_deg", p.dispersion_threshold_deg));
            evidence.push(ev("min_fixation_s", p.min_fixation_s));
            suggested.dispersion_threshold_deg = Some(p.dispersion_threshold_deg / 2.0);
            "No saccades were predicted; the dispersion and minimum-duration settings are overly strict for \
             this recording."
                .to_string()
        }
        (_, DetectorParams::Ivt(p)) => {
            evidence.push(ev("velocity_threshold_dps", p.velocity_threshold_dps));
            if let Some(p95) = stats.p95_velocity_dps {
                suggested.velocity_threshold_dps = Some(clamp_theta(p95));
            }
            "No fixations were predicted; check units and raise the velocity threshold.".to_string()
        }
        (_, DetectorParams::Idt(p)) => {
            evidence.push(ev("dispersion_threshold_deg", p.dispersion_threshold_deg));
            suggested.dispersion_threshold_deg = Some(p.dispersion_threshold_deg * 2.0);
            "No fixations were predicted; check units and widen the dispersion threshold.".to_string()
        }
    };
    Flag {
        code,
        severity: Severity::Critical,
        evidence,
        suggestion,
        suggested_params: (!suggested.is_empty()).then_some(suggested),
    }
}

/// Integers as-is, everything else to four decimals.
fn short(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        format!("{v:.4}")
    }
}

impl DiagnosisReport {
    pub fn has_critical(&self) -> bool {
        self.flags.iter().any(|f| f.severity == Severity::Critical)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnosis serialize")
    }

    /// Plain-text report with Results, Diagnosis, Recommendations and
    /// Conclusion sections.
    pub fn render_text(&self, metrics: Option<&MetricsReport>) -> String {
        let mut s = String::new();
        let num = |v: Option<f64>, prec: usize| v.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "--".into());

        s.push_str("Results\n-------\n");
        match metrics {
            Some(m) => {
                for c in EventLabel::ALL {
                    let cm = m.class(c);
                    let _ = writeln!(
                        s,
                        "{:<9} precision {}  recall {}  F1 {}",
                        c.as_str(),
                        num(cm.precision, 4),
                        num(cm.recall, 4),
                        num(cm.f1, 4)
                    );
                }
            }
            None => s.push_str("no ground truth available\n"),
        }
        let st = &self.signal_stats;
        let _ = writeln!(
            s,
            "median velocity {} deg/s, p95 velocity {} deg/s, saccade ratio {:.4}",
            num(st.median_velocity_dps, 1),
            num(st.p95_velocity_dps, 1),
            st.saccade_sample_ratio
        );

        s.push_str("\nDiagnosis\n---------\n");
        if self.flags.is_empty() {
            s.push_str("no anomalies detected\n");
        }
        for f in &self.flags {
            let ev: Vec<String> = f
                .evidence
                .iter()
                .map(|e| format!("{}={}", e.name, short(e.value)))
                .collect();
            let _ = writeln!(s, "[{}] {}: {}", f.severity.as_str(), f.code, ev.join(", "));
        }

        s.push_str("\nRecommendations\n---------------\n");
        if self.flags.is_empty() {
            s.push_str("keep current parameters\n");
        }
        for f in &self.flags {
            let _ = writeln!(s, "- {}", f.suggestion);
            if let Some(p) = f.suggested_params {
                let mut parts = Vec::new();
                if let Some(v) = p.velocity_threshold_dps {
                    parts.push(format!("velocity_threshold_dps = {v:.1}"));
                }
                if let Some(v) = p.dispersion_threshold_deg {
                    parts.push(format!("dispersion_threshold_deg = {v:.3}"));
                }
                if let Some(v) = p.min_fixation_s {
                    parts.push(format!("min_fixation_s = {v:.3}"));
                }
                let _ = writeln!(s, "  suggested: {}", parts.join(", "));
            }
        }

        s.push_str("\nConclusion\n----------\n");
        s.push_str(if self.has_critical() {
            "Results are abnormal; adjust parameters and rerun.\n"
        } else if self.flags.is_empty() {
            "Results look healthy.\n"
        } else {
            "Results are usable but warrant a closer look.\n"
        });
        s
    }
}
