//! Fixation/saccade classifiers.
//!
//! [`detect_ivt`] thresholds pointwise angular velocity and then relabels
//! fixation runs shorter than the minimum duration as saccades.
//! [`detect_idt`] greedily grows duration-qualified windows of small L1
//! dispersion. The `reference` submodule holds deliberately naive versions of
//! both, used as test oracles.

mod idt;
mod ivt;
pub mod reference;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{median_smooth, DegreeSeries, PreprocessError};
use crate::types::{DetectorParams, EventLabel, EventSegment, LabeledSeries, ParamViolation};

pub use idt::detect_idt;
pub use ivt::detect_ivt;

#[derive(Debug, Error, PartialEq)]
pub enum DetectError {
    #[error("cannot run a detector on an empty recording")]
    EmptyInput,
    #[error("invalid detector parameters: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidParams(Vec<ParamViolation>),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub labels: LabeledSeries,
    pub segments: Vec<EventSegment>,
    pub params_used: DetectorParams,
    /// Per-sample angular velocity in deg/s; I-VT only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_trace: Option<Vec<f64>>,
}

impl DetectionResult {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, label: EventLabel) -> usize {
        self.labels.count(label)
    }
}

/// Runs whichever detector `params` selects.
pub fn detect(ds: &DegreeSeries, params: &DetectorParams) -> Result<DetectionResult, DetectError> {
    match params {
        DetectorParams::Ivt(p) => detect_ivt(ds, p),
        DetectorParams::Idt(p) => detect_idt(ds, p),
    }
}

/// Run-length encodes a label sequence. `t_start`/`t_end` are the earliest
/// and latest timestamps inside the run, which for sorted input are simply
/// the first and last sample of the run.
pub fn merge_segments(labels: &LabeledSeries) -> Vec<EventSegment> {
    merge_runs(&labels.t, &labels.label)
}

pub(crate) fn merge_runs(t: &[f64], labels: &[EventLabel]) -> Vec<EventSegment> {
    let mut out = Vec::new();
    let mut start = 0;
    while start < labels.len() {
        let label = labels[start];
        let mut end = start;
        let (mut lo, mut hi) = (t[start], t[start]);
        while end + 1 < labels.len() && labels[end + 1] == label {
            end += 1;
            lo = lo.min(t[end]);
            hi = hi.max(t[end]);
        }
        out.push(EventSegment {
            label,
            start_index: start,
            end_index: end,
            t_start: lo,
            t_end: hi,
            duration: hi - lo,
        });
        start = end + 1;
    }
    out
}

/// Smoothed coordinates for the requested window, reusing the series' own
/// smoothing when it already matches.
pub(crate) fn smoothed_for(ds: &DegreeSeries, window: usize) -> (Cow<'_, [f64]>, Cow<'_, [f64]>) {
    if window == ds.smooth_window {
        (Cow::Borrowed(&ds.x_smooth), Cow::Borrowed(&ds.y_smooth))
    } else {
        (
            Cow::Owned(median_smooth(&ds.x, window)),
            Cow::Owned(median_smooth(&ds.y, window)),
        )
    }
}

pub(crate) fn check(ds: &DegreeSeries, params: &DetectorParams) -> Result<(), DetectError> {
    if ds.is_empty() {
        return Err(DetectError::EmptyInput);
    }
    params.validate().map_err(DetectError::InvalidParams)
}

#[cfg(test)]
mod tests {
    use super::*;
    use EventLabel::{Fixation as F, Saccade as S};

    fn series(labels: &[EventLabel]) -> LabeledSeries {
        LabeledSeries::new((0..labels.len()).map(|i| i as f64 * 0.004).collect(), labels.to_vec())
    }

    #[test]
    fn run_length_encoding() {
        let segs = merge_segments(&series(&[F, F, S, S, S, F]));
        let shape: Vec<_> = segs.iter().map(|s| (s.label, s.len())).collect();
        assert_eq!(shape, [(F, 2), (S, 3), (F, 1)]);
        assert_eq!(segs[1].start_index, 2);
        assert_eq!(segs[1].end_index, 4);
        assert!((segs[1].duration - 0.008).abs() < 1e-12);
    }

    #[test]
    fn uniform_labels_make_one_segment() {
        let segs = merge_segments(&series(&[S; 7]));
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].start_index, segs[0].end_index), (0, 6));
        assert!((segs[0].t_end - 0.024).abs() < 1e-12);
    }

    #[test]
    fn alternating_labels_give_zero_length_segments() {
        let segs = merge_segments(&series(&[F, S, F, S]));
        assert_eq!(segs.len(), 4);
        assert!(segs.iter().all(|s| s.duration == 0.0 && s.len() == 1));
    }
}
