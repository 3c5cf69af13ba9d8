use crate::preprocess::{velocity_trace, DegreeSeries};
use crate::types::{DetectorParams, EventLabel, IvtParams, LabeledSeries};

use super::{check, merge_runs, smoothed_for, DetectError, DetectionResult};

/// Velocity-threshold identification.
///
/// A sample is a saccade when its angular velocity reaches the threshold.
/// With `enforce_min_fix`, any fixation run whose time span is shorter than
/// `min_fixation_s` is relabeled saccade as a whole. Sample 0 has velocity 0
/// by definition, so it starts out as a fixation.
pub fn detect_ivt(ds: &DegreeSeries, p: &IvtParams) -> Result<DetectionResult, DetectError> {
    check(ds, &DetectorParams::Ivt(*p))?;
    let (xs, ys) = smoothed_for(ds, p.smooth_window);
    let velocity = velocity_trace(&xs, &ys, &ds.dt);

    let mut labels: Vec<EventLabel> = velocity
        .iter()
        .map(|&v| {
            if v >= p.velocity_threshold_dps {
                EventLabel::Saccade
            } else {
                EventLabel::Fixation
            }
        })
        .collect();

    if p.enforce_min_fix {
        for seg in merge_runs(&ds.t, &labels) {
            if seg.label == EventLabel::Fixation && seg.duration < p.min_fixation_s {
                labels[seg.start_index..=seg.end_index].fill(EventLabel::Saccade);
            }
        }
    }

    let segments = merge_runs(&ds.t, &labels);
    Ok(DetectionResult {
        labels: LabeledSeries::new(ds.t.clone(), labels),
        segments,
        params_used: DetectorParams::Ivt(*p),
        velocity_trace: Some(velocity),
    })
}
