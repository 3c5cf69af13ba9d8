//! Slow, literal implementations of both detectors. They share no code with
//! the production paths beyond the input types and exist so tests can check
//! label-for-label agreement.

use crate::preprocess::DegreeSeries;
use crate::types::{DetectorParams, EventLabel, IdtParams, IvtParams, LabeledSeries};

use super::{check, merge_runs, DetectError, DetectionResult};

fn naive_median_smooth(v: &[f64], window: usize) -> Vec<f64> {
    let n = v.len();
    let half = window / 2;
    (0..n)
        .map(|i| {
            let mut h = half;
            while h > i || i + h >= n {
                h -= 1;
            }
            let mut w: Vec<f64> = v[i - h..=i + h].to_vec();
            w.sort_by(|a, b| a.partial_cmp(b).unwrap());
            w[w.len() / 2]
        })
        .collect()
}

fn coords(ds: &DegreeSeries, window: usize) -> (Vec<f64>, Vec<f64>) {
    if window == ds.smooth_window {
        (ds.x_smooth.clone(), ds.y_smooth.clone())
    } else {
        (naive_median_smooth(&ds.x, window), naive_median_smooth(&ds.y, window))
    }
}

pub fn detect_ivt_reference(ds: &DegreeSeries, p: &IvtParams) -> Result<DetectionResult, DetectError> {
    check(ds, &DetectorParams::Ivt(*p))?;
    let n = ds.len();
    let (xs, ys) = coords(ds, p.smooth_window);

    let mut velocity = vec![0.0; n];
    for i in 1..n {
        let dx = xs[i] - xs[i - 1];
        let dy = ys[i] - ys[i - 1];
        velocity[i] = (dx * dx + dy * dy).sqrt() / ds.dt[i];
    }
    let raw: Vec<bool> = velocity.iter().map(|&v| v >= p.velocity_threshold_dps).collect();

    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        if raw[i] {
            labels.push(EventLabel::Saccade);
            continue;
        }
        if !p.enforce_min_fix {
            labels.push(EventLabel::Fixation);
            continue;
        }
        // extent of the sub-threshold run containing i
        let mut lo = i;
        while lo > 0 && !raw[lo - 1] {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < n && !raw[hi + 1] {
            hi += 1;
        }
        let t_min = ds.t[lo..=hi].iter().cloned().fold(f64::INFINITY, f64::min);
        let t_max = ds.t[lo..=hi].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if t_max - t_min < p.min_fixation_s {
            labels.push(EventLabel::Saccade);
        } else {
            labels.push(EventLabel::Fixation);
        }
    }

    Ok(DetectionResult {
        segments: merge_runs(&ds.t, &labels),
        labels: LabeledSeries::new(ds.t.clone(), labels),
        params_used: DetectorParams::Ivt(*p),
        velocity_trace: Some(velocity),
    })
}

fn dispersion(xs: &[f64], ys: &[f64], i: usize, j: usize) -> f64 {
    let span = |v: &[f64]| {
        let w = &v[i..=j];
        let max = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = w.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    };
    span(xs) + span(ys)
}

/// Recomputes the dispersion of every candidate window from scratch.
pub fn detect_idt_reference(ds: &DegreeSeries, p: &IdtParams) -> Result<DetectionResult, DetectError> {
    check(ds, &DetectorParams::Idt(*p))?;
    let n = ds.len();
    let (xs, ys) = coords(ds, p.smooth_window);
    let t = &ds.t;

    let mut labels = vec![EventLabel::Saccade; n];
    let mut i = 0;
    while i < n {
        let j0 = (i..n).find(|&j| t[j] - t[i] >= p.min_fixation_s);
        let best = j0.and_then(|j0| {
            let mut best = None;
            for j in j0..n {
                if dispersion(&xs, &ys, i, j) <= p.dispersion_threshold_deg {
                    best = Some(j);
                } else {
                    // dispersion never shrinks as the window grows
                    break;
                }
            }
            best
        });
        match best {
            Some(end) => {
                for l in &mut labels[i..=end] {
                    *l = EventLabel::Fixation;
                }
                i = end + 1;
            }
            None => i += 1,
        }
    }

    Ok(DetectionResult {
        segments: merge_runs(t, &labels),
        labels: LabeledSeries::new(t.clone(), labels),
        params_used: DetectorParams::Idt(*p),
        velocity_trace: None,
    })
}
