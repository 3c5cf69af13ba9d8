use std::collections::VecDeque;

use crate::preprocess::DegreeSeries;
use crate::types::{DetectorParams, EventLabel, IdtParams, LabeledSeries};

use super::{check, merge_runs, smoothed_for, DetectError, DetectionResult};

/// Running max and min of one coordinate over a window whose ends only move
/// forward.
struct Extrema<'a> {
    v: &'a [f64],
    max: VecDeque<usize>,
    min: VecDeque<usize>,
}

impl<'a> Extrema<'a> {
    fn new(v: &'a [f64]) -> Self {
        Self {
            v,
            max: VecDeque::new(),
            min: VecDeque::new(),
        }
    }

    fn push(&mut self, j: usize) {
        let x = self.v[j];
        while self.max.back().is_some_and(|&k| self.v[k] <= x) {
            self.max.pop_back();
        }
        self.max.push_back(j);
        while self.min.back().is_some_and(|&k| self.v[k] >= x) {
            self.min.pop_back();
        }
        self.min.push_back(j);
    }

    fn evict_before(&mut self, i: usize) {
        while self.max.front().is_some_and(|&k| k < i) {
            self.max.pop_front();
        }
        while self.min.front().is_some_and(|&k| k < i) {
            self.min.pop_front();
        }
    }

    fn clear(&mut self) {
        self.max.clear();
        self.min.clear();
    }

    fn range(&self) -> f64 {
        self.v[self.max[0]] - self.v[self.min[0]]
    }

    /// Range the window would have after pushing `j`.
    fn range_with(&self, j: usize) -> f64 {
        let x = self.v[j];
        self.v[self.max[0]].max(x) - self.v[self.min[0]].min(x)
    }
}

/// Dispersion-threshold identification.
///
/// For each start `i`, `j0` is the first index whose timestamp is at least
/// `min_fixation_s` past `t[i]`. If the L1 dispersion of `[i, j0]` is within
/// the threshold the window is grown to the last index that keeps it so and
/// the whole window becomes a fixation; otherwise sample `i` is a saccade.
/// Iteration resumes right after the accepted window, or at `i + 1`.
pub fn detect_idt(ds: &DegreeSeries, p: &IdtParams) -> Result<DetectionResult, DetectError> {
    check(ds, &DetectorParams::Idt(*p))?;
    let (xs, ys) = smoothed_for(ds, p.smooth_window);
    let sorted = ds.t.windows(2).all(|w| w[0] <= w[1]);
    let labels = if sorted {
        label_sorted(&ds.t, &xs, &ys, p)
    } else {
        label_unsorted(&ds.t, &xs, &ys, p)
    };
    let segments = merge_runs(&ds.t, &labels);
    Ok(DetectionResult {
        labels: LabeledSeries::new(ds.t.clone(), labels),
        segments,
        params_used: DetectorParams::Idt(*p),
        velocity_trace: None,
    })
}

/// Non-decreasing timestamps: `j0(i)` is monotone in `i`, so a sliding window
/// with monotonic deques covers every saccade step in amortized O(1).
fn label_sorted(t: &[f64], xs: &[f64], ys: &[f64], p: &IdtParams) -> Vec<EventLabel> {
    let n = t.len();
    let (delta, tau) = (p.dispersion_threshold_deg, p.min_fixation_s);
    let mut labels = vec![EventLabel::Saccade; n];
    let mut ex = Extrema::new(xs);
    let mut ey = Extrema::new(ys);
    // samples [i, next) are currently in the deques
    let mut next = 0;
    let mut i = 0;
    while i < n {
        if next <= i {
            ex.clear();
            ey.clear();
            next = i;
        }
        ex.evict_before(i);
        ey.evict_before(i);
        // j0(i) >= j0(i - 1), so the right edge only ever advances
        let reached = |next: usize| next > i && t[next - 1] - t[i] >= tau;
        while !reached(next) && next < n {
            ex.push(next);
            ey.push(next);
            next += 1;
        }
        if !reached(next) {
            // no j0 for i, hence none for any later start either
            break;
        }
        let j0 = next - 1;
        if ex.range() + ey.range() > delta {
            i += 1;
            continue;
        }
        let mut end = j0;
        while end + 1 < n && ex.range_with(end + 1) + ey.range_with(end + 1) <= delta {
            end += 1;
            ex.push(end);
            ey.push(end);
        }
        labels[i..=end].fill(EventLabel::Fixation);
        i = end + 1;
        next = i;
    }
    labels
}

/// General timestamps (possibly non-monotonic): linear search for `j0` from
/// every start, running min/max while growing.
fn label_unsorted(t: &[f64], xs: &[f64], ys: &[f64], p: &IdtParams) -> Vec<EventLabel> {
    let n = t.len();
    let (delta, tau) = (p.dispersion_threshold_deg, p.min_fixation_s);
    let mut labels = vec![EventLabel::Saccade; n];
    let mut i = 0;
    while i < n {
        let mut bx = (xs[i], xs[i]);
        let mut by = (ys[i], ys[i]);
        let mut j0 = None;
        for j in i..n {
            bx = (bx.0.min(xs[j]), bx.1.max(xs[j]));
            by = (by.0.min(ys[j]), by.1.max(ys[j]));
            if t[j] - t[i] >= tau {
                j0 = Some(j);
                break;
            }
        }
        let Some(j0) = j0 else {
            i += 1;
            continue;
        };
        if (bx.1 - bx.0) + (by.1 - by.0) > delta {
            i += 1;
            continue;
        }
        let mut end = j0;
        while end + 1 < n {
            let k = end + 1;
            let cx = (bx.0.min(xs[k]), bx.1.max(xs[k]));
            let cy = (by.0.min(ys[k]), by.1.max(ys[k]));
            if (cx.1 - cx.0) + (cy.1 - cy.0) > delta {
                break;
            }
            bx = cx;
            by = cy;
            end = k;
        }
        labels[i..=end].fill(EventLabel::Fixation);
        i = end + 1;
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use EventLabel::{Fixation as F, Saccade as S};

    const DT: f64 = 0.004;

    fn ds(x: Vec<f64>, y: Vec<f64>) -> DegreeSeries {
        let t = (0..x.len()).map(|i| i as f64 * DT).collect();
        DegreeSeries::from_degrees(t, x, y, 3).unwrap()
    }

    #[test]
    fn compact_cluster_is_one_fixation() {
        // 0.2 s, jitter spanning 0.1 deg
        let x: Vec<f64> = (0..50).map(|i| if i % 2 == 0 { 5.0 } else { 5.1 }).collect();
        let res = detect_idt(&ds(x, vec![3.0; 50]), &IdtParams::default()).unwrap();
        assert!(res.labels.label.iter().all(|&l| l == F));
        assert_eq!(res.segments.len(), 1);
    }

    #[test]
    fn linear_sweep_is_all_saccade() {
        // 10 deg over 0.5 s: every 0.1 s window spans 2 deg
        let x: Vec<f64> = (0..=125).map(|i| i as f64 * 0.08).collect();
        let n = x.len();
        let res = detect_idt(&ds(x, vec![0.0; n]), &IdtParams::default()).unwrap();
        assert!(res.labels.label.iter().all(|&l| l == S));
    }

    #[test]
    fn short_tail_is_saccade() {
        // 0.2 s fixation, jump, then 0.06 s of stillness (< 0.1 s)
        let mut x = vec![0.0; 50];
        x.extend(vec![10.0; 15]);
        let n = x.len();
        let res = detect_idt(&ds(x, vec![0.0; n]), &IdtParams::default()).unwrap();
        assert!(res.labels.label[..50].iter().all(|&l| l == F));
        assert!(res.labels.label[50..].iter().all(|&l| l == S));
    }

    #[test]
    fn dispersion_equal_to_threshold_accepted() {
        // x alternates 0 / 0.5, y alternates 0 / 0.5: disp == 1.0 exactly
        let x: Vec<f64> = (0..40).map(|i| if i < 20 { 0.0 } else { 0.5 }).collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 10 { 0.0 } else { 0.5 }).collect();
        let res = detect_idt(&ds(x, y), &IdtParams::default()).unwrap();
        assert!(res.labels.label.iter().all(|&l| l == F));
    }

    #[test]
    fn single_sample_is_saccade() {
        let res = detect_idt(&ds(vec![0.0], vec![0.0]), &IdtParams::default()).unwrap();
        assert_eq!(res.labels.label, vec![S]);
    }

    #[test]
    fn unsorted_path_agrees_on_sorted_input() {
        let x: Vec<f64> = (0..300)
            .map(|i| ((i / 40) as f64) * 2.0 + 0.01 * ((i * 7) % 5) as f64)
            .collect();
        let y = vec![0.0; x.len()];
        let t: Vec<f64> = (0..x.len()).map(|i| i as f64 * DT).collect();
        let p = IdtParams::default();
        assert_eq!(label_sorted(&t, &x, &y, &p), label_unsorted(&t, &x, &y, &p));
    }
}
