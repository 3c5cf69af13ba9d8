//! Scoring predicted labels against ground truth.
//!
//! Ground truth is the anchor stream: every annotated sample looks for the
//! temporally nearest prediction within a tolerance. A prediction is paired
//! with at most one annotation (the closest), so the number of matched pairs
//! never exceeds either stream's length.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{DetectorKind, EventLabel, LabeledSeries};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{0} series is empty")]
    Empty(&'static str),
    #[error("{0} timestamps are not sorted ascending")]
    NotSorted(&'static str),
    #[error("no ground-truth sample has a prediction within {tolerance_s} s")]
    NoMatches { tolerance_s: f64 },
    #[error("as-of tolerance must be >= 0, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentConfig {
    pub asof_tolerance_s: f64,
}

impl Default for AlignmentConfig {
    fn default() -> Self {
        Self {
            asof_tolerance_s: 0.002,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth_index: usize,
    pub pred_index: usize,
    pub truth: EventLabel,
    pub pred: EventLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_gt: usize,
    pub unmatched_pred: usize,
}

fn check_sorted(s: &LabeledSeries, which: &'static str) -> Result<(), EvalError> {
    if s.is_empty() {
        return Err(EvalError::Empty(which));
    }
    if s.t
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]).is_none_or(|o| o.is_gt()))
    {
        return Err(EvalError::NotSorted(which));
    }
    Ok(())
}

/// Nearest-neighbor as-of join of predictions onto ground-truth samples.
pub fn align_asof(pred: &LabeledSeries, truth: &LabeledSeries, cfg: &AlignmentConfig) -> Result<Alignment, EvalError> {
    if cfg.asof_tolerance_s.is_nan() || cfg.asof_tolerance_s < 0.0 {
        return Err(EvalError::BadTolerance(cfg.asof_tolerance_s));
    }
    check_sorted(pred, "prediction")?;
    check_sorted(truth, "ground-truth")?;

    // best truth candidate for each prediction: (distance, truth index)
    let mut claim: Vec<Option<(f64, usize)>> = vec![None; pred.len()];
    for (j, &tt) in truth.t.iter().enumerate() {
        let k = pred.t.partition_point(|&tp| tp < tt);
        let mut best: Option<(f64, usize)> = None;
        for cand in [k.checked_sub(1), (k < pred.len()).then_some(k)].into_iter().flatten() {
            let d = (pred.t[cand] - tt).abs();
            // earlier prediction wins exact ties
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, cand));
            }
        }
        let Some((d, k)) = best else { continue };
        if d > cfg.asof_tolerance_s {
            continue;
        }
        if claim[k].is_none_or(|(cd, _)| d < cd) {
            claim[k] = Some((d, j));
        }
    }

    let mut pairs: Vec<MatchedPair> = claim
        .iter()
        .enumerate()
        .filter_map(|(k, c)| {
            c.map(|(_, j)| MatchedPair {
                truth_index: j,
                pred_index: k,
                truth: truth.label[j],
                pred: pred.label[k],
            })
        })
        .collect();
    if pairs.is_empty() {
        return Err(EvalError::NoMatches {
            tolerance_s: cfg.asof_tolerance_s,
        });
    }
    pairs.sort_by_key(|p| p.truth_index);
    Ok(Alignment {
        unmatched_gt: truth.len() - pairs.len(),
        unmatched_pred: pred.len() - pairs.len(),
        pairs,
    })
}

/// Sample counts keyed by (truth, prediction).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub fixation_as_fixation: u64,
    pub fixation_as_saccade: u64,
    pub saccade_as_fixation: u64,
    pub saccade_as_saccade: u64,
}

impl Confusion {
    pub fn from_pairs(pairs: &[MatchedPair]) -> Self {
        let mut c = Confusion::default();
        for p in pairs {
            c.add(p.truth, p.pred, 1);
        }
        c
    }

    pub fn add(&mut self, truth: EventLabel, pred: EventLabel, n: u64) {
        use EventLabel::*;
        match (truth, pred) {
            (Fixation, Fixation) => self.fixation_as_fixation += n,
            (Fixation, Saccade) => self.fixation_as_saccade += n,
            (Saccade, Fixation) => self.saccade_as_fixation += n,
            (Saccade, Saccade) => self.saccade_as_saccade += n,
        }
    }

    pub fn get(&self, truth: EventLabel, pred: EventLabel) -> u64 {
        use EventLabel::*;
        match (truth, pred) {
            (Fixation, Fixation) => self.fixation_as_fixation,
            (Fixation, Saccade) => self.fixation_as_saccade,
            (Saccade, Fixation) => self.saccade_as_fixation,
            (Saccade, Saccade) => self.saccade_as_saccade,
        }
    }

    pub fn tp(&self, c: EventLabel) -> u64 {
        self.get(c, c)
    }

    pub fn fp(&self, c: EventLabel) -> u64 {
        self.get(c.other(), c)
    }

    pub fn fn_(&self, c: EventLabel) -> u64 {
        self.get(c, c.other())
    }

    pub fn total(&self) -> u64 {
        self.fixation_as_fixation + self.fixation_as_saccade + self.saccade_as_fixation + self.saccade_as_saccade
    }

    pub fn merged(&self, other: &Confusion) -> Confusion {
        Confusion {
            fixation_as_fixation: self.fixation_as_fixation + other.fixation_as_fixation,
            fixation_as_saccade: self.fixation_as_saccade + other.fixation_as_saccade,
            saccade_as_fixation: self.saccade_as_fixation + other.saccade_as_fixation,
            saccade_as_saccade: self.saccade_as_saccade + other.saccade_as_saccade,
        }
    }
}

/// `None` marks an undefined metric (zero denominator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: u64,
}

impl ClassMetrics {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Self {
            precision,
            recall,
            f1,
            support: tp + fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Aggregation {
    /// One recording.
    Single,
    /// Confusion counts pooled over several recordings.
    Micro { recordings: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<EventLabel, ClassMetrics>,
    pub confusion: Confusion,
    pub matched_samples: u64,
    pub unmatched_gt: u64,
    pub unmatched_pred: u64,
    pub aggregation: Aggregation,
}

impl MetricsReport {
    pub fn from_confusion(
        confusion: Confusion,
        unmatched_gt: u64,
        unmatched_pred: u64,
        aggregation: Aggregation,
    ) -> Self {
        let per_class = EventLabel::ALL
            .iter()
            .map(|&c| {
                (
                    c,
                    ClassMetrics::from_counts(confusion.tp(c), confusion.fp(c), confusion.fn_(c)),
                )
            })
            .collect();
        Self {
            per_class,
            matched_samples: confusion.total(),
            confusion,
            unmatched_gt,
            unmatched_pred,
            aggregation,
        }
    }

    pub fn class(&self, c: EventLabel) -> &ClassMetrics {
        &self.per_class[&c]
    }

    /// Pools confusion counts (micro-averaging).
    pub fn micro_average<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Option<MetricsReport> {
        let mut n = 0;
        let mut conf = Confusion::default();
        let (mut ugt, mut upred) = (0, 0);
        for r in reports {
            n += 1;
            conf = conf.merged(&r.confusion);
            ugt += r.unmatched_gt;
            upred += r.unmatched_pred;
        }
        (n > 0).then(|| MetricsReport::from_confusion(conf, ugt, upred, Aggregation::Micro { recordings: n }))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }
}

pub fn compute_metrics(pairs: &[MatchedPair]) -> MetricsReport {
    MetricsReport::from_confusion(Confusion::from_pairs(pairs), 0, 0, Aggregation::Single)
}

/// Aligns then scores; unmatched counts carried into the report.
pub fn evaluate(
    pred: &LabeledSeries,
    truth: &LabeledSeries,
    cfg: &AlignmentConfig,
) -> Result<MetricsReport, EvalError> {
    let a = align_asof(pred, truth, cfg)?;
    let mut r = compute_metrics(&a.pairs);
    r.unmatched_gt = a.unmatched_gt as u64;
    r.unmatched_pred = a.unmatched_pred as u64;
    Ok(r)
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.4}")).unwrap_or_else(|| "--".to_string())
}

/// Fixed-width precision/recall/F1 table, one row per detector and class.
pub fn render_table(rows: &[(DetectorKind, &MetricsReport)]) -> String {
    let named: Vec<(&str, &MetricsReport)> = rows.iter().map(|(d, r)| (d.display_name(), *r)).collect();
    render_named_table(&named)
}

/// Like [`render_table`] with free-form row names.
pub fn render_named_table(rows: &[(&str, &MetricsReport)]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:<9} {:>9} {:>9} {:>9}",
        "detector", "class", "precision", "recall", "F1"
    );
    for (name, report) in rows {
        for c in EventLabel::ALL {
            let m = report.class(c);
            let _ = writeln!(
                s,
                "{:<8} {:<9} {:>9} {:>9} {:>9}",
                name,
                c.as_str(),
                cell(m.precision),
                cell(m.recall),
                cell(m.f1)
            );
        }
    }
    s
}
