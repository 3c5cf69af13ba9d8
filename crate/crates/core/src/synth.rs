//! Seeded scanpath generator with exact per-sample labels.
//!
//! Alternates Gaussian-jittered fixations with constant-speed linear
//! saccades. Used as the ground-truth oracle in tests and benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::types::{CoordUnits, EventLabel, GazeRecording, GazeSample, LabeledSeries};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub sample_rate_hz: f64,
    pub fixation_s: (f64, f64),
    pub jitter_sd_deg: f64,
    pub saccade_speed_dps: f64,
    pub saccade_s: (f64, f64),
    /// Gaze stays within +/- this many degrees on each axis.
    pub field_half_width_deg: f64,
    pub n_fixations: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 250.0,
            fixation_s: (0.150, 0.400),
            jitter_sd_deg: 0.02,
            saccade_speed_dps: 300.0,
            saccade_s: (0.020, 0.060),
            field_half_width_deg: 15.0,
            n_fixations: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecording {
    pub recording: GazeRecording,
    pub truth: Vec<EventLabel>,
}

impl SynthRecording {
    pub fn truth_series(&self) -> LabeledSeries {
        LabeledSeries::new(self.recording.timestamps(), self.truth.clone())
    }

    pub fn xy(&self) -> (Vec<f64>, Vec<f64>) {
        self.recording.samples.iter().map(|s| (s.x, s.y)).unzip()
    }

    /// `time_s,x,y,label` CSV, readable by the ingest stage.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<(), crate::ingest::IngestError> {
        let truth: Vec<Option<EventLabel>> = self.truth.iter().copied().map(Some).collect();
        crate::ingest::write_clean_csv(out, &self.recording, Some(&truth))
    }
}

#[derive(Debug, Clone, Copy)]
struct Event {
    label: EventLabel,
    t0: f64,
    t1: f64,
    from: (f64, f64),
    to: (f64, f64),
}

fn plan(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<Event> {
    let lim = cfg.field_half_width_deg;
    let mut pos = (
        rng.random_range(-lim / 2.0..lim / 2.0),
        rng.random_range(-lim / 2.0..lim / 2.0),
    );
    let mut t = 0.0;
    let mut events = Vec::with_capacity(cfg.n_fixations * 2);
    for k in 0..cfg.n_fixations {
        let d = rng.random_range(cfg.fixation_s.0..=cfg.fixation_s.1);
        events.push(Event {
            label: EventLabel::Fixation,
            t0: t,
            t1: t + d,
            from: pos,
            to: pos,
        });
        t += d;
        if k + 1 == cfg.n_fixations {
            break;
        }
        let d = rng.random_range(cfg.saccade_s.0..=cfg.saccade_s.1);
        let amp = cfg.saccade_speed_dps * d;
        let mut ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let mut to = (pos.0 + amp * ang.cos(), pos.1 + amp * ang.sin());
        // point back toward the center when the target leaves the field
        if to.0.abs() > lim || to.1.abs() > lim {
            ang = (-pos.1).atan2(-pos.0);
            to = (pos.0 + amp * ang.cos(), pos.1 + amp * ang.sin());
        }
        events.push(Event {
            label: EventLabel::Saccade,
            t0: t,
            t1: t + d,
            from: pos,
            to,
        });
        pos = to;
        t += d;
    }
    events
}

/// Same seed and config always give the same recording.
pub fn generate(cfg: &SynthConfig, seed: u64) -> SynthRecording {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let events = plan(cfg, &mut rng);
    let jitter = Normal::new(0.0, cfg.jitter_sd_deg).expect("jitter sd must be finite and >= 0");
    let end = events.last().map_or(0.0, |e| e.t1);
    let n = (end * cfg.sample_rate_hz).floor() as usize;

    let mut samples = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    let mut ev = 0;
    for i in 0..n {
        let t = i as f64 / cfg.sample_rate_hz;
        while ev + 1 < events.len() && t >= events[ev].t1 {
            ev += 1;
        }
        let e = &events[ev];
        let (x, y) = match e.label {
            EventLabel::Fixation => (e.from.0 + jitter.sample(&mut rng), e.from.1 + jitter.sample(&mut rng)),
            EventLabel::Saccade => {
                let f = (t - e.t0) / (e.t1 - e.t0);
                (e.from.0 + f * (e.to.0 - e.from.0), e.from.1 + f * (e.to.1 - e.from.1))
            }
        };
        samples.push(GazeSample::new(t, x, y));
        truth.push(e.label);
    }
    SynthRecording {
        recording: GazeRecording::new(samples, CoordUnits::Degree, format!("synth-{seed}")),
        truth,
    }
}
