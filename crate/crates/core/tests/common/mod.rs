#![allow(dead_code)]

use gazeflow::eval::{evaluate, AlignmentConfig};
use gazeflow::preprocess::median_smooth;
use gazeflow::{
    angular_velocity, detect_idt, detect_ivt, CoordUnits, DegreeSeries, EventLabel, GazeRecording, GazeSample,
    GeometryConfig, IdtParams, IvtParams, LabeledSeries, TimeUnit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// One adversarial recording plus detector settings to run on it.
pub struct Case {
    pub recording: GazeRecording,
    pub geometry: Option<GeometryConfig>,
    pub raw_unit: TimeUnit,
    pub window: usize,
    pub ivt: IvtParams,
    pub idt: IdtParams,
}

impl Case {
    pub fn series(&self) -> DegreeSeries {
        DegreeSeries::from_recording(&self.recording, self.geometry.as_ref(), self.window).unwrap()
    }
}

const WINDOWS: [usize; 4] = [1, 3, 5, 7];

/// Fixation/saccade scanpath with duplicate and out-of-order timestamps,
/// pixel or degree coordinates and timestamps recorded in s, ms or us.
pub fn random_case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..=2000);
    let rate = [60.0, 120.0, 250.0, 500.0, 1000.0][rng.random_range(0..5)];
    let raw_unit = [TimeUnit::S, TimeUnit::Ms, TimeUnit::Us][rng.random_range(0..3)];
    let pixels = rng.random_bool(0.5);
    let geometry = pixels.then(|| GeometryConfig::new(rng.random_range(0.2..0.3), rng.random_range(450.0..750.0)));
    let scale = geometry.map_or(1.0, |g| 1.0 / g.degrees_per_pixel());
    let jitter = Normal::new(0.0, rng.random_range(0.0..0.3)).unwrap();
    // coarse grids make dispersion ties with the threshold likely
    let quantum = [0.0, 0.05, 0.1][rng.random_range(0..3)];

    let mut samples = Vec::with_capacity(n);
    let (mut x, mut y) = (0.0_f64, 0.0_f64);
    let mut t = rng.random_range(0.0..5.0);
    let mut remaining = 0;
    let mut step = (0.0, 0.0);
    for _ in 0..n {
        if remaining == 0 {
            remaining = rng.random_range(1..60);
            step = if rng.random_bool(0.6) {
                (0.0, 0.0)
            } else {
                (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))
            };
        }
        remaining -= 1;
        x += step.0;
        y += step.1;
        let (mut gx, mut gy) = (x + jitter.sample(&mut rng), y + jitter.sample(&mut rng));
        if quantum > 0.0 {
            gx = (gx / quantum).round() * quantum;
            gy = (gy / quantum).round() * quantum;
        }
        let dt = match rng.random_range(0..100) {
            0..=4 => 0.0,
            5..=7 => -rng.random_range(0.0..3.0) / rate,
            _ => 1.0 / rate,
        };
        t += dt;
        let raw_t = t * raw_unit.per_second();
        samples.push(GazeSample::new(raw_t * raw_unit.to_seconds(), gx * scale, gy * scale));
    }

    let units = if pixels { CoordUnits::Pixel } else { CoordUnits::Degree };
    let window = WINDOWS[rng.random_range(0..4)];
    let ivt = IvtParams {
        velocity_threshold_dps: rng.random_range(5.0..300.0),
        min_fixation_s: rng.random_range(0.0..0.3),
        enforce_min_fix: rng.random_bool(0.8),
        smooth_window: if rng.random_bool(0.8) {
            window
        } else {
            WINDOWS[rng.random_range(0..4)]
        },
    };
    let idt = IdtParams {
        dispersion_threshold_deg: rng.random_range(0.1..5.0),
        min_fixation_s: rng.random_range(0.0..0.3),
        smooth_window: if rng.random_bool(0.8) {
            window
        } else {
            WINDOWS[rng.random_range(0..4)]
        },
    };
    Case {
        recording: GazeRecording::new(samples, units, format!("case{seed}")),
        geometry,
        raw_unit,
        window,
        ivt,
        idt,
    }
}

pub fn l1_dispersion(xs: &[f64], ys: &[f64]) -> f64 {
    let span = |v: &[f64]| {
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    };
    span(xs) + span(ys)
}

/// No fixation segment shorter than the minimum duration.
pub fn check_ivt_min_fix(ds: &DegreeSeries, p: &IvtParams) -> Result<(), String> {
    let r = detect_ivt(ds, p).map_err(|e| e.to_string())?;
    match r
        .segments
        .iter()
        .find(|s| s.label == EventLabel::Fixation && s.duration < p.min_fixation_s)
    {
        Some(s) => Err(format!("fixation {s:?} shorter than {}", p.min_fixation_s)),
        None => Ok(()),
    }
}

/// Splits every fixation run into back-to-back windows, each grown as far
/// as dispersion allows, and checks compactness, duration and that no
/// window could have been extended by one more sample.
pub fn check_idt_windows(ds: &DegreeSeries, p: &IdtParams) -> Result<(), String> {
    let r = detect_idt(ds, p).map_err(|e| e.to_string())?;
    let (xs, ys) = if p.smooth_window == ds.smooth_window {
        (ds.x_smooth.clone(), ds.y_smooth.clone())
    } else {
        (
            median_smooth(&ds.x, p.smooth_window),
            median_smooth(&ds.y, p.smooth_window),
        )
    };
    let n = ds.len();
    let delta = p.dispersion_threshold_deg;
    let disp = |a: usize, b: usize| l1_dispersion(&xs[a..=b], &ys[a..=b]);
    for seg in r.segments.iter().filter(|s| s.label == EventLabel::Fixation) {
        let mut start = seg.start_index;
        while start <= seg.end_index {
            let mut end = start;
            while end < seg.end_index && disp(start, end + 1) <= delta {
                end += 1;
            }
            if disp(start, end) > delta {
                return Err(format!(
                    "window {start}..={end} dispersion {} > {delta}",
                    disp(start, end)
                ));
            }
            let ts = &ds.t[start..=end];
            let span =
                ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ts.iter().cloned().fold(f64::INFINITY, f64::min);
            if span < p.min_fixation_s {
                return Err(format!("window {start}..={end} spans {span} s < {}", p.min_fixation_s));
            }
            if end + 1 < n && disp(start, end + 1) <= delta {
                return Err(format!("window {start}..={end} can be extended"));
            }
            start = end + 1;
        }
    }
    Ok(())
}

/// Angular velocity before and after shifting all coordinates.
pub fn check_translation(ds: &DegreeSeries, cx: f64, cy: f64) -> Result<(), String> {
    let shift = |v: &[f64], c: f64| v.iter().map(|a| a + c).collect::<Vec<_>>();
    let moved = DegreeSeries::from_degrees(ds.t.clone(), shift(&ds.x, cx), shift(&ds.y, cy), ds.smooth_window)
        .map_err(|e| e.to_string())?;
    let (a, b) = (angular_velocity(ds), angular_velocity(&moved));
    let mag = ds.x.iter().chain(&ds.y).fold(0.0_f64, |m, v| m.max(v.abs())) + cx.abs() + cy.abs();
    for (i, (va, vb)) in a.iter().zip(&b).enumerate() {
        // each shifted coordinate carries at most one ulp of rounding
        let tol = 8.0 * f64::EPSILON * mag / ds.dt[i] + 1e-12 * va.abs();
        if (va - vb).abs() > tol {
            return Err(format!("v[{i}] {va} vs {vb}"));
        }
    }
    Ok(())
}

/// Evaluates `pred` (the samples of `truth` flagged in `keep`, relabeled)
/// and recomputes every count and score by hand.
pub fn check_metrics(truth: &[EventLabel], pred: &[EventLabel], keep: &[bool]) -> Result<(), String> {
    use EventLabel::{Fixation as F, Saccade as S};
    let t: Vec<f64> = (0..truth.len()).map(|i| i as f64 / 256.0).collect();
    let kept: Vec<usize> = (0..truth.len()).filter(|&i| keep[i] || i == 0).collect();
    let ps = LabeledSeries::new(
        kept.iter().map(|&i| t[i]).collect(),
        kept.iter().map(|&i| pred[i]).collect(),
    );
    let gt = LabeledSeries::new(t, truth.to_vec());
    let m = evaluate(&ps, &gt, &AlignmentConfig::default()).map_err(|e| e.to_string())?;
    let c = m.confusion;
    if c.fp(F) != c.fn_(S) || c.fn_(F) != c.fp(S) {
        return Err(format!("duality broken: {c:?}"));
    }
    if m.matched_samples as usize != kept.len() || m.unmatched_gt as usize != truth.len() - kept.len() {
        return Err(format!("match counts {} / {}", m.matched_samples, m.unmatched_gt));
    }
    for class in [F, S] {
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for &i in &kept {
            tp += u64::from(truth[i] == class && pred[i] == class);
            fp += u64::from(truth[i] != class && pred[i] == class);
            fn_ += u64::from(truth[i] == class && pred[i] != class);
        }
        if (c.tp(class), c.fp(class), c.fn_(class)) != (tp, fp, fn_) {
            return Err(format!("{class:?} counts differ"));
        }
        let cm = m.class(class);
        let p = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
        let r = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
        if cm.precision != p || cm.recall != r {
            return Err(format!("{class:?} precision/recall differ"));
        }
        let ok = match (p, r) {
            (Some(p), Some(r)) if p + r > 0.0 => cm
                .f1
                .is_some_and(|f1| (1.0 / f1 - 0.5 * (1.0 / p + 1.0 / r)).abs() < 1e-9),
            (Some(_), Some(_)) => cm.f1 == Some(0.0),
            _ => cm.f1.is_none(),
        };
        if !ok {
            return Err(format!(
                "{class:?} F1 {:?} is not the harmonic mean of {p:?}, {r:?}",
                cm.f1
            ));
        }
    }
    Ok(())
}
