//! Signal conditioning shared by both detectors: robust time deltas,
//! pixel to degree conversion, centered median smoothing and pointwise
//! angular velocity.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::types::{CoordUnits, GazeRecording, GeometryConfig, ParamViolation};

/// ε used when a recording has no strictly positive time delta.
pub const FALLBACK_EPSILON_S: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("recording is empty")]
    Empty,
    #[error("coordinates are in pixels but no screen geometry was supplied")]
    MissingGeometry,
    #[error("invalid geometry: {}", join(.0))]
    InvalidGeometry(Vec<ParamViolation>),
    #[error("smoothing window must be odd and >= 1, got {0}")]
    BadWindow(usize),
}

fn join(v: &[ParamViolation]) -> String {
    v.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Median of a scratch buffer; mean of the two central order statistics for
/// even lengths. Reorders the buffer.
pub(crate) fn median_in_place(buf: &mut [f64]) -> f64 {
    debug_assert!(!buf.is_empty());
    buf.sort_unstable_by(f64::total_cmp);
    let n = buf.len();
    if n % 2 == 1 {
        buf[n / 2]
    } else {
        0.5 * (buf[n / 2 - 1] + buf[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustDeltas {
    /// `dt[0] = epsilon`; `dt[i] = max(t[i] - t[i-1], epsilon)` for `i >= 1`.
    pub dt: Vec<f64>,
    pub epsilon: f64,
}

/// Clamps every inter-sample delta from below by ε, the median of the
/// strictly positive raw deltas (falling back to 1 ms when there are none).
pub fn robust_deltas(t: &[f64]) -> Result<RobustDeltas, PreprocessError> {
    if t.is_empty() {
        return Err(PreprocessError::Empty);
    }
    let mut positive: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 0.0).collect();
    let epsilon = if positive.is_empty() {
        FALLBACK_EPSILON_S
    } else {
        median_in_place(&mut positive)
    };
    let mut dt = Vec::with_capacity(t.len());
    dt.push(epsilon);
    dt.extend(t.windows(2).map(|w| (w[1] - w[0]).max(epsilon)));
    Ok(RobustDeltas { dt, epsilon })
}

/// Converts recording coordinates to degrees of visual angle under the
/// small-angle approximation. Degree input passes through untouched.
pub fn pixels_to_degrees(
    rec: &GazeRecording,
    geo: Option<&GeometryConfig>,
) -> Result<(Vec<f64>, Vec<f64>), PreprocessError> {
    if rec.coord_units == CoordUnits::Degree {
        return Ok((
            rec.samples.iter().map(|s| s.x).collect(),
            rec.samples.iter().map(|s| s.y).collect(),
        ));
    }
    let geo = geo.ok_or(PreprocessError::MissingGeometry)?;
    geo.validate().map_err(PreprocessError::InvalidGeometry)?;
    let k = geo.degrees_per_pixel();
    Ok((
        rec.samples.iter().map(|s| k * s.x).collect(),
        rec.samples.iter().map(|s| k * s.y).collect(),
    ))
}

/// Centered running median with an odd window. Near the edges the window
/// shrinks symmetrically to the widest centered window that fits, so with
/// `window = 3` both endpoints pass through unchanged.
///
/// # Panics
///
/// If `window` is even or zero.
pub fn median_smooth(series: &[f64], window: usize) -> Vec<f64> {
    assert!(window % 2 == 1, "median window must be odd and >= 1");
    if window == 1 {
        return series.to_vec();
    }
    let n = series.len();
    let half = window / 2;
    par::map_indices(n, |i| {
        let h = half.min(i).min(n - 1 - i);
        if h == 0 {
            return series[i];
        }
        let mut buf = series[i - h..=i + h].to_vec();
        median_in_place(&mut buf)
    })
}

/// Degree-space recording ready for detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub x_smooth: Vec<f64>,
    pub y_smooth: Vec<f64>,
    pub dt: Vec<f64>,
    pub epsilon: f64,
    /// Window that produced `x_smooth`/`y_smooth`.
    pub smooth_window: usize,
}

impl DegreeSeries {
    /// Converts to degrees first, then smooths.
    pub fn from_recording(
        rec: &GazeRecording,
        geo: Option<&GeometryConfig>,
        window: usize,
    ) -> Result<Self, PreprocessError> {
        if rec.is_empty() {
            return Err(PreprocessError::Empty);
        }
        let (x, y) = pixels_to_degrees(rec, geo)?;
        Self::from_degrees(rec.timestamps(), x, y, window)
    }

    pub fn from_degrees(t: Vec<f64>, x: Vec<f64>, y: Vec<f64>, window: usize) -> Result<Self, PreprocessError> {
        assert!(t.len() == x.len() && t.len() == y.len(), "t, x, y must align");
        if window == 0 || window.is_multiple_of(2) {
            return Err(PreprocessError::BadWindow(window));
        }
        let RobustDeltas { dt, epsilon } = robust_deltas(&t)?;
        let x_smooth = median_smooth(&x, window);
        let y_smooth = median_smooth(&y, window);
        Ok(Self {
            t,
            x,
            y,
            x_smooth,
            y_smooth,
            dt,
            epsilon,
            smooth_window: window,
        })
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// `v[0] = 0`; `v[i] = |(X̃, Ỹ)_i - (X̃, Ỹ)_{i-1}| / dt[i]` in deg/s.
pub fn angular_velocity(ds: &DegreeSeries) -> Vec<f64> {
    velocity_trace(&ds.x_smooth, &ds.y_smooth, &ds.dt)
}

/// [`angular_velocity`] over explicit smoothed coordinates and deltas.
pub fn velocity_trace(xs: &[f64], ys: &[f64], dt: &[f64]) -> Vec<f64> {
    par::map_indices(xs.len(), |i| {
        if i == 0 {
            0.0
        } else {
            let dx = xs[i] - xs[i - 1];
            let dy = ys[i] - ys[i - 1];
            (dx * dx + dy * dy).sqrt() / dt[i]
        }
    })
}
