use serde::{Deserialize, Serialize};

use crate::preprocess::median_in_place;
use crate::types::TimeUnit;

use super::IngestError;

/// Upper band edges on the median positive delta: below 0.1 is seconds,
/// below 100 milliseconds, below 1e5 microseconds, anything larger
/// nanoseconds. Covers 30-2000 Hz trackers with a wide margin.
const BOUNDARIES: [(f64, TimeUnit); 3] = [(0.1, TimeUnit::S), (100.0, TimeUnit::Ms), (1e5, TimeUnit::Us)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeUnitGuess {
    pub unit: TimeUnit,
    /// The median delta lies within a factor of two of a band edge.
    pub ambiguous: bool,
    pub median_delta: f64,
}

/// Guesses the unit of a raw timestamp column from its median strictly
/// positive inter-sample delta.
pub fn detect_time_units(timestamps: &[f64]) -> Result<TimeUnitGuess, IngestError> {
    if timestamps.len() < 2 {
        return Err(IngestError::TooFewSamples(timestamps.len()));
    }
    let mut deltas: Vec<f64> = timestamps
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 0.0 && d.is_finite())
        .collect();
    if deltas.is_empty() {
        return Err(IngestError::NoPositiveDeltas);
    }
    let d = median_in_place(&mut deltas);
    let unit = BOUNDARIES
        .iter()
        .find(|(edge, _)| d < *edge)
        .map(|&(_, u)| u)
        .unwrap_or(TimeUnit::Ns);
    let ambiguous = BOUNDARIES.iter().any(|&(edge, _)| d >= edge / 2.0 && d < edge * 2.0);
    Ok(TimeUnitGuess {
        unit,
        ambiguous,
        median_delta: d,
    })
}

/// Unit suffix in a column name such as `time_ms` or `timestamp_us`.
pub fn unit_from_column_name(name: &str) -> Option<TimeUnit> {
    let last = name
        .rsplit(|c: char| !c.is_ascii_alphanumeric())
        .find(|s| !s.is_empty())?
        .to_ascii_lowercase();
    match last.as_str() {
        "s" | "sec" | "secs" | "seconds" => Some(TimeUnit::S),
        "ms" | "msec" | "millis" | "milliseconds" => Some(TimeUnit::Ms),
        "us" | "usec" | "micros" | "microseconds" => Some(TimeUnit::Us),
        "ns" | "nsec" | "nanos" | "nanoseconds" => Some(TimeUnit::Ns),
        _ => None,
    }
}
