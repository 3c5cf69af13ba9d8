//! Detection over many recordings at once.

use crate::detect::{detect, DetectError, DetectionResult};
use crate::par;
use crate::preprocess::DegreeSeries;
use crate::types::DetectorParams;

/// Runs `params` on every series, fanning out across threads when the
/// `parallel` feature is on. Output order matches input order.
pub fn detect_batch(series: &[DegreeSeries], params: &DetectorParams) -> Vec<Result<DetectionResult, DetectError>> {
    par::map_items(series, |ds| detect(ds, params))
}

/// Single-threaded [`detect_batch`].
pub fn detect_batch_sequential(
    series: &[DegreeSeries],
    params: &DetectorParams,
) -> Vec<Result<DetectionResult, DetectError>> {
    par::map_items_sequential(series, |ds| detect(ds, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};
    use crate::types::{IdtParams, IvtParams};

    #[test]
    fn parallel_matches_sequential() {
        let series: Vec<DegreeSeries> = (0..8)
            .map(|seed| {
                let s = generate(&SynthConfig::default(), seed);
                let (x, y) = s.xy();
                DegreeSeries::from_degrees(s.recording.timestamps(), x, y, 3).unwrap()
            })
            .collect();
        for p in [
            DetectorParams::Ivt(IvtParams::default()),
            DetectorParams::Idt(IdtParams::default()),
        ] {
            let a: Vec<_> = detect_batch(&series, &p).into_iter().map(Result::unwrap).collect();
            let b: Vec<_> = detect_batch_sequential(&series, &p)
                .into_iter()
                .map(Result::unwrap)
                .collect();
            assert_eq!(a, b);
        }
    }
}
