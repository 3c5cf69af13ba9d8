//! Fixation/saccade event detection for raw eye-tracking recordings.
//!
//! The pipeline runs in five stages, each usable on its own:
//!
//! 1. [`ingest`] sniffs a file's structure, selects time/x/y columns, drops
//!    unusable rows and normalizes timestamps to seconds.
//! 2. [`preprocess`] converts to degrees of visual angle, median-smooths and
//!    computes robust time deltas and angular velocity.
//! 3. [`detect`] labels every sample with I-VT or I-DT.
//! 4. [`eval`] aligns predictions with ground truth and scores them.
//! 5. [`diagnosis`] flags degenerate outcomes and suggests parameter changes,
//!    optionally with help from a chat-completion model ([`llm`]).
//!
//! [`pipeline`] wires the stages together behind a single config file.

pub mod batch;
pub mod detect;
pub mod diagnosis;
pub mod eval;
pub mod ingest;
pub mod llm;
pub mod par;
pub mod pipeline;
pub mod preprocess;
pub mod synth;
pub mod types;

pub use detect::{detect, detect_idt, detect_ivt, merge_segments, DetectError, DetectionResult};
pub use preprocess::{angular_velocity, DegreeSeries};
pub use types::*;
