//! Raw file ingestion: structure sniffing, column selection, cleaning and
//! time normalization.

pub(crate) mod clean;
mod schema;
mod sniff;
mod table;
mod timeunit;

use thiserror::Error;

pub use clean::{
    clean, write_clean_csv, CleanOptions, CleanOutput, ColumnMapping, ConfidenceFilter, DroppedRowReport,
    TimeUnitSource,
};
pub use schema::{ColumnSchema, ColumnType, DataFormat, Dialect, SchemaDescription};
pub use sniff::{sniff_schema, DEFAULT_SAMPLE_CHARS, MISSING_TOKENS};
pub use table::{read_table, Table};
pub use timeunit::{detect_time_units, unit_from_column_name, TimeUnitGuess};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unreadable input: {0}")]
    UnreadableInput(String),
    #[error("timestamps have no strictly positive delta")]
    NoPositiveDeltas,
    #[error("need at least 2 timestamps to detect units, got {0}")]
    TooFewSamples(usize),
    #[error("invalid column mapping: {0}")]
    InvalidMapping(String),
    #[error("no rows left after cleaning ({} input rows)", .0.input_rows)]
    EmptyAfterCleaning(Box<DroppedRowReport>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Decodes UTF-8 (BOM stripped), falling back to Latin-1. Returns the text
/// and the encoding name used.
pub fn decode(raw: &[u8]) -> (String, &'static str) {
    let raw = raw.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(raw);
    match std::str::from_utf8(raw) {
        Ok(s) => (s.to_string(), "utf-8"),
        Err(_) => (raw.iter().map(|&b| b as char).collect(), "latin1"),
    }
}
