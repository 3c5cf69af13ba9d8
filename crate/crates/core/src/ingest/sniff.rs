//! Offline structure inference for delimited and JSON-lines gaze exports.

use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::schema::{ColumnSchema, ColumnType, DataFormat, Dialect, SchemaDescription};
use super::table::{jsonl_records, split_records};
use super::{decode, IngestError};

pub const DEFAULT_SAMPLE_CHARS: usize = 8192;

/// Cell values treated as missing, in reporting order.
pub const MISSING_TOKENS: [&str; 10] = ["", "NA", "N/A", "NaN", "nan", "null", "NULL", "None", "none", "-"];

const CANDIDATE_DELIMITERS: [char; 4] = [',', '\t', ';', '|'];

/// Minimum share of sampled rows that must agree on the field count.
const MIN_CONSISTENCY: f64 = 0.9;

static DATE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}-\d{2}-\d{2}$").unwrap());
static DATETIME_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\d{4}-\d{2}-\d{2}[T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?$").unwrap());
static COMMA_DECIMAL_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[-+]?\d+,\d+$").unwrap());

pub(crate) fn is_missing(v: &str) -> bool {
    MISSING_TOKENS.contains(&v)
}

fn parse_number(v: &str, decimal: char) -> Option<f64> {
    if decimal == '.' {
        v.parse().ok()
    } else {
        v.replace(decimal, ".").parse().ok()
    }
}

fn is_int(v: &str) -> bool {
    v.parse::<i64>().is_ok()
}

fn is_bool(v: &str) -> bool {
    matches!(v.to_ascii_lowercase().as_str(), "true" | "false")
}

/// Field-count agreement for one delimiter hypothesis.
struct Hypothesis {
    delimiter: char,
    fields: usize,
    consistency: f64,
}

fn score(lines: &str, delimiter: char) -> Option<Hypothesis> {
    let records = split_records(lines, delimiter, '"');
    if records.is_empty() {
        return None;
    }
    let mut counts = std::collections::BTreeMap::<usize, usize>::new();
    for r in &records {
        *counts.entry(r.len()).or_default() += 1;
    }
    // most frequent count, ties to the wider split
    let (&fields, &hits) = counts.iter().max_by_key(|(&k, &v)| (v, k))?;
    Some(Hypothesis {
        delimiter,
        fields,
        consistency: hits as f64 / records.len() as f64,
    })
}

/// Lines inside the sampling budget; always at least two when available.
fn sample_lines(text: &str, sample_chars: usize) -> (String, usize, bool) {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut taken = 0;
    let mut used = 0;
    for l in &lines {
        let cost = l.chars().count() + 1;
        if taken >= 2 && used + cost > sample_chars {
            break;
        }
        used += cost;
        taken += 1;
    }
    let truncated = taken < lines.len();
    (lines[..taken].join("\n"), lines.len(), truncated)
}

fn guess_type(values: &[&str], decimal: char) -> ColumnType {
    if values.is_empty() {
        return ColumnType::String;
    }
    if values.iter().all(|v| is_bool(v)) {
        return ColumnType::Bool;
    }
    if decimal == '.' && values.iter().all(|v| is_int(v)) {
        return ColumnType::Int;
    }
    if values.iter().all(|v| parse_number(v, decimal).is_some()) {
        return ColumnType::Float;
    }
    if values.iter().all(|v| DATE_RE.is_match(v)) {
        return ColumnType::Date;
    }
    if values.iter().all(|v| DATETIME_RE.is_match(v)) {
        return ColumnType::Datetime;
    }
    let distinct: HashSet<&str> = values.iter().copied().collect();
    if values.len() >= 4 && distinct.len() <= (values.len() / 5).max(2) {
        ColumnType::Categorical
    } else {
        ColumnType::String
    }
}

fn cell_kind_numeric(v: &str, decimal: char) -> bool {
    !is_missing(v) && parse_number(v, decimal).is_some()
}

/// Header votes: a non-numeric first-row cell atop a numeric column is
/// evidence for a header, a numeric one against. All-text tables fall back
/// to "first row values never reappear below".
fn detect_header(records: &[Vec<String>], decimal: char) -> bool {
    let Some((first, rest)) = records.split_first() else {
        return false;
    };
    let rest: Vec<&Vec<String>> = rest.iter().filter(|r| *r != first).collect();
    if rest.is_empty() {
        return first
            .iter()
            .all(|c| parse_number(c, decimal).is_none() && !c.is_empty());
    }
    let mut votes = 0i32;
    let mut all_text = true;
    for (col, head) in first.iter().enumerate() {
        let cells: Vec<&str> = rest
            .iter()
            .filter_map(|r| r.get(col).map(String::as_str))
            .filter(|v| !is_missing(v))
            .collect();
        if !cells.is_empty() && cells.iter().all(|v| cell_kind_numeric(v, decimal)) {
            all_text = false;
            if cell_kind_numeric(head, decimal) {
                votes -= 1;
            } else {
                votes += 1;
            }
        }
    }
    if !all_text {
        return votes > 0;
    }
    first.iter().enumerate().all(|(col, head)| {
        !head.is_empty()
            && rest
                .iter()
                .all(|r| r.get(col).map(String::as_str) != Some(head.as_str()))
    })
}

fn detect_decimal(records: &[Vec<String>], delimiter: char) -> char {
    if delimiter == ',' {
        return '.';
    }
    let mut comma = 0;
    let mut dot = 0;
    for cell in records.iter().flatten() {
        if COMMA_DECIMAL_RE.is_match(cell) {
            comma += 1;
        } else if cell.contains('.') && cell.parse::<f64>().is_ok() {
            dot += 1;
        }
    }
    if comma > 0 && comma > dot {
        ','
    } else {
        '.'
    }
}

fn describe_columns(
    names: Vec<String>,
    rows: &[Vec<String>],
    decimal: char,
    missing_seen: &mut Vec<&'static str>,
    notes: &mut Vec<String>,
) -> Vec<ColumnSchema> {
    names
        .into_iter()
        .enumerate()
        .map(|(col, name)| {
            let raw: Vec<&str> = rows
                .iter()
                .map(|r| r.get(col).map(String::as_str).unwrap_or(""))
                .collect();
            let present: Vec<&str> = raw.iter().copied().filter(|v| !is_missing(v)).collect();
            let nullable = present.len() < raw.len();
            for tok in MISSING_TOKENS {
                if raw.contains(&tok) && !missing_seen.contains(&tok) {
                    missing_seen.push(tok);
                }
            }
            if present.len() >= 2 && present.iter().all(|v| *v == present[0]) {
                notes.push(format!(
                    "All {name} values are {}, indicating no variability in this column.",
                    present[0]
                ));
            }
            ColumnSchema {
                type_guess: guess_type(&present, decimal),
                examples: present.iter().take(3).map(|s| s.to_string()).collect(),
                nullable,
                name,
            }
        })
        .collect()
}

fn finish_missing(seen: Vec<&'static str>) -> Vec<String> {
    MISSING_TOKENS
        .iter()
        .filter(|t| seen.contains(t))
        .map(|t| t.to_string())
        .collect()
}

/// Infers format, dialect, header presence and per-column types from the
/// first `sample_chars` characters of a file. The row count estimate covers
/// the whole input.
/// NUL bytes or more than 10% control characters in the first 8 KiB.
fn looks_binary(raw: &[u8]) -> bool {
    let head = &raw[..raw.len().min(8192)];
    let ctrl = head
        .iter()
        .filter(|&&b| b == 0 || (b < 0x20 && !matches!(b, b'\t' | b'\n' | b'\r' | 0x0c)))
        .count();
    head.contains(&0) || ctrl * 10 > head.len()
}

pub fn sniff_schema(raw: &[u8], sample_chars: usize) -> Result<SchemaDescription, IngestError> {
    if raw.is_empty() {
        return Err(IngestError::UnreadableInput("input is empty".into()));
    }
    if looks_binary(raw) {
        return Err(IngestError::UnreadableInput("input looks like binary data".into()));
    }
    let (text, encoding) = decode(raw);
    let (sample, total_lines, truncated) = sample_lines(&text, sample_chars);
    if total_lines == 0 {
        return Err(IngestError::UnreadableInput("input has no non-blank lines".into()));
    }
    let mut notes = Vec::new();
    if truncated {
        notes.push(format!(
            "Structure inferred from the first {} of {total_lines} lines.",
            sample.lines().count()
        ));
    }
    let mut missing_seen = Vec::new();

    if sample.trim_start().starts_with('{') {
        if let Ok((keys, rows)) = jsonl_records(&sample) {
            if !keys.is_empty() {
                let columns = describe_columns(keys, &rows, '.', &mut missing_seen, &mut notes);
                return Ok(SchemaDescription {
                    format: DataFormat::Jsonl,
                    encoding_guess: encoding.to_string(),
                    dialect: Dialect {
                        header_row_index: None,
                        ..Dialect::default()
                    },
                    columns,
                    has_header: false,
                    row_count_estimate: format!("~{total_lines}"),
                    missing_values_patterns: finish_missing(missing_seen),
                    notes,
                });
            }
        }
    }

    // first candidate wins ties
    let mut best: Option<Hypothesis> = None;
    for h in CANDIDATE_DELIMITERS.iter().filter_map(|&d| score(&sample, d)) {
        if h.fields < 2 || h.consistency < MIN_CONSISTENCY {
            continue;
        }
        let better = best
            .as_ref()
            .is_none_or(|b| (h.consistency, h.fields) > (b.consistency, b.fields));
        if better {
            best = Some(h);
        }
    }
    let (delimiter, format) = match best {
        Some(h) => (
            h.delimiter,
            if h.delimiter == '\t' {
                DataFormat::Tsv
            } else {
                DataFormat::Csv
            },
        ),
        None => match score(&sample, ' ') {
            Some(h) if h.fields >= 2 && h.consistency >= MIN_CONSISTENCY => (' ', DataFormat::Other),
            _ => {
                return Err(IngestError::UnreadableInput(
                    "no delimiter yields at least 2 consistent columns".into(),
                ))
            }
        },
    };

    let records = split_records(&sample, delimiter, '"');
    let decimal = detect_decimal(&records, delimiter);
    let has_header = detect_header(&records, decimal);
    let width = records.iter().map(Vec::len).max().unwrap_or(0);
    let (names, body): (Vec<String>, Vec<Vec<String>>) = if has_header {
        let header = records[0].clone();
        let body: Vec<Vec<String>> = records[1..].iter().filter(|r| **r != header).cloned().collect();
        let repeats = records.len() - 1 - body.len();
        if repeats > 0 {
            notes.push(format!(
                "{repeats} repeated header rows inside the data will be dropped."
            ));
        }
        let mut names = header;
        names.extend((names.len()..width).map(|i| format!("col{i}")));
        (names, body)
    } else {
        ((0..width).map(|i| format!("col{i}")).collect(), records)
    };
    let columns = describe_columns(names, &body, decimal, &mut missing_seen, &mut notes);
    let data_rows = total_lines - usize::from(has_header);

    Ok(SchemaDescription {
        format,
        encoding_guess: encoding.to_string(),
        dialect: Dialect {
            delimiter,
            decimal,
            header_row_index: has_header.then_some(0),
            ..Dialect::default()
        },
        columns,
        has_header,
        row_count_estimate: format!("~{data_rows}"),
        missing_values_patterns: finish_missing(missing_seen),
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(s: &SchemaDescription) -> Vec<&str> {
        s.columns.iter().map(|c| c.name.as_str()).collect()
    }

    #[test]
    fn four_column_csv_with_header() {
        let raw = b"time,x,y,confidence\n0.0,1.5,2.5,0.9\n0.004,1.6,2.4,1.0\n0.008,1.7,2.3,0.8\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert_eq!(s.format, DataFormat::Csv);
        assert!(s.has_header);
        assert_eq!(names(&s), ["time", "x", "y", "confidence"]);
        assert!(s.columns.iter().all(|c| c.type_guess == ColumnType::Float));
        assert_eq!(s.dialect.header_row_index, Some(0));
        assert_eq!(s.row_count_estimate, "~3");
    }

    #[test]
    fn headerless_tsv() {
        let raw = b"0\t10.5\t20.5\n4\t10.6\t20.4\n8\t10.7\t20.6\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert_eq!(s.format, DataFormat::Tsv);
        assert!(!s.has_header);
        assert_eq!(s.dialect.header_row_index, None);
        assert_eq!(names(&s), ["col0", "col1", "col2"]);
        assert_eq!(s.columns[0].type_guess, ColumnType::Int);
    }

    #[test]
    fn single_column_is_unreadable() {
        let raw = b"17\n42\n-3\n8\n";
        assert!(matches!(
            sniff_schema(raw, DEFAULT_SAMPLE_CHARS),
            Err(IngestError::UnreadableInput(_))
        ));
    }

    #[test]
    fn integer_columns() {
        let raw = b"17,1\n42,2\n-3,3\n8,4\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert_eq!(s.columns.len(), 2);
        assert_eq!(s.columns[0].type_guess, ColumnType::Int);
        assert_eq!(s.columns[0].examples, ["17", "42", "-3"]);
    }

    #[test]
    fn ragged_rows_are_unreadable() {
        let raw = b"a,b\nc\nd,e,f;g\nh|i|j|k,l\n";
        assert!(matches!(
            sniff_schema(raw, DEFAULT_SAMPLE_CHARS),
            Err(IngestError::UnreadableInput(_))
        ));
    }

    #[test]
    fn binary_is_unreadable() {
        let raw = [0u8, 159, 146, 150, 0, 1, 2];
        assert!(matches!(
            sniff_schema(&raw, DEFAULT_SAMPLE_CHARS),
            Err(IngestError::UnreadableInput(_))
        ));
    }

    #[test]
    fn empty_input_is_unreadable() {
        assert!(matches!(sniff_schema(b"", 100), Err(IngestError::UnreadableInput(_))));
        assert!(matches!(
            sniff_schema(b"\n\n", 100),
            Err(IngestError::UnreadableInput(_))
        ));
    }

    #[test]
    fn missing_tokens_and_nullable() {
        let raw = b"t,x,y\n1,NA,2\n2,3,\n3,4,5\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert_eq!(s.missing_values_patterns, ["", "NA"]);
        assert!(s.columns[1].nullable && s.columns[2].nullable && !s.columns[0].nullable);
        assert_eq!(s.columns[1].type_guess, ColumnType::Int);
    }

    #[test]
    fn semicolon_with_comma_decimals() {
        let raw = "zeit;x;y\n0,004;1,5;2,25\n0,008;1,6;2,5\n".as_bytes();
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert_eq!(s.dialect.delimiter, ';');
        assert_eq!(s.dialect.decimal, ',');
        assert!(s.columns.iter().all(|c| c.type_guess == ColumnType::Float));
    }

    #[test]
    fn jsonl_records_detected() {
        let raw = b"{\"ts\": 0.0, \"gx\": 1.0, \"gy\": 2.0, \"event\": \"fixation\"}\n{\"ts\": 0.004, \"gx\": 1.1, \"gy\": 2.0, \"event\": \"saccade\"}\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert_eq!(s.format, DataFormat::Jsonl);
        assert_eq!(names(&s), ["ts", "gx", "gy", "event"]);
        assert_eq!(s.columns[3].type_guess, ColumnType::String);
    }

    #[test]
    fn repeated_header_noted() {
        let raw = b"t,x,y\n1,2,3\nt,x,y\n4,5,6\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        assert!(s.has_header);
        assert_eq!(s.columns[0].type_guess, ColumnType::Int);
        assert!(s.notes.iter().any(|n| n.contains("repeated header")));
    }

    #[test]
    fn text_types() {
        let raw = b"when,day,flag,kind\n2024-01-01 10:00:00,2024-01-01,true,a\n2024-01-01 10:00:01,2024-01-02,false,b\n2024-01-01 10:00:02,2024-01-03,true,a\n2024-01-01 10:00:03,2024-01-04,true,a\n2024-01-01 10:00:04,2024-01-05,true,b\n";
        let s = sniff_schema(raw, DEFAULT_SAMPLE_CHARS).unwrap();
        let types: Vec<_> = s.columns.iter().map(|c| c.type_guess).collect();
        assert_eq!(
            types,
            [
                ColumnType::Datetime,
                ColumnType::Date,
                ColumnType::Bool,
                ColumnType::Categorical
            ]
        );
    }

    #[test]
    fn sampling_budget_respected() {
        let mut raw = String::from("t,x,y\n");
        for i in 0..1000 {
            raw.push_str(&format!("{i},1.0,2.0\n"));
        }
        let s = sniff_schema(raw.as_bytes(), 200).unwrap();
        assert_eq!(s.row_count_estimate, "~1000");
        assert!(s
            .notes
            .iter()
            .any(|n| n.starts_with("Structure inferred from the first")));
    }
}
