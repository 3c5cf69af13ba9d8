use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::types::{CoordUnits, EventLabel, GazeRecording, GazeSample, TimeUnit};

use super::schema::SchemaDescription;
use super::sniff::is_missing;
use super::table::Table;
use super::timeunit::{detect_time_units, unit_from_column_name};
use super::IngestError;

/// Which raw columns carry time, position and (optionally) annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub time_col: String,
    pub x_col: String,
    pub y_col: String,
    #[serde(default)]
    pub label_col: Option<String>,
    #[serde(default)]
    pub drop_cols: Vec<String>,
}

fn tokens(name: &str) -> Vec<String> {
    name.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(str::to_ascii_lowercase)
        .collect()
}

pub(crate) fn is_time_name(name: &str) -> bool {
    let toks = tokens(name);
    toks.first().is_some_and(|t| matches!(t.as_str(), "t" | "ts"))
        || toks
            .iter()
            .any(|t| t.starts_with("time") || t == "timestamp" || t == "timestamps")
}

fn is_axis_name(name: &str, axis: &str) -> bool {
    let lower = name.to_ascii_lowercase();
    let toks = tokens(name);
    toks.iter().any(|t| t == axis)
        || [
            format!("gaze{axis}"),
            format!("{axis}pos"),
            format!("pos{axis}"),
            format!("por{axis}"),
        ]
        .iter()
        .any(|k| toks.iter().any(|t| t == k))
        || lower == axis
}

pub(crate) fn is_label_name(name: &str) -> bool {
    tokens(name).iter().any(|t| {
        matches!(
            t.as_str(),
            "label" | "labels" | "event" | "events" | "class" | "gt" | "annotation" | "movement" | "handlabeller"
        )
    })
}

impl ColumnMapping {
    /// Picks time/x/y/label columns by name, or by position (0, 1, 2) for
    /// header-less files.
    pub fn infer(schema: &SchemaDescription) -> Result<Self, IngestError> {
        let names: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        let pick = |pred: &dyn Fn(&str) -> bool, taken: &[&str]| -> Option<String> {
            names
                .iter()
                .find(|n| pred(n) && !taken.contains(n))
                .map(|s| s.to_string())
        };
        let (time_col, x_col, y_col) = if schema.has_header {
            let time = pick(&is_time_name, &[]);
            let x = pick(&|n| is_axis_name(n, "x"), &[time.as_deref().unwrap_or("")]);
            let y = pick(
                &|n| is_axis_name(n, "y"),
                &[time.as_deref().unwrap_or(""), x.as_deref().unwrap_or("")],
            );
            match (time, x, y) {
                (Some(t), Some(x), Some(y)) => (t, x, y),
                _ => {
                    return Err(IngestError::InvalidMapping(format!(
                        "could not identify time/x/y among columns {names:?}; pass them explicitly"
                    )))
                }
            }
        } else if names.len() >= 3 {
            (names[0].to_string(), names[1].to_string(), names[2].to_string())
        } else {
            return Err(IngestError::InvalidMapping(format!(
                "need at least 3 columns, found {}",
                names.len()
            )));
        };
        let label_col = if schema.has_header {
            pick(&is_label_name, &[&time_col, &x_col, &y_col])
        } else {
            None
        };
        let mut mapping = ColumnMapping {
            time_col,
            x_col,
            y_col,
            label_col,
            drop_cols: Vec::new(),
        };
        mapping.fill_drop_cols(schema);
        mapping.validate(schema)?;
        Ok(mapping)
    }

    /// Everything not selected is dropped.
    pub fn fill_drop_cols(&mut self, schema: &SchemaDescription) {
        let keep = [
            Some(&self.time_col),
            Some(&self.x_col),
            Some(&self.y_col),
            self.label_col.as_ref(),
        ];
        self.drop_cols = schema
            .columns
            .iter()
            .map(|c| &c.name)
            .filter(|n| !keep.contains(&Some(n)))
            .cloned()
            .collect();
    }

    pub fn validate(&self, schema: &SchemaDescription) -> Result<(), IngestError> {
        for (role, name) in [("time", &self.time_col), ("x", &self.x_col), ("y", &self.y_col)] {
            let col = schema
                .column(name)
                .ok_or_else(|| IngestError::InvalidMapping(format!("{role} column `{name}` not in schema")))?;
            if !col.type_guess.is_numeric() {
                return Err(IngestError::InvalidMapping(format!(
                    "{role} column `{name}` is {:?}, expected numeric",
                    col.type_guess
                )));
            }
        }
        if let Some(l) = &self.label_col {
            if schema.column(l).is_none() {
                return Err(IngestError::InvalidMapping(format!("label column `{l}` not in schema")));
            }
        }
        Ok(())
    }
}

/// Drops rows whose confidence/validity value is below a threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceFilter {
    pub column: String,
    pub min_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanOptions {
    pub coord_units: CoordUnits,
    /// Forces the timestamp unit instead of inferring it.
    pub time_unit: Option<TimeUnit>,
    pub confidence: Option<ConfidenceFilter>,
    pub source_id: String,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self {
            coord_units: CoordUnits::Pixel,
            time_unit: None,
            confidence: None,
            source_id: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnitSource {
    Override,
    ColumnName,
    Detected,
    /// Too few usable timestamps to detect; seconds assumed.
    Assumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedRowReport {
    pub input_rows: usize,
    pub kept_rows: usize,
    pub dropped_missing: usize,
    pub dropped_unparseable: usize,
    pub dropped_nonfinite: usize,
    pub dropped_low_confidence: usize,
    pub time_unit: TimeUnit,
    pub time_unit_source: TimeUnitSource,
    pub time_unit_ambiguous: bool,
    /// Samples whose annotation lies outside {fixation, saccade}.
    pub unscored_labels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleanOutput {
    pub recording: GazeRecording,
    /// Per-sample annotation aligned with `recording`, `None` where the
    /// class is outside the two-label set.
    pub truth: Option<Vec<Option<EventLabel>>>,
    pub report: DroppedRowReport,
}

enum Cell {
    Missing,
    Unparseable,
    NonFinite,
    Value(f64),
}

fn parse_cell(v: Option<&String>, schema: &SchemaDescription) -> Cell {
    let Some(v) = v else {
        return Cell::Unparseable;
    };
    let v = v.trim();
    if is_missing(v) || schema.missing_values_patterns.iter().any(|p| p == v) {
        return Cell::Missing;
    }
    let mut s = v.to_string();
    if let Some(th) = schema.dialect.thousands {
        s.retain(|c| c != th);
    }
    if schema.dialect.decimal != '.' {
        s = s.replace(schema.dialect.decimal, ".");
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => Cell::Value(x),
        Ok(_) => Cell::NonFinite,
        Err(_) => Cell::Unparseable,
    }
}

/// Selects time/x/y, drops unusable rows, sorts by time (stable) and
/// rescales timestamps to seconds.
pub fn clean(
    table: &Table,
    mapping: &ColumnMapping,
    schema: &SchemaDescription,
    opts: &CleanOptions,
) -> Result<CleanOutput, IngestError> {
    mapping.validate(schema)?;
    let idx = |name: &str| {
        table
            .column_index(name)
            .ok_or_else(|| IngestError::InvalidMapping(format!("column `{name}` not in table")))
    };
    let (ti, xi, yi) = (idx(&mapping.time_col)?, idx(&mapping.x_col)?, idx(&mapping.y_col)?);
    let li = mapping.label_col.as_deref().map(idx).transpose()?;
    let ci = opts.confidence.as_ref().map(|c| idx(&c.column)).transpose()?;

    let mut report = DroppedRowReport {
        input_rows: table.rows.len() + table.repeated_headers,
        kept_rows: 0,
        dropped_missing: 0,
        dropped_unparseable: table.repeated_headers,
        dropped_nonfinite: 0,
        dropped_low_confidence: 0,
        time_unit: TimeUnit::S,
        time_unit_source: TimeUnitSource::Assumed,
        time_unit_ambiguous: false,
        unscored_labels: 0,
    };

    let mut kept: Vec<(GazeSample, Option<EventLabel>)> = Vec::with_capacity(table.rows.len());
    'rows: for row in &table.rows {
        let mut vals = [0.0; 3];
        let mut worst = None;
        for (slot, col) in [ti, xi, yi].into_iter().enumerate() {
            match parse_cell(row.get(col), schema) {
                Cell::Value(v) => vals[slot] = v,
                // a missing field outranks a garbled one when both occur
                Cell::Missing => worst = Some(0),
                Cell::Unparseable => worst = Some(worst.unwrap_or(1).min(1)),
                Cell::NonFinite => worst = Some(worst.unwrap_or(2).min(2)),
            }
        }
        match worst {
            Some(0) => {
                report.dropped_missing += 1;
                continue 'rows;
            }
            Some(1) => {
                report.dropped_unparseable += 1;
                continue 'rows;
            }
            Some(_) => {
                report.dropped_nonfinite += 1;
                continue 'rows;
            }
            None => {}
        }
        if let (Some(ci), Some(filter)) = (ci, &opts.confidence) {
            match parse_cell(row.get(ci), schema) {
                Cell::Value(c) if c >= filter.min_confidence => {}
                _ => {
                    report.dropped_low_confidence += 1;
                    continue 'rows;
                }
            }
        }
        let label = li
            .and_then(|li| row.get(li))
            .and_then(|raw| EventLabel::parse_annotation(raw));
        kept.push((GazeSample::new(vals[0], vals[1], vals[2]), label));
    }

    report.kept_rows = kept.len();
    if kept.is_empty() {
        return Err(IngestError::EmptyAfterCleaning(Box::new(report)));
    }
    kept.sort_by(|a, b| a.0.t.total_cmp(&b.0.t));

    let raw_t: Vec<f64> = kept.iter().map(|(s, _)| s.t).collect();
    let (unit, source, ambiguous) = if let Some(u) = opts.time_unit {
        (u, TimeUnitSource::Override, false)
    } else if let Some(u) = unit_from_column_name(&mapping.time_col) {
        (u, TimeUnitSource::ColumnName, false)
    } else {
        match detect_time_units(&raw_t) {
            Ok(g) => (g.unit, TimeUnitSource::Detected, g.ambiguous),
            Err(_) => (TimeUnit::S, TimeUnitSource::Assumed, true),
        }
    };
    report.time_unit = unit;
    report.time_unit_source = source;
    report.time_unit_ambiguous = ambiguous;

    // divide by the exact integer factor rather than multiplying by 1e-3 etc.
    let per_second = unit.per_second();
    let samples: Vec<GazeSample> = kept
        .iter()
        .map(|(s, _)| GazeSample::new(s.t / per_second, s.x, s.y))
        .collect();
    let truth = li.map(|_| kept.iter().map(|(_, l)| *l).collect::<Vec<_>>());
    if let Some(tr) = &truth {
        report.unscored_labels = tr.iter().filter(|l| l.is_none()).count();
    }

    Ok(CleanOutput {
        recording: GazeRecording {
            samples,
            coord_units: opts.coord_units,
            time_units_detected: unit,
            source_id: opts.source_id.clone(),
        },
        truth,
        report,
    })
}

/// Writes `time_s,x,y` (plus `label` when annotations exist). Labels outside
/// the two-class set are written as `other`.
pub fn write_clean_csv<W: Write>(
    out: W,
    rec: &GazeRecording,
    truth: Option<&[Option<EventLabel>]>,
) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(out);
    let map_err = |e: csv::Error| IngestError::Io(std::io::Error::other(e));
    if truth.is_some() {
        w.write_record(["time_s", "x", "y", "label"]).map_err(map_err)?;
    } else {
        w.write_record(["time_s", "x", "y"]).map_err(map_err)?;
    }
    for (i, s) in rec.samples.iter().enumerate() {
        let (t, x, y) = (s.t.to_string(), s.x.to_string(), s.y.to_string());
        match truth {
            Some(tr) => {
                let l = tr[i].map(|l| l.as_str()).unwrap_or("other");
                w.write_record([t.as_str(), &x, &y, l]).map_err(map_err)?;
            }
            None => w.write_record([t.as_str(), &x, &y]).map_err(map_err)?,
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{read_table, sniff_schema, DEFAULT_SAMPLE_CHARS};

    fn run(raw: &str, opts: &CleanOptions) -> Result<CleanOutput, IngestError> {
        let schema = sniff_schema(raw.as_bytes(), DEFAULT_SAMPLE_CHARS).unwrap();
        let table = read_table(raw.as_bytes(), &schema).unwrap();
        let mapping = ColumnMapping::infer(&schema)?;
        clean(&table, &mapping, &schema, opts)
    }

    #[test]
    fn na_rows_dropped_and_counted() {
        let mut raw = String::from("time,x,y\n");
        for i in 0..100 {
            let x = if i % 33 == 5 {
                "NA".to_string()
            } else {
                format!("{}.5", i)
            };
            raw.push_str(&format!("{},{},{}\n", i * 4, x, 2 * i));
        }
        let out = run(&raw, &CleanOptions::default()).unwrap();
        assert_eq!(out.recording.len(), 97);
        assert_eq!(out.report.dropped_missing, 3);
        assert_eq!(out.report.kept_rows, 97);
    }

    #[test]
    fn output_sorted_by_time() {
        let raw = "time_s,x,y\n2,20,0\n1,10,0\n3,30,0\n";
        let out = run(raw, &CleanOptions::default()).unwrap();
        assert_eq!(out.recording.timestamps(), vec![1.0, 2.0, 3.0]);
        let xs: Vec<f64> = out.recording.samples.iter().map(|s| s.x).collect();
        assert_eq!(xs, vec![10.0, 20.0, 30.0]);
    }

    #[test]
    fn millisecond_file_normalized() {
        let raw = include_str!("../../tests/fixtures/sample_gaze.csv");
        let opts = CleanOptions {
            time_unit: Some(TimeUnit::Ms),
            ..Default::default()
        };
        let out = run(raw, &opts).unwrap();
        assert_eq!(&out.recording.timestamps()[..3], &[1.0, 5.0, 9.0]);
        assert_eq!(out.report.time_unit_source, TimeUnitSource::Override);
    }

    #[test]
    fn name_hint_beats_detection() {
        let raw = "time_ms,x,y\n0,1,1\n4,1,1\n8,1,1\n";
        let out = run(raw, &CleanOptions::default()).unwrap();
        assert_eq!(out.report.time_unit, TimeUnit::Ms);
        assert!((out.recording.samples[2].t - 0.008).abs() < 1e-15);
    }

    #[test]
    fn detected_unit_used_without_hint() {
        let raw = "timestamp,x,y\n1000,1,1\n1004,1,1\n1008,1,1\n";
        let out = run(raw, &CleanOptions::default()).unwrap();
        assert_eq!(out.report.time_unit, TimeUnit::Ms);
        assert_eq!(out.report.time_unit_source, TimeUnitSource::Detected);
    }

    #[test]
    fn nothing_left_is_an_error() {
        let raw = "time,x,y\n1,NA,2\n2,NA,3\n3,4,5\n";
        let schema = sniff_schema(raw.as_bytes(), 100).unwrap();
        let mut table = read_table(raw.as_bytes(), &schema).unwrap();
        table.rows.pop();
        let mapping = ColumnMapping::infer(&schema).unwrap();
        match clean(&table, &mapping, &schema, &CleanOptions::default()) {
            Err(IngestError::EmptyAfterCleaning(r)) => assert_eq!(r.dropped_missing, 2),
            other => panic!("expected EmptyAfterCleaning, got {other:?}"),
        }
    }

    #[test]
    fn repeated_headers_and_garbage() {
        let raw = "time,x,y\n0.000,1,1\ntime,x,y\n0.004,abc,1\n0.008,inf,1\n0.012,2,2\n";
        let schema = sniff_schema(raw.as_bytes(), 1000).unwrap();
        let table = read_table(raw.as_bytes(), &schema).unwrap();
        let mapping = ColumnMapping {
            time_col: "time".into(),
            x_col: "x".into(),
            y_col: "y".into(),
            label_col: None,
            drop_cols: vec![],
        };
        // x sniffs as string because of "abc"; force a numeric schema
        let mut schema = schema;
        schema.columns[1].type_guess = crate::ingest::ColumnType::Float;
        let out = clean(&table, &mapping, &schema, &CleanOptions::default()).unwrap();
        assert_eq!(out.report.dropped_unparseable, 2);
        assert_eq!(out.report.dropped_nonfinite, 1);
        assert_eq!(out.recording.len(), 2);
    }

    #[test]
    fn labels_outside_two_classes_kept_for_detection() {
        let raw = "t,x,y,label\n0,1,1,1\n4,1,1,3\n8,1,1,2\n12,1,1,fixation\n";
        let out = run(raw, &CleanOptions::default()).unwrap();
        assert_eq!(out.recording.len(), 4);
        assert_eq!(
            out.truth.unwrap(),
            vec![
                Some(EventLabel::Fixation),
                None,
                Some(EventLabel::Saccade),
                Some(EventLabel::Fixation)
            ]
        );
        assert_eq!(out.report.unscored_labels, 1);
    }

    #[test]
    fn confidence_filter() {
        let raw = "time,x,y,confidence\n0,1,1,0.9\n4,1,1,0.2\n8,1,1,1.0\n";
        let opts = CleanOptions {
            confidence: Some(ConfidenceFilter {
                column: "confidence".into(),
                min_confidence: 0.5,
            }),
            ..Default::default()
        };
        let out = run(raw, &opts).unwrap();
        assert_eq!(out.report.dropped_low_confidence, 1);
        assert_eq!(out.recording.len(), 2);
    }

    #[test]
    fn mapping_inference() {
        let raw = "Timestamp,GazeX,GazeY,pupil,Event\n0,1,2,3,fix\n1,1,2,3,sac\n";
        let schema = sniff_schema(raw.as_bytes(), 1000).unwrap();
        let m = ColumnMapping::infer(&schema).unwrap();
        assert_eq!(
            (m.time_col.as_str(), m.x_col.as_str(), m.y_col.as_str()),
            ("Timestamp", "GazeX", "GazeY")
        );
        assert_eq!(m.label_col.as_deref(), Some("Event"));
        assert_eq!(m.drop_cols, ["pupil"]);
    }

    #[test]
    fn mapping_rejects_text_columns() {
        let raw = "time,x,y\n0,a,1\n1,b,2\n";
        assert!(matches!(
            run(raw, &CleanOptions::default()),
            Err(IngestError::InvalidMapping(_))
        ));
    }

    #[test]
    fn cleaned_csv_reingests_unchanged() {
        let raw = "time_ms,x,y,label\n8,3.25,1,2\n0,1.5,1,1\n4,2.75,1,4\n";
        let first = run(raw, &CleanOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_clean_csv(&mut buf, &first.recording, first.truth.as_deref()).unwrap();
        let again = run(std::str::from_utf8(&buf).unwrap(), &CleanOptions::default()).unwrap();
        assert_eq!(again.recording.samples, first.recording.samples);
        assert_eq!(again.truth, first.truth);
    }
}
