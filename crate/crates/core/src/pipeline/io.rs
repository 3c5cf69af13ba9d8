use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::ingest::clean::{is_label_name, is_time_name};
use crate::ingest::{read_table, sniff_schema, unit_from_column_name, IngestError, DEFAULT_SAMPLE_CHARS};
use crate::types::{EventLabel, LabeledSeries};

pub(crate) fn pretty<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Writes via a sibling temp file and rename so readers never see a
/// half-written file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension()
            .map(|e| e.to_string_lossy().into_owned())
            .unwrap_or_default()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// `time_s,label` rows.
pub fn write_labels_csv<W: Write>(out: W, labels: &LabeledSeries) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "label"])?;
    for (t, l) in labels.t.iter().zip(&labels.label) {
        w.write_record([t.to_string().as_str(), l.as_str()])?;
    }
    w.flush()
}

/// Reads any delimited file with a time column and a label column (by name,
/// otherwise first and last column). Rows with other classes are skipped.
/// Timestamps are rescaled to seconds when the column name carries a unit.
pub fn read_label_csv(path: &Path) -> Result<LabeledSeries, IngestError> {
    let raw = fs::read(path)?;
    let schema = sniff_schema(&raw, DEFAULT_SAMPLE_CHARS)?;
    let table = read_table(&raw, &schema)?;
    let names = &table.columns;
    if names.len() < 2 {
        return Err(IngestError::InvalidMapping(format!(
            "{}: need time and label columns",
            path.display()
        )));
    }
    let ti = names.iter().position(|n| is_time_name(n)).unwrap_or(0);
    let li = names.iter().position(|n| is_label_name(n)).unwrap_or(names.len() - 1);
    let per_second = unit_from_column_name(&names[ti]).map_or(1.0, |u| u.per_second());
    let mut rows: Vec<(f64, EventLabel)> = table
        .rows
        .iter()
        .filter_map(|r| {
            let t: f64 = r.get(ti)?.trim().parse().ok()?;
            let l = EventLabel::parse_annotation(r.get(li)?)?;
            t.is_finite().then_some((t / per_second, l))
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (t, label) = rows.into_iter().unzip();
    Ok(LabeledSeries { t, label })
}
