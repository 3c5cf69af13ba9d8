use serde_json::Value;

use super::schema::{DataFormat, SchemaDescription};
use super::{decode, IngestError};

/// Raw string cells after dialect parsing; header and repeated header rows
/// removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Rows identical to the header row found inside the data.
    pub repeated_headers: usize,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Splits delimited text into records. A space delimiter means "runs of
/// whitespace". Blank lines are skipped.
pub(crate) fn split_records(text: &str, delimiter: char, quote: char) -> Vec<Vec<String>> {
    if delimiter == ' ' {
        return text
            .lines()
            .map(|l| l.split_whitespace().map(str::to_string).collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect();
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(delimiter as u8)
        .quote(quote as u8)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    rdr.records()
        .filter_map(Result::ok)
        .map(|r| r.iter().map(str::to_string).collect::<Vec<_>>())
        .filter(|r| !(r.len() == 1 && r[0].is_empty()))
        .collect()
}

fn json_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses JSON-lines objects. Returns the key order of the first object and
/// one row per line.
pub(crate) fn jsonl_records(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), IngestError> {
    let mut keys: Vec<String> = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let obj: serde_json::Map<String, Value> = serde_json::from_str(line)
            .map_err(|e| IngestError::UnreadableInput(format!("line {}: {e}", lineno + 1)))?;
        if keys.is_empty() {
            keys = obj.keys().cloned().collect();
        }
        rows.push(
            keys.iter()
                .map(|k| obj.get(k).map(json_cell).unwrap_or_default())
                .collect(),
        );
    }
    Ok((keys, rows))
}

/// Parses the whole file according to a schema description.
pub fn read_table(raw: &[u8], schema: &SchemaDescription) -> Result<Table, IngestError> {
    let (text, _) = decode(raw);
    let names: Vec<String> = schema.columns.iter().map(|c| c.name.clone()).collect();
    if schema.format == DataFormat::Jsonl {
        let (keys, rows) = jsonl_records(&text)?;
        // schema column names are authoritative; reorder cells to match them
        let rows = rows
            .into_iter()
            .map(|r| {
                names
                    .iter()
                    .map(|n| {
                        keys.iter()
                            .position(|k| k == n)
                            .map(|i| r[i].clone())
                            .unwrap_or_default()
                    })
                    .collect()
            })
            .collect();
        return Ok(Table {
            columns: names,
            rows,
            repeated_headers: 0,
        });
    }

    let records = split_records(&text, schema.dialect.delimiter, schema.dialect.quotechar);
    let (header, body) = match schema.dialect.header_row_index {
        Some(h) if h < records.len() => (Some(records[h].clone()), records[h + 1..].to_vec()),
        Some(_) => {
            return Err(IngestError::UnreadableInput(
                "header row index beyond end of file".into(),
            ))
        }
        None => (None, records),
    };
    let mut repeated_headers = 0;
    let rows: Vec<Vec<String>> = body
        .into_iter()
        .filter(|r| {
            let dup = header.as_ref() == Some(r);
            repeated_headers += dup as usize;
            !dup
        })
        .collect();
    Ok(Table {
        columns: names,
        rows,
        repeated_headers,
    })
}
