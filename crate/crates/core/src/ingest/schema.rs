//! The structured description of a raw data file: format, dialect and
//! per-column type guesses. Field names and nesting follow the strict-JSON
//! contract shared with the LLM-backed inference path.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Tsv,
    Jsonl,
    #[serde(other)]
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dialect {
    pub delimiter: char,
    pub quotechar: char,
    pub escapechar: Option<char>,
    pub decimal: char,
    pub thousands: Option<char>,
    /// `None` when the file has no header row.
    pub header_row_index: Option<usize>,
}

impl Default for Dialect {
    fn default() -> Self {
        Self {
            delimiter: ',',
            quotechar: '"',
            escapechar: None,
            decimal: '.',
            thousands: None,
            header_row_index: Some(0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    String,
    Int,
    Float,
    Bool,
    Date,
    Datetime,
    Categorical,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        matches!(self, ColumnType::Int | ColumnType::Float)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub type_guess: ColumnType,
    pub examples: Vec<String>,
    pub nullable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaDescription {
    pub format: DataFormat,
    pub encoding_guess: String,
    pub dialect: Dialect,
    pub columns: Vec<ColumnSchema>,
    pub has_header: bool,
    pub row_count_estimate: String,
    pub missing_values_patterns: Vec<String>,
    pub notes: Vec<String>,
}

impl SchemaDescription {
    pub fn column(&self, name: &str) -> Option<&ColumnSchema> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serializes")
    }

    /// One-paragraph human description.
    pub fn summary(&self) -> String {
        let format = match self.format {
            DataFormat::Csv => "CSV",
            DataFormat::Tsv => "TSV",
            DataFormat::Jsonl => "JSON-lines",
            DataFormat::Other => "delimited text",
        };
        let cols: Vec<String> = self
            .columns
            .iter()
            .map(|c| {
                format!(
                    "{} ({})",
                    c.name,
                    serde_json::to_value(c.type_guess).unwrap().as_str().unwrap_or("?")
                )
            })
            .collect();
        let delim = match self.dialect.delimiter {
            '\t' => "tab".to_string(),
            ' ' => "whitespace".to_string(),
            d => format!("`{d}`"),
        };
        let header = match self.dialect.header_row_index {
            Some(i) => format!("header on row {i}"),
            None => "no header".to_string(),
        };
        let mut s = format!(
            "{format} file ({}) with {} columns: {}. Delimiter {delim}, decimal `{}`, {header}, {} rows.",
            self.encoding_guess,
            self.columns.len(),
            cols.join(", "),
            self.dialect.decimal,
            self.row_count_estimate
        );
        for n in &self.notes {
            s.push(' ');
            s.push_str(n);
        }
        s
    }

    /// Parses strict JSON (nothing but whitespace may follow the object) and
    /// checks the result against the contract.
    pub fn from_json(s: &str) -> Result<Self, Vec<String>> {
        let schema: SchemaDescription = serde_json::from_str(s).map_err(|e| vec![e.to_string()])?;
        schema.validate()?;
        Ok(schema)
    }

    /// Semantic checks beyond what the JSON shape enforces.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut errs = Vec::new();
        if self.columns.is_empty() {
            errs.push("columns must not be empty".to_string());
        }
        let mut seen = HashSet::new();
        for c in &self.columns {
            if c.name.trim().is_empty() {
                errs.push("column names must not be empty".to_string());
            } else if !seen.insert(c.name.as_str()) {
                errs.push(format!("duplicate column name `{}`", c.name));
            }
        }
        if self.encoding_guess.trim().is_empty() {
            errs.push("encoding_guess must not be empty".to_string());
        }
        let rc = &self.row_count_estimate;
        let rc_ok = rc == "unknown"
            || rc
                .strip_prefix('~')
                .is_some_and(|n| !n.is_empty() && n.chars().all(|c| c.is_ascii_digit()));
        if !rc_ok {
            errs.push(format!("row_count_estimate must be `unknown` or `~N`, got `{rc}`"));
        }
        if self.dialect.delimiter == self.dialect.quotechar {
            errs.push("delimiter and quotechar must differ".to_string());
        }
        if self.has_header != self.dialect.header_row_index.is_some() {
            errs.push("has_header and dialect.header_row_index disagree".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }
}
