//! Optional chat-model assistance for schema inference and diagnosis.
//!
//! Every call has a deterministic counterpart (`ingest::sniff_schema`,
//! `diagnosis::diagnose`) that callers fall back to on failure. Nothing here
//! changes data or detector parameters.

mod provider;

use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{decode, sniff_schema, IngestError, SchemaDescription};

pub use provider::{AuditLog, ChatMessage, ChatProvider, HttpChatProvider, ScriptedProvider};

const STAGE1_DETAILED: &str = include_str!("prompts/stage1_detailed.txt");
const STAGE1_SIMPLE: &str = include_str!("prompts/stage1_simple.txt");
const STAGE3_DIAGNOSE: &str = include_str!("prompts/stage3_diagnose.txt");

const REPAIR_INSTRUCTION: &str = "Your previous reply could not be used: {errors}. Reply again with only the strict \
                                  JSON object, using exactly the keys shown in the template.";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("provider timed out")]
    ProviderTimeout,
    #[error("provider error: {0}")]
    Provider(String),
    #[error("environment variable {0} with the API key is not set")]
    MissingApiKey(String),
    #[error("response failed schema validation: {}", errors.join("; "))]
    SchemaValidationFailed { raw: String, errors: Vec<String> },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    /// Name of the variable holding the key; the key itself is never stored.
    pub api_key_env_var: String,
    pub timeout_s: f64,
    pub max_snippet_chars: usize,
}

impl Default for LlmProviderConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var: "GAZEFLOW_API_KEY".into(),
            timeout_s: 60.0,
            max_snippet_chars: crate::ingest::DEFAULT_SAMPLE_CHARS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Stage1Detailed,
    Stage1Simple,
    Stage3Diagnose,
}

impl TemplateName {
    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Stage1Detailed => "stage1_detailed",
            TemplateName::Stage1Simple => "stage1_simple",
            TemplateName::Stage3Diagnose => "stage3_diagnose",
        }
    }
}

/// Prompt text with `{sample_chars}`, `{snippet}` or `{metrics}` slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub name: TemplateName,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(name: TemplateName) -> Self {
        let body = match name {
            TemplateName::Stage1Detailed => STAGE1_DETAILED,
            TemplateName::Stage1Simple => STAGE1_SIMPLE,
            TemplateName::Stage3Diagnose => STAGE3_DIAGNOSE,
        };
        Self {
            name,
            body: body.to_string(),
        }
    }

    /// Loads a replacement body for `name` from disk.
    pub fn from_file(name: TemplateName, path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            name,
            body: std::fs::read_to_string(path)?,
        })
    }

    pub fn render_stage1(&self, snippet: &str, sample_chars: usize) -> String {
        self.body
            .replace("{sample_chars}", &sample_chars.to_string())
            .replace("{snippet}", snippet)
    }

    pub fn render_stage3(&self, metrics_json: &str) -> String {
        self.body.replace("{metrics}", metrics_json)
    }
}

/// Returns the last balanced top-level `{...}` in `text`. Braces inside JSON
/// strings are ignored.
pub fn extract_last_json_object(text: &str) -> Option<&str> {
    let mut depth = 0usize;
    let mut start = 0;
    let mut in_str = false;
    let mut escaped = false;
    let mut last = None;
    for (i, c) in text.char_indices() {
        if in_str {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_str = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    last = Some(&text[start..=i]);
                }
            }
            _ => {}
        }
    }
    last
}

fn parse_schema(response: &str) -> Result<SchemaDescription, Vec<String>> {
    let json = extract_last_json_object(response).ok_or_else(|| vec!["no JSON object found".to_string()])?;
    SchemaDescription::from_json(json)
}

fn snippet(raw: &[u8], max_chars: usize) -> String {
    let (text, _) = decode(raw);
    text.chars().take(max_chars).collect()
}

/// Asks the model for a schema description of `raw`. One repair retry on an
/// unusable answer, then `SchemaValidationFailed` with the raw response.
pub fn infer_schema_llm(
    raw: &[u8],
    cfg: &LlmProviderConfig,
    template: &PromptTemplate,
    provider: &dyn ChatProvider,
    audit: Option<&AuditLog>,
) -> Result<SchemaDescription, LlmError> {
    let prompt = template.render_stage1(&snippet(raw, cfg.max_snippet_chars), cfg.max_snippet_chars);
    let mut messages = vec![ChatMessage::user(prompt)];
    let first = provider::call(provider, audit, template.name.as_str(), &messages)?;
    let errors = match parse_schema(&first) {
        Ok(s) => return Ok(s),
        Err(e) => e,
    };
    log::info!("schema response rejected ({}); retrying once", errors.join("; "));
    messages.push(ChatMessage::assistant(first));
    messages.push(ChatMessage::user(
        REPAIR_INSTRUCTION.replace("{errors}", &errors.join("; ")),
    ));
    let second = provider::call(provider, audit, template.name.as_str(), &messages)?;
    parse_schema(&second).map_err(|errors| LlmError::SchemaValidationFailed { raw: second, errors })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaSource {
    Llm,
    Sniffer,
}

/// Like [`infer_schema_llm`] but falls back to the sniffer on any model
/// failure when `fallback` is set.
pub fn infer_schema_or_sniff(
    raw: &[u8],
    cfg: &LlmProviderConfig,
    template: &PromptTemplate,
    provider: &dyn ChatProvider,
    audit: Option<&AuditLog>,
    fallback: bool,
) -> Result<(SchemaDescription, SchemaSource), LlmError> {
    match infer_schema_llm(raw, cfg, template, provider, audit) {
        Ok(s) => Ok((s, SchemaSource::Llm)),
        Err(e) if fallback => {
            log::warn!("model schema inference failed ({e}); using the sniffer");
            Ok((sniff_schema(raw, cfg.max_snippet_chars)?, SchemaSource::Sniffer))
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuggestionKind {
    VelocityDps,
    DurationMs,
    Threshold,
}

/// A number the narrative attaches to a parameter-like phrase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSuggestion {
    pub kind: SuggestionKind,
    pub value: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmDiagnosis {
    pub narrative: String,
    pub suggestions: Vec<ExtractedSuggestion>,
}

static UNIT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(\d+(?:\.\d+)?)\s*(?:\$\^\\circ\$|°)?\s*(deg(?:rees)?\s*/\s*s\b|deg(?:rees)? per second|/s\b|ms\b|milliseconds?\b)",
    )
    .unwrap()
});
static THRESHOLD_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)threshold[^.\d\n]{0,40}?(\d+(?:\.\d+)?)").unwrap());

/// Pulls parameter-like numbers out of free text. Only numbers followed by a
/// velocity or millisecond unit, or shortly after the word "threshold", count.
pub fn extract_suggestions(narrative: &str) -> Vec<ExtractedSuggestion> {
    let mut out: Vec<(usize, ExtractedSuggestion)> = Vec::new();
    for c in UNIT_RE.captures_iter(narrative) {
        let unit = c[2].to_ascii_lowercase();
        let kind = if unit.starts_with("ms") || unit.starts_with("milli") {
            SuggestionKind::DurationMs
        } else {
            SuggestionKind::VelocityDps
        };
        let m = c.get(1).unwrap();
        out.push((
            m.start(),
            ExtractedSuggestion {
                kind,
                value: m.as_str().parse().unwrap(),
                text: c[0].to_string(),
            },
        ));
    }
    for c in THRESHOLD_RE.captures_iter(narrative) {
        let m = c.get(1).unwrap();
        if out.iter().any(|(pos, _)| *pos == m.start()) {
            continue;
        }
        out.push((
            m.start(),
            ExtractedSuggestion {
                kind: SuggestionKind::Threshold,
                value: m.as_str().parse().unwrap(),
                text: c[0].to_string(),
            },
        ));
    }
    out.sort_by_key(|(pos, _)| *pos);
    out.into_iter().map(|(_, s)| s).collect()
}

/// Sends serialized metrics with the diagnosis prompt. Callers fall back to
/// `diagnosis::diagnose` on error.
pub fn diagnose_llm(
    metrics: &serde_json::Value,
    template: &PromptTemplate,
    provider: &dyn ChatProvider,
    audit: Option<&AuditLog>,
) -> Result<LlmDiagnosis, LlmError> {
    let json = serde_json::to_string_pretty(metrics).expect("metrics serialize");
    let messages = [ChatMessage::user(template.render_stage3(&json))];
    let narrative = provider::call(provider, audit, template.name.as_str(), &messages)?;
    Ok(LlmDiagnosis {
        suggestions: extract_suggestions(&narrative),
        narrative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SNIPPET: &[u8] = include_bytes!("../../tests/fixtures/sample_gaze.csv");
    const SCHEMA: &str = include_str!("../../tests/fixtures/sample_schema.json");

    #[test]
    fn templates_have_slots() {
        let d = PromptTemplate::builtin(TemplateName::Stage1Detailed);
        assert!(d.body.starts_with("You are a data analysis assistant."));
        let r = d.render_stage1("a,b\n1,2", 8192);
        assert!(r.contains("maximum displaying 8192 characters"));
        assert!(r.contains("<DATA_SNIPPET>\na,b\n1,2\n</DATA_SNIPPET>"));
        assert!(r.contains("\"quotechar\": \"\\\"\""));
        let s = PromptTemplate::builtin(TemplateName::Stage1Simple).render_stage1("x", 1);
        assert!(s.starts_with("Analyze the data snippet and output its structure and information."));
        let m = PromptTemplate::builtin(TemplateName::Stage3Diagnose).render_stage3("{}");
        assert!(m.starts_with("This is the result I obtained using the algorithm in this code."));
        assert!(m.trim_end().ends_with("{}"));
    }

    #[test]
    fn extracts_last_object() {
        let text = "Summary {not json}.\n```json\n{\"a\": \"}{\", \"b\": {\"c\": 1}}\n```";
        assert_eq!(
            extract_last_json_object(text),
            Some("{\"a\": \"}{\", \"b\": {\"c\": 1}}")
        );
        assert_eq!(extract_last_json_object("no braces"), None);
        assert_eq!(extract_last_json_object("{\"open\": 1"), None);
    }

    #[test]
    fn schema_from_mocked_reply() {
        let reply = format!("The file is a four-column CSV.\n\n{SCHEMA}");
        let p = ScriptedProvider::replying(&[&reply]);
        let cfg = LlmProviderConfig::default();
        let s = infer_schema_llm(
            SNIPPET,
            &cfg,
            &PromptTemplate::builtin(TemplateName::Stage1Detailed),
            &p,
            None,
        )
        .unwrap();
        assert_eq!(s, SchemaDescription::from_json(SCHEMA).unwrap());
        assert_eq!(p.requests().len(), 1);
        assert!(p.requests()[0][0].content.contains("time,x,y,confidence"));
    }

    #[test]
    fn prose_only_fails_after_one_retry() {
        let p = ScriptedProvider::replying(&["It looks like gaze data.", "Still just prose."]);
        let cfg = LlmProviderConfig::default();
        let t = PromptTemplate::builtin(TemplateName::Stage1Simple);
        match infer_schema_llm(SNIPPET, &cfg, &t, &p, None) {
            Err(LlmError::SchemaValidationFailed { raw, .. }) => assert_eq!(raw, "Still just prose."),
            other => panic!("{other:?}"),
        }
        let reqs = p.requests();
        assert_eq!(reqs.len(), 2);
        assert_eq!(reqs[1].len(), 3);
    }

    #[test]
    fn timeout_falls_back_to_sniffer() {
        let p = ScriptedProvider::new([Err(LlmError::ProviderTimeout)]);
        let cfg = LlmProviderConfig::default();
        let t = PromptTemplate::builtin(TemplateName::Stage1Detailed);
        let (s, src) = infer_schema_or_sniff(SNIPPET, &cfg, &t, &p, None, true).unwrap();
        assert_eq!(src, SchemaSource::Sniffer);
        assert_eq!(s.columns.len(), 4);
        let p = ScriptedProvider::new([Err(LlmError::ProviderTimeout)]);
        assert!(matches!(
            infer_schema_or_sniff(SNIPPET, &cfg, &t, &p, None, false),
            Err(LlmError::ProviderTimeout)
        ));
    }

    #[test]
    fn suggestion_grammar() {
        let s =
            extract_suggestions("Increase the velocity threshold. Typical thresholds range from 30°/s to 100 deg/s.");
        let vals: Vec<f64> = s.iter().map(|s| s.value).collect();
        assert_eq!(vals, [30.0, 100.0]);
        let s = extract_suggestions("Set the threshold to 45 and the minimum fixation to 80 ms.");
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].kind, s[0].value), (SuggestionKind::Threshold, 45.0));
        assert_eq!((s[1].kind, s[1].value), (SuggestionKind::DurationMs, 80.0));
        assert!(extract_suggestions("Precision 0.97 and recall 0.96 look consistent.").is_empty());
    }

    #[test]
    fn diagnosis_call_shape() {
        let p = ScriptedProvider::replying(&["Results look consistent; no anomalies."]);
        let metrics = serde_json::json!({"ivt": {"fixation": {"f1": 0.97}}});
        let d = diagnose_llm(
            &metrics,
            &PromptTemplate::builtin(TemplateName::Stage3Diagnose),
            &p,
            None,
        )
        .unwrap();
        assert!(d.suggestions.is_empty());
        assert!(p.requests()[0][0].content.contains("\"f1\": 0.97"));
    }
}
