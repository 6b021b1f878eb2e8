//! Deterministic JSON reports: keys sorted, floats rounded to six significant digits.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
pub const ABSREL_UNITS: &str = "AbsRel x100";

/// One aggregated cell of results: a method evaluated on a prior pattern over
/// one or more scenes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub pattern: String,
    pub method: String,
    pub scenes: usize,
    pub absrel_mean: f64,
    pub absrel_std: f64,
    pub rmse_mean: f64,
    pub silog_mean: f64,
    pub evaluated_pixels: usize,
    pub clamped_fills: usize,
}

/// Wall time per stage. Absent values serialize as `null`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub synth: Option<f64>,
    pub index: Option<f64>,
    pub prefill: Option<f64>,
    pub metrics: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema: u32,
    pub version: String,
    pub units: String,
    /// Echo of the configuration that produced the document.
    pub config: Value,
    pub results: Vec<ResultRow>,
    pub timings_ms: StageTimings,
    pub clamped_fill_count: usize,
}

impl ReportDocument {
    pub fn new(version: impl Into<String>, config: Value) -> Self {
        Self {
            schema: REPORT_SCHEMA_VERSION,
            version: version.into(),
            units: ABSREL_UNITS.to_string(),
            config,
            results: Vec::new(),
            timings_ms: StageTimings::default(),
            clamped_fill_count: 0,
        }
    }
}

/// Pretty-printed JSON with sorted keys and a trailing newline.
pub fn write_report(doc: &ReportDocument) -> Vec<u8> {
    let value = round_floats(serde_json::to_value(doc).expect("report is serializable"));
    let mut out = serde_json::to_string_pretty(&value)
        .expect("value is serializable")
        .into_bytes();
    out.push(b'\n');
    out
}

/// Rounds every non-integer number to six significant digits; non-finite
/// numbers already serialize as `null`.
fn round_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = n.as_f64().expect("f64 number");
            let r: f64 = format!("{f:.5e}").parse().expect("formatted float parses");
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        // serde_json's default map is ordered by key.
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}
