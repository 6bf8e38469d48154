//! Structured reports. The text form is rendered from the same value as the
//! JSON form, so the two always carry the same fields.

use serde::{Serialize, Serializer};
use serde_json::Value;

use ctrlsynth::cegis::{Certificate, SpotCheck};
use ctrlsynth::rational::format_decimal;
use ctrlsynth::{Controller, FixedPointValue, Margins, TranscriptRecord};

/// Bumped whenever a field changes meaning or disappears.
pub const FORMAT_VERSION: u32 = 1;

/// Finite numbers as JSON numbers, infinities as `"inf"` / `"-inf"`.
fn float_or_inf<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else if x.is_nan() {
        s.serialize_str("nan")
    } else if *x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coefficient {
    pub decimal: String,
    pub raw: i128,
}

impl From<&FixedPointValue> for Coefficient {
    fn from(v: &FixedPointValue) -> Self {
        Self {
            decimal: v.to_decimal_string(),
            raw: v.raw(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllerReport {
    pub format: String,
    pub num: Vec<Coefficient>,
    pub den: Vec<Coefficient>,
}

impl From<&Controller> for ControllerReport {
    fn from(c: &Controller) -> Self {
        Self {
            format: c.format().to_string(),
            num: c.num().iter().map(Coefficient::from).collect(),
            den: c.den().iter().map(Coefficient::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub status: String,
    pub violated: Option<String>,
    /// Smallest slack lower bound, 12 decimals.
    pub margin: String,
    pub boxes: usize,
}

impl From<&Certificate> for CertificateReport {
    fn from(c: &Certificate) -> Self {
        Self {
            status: c.verdict.status.to_string(),
            violated: c.verdict.violated.map(|v| v.to_string()),
            margin: format_decimal(&c.verdict.margin, 12),
            boxes: c.boxes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitsReport {
    pub max_iterations: usize,
    pub max_precision: String,
    pub timeout_s: Option<f64>,
    pub search_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisReport {
    pub format_version: u32,
    pub command: &'static str,
    pub benchmark: String,
    pub engine: String,
    pub seed: u64,
    pub limits: LimitsReport,
    pub outcome: &'static str,
    pub failure: Option<String>,
    pub controller: Option<ControllerReport>,
    pub plant_format: String,
    pub iterations: usize,
    pub certificate: Option<CertificateReport>,
    pub spot_check: Option<SpotCheck>,
    pub transcript: Vec<TranscriptRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl SynthesisReport {
    pub fn is_success(&self) -> bool {
        self.outcome == "success"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginReport {
    pub loop_kind: &'static str,
    #[serde(serialize_with = "float_or_inf")]
    pub gain_margin_db: f64,
    #[serde(serialize_with = "float_or_inf")]
    pub phase_margin_deg: f64,
    pub phase_crossover_rad_s: Option<f64>,
    pub gain_crossover_rad_s: Option<f64>,
}

impl MarginReport {
    pub fn new(loop_kind: &'static str, m: &Margins) -> Self {
        Self {
            loop_kind,
            gain_margin_db: m.gain_margin_db,
            phase_margin_deg: m.phase_margin_deg,
            phase_crossover_rad_s: m.phase_crossover,
            gain_crossover_rad_s: m.gain_crossover,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NominalReport {
    pub jury: String,
    pub violated: Option<String>,
    #[serde(serialize_with = "float_or_inf")]
    pub max_root_modulus: f64,
    pub unstable_cancellation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceReport {
    pub steps: usize,
    pub noise: String,
    pub bounded: bool,
    pub diverged_at: Option<usize>,
    #[serde(serialize_with = "float_or_inf")]
    pub max_abs_output: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub format_version: u32,
    pub command: &'static str,
    pub benchmark: String,
    pub controller: ControllerReport,
    pub plant_format: String,
    pub nominal: NominalReport,
    pub family: CertificateReport,
    pub margins: Vec<MarginReport>,
    pub margin_error: Option<String>,
    pub trace: Option<TraceReport>,
    pub verdict: &'static str,
}

impl VerifyReport {
    pub fn is_stable(&self) -> bool {
        self.verdict == "stable"
    }
}

pub fn to_json<T: Serialize>(report: &T) -> String {
    serde_json::to_string_pretty(report).expect("reports serialize")
}

/// Indented `key: value` lines, one per field, in declaration order.
pub fn to_text<T: Serialize>(report: &T) -> String {
    let value = serde_json::to_value(report).expect("reports serialize");
    let mut out = String::new();
    render(&value, 0, &mut out);
    out
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("-".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().filter_map(scalar).collect();
            Some(format!("[{}]", parts.join(", ")))
        }
        _ => None,
    }
}

fn render(v: &Value, depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match v {
        Value::Object(map) => {
            for (k, item) in map {
                match scalar(item) {
                    Some(s) => out.push_str(&format!("{pad}{k}: {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}{k}:\n"));
                        render(item, depth + 1, out);
                    }
                }
            }
        }
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                match scalar(item) {
                    Some(s) => out.push_str(&format!("{pad}- {s}\n")),
                    None => {
                        out.push_str(&format!("{pad}- [{i}]\n"));
                        render(item, depth + 1, out);
                    }
                }
            }
        }
        other => out.push_str(&format!("{pad}{}\n", scalar(other).unwrap_or_default())),
    }
}
