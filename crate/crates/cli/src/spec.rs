//! Benchmark and controller files.
//!
//! Both are line-oriented `key = value` text. `#` starts a comment. Numbers
//! are decimals and are parsed exactly; lists are comma separated.
//!
//! ```text
//! name = cruise
//! domain = z
//! num = 0.0264
//! den = 1, -0.9998
//! sample_time = 0.2
//! delta = 0
//! controller_format = 4, 16
//! controller_orders = 2, 2
//! plant_format = 16, 24
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ctrlsynth::discretize::ContinuousTF;
use ctrlsynth::{
    parse_decimal, zoh_discretize, Controller, FixedPointFormat, PlantFamily, Poly, Rational, Rounding,
    TransferFunction,
};
use num_traits::{Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A well-formed file that breaks a model invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {what}: {reason}")]
pub struct ValidationError {
    pub what: String,
    pub reason: String,
}

impl ValidationError {
    fn new(what: &str, reason: impl Into<String>) -> Self {
        Self {
            what: what.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    S,
    Z,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::S => "s",
            Domain::Z => "z",
        })
    }
}

/// A synthesis problem with its plant already in the z domain.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub name: String,
    pub domain: Domain,
    pub plant: TransferFunction,
    /// Seconds per sample. Defaults to 1 for z-domain files without one.
    pub sample_time: Rational,
    /// Uncertainty magnitude per packed plant coefficient.
    pub delta: Vec<Rational>,
    pub controller_format: FixedPointFormat,
    pub orders: (usize, usize),
    pub plant_format: FixedPointFormat,
}

impl BenchmarkSpec {
    pub fn family(&self) -> PlantFamily {
        PlantFamily::new(self.plant.clone(), self.delta.clone(), self.plant_format).expect("validated on load")
    }

    pub fn sample_time_f64(&self) -> f64 {
        ctrlsynth::rational::to_f64(&self.sample_time)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    pub format: FixedPointFormat,
    pub num: Vec<Rational>,
    pub den: Vec<Rational>,
    pub rounding: Option<Rounding>,
}

impl ControllerSpec {
    pub fn controller(&self, rounding: Rounding) -> Result<Controller, ValidationError> {
        Controller::quantized(&self.num, &self.den, self.format, rounding)
            .map_err(|e| ValidationError::new("controller", e.to_string()))
    }
}

/// A value with the position of its first character.
#[derive(Debug, Clone)]
struct Entry {
    line: usize,
    column: usize,
    value: String,
}

impl Entry {
    fn error(&self, offset: usize, message: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            column: self.column + offset,
            message: message.into(),
        }
    }

    /// Comma separated items with their column offsets.
    fn items(&self) -> Vec<(usize, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        for part in self.value.split(',') {
            let lead = part.len() - part.trim_start().len();
            out.push((start + lead, part.trim()));
            start += part.len() + 1;
        }
        out
    }

    fn decimals(&self) -> Result<Vec<Rational>, ParseError> {
        self.items()
            .into_iter()
            .map(|(at, s)| parse_decimal(s).map_err(|e| self.error(at, format!("bad decimal {s:?}: {e}"))))
            .collect()
    }

    fn integers(&self, count: usize) -> Result<Vec<u32>, ParseError> {
        let items = self.items();
        if items.len() != count {
            return Err(self.error(0, format!("expected {count} comma separated integers")));
        }
        items
            .into_iter()
            .map(|(at, s)| s.parse::<u32>().map_err(|_| self.error(at, format!("bad integer {s:?}"))))
            .collect()
    }

    fn format(&self) -> Result<FixedPointFormat, SpecError> {
        let v = self.integers(2)?;
        FixedPointFormat::new(v[0], v[1]).map_err(|e| ValidationError::new("format", e.to_string()).into())
    }
}

fn parse_entries(text: &str, allowed: &[&str]) -> Result<BTreeMap<String, Entry>, ParseError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("");
        if body.trim().is_empty() {
            continue;
        }
        let Some(eq) = body.find('=') else {
            let column = body.len() - body.trim_start().len() + 1;
            return Err(ParseError {
                line,
                column,
                message: "expected `key = value`".into(),
            });
        };
        let key = body[..eq].trim();
        let key_column = body.len() - body.trim_start().len() + 1;
        if !allowed.contains(&key) {
            return Err(ParseError {
                line,
                column: key_column,
                message: format!("unknown key {key:?}"),
            });
        }
        let rest = &body[eq + 1..];
        let lead = rest.len() - rest.trim_start().len();
        let value = rest.trim().to_string();
        let column = eq + 2 + lead;
        if value.is_empty() {
            return Err(ParseError {
                line,
                column,
                message: format!("missing value for {key:?}"),
            });
        }
        if out.contains_key(key) {
            return Err(ParseError {
                line,
                column: key_column,
                message: format!("duplicate key {key:?}"),
            });
        }
        out.insert(key.to_string(), Entry { line, column, value });
    }
    Ok(out)
}

fn required<'a>(entries: &'a BTreeMap<String, Entry>, key: &str) -> Result<&'a Entry, ValidationError> {
    entries
        .get(key)
        .ok_or_else(|| ValidationError::new(key, "missing required key"))
}

const BENCHMARK_KEYS: &[&str] = &[
    "name",
    "domain",
    "num",
    "den",
    "sample_time",
    "delta",
    "controller_format",
    "controller_orders",
    "plant_format",
];

pub fn parse_benchmark(text: &str) -> Result<BenchmarkSpec, SpecError> {
    let e = parse_entries(text, BENCHMARK_KEYS)?;
    let name = e.get("name").map_or_else(|| "unnamed".to_string(), |v| v.value.clone());
    let domain = match e.get("domain") {
        None => Domain::Z,
        Some(v) => match v.value.as_str() {
            "z" => Domain::Z,
            "s" => Domain::S,
            other => return Err(v.error(0, format!("domain must be s or z, found {other:?}")).into()),
        },
    };
    // syntax problems are reported before missing keys
    let num = e.get("num").map(Entry::decimals).transpose()?;
    let den = e.get("den").map(Entry::decimals).transpose()?;
    let num = num.ok_or_else(|| ValidationError::new("num", "missing required key"))?;
    let den = den.ok_or_else(|| ValidationError::new("den", "missing required key"))?;
    let sample_time = e.get("sample_time").map(Entry::decimals).transpose()?;
    let sample_time = match sample_time.as_deref() {
        None => None,
        Some([t]) if t.is_positive() => Some(t.clone()),
        Some(_) => return Err(ValidationError::new("sample_time", "must be one positive decimal").into()),
    };
    let num_poly = Poly::new(num);
    let den_poly = Poly::new(den);
    if den_poly.is_zero() {
        return Err(ValidationError::new("den", "denominator is identically zero").into());
    }
    let plant = match domain {
        Domain::Z => TransferFunction::new(num_poly, den_poly).map_err(|e| ValidationError::new("plant", e.to_string()))?,
        Domain::S => {
            let t = sample_time
                .clone()
                .ok_or_else(|| ValidationError::new("sample_time", "required for s-domain plants"))?;
            let g = ContinuousTF::new(num_poly, den_poly, t).map_err(|e| ValidationError::new("plant", e.to_string()))?;
            zoh_discretize(&g).map_err(|e| ValidationError::new("plant", e.to_string()))?
        }
    };
    if !plant.is_proper() {
        return Err(ValidationError::new("plant", "numerator degree exceeds denominator degree").into());
    }
    let coefficients = plant.num().len() + plant.den().len();
    let delta = match e.get("delta") {
        None => vec![Rational::zero(); coefficients],
        Some(v) => {
            let d = v.decimals()?;
            match d.len() {
                1 => vec![d[0].clone(); coefficients],
                n if n == coefficients => d,
                n => {
                    return Err(ValidationError::new(
                        "delta",
                        format!("{n} magnitudes for {coefficients} plant coefficients"),
                    )
                    .into())
                }
            }
        }
    };
    if delta.iter().any(Signed::is_negative) {
        return Err(ValidationError::new("delta", "magnitudes must be nonnegative").into());
    }
    let controller_format = required(&e, "controller_format")?.format()?;
    let orders = required(&e, "controller_orders")?.integers(2)?;
    let plant_format = match e.get("plant_format") {
        Some(v) => v.format()?,
        None => FixedPointFormat::new(16, 24).expect("valid format"),
    };
    Ok(BenchmarkSpec {
        name,
        domain,
        plant,
        sample_time: sample_time.unwrap_or_else(|| Rational::from_integer(1.into())),
        delta,
        controller_format,
        orders: (orders[0] as usize, orders[1] as usize),
        plant_format,
    })
}

const CONTROLLER_KEYS: &[&str] = &["format", "num", "den", "rounding"];

pub fn parse_controller(text: &str) -> Result<ControllerSpec, SpecError> {
    let e = parse_entries(text, CONTROLLER_KEYS)?;
    let format = required(&e, "format")?.format()?;
    let num = required(&e, "num")?.decimals()?;
    let den = required(&e, "den")?.decimals()?;
    let rounding = match e.get("rounding") {
        None => None,
        Some(v) => Some(v.value.parse::<Rounding>().map_err(|m| v.error(0, m))?),
    };
    Ok(ControllerSpec {
        format,
        num,
        den,
        rounding,
    })
}

fn read(path: &Path) -> Result<String, SpecError> {
    std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_benchmark(path: &Path) -> Result<BenchmarkSpec, SpecError> {
    parse_benchmark(&read(path)?)
}

pub fn load_controller(path: &Path) -> Result<ControllerSpec, SpecError> {
    parse_controller(&read(path)?)
}
