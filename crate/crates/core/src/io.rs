//! Campaign configuration files and tabular report output.
//!
//! Configurations are flat TOML documents. Reports are written as CSV or
//! JSON, one row per `(strategy, target overlap)`, with reals rounded to nine
//! significant digits.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::{ExperimentConfig, VarianceReport};
use crate::strategies::Strategy;

/// Keys accepted in a configuration file.
pub const CONFIG_KEYS: [&str; 13] = [
    "strategies",
    "c_grid",
    "m_pairs",
    "n_copies",
    "n_repeats",
    "r_runs",
    "seed",
    "kappa",
    "gamma",
    "eta",
    "alpha",
    "c_t",
    "bootstrap",
];

/// CSV header, in [`OutputRow`] field order.
pub const CSV_HEADER: [&str; 9] = [
    "strategy",
    "c_target",
    "c_bar",
    "c_bar_std",
    "n_copies",
    "nv",
    "nv_std",
    "theory_nv",
    "seed",
];

fn type_error(key: &str, expected: &str, got: &Value) -> Error {
    Error::parse(key, format!("expected {expected}, got {}", got.type_str()))
}

/// Parses `"p/q"` or a plain decimal.
fn parse_fraction(key: &str, s: &str) -> Result<f64> {
    let bad = || Error::parse(key, format!("cannot read `{s}` as a number"));
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            p / q
        }
        None => s.trim().parse().map_err(|_| bad())?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

fn real(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(x) if x.is_finite() => Ok(*x),
        Value::Float(_) => Err(Error::parse(key, "must be finite")),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) => parse_fraction(key, s),
        other => Err(type_error(key, "a number", other)),
    }
}

fn count(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Integer(i) => Err(Error::parse(key, format!("must be non-negative, got {i}"))),
        other => Err(type_error(key, "an integer", other)),
    }
}

fn seed(key: &str, v: &Value) -> Result<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        Value::Integer(i) => Err(Error::parse(key, format!("must be non-negative, got {i}"))),
        Value::String(s) => s
            .trim()
            .parse()
            .map_err(|_| Error::parse(key, format!("cannot read `{s}` as a 64-bit seed"))),
        other => Err(type_error(key, "an integer", other)),
    }
}

fn array<'a>(key: &str, v: &'a Value) -> Result<&'a [Value]> {
    match v {
        Value::Array(a) => Ok(a),
        other => Err(type_error(key, "an array", other)),
    }
}

/// Parses configuration text; unspecified keys keep their defaults.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::parse("<document>", e.message().to_string()))?;
    let mut config = ExperimentConfig::default();
    for (key, value) in &table {
        let k = key.as_str();
        match k {
            "strategies" => {
                config.strategies = match value {
                    Value::String(s) => vec![s.parse().map_err(|e: Error| Error::parse(k, e.to_string()))?],
                    _ => array(k, value)?
                        .iter()
                        .map(|v| match v {
                            Value::String(s) => s.parse().map_err(|e: Error| Error::parse(k, e.to_string())),
                            other => Err(type_error(k, "a strategy tag", other)),
                        })
                        .collect::<Result<_>>()?,
                }
            }
            "c_grid" => config.c_grid = array(k, value)?.iter().map(|v| real(k, v)).collect::<Result<_>>()?,
            "m_pairs" => config.m_pairs = count(k, value)?,
            "n_copies" => config.n_copies = count(k, value)?,
            "n_repeats" => config.n_repeats = count(k, value)?,
            "r_runs" => config.r_runs = count(k, value)?,
            "seed" => config.seed = seed(k, value)?,
            "kappa" => config.kappa = real(k, value)?,
            "gamma" => config.gamma = real(k, value)?,
            "eta" => config.eta = real(k, value)?,
            "alpha" => config.alpha = real(k, value)?,
            "c_t" => config.c_t = real(k, value)?,
            "bootstrap" => {
                config.bootstrap = match value {
                    Value::Boolean(b) => *b,
                    other => return Err(type_error(k, "a boolean", other)),
                }
            }
            _ => return Err(Error::parse(k, "unknown key")),
        }
    }
    if let Some((key, message)) = config.issue() {
        return Err(Error::parse(key, message));
    }
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}

/// Serializes every key, so the output parses back to an identical config.
pub fn serialize_config(config: &ExperimentConfig) -> Result<String> {
    let mut t = Table::new();
    let tags = config.strategies.iter().map(|s| Value::String(s.to_string()));
    t.insert("strategies".into(), Value::Array(tags.collect()));
    t.insert(
        "c_grid".into(),
        Value::Array(config.c_grid.iter().map(|c| Value::Float(*c)).collect()),
    );
    for (key, v) in [
        ("m_pairs", config.m_pairs),
        ("n_copies", config.n_copies),
        ("n_repeats", config.n_repeats),
        ("r_runs", config.r_runs),
    ] {
        let v = i64::try_from(v).map_err(|_| Error::Serialization(format!("{key} too large")))?;
        t.insert(key.into(), Value::Integer(v));
    }
    let seed = match i64::try_from(config.seed) {
        Ok(s) => Value::Integer(s),
        Err(_) => Value::String(config.seed.to_string()),
    };
    t.insert("seed".into(), seed);
    for (key, v) in [
        ("kappa", config.kappa),
        ("gamma", config.gamma),
        ("eta", config.eta),
        ("alpha", config.alpha),
        ("c_t", config.c_t),
    ] {
        t.insert(key.into(), Value::Float(v));
    }
    t.insert("bootstrap".into(), Value::Boolean(config.bootstrap));
    toml::to_string(&t).map_err(|e| Error::Serialization(e.to_string()))
}

/// One report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub strategy: Strategy,
    pub c_target: f64,
    pub c_bar: f64,
    pub c_bar_std: f64,
    pub n_copies: usize,
    pub nv: f64,
    pub nv_std: f64,
    pub theory_nv: f64,
    pub seed: u64,
}

impl OutputRow {
    /// The row with every real rounded to nine significant digits.
    pub fn rounded(&self) -> OutputRow {
        OutputRow {
            c_target: round_sig(self.c_target),
            c_bar: round_sig(self.c_bar),
            c_bar_std: round_sig(self.c_bar_std),
            nv: round_sig(self.nv),
            nv_std: round_sig(self.nv_std),
            theory_nv: round_sig(self.theory_nv),
            ..self.clone()
        }
    }
}

pub fn report_rows(report: &VarianceReport) -> Vec<OutputRow> {
    report
        .points
        .iter()
        .map(|p| OutputRow {
            strategy: p.strategy,
            c_target: p.c_target,
            c_bar: p.c_bar,
            c_bar_std: p.c_bar_std,
            n_copies: report.n_copies,
            nv: p.nv,
            nv_std: p.nv_std,
            theory_nv: p.theory_nv,
            seed: report.seed,
        })
        .collect()
}

/// Rounds to nine significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Nine-significant-digit text of `x` (shortest form, `1.0` rather than `1`).
pub fn format_sig(x: f64) -> String {
    format!("{:?}", round_sig(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(Error::domain(format!("unknown report format `{s}`"))),
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

pub fn rows_to_csv(rows: &[OutputRow]) -> Result<String> {
    let ser = |e: csv::Error| Error::Serialization(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(ser)?;
    for r in rows {
        w.write_record([
            r.strategy.to_string(),
            format_sig(r.c_target),
            format_sig(r.c_bar),
            format_sig(r.c_bar_std),
            r.n_copies.to_string(),
            format_sig(r.nv),
            format_sig(r.nv_std),
            format_sig(r.theory_nv),
            r.seed.to_string(),
        ])
        .map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<OutputRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| Error::Serialization(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Serialization(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize()
        .map(|row| row.map_err(|e: csv::Error| Error::Serialization(e.to_string())))
        .collect()
}

pub fn rows_to_json(rows: &[OutputRow]) -> Result<String> {
    let rounded: Vec<OutputRow> = rows.iter().map(OutputRow::rounded).collect();
    serde_json::to_string_pretty(&rounded)
        .map(|s| s + "\n")
        .map_err(|e| Error::Serialization(e.to_string()))
}

pub fn rows_from_json(text: &str) -> Result<Vec<OutputRow>> {
    serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
}

pub fn render_report(report: &VarianceReport, format: ReportFormat) -> Result<String> {
    let rows = report_rows(report);
    match format {
        ReportFormat::Csv => rows_to_csv(&rows),
        ReportFormat::Json => rows_to_json(&rows),
    }
}

/// Writes `report` to `path`.
pub fn emit_report(report: &VarianceReport, format: ReportFormat, path: &Path) -> Result<()> {
    let text = render_report(report, format)?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::VariancePoint;

    fn report(points: Vec<VariancePoint>) -> VarianceReport {
        VarianceReport {
            seed: 7,
            n_copies: 900,
            points,
        }
    }

    fn scm_point() -> VariancePoint {
        VariancePoint {
            strategy: Strategy::Scm,
            c_target: 0.5,
            c_bar: 0.50012345678,
            c_bar_std: 1.0 / 3.0,
            v_tilde: 8.3e-4,
            v_tilde_std: 1e-5,
            nv: 0.7471234567891,
            nv_std: 0.009,
            theory_nv: 0.75,
            run_variances: vec![],
            pair_means: vec![],
            exact_overlaps: vec![],
            tp_branch_fraction: None,
        }
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn key_errors_name_the_key() {
        for (text, key) in [
            ("gamma = 1.5", "gamma"),
            ("m_pairs = 1", "m_pairs"),
            ("m_pairs = \"x\"", "m_pairs"),
            ("bogus = 1", "bogus"),
            ("strategies = [\"XX\"]", "strategies"),
            ("bootstrap = 1", "bootstrap"),
            ("n_copies = 901", "n_copies"),
            ("alpha = \"1/0\"", "alpha"),
        ] {
            match parse_config_str(text) {
                Err(Error::Parse { key: k, .. }) => assert_eq!(k, key, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn fractions_round_trip() {
        let a = parse_config_str("alpha = \"1/30\"\nc_t = \"4/11\"\nseed = \"18446744073709551615\"").unwrap_or_else(|e| panic!("{e}"));
        assert_eq!(a.alpha, 1.0 / 30.0);
        let text = serialize_config(&a).unwrap();
        let b = parse_config_str(&text).unwrap();
        assert_eq!(a, b);
        assert_eq!(serialize_config(&b).unwrap(), text);
    }

    #[test]
    fn csv_layout() {
        assert_eq!(rows_to_csv(&[]).unwrap(), CSV_HEADER.join(",") + "\n");
        let csv = render_report(&report(vec![scm_point()]), ReportFormat::Csv).unwrap();
        let line = csv.lines().nth(1).unwrap();
        assert_eq!(line, "SCM,0.5,0.500123457,0.333333333,900,0.747123457,0.009,0.75,7");
    }

    #[test]
    fn csv_json_round_trip() {
        let rows = report_rows(&report(vec![scm_point(), VariancePoint { strategy: Strategy::Tt, ..scm_point() }]));
        let from_csv = rows_from_csv(&rows_to_csv(&rows).unwrap()).unwrap();
        let from_json = rows_from_json(&rows_to_json(&from_csv).unwrap()).unwrap();
        assert_eq!(from_csv, from_json);
        let expected: Vec<OutputRow> = rows.iter().map(OutputRow::rounded).collect();
        assert_eq!(from_csv, expected);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(4.0 / 11.0), "0.363636364");
        assert_eq!(format_sig(1.0), "1.0");
        assert_eq!(format_sig(0.0), "0.0");
        assert_eq!(format_sig(1.0e-20 / 3.0), "3.33333333e-21");
    }

    #[test]
    fn unwritable_path_reports_path() {
        let err = emit_report(&report(vec![]), ReportFormat::Csv, Path::new("/nonexistent/dir/out.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
    }
}
