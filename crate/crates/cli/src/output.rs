use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

/// Decimal with 17 significant digits, which recovers any `f64` exactly.
/// Plain notation for exponents in `-5..=16`, scientific otherwise.
pub fn sig17(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0000000000000000".into() } else { "0.0000000000000000".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if !(-5..=16).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = mantissa.strip_prefix('-').map_or(("", mantissa), |m| ("-", m));
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    if exp < 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-exp - 1) as usize))
    } else {
        let point = exp as usize + 1;
        if point >= digits.len() {
            format!("{sign}{digits}{}.0", "0".repeat(point - digits.len()))
        } else {
            format!("{sign}{}.{}", &digits[..point], &digits[point..])
        }
    }
}

/// A JSON number, or `null` for NaN and infinities.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

#[derive(Debug, Clone, Serialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Column { name: name.into(), unit: unit.into() }
    }

    fn header(&self) -> String {
        format!("{} [{}]", self.name, self.unit)
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => sig17(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) => num(*x),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Row-major table with named, unit-tagged columns.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format, meta: Value) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
                let io_err = |e: csv::Error| CliError::Io { path: None, source: io::Error::other(e) };
                w.write_record(self.columns.iter().map(Column::header)).map_err(io_err)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::render)).map_err(io_err)?;
                }
                w.into_inner().map_err(|e| CliError::Io { path: None, source: e.into_error() })
            }
            Format::Text => {
                let mut out = String::new();
                out.push_str("# ");
                out.push_str(&self.columns.iter().map(Column::header).collect::<Vec<_>>().join("  "));
                out.push('\n');
                for row in &self.rows {
                    out.push_str(&row.iter().map(Cell::render).collect::<Vec<_>>().join(" "));
                    out.push('\n');
                }
                Ok(out.into_bytes())
            }
            Format::Json => {
                let mut obj = match meta {
                    Value::Object(m) => m,
                    _ => serde_json::Map::new(),
                };
                obj.insert("columns".into(), json!(self.columns));
                obj.insert(
                    "rows".into(),
                    Value::Array(self.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect()),
                );
                json_bytes(&Value::Object(obj))
            }
        }
    }
}

pub fn json_bytes(value: &impl Serialize) -> Result<Vec<u8>, CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io { path: None, source: e.into() })?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Everything needed to regenerate an output file.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: String,
    pub argv: Vec<String>,
    pub parameters: BTreeMap<String, Value>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
    pub output_path: String,
    pub output_sha256: String,
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes `bytes` to `out` (and its manifest) or to standard output.
pub fn emit(
    bytes: &[u8],
    out: Option<&Path>,
    parameters: BTreeMap<String, Value>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let Some(out) = out else {
        let mut stdout = io::stdout().lock();
        return stdout
            .write_all(bytes)
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::Io { path: None, source: e });
    };
    let write = |path: &Path, data: &[u8]| {
        fs::write(path, data).map_err(|e| CliError::Io { path: Some(path.to_path_buf()), source: e })
    };
    write(out, bytes)?;
    let argv: Vec<String> = std::env::args().collect();
    let manifest = RunManifest {
        command_line: argv.join(" "),
        argv,
        parameters,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        output_path: out.display().to_string(),
        output_sha256: hex::encode(Sha256::digest(bytes)),
    };
    write(&manifest_path(out), &json_bytes(&manifest)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig17_round_trips() {
        for x in [
            4.0 / std::f64::consts::PI.powi(2),
            2.0,
            -0.1,
            1e-7,
            123456.789,
            1e20,
            -3.0e-300,
            f64::MIN_POSITIVE,
            f64::MAX,
            0.1 + 0.2,
        ] {
            let s = sig17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(sig17(2.0), "2.0000000000000000");
        assert_eq!(sig17(0.405_284_734_569_351_1), "0.40528473456935110");
        assert_eq!(sig17(-0.000125), "-0.00012500000000000000");
        assert_eq!(sig17(f64::NAN), "NaN");
    }

    #[test]
    fn csv_has_header_and_unix_newlines() {
        let mut t = Table::new(vec![Column::new("x", "a"), Column::new("y", "b")]);
        t.push(vec![Cell::Num(1.0), Cell::Num(f64::NAN)]);
        let s = String::from_utf8(t.render(Format::Csv, Value::Null).unwrap()).unwrap();
        assert_eq!(s, "x [a],y [b]\n1.0000000000000000,NaN\n");
        let j: Value = serde_json::from_slice(&t.render(Format::Json, json!({"k": 1})).unwrap()).unwrap();
        assert_eq!(j["rows"][0][1], Value::Null);
        assert_eq!(j["k"], 1);
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("/tmp/a.csv")), PathBuf::from("/tmp/a.csv.manifest.json"));
    }
}
