//! Output sinks and the three file formats.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use combgen::record::{write_config_line, write_jsonl, SampleRecord};
use combgen::stats::TestReport;
use combgen::{Error, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Jsonl,
    Csv,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Jsonl => "jsonl",
            Format::Csv => "csv",
        }
    }
}

/// `--output` wins; a relative path is placed under `dir` when one is set.
/// Without `--output`, `dir` gets `<stem>.<ext>` and otherwise stdout is used.
pub fn resolve_path(output: Option<&Path>, dir: Option<&Path>, stem: &str, format: Format) -> Option<PathBuf> {
    match (output, dir) {
        (Some(p), Some(d)) if p.is_relative() => Some(d.join(p)),
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(d)) => Some(d.join(format!("{stem}.{}", format.extension()))),
        (None, None) => None,
    }
}

pub fn open(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            Box::new(BufWriter::new(File::create(p)?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(io::Error::other(e))
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Array(a) if a.iter().all(Value::is_number) => {
            a.iter().map(Value::to_string).collect::<Vec<_>>().join(";")
        }
        other => other.to_string(),
    }
}

fn write_csv_rows<W: Write>(out: &mut W, config: &Value, rows: &[Map<String, Value>]) -> Result<()> {
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    for row in rows {
        for k in row.keys() {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        w.write_record(header.iter().map(|k| row.get(k).map(cell).unwrap_or_default()))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn as_object<T: Serialize>(x: &T) -> Result<Map<String, Value>> {
    match serde_json::to_value(x)? {
        Value::Object(m) => Ok(m),
        other => Ok(Map::from_iter([("value".to_string(), other)])),
    }
}

pub fn write_records<W: Write>(out: &mut W, config: &Value, records: &[SampleRecord], format: Format) -> Result<()> {
    match format {
        Format::Jsonl => {
            write_config_line(out, config)?;
            write_jsonl(out, records)?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &json!({ "config": config, "records": records }))?;
            writeln!(out)?;
        }
        Format::Csv => {
            let rows = records.iter().map(as_object).collect::<Result<Vec<_>>>()?;
            write_csv_rows(out, config, &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// A single document: the config plus the fields of `body`.
pub fn write_document<W: Write, T: Serialize>(out: &mut W, config: &Value, body: &T) -> Result<()> {
    let mut doc = Map::from_iter([("config".to_string(), config.clone())]);
    doc.extend(as_object(body)?);
    serde_json::to_writer_pretty(&mut *out, &Value::Object(doc))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_reports<W: Write>(out: &mut W, config: &Value, reports: &[TestReport], format: Format) -> Result<()> {
    let pass = reports.iter().all(|r| r.pass);
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, &json!({ "config": config, "pass": pass, "reports": reports }))?;
            writeln!(out)?;
        }
        Format::Jsonl => {
            write_config_line(out, config)?;
            for r in reports {
                writeln!(out, "{}", serde_json::to_string(r)?)?;
            }
        }
        Format::Csv => {
            let rows = reports
                .iter()
                .map(|r| {
                    let mut m = Map::new();
                    m.insert("name".into(), r.name.clone().into());
                    m.insert("statistic".into(), r.statistic.into());
                    m.insert("threshold".into(), r.threshold.to_string().into());
                    m.insert("sample_size".into(), r.sample_size.into());
                    m.insert("p_value".into(), r.p_value.map_or(Value::Null, Value::from));
                    m.insert("pass".into(), r.pass.into());
                    m.insert("seed".into(), r.seed.map_or(Value::Null, Value::from));
                    m
                })
                .collect::<Vec<_>>();
            write_csv_rows(out, config, &rows)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_path_resolution() {
        let d = Path::new("/tmp/out");
        assert_eq!(resolve_path(None, None, "x", Format::Json), None);
        assert_eq!(resolve_path(None, Some(d), "cpp", Format::Csv), Some(d.join("cpp.csv")));
        assert_eq!(resolve_path(Some(Path::new("a.jsonl")), Some(d), "cpp", Format::Jsonl), Some(d.join("a.jsonl")));
        assert_eq!(
            resolve_path(Some(Path::new("/abs/a.json")), Some(d), "cpp", Format::Json),
            Some(PathBuf::from("/abs/a.json"))
        );
    }

    #[test]
    fn csv_joins_number_arrays() {
        let r = SampleRecord::new("limit", 1, 0).with_value("sups", vec![0.5, 0.25]);
        let mut buf = Vec::new();
        write_records(&mut buf, &json!({"reps": 1}), &[r], Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"# config: {"reps":1}"#);
        assert_eq!(lines[1], "scheme,seed,replicate,sups");
        assert_eq!(lines[2], "limit,1,0,0.5;0.25");
    }
}
