//! JSON-lines sample records.
//!
//! A stream starts with one `{"config": {...}}` line echoing the generating
//! configuration, followed by one record per replicate:
//! `{"scheme": …, "n": …, "eps": …, "seed": …, "replicate": …, <values>}`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub scheme: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub seed: u64,
    pub replicate: u64,
    #[serde(flatten)]
    pub values: Map<String, Value>,
}

impl SampleRecord {
    pub fn new(scheme: &str, seed: u64, replicate: u64) -> Self {
        SampleRecord {
            scheme: scheme.to_string(),
            n: None,
            eps: None,
            seed,
            replicate,
            values: Map::new(),
        }
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    /// Merges the fields of a serializable struct into the record values.
    pub fn with_values<T: Serialize>(mut self, values: &T) -> Result<Self> {
        match serde_json::to_value(values)? {
            Value::Object(m) => self.values.extend(m),
            other => {
                self.values.insert("value".into(), other);
            }
        }
        Ok(self)
    }

    pub fn with_value(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.values.insert(key.to_string(), value.into());
        self
    }

    /// Numbers stored under `key`: a scalar yields one, an array all of its elements.
    pub fn numbers(&self, key: &str) -> Vec<f64> {
        match self.values.get(key) {
            Some(Value::Number(x)) => x.as_f64().into_iter().collect(),
            Some(Value::Array(a)) => a.iter().filter_map(Value::as_f64).collect(),
            _ => Vec::new(),
        }
    }
}

pub fn write_config_line<W: Write, C: Serialize>(out: &mut W, config: &C) -> Result<()> {
    let line = serde_json::json!({ "config": config });
    writeln!(out, "{}", serde_json::to_string(&line)?)?;
    Ok(())
}

pub fn write_jsonl<W: Write>(out: &mut W, records: &[SampleRecord]) -> Result<()> {
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// Reads records, skipping blank lines and config lines.
pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<SampleRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: Value = serde_json::from_str(&line)?;
        if v.get("config").is_some() && v.get("scheme").is_none() {
            continue;
        }
        let r: SampleRecord = serde_json::from_value(v)
            .map_err(|e| Error::invalid(format!("record on line {}: {e}", i + 1)))?;
        out.push(r);
    }
    Ok(out)
}
