use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::experiment::{CellOutcome, ExperimentResult};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

/// Floats with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".into()
    }
}

fn write_canonical(v: &Value, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => {
                let _ = write!(out, "{u}");
            }
            (None, Some(i)) => {
                let _ = write!(out, "{i}");
            }
            _ => out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String(k.clone()).to_string());
                out.push(':');
                write_canonical(&map[k], out);
            }
            out.push('}');
        }
    }
}

/// JSON with sorted keys, no whitespace and 17-significant-digit floats.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::invalid(format!("serialisation: {e}")))?;
    let mut out = String::new();
    write_canonical(&v, &mut out);
    Ok(out)
}

/// SHA-256 over `config <len>\0<canonical json>`, in hex.
pub fn fingerprint<T: Serialize>(value: &T) -> Result<String> {
    let body = canonical_json(value)?;
    let mut h = Sha256::new();
    h.update(format!("config {}\0", body.len()).as_bytes());
    h.update(body.as_bytes());
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Report text: canonical JSON, or CSV with `#` header lines carrying the
/// fingerprint, rate formula and slope fit.
pub fn render_report(result: &ExperimentResult, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(canonical_json(result)? + "\n"),
        ReportFormat::Csv => {
            let mut out = String::new();
            let _ = writeln!(out, "# fingerprint: {}", result.fingerprint);
            let _ = writeln!(out, "# formula: {}", canonical_json(&result.formula)?);
            let _ = writeln!(out, "# expected_slope: {}", format_float(result.expected_slope));
            let _ = writeln!(out, "# fit: {}", canonical_json(&result.fit)?);
            out.push_str("n,replication,seed,truncation,status,median_loss,mean_density_loss,retained,jitter_retries,reason\n");
            for c in &result.cells {
                let _ = match &c.outcome {
                    CellOutcome::Ok {
                        median_loss,
                        mean_density_loss,
                        retained,
                        jitter_retries,
                    } => writeln!(
                        out,
                        "{},{},{},{},ok,{},{},{},{},",
                        c.n,
                        c.replication,
                        c.seed,
                        c.truncation,
                        format_float(*median_loss),
                        opt_float(Some(*mean_density_loss)),
                        retained,
                        jitter_retries
                    ),
                    CellOutcome::Failed { reason } => writeln!(
                        out,
                        "{},{},{},{},failed,,,,,\"{}\"",
                        c.n,
                        c.replication,
                        c.seed,
                        c.truncation,
                        reason.replace('"', "'")
                    ),
                };
            }
            Ok(out)
        }
    }
}

/// Write `report.<ext>` into `dir`, creating the directory if needed.
pub fn emit_report(result: &ExperimentResult, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    if result.cells.is_empty() {
        return Err(Error::Precondition("no results to report".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("report.{}", format.extension()));
    std::fs::write(&path, render_report(result, format)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        let v = serde_json::json!({"b": 1.0, "a": [1, -2, 0.1], "c": {"z": null, "y": "q\""}});
        assert_eq!(
            canonical_json(&v).unwrap(),
            r#"{"a":[1,-2,1.0000000000000001e-1],"b":1.0000000000000000e0,"c":{"y":"q\"","z":null}}"#
        );
        let back: Value = serde_json::from_str(&canonical_json(&v).unwrap()).unwrap();
        assert_eq!(back["a"][2].as_f64(), Some(0.1));
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let a = fingerprint(&serde_json::json!({"x": 1, "y": 2})).unwrap();
        let b = fingerprint(&serde_json::json!({"y": 2, "x": 1})).unwrap();
        let c = fingerprint(&serde_json::json!({"y": 2, "x": 2})).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
