use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

pub fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Destination of a command's main output; `None` is stdout.
pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(p, bytes).map_err(|e| CliError::io(p, e))
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes).map_err(|e| CliError::io(Path::new("<stdout>"), e))?;
            out.flush().map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}

/// CSV preceded by a `# config: {...}` comment line.
pub fn csv_bytes(config: &Value, header: &[String], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut buf = format!("# config: {}\n", serde_json::to_string(config).unwrap()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(CliError::csv)?;
        for r in rows {
            w.write_record(r).map_err(CliError::csv)?;
        }
        w.flush().map_err(|e| CliError::io(Path::new("<csv>"), e))?;
    }
    Ok(buf)
}

pub fn write_csv(path: Option<&Path>, config: &Value, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_bytes(path, &csv_bytes(config, &header, rows)?)
}

pub fn json_bytes<T: Serialize>(config: &Value, result: &T) -> Vec<u8> {
    let doc = serde_json::json!({ "config": config, "result": result });
    let mut s = serde_json::to_string_pretty(&doc).unwrap();
    s.push('\n');
    s.into_bytes()
}

pub fn write_json<T: Serialize>(path: Option<&Path>, config: &Value, result: &T) -> Result<(), CliError> {
    write_bytes(path, &json_bytes(config, result))
}

/// Config echoed by an output file: the `config` field of a JSON document or
/// the `# config:` line of a CSV file.
pub fn read_config(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::usage(format!("{}: not a JSON output: {e}", path.display())))?;
        return doc
            .get("config")
            .cloned()
            .ok_or_else(|| CliError::usage(format!("{}: no config field", path.display())));
    }
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# config: ") {
            return serde_json::from_str(rest)
                .map_err(|e| CliError::usage(format!("{}: bad config line: {e}", path.display())));
        }
    }
    Err(CliError::usage(format!("{}: no config echo found", path.display())))
}

/// Numeric table with a header row; `#` lines are comments.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| CliError::input(path, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| CliError::input(path, e.to_string()))?;
            let row = rec
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| CliError::input(path, format!("data row {}: {f:?} is not a number", i + 1)))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    /// Column `i`; errors if the table is narrower.
    pub fn column(&self, i: usize, path: &Path) -> Result<Vec<f64>, CliError> {
        if self.header.len() <= i {
            return Err(CliError::input(path, format!("expected at least {} columns", i + 1)));
        }
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn ensure_exists(path: &Path) -> Result<PathBuf, CliError> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(CliError::usage(format!("{} does not exist", path.display())))
    }
}
