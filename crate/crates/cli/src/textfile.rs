use std::path::Path;

use antenna_core::textio::strip_comment;

use crate::error::CliError;

/// `key = value` lines with `#` comments, as `(line number, key, value)`.
/// Keys may repeat.
pub fn key_values(path: &Path) -> Result<Vec<(usize, String, String)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("{}:{}: expected key = value", path.display(), i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
