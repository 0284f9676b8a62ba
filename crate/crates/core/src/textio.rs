//! Whitespace-separated numeric column files with `#` comments.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Strips a trailing `#` comment and surrounding whitespace.
pub fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => line[..i].trim(),
        None => line.trim(),
    }
}

/// Parses rows of exactly `columns` numbers. Blank and comment-only lines
/// are skipped; commas are accepted as separators.
pub fn parse_columns(text: &str, columns: usize) -> Result<Vec<Vec<f64>>, ParseError> {
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != columns {
            return Err(ParseError {
                line: idx + 1,
                message: format!("expected {columns} columns, found {}", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(columns);
        for f in fields {
            let v: f64 = f.parse().map_err(|_| ParseError {
                line: idx + 1,
                message: format!("not a number: {f:?}"),
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_comments_and_blank_lines() {
        let rows = parse_columns("# header\n\n1 2 3 # trailing\n4,5,6\n", 3).unwrap();
        assert_eq!(rows, vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
    }

    #[test]
    fn reports_line_of_bad_row() {
        let err = parse_columns("1 2 3\n4 5\n", 3).unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_columns("1 x 3\n", 3).unwrap_err();
        assert!(err.message.contains("not a number"));
    }
}
