//! LOLIB text format.
//!
//! Layout: an optional name line (recognized when its first token is not a
//! number), the dimension `n`, then `n * n` whitespace-separated weights in
//! row-major order. Line breaks inside the matrix are not significant.

use std::io::{BufReader, Read, Write};
use std::path::Path;

use crate::error::{LopError, Result};
use crate::instance::LopInstance;

struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn tokens(text: &str) -> impl Iterator<Item = Token<'_>> {
    text.lines().enumerate().flat_map(|(ln, line)| {
        let mut out = Vec::new();
        let mut start = None;
        for (col, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    out.push(Token {
                        text: &line[s..col],
                        line: ln + 1,
                        column: s + 1,
                    });
                }
            } else if start.is_none() {
                start = Some(col);
            }
        }
        out
    })
}

/// Parses an instance. `default_name` is used when the text has no name
/// line.
pub fn parse_lolib<R: Read>(reader: R, default_name: &str) -> Result<LopInstance> {
    let mut text = String::new();
    BufReader::new(reader).read_to_string(&mut text)?;

    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let first_token = first_line.split_whitespace().next();
    let has_name = first_token.is_some_and(|t| t.parse::<f64>().is_err());
    let mut name = default_name.to_string();
    let mut toks = tokens(&text).peekable();
    if has_name {
        name = first_line.trim().to_string();
        let name_line = toks.peek().map(|t| t.line).unwrap_or(1);
        while toks.peek().is_some_and(|t| t.line == name_line) {
            toks.next();
        }
    }

    let dim = toks.next().ok_or_else(|| LopError::Parse {
        line: 1,
        column: 1,
        message: "missing dimension".into(),
    })?;
    let n: usize = dim.text.parse().map_err(|_| LopError::Parse {
        line: dim.line,
        column: dim.column,
        message: format!("dimension `{}` is not a non-negative integer", dim.text),
    })?;
    if n == 0 {
        return Err(LopError::Parse {
            line: dim.line,
            column: dim.column,
            message: "dimension is zero".into(),
        });
    }

    let mut b = Vec::with_capacity(n * n);
    let mut last = (dim.line, dim.column);
    for tok in toks.by_ref().take(n * n) {
        let v: f64 = tok.text.parse().map_err(|_| LopError::Parse {
            line: tok.line,
            column: tok.column,
            message: format!("`{}` is not a number", tok.text),
        })?;
        if !v.is_finite() {
            return Err(LopError::Parse {
                line: tok.line,
                column: tok.column,
                message: format!("`{}` is not finite", tok.text),
            });
        }
        last = (tok.line, tok.column);
        b.push(v);
    }
    if b.len() < n * n {
        return Err(LopError::Parse {
            line: last.0,
            column: last.1,
            message: format!("expected {} matrix entries, found {}", n * n, b.len()),
        });
    }
    LopInstance::new(name, n, b)
}

fn format_weight(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        // Shortest representation that reparses to the same f64.
        format!("{v:e}")
    }
}

/// Writes the optional name line, the dimension, and one matrix row per
/// line. Integral weights are written without a decimal point.
pub fn write_lolib<W: Write>(inst: &LopInstance, mut out: W) -> Result<()> {
    if !inst.name().is_empty() {
        writeln!(out, "{}", inst.name())?;
    }
    writeln!(out, "{}", inst.n())?;
    for i in 0..inst.n() {
        let row: Vec<String> = inst.row(i).iter().map(|&v| format_weight(v)).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn read_lolib_file(path: &Path) -> Result<LopInstance> {
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_lolib(std::fs::File::open(path)?, &label)
}

pub fn write_lolib_file(inst: &LopInstance, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_lolib(inst, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_plain_matrix() {
        let inst = parse_lolib("3\n0 5 1\n2 0 4\n3 6 0\n".as_bytes(), "t").unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.weight(0, 1), 5.0);
        assert_eq!(inst.weight(2, 1), 6.0);
        assert_eq!(inst.name(), "t");
    }

    #[test]
    fn parses_name_line_and_wrapped_rows() {
        let inst = parse_lolib("be75eec example\n 2\n 7 3\n1\n 9\n".as_bytes(), "x").unwrap();
        assert_eq!(inst.name(), "be75eec example");
        assert_eq!(inst.weight(0, 1), 3.0);
        assert_eq!(inst.weight(1, 0), 1.0);
        assert_eq!(inst.weight(0, 0), 0.0);
    }

    #[test]
    fn malformed_inputs() {
        let err = parse_lolib("2\n0 1 2\n".as_bytes(), "x").unwrap_err();
        assert!(matches!(err, LopError::Parse { .. }), "{err}");
        assert!(matches!(
            parse_lolib("".as_bytes(), "x").unwrap_err(),
            LopError::Parse { .. }
        ));
        assert!(matches!(
            parse_lolib("0\n".as_bytes(), "x").unwrap_err(),
            LopError::Parse { .. }
        ));
        let err = parse_lolib("2\n0 1\nq 0\n".as_bytes(), "x").unwrap_err();
        match err {
            LopError::Parse { line, column, .. } => assert_eq!((line, column), (3, 1)),
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(
            parse_lolib("1\n0\n".as_bytes(), "x").unwrap_err(),
            LopError::InvalidInstance(_)
        ));
    }

    #[test]
    fn writer_layout() {
        let inst = LopInstance::from_rows("", &[vec![0.0, 3.0], vec![1.0, 0.0]]).unwrap();
        let mut buf = Vec::new();
        write_lolib(&inst, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "2\n0 3\n1 0\n");

        let named = inst.with_name("pair");
        let mut buf = Vec::new();
        write_lolib(&named, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "pair\n2\n0 3\n1 0\n");
    }

    #[test]
    fn reals_reparse_closely() {
        let inst = LopInstance::from_rows(
            "r",
            &[vec![0.0, 0.123456789012345], vec![1.0 / 3.0, 0.0]],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_lolib(&inst, &mut buf).unwrap();
        let back = parse_lolib(buf.as_slice(), "r").unwrap();
        for (a, b) in inst.matrix().iter().zip(back.matrix()) {
            assert!((a - b).abs() <= 1e-9);
        }
    }
}
