//! Plain-text codebook files.
//!
//! ```text
//! # two codewords, m_t = 1, N = 2
//! 1 2 2
//! 1,0 1,0
//! -1,0 -1,0
//! ```
//!
//! The header is `m_t N count`. It is followed by `count` codewords of
//! `m_t x N` entries, each written `re,im`, row-major. Entries are separated
//! by any whitespace, so line breaks inside the body are free-form. `#` starts
//! a comment that runs to the end of the line.

use std::fmt::Write as _;
use std::path::Path;

use dmtlab::CMatrix;
use num_complex::Complex64;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct CodebookFile {
    pub m_t: usize,
    pub slots: usize,
    pub codewords: Vec<CMatrix>,
}

struct Token<'a> {
    text: &'a str,
    line: usize,
    field: usize,
}

fn tokens(text: &str) -> impl Iterator<Item = Token<'_>> {
    text.lines().enumerate().flat_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("");
        content
            .split_whitespace()
            .enumerate()
            .map(move |(j, text)| Token {
                text,
                line: i + 1,
                field: j + 1,
            })
    })
}

fn fail(tok: &Token<'_>, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("line {}, field {}: {msg}", tok.line, tok.field))
}

fn parse_number(tok: &Token<'_>, s: &str) -> CliResult<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| fail(tok, format_args!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(fail(tok, format_args!("'{s}' is not finite")));
    }
    Ok(v)
}

fn parse_entry(tok: &Token<'_>) -> CliResult<Complex64> {
    let (re, im) = tok.text.split_once(',').ok_or_else(|| {
        fail(
            tok,
            format_args!("expected a 're,im' pair, got '{}'", tok.text),
        )
    })?;
    Ok(Complex64::new(
        parse_number(tok, re)?,
        parse_number(tok, im)?,
    ))
}

pub fn parse_codebook(text: &str) -> CliResult<CodebookFile> {
    let mut it = tokens(text).peekable();
    let header_line = it
        .peek()
        .map(|t| t.line)
        .ok_or_else(|| CliError::Validation("codebook file has no header".into()))?;
    let mut header = Vec::with_capacity(3);
    while let Some(tok) = it.next_if(|t| t.line == header_line) {
        let v: usize = tok.text.parse().map_err(|_| {
            fail(
                &tok,
                format_args!("header expects integers 'm_t N count', got '{}'", tok.text),
            )
        })?;
        header.push(v);
    }
    let [m_t, slots, count] = header[..] else {
        return Err(CliError::Validation(format!(
            "line {header_line}: header must be 'm_t N count', found {} fields",
            header.len()
        )));
    };
    if m_t == 0 || slots == 0 || count == 0 {
        return Err(CliError::Validation(format!(
            "line {header_line}: m_t, N and count must be positive"
        )));
    }

    let per_word = m_t * slots;
    let mut entries = Vec::with_capacity(per_word * count);
    for tok in it {
        if entries.len() == per_word * count {
            return Err(fail(
                &tok,
                format_args!("unexpected entry after {count} codewords of {m_t}x{slots}"),
            ));
        }
        entries.push(parse_entry(&tok)?);
    }
    if entries.len() < per_word * count {
        return Err(CliError::Validation(format!(
            "expected {} entries ({count} codewords of {m_t}x{slots}), found {}",
            per_word * count,
            entries.len()
        )));
    }
    let codewords = entries
        .chunks(per_word)
        .map(|c| CMatrix::from_row_slice(m_t, slots, c))
        .collect();
    Ok(CodebookFile {
        m_t,
        slots,
        codewords,
    })
}

pub fn read_codebook(path: &Path) -> CliResult<CodebookFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading codebook {}", path.display()), e))?;
    parse_codebook(&text).map_err(|e| match e {
        CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes codewords with shortest round-trip float formatting.
pub fn format_codebook(codewords: &[CMatrix]) -> String {
    let (m_t, slots) = codewords.first().map_or((0, 0), |c| c.shape());
    let mut out = format!("{m_t} {slots} {}\n", codewords.len());
    for (k, word) in codewords.iter().enumerate() {
        let _ = writeln!(out, "# codeword {k}");
        for row in word.row_iter() {
            let line: Vec<String> = row.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}
