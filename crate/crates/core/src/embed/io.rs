//! Text layout shared by embedding files and parameter checkpoints:
//!
//! ```text
//! <rows> <dim> <tag>
//! <name> v1 v2 ... vdim
//! ```
//!
//! Values use Rust's shortest round-trip float formatting, so reading a file
//! back reproduces every value bit for bit. Names may contain spaces; the
//! last `dim` tokens of a line are always the values.

use std::fmt::Write as _;

use super::{EmbeddingMatrix, EntityKind};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub(crate) struct Block {
    pub tag: String,
    pub names: Vec<String>,
    pub values: Matrix,
}

pub(crate) fn write_block(out: &mut String, tag: &str, names: &[String], values: &Matrix) -> Result<()> {
    if names.len() != values.rows() {
        return Err(Error::shape(format!("{} names", values.rows()), names.len()));
    }
    let _ = writeln!(out, "{} {} {tag}", values.rows(), values.cols());
    for (name, row) in names.iter().zip(values.iter_rows()) {
        if name.is_empty() || name.trim() != name || name.contains('\n') {
            return Err(Error::invalid(format!("entity name `{name}` cannot be written")));
        }
        out.push_str(name);
        for v in row {
            let _ = write!(out, " {v:e}");
        }
        out.push('\n');
    }
    Ok(())
}

pub(crate) fn parse_blocks(text: &str, source: &str) -> Result<Vec<Block>> {
    let err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let mut blocks = Vec::new();
    while let Some((line_no, header)) = lines.next() {
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (rows, dim, tag) = match parts.as_slice() {
            [r, d, tag] => match (r.parse::<usize>(), d.parse::<usize>()) {
                (Ok(r), Ok(d)) => (r, d, tag.to_string()),
                _ => return Err(err(line_no, format!("bad header `{header}`"))),
            },
            _ => return Err(err(line_no, format!("bad header `{header}`"))),
        };
        let mut names = Vec::with_capacity(rows);
        let mut data = Vec::with_capacity(rows * dim);
        for _ in 0..rows {
            let (line_no, line) = lines
                .next()
                .ok_or_else(|| err(line_no, format!("expected {rows} rows after header")))?;
            let mut tokens: Vec<&str> = line.rsplitn(dim + 1, ' ').collect();
            if tokens.len() != dim + 1 {
                return Err(err(line_no, format!("expected a name and {dim} values")));
            }
            let name = tokens.pop().expect("length checked").trim();
            if name.is_empty() {
                return Err(err(line_no, "missing entity name".into()));
            }
            for tok in tokens.iter().rev() {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| err(line_no, format!("bad value `{tok}`")))?;
                data.push(v);
            }
            names.push(name.to_string());
        }
        blocks.push(Block {
            tag,
            names,
            values: Matrix::from_vec(rows, dim, data)?,
        });
    }
    Ok(blocks)
}

pub fn write_embeddings(e: &EmbeddingMatrix, names: &[String]) -> Result<String> {
    let mut out = String::new();
    write_block(&mut out, &e.kind().to_string(), names, e.values())?;
    Ok(out)
}

pub fn parse_embeddings(text: &str, source: &str) -> Result<(EmbeddingMatrix, Vec<String>)> {
    let mut blocks = parse_blocks(text, source)?;
    if blocks.len() != 1 {
        return Err(Error::Parse {
            path: source.to_string(),
            line: 1,
            message: format!("expected one embedding table, found {}", blocks.len()),
        });
    }
    let block = blocks.pop().expect("one block");
    let kind: EntityKind = block.tag.parse().map_err(|e: Error| Error::Parse {
        path: source.to_string(),
        line: 1,
        message: e.to_string(),
    })?;
    Ok((EmbeddingMatrix::new(kind, block.values)?, block.names))
}
