//! Plain-text matrix files.
//!
//! ```text
//! k r model_kind [param]
//! i j value
//! ...
//! ```
//!
//! Indices are 0-based, fields whitespace-separated, and only nonzero
//! entries are listed. Model and observation files share the layout.
//! Values are written in shortest round-trip form, so a write/read cycle is
//! bit-exact.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::types::{Entries, ModelKind, ModelMatrix, Observation};

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub k: usize,
    pub r: usize,
    pub kind: ModelKind,
    pub entries: Entries,
}

impl MatrixFile {
    pub fn from_model(m: &ModelMatrix) -> Self {
        Self {
            k: m.k(),
            r: m.r(),
            kind: m.kind(),
            entries: m.entries().clone(),
        }
    }

    pub fn from_observation(x: &Observation, r: usize) -> Self {
        Self {
            k: x.k(),
            r,
            kind: x.kind(),
            entries: x.entries().clone(),
        }
    }

    pub fn into_model(self) -> Result<ModelMatrix> {
        ModelMatrix::new(self.r, self.kind, self.entries)
    }

    pub fn into_observation(self) -> Result<Observation> {
        Observation::new(self.kind, self.entries)
    }
}

pub fn write_matrix<W: Write>(mut w: W, file: &MatrixFile) -> Result<()> {
    writeln!(w, "{} {} {}", file.k, file.r, file.kind)?;
    let mut res = Ok(());
    file.entries.for_each_nonzero(|i, j, v| {
        if res.is_ok() {
            res = writeln!(w, "{i} {j} {v:?}");
        }
    });
    res?;
    w.flush()?;
    Ok(())
}

fn parse_kind(tokens: &[&str], line: usize) -> Result<ModelKind> {
    let err = |msg: String| Error::Parse { line, msg };
    let param = || {
        tokens
            .get(1)
            .copied()
            .ok_or_else(|| err(format!("model kind '{}' needs a parameter", tokens[0])))
    };
    let kind = match tokens[0] {
        "poisson" => ModelKind::Poisson,
        "bernoulli" => ModelKind::Bernoulli,
        "binomial" => ModelKind::Binomial {
            trials: param()?
                .parse()
                .map_err(|e| err(format!("bad binomial trials: {e}")))?,
        },
        "distribution" => ModelKind::Distribution {
            samples: param()?
                .parse()
                .map_err(|e| err(format!("bad distribution sample size: {e}")))?,
        },
        "collab" => ModelKind::Collab {
            p: param()?
                .parse()
                .map_err(|e| err(format!("bad collab probability: {e}")))?,
        },
        other => return Err(err(format!("unknown model kind '{other}'"))),
    };
    let expected = if matches!(kind, ModelKind::Poisson | ModelKind::Bernoulli) { 1 } else { 2 };
    if tokens.len() != expected {
        return Err(err(format!("unexpected tokens after model kind '{}'", tokens[0])));
    }
    kind.validate().map_err(|e| err(e.to_string()))?;
    Ok(kind)
}

pub fn read_matrix<R: BufRead>(reader: R) -> Result<MatrixFile> {
    let mut lines = reader.lines().enumerate();
    let (k, r, kind) = loop {
        let Some((idx, line)) = lines.next() else {
            return Err(Error::Parse {
                line: 1,
                msg: "missing header".into(),
            });
        };
        let line = line?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        if tokens.len() < 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: "header must be 'k r model_kind [param]'".into(),
            });
        }
        let parse_dim = |s: &str, what: &str| -> Result<usize> {
            s.parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: format!("{what} must be a positive integer, got '{s}'"),
                })
        };
        let k = parse_dim(tokens[0], "k")?;
        let r = parse_dim(tokens[1], "r")?;
        break (k, r, parse_kind(&tokens[2..], lineno)?);
    };

    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno, msg };
        if tokens.len() != 3 {
            return Err(err(format!("expected 'i j value', got {} fields", tokens.len())));
        }
        let i: usize = tokens[0].parse().map_err(|e| err(format!("bad row index: {e}")))?;
        let j: usize = tokens[1].parse().map_err(|e| err(format!("bad column index: {e}")))?;
        let v: f64 = tokens[2].parse().map_err(|e| err(format!("bad value: {e}")))?;
        if i >= k || j >= k {
            return Err(err(format!("index ({i}, {j}) outside {k} x {k}")));
        }
        if !v.is_finite() {
            return Err(err(format!("non-finite value {v}")));
        }
        triplets.push((i, j, v));
    }
    Ok(MatrixFile {
        k,
        r,
        kind,
        entries: Entries::from_triplets(k, triplets)?,
    })
}
