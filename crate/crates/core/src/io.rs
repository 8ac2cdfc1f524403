//! Dataset CSV: header `t,y,x1,...,xn[,mode,v]`, one row per sample, time
//! and mode indices 1-based. Floats are written in shortest round-trip form
//! so a write/read cycle is lossless.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{LsmError, Result};
use crate::model::Dataset;

/// Contents of a dataset CSV. The true parameter matrix is not part of the
/// CSV, so the per-sample truth columns are returned separately.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// 0-based mode labels and noise values, when the file carries them.
    pub labels: Option<(Vec<usize>, Vec<f64>)>,
}

pub fn dataset_to_csv(data: &Dataset) -> String {
    let n = data.n();
    let mut out = String::from("t,y");
    for j in 1..=n {
        let _ = write!(out, ",x{j}");
    }
    if data.truth().is_some() {
        out.push_str(",mode,v");
    }
    out.push('\n');
    for t in 0..data.len() {
        let _ = write!(out, "{},{:?}", t + 1, data.y()[t]);
        for j in 0..n {
            let _ = write!(out, ",{:?}", data.x()[(j, t)]);
        }
        if let Some(tr) = data.truth() {
            let _ = write!(out, ",{},{:?}", tr.sigma[t] + 1, tr.v[t]);
        }
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, message: impl Into<String>) -> LsmError {
    LsmError::Parse {
        line,
        message: message.into(),
    }
}

pub fn parse_dataset_csv(text: &str) -> Result<CsvDataset> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let with_truth = cols.len() >= 2 && cols[cols.len() - 2..] == ["mode", "v"];
    let n = cols.len().saturating_sub(2 + if with_truth { 2 } else { 0 });
    let expected: Vec<String> = ["t".to_string(), "y".to_string()]
        .into_iter()
        .chain((1..=n).map(|j| format!("x{j}")))
        .chain(with_truth.then(|| ["mode".to_string(), "v".to_string()]).into_iter().flatten())
        .collect();
    if n == 0 || cols != expected {
        return Err(parse_err(1, format!("expected header {}", expected.join(","))));
    }

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut modes = Vec::new();
    let mut v = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(parse_err(lineno, format!("expected {} fields, found {}", cols.len(), fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            let value: f64 = fields[k]
                .parse()
                .map_err(|_| parse_err(lineno, format!("column {} is not a number: {:?}", cols[k], fields[k])))?;
            if value.is_finite() {
                Ok(value)
            } else {
                Err(parse_err(lineno, format!("column {} is not finite", cols[k])))
            }
        };
        fields[0]
            .parse::<u64>()
            .map_err(|_| parse_err(lineno, format!("t is not a positive integer: {:?}", fields[0])))?;
        y.push(num(1)?);
        for j in 0..n {
            x.push(num(2 + j)?);
        }
        if with_truth {
            let mode: usize = fields[2 + n]
                .parse()
                .ok()
                .filter(|&m| m >= 1)
                .ok_or_else(|| parse_err(lineno, format!("mode is not a positive integer: {:?}", fields[2 + n])))?;
            modes.push(mode - 1);
            v.push(num(3 + n)?);
        }
    }
    if y.is_empty() {
        return Err(parse_err(1, "no data rows"));
    }
    let len = y.len();
    Ok(CsvDataset {
        x: DMatrix::from_column_slice(n, len, &x),
        y: DVector::from_vec(y),
        labels: with_truth.then_some((modes, v)),
    })
}
