//! Matrix, discrete-matrix and response file formats.
//!
//! Real matrices: CSV with an optional header row, or binary `KFMX1` followed by the row
//! and column counts (u64 little-endian) and the entries (f64 little-endian, row-major).
//! Discrete matrices: CSV of positive integer labels with an optional `K: k1 k2 ... kp`
//! first line declaring the cardinalities.

use crate::discrete_knockoffs::DiscreteMatrix;
use crate::error::{KnockoffError, Result};
use crate::Matrix;
use std::path::Path;

pub const BINARY_MAGIC: &[u8; 5] = b"KFMX1";

fn parse_err(msg: String) -> KnockoffError {
    KnockoffError::Parse(msg)
}

fn csv_records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    rdr.records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_owned).collect()).map_err(|e| parse_err(e.to_string())))
        .filter(|r| r.as_ref().map_or(true, |v: &Vec<String>| !(v.len() == 1 && v[0].is_empty())))
        .collect()
}

pub fn parse_matrix_csv(text: &str) -> Result<Matrix> {
    let mut recs = csv_records(text)?;
    if recs.first().is_some_and(|r| r.iter().any(|c| c.parse::<f64>().is_err())) {
        recs.remove(0);
    }
    let p = recs.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(recs.len() * p);
    for (i, r) in recs.iter().enumerate() {
        if r.len() != p {
            return Err(parse_err(format!("row {} has {} fields, expected {p}", i + 1, r.len())));
        }
        for c in r {
            data.push(c.parse::<f64>().map_err(|_| parse_err(format!("row {}: '{c}' is not a number", i + 1)))?);
        }
    }
    Matrix::from_vec(recs.len(), p, data)
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_to_binary(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(21 + 8 * m.as_slice().len());
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_matrix_binary(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < 21 || &bytes[..5] != BINARY_MAGIC {
        return Err(parse_err("missing KFMX1 header".into()));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[5 + 8 * k..13 + 8 * k].try_into().expect("8 bytes")) as usize;
    let (n, p) = (word(0), word(1));
    let body = &bytes[21..];
    if n.checked_mul(p).and_then(|c| c.checked_mul(8)) != Some(body.len()) {
        return Err(parse_err(format!("binary body has {} bytes, expected {n}×{p} doubles", body.len())));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    Matrix::from_vec(n, p, data)
}

/// Reads a real matrix, choosing the format from the leading bytes.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        parse_matrix_binary(&bytes)
    } else {
        parse_matrix_csv(&String::from_utf8(bytes).map_err(|e| parse_err(e.to_string()))?)
    }
}

/// Writes binary when the path ends in `.kfmx`, CSV otherwise.
pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    if path.extension().is_some_and(|e| e == "kfmx") {
        std::fs::write(path, matrix_to_binary(m))?;
    } else {
        std::fs::write(path, matrix_to_csv(m))?;
    }
    Ok(())
}

/// Parses a discrete matrix. Without a `K:` line, cardinalities are the column maxima
/// (at least 2) when `infer_k` is set, and an error otherwise.
pub fn parse_discrete(text: &str, infer_k: bool) -> Result<DiscreteMatrix> {
    let mut lines = text.lines().peekable();
    while lines.peek().is_some_and(|l| l.trim().is_empty()) {
        lines.next();
    }
    let declared = match lines.peek() {
        Some(l) if l.trim_start().starts_with("K:") => {
            let ks = l.trim_start()[2..]
                .split_whitespace()
                .map(|t| t.parse::<u32>().map_err(|_| parse_err(format!("bad cardinality '{t}'"))))
                .collect::<Result<Vec<_>>>()?;
            lines.next();
            Some(ks)
        }
        _ => None,
    };
    let body: String = lines.collect::<Vec<_>>().join("\n");
    let recs = csv_records(&body)?;
    let p = recs.first().map_or(declared.as_ref().map_or(0, |k| k.len()), |r| r.len());
    let mut rows = Vec::with_capacity(recs.len());
    for (i, r) in recs.iter().enumerate() {
        if r.len() != p {
            return Err(parse_err(format!("row {} has {} fields, expected {p}", i + 1, r.len())));
        }
        rows.push(
            r.iter()
                .map(|c| c.parse::<u32>().map_err(|_| parse_err(format!("row {}: '{c}' is not a positive label", i + 1))))
                .collect::<Result<Vec<u32>>>()?,
        );
    }
    let card = match declared {
        Some(k) => {
            if k.len() != p {
                return Err(parse_err(format!("K line lists {} cardinalities for {p} columns", k.len())));
            }
            k
        }
        None if infer_k => (0..p).map(|j| rows.iter().map(|r| r[j]).max().unwrap_or(0).max(2)).collect(),
        None => return Err(parse_err("no 'K:' line; pass the infer flag to use column maxima".into())),
    };
    DiscreteMatrix::from_rows(&rows, card)
}

pub fn discrete_to_csv(x: &DiscreteMatrix) -> String {
    let ks: Vec<String> = x.cards().iter().map(|k| k.to_string()).collect();
    let mut out = format!("K: {}\n", ks.join(" "));
    for i in 0..x.n() {
        let row: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One value per line, or a single CSV column with an optional header.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let m = parse_matrix_csv(text)?;
    if m.cols() != 1 {
        return Err(parse_err(format!("expected one column, found {}", m.cols())));
    }
    Ok(m.into_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trips() {
        let m = Matrix::from_rows(&[vec![1.5, -2.0], vec![1e-300, 3.25]]).unwrap();
        assert_eq!(parse_matrix_csv(&matrix_to_csv(&m)).unwrap(), m);
        assert_eq!(parse_matrix_binary(&matrix_to_binary(&m)).unwrap(), m);
        let with_header = format!("a,b\n{}", matrix_to_csv(&m));
        assert_eq!(parse_matrix_csv(&with_header).unwrap(), m);
        assert!(parse_matrix_csv("1,2\n3\n").is_err());
        assert!(parse_matrix_binary(&matrix_to_binary(&m)[..30]).is_err());
    }

    #[test]
    fn discrete_formats() {
        let x = parse_discrete("K: 2 3\n1,3\n2,1\n", false).unwrap();
        assert_eq!(x.cards(), &[2, 3]);
        assert_eq!(parse_discrete(&discrete_to_csv(&x), false).unwrap(), x);
        assert!(parse_discrete("1,3\n2,1\n", false).is_err());
        let inferred = parse_discrete("1,3\n1,1\n", true).unwrap();
        assert_eq!(inferred.cards(), &[2, 3]);
        assert!(parse_discrete("K: 2 2\n1,3\n", false).is_err());
    }

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("y\n1\n2.5\n").unwrap(), vec![1.0, 2.5]);
        assert!(parse_vector("1,2\n").is_err());
    }
}
