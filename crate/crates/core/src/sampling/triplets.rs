//! `row,col,value` text with 0-based indices. `#` lines and blank lines are
//! skipped; a repeated `(row, col)` keeps its last value.

use std::io::BufRead;

use super::TripletMatrix;
use crate::error::{Error, Result};

/// Parses triplets. With `shape = None` the dimensions are the largest
/// indices plus one.
pub fn parse_triplets<R: BufRead>(reader: R, shape: Option<(usize, usize)>) -> Result<TripletMatrix> {
    let mut entries = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected `row,col,value`, found {} fields", fields.len())));
        }
        let row: usize = fields[0].parse().map_err(|_| parse_err(format!("bad row index `{}`", fields[0])))?;
        let col: usize = fields[1].parse().map_err(|_| parse_err(format!("bad column index `{}`", fields[1])))?;
        let value: f64 = fields[2].parse().map_err(|_| parse_err(format!("bad value `{}`", fields[2])))?;
        if !value.is_finite() {
            return Err(parse_err(format!("value `{}` is not finite", fields[2])));
        }
        if let Some((m, n)) = shape {
            if row >= m || col >= n {
                return Err(parse_err(format!("index ({row}, {col}) outside {m} x {n}")));
            }
        }
        entries.push((row, col, value));
    }
    if entries.is_empty() {
        return Err(Error::Parse { line: 0, message: "no entries found".into() });
    }
    let (m, n) = shape.unwrap_or_else(|| {
        let m = entries.iter().map(|e| e.0).max().unwrap_or(0) + 1;
        let n = entries.iter().map(|e| e.1).max().unwrap_or(0) + 1;
        (m, n)
    });
    TripletMatrix::from_entries(m, n, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_stats() {
        let m = parse_triplets("0,0,3\n".as_bytes(), Some((1, 1))).unwrap();
        assert_eq!(m.count(), 1);
        assert!((m.frobenius_sq().sqrt() - 3.0).abs() < 1e-15);
        assert!((m.entry_bound() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn comments_duplicates_and_inferred_shape() {
        let text = "#comment\n0,1,2.5\n\n1,0,-1\n0,1,4\n";
        let m = parse_triplets(text.as_bytes(), None).unwrap();
        assert_eq!((m.rows(), m.cols(), m.count()), (2, 2, 2));
        assert_eq!(m.get(0, 1), 4.0);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(parse_triplets("".as_bytes(), None).is_err());
        assert!(parse_triplets("# only\n".as_bytes(), None).is_err());
        match parse_triplets("0,0,1\n0,x,2\n".as_bytes(), None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        match parse_triplets("0,0,1\n5,0,2\n".as_bytes(), Some((2, 2))) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
