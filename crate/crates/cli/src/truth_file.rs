//! Plain-text spectral ground truth: a `n rank` line, a line of `rank`
//! eigenvalues, then `n` rows of `rank` eigenvector coordinates.

use std::fmt::Write as _;
use std::io::BufRead;

use alecton::linalg::TallMatrix;
use alecton::sampling::SpectralTruth;
use alecton::Error;

pub fn format_truth(truth: &SpectralTruth) -> String {
    let u = truth.eigenvectors();
    let mut s = format!("{} {}\n", u.nrows(), u.ncols());
    let join = |xs: &[f64]| xs.iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(s, "{}", join(truth.eigenvalues()));
    for i in 0..u.nrows() {
        let _ = writeln!(s, "{}", join(u.row(i)));
    }
    s
}

pub fn parse_truth<R: BufRead>(reader: R) -> Result<SpectralTruth, Error> {
    let mut lines = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if !t.is_empty() && !t.starts_with('#') {
            lines.push((k + 1, t.to_string()));
        }
    }
    let mut it = lines.into_iter();
    let (head_no, head) = it.next().ok_or(Error::Parse { line: 0, message: "empty ground-truth file".into() })?;
    let dims = parse_row::<usize>(head_no, &head, 2)?;
    let (n, rank) = (dims[0], dims[1]);
    if rank == 0 || rank > n {
        return Err(Error::Parse { line: head_no, message: format!("need 1 <= rank <= n, got n={n}, rank={rank}") });
    }
    let missing = |what: &str| Error::Parse { line: 0, message: format!("file ends before {what}") };
    let (ev_no, ev) = it.next().ok_or_else(|| missing("the eigenvalue line"))?;
    let eigenvalues = parse_row::<f64>(ev_no, &ev, rank)?;
    let mut data = Vec::with_capacity(n * rank);
    for i in 0..n {
        let (no, row) = it.next().ok_or_else(|| missing(&format!("eigenvector row {i}")))?;
        data.extend(parse_row::<f64>(no, &row, rank)?);
    }
    if let Some((no, _)) = it.next() {
        return Err(Error::Parse { line: no, message: format!("unexpected content after {n} rows") });
    }
    SpectralTruth::new(eigenvalues, TallMatrix::new(n, rank, data)?)
}

fn parse_row<T: std::str::FromStr>(line: usize, text: &str, expected: usize) -> Result<Vec<T>, Error> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != expected {
        return Err(Error::Parse { line, message: format!("expected {expected} fields, found {}", fields.len()) });
    }
    fields
        .iter()
        .map(|f| f.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse `{f}`") }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let t = SpectralTruth::diagonal(&[2.0, 1.0 / 3.0, 0.1]).unwrap();
        let back = parse_truth(format_truth(&t).as_bytes()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn malformed_rows_report_line() {
        let err = parse_truth("2 2\n2 1\n1 0\n0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
        assert!(parse_truth("2 3\n1 1 1\n".as_bytes()).is_err());
    }
}
