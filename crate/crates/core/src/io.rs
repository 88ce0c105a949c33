// SPDX-License-Identifier: Apache-2.0

//! Streaming reader for numeric point files.
//!
//! One point per line, coordinates separated by commas and/or whitespace.
//! Blank lines and lines whose first non-blank character is `#` are skipped.
//! Rows are parsed one at a time; the input is never held in memory.

use crate::error::{Error, Result};
use std::io::BufRead;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadOptions {
    /// Discard the first non-comment line.
    pub skip_header: bool,
    /// Zero-based column holding a class label, removed from the point.
    pub label_column: Option<usize>,
    /// Required point dimension. When `None` the first row fixes it.
    pub dim: Option<usize>,
}

/// A parsed row with its 1-based line number.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub line: usize,
    pub point: Vec<f64>,
    pub label: Option<String>,
}

pub struct PointReader<R> {
    inner: R,
    opts: ReadOptions,
    line: usize,
    buf: String,
    dim: Option<usize>,
    header_pending: bool,
    done: bool,
}

impl<R: BufRead> PointReader<R> {
    pub fn new(inner: R, opts: ReadOptions) -> Self {
        PointReader {
            inner,
            dim: opts.dim,
            header_pending: opts.skip_header,
            opts,
            line: 0,
            buf: String::new(),
            done: false,
        }
    }

    /// Dimension fixed so far, if any.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    fn next_record(&mut self) -> Result<Option<Record>> {
        loop {
            self.buf.clear();
            if self.inner.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line += 1;
            let text = self.buf.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            if self.header_pending {
                self.header_pending = false;
                continue;
            }
            let line = self.line;
            let rec = parse_row(text, line, self.opts.label_column)?;
            match self.dim {
                None => self.dim = Some(rec.point.len()),
                Some(d) if d != rec.point.len() => {
                    return Err(Error::Parse {
                        line,
                        reason: format!("expected {d} coordinates, found {}", rec.point.len()),
                    })
                }
                Some(_) => {}
            }
            return Ok(Some(rec));
        }
    }
}

impl<R: BufRead> Iterator for PointReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

fn parse_row(text: &str, line: usize, label_column: Option<usize>) -> Result<Record> {
    let mut point = Vec::new();
    let mut label = None;
    let fields = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|f| !f.is_empty());
    for (i, field) in fields.enumerate() {
        if Some(i) == label_column {
            label = Some(field.to_string());
            continue;
        }
        let v: f64 = field.parse().map_err(|_| Error::Parse {
            line,
            reason: format!("column {}: `{field}` is not a number", i + 1),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line,
                reason: format!("column {}: `{field}` is not finite", i + 1),
            });
        }
        point.push(v);
    }
    if let Some(c) = label_column {
        if label.is_none() {
            return Err(Error::Parse {
                line,
                reason: format!("missing label column {}", c + 1),
            });
        }
    }
    if point.is_empty() {
        return Err(Error::Parse {
            line,
            reason: "row has no coordinates".into(),
        });
    }
    Ok(Record { line, point, label })
}

/// Writes points as comma-separated rows using shortest round-trip formatting.
pub fn write_points<W: std::io::Write>(out: &mut W, points: &[Vec<f64>]) -> std::io::Result<()> {
    for p in points {
        write_point(out, p)?;
    }
    Ok(())
}

pub fn write_point<W: std::io::Write>(out: &mut W, p: &[f64]) -> std::io::Result<()> {
    for (i, v) in p.iter().enumerate() {
        if i > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, opts: ReadOptions) -> Result<Vec<Record>> {
        PointReader::new(text.as_bytes(), opts).collect()
    }

    #[test]
    fn parses_mixed_separators_and_comments() {
        let recs = read("# c\n1,2\n\n 3 4 \n5,\t6\n", ReadOptions::default()).unwrap();
        let pts: Vec<_> = recs.iter().map(|r| r.point.clone()).collect();
        assert_eq!(pts, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(recs[1].line, 4);
    }

    #[test]
    fn ragged_row_reports_line() {
        let err = read("1,2\n3,4\n5\n", ReadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn fixed_dim_checked_on_first_row() {
        let opts = ReadOptions {
            dim: Some(3),
            ..Default::default()
        };
        let err = read("1,2\n", opts).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn header_and_label() {
        let opts = ReadOptions {
            skip_header: true,
            label_column: Some(0),
            dim: None,
        };
        let recs = read("label,x,y\na,1,2\nb,3,4\n", opts).unwrap();
        assert_eq!(recs[0].label.as_deref(), Some("a"));
        assert_eq!(recs[1].point, vec![3.0, 4.0]);
    }

    #[test]
    fn bad_number_and_nan_rejected() {
        assert!(matches!(
            read("1,x\n", ReadOptions::default()),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(read("1,nan\n", ReadOptions::default()).is_err());
        assert!(read("1,inf\n", ReadOptions::default()).is_err());
    }

    #[test]
    fn reader_stops_after_error() {
        let mut r = PointReader::new("1\nx\n2\n".as_bytes(), ReadOptions::default());
        assert!(r.next().unwrap().is_ok());
        assert!(r.next().unwrap().is_err());
        assert!(r.next().is_none());
    }

    #[test]
    fn written_points_parse_back_exactly() {
        let pts = vec![vec![0.1, -1e-300, 3.0], vec![f64::MAX, 2.5e10, -0.0]];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<_> = read(&text, ReadOptions::default())
            .unwrap()
            .into_iter()
            .map(|r| r.point)
            .collect();
        assert_eq!(back.len(), 2);
        for (a, b) in pts.iter().zip(&back) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
