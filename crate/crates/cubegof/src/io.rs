// SPDX-License-Identifier: Apache-2.0

//! Sample files, tabulated-CDF files and result records.
//!
//! Sample files are comma-separated, one point per row, with an optional
//! header line. Lines starting with `#` are ignored.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use cubegof_core::marginal::TabulatedCdf;
use cubegof_core::SampleMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{Error, Result};

/// A sample matrix together with its column names, if the file had any.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFile {
    pub header: Option<Vec<String>>,
    pub data: SampleMatrix,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(r)
}

/// Reads a sample. With no rows and no header the dimension falls back to
/// `dims`, or 1.
pub fn read_sample_from<R: Read>(r: R, dims: Option<usize>) -> Result<SampleFile> {
    let mut header = None;
    let mut n = None;
    let mut data = Vec::new();
    for (line, rec) in reader(r).records().enumerate() {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => {
                header = Some(rec.iter().map(String::from).collect::<Vec<_>>());
                n = Some(rec.len());
                continue;
            }
            Err(_) => return Err(Error::Input(format!("row {}: non-numeric field", line + 1))),
        };
        match n {
            None => n = Some(row.len()),
            Some(k) if k != row.len() => {
                return Err(Error::Input(format!("row {}: expected {k} columns, found {}", line + 1, row.len())))
            }
            _ => {}
        }
        data.extend(row);
    }
    let n = n.or(dims).unwrap_or(1);
    if let Some(d) = dims {
        if d != n {
            return Err(Error::Input(format!("expected {d} columns, found {n}")));
        }
    }
    Ok(SampleFile { header, data: SampleMatrix::new(n, data)? })
}

pub fn read_sample(path: &Path, dims: Option<usize>) -> Result<SampleFile> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_sample_from(BufReader::new(f), dims)
}

/// Writes rows of `n` values; values use the shortest round-trip form.
pub fn write_sample<W: Write>(w: W, header: Option<&[String]>, n: usize, values: &[f64]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if let Some(h) = header {
        out.write_record(h)?;
    }
    if n > 0 {
        for row in values.chunks_exact(n) {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
    }
    out.flush().map_err(|e| Error::io("<output>", e))?;
    Ok(())
}

/// Two-column `(x, F)` file describing a tabulated marginal.
pub fn read_tabulated_cdf(path: &Path) -> Result<TabulatedCdf> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let s = read_sample_from(BufReader::new(f), Some(2))?;
    let (x, cdf): (Vec<f64>, Vec<f64>) = s.data.rows().map(|r| (r[0], r[1])).unzip();
    Ok(TabulatedCdf::new(path.display().to_string(), x, cdf)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// Writes flat records as CSV with a header, or as a JSON array.
pub fn write_records<W: Write, T: Serialize>(mut w: W, records: &[T], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            for r in records {
                out.serialize(r)?;
            }
            out.flush().map_err(|e| Error::io("<output>", e))?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, records)?;
            writeln!(w).map_err(|e| Error::io("<output>", e))?;
        }
    }
    Ok(())
}

pub fn read_records<R: Read, T: DeserializeOwned>(r: R, format: OutputFormat) -> Result<Vec<T>> {
    match format {
        OutputFormat::Csv => {
            let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
            Ok(rd.deserialize().collect::<std::result::Result<_, _>>()?)
        }
        OutputFormat::Json => Ok(serde_json::from_reader(r)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection_and_shapes() {
        let s = read_sample_from("x,y\n0.1,0.2\n0.3,0.4\n".as_bytes(), None).unwrap();
        assert_eq!(s.header.as_deref(), Some(&["x".to_string(), "y".to_string()][..]));
        assert_eq!((s.data.n(), s.data.m()), (2, 2));
        let s = read_sample_from("# comment\n0.5\n".as_bytes(), None).unwrap();
        assert_eq!((s.data.n(), s.data.m(), s.header), (1, 1, None));
        let s = read_sample_from("".as_bytes(), Some(3)).unwrap();
        assert_eq!((s.data.n(), s.data.m()), (3, 0));
        let s = read_sample_from("a,b\n".as_bytes(), None).unwrap();
        assert_eq!((s.data.n(), s.data.m()), (2, 0));
        assert!(read_sample_from("0.1,0.2\n0.3\n".as_bytes(), None).is_err());
        assert!(read_sample_from("0.1\nfoo\n".as_bytes(), None).is_err());
    }

    #[test]
    fn sample_round_trip() {
        let vals = vec![0.1, 1.0 / 3.0, 2e-300, 0.999_999_999_999];
        let mut buf = Vec::new();
        write_sample(&mut buf, Some(&["a".into(), "b".into()]), 2, &vals).unwrap();
        let s = read_sample_from(buf.as_slice(), None).unwrap();
        assert_eq!(s.data.as_slice(), vals.as_slice());
    }

    #[derive(Debug, PartialEq, serde::Serialize, serde::Deserialize)]
    struct Rec {
        a: f64,
        b: String,
    }

    #[test]
    fn records_round_trip() {
        let recs = vec![Rec { a: 0.25, b: "x".into() }, Rec { a: 1e-17, b: "y".into() }];
        for f in [OutputFormat::Csv, OutputFormat::Json] {
            let mut buf = Vec::new();
            write_records(&mut buf, &recs, f).unwrap();
            let back: Vec<Rec> = read_records(buf.as_slice(), f).unwrap();
            assert_eq!(back, recs);
        }
    }
}
