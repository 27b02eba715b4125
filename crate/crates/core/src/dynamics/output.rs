use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Signal versus one axis (RF frequency for ENDOR spectra).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub metadata: Vec<(String, String)>,
    pub axis: Vec<f64>,
    pub signal: Vec<f64>,
}

/// Signal on a duration × amplitude grid; `signal[row][col]` is at
/// `durations[row]`, `amplitudes[col]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RabiMap {
    pub metadata: Vec<(String, String)>,
    pub durations: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub signal: Vec<Vec<f64>>,
}

impl RabiMap {
    /// Signal along the duration axis at amplitude index `col`.
    pub fn column(&self, col: usize) -> Vec<f64> {
        self.signal.iter().map(|r| r[col]).collect()
    }
}

fn write_metadata<W: Write>(w: &mut W, metadata: &[(String, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// Splits `#` metadata lines from the CSV body.
fn split_metadata<R: BufRead>(r: R) -> Result<(Vec<(String, String)>, String)> {
    let mut metadata = Vec::new();
    let mut body = String::new();
    for line in r.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim();
            match rest.split_once(':') {
                Some((k, v)) => metadata.push((k.trim().to_string(), v.trim().to_string())),
                None => metadata.push((rest.to_string(), String::new())),
            }
        } else if !line.trim().is_empty() {
            body.push_str(&line);
            body.push('\n');
        }
    }
    Ok((metadata, body))
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))
}

impl SpectrumResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_metadata(&mut w, &self.metadata)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["axis", "signal"])?;
        for (a, s) in self.axis.iter().zip(&self.signal) {
            out.write_record([a.to_string(), s.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (metadata, body) = split_metadata(r)?;
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let (mut axis, mut signal) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 2 {
                return Err(Error::Parse(format!("expected 2 columns, found {}", rec.len())));
            }
            axis.push(parse_f64(&rec[0])?);
            signal.push(parse_f64(&rec[1])?);
        }
        Ok(SpectrumResult { metadata, axis, signal })
    }
}

impl RabiMap {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_metadata(&mut w, &self.metadata)?;
        let mut out = csv::Writer::from_writer(w);
        let mut head = vec!["duration_s\\amplitude".to_string()];
        head.extend(self.amplitudes.iter().map(|a| a.to_string()));
        out.write_record(&head)?;
        for (d, row) in self.durations.iter().zip(&self.signal) {
            let mut rec = vec![d.to_string()];
            rec.extend(row.iter().map(|s| s.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let (metadata, body) = split_metadata(r)?;
        let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(body.as_bytes());
        let mut records = rd.records();
        let head = records.next().ok_or_else(|| Error::Parse("empty map".into()))??;
        let amplitudes = head.iter().skip(1).map(parse_f64).collect::<Result<Vec<_>>>()?;
        let (mut durations, mut signal) = (Vec::new(), Vec::new());
        for rec in records {
            let rec = rec?;
            if rec.len() != amplitudes.len() + 1 {
                return Err(Error::Parse("ragged map row".into()));
            }
            durations.push(parse_f64(&rec[0])?);
            signal.push(rec.iter().skip(1).map(parse_f64).collect::<Result<Vec<_>>>()?);
        }
        Ok(RabiMap { metadata, durations, amplitudes, signal })
    }
}
