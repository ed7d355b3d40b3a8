//! CSV and JSON writers with content digests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::observables::Observation;
use crate::stability::StabilityReport;
use crate::steady::SteadyState;

pub const TIMESERIES_HEADER: [&str; 8] = ["t", "eta", "n_ph", "delta_eff", "p0", "p1", "p2", "norm"];
pub const BRANCH_HEADER: [&str; 7] = ["eta", "n_st", "E0", "z0_0", "z0_1", "z0_2", "residual"];
pub const N_OUT_HEADER: [&str; 2] = ["n_tr", "n_out"];

/// One written file: path relative to the output directory, SHA-256 and size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Renders `x` like C's `%.17g`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let digits = (16 - exp) as usize;
        trim_fraction(&format!("{x:.digits$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Buffered writer that hashes and counts everything it passes through.
struct DigestWriter {
    inner: BufWriter<File>,
    hasher: Sha256,
    bytes: u64,
}

impl Write for DigestWriter {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.hasher.update(&buf[..n]);
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

impl DigestWriter {
    fn create(path: &Path) -> Result<Self> {
        Ok(DigestWriter {
            inner: BufWriter::new(File::create(path)?),
            hasher: Sha256::new(),
            bytes: 0,
        })
    }

    fn finish(mut self, name: &str) -> Result<FileEntry> {
        self.flush()?;
        self.inner.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        Ok(FileEntry {
            path: name.to_string(),
            sha256: hex::encode(self.hasher.finalize()),
            bytes: self.bytes,
        })
    }
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Streams numeric rows to a CSV file. No file is created when `rows` is empty.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<FileEntry>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    let mut rows = rows.into_iter().peekable();
    if rows.peek().is_none() {
        return Err(Error::param("rows", "nothing to write"));
    }
    let mut w = DigestWriter::create(path)?;
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for row in rows {
        let row = row.as_ref();
        if row.len() != header.len() {
            return Err(Error::param(
                "rows",
                format!("row has {} columns, header {}", row.len(), header.len()),
            ));
        }
        line.clear();
        for (i, &v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format_float(v));
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.finish(&file_name(path))
}

fn observation_row(o: &Observation) -> [f64; 8] {
    let [p0, p1, p2] = o.populations;
    [o.t, o.eta, o.n_ph, o.delta_eff, p0, p1, p2, o.norm]
}

pub fn write_timeseries(rows: &[Observation], path: &Path) -> Result<FileEntry> {
    write_csv(path, &TIMESERIES_HEADER, rows.iter().map(observation_row))
}

/// Time series with an extra `n_branch` column holding the followed steady branch.
pub fn write_timeseries_with_branch(rows: &[Observation], branch: &[f64], path: &Path) -> Result<FileEntry> {
    if rows.len() != branch.len() {
        return Err(Error::param("branch", "one branch value per row is required"));
    }
    let mut header = TIMESERIES_HEADER.to_vec();
    header.push("n_branch");
    let lines = rows.iter().zip(branch).map(|(o, &b)| {
        let mut r = observation_row(o).to_vec();
        r.push(b);
        r
    });
    write_csv(path, &header, lines)
}

fn branch_row(s: &SteadyState) -> Vec<f64> {
    vec![s.eta, s.n_st, s.e0, s.z0[0], s.z0[1], s.z0[2], s.residual]
}

pub fn write_branch(states: &[SteadyState], path: &Path) -> Result<FileEntry> {
    write_csv(path, &BRANCH_HEADER, states.iter().map(branch_row))
}

/// Branch CSV with `i_m` and `stable` (1 or 0) appended.
pub fn write_branch_stability(states: &[SteadyState], reports: &[StabilityReport], path: &Path) -> Result<FileEntry> {
    if states.len() != reports.len() {
        return Err(Error::param("reports", "one report per state is required"));
    }
    let mut header = BRANCH_HEADER.to_vec();
    header.extend(["i_m", "stable"]);
    let lines = states.iter().zip(reports).map(|(s, r)| {
        let mut row = branch_row(s);
        row.push(r.i_m);
        row.push(if r.stable { 1.0 } else { 0.0 });
        row
    });
    write_csv(path, &header, lines)
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<FileEntry> {
    let mut w = DigestWriter::create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.finish(&file_name(path))
}

pub fn write_bytes(bytes: &[u8], path: &Path) -> Result<FileEntry> {
    let mut w = DigestWriter::create(path)?;
    w.write_all(bytes)?;
    w.finish(&file_name(path))
}

/// A parsed numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::Format {
        what: "csv",
        reason: reason.into(),
    }
}

/// Parses a numeric CSV with a header line and `\n` line endings.
pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .filter(|h| !h.is_empty())
        .ok_or_else(|| malformed("missing header"))?
        .split(',')
        .map(str::to_string)
        .collect();
    if header.iter().any(|h| h.is_empty()) {
        return Err(malformed("empty column name"));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| malformed(format!("line {}: bad number `{f}`", i + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(malformed(format!(
                "line {}: {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Parses a time-series CSV and checks its leading columns.
pub fn parse_timeseries(text: &str) -> Result<Table> {
    let t = parse_csv(text)?;
    if t.header.len() < TIMESERIES_HEADER.len() || t.header[..TIMESERIES_HEADER.len()] != TIMESERIES_HEADER {
        return Err(malformed(format!("unexpected time-series header {:?}", t.header)));
    }
    Ok(t)
}

pub fn read_timeseries(path: &Path) -> Result<Table> {
    parse_timeseries(&std::fs::read_to_string(path)?)
}
