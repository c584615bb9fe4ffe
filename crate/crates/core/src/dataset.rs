//! Dataset and metadata files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::simulator::{Basis, Metadata, SiftedRecord};

pub const DATASET_HEADER: [&str; 6] = ["index", "quadrature", "s_a", "m_b", "bit_a", "bit_b"];

/// Formats with 12 significant digits.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn write_dataset(path: &Path, records: &[SiftedRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(DATASET_HEADER)?;
    for r in records {
        w.write_record([
            r.index.to_string(),
            r.quadrature.to_string(),
            sig12(r.s_a),
            sig12(r.m_b),
            r.bit_a.to_string(),
            r.bit_b.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset, skipping `#` comment lines. Bit columns must agree with
/// the signs of the values.
pub fn read_dataset(path: &Path) -> Result<Vec<SiftedRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(File::open(path)?));
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != DATASET_HEADER {
        return Err(Error::invalid(format!(
            "unexpected dataset header {header:?}, want {DATASET_HEADER:?}"
        )));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row?;
        let bad = |what: &str| Error::invalid(format!("dataset row {}: bad {what}", line + 1));
        let index: u64 = row[0].parse().map_err(|_| bad("index"))?;
        let quadrature = match &row[1] {
            "X" | "x" => Basis::X,
            "P" | "p" => Basis::P,
            _ => return Err(bad("quadrature")),
        };
        let s_a: f64 = row[2].parse().map_err(|_| bad("s_a"))?;
        let m_b: f64 = row[3].parse().map_err(|_| bad("m_b"))?;
        let bit_a: u8 = row[4].parse().map_err(|_| bad("bit_a"))?;
        let bit_b: u8 = row[5].parse().map_err(|_| bad("bit_b"))?;
        let rec = SiftedRecord::new(index, quadrature, s_a, m_b)
            .filter(|_| s_a.is_finite() && m_b.is_finite())
            .ok_or_else(|| bad("value (zero or non-finite)"))?;
        if rec.bit_a != bit_a || rec.bit_b != bit_b {
            return Err(bad("bits (disagree with value signs)"));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_metadata(path: &Path, meta: &Metadata) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, meta)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_metadata(path: &Path) -> Result<Metadata> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
