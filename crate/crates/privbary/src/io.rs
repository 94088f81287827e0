//! File formats: measure CSV, region JSON, count trees and reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, which is
//! locale independent and parses back to the identical `f64`. Emitted CSV
//! files may start with `#` comment lines carrying provenance; the reader
//! skips them.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use privbary_core::coreset::HierarchicalCounts;
use privbary_core::pipelines::PipelineReport;
use privbary_core::region::RegionPolygon;
use privbary_core::DiscreteMeasure;
use serde::{Deserialize, Serialize};

/// Weight sums further than this from 1 are renormalized with a warning.
pub const WEIGHT_SUM_WARNING: f64 = 1e-6;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A measure read from CSV plus anything the reader had to fix.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub measure: DiscreteMeasure,
    pub warnings: Vec<String>,
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<Vec<f64>> {
    record
        .iter()
        .map(|s| {
            let v: f64 = s.trim().parse().with_context(|| format!("line {line}: cannot parse {s:?} as a number"))?;
            if !v.is_finite() {
                bail!("line {line}: non-finite value {s:?}");
            }
            Ok(v)
        })
        .collect()
}

/// Parses a measure CSV.
///
/// The header `x1,…,xd[,weight]` is optional; without it every column is a
/// coordinate and weights are uniform.
pub fn parse_measure_csv<R: Read>(reader: R) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let mut records = rdr.records();
    let first = match records.next() {
        Some(r) => r.context("reading first row")?,
        None => bail!("measure file is empty"),
    };
    let width = first.len();
    let header = first.iter().any(|s| s.parse::<f64>().is_err());
    let weighted = header && first.iter().last().is_some_and(|s| s.eq_ignore_ascii_case("weight"));
    if header {
        for (i, name) in first.iter().enumerate() {
            let expected = format!("x{}", i + 1);
            if !(name == expected || (weighted && i + 1 == width)) {
                bail!("unexpected header column {name:?}; expected x1,...,xd[,weight]");
            }
        }
    }
    let dim = if weighted { width - 1 } else { width };
    if dim == 0 {
        bail!("measure file has no coordinate columns");
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut rows: Vec<csv::StringRecord> = Vec::new();
    if !header {
        rows.push(first);
    }
    for r in records {
        rows.push(r.context("reading row")?);
    }
    for r in &rows {
        let line = r.position().map_or(0, |p| p.line());
        if r.len() != width {
            bail!("line {line}: expected {width} fields, found {}", r.len());
        }
        let vals = parse_row(r, line)?;
        coords.extend_from_slice(&vals[..dim]);
        if weighted {
            weights.push(vals[dim]);
        }
    }
    if rows.is_empty() {
        bail!("measure file has a header but no atoms");
    }
    let mut warnings = Vec::new();
    let measure = if weighted {
        let (m, sum) = DiscreteMeasure::normalized(dim, coords, weights)?;
        if (sum - 1.0).abs() > WEIGHT_SUM_WARNING {
            warnings.push(format!("weights summed to {sum}; renormalized"));
        }
        m
    } else {
        DiscreteMeasure::uniform(dim, coords)?
    };
    Ok(Ingested { measure, warnings })
}

pub fn ingest_measure_csv(path: &Path) -> Result<Ingested> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    parse_measure_csv(BufReader::new(f)).with_context(|| format!("reading {}", path.display()))
}

/// Writes `x1,…,xd,weight` rows, preceded by the given comment lines.
pub fn write_measure_csv<W: Write>(measure: &DiscreteMeasure, comments: &[String], mut out: W) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=measure.dim()).map(|i| format!("x{i}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for (x, wt) in measure.points().zip(measure.weights()) {
        w.write_record(x.iter().chain(std::iter::once(wt)).map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_measure_csv(measure: &DiscreteMeasure, comments: &[String], path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_measure_csv(measure, comments, std::io::BufWriter::new(f))
}

pub fn read_region(path: &Path) -> Result<RegionPolygon> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing region {}", path.display()))
}

/// JSON wrapper that stamps every artifact with the crate version and seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub version: String,
    pub seed: u64,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Stamped<T> {
    pub fn new(seed: u64, body: T) -> Self {
        Self { version: VERSION.into(), seed, body }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountsFile {
    pub counts: HierarchicalCounts,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub report: PipelineReport,
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

/// Reads TOML, or JSON when the extension is `.json`.
pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}
