//! Landmark file formats: TPS (import) and CSV (canonical).
//!
//! CSV layout: a header `id,time,x1,y1,x2,y2,…` (with `z` columns in 3D),
//! then one row per configuration. TPS blocks start with `LM=m`, followed
//! by `m` coordinate lines and `KEY=value` lines (`ID`, `IMAGE`, `SCALE`,
//! `AGE`/`TIME`). A block without an age takes the trailing number of its
//! `ID`.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFileRecord {
    pub id: String,
    pub time: f64,
    /// `m × d`
    pub landmarks: DMatrix<f64>,
}

impl LandmarkFileRecord {
    /// Coordinates in row-major order.
    pub fn flat(&self) -> Vec<f64> {
        self.landmarks.transpose().as_slice().to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Tps,
    Csv,
}

impl Format {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "tps" => Some(Format::Tps),
            "csv" => Some(Format::Csv),
            _ => None,
        }
    }
}

pub fn parse_landmarks(path: &Path, format: Format) -> Result<Vec<LandmarkFileRecord>> {
    let file = File::open(path)?;
    match format {
        Format::Tps => parse_tps(BufReader::new(file)),
        Format::Csv => parse_csv(file),
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn check_shape(records: &[LandmarkFileRecord], rec: &LandmarkFileRecord, line: usize) -> Result<()> {
    if let Some(first) = records.first() {
        if first.landmarks.shape() != rec.landmarks.shape() {
            let (m0, d0) = first.landmarks.shape();
            let (m, d) = rec.landmarks.shape();
            return Err(parse_err(
                line,
                format!("record '{}' has {m}×{d} landmarks, expected {m0}×{d0}", rec.id),
            ));
        }
    }
    Ok(())
}

/// Trailing decimal number of an identifier, e.g. `rat03_age14` → 14.
fn trailing_number(s: &str) -> Option<f64> {
    let t = s.trim_end();
    let start = t
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_ascii_digit() || *c == '.')
        .last()
        .map(|(i, _)| i)?;
    t[start..].trim_start_matches('.').parse().ok()
}

struct TpsBlock {
    start: usize,
    count: usize,
    coords: Vec<Vec<f64>>,
    id: Option<String>,
    time: Option<f64>,
    scale: f64,
}

impl TpsBlock {
    fn finish(self, records: &mut Vec<LandmarkFileRecord>) -> Result<()> {
        if self.coords.len() != self.count {
            return Err(parse_err(
                self.start,
                format!("LM={} but {} coordinate lines", self.count, self.coords.len()),
            ));
        }
        let id = self.id.unwrap_or_else(|| format!("specimen{}", records.len() + 1));
        let time = match self.time {
            Some(t) => t,
            None => trailing_number(&id).ok_or_else(|| {
                parse_err(self.start, format!("block '{id}' has no AGE/TIME and no numeric ID suffix"))
            })?,
        };
        let d = self.coords.first().map_or(0, Vec::len);
        let flat: Vec<f64> = self.coords.iter().flatten().map(|c| c * self.scale).collect();
        let rec = LandmarkFileRecord {
            id,
            time,
            landmarks: DMatrix::from_row_slice(self.count, d, &flat),
        };
        check_shape(records, &rec, self.start)?;
        records.push(rec);
        Ok(())
    }
}

pub fn parse_tps<R: BufRead>(reader: R) -> Result<Vec<LandmarkFileRecord>> {
    let mut records = Vec::new();
    let mut block: Option<TpsBlock> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if let Some((key, value)) = text.split_once('=') {
            let key = key.trim().to_ascii_uppercase();
            let value = value.trim();
            if key == "LM" || key == "LM3" {
                if let Some(b) = block.take() {
                    b.finish(&mut records)?;
                }
                let count = value
                    .parse()
                    .map_err(|_| parse_err(lineno, format!("bad landmark count '{value}'")))?;
                block = Some(TpsBlock {
                    start: lineno,
                    count,
                    coords: Vec::new(),
                    id: None,
                    time: None,
                    scale: 1.0,
                });
                continue;
            }
            let b = block
                .as_mut()
                .ok_or_else(|| parse_err(lineno, "key before the first LM= line"))?;
            let num = || {
                value
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(lineno, format!("{key} is not a finite number: '{value}'")))
            };
            match key.as_str() {
                "ID" => b.id = Some(value.to_string()),
                "AGE" | "TIME" => b.time = Some(num()?),
                "SCALE" => b.scale = num()?,
                _ => {}
            }
            continue;
        }
        let b = block
            .as_mut()
            .ok_or_else(|| parse_err(lineno, "coordinates before the first LM= line"))?;
        if b.coords.len() == b.count {
            return Err(parse_err(lineno, format!("more than LM={} coordinate lines", b.count)));
        }
        let row: Vec<f64> = text
            .split_whitespace()
            .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| parse_err(lineno, format!("non-numeric coordinate line '{text}'")))?;
        if !(2..=3).contains(&row.len()) {
            return Err(parse_err(lineno, format!("expected 2 or 3 coordinates, got {}", row.len())));
        }
        if let Some(first) = b.coords.first() {
            if first.len() != row.len() {
                return Err(parse_err(lineno, "inconsistent coordinate dimension"));
            }
        }
        b.coords.push(row);
    }
    if let Some(b) = block {
        b.finish(&mut records)?;
    }
    Ok(records)
}

/// Landmark dimension implied by a header's coordinate columns: the number
/// of distinct axis letters (`x1,y1,…` → 2), or 1 for anything else.
fn header_dim(cols: &[String]) -> usize {
    let axes = ["x", "y", "z"];
    let letters: Vec<&str> = cols
        .iter()
        .map(|c| c.trim_end_matches(|ch: char| ch.is_ascii_digit()))
        .collect();
    for d in [3, 2] {
        let pattern_ok = letters.len().is_multiple_of(d)
            && letters
                .iter()
                .enumerate()
                .all(|(i, l)| l.eq_ignore_ascii_case(axes[i % d]));
        if pattern_ok {
            return d;
        }
    }
    1
}

pub fn parse_csv<R: Read>(reader: R) -> Result<Vec<LandmarkFileRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.len() < 3 || !header[0].eq_ignore_ascii_case("id") || !header[1].eq_ignore_ascii_case("time") {
        return Err(parse_err(1, "header must start with id,time and name at least one coordinate"));
    }
    let d = header_dim(&header[2..]);
    let m = (header.len() - 2) / d;
    let mut records = Vec::new();
    for (idx, row) in rdr.records().enumerate() {
        let lineno = idx + 2;
        let row = row?;
        if row.len() != header.len() {
            return Err(parse_err(lineno, format!("{} fields, header has {}", row.len(), header.len())));
        }
        let field = |j: usize| {
            row[j]
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| parse_err(lineno, format!("column '{}' is not a finite number: '{}'", header[j], &row[j])))
        };
        let time = field(1)?;
        let coords = (2..row.len()).map(field).collect::<Result<Vec<f64>>>()?;
        records.push(LandmarkFileRecord {
            id: row[0].to_string(),
            time,
            landmarks: DMatrix::from_row_slice(m, d, &coords),
        });
    }
    Ok(records)
}

pub fn csv_header(m: usize, d: usize) -> Vec<String> {
    let axes = ["x", "y", "z"];
    let mut h = vec!["id".to_string(), "time".to_string()];
    for i in 1..=m {
        for axis in axes.iter().take(d) {
            if d == 1 {
                h.push(format!("c{i}"));
            } else {
                h.push(format!("{axis}{i}"));
            }
        }
    }
    h
}

/// Writes records with shortest round-trip float formatting.
pub fn write_csv<W: Write>(writer: W, records: &[LandmarkFileRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let (m, d) = records.first().map_or((0, 2), |r| r.landmarks.shape());
    w.write_record(csv_header(m, d))?;
    for r in records {
        if r.landmarks.shape() != (m, d) {
            return Err(Error::InvalidArgument(format!("record '{}' has a different shape", r.id)));
        }
        let mut row = vec![r.id.clone(), r.time.to_string()];
        row.extend(r.flat().iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
