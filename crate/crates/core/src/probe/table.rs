use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{format_round_trip, Scalar};
use crate::stimuli::GridSpec;

const HASH_PREFIX: &str = "# grid_spec_hash=";
const HEADER: &str = "stimulus_id,filter_id,activation";

/// Measured activations indexed by `(stimulus_id, filter_id)`, tagged with the
/// hash of the grid the stimulus ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable<T> {
    grid_spec_hash: u64,
    stimulus_count: usize,
    filter_count: usize,
    values: Vec<T>,
    present: Vec<bool>,
}

impl<T: Scalar> ResponseTable<T> {
    pub fn new(grid_spec_hash: u64, stimulus_count: usize, filter_count: usize) -> Self {
        let n = stimulus_count * filter_count;
        Self {
            grid_spec_hash,
            stimulus_count,
            filter_count,
            values: vec![T::zero(); n],
            present: vec![false; n],
        }
    }

    /// A complete table from a `[stimulus][filter]` matrix.
    pub fn from_matrix(grid_spec_hash: u64, rows: &[Vec<T>], filter_count: usize) -> Result<Self> {
        let mut t = Self::new(grid_spec_hash, rows.len(), filter_count);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != filter_count {
                return Err(Error::InvalidParameter(format!(
                    "row {s} has {} activations, expected {filter_count}",
                    row.len()
                )));
            }
            for (f, &v) in row.iter().enumerate() {
                t.insert(0, s, f, v)?;
            }
        }
        Ok(t)
    }

    pub fn grid_spec_hash(&self) -> u64 {
        self.grid_spec_hash
    }

    pub fn stimulus_count(&self) -> usize {
        self.stimulus_count
    }

    pub fn filter_count(&self) -> usize {
        self.filter_count
    }

    /// Adds one row; `line` only labels errors.
    pub fn insert(&mut self, line: usize, stimulus_id: usize, filter_id: usize, value: T) -> Result<()> {
        if !value.is_finite() || value < T::zero() {
            return Err(Error::InvalidActivation {
                line,
                stimulus_id,
                filter_id,
                value: value.to_string(),
            });
        }
        if stimulus_id >= self.stimulus_count {
            return Err(Error::StimulusOutOfRange {
                line,
                stimulus_id,
                count: self.stimulus_count,
            });
        }
        if filter_id >= self.filter_count {
            return Err(Error::UnknownFilter(filter_id));
        }
        let i = stimulus_id * self.filter_count + filter_id;
        if self.present[i] {
            return Err(Error::DuplicateRow {
                line,
                stimulus_id,
                filter_id,
            });
        }
        self.present[i] = true;
        self.values[i] = value;
        Ok(())
    }

    pub fn get(&self, stimulus_id: usize, filter_id: usize) -> Option<T> {
        let i = stimulus_id * self.filter_count + filter_id;
        (stimulus_id < self.stimulus_count && filter_id < self.filter_count && self.present[i]).then(|| self.values[i])
    }

    pub fn is_filter_complete(&self, filter_id: usize) -> bool {
        filter_id < self.filter_count
            && (0..self.stimulus_count).all(|s| self.present[s * self.filter_count + filter_id])
    }

    pub fn is_complete(&self) -> bool {
        self.present.iter().all(|&p| p)
    }

    /// Number of absent `(stimulus, filter)` pairs.
    pub fn missing(&self) -> usize {
        self.present.iter().filter(|&&p| !p).count()
    }

    /// All activations of one filter in stimulus order; requires completeness.
    pub fn column(&self, filter_id: usize) -> Result<Vec<T>> {
        if filter_id >= self.filter_count {
            return Err(Error::UnknownFilter(filter_id));
        }
        if !self.is_filter_complete(filter_id) {
            return Err(Error::Incomplete(filter_id));
        }
        Ok((0..self.stimulus_count)
            .map(|s| self.values[s * self.filter_count + filter_id])
            .collect())
    }

    /// Filters whose maximum activation over the grid is positive.
    pub fn active_filters(&self) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for f in 0..self.filter_count {
            if self.column(f)?.iter().any(|&v| v > T::zero()) {
                out.push(f);
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{HASH_PREFIX}{:016x}", self.grid_spec_hash)?;
        writeln!(w, "{HEADER}")?;
        for s in 0..self.stimulus_count {
            for f in 0..self.filter_count {
                let i = s * self.filter_count + f;
                if self.present[i] {
                    writeln!(w, "{s},{f},{}", format_round_trip(self.values[i]))?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(File::create(path)?))
    }

    /// Parses a response file for a grid of `stimulus_count` stimuli hashing
    /// to `expected_hash`. The filter count is one past the largest filter id.
    pub fn read_csv<R: Read>(reader: R, expected_hash: u64, stimulus_count: usize) -> Result<Self> {
        let mut reader = BufReader::new(reader);
        let mut first = String::new();
        reader.read_line(&mut first)?;
        let found = first
            .trim_end()
            .strip_prefix(HASH_PREFIX)
            .and_then(|h| u64::from_str_radix(h, 16).ok())
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected `{HASH_PREFIX}<16 hex digits>`"),
            })?;
        if found != expected_hash {
            return Err(Error::HashMismatch {
                expected: expected_hash,
                found,
            });
        }

        let mut csv = csv::ReaderBuilder::new()
            .has_headers(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = csv.headers().map_err(|e| parse_err(2, e))?;
        if header.iter().collect::<Vec<_>>() != HEADER.split(',').collect::<Vec<_>>() {
            return Err(Error::Parse {
                line: 2,
                message: format!("expected header `{HEADER}`"),
            });
        }
        let mut rows = Vec::new();
        let mut max_filter = None;
        for rec in csv.records() {
            let rec = rec.map_err(|e| parse_err(0, e))?;
            // one line for the hash comment precedes the csv reader's input
            let line = rec.position().map_or(0, |p| p.line() as usize + 1);
            let field = |k: usize| rec.get(k).unwrap_or("");
            let s: usize = field(0).parse().map_err(|_| bad_field(line, "stimulus_id", field(0)))?;
            let f: usize = field(1).parse().map_err(|_| bad_field(line, "filter_id", field(1)))?;
            let v: T = field(2).parse().map_err(|_| Error::InvalidActivation {
                line,
                stimulus_id: s,
                filter_id: f,
                value: field(2).to_string(),
            })?;
            max_filter = max_filter.max(Some(f));
            rows.push((line, s, f, v));
        }
        let mut table = Self::new(found, stimulus_count, max_filter.map_or(0, |m| m + 1));
        for (line, s, f, v) in rows {
            if !v.is_finite() {
                return Err(Error::InvalidActivation {
                    line,
                    stimulus_id: s,
                    filter_id: f,
                    value: v.to_string(),
                });
            }
            table.insert(line, s, f, v)?;
        }
        Ok(table)
    }

    /// Reads a response file produced against `spec`.
    pub fn ingest(path: &Path, spec: &GridSpec) -> Result<Self> {
        spec.validate()?;
        Self::read_csv(File::open(path)?, spec.hash(), spec.len())
    }
}

fn parse_err(line: usize, e: csv::Error) -> Error {
    let line = e.position().map_or(line, |p| p.line() as usize + 1);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn bad_field(line: usize, name: &str, value: &str) -> Error {
    Error::Parse {
        line,
        message: format!("{name} `{value}` is not a non-negative integer"),
    }
}
