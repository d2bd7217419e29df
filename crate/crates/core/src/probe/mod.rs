//! The filter bank under test, seen through a batch response contract.
//!
//! [`SyntheticBank`] plants known filters and answers in-process; external
//! adapters answer through a manifest → response-table round trip that
//! [`TableProvider`] replays.

mod manifest;
mod table;

pub use manifest::{
    export_manifest, export_stimulus_manifest, read_manifest, stimulus_list_hash, Manifest, ManifestHeader,
    ManifestRecord, MANIFEST_FORMAT,
};
pub use table::ResponseTable;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gabor::{GaborEvaluator, GaborParams, TemporalAnchor, CSV_COLUMNS};
use crate::scalar::Scalar;
use crate::stimuli::{GridSpec, Stimulus};
use crate::volume::{Extent, Volume};

/// Default number of stimuli handed to a provider at once.
pub const DEFAULT_BATCH: usize = 4096;

/// A bank of filters answering batches of stimuli with non-negative
/// activations, one row per stimulus and one column per filter.
///
/// Implementations must be deterministic and must not mutate shared state
/// visibly, so that concurrent batch calls are safe.
pub trait ResponseProvider<T: Scalar>: Sync {
    fn extent(&self) -> Extent;

    fn filter_count(&self) -> usize;

    fn respond(&self, batch: &[Volume<T>]) -> Result<Vec<Vec<T>>>;

    /// Parametrized stimuli; the default renders them on [`Self::extent`].
    fn respond_params(&self, stimuli: &[Stimulus<T>]) -> Result<Vec<Vec<T>>> {
        let extent = self.extent();
        let vols: Vec<Volume<T>> = stimuli.iter().map(|s| s.render(extent)).collect();
        self.respond(&vols)
    }

    /// Activations of a single filter.
    fn respond_filter(&self, filter_id: usize, stimuli: &[Stimulus<T>]) -> Result<Vec<T>> {
        if filter_id >= self.filter_count() {
            return Err(Error::UnknownFilter(filter_id));
        }
        Ok(self.respond_params(stimuli)?.into_iter().map(|row| row[filter_id]).collect())
    }
}

/// One planted filter.
#[derive(Debug, Clone, PartialEq)]
pub enum BankFilter<T> {
    /// Rectified Gabor unit.
    Gabor(GaborParams<T>),
    /// Arbitrary kernel, `max(0, <s, k>)`.
    Kernel(Volume<T>),
    /// Pointwise maximum of several filters (e.g. a polarity-invariant unit).
    Max(Vec<BankFilter<T>>),
}

impl<T: Scalar> BankFilter<T> {
    fn validate(&self, extent: Extent) -> Result<()> {
        match self {
            BankFilter::Gabor(p) => p.validate(),
            BankFilter::Kernel(k) => extent.ensure_same(&k.extent()),
            BankFilter::Max(v) if v.is_empty() => Err(Error::InvalidParameter("empty max filter".into())),
            BankFilter::Max(v) => v.iter().try_for_each(|f| f.validate(extent)),
        }
    }

    fn param_responses(&self, stimuli: &[Stimulus<T>], extent: Extent, anchor: TemporalAnchor) -> Vec<T> {
        match self {
            BankFilter::Gabor(p) => {
                let mut ev = GaborEvaluator::new(p, extent, anchor);
                stimuli.iter().map(|s| ev.response(s)).collect()
            }
            BankFilter::Kernel(k) => stimuli
                .iter()
                .map(|s| crate::volume::dot(s.render(extent).samples(), k.samples()).max(T::zero()))
                .collect(),
            BankFilter::Max(v) => max_rows(v.iter().map(|f| f.param_responses(stimuli, extent, anchor))),
        }
    }

    fn volume_responses(&self, batch: &[Volume<T>], anchor: TemporalAnchor) -> Vec<T> {
        match self {
            BankFilter::Gabor(p) => {
                let Some(first) = batch.first() else { return Vec::new() };
                let k = crate::gabor::gabor_kernel(p, first.extent(), anchor);
                batch
                    .iter()
                    .map(|s| crate::gabor::rectify(p, crate::volume::dot(s.samples(), k.samples())))
                    .collect()
            }
            BankFilter::Kernel(k) => batch
                .iter()
                .map(|s| crate::volume::dot(s.samples(), k.samples()).max(T::zero()))
                .collect(),
            BankFilter::Max(v) => max_rows(v.iter().map(|f| f.volume_responses(batch, anchor))),
        }
    }
}

fn max_rows<T: Scalar>(mut rows: impl Iterator<Item = Vec<T>>) -> Vec<T> {
    let mut acc = rows.next().unwrap_or_default();
    for r in rows {
        for (a, b) in acc.iter_mut().zip(r) {
            *a = a.max(b);
        }
    }
    acc
}

fn transpose<T: Copy>(columns: Vec<Vec<T>>, rows: usize) -> Vec<Vec<T>> {
    (0..rows).map(|i| columns.iter().map(|c| c[i]).collect()).collect()
}

/// Planted filters with known parameters; the verification oracle.
#[derive(Debug, Clone)]
pub struct SyntheticBank<T> {
    filters: Vec<BankFilter<T>>,
    extent: Extent,
    anchor: TemporalAnchor,
}

impl<T: Scalar> SyntheticBank<T> {
    pub fn new(filters: Vec<BankFilter<T>>, extent: Extent, anchor: TemporalAnchor) -> Result<Self> {
        for f in &filters {
            f.validate(extent)?;
        }
        Ok(Self { filters, extent, anchor })
    }

    pub fn from_gabors(params: &[GaborParams<T>], extent: Extent, anchor: TemporalAnchor) -> Result<Self> {
        Self::new(params.iter().copied().map(BankFilter::Gabor).collect(), extent, anchor)
    }

    pub fn filters(&self) -> &[BankFilter<T>] {
        &self.filters
    }

    pub fn anchor(&self) -> TemporalAnchor {
        self.anchor
    }

    /// Gabor banks as CSV: one [`GaborParams::csv_row`] per filter.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", CSV_COLUMNS.join(","))?;
        for f in &self.filters {
            match f {
                BankFilter::Gabor(p) => writeln!(w, "{}", p.csv_row().join(","))?,
                _ => return Err(Error::InvalidParameter("only Gabor banks serialize to CSV".into())),
            }
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R, extent: Extent, anchor: TemporalAnchor) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r);
        let header = csv.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
        if header.iter().ne(CSV_COLUMNS.iter().copied()) {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `{}`", CSV_COLUMNS.join(",")),
            });
        }
        let mut params = Vec::new();
        for rec in csv.records() {
            let rec = rec.map_err(|e| Error::Parse { line: 0, message: e.to_string() })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let fields: Vec<&str> = rec.iter().collect();
            params.push(GaborParams::from_csv_fields(&fields).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?);
        }
        Self::from_gabors(&params, extent, anchor)
    }
}

impl<T: Scalar> ResponseProvider<T> for SyntheticBank<T> {
    fn extent(&self) -> Extent {
        self.extent
    }

    fn filter_count(&self) -> usize {
        self.filters.len()
    }

    fn respond(&self, batch: &[Volume<T>]) -> Result<Vec<Vec<T>>> {
        for v in batch {
            self.extent.ensure_same(&v.extent())?;
        }
        let cols: Vec<Vec<T>> = self.filters.par_iter().map(|f| f.volume_responses(batch, self.anchor)).collect();
        Ok(transpose(cols, batch.len()))
    }

    fn respond_params(&self, stimuli: &[Stimulus<T>]) -> Result<Vec<Vec<T>>> {
        let cols: Vec<Vec<T>> = self
            .filters
            .par_iter()
            .map(|f| f.param_responses(stimuli, self.extent, self.anchor))
            .collect();
        Ok(transpose(cols, stimuli.len()))
    }

    fn respond_filter(&self, filter_id: usize, stimuli: &[Stimulus<T>]) -> Result<Vec<T>> {
        let f = self.filters.get(filter_id).ok_or(Error::UnknownFilter(filter_id))?;
        Ok(f.param_responses(stimuli, self.extent, self.anchor))
    }
}

/// Replays responses an external adapter recorded for a manifest.
#[derive(Debug, Clone)]
pub struct TableProvider<T> {
    extent: Extent,
    index: HashMap<[u64; 5], usize>,
    table: ResponseTable<T>,
}

impl<T: Scalar> TableProvider<T> {
    pub fn new(manifest: &Manifest, table: ResponseTable<T>) -> Result<Self> {
        let hash = manifest.hash()?;
        if hash != table.grid_spec_hash() {
            return Err(Error::HashMismatch {
                expected: hash,
                found: table.grid_spec_hash(),
            });
        }
        let [w, h, t] = manifest.header.extent;
        let extent = Extent::new(w, h, t)?;
        let index = manifest.records.iter().map(|r| (r.key(), r.stimulus_id)).collect();
        Ok(Self { extent, index, table })
    }

    pub fn table(&self) -> &ResponseTable<T> {
        &self.table
    }

    fn lookup(&self, s: &Stimulus<T>, filter_id: usize) -> Result<T> {
        let rec = ManifestRecord::from_stimulus(0, s, self.extent);
        let id = *self.index.get(&rec.key()).ok_or_else(|| Error::Provider {
            context: format!("{rec:?}"),
            message: "stimulus not present in the recorded manifest".into(),
        })?;
        self.table.get(id, filter_id).ok_or_else(|| Error::Provider {
            context: format!("stimulus {id}, filter {filter_id}"),
            message: "no recorded response".into(),
        })
    }
}

impl<T: Scalar> ResponseProvider<T> for TableProvider<T> {
    fn extent(&self) -> Extent {
        self.extent
    }

    fn filter_count(&self) -> usize {
        self.table.filter_count()
    }

    fn respond(&self, _batch: &[Volume<T>]) -> Result<Vec<Vec<T>>> {
        Err(Error::Provider {
            context: "table provider".into(),
            message: "recorded responses can only be looked up by stimulus parameters".into(),
        })
    }

    fn respond_params(&self, stimuli: &[Stimulus<T>]) -> Result<Vec<Vec<T>>> {
        stimuli
            .iter()
            .map(|s| (0..self.filter_count()).map(|f| self.lookup(s, f)).collect())
            .collect()
    }

    fn respond_filter(&self, filter_id: usize, stimuli: &[Stimulus<T>]) -> Result<Vec<T>> {
        stimuli.iter().map(|s| self.lookup(s, filter_id)).collect()
    }
}

/// Evaluates `provider` on the listed grid stimuli (all of them when `ids`
/// is `None`), in batches, into a table keyed by the grid's hash.
pub fn respond_grid<T: Scalar, P: ResponseProvider<T> + ?Sized>(
    provider: &P,
    spec: &GridSpec,
    ids: Option<&[usize]>,
    batch: usize,
) -> Result<ResponseTable<T>> {
    spec.validate()?;
    let all: Vec<usize>;
    let ids = match ids {
        Some(ids) => ids,
        None => {
            all = (0..spec.len()).collect();
            &all
        }
    };
    let mut table = ResponseTable::new(spec.hash(), spec.len(), provider.filter_count());
    for chunk in ids.chunks(batch.max(1)) {
        let stimuli = chunk.iter().map(|&id| spec.stimulus::<T>(id)).collect::<Result<Vec<_>>>()?;
        let rows = provider.respond_params(&stimuli).map_err(|e| Error::Provider {
            context: format!("stimuli {}..={}", chunk[0], chunk[chunk.len() - 1]),
            message: e.to_string(),
        })?;
        for (&id, row) in chunk.iter().zip(rows) {
            for (f, v) in row.into_iter().enumerate() {
                table.insert(0, id, f, v)?;
            }
        }
    }
    Ok(table)
}
