use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use flowprobe::gabor::TemporalAnchor;
use flowprobe::probe::{read_manifest, ResponseProvider, ResponseTable, SyntheticBank, TableProvider};
use flowprobe::Extent;

use crate::config::{require_file, usage, CliError, CliResult};

/// `synthetic:BANK.csv` (planted Gabor bank) or `table:MANIFEST.jsonl,RESPONSES.csv`
/// (responses an external adapter recorded for a manifest).
pub fn open_provider(spec: &str, extent: Extent, anchor: TemporalAnchor) -> CliResult<Box<dyn ResponseProvider<f64>>> {
    match spec.split_once(':') {
        Some(("synthetic", path)) => {
            let path = Path::new(path);
            require_file(path, "filter bank")?;
            let bank = SyntheticBank::read_csv(BufReader::new(File::open(path)?), extent, anchor)?;
            Ok(Box::new(bank))
        }
        Some(("table", rest)) => {
            let Some((manifest, responses)) = rest.split_once(',') else {
                return usage("table provider needs table:MANIFEST,RESPONSES");
            };
            let (manifest, responses) = (Path::new(manifest), Path::new(responses));
            require_file(manifest, "manifest")?;
            require_file(responses, "response file")?;
            let manifest = read_manifest(BufReader::new(File::open(manifest)?))?;
            let table = ResponseTable::read_csv(File::open(responses)?, manifest.hash()?, manifest.records.len())?;
            Ok(Box::new(TableProvider::new(&manifest, table)?))
        }
        _ => Err(CliError::Usage(format!(
            "provider `{spec}` must be synthetic:BANK.csv or table:MANIFEST,RESPONSES"
        ))),
    }
}
