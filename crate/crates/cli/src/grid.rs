use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::Args;
use flowprobe::fitting::find_peak;
use flowprobe::motion::{
    compare_motion_preference, dominance_fraction, motion_peak, run_motion_gridsearch, write_scatter_csv, AliasBounds,
    MotionGrid,
};
use flowprobe::probe::{export_manifest, respond_grid, ResponseTable, DEFAULT_BATCH};
use flowprobe::stimuli::{GridSpec, MotionKind};
use flowprobe::Error;
use serde::{Deserialize, Serialize};

use crate::config::{grid_spec, parse_extent, require_file, usage, AnchorArg, CliResult, GridKind, RunDir};
use crate::provider::open_provider;

/// Runs a gridsearch through a provider, ingests recorded responses, or
/// exports the grid's stimulus manifest.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct GridArgs {
    #[arg(long, value_enum)]
    pub kind: Option<GridKind>,
    /// Grid spec TOML; takes precedence over --kind.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Write the manifest here and stop; no provider needed.
    #[arg(long)]
    pub export_manifest: Option<PathBuf>,
    /// Stimulus extent WxHxT [default: 383x383x2].
    #[arg(long)]
    pub extent: Option<String>,
    /// synthetic:BANK.csv or table:MANIFEST,RESPONSES
    #[arg(long)]
    pub provider: Option<String>,
    /// Response CSV recorded against this grid's manifest.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// Translation responses to compare a motion grid's peaks against.
    #[arg(long)]
    pub translation_responses: Option<PathBuf>,
    /// Grid spec TOML of --translation-responses [default: the translation table].
    #[arg(long)]
    pub translation_spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub anchor: Option<AnchorArg>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Serialize)]
struct GridSummary {
    motion_kind: MotionKind,
    grid_spec_hash: String,
    stimuli: usize,
    filters: usize,
    active_filters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    admissible: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    excluded: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dominance_fraction: Option<f64>,
}

fn exclusions_path(manifest: &std::path::Path) -> PathBuf {
    let stem = manifest.file_stem().map_or("manifest".into(), |s| s.to_string_lossy().into_owned());
    manifest.with_file_name(format!("{stem}_exclusions.csv"))
}

pub fn export(args: &GridArgs, spec: &GridSpec, path: &std::path::Path) -> CliResult<()> {
    let extent = parse_extent(args.extent.as_deref().unwrap_or("383x383x2"))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    export_manifest(spec, extent, BufWriter::new(File::create(path)?))?;
    let mut note = String::new();
    if spec.motion_kind != MotionKind::Translation {
        let grid = MotionGrid::plan(spec, AliasBounds::for_extent(extent))?;
        let ex = exclusions_path(path);
        grid.write_exclusions(BufWriter::new(File::create(&ex)?))?;
        note = format!(", {} excluded ids in {}", grid.excluded.len(), ex.display());
    }
    println!("wrote {} stimuli to {}{note}", spec.len(), path.display());
    Ok(())
}

pub fn run(args: &GridArgs, run: &RunDir) -> CliResult<()> {
    let spec = grid_spec(args.spec.as_deref(), args.kind)?;
    let extent = parse_extent(args.extent.as_deref().unwrap_or("383x383x2"))?;
    let anchor = args.anchor.unwrap_or(AnchorArg::FirstFrame).into();
    let batch = args.batch.unwrap_or(DEFAULT_BATCH);
    if let Some(p) = &args.responses {
        require_file(p, "response file")?;
    }
    let provider = match (&args.provider, &args.responses) {
        (Some(p), None) => Some(open_provider(p, extent, anchor)?),
        (None, Some(_)) => None,
        (Some(_), Some(_)) => return usage("give either --provider or --responses, not both"),
        (None, None) => return usage("a gridsearch needs --provider or --responses (or --export-manifest)"),
    };
    std::fs::write(run.file("grid.toml"), spec.to_toml())?;

    let motion = spec.motion_kind != MotionKind::Translation;
    let bounds = AliasBounds::for_extent(provider.as_ref().map_or(extent, |p| p.extent()));
    let (table, grid): (ResponseTable<f64>, Option<MotionGrid>) = match (&provider, motion) {
        (Some(p), false) => (respond_grid(p.as_ref(), &spec, None, batch)?, None),
        (Some(p), true) => {
            let (t, g) = run_motion_gridsearch(p.as_ref(), &spec, batch)?;
            (t, Some(g))
        }
        (None, _) => {
            let t = ResponseTable::ingest(args.responses.as_ref().unwrap(), &spec)?;
            (t, motion.then(|| MotionGrid::plan(&spec, bounds)).transpose()?)
        }
    };
    if provider.is_some() {
        table.write_csv(run.writer("responses.csv")?)?;
    }
    if let Some(g) = &grid {
        g.write_exclusions(run.writer("exclusions.csv")?)?;
    }

    let mut peaks = run.writer("peaks.csv")?;
    let axes: Vec<String> = spec.axes.iter().map(|a| format!("{}_{}", a.parameter.as_str(), a.unit.as_str())).collect();
    writeln!(peaks, "filter_id,active,stimulus_id,response,{}", axes.join(","))?;
    let mut active = Vec::new();
    for f in 0..table.filter_count() {
        let peak = match &grid {
            None => match find_peak(&table, &spec, f) {
                Ok(p) => Some((p.stimulus_id, p.value)),
                Err(Error::InactiveFilter(_)) => None,
                Err(e) => return Err(e.into()),
            },
            Some(g) => Some(motion_peak(&table, g, f)?).filter(|(_, v)| *v > 0.0),
        };
        match peak {
            Some((id, v)) => {
                active.push(f);
                let tuple: Vec<String> = spec.tuple(id).iter().map(f64::to_string).collect();
                writeln!(peaks, "{f},true,{id},{v},{}", tuple.join(","))?;
            }
            None => writeln!(peaks, "{f},false,,0,{}", vec![""; axes.len()].join(","))?,
        }
    }
    peaks.flush()?;

    let mut dominance = None;
    if let (Some(g), Some(path)) = (&grid, &args.translation_responses) {
        require_file(path, "translation response file")?;
        let tspec = grid_spec(args.translation_spec.as_deref(), Some(GridKind::Translation))?;
        let ttable = ResponseTable::ingest(path, &tspec)?;
        // dominance among filters active in the translation gridsearch
        let prefs = ttable
            .active_filters()?
            .into_iter()
            .map(|f| compare_motion_preference(&ttable, &tspec, &table, g, f))
            .collect::<Result<Vec<_>, _>>()?;
        write_scatter_csv(&prefs, run.writer("motion_scatter.csv")?)?;
        dominance = Some(dominance_fraction(&prefs));
    } else if args.translation_responses.is_some() {
        return usage("--translation-responses applies to dilation and rotation grids");
    }

    run.write_json(
        "summary.json",
        &GridSummary {
            motion_kind: spec.motion_kind,
            grid_spec_hash: format!("{:016x}", spec.hash()),
            stimuli: spec.len(),
            filters: table.filter_count(),
            active_filters: active.len(),
            admissible: grid.as_ref().map(|g| g.admissible.len()),
            excluded: grid.as_ref().map(|g| g.excluded.len()),
            dominance_fraction: dominance,
        },
    )?;
    println!(
        "{} grid: {} stimuli, {}/{} filters active -> {}",
        spec.motion_kind.as_str(),
        spec.len(),
        active.len(),
        table.filter_count(),
        run.path.display()
    );
    Ok(())
}
