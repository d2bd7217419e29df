use std::collections::HashSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use flowprobe::fitting::{
    find_peak, fit_filters, profile_stimuli, write_error_patterns, write_fit_csv, BandwidthSummary, FitConfig,
    FitSummary, ProfileSampling,
};
use flowprobe::gabor::AxisBandwidth;
use flowprobe::probe::{export_stimulus_manifest, respond_grid, ResponseTable, DEFAULT_BATCH};
use flowprobe::stimuli::{MotionKind, Stimulus};
use serde::{Deserialize, Serialize};

use crate::config::{grid_spec, parse_extent, require_file, usage, AnchorArg, CliError, CliResult, GridKind, RunDir};
use crate::provider::open_provider;

/// Spectral profiles, Gabor fits, bandwidths and summary quartiles for every
/// filter active in a translation gridsearch.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Translation gridsearch responses; computed through --provider when absent.
    #[arg(long)]
    pub responses: Option<PathBuf>,
    /// Grid of --responses [default: translation].
    #[arg(long, value_enum)]
    pub kind: Option<GridKind>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// synthetic:BANK.csv or table:MANIFEST,RESPONSES (the profile sweeps)
    #[arg(long)]
    pub provider: Option<String>,
    /// Write the profile-sweep manifest for the active filters here and stop.
    #[arg(long)]
    pub export_profiles: Option<PathBuf>,
    /// Extent WxHxT of a synthetic bank [default: 383x383x2].
    #[arg(long)]
    pub extent: Option<String>,
    #[arg(long, value_enum)]
    pub anchor: Option<AnchorArg>,
    /// Profile sweep ranges; config file only.
    #[arg(skip)]
    pub sampling: Option<ProfileSampling>,
}

#[derive(Serialize)]
struct Failure {
    filter_id: usize,
    error: String,
}

#[derive(Serialize)]
struct Report {
    filters: usize,
    active_filters: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
    fit: Option<FitSummary>,
    /// Quartiles over the lowest-75%-cost filters.
    bandwidths: Option<BandwidthQuartiles>,
    failures: Vec<Failure>,
}

#[derive(Serialize)]
struct BandwidthQuartiles {
    filters: usize,
    spatial_octaves: Option<[f64; 3]>,
    orientation_deg: Option<[f64; 3]>,
    temporal_cpf: Option<[f64; 3]>,
    truncated: [usize; 3],
}

fn write_bandwidths<W: Write>(b: &BandwidthSummary, mut w: W) -> CliResult<()> {
    let axes = ["spatial_octaves", "orientation_deg", "temporal_cpf"];
    let cols: Vec<String> = axes
        .iter()
        .flat_map(|a| ["low", "high", "width", "truncated", "multi_lobe"].map(|c| format!("{a}_{c}")))
        .collect();
    writeln!(w, "filter_id,{}", cols.join(","))?;
    let fmt = |a: &AxisBandwidth| format!("{},{},{},{},{}", a.low, a.high, a.width, a.truncated, a.multi_lobe);
    for (id, bw) in b.filter_ids.iter().zip(&b.bandwidths) {
        writeln!(w, "{id},{},{},{}", fmt(&bw.spatial), fmt(&bw.orientation), fmt(&bw.temporal))?;
    }
    w.flush()?;
    Ok(())
}

fn export_profiles(table: &ResponseTable<f64>, spec: &flowprobe::stimuli::GridSpec, sampling: &ProfileSampling, extent: flowprobe::Extent, path: &Path) -> CliResult<()> {
    let mut seen = HashSet::new();
    let mut stimuli: Vec<Stimulus<f64>> = Vec::new();
    let active = table.active_filters()?;
    for &f in &active {
        let peak = find_peak(table, spec, f)?;
        for (_, sweep, _) in profile_stimuli(&peak, sampling)? {
            for s in sweep {
                let Stimulus::Translating(w) = s else { continue };
                let key = [w.spatial_freq, w.orientation, w.temporal_freq, w.phase].map(f64::to_bits);
                if seen.insert(key) {
                    stimuli.push(s);
                }
            }
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    export_stimulus_manifest(&stimuli, extent, BufWriter::new(File::create(path)?))?;
    println!("wrote {} profile stimuli for {} active filters to {}", stimuli.len(), active.len(), path.display());
    Ok(())
}

/// `run` may be `None` only with `--export-profiles`, which writes no run directory.
pub fn run(args: &FitArgs, run: Option<&RunDir>) -> CliResult<()> {
    let spec = grid_spec(args.spec.as_deref(), args.kind.or(Some(GridKind::Translation)))?;
    if spec.motion_kind != MotionKind::Translation {
        return usage("fitting needs a translation gridsearch");
    }
    let extent = parse_extent(args.extent.as_deref().unwrap_or("383x383x2"))?;
    let anchor = args.anchor.unwrap_or(AnchorArg::FirstFrame).into();
    let sampling = args.sampling.unwrap_or_default();
    if let Some(p) = &args.responses {
        require_file(p, "response file")?;
    }
    let provider = args.provider.as_deref().map(|p| open_provider(p, extent, anchor)).transpose()?;

    let table: ResponseTable<f64> = match (&args.responses, &provider) {
        (Some(path), _) => ResponseTable::ingest(path, &spec)?,
        (None, Some(p)) => respond_grid(p.as_ref(), &spec, None, DEFAULT_BATCH)?,
        (None, None) => return usage("fit needs --responses, --provider, or both"),
    };

    if let Some(path) = &args.export_profiles {
        let extent = provider.as_ref().map_or(extent, |p| p.extent());
        return export_profiles(&table, &spec, &sampling, extent, path);
    }
    let (Some(provider), Some(run)) = (provider, run) else {
        return usage("fitting measures profile sweeps and needs --provider");
    };

    let active = table.active_filters()?;
    let mut report = Report {
        filters: table.filter_count(),
        active_filters: active.len(),
        note: None,
        fit: None,
        bandwidths: None,
        failures: Vec::new(),
    };
    if active.is_empty() {
        report.note = Some("no active filters");
        run.write_json("summary.json", &report)?;
        println!("no active filters: every response of the gridsearch is zero");
        return Ok(());
    }

    let config = FitConfig { anchor, ..FitConfig::default() };
    let outcomes = fit_filters(provider.as_ref(), &table, &spec, &active, &sampling, &config);
    let mut done = Vec::new();
    for (&f, o) in active.iter().zip(outcomes) {
        match o {
            Ok((_, profile, fit)) => done.push((profile, fit)),
            Err(e) => report.failures.push(Failure { filter_id: f, error: e.to_string() }),
        }
    }
    let fits: Vec<_> = done.iter().map(|(_, f)| f.clone()).collect();
    write_fit_csv(&fits, run.writer("fits.csv")?)?;
    let pairs: Vec<_> = done.iter().map(|(p, f)| (p, f)).collect();
    write_error_patterns(&pairs, run.writer("error_patterns.csv")?)?;
    let bw = BandwidthSummary::new(&fits, provider.extent(), anchor)?;
    write_bandwidths(&bw, run.writer("bandwidths.csv")?)?;
    report.fit = Some(FitSummary::new(&fits));
    report.bandwidths = Some(BandwidthQuartiles {
        filters: bw.filter_ids.len(),
        spatial_octaves: bw.spatial_octaves,
        orientation_deg: bw.orientation_deg,
        temporal_cpf: bw.temporal_cpf,
        truncated: bw.truncated,
    });
    run.write_json("summary.json", &report)?;

    let median = report.fit.as_ref().and_then(|s| s.normalized_cost).map_or(f64::NAN, |q| q[1]);
    println!(
        "fitted {}/{} active filters, median L_norm {median:.3e} -> {}",
        fits.len(),
        active.len(),
        run.path.display()
    );
    if let Some(first) = report.failures.first() {
        return Err(CliError::Failed(format!(
            "{} of {} fits failed; filter {}: {}",
            report.failures.len(),
            active.len(),
            first.filter_id,
            first.error
        )));
    }
    Ok(())
}
