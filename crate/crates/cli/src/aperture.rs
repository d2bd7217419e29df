use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use flowprobe::aperture::{
    breakdown_scale, export_bar_cases, run_sweep, summarize, write_sweep_csv, ApertureSetup, EndCapOracle,
    FloDirectory, FlowSource, GroundTruthFlow, ZeroFlow, DEFAULT_MAGNITUDE,
};
use flowprobe::stimuli::BarDirection;
use serde::{Deserialize, Serialize};

use crate::config::{parse_scales, usage, CliError, CliResult, RunDir};

const DEFAULT_SCALES: &str = "16:400:16";

/// End-point error of a flow source at the bar center across bar scales.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ApertureArgs {
    /// Directory of .flo files named bar_{scale}_{direction}_{level}.flo.
    #[arg(long)]
    pub flow_dir: Option<PathBuf>,
    /// Built-in source: ground-truth, zero, or end-cap:RHO.
    #[arg(long)]
    pub oracle: Option<String>,
    /// start:stop:step or a comma list [default: 16:400:16].
    #[arg(long)]
    pub scales: Option<String>,
    /// Bar displacement, px/frame [default: 64].
    #[arg(long)]
    pub magnitude: Option<f64>,
    /// EPE marking the breakdown scale [default: magnitude / 2].
    #[arg(long)]
    pub threshold: Option<f64>,
}

/// Bar frame pairs and ground truth for an external flow network.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct BarsArgs {
    /// start:stop:step or a comma list [default: 16:400:16].
    #[arg(long)]
    pub scales: Option<String>,
    #[arg(long)]
    pub magnitude: Option<f64>,
}

fn setup(magnitude: Option<f64>) -> CliResult<ApertureSetup> {
    let m = magnitude.unwrap_or(DEFAULT_MAGNITUDE);
    if !(m.is_finite() && m > 0.0) {
        return usage(format!("magnitude {m} must be positive"));
    }
    Ok(ApertureSetup { magnitude: m, ..ApertureSetup::default() })
}

fn oracle(spec: &str) -> CliResult<Box<dyn FlowSource>> {
    match spec {
        "ground-truth" => Ok(Box::new(GroundTruthFlow)),
        "zero" => Ok(Box::new(ZeroFlow)),
        _ => match spec.strip_prefix("end-cap:").map(str::parse::<f64>) {
            Some(Ok(rho)) if rho >= 0.0 => Ok(Box::new(EndCapOracle { rho })),
            _ => Err(CliError::Usage(format!("oracle `{spec}` must be ground-truth, zero or end-cap:RHO"))),
        },
    }
}

pub fn run(args: &ApertureArgs, run: &RunDir) -> CliResult<()> {
    let setup = setup(args.magnitude)?;
    let scales = parse_scales(args.scales.as_deref().unwrap_or(DEFAULT_SCALES))?;
    let (name, source): (String, Box<dyn FlowSource>) = match (&args.flow_dir, &args.oracle) {
        (Some(dir), None) => {
            if !dir.is_dir() {
                return usage(format!("flow directory {} does not exist", dir.display()));
            }
            let name = dir.file_name().map_or("flow_dir".into(), |n| n.to_string_lossy().into_owned());
            (name, Box::new(FloDirectory { root: dir.clone() }))
        }
        (None, Some(o)) => (o.clone(), oracle(o)?),
        (Some(_), Some(_)) => return usage("give either --flow-dir or --oracle, not both"),
        (None, None) => return usage("aperture needs --flow-dir or --oracle"),
    };
    let measurements = run_sweep(&setup, &scales, &BarDirection::ALL, source.as_ref())?;
    let rows = summarize(&name, &measurements);
    write_sweep_csv(&rows, run.writer("sweep.csv")?)?;
    let threshold = args.threshold.unwrap_or(setup.magnitude / 2.0);
    let knees: BTreeMap<&str, Option<u32>> = flowprobe::aperture::FlowLevel::ALL
        .iter()
        .map(|&l| (l.as_str(), breakdown_scale(&rows, l, threshold)))
        .collect();
    #[derive(Serialize)]
    struct Knees<'a> {
        provider: &'a str,
        threshold: f64,
        breakdown_scale: &'a BTreeMap<&'a str, Option<u32>>,
    }
    run.write_json("knees.json", &Knees { provider: &name, threshold, breakdown_scale: &knees })?;
    let shown: Vec<String> = knees
        .iter()
        .map(|(l, k)| format!("{l} {}", k.map_or("-".into(), |k| k.to_string())))
        .collect();
    println!("{} scales, breakdown at {} -> {}", scales.len(), shown.join(", "), run.path.display());
    Ok(())
}

pub fn bars(args: &BarsArgs, run: &RunDir) -> CliResult<()> {
    let setup = setup(args.magnitude)?;
    let scales = parse_scales(args.scales.as_deref().unwrap_or(DEFAULT_SCALES))?;
    let n = export_bar_cases(&setup, &scales, &run.path)?;
    println!("wrote {n} bar cases -> {}", run.path.display());
    Ok(())
}
