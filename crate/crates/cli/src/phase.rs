use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use clap::Args;
use flowprobe::render::{enlarge, power_image, psi_image, response_image, save_png};
use flowprobe::spectral::{full_lattice, phase_map_masked, LatticePlane, Simulation, POWER_MASK_FRACTION};
use flowprobe::Volume;
use serde::{Deserialize, Serialize};

use crate::config::{require_file, usage, CliResult, RunDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Translation,
    Dilation,
    Rotation,
    Occlusion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Plane {
    /// (F_x, F_y) at fixed temporal index
    Spatial,
    /// (F_x, f_t) at fixed vertical index
    SpaceTime,
    /// every lattice frequency; CSV only
    Full,
}

/// ψ maps, power and rectified-response maps of a filter over the lattice
/// frequencies of its extent.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct PhaseArgs {
    /// A simulated filter.
    #[arg(long, value_enum)]
    pub builtin: Option<Builtin>,
    /// A filter volume in the STVL format.
    #[arg(long)]
    pub filter: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub plane: Option<Plane>,
    /// Fixed lattice index of the plane (m_t or m_y) [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub index: Option<i64>,
    /// Phase of the probing waves, degrees [default: 0].
    #[arg(long, allow_hyphen_values = true)]
    pub wave_phase_deg: Option<f64>,
    /// Share of the maximum filter amplitude below which ψ is masked [default: 0.01].
    #[arg(long)]
    pub mask: Option<f64>,
    /// Pixel enlargement of the rasters [default: 8].
    #[arg(long)]
    pub enlarge: Option<u32>,
}

#[derive(Serialize)]
struct PhaseSummary {
    extent: [usize; 3],
    frequencies: usize,
    masked: usize,
    out_of_phase: usize,
    out_of_phase_fraction: f64,
    max_response: f64,
}

pub fn run(args: &PhaseArgs, run: &RunDir) -> CliResult<()> {
    let sim = Simulation::<f64>::default();
    let filter: Volume<f64> = match (args.builtin, &args.filter) {
        (Some(b), None) => match b {
            Builtin::Translation => sim.translation_filter(),
            Builtin::Dilation => sim.dilation_filter(),
            Builtin::Rotation => sim.rotation_filter(),
            Builtin::Occlusion => sim.occlusion_filter()?,
        },
        (None, Some(path)) => {
            require_file(path, "filter volume")?;
            Volume::read_stvl(BufReader::new(File::open(path)?))?
        }
        (Some(_), Some(_)) => return usage("give either --builtin or --filter, not both"),
        (None, None) => return usage("phase needs --builtin or --filter"),
    };
    let mask = args.mask.unwrap_or(POWER_MASK_FRACTION);
    if !(0.0..=1.0).contains(&mask) {
        return usage(format!("--mask {mask} outside [0, 1]"));
    }
    let phase = args.wave_phase_deg.unwrap_or(0.0).to_radians();
    let index = args.index.unwrap_or(0);
    let extent = filter.extent();
    let map = match args.plane.unwrap_or(Plane::Spatial) {
        Plane::Spatial => LatticePlane::Spatial { mt: index }.phase_map_masked(&filter, phase, mask)?,
        Plane::SpaceTime => LatticePlane::SpaceTime { my: index }.phase_map_masked(&filter, phase, mask)?,
        Plane::Full => phase_map_masked(&filter, &full_lattice(extent, phase), mask)?,
    };
    map.write_csv(run.writer("phase_map.csv")?)?;
    if map.shape.is_some() {
        let k = args.enlarge.unwrap_or(8).max(1);
        save_png(&enlarge(&power_image(&map)?, k), &run.file("power.png"))?;
        save_png(&enlarge(&psi_image(&map)?, k), &run.file("psi.png"))?;
        save_png(&enlarge(&response_image(&map)?, k), &run.file("response.png"))?;
    }
    let out_of_phase = map.entries.iter().filter(|e| e.out_of_phase).count();
    run.write_json(
        "summary.json",
        &PhaseSummary {
            extent: [extent.width, extent.height, extent.frames],
            frequencies: map.entries.len(),
            masked: map.entries.iter().filter(|e| e.masked).count(),
            out_of_phase,
            out_of_phase_fraction: map.out_of_phase_fraction(),
            max_response: map.entries.iter().fold(0.0, |a, e| a.max(e.response)),
        },
    )?;
    if args.builtin.is_some() {
        run.write_json("structure.json", &sim.structure()?)?;
    }
    println!(
        "{} frequencies, {out_of_phase} out of phase ({:.1}% of powered) -> {}",
        map.entries.len(),
        100.0 * map.out_of_phase_fraction(),
        run.path.display()
    );
    Ok(())
}
