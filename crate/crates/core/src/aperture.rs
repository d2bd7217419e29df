//! Aperture-problem harness: moving-bar cases, multi-resolution flow maps in
//! Middlebury `.flo` format, and center-of-bar end-point error sweeps.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::stimuli::{default_bar_width, gen_bar_sequence, BarDirection, BarSequence, APERTURE_CANVAS};
use crate::volume::Extent;

const FLO_MAGIC: &[u8; 4] = b"PIEH";
/// Dimensions above this are treated as a corrupt header.
const FLO_MAX_SIDE: i32 = 1 << 16;

/// Bar motion magnitude, pixels per frame pair.
pub const DEFAULT_MAGNITUDE: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowLevel {
    F6,
    F4,
    F2,
}

impl FlowLevel {
    pub const ALL: [FlowLevel; 3] = [FlowLevel::F6, FlowLevel::F4, FlowLevel::F2];

    /// Downsampling factor relative to the input.
    pub fn factor(&self) -> usize {
        match self {
            FlowLevel::F6 => 64,
            FlowLevel::F4 => 16,
            FlowLevel::F2 => 4,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FlowLevel::F6 => "f6",
            FlowLevel::F4 => "f4",
            FlowLevel::F2 => "f2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.as_str() == s)
    }

    /// Map size for an input of `width × height` pixels.
    pub fn dims(&self, width: usize, height: usize) -> (usize, usize) {
        let f = self.factor();
        (width.div_ceil(f), height.div_ceil(f))
    }
}

/// Dense `(u, v)` displacements in full-resolution pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 2]>,
}

impl FlowMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![[0.0; 2]; width * height],
        }
    }

    pub fn filled(width: usize, height: usize, f: impl Fn(usize, usize) -> [f32; 2]) -> Self {
        let data = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, data }
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[y * self.width + x]
    }

    pub fn write_flo<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FLO_MAGIC)?;
        w.write_all(&(self.width as i32).to_le_bytes())?;
        w.write_all(&(self.height as i32).to_le_bytes())?;
        for [u, v] in &self.data {
            w.write_all(&u.to_le_bytes())?;
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_flo_file(&self, path: &Path) -> Result<()> {
        self.write_flo(BufWriter::new(File::create(path)?))
    }

    /// Parses a `.flo` stream; `path` only labels errors.
    pub fn read_flo<R: Read>(mut r: R, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::InvalidFlo {
            path: path.to_path_buf(),
            reason,
        };
        let mut head = [0u8; 12];
        r.read_exact(&mut head).map_err(|_| bad("truncated header".into()))?;
        if &head[..4] != FLO_MAGIC {
            return Err(bad("bad magic, expected PIEH".into()));
        }
        let width = i32::from_le_bytes(head[4..8].try_into().unwrap());
        let height = i32::from_le_bytes(head[8..12].try_into().unwrap());
        if width <= 0 || height <= 0 || width > FLO_MAX_SIDE || height > FLO_MAX_SIDE {
            return Err(bad(format!("implausible size {width}x{height}")));
        }
        let (width, height) = (width as usize, height as usize);
        let mut bytes = vec![0u8; width * height * 8];
        r.read_exact(&mut bytes)
            .map_err(|_| bad(format!("expected {} bytes of flow data", bytes.len())))?;
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(bad("trailing bytes after flow data".into()));
        }
        let mut data = Vec::with_capacity(width * height);
        for c in bytes.chunks_exact(8) {
            let u = f32::from_le_bytes(c[..4].try_into().unwrap());
            let v = f32::from_le_bytes(c[4..].try_into().unwrap());
            if !u.is_finite() || !v.is_finite() {
                return Err(bad(format!("non-finite flow at index {}", data.len())));
            }
            data.push([u, v]);
        }
        Ok(Self { width, height, data })
    }

    pub fn read_flo_file(path: &Path) -> Result<Self> {
        Self::read_flo(BufReader::new(File::open(path)?), path)
    }
}

/// Euclidean end-point error.
pub fn epe(est: [f64; 2], gt: [f64; 2]) -> f64 {
    (est[0] - gt[0]).hypot(est[1] - gt[1])
}

/// EPE at the map cell containing the bar's center pixel (floor of center / factor).
pub fn center_error<T>(flow: &FlowMap, level: FlowLevel, bar: &BarSequence<T>) -> Result<f64> {
    let f = level.factor() as i64;
    let (cx, cy) = (bar.center.0.div_euclid(f), bar.center.1.div_euclid(f));
    if cx < 0 || cy < 0 || cx >= flow.width as i64 || cy >= flow.height as i64 {
        return Err(Error::OutOfBounds {
            x: cx,
            y: cy,
            width: flow.width,
            height: flow.height,
        });
    }
    let [u, v] = flow.get(cx as usize, cy as usize);
    Ok(epe([u as f64, v as f64], [bar.motion.0, bar.motion.1]))
}

/// Canvas and motion magnitude shared by every case of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureSetup {
    pub canvas: Extent,
    pub magnitude: f64,
}

impl Default for ApertureSetup {
    fn default() -> Self {
        Self {
            canvas: Extent::canvas(APERTURE_CANVAS.0, APERTURE_CANVAS.1, 2).expect("valid canvas"),
            magnitude: DEFAULT_MAGNITUDE,
        }
    }
}

impl ApertureSetup {
    /// The bar pair for one case, at the default width for its scale.
    pub fn bar(&self, scale: u32, direction: BarDirection) -> Result<BarSequence<f32>> {
        let s = scale as f64;
        gen_bar_sequence(s, default_bar_width(s), direction.motion(self.magnitude), self.canvas)
    }

    pub fn level_dims(&self, level: FlowLevel) -> (usize, usize) {
        level.dims(self.canvas.width, self.canvas.height)
    }
}

/// File name of one case's flow map inside a flow directory.
pub fn flo_file_name(scale: u32, direction: BarDirection, level: FlowLevel) -> String {
    format!("bar_{scale}_{}_{}.flo", direction.as_str(), level.as_str())
}

/// Anything able to supply the flow map of a bar case at a level.
pub trait FlowSource: Sync {
    fn flow(&self, setup: &ApertureSetup, bar: &BarSequence<f32>, scale: u32, direction: BarDirection, level: FlowLevel) -> Result<FlowMap>;
}

fn cells_of(setup: &ApertureSetup, level: FlowLevel, value: impl Fn(usize, usize) -> [f32; 2]) -> FlowMap {
    let (w, h) = setup.level_dims(level);
    FlowMap::filled(w, h, value)
}

fn motion32(bar: &BarSequence<f32>) -> [f32; 2] {
    [bar.motion.0 as f32, bar.motion.1 as f32]
}

/// Ground truth at every cell that contains a bar pixel, zero elsewhere.
pub struct GroundTruthFlow;

impl FlowSource for GroundTruthFlow {
    fn flow(&self, setup: &ApertureSetup, bar: &BarSequence<f32>, _: u32, _: BarDirection, level: FlowLevel) -> Result<FlowMap> {
        let f = level.factor();
        let gt = &bar.gt_flow;
        Ok(cells_of(setup, level, |cx, cy| {
            let hit = (cy * f..((cy + 1) * f).min(gt.height))
                .any(|y| (cx * f..((cx + 1) * f).min(gt.width)).any(|x| gt.get(x, y) != [0.0, 0.0]));
            if hit {
                motion32(bar)
            } else {
                [0.0, 0.0]
            }
        }))
    }
}

/// Flow that never moves.
pub struct ZeroFlow;

impl FlowSource for ZeroFlow {
    fn flow(&self, setup: &ApertureSetup, _: &BarSequence<f32>, _: u32, _: BarDirection, level: FlowLevel) -> Result<FlowMap> {
        Ok(cells_of(setup, level, |_, _| [0.0, 0.0]))
    }
}

/// Resolves motion only near the bar's end caps: a cell carries the true
/// flow when its center lies within `rho` of either end of the bar, else zero.
/// Emulates a network whose receptive field reaches `2ρ` along the bar.
pub struct EndCapOracle {
    pub rho: f64,
}

impl FlowSource for EndCapOracle {
    fn flow(&self, setup: &ApertureSetup, bar: &BarSequence<f32>, _: u32, _: BarDirection, level: FlowLevel) -> Result<FlowMap> {
        let f = level.factor() as f64;
        let ends = bar.end_points();
        Ok(cells_of(setup, level, |cx, cy| {
            let p = ((cx as f64 + 0.5) * f - 0.5, (cy as f64 + 0.5) * f - 0.5);
            let near = ends.iter().any(|e| (p.0 - e.0).hypot(p.1 - e.1) <= self.rho);
            if near {
                motion32(bar)
            } else {
                [0.0, 0.0]
            }
        }))
    }
}

/// `.flo` files named by [`flo_file_name`] in one directory.
pub struct FloDirectory {
    pub root: PathBuf,
}

impl FlowSource for FloDirectory {
    fn flow(&self, setup: &ApertureSetup, _: &BarSequence<f32>, scale: u32, direction: BarDirection, level: FlowLevel) -> Result<FlowMap> {
        let path = self.root.join(flo_file_name(scale, direction, level));
        if !path.is_file() {
            return Err(Error::MissingFlow {
                scale,
                direction: direction.as_str().into(),
                level: level.as_str().into(),
            });
        }
        let map = FlowMap::read_flo_file(&path)?;
        let (w, h) = setup.level_dims(level);
        if (map.width, map.height) != (w, h) {
            return Err(Error::InvalidFlo {
                path,
                reason: format!("level {} expects {w}x{h}, file is {}x{}", level.as_str(), map.width, map.height),
            });
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApertureMeasurement {
    pub scale: u32,
    pub direction: BarDirection,
    pub level: FlowLevel,
    pub epe: f64,
}

/// Direction-averaged EPE of one (scale, level), per-direction values kept.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApertureRow {
    pub provider: String,
    pub scale: u32,
    pub level: FlowLevel,
    pub epe_up_right: Option<f64>,
    pub epe_down_left: Option<f64>,
    pub epe: f64,
}

/// One measurement per (scale, direction, level), in that nesting order.
pub fn run_sweep<S: FlowSource + ?Sized>(
    setup: &ApertureSetup,
    scales: &[u32],
    directions: &[BarDirection],
    source: &S,
) -> Result<Vec<ApertureMeasurement>> {
    let cases: Vec<(u32, BarDirection)> = scales
        .iter()
        .flat_map(|&s| directions.iter().map(move |&d| (s, d)))
        .collect();
    let nested = cases
        .par_iter()
        .map(|&(scale, direction)| {
            let bar = setup.bar(scale, direction)?;
            FlowLevel::ALL
                .iter()
                .map(|&level| {
                    let map = source.flow(setup, &bar, scale, direction, level)?;
                    Ok(ApertureMeasurement {
                        scale,
                        direction,
                        level,
                        epe: center_error(&map, level, &bar)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(nested.into_iter().flatten().collect())
}

/// Averages over directions; rows ordered by scale, then level.
pub fn summarize(provider: &str, measurements: &[ApertureMeasurement]) -> Vec<ApertureRow> {
    let mut keys: Vec<(u32, FlowLevel)> = measurements.iter().map(|m| (m.scale, m.level)).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(scale, level)| {
            let pick = |d: BarDirection| {
                measurements
                    .iter()
                    .find(|m| m.scale == scale && m.level == level && m.direction == d)
                    .map(|m| m.epe)
            };
            let (a, b) = (pick(BarDirection::UpRight), pick(BarDirection::DownLeft));
            let present: Vec<f64> = [a, b].into_iter().flatten().collect();
            ApertureRow {
                provider: provider.to_string(),
                scale,
                level,
                epe_up_right: a,
                epe_down_left: b,
                epe: present.iter().sum::<f64>() / present.len() as f64,
            }
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(rows: &[ApertureRow], mut w: W) -> Result<()> {
    writeln!(w, "provider,scale_px,level,epe_up_right,epe_down_left,epe_mean")?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.provider,
            r.scale,
            r.level.as_str(),
            opt(r.epe_up_right),
            opt(r.epe_down_left),
            r.epe
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Smallest scale at `level` whose averaged EPE reaches `threshold`.
pub fn breakdown_scale(rows: &[ApertureRow], level: FlowLevel, threshold: f64) -> Option<u32> {
    rows.iter()
        .filter(|r| r.level == level && r.epe >= threshold)
        .map(|r| r.scale)
        .min()
}

/// Writes each case's frames as 8-bit PNGs, its ground truth as a
/// full-resolution `.flo`, and an `index.json` listing every case.
pub fn export_bar_cases(setup: &ApertureSetup, scales: &[u32], dir: &Path) -> Result<usize> {
    #[derive(Serialize)]
    struct Entry {
        scale: u32,
        direction: BarDirection,
        width_px: f64,
        motion: [f64; 2],
        center: [i64; 2],
        frames: [String; 2],
        gt_flow: String,
    }
    std::fs::create_dir_all(dir)?;
    let (w, h) = (setup.canvas.width as u32, setup.canvas.height as u32);
    let mut index = Vec::new();
    for &scale in scales {
        for d in BarDirection::ALL {
            let bar = setup.bar(scale, d)?;
            let stem = format!("bar_{scale}_{}", d.as_str());
            let mut frames = [String::new(), String::new()];
            for (t, name) in frames.iter_mut().enumerate() {
                *name = format!("{stem}_frame{}.png", t + 1);
                let px: Vec<u8> = bar.frames.frame(t).iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
                image::GrayImage::from_raw(w, h, px)
                    .expect("frame size matches canvas")
                    .save(dir.join(&*name))?;
            }
            let gt = FlowMap {
                width: bar.gt_flow.width,
                height: bar.gt_flow.height,
                data: bar.gt_flow.data.iter().map(|&[u, v]| [u as f32, v as f32]).collect(),
            };
            let gt_name = format!("{stem}_gt.flo");
            gt.write_flo_file(&dir.join(&gt_name))?;
            index.push(Entry {
                scale,
                direction: d,
                width_px: bar.width,
                motion: [bar.motion.0, bar.motion.1],
                center: [bar.center.0, bar.center.1],
                frames,
                gt_flow: gt_name,
            });
        }
    }
    serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join("index.json"))?), &index)?;
    Ok(index.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn setup() -> ApertureSetup {
        ApertureSetup::default()
    }

    #[test]
    fn epe_examples() {
        assert_eq!(epe([1.0, 2.0], [1.0, 2.0]), 0.0);
        let c = 64.0 / 2f64.sqrt();
        assert!((epe([0.0, 0.0], [c, -c]) - 64.0).abs() < 1e-12);
        assert!((epe([4.0, 6.0], [1.0, 2.0]) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn level_dims_for_the_network_input() {
        let s = setup();
        assert_eq!(s.level_dims(FlowLevel::F6), (8, 6));
        assert_eq!(s.level_dims(FlowLevel::F4), (32, 24));
        assert_eq!(s.level_dims(FlowLevel::F2), (128, 96));
        assert_eq!(FlowLevel::parse("f4"), Some(FlowLevel::F4));
        assert_eq!(FlowLevel::parse("f3"), None);
    }

    #[test]
    fn flo_round_trip_and_rejections() {
        let m = FlowMap::filled(3, 2, |x, y| [x as f32 + 0.5, -(y as f32)]);
        let mut bytes = Vec::new();
        m.write_flo(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"PIEH");
        assert_eq!(bytes.len(), 12 + 3 * 2 * 8);
        let p = Path::new("x.flo");
        assert_eq!(FlowMap::read_flo(&bytes[..], p).unwrap(), m);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(FlowMap::read_flo(&bad[..], p), Err(Error::InvalidFlo { .. })));
        assert!(FlowMap::read_flo(&bytes[..bytes.len() - 1], p).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(FlowMap::read_flo(&long[..], p).is_err());
        let mut nan = bytes.clone();
        nan[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(FlowMap::read_flo(&nan[..], p).is_err());
    }

    #[test]
    fn center_error_reference_sources() {
        let s = setup();
        let bar = s.bar(120, BarDirection::UpRight).unwrap();
        for level in FlowLevel::ALL {
            let gt = GroundTruthFlow.flow(&s, &bar, 120, BarDirection::UpRight, level).unwrap();
            assert!(center_error(&gt, level, &bar).unwrap() < 1e-4);
            let zero = ZeroFlow.flow(&s, &bar, 120, BarDirection::UpRight, level).unwrap();
            assert!((center_error(&zero, level, &bar).unwrap() - 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn center_outside_map_is_an_error() {
        let bar = setup().bar(64, BarDirection::DownLeft).unwrap();
        let tiny = FlowMap::zeros(1, 1);
        assert!(matches!(center_error(&tiny, FlowLevel::F2, &bar), Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn sweep_counts_and_averaging() {
        let s = setup();
        let m = run_sweep(&s, &[64, 128], &BarDirection::ALL, &GroundTruthFlow).unwrap();
        assert_eq!(m.len(), 12);
        let rows = summarize("gt", &m);
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.epe < 1e-4 && r.epe_up_right.is_some() && r.epe_down_left.is_some()));
    }

    #[test]
    fn identical_sources_give_identical_curves() {
        let s = setup();
        let a = summarize("rf383", &run_sweep(&s, &[96, 200], &BarDirection::ALL, &EndCapOracle { rho: 80.0 }).unwrap());
        let b = summarize("rf255", &run_sweep(&s, &[96, 200], &BarDirection::ALL, &EndCapOracle { rho: 80.0 }).unwrap());
        let strip = |r: &[ApertureRow]| r.iter().map(|x| (x.scale, x.level, x.epe.to_bits())).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn end_cap_oracle_breaks_down_past_twice_rho() {
        let s = setup();
        let scales: Vec<u32> = (40..=360).step_by(8).collect();
        let rows = summarize("oracle", &run_sweep(&s, &scales, &BarDirection::ALL, &EndCapOracle { rho: 100.0 }).unwrap());
        for level in FlowLevel::ALL {
            let knee = breakdown_scale(&rows, level, 32.0).unwrap() as f64;
            assert!((knee - 200.0).abs() <= level.factor() as f64 + 8.0, "{level:?}: {knee}");
            for r in rows.iter().filter(|r| r.level == level) {
                assert!(r.epe < 1e-4 || (r.epe - 64.0).abs() < 1e-4, "{r:?}");
            }
        }
    }

    #[test]
    fn flo_directory_reports_missing_and_misfit_files() {
        let s = setup();
        let dir = tempfile::tempdir().unwrap();
        let src = FloDirectory { root: dir.path().to_path_buf() };
        let err = run_sweep(&s, &[64], &[BarDirection::UpRight], &src).unwrap_err();
        assert!(matches!(err, Error::MissingFlow { scale: 64, ref level, .. } if level == "f6"), "{err}");

        for level in FlowLevel::ALL {
            let bar = s.bar(64, BarDirection::UpRight).unwrap();
            GroundTruthFlow
                .flow(&s, &bar, 64, BarDirection::UpRight, level)
                .unwrap()
                .write_flo_file(&dir.path().join(flo_file_name(64, BarDirection::UpRight, level)))
                .unwrap();
        }
        let m = run_sweep(&s, &[64], &[BarDirection::UpRight], &src).unwrap();
        assert!(m.iter().all(|x| x.epe < 1e-4));

        FlowMap::zeros(2, 2)
            .write_flo_file(&dir.path().join(flo_file_name(64, BarDirection::UpRight, FlowLevel::F4)))
            .unwrap();
        assert!(matches!(
            run_sweep(&s, &[64], &[BarDirection::UpRight], &src),
            Err(Error::InvalidFlo { .. })
        ));
    }

    #[test]
    fn bar_cases_export() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(export_bar_cases(&setup(), &[64, 96], dir.path()).unwrap(), 4);
        let gt = FlowMap::read_flo_file(&dir.path().join("bar_64_up_right_gt.flo")).unwrap();
        assert_eq!((gt.width, gt.height), APERTURE_CANVAS);
        let img = image::open(dir.path().join("bar_96_down_left_frame2.png")).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (512, 384));
        assert!(img.pixels().any(|p| p.0[0] == 255));
        let index: serde_json::Value =
            serde_json::from_reader(File::open(dir.path().join("index.json")).unwrap()).unwrap();
        assert_eq!(index.as_array().unwrap().len(), 4);
    }

    proptest! {
        #[test]
        fn center_error_invariant_under_common_offset(du in -50.0f32..50.0, dv in -50.0f32..50.0, ex in -5.0f32..5.0, ey in -5.0f32..5.0) {
            let s = setup();
            let mut bar = s.bar(100, BarDirection::UpRight).unwrap();
            let est = FlowMap::filled(8, 6, |_, _| [bar.motion.0 as f32 + ex, bar.motion.1 as f32 + ey]);
            let base = center_error(&est, FlowLevel::F6, &bar).unwrap();
            let shifted = FlowMap::filled(8, 6, |x, y| { let [u, v] = est.get(x, y); [u + du, v + dv] });
            bar.motion = (bar.motion.0 + du as f64, bar.motion.1 + dv as f64);
            prop_assert!((center_error(&shifted, FlowLevel::F6, &bar).unwrap() - base).abs() < 1e-3);
        }
    }
}
