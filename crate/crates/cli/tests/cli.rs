use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flowprobe::gabor::{GaborParams, TemporalAnchor, CSV_COLUMNS};
use flowprobe::probe::{read_manifest, ResponseProvider, ResponseTable, SyntheticBank};
use flowprobe::stimuli::{Axis, GridSpec, MotionKind, Parameter, Unit};
use flowprobe::Extent;

struct Env {
    dir: tempfile::TempDir,
}

impl Env {
    fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn out(&self) -> PathBuf {
        self.path("runs")
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_flowprobe"))
            .args(args)
            .env("FLOWPROBE_OUT", self.out())
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.run(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8_lossy(&o.stdout).into_owned()
    }

    fn write(&self, name: &str, text: &str) -> String {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p.to_string_lossy().into_owned()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const EXTENT: &str = "33x33x2";

fn planted() -> GaborParams<f64> {
    // sits exactly on a point of small_grid()
    GaborParams {
        spatial_freq: 1.0 / 32.0,
        orientation: 60f64.to_radians(),
        temporal_freq: 0.2,
        phase: 30f64.to_radians(),
        sigma_x: 6.0,
        sigma_y: 8.0,
        sigma_t: 1.0,
        gain: 1.0,
        bias: 0.0,
    }
}

fn bank_csv(filters: &[GaborParams<f64>]) -> String {
    let mut s = CSV_COLUMNS.join(",") + "\n";
    for f in filters {
        s += &(f.csv_row().join(",") + "\n");
    }
    s
}

fn small_grid() -> GridSpec {
    GridSpec::new(
        MotionKind::Translation,
        vec![
            Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 8.0, 24.0, 8.0),
            Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 330.0, 30.0),
            Axis::stepped(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.0, 0.5, 0.1),
            Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 150.0, 30.0),
        ],
    )
    .unwrap()
}

/// Plays the external adapter: answers every manifest stimulus with the bank.
fn respond_to_manifest(manifest: &Path, bank: &SyntheticBank<f64>, out: &Path) {
    let m = read_manifest(BufReader::new(fs::File::open(manifest).unwrap())).unwrap();
    let stimuli: Vec<_> = m.records.iter().map(|r| r.to_stimulus::<f64>().unwrap()).collect();
    let rows = bank.respond_params(&stimuli).unwrap();
    let table = ResponseTable::from_matrix(m.hash().unwrap(), &rows, bank.filter_count()).unwrap();
    table.write_csv_file(out).unwrap();
}

#[test]
fn manifest_export_needs_no_provider_and_is_deterministic() {
    let env = Env::new();
    let a = env.path("a.jsonl");
    let b = env.path("b.jsonl");
    env.ok(&["grid", "--kind", "translation-reduced", "--export-manifest", a.to_str().unwrap()]);
    env.ok(&["grid", "--kind", "translation-reduced", "--export-manifest", b.to_str().unwrap()]);
    let text = fs::read(&a).unwrap();
    assert_eq!(text, fs::read(&b).unwrap());
    let lines = text.iter().filter(|&&c| c == b'\n').count();
    assert_eq!(lines, GridSpec::translation_reduced().len() + 1);
    assert!(!env.out().exists(), "manifest export creates no run directory");
}

#[test]
fn motion_manifest_lists_exclusions_separately() {
    let env = Env::new();
    let m = env.path("rot.jsonl");
    env.ok(&["grid", "--kind", "rotation", "--export-manifest", m.to_str().unwrap()]);
    let ex = fs::read_to_string(env.path("rot_exclusions.csv")).unwrap();
    assert_eq!(ex.lines().count() - 1, 45_360);
}

#[test]
fn usage_errors_exit_2() {
    let env = Env::new();
    assert_eq!(code(&env.run(&["grid", "--kind", "spiral", "--export-manifest", "x.jsonl"])), 2);
    assert_eq!(code(&env.run(&["grid", "--kind", "translation"])), 2);
    assert_eq!(code(&env.run(&["phase"])), 2);
    assert_eq!(code(&env.run(&["phase", "--filter", "missing.stvl"])), 2);
    assert_eq!(code(&env.run(&["aperture", "--oracle", "psychic"])), 2);
    assert_eq!(code(&env.run(&["aperture", "--flow-dir", "nowhere"])), 2);
    assert_eq!(code(&env.run(&["fit", "--responses", "missing.csv"])), 2);
    assert_eq!(code(&env.run(&["bars", "--threads", "0"])), 2);
    assert_eq!(code(&env.run(&["nonsense"])), 2);
}

#[test]
fn grid_run_writes_tables_and_echoes_config_and_refuses_reuse() {
    let env = Env::new();
    let bank = env.write("bank.csv", &bank_csv(&[planted()]));
    let spec = env.write("grid.toml", &small_grid().to_toml());
    let provider = format!("synthetic:{bank}");
    let args = ["grid", "--spec", &spec, "--provider", &provider, "--extent", EXTENT, "--threads", "1"];
    let stdout = env.ok(&args);
    assert!(stdout.contains("1/1 filters active"), "{stdout}");
    let run = env.out().join("grid");
    for f in ["responses.csv", "peaks.csv", "summary.json", "config.toml", "grid.toml"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let peaks = fs::read_to_string(run.join("peaks.csv")).unwrap();
    let row: Vec<&str> = peaks.lines().nth(1).unwrap().split(',').collect();
    // the envelope blurs the spectrum, so only the active flag and orientation are pinned
    assert_eq!((row[1], row[5]), ("true", "60"), "{peaks}");
    let config = fs::read_to_string(run.join("config.toml")).unwrap();
    assert!(config.contains("[grid]") && config.contains(EXTENT) && config.contains("threads = 1"), "{config}");

    let first = fs::read(run.join("responses.csv")).unwrap();
    assert_eq!(code(&env.run(&args)), 2, "existing run directory needs --force");
    let mut forced = args.to_vec();
    forced.push("--force");
    env.ok(&forced);
    assert_eq!(fs::read(run.join("responses.csv")).unwrap(), first, "re-runs are byte-identical");
}

#[test]
fn oracle_fit_recovers_the_planted_filter() {
    let env = Env::new();
    let bank = env.write("bank.csv", &bank_csv(&[planted()]));
    let spec = env.write("grid.toml", &small_grid().to_toml());
    let provider = format!("synthetic:{bank}");
    let stdout = env.ok(&["fit", "--spec", &spec, "--provider", &provider, "--extent", EXTENT]);
    assert!(stdout.contains("fitted 1/1"), "{stdout}");
    let run = env.out().join("fit");
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    let median = summary["fit"]["normalized_cost"][1].as_f64().unwrap();
    assert!(median < 1e-3, "{summary}");
    assert_eq!(summary["bandwidths"]["filters"], 1);
    let fits = fs::read_to_string(run.join("fits.csv")).unwrap();
    let row: Vec<f64> = fits.lines().nth(1).unwrap().split(',').take(11).map(|v| v.parse().unwrap()).collect();
    assert!((row[2] - 1.0 / 32.0).abs() < 1e-6 && (row[3] - 60.0).abs() < 1e-3, "{row:?}");
    assert!(run.join("bandwidths.csv").is_file() && run.join("error_patterns.csv").is_file());
}

#[test]
fn silent_bank_reports_no_active_filters() {
    let env = Env::new();
    let silent = GaborParams { bias: -1e6, ..planted() };
    let bank = env.write("bank.csv", &bank_csv(&[silent]));
    let spec = env.write("grid.toml", &small_grid().to_toml());
    let provider = format!("synthetic:{bank}");
    let stdout = env.ok(&["fit", "--spec", &spec, "--provider", &provider, "--extent", EXTENT]);
    assert!(stdout.contains("no active filters"), "{stdout}");
    let summary = fs::read_to_string(env.out().join("fit/summary.json")).unwrap();
    assert!(summary.contains("\"no active filters\""));
}

/// The external-adapter round trip: manifest out, responses in, for both the
/// gridsearch and the profile sweeps.
#[test]
fn recorded_responses_drive_grid_and_fit() {
    let env = Env::new();
    let extent = Extent::new(33, 33, 2).unwrap();
    let bank = SyntheticBank::from_gabors(&[planted()], extent, TemporalAnchor::FirstFrame).unwrap();
    let spec = env.write("grid.toml", &small_grid().to_toml());

    let manifest = env.path("grid.jsonl");
    env.ok(&["grid", "--spec", &spec, "--extent", EXTENT, "--export-manifest", manifest.to_str().unwrap()]);
    let responses = env.path("grid_responses.csv");
    respond_to_manifest(&manifest, &bank, &responses);
    env.ok(&["grid", "--spec", &spec, "--responses", responses.to_str().unwrap(), "--run", "ingested"]);
    let peaks = fs::read_to_string(env.out().join("ingested/peaks.csv")).unwrap();
    assert!(peaks.lines().nth(1).unwrap().starts_with("0,true,"), "{peaks}");

    let profiles = env.path("profiles.jsonl");
    let r = responses.to_str().unwrap();
    env.ok(&["fit", "--spec", &spec, "--responses", r, "--extent", EXTENT, "--export-profiles", profiles.to_str().unwrap()]);
    let profile_responses = env.path("profile_responses.csv");
    respond_to_manifest(&profiles, &bank, &profile_responses);
    let provider = format!("table:{},{}", profiles.display(), profile_responses.display());
    let stdout = env.ok(&["fit", "--spec", &spec, "--responses", r, "--provider", &provider]);
    assert!(stdout.contains("fitted 1/1"), "{stdout}");

    // a response file recorded for another grid is rejected as a computation error
    let other = env.write("other.toml", &GridSpec::translation_reduced().to_toml());
    let o = env.run(&["grid", "--spec", &other, "--responses", r, "--run", "wrong"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("hash"));
}

#[test]
fn phase_builtin_writes_maps_and_structure() {
    let env = Env::new();
    env.ok(&["phase", "--builtin", "dilation", "--enlarge", "2"]);
    let run = env.out().join("phase");
    for f in ["phase_map.csv", "power.png", "psi.png", "response.png", "summary.json", "structure.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    let csv = fs::read_to_string(run.join("phase_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33 * 33 + 1);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["frequencies"], 33 * 33);
    assert!(summary["masked"].as_u64().unwrap() < 33 * 33);

    env.ok(&["phase", "--builtin", "occlusion", "--plane", "space-time", "--run", "occ"]);
    env.ok(&["phase", "--builtin", "rotation", "--plane", "full", "--run", "full"]);
    assert!(!env.out().join("full/psi.png").exists());
    assert_eq!(code(&env.run(&["phase", "--builtin", "rotation", "--mask", "2", "--run", "bad"])), 2);
}

#[test]
fn aperture_oracles_and_flow_directories() {
    let env = Env::new();
    env.ok(&["aperture", "--oracle", "ground-truth", "--scales", "64,128,256", "--run", "gt"]);
    let sweep = fs::read_to_string(env.out().join("gt/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 3 * 3);
    for l in sweep.lines().skip(1) {
        let epe: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(epe < 1e-3, "{l}");
    }

    env.ok(&["aperture", "--oracle", "end-cap:100", "--scales", "40:400:40", "--run", "cap"]);
    let knees: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(env.out().join("cap/knees.json")).unwrap()).unwrap();
    let f2 = knees["breakdown_scale"]["f2"].as_u64().unwrap();
    assert!((200..=240).contains(&f2), "{knees}");

    // a flow directory missing one level file names it and fails computationally
    let flows = env.path("flows");
    fs::create_dir(&flows).unwrap();
    let o = env.run(&["aperture", "--flow-dir", flows.to_str().unwrap(), "--scales", "64", "--run", "net"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("64"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn config_file_fills_unset_flags() {
    let env = Env::new();
    let cfg = env.write("run.toml", "[aperture]\noracle = \"zero\"\nscales = \"64,128\"\nmagnitude = 32.0\n");
    env.ok(&["--config", &cfg, "aperture", "--oracle", "ground-truth"]);
    let echoed = fs::read_to_string(env.out().join("aperture/config.toml")).unwrap();
    assert!(echoed.contains("ground-truth") && echoed.contains("64,128") && echoed.contains("32"), "{echoed}");
    let bad = env.write("bad.toml", "[aperture]\nmagnitude = \"fast\"\n");
    assert_eq!(code(&env.run(&["--config", &bad, "aperture", "--run", "b"])), 2);
}

#[test]
fn bars_export_frames_ground_truth_and_index() {
    let env = Env::new();
    env.ok(&["bars", "--scales", "64"]);
    let run = env.out().join("bars");
    let index: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("index.json")).unwrap()).unwrap();
    assert_eq!(index.as_array().unwrap().len(), 2);
    for e in index.as_array().unwrap() {
        assert!(run.join(e["gt_flow"].as_str().unwrap()).is_file());
        assert!(run.join(e["frames"][0].as_str().unwrap()).is_file());
    }
}
