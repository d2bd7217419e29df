//! Run directories, error classes and config resolution. Flags given on the
//! command line override the matching section of a TOML config file; the
//! resolved settings are echoed into every run directory.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flowprobe::gabor::TemporalAnchor;
use flowprobe::stimuli::GridSpec;
use flowprobe::Extent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or missing inputs; exit code 2.
    Usage(String),
    /// A module failed while computing; exit code 1.
    Compute(flowprobe::Error),
    /// Partial failure after outputs were written; exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Compute(e) => write!(f, "error: {e}"),
            CliError::Failed(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<flowprobe::Error> for CliError {
    fn from(e: flowprobe::Error) -> Self {
        CliError::Compute(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Compute(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Compute(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

/// An input that must exist before anything runs.
pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        usage(format!("{what} {} does not exist", path.display()))
    }
}

/// The `[section]` table of a config file, if the file was given.
pub fn load_section(path: Option<&Path>, section: &str) -> CliResult<Option<toml::Table>> {
    let Some(path) = path else { return Ok(None) };
    require_file(path, "config file")?;
    let text = fs::read_to_string(path)?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    match table.remove(section) {
        None => Ok(None),
        Some(toml::Value::Table(t)) => Ok(Some(t)),
        Some(_) => usage(format!("config {}: [{section}] must be a table", path.display())),
    }
}

/// Flags override the file; unset flags (`None`) fall through to it.
pub fn resolve<A: Serialize + DeserializeOwned>(cli: &A, file: Option<toml::Table>) -> CliResult<A> {
    let mut merged = file.unwrap_or_default();
    let flags = toml::Table::try_from(cli).map_err(|e| CliError::Usage(e.to_string()))?;
    merged.extend(flags);
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("config: {e}")))
}

/// `WxHxT`, e.g. `97x97x2`.
pub fn parse_extent(s: &str) -> CliResult<Extent> {
    let dims: Vec<usize> = s.split('x').filter_map(|d| d.trim().parse().ok()).collect();
    let [w, h, t] = dims[..] else {
        return usage(format!("extent `{s}` is not of the form WxHxT"));
    };
    Extent::new(w, h, t).map_err(|e| CliError::Usage(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Translation,
    /// λ/2 step 32 px, θ step 20°, f_t step 0.02, φ step 20°
    TranslationReduced,
    Dilation,
    Rotation,
}

impl GridKind {
    pub fn spec(self) -> GridSpec {
        match self {
            GridKind::Translation => GridSpec::translation_table(),
            GridKind::TranslationReduced => GridSpec::translation_reduced(),
            GridKind::Dilation => GridSpec::dilation_table(),
            GridKind::Rotation => GridSpec::rotation_table(),
        }
    }
}

/// A grid from its TOML file when given, else the named table.
pub fn grid_spec(file: Option<&Path>, kind: Option<GridKind>) -> CliResult<GridSpec> {
    match (file, kind) {
        (Some(path), _) => {
            require_file(path, "grid spec")?;
            GridSpec::from_toml(&fs::read_to_string(path)?).map_err(|e| CliError::Usage(e.to_string()))
        }
        (None, Some(kind)) => Ok(kind.spec()),
        (None, None) => usage("give --kind or --spec"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorArg {
    FirstFrame,
    Midpoint,
}

impl From<AnchorArg> for TemporalAnchor {
    fn from(a: AnchorArg) -> Self {
        match a {
            AnchorArg::FirstFrame => TemporalAnchor::FirstFrame,
            AnchorArg::Midpoint => TemporalAnchor::Midpoint,
        }
    }
}

/// Scales as `start:stop:step` or a comma list.
pub fn parse_scales(s: &str) -> CliResult<Vec<u32>> {
    let bad = || CliError::Usage(format!("scales `{s}` must be start:stop:step or a comma list"));
    let out: Vec<u32> = if s.contains(':') {
        let p: Vec<u32> = s.split(':').map(|v| v.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?;
        let [a, b, step] = p[..] else { return Err(bad()) };
        if step == 0 || a > b {
            return Err(bad());
        }
        (a..=b).step_by(step as usize).collect()
    } else {
        s.split(',').map(|v| v.trim().parse().map_err(|_| bad())).collect::<CliResult<_>>()?
    };
    if out.is_empty() || out.contains(&0) {
        return Err(bad());
    }
    Ok(out)
}

/// One directory per run. An existing non-empty directory is refused unless
/// `--force`, which clears it first.
pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path, name: &str, force: bool) -> CliResult<Self> {
        let path = root.join(name);
        if path.exists() {
            let occupied = fs::read_dir(&path)?.next().is_some();
            if occupied && !force {
                return usage(format!("run directory {} exists; pass --force to replace it", path.display()));
            }
            if occupied {
                fs::remove_dir_all(&path)?;
            }
        }
        fs::create_dir_all(&path)?;
        Ok(Self { path })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn writer(&self, name: &str) -> CliResult<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.file(name))?))
    }

    pub fn write_json<V: Serialize>(&self, name: &str, value: &V) -> CliResult<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// `config.toml` holding the fully resolved settings under `[command]`.
    pub fn echo_config<A: Serialize>(&self, command: &str, global: &GlobalSettings, args: &A) -> CliResult<()> {
        let mut doc = toml::Table::new();
        doc.insert("run".into(), toml::Value::try_from(global).map_err(|e| CliError::Usage(e.to_string()))?);
        doc.insert(command.into(), toml::Value::try_from(args).map_err(|e| CliError::Usage(e.to_string()))?);
        fs::write(self.file("config.toml"), toml::to_string_pretty(&doc).map_err(|e| CliError::Usage(e.to_string()))?)?;
        Ok(())
    }
}

/// Settings shared by every command, echoed alongside the command's own.
#[derive(Debug, Clone, Serialize)]
pub struct GlobalSettings {
    pub out: PathBuf,
    pub run: String,
    pub threads: usize,
    pub flowprobe_version: &'static str,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    struct Args {
        a: Option<u32>,
        b: Option<String>,
    }

    #[test]
    fn flags_override_file_and_unset_flags_fall_through() {
        let file: toml::Table = toml::from_str("a = 1\nb = \"file\"").unwrap();
        let cli = Args { a: Some(7), b: None };
        assert_eq!(resolve(&cli, Some(file)).unwrap(), Args { a: Some(7), b: Some("file".into()) });
        assert_eq!(resolve(&Args::default(), None).unwrap(), Args::default());
    }

    #[test]
    fn unknown_types_in_config_are_usage_errors() {
        let file: toml::Table = toml::from_str("a = \"x\"").unwrap();
        assert!(matches!(resolve(&Args::default(), Some(file)), Err(CliError::Usage(_))));
    }

    #[test]
    fn extent_and_scale_parsing() {
        assert_eq!(parse_extent("97x97x2").unwrap().dims(), (97, 97, 2));
        assert!(parse_extent("97x97").is_err());
        assert_eq!(parse_scales("10:30:10").unwrap(), vec![10, 20, 30]);
        assert_eq!(parse_scales("64, 128").unwrap(), vec![64, 128]);
        for bad in ["", "1:2", "5:1:1", "0,4", "a,b", "1:9:0"] {
            assert!(parse_scales(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn run_dir_refuses_to_overwrite_without_force() {
        let root = tempfile::tempdir().unwrap();
        let run = RunDir::create(root.path(), "r", false).unwrap();
        fs::write(run.file("x"), "1").unwrap();
        assert!(matches!(RunDir::create(root.path(), "r", false), Err(CliError::Usage(_))));
        let again = RunDir::create(root.path(), "r", true).unwrap();
        assert!(!again.file("x").exists());
    }
}
