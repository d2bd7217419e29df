//! JSON-lines stimulus manifests consumed by external response adapters.
//!
//! The first line is a header record carrying the grid hash; every further
//! line describes one stimulus with its parameters in external units.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stimuli::{DilatingWave, GridSpec, MotionKind, RotatingWave, Stimulus, TranslatingWave};
use crate::volume::Extent;

pub const MANIFEST_FORMAT: &str = "flowprobe-manifest/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    /// 16 lowercase hex digits.
    pub grid_spec_hash: String,
    pub motion_kind: MotionKind,
    pub count: usize,
    /// `[width, height, frames]`
    pub extent: [usize; 3],
}

/// One stimulus. Exactly one of the three motion fields is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub stimulus_id: usize,
    pub motion_kind: MotionKind,
    pub half_wavelength_px: f64,
    pub orientation_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_frequency_cycles_per_frame: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_velocity_rad_per_frame: Option<f64>,
    pub phase_deg: f64,
    pub extent: [usize; 3],
}

impl ManifestRecord {
    pub fn from_stimulus<T: Scalar>(stimulus_id: usize, s: &Stimulus<T>, extent: Extent) -> Self {
        let half = 1.0 / (2.0 * s.spatial_freq().as_f64());
        let phase_deg = s.phase().as_f64().to_degrees();
        let extent = [extent.width, extent.height, extent.frames];
        let mut r = ManifestRecord {
            stimulus_id,
            motion_kind: MotionKind::Translation,
            half_wavelength_px: half,
            orientation_deg: 0.0,
            temporal_frequency_cycles_per_frame: None,
            scale: None,
            angular_velocity_rad_per_frame: None,
            phase_deg,
            extent,
        };
        match s {
            Stimulus::Translating(p) => {
                r.orientation_deg = p.orientation.as_f64().to_degrees();
                r.temporal_frequency_cycles_per_frame = Some(p.temporal_freq.as_f64());
            }
            Stimulus::Dilating(p) => {
                r.motion_kind = MotionKind::Dilation;
                r.orientation_deg = p.orientation.as_f64().to_degrees();
                r.scale = Some(p.scale.as_f64());
            }
            Stimulus::Rotating(p) => {
                r.motion_kind = MotionKind::Rotation;
                r.orientation_deg = p.orientation.as_f64().to_degrees();
                r.angular_velocity_rad_per_frame = Some(p.angular_velocity.as_f64());
            }
        }
        r
    }

    pub fn to_stimulus<T: Scalar>(&self) -> Result<Stimulus<T>> {
        let f = T::lit(1.0 / (2.0 * self.half_wavelength_px));
        let th = T::lit(self.orientation_deg.to_radians());
        let ph = T::lit(self.phase_deg.to_radians());
        let missing = |what: &str| Error::InvalidParameter(format!("stimulus {} lacks {what}", self.stimulus_id));
        Ok(match self.motion_kind {
            MotionKind::Translation => {
                let ft = self.temporal_frequency_cycles_per_frame.ok_or_else(|| missing("a temporal frequency"))?;
                Stimulus::Translating(TranslatingWave::new(f, th, T::lit(ft), ph)?)
            }
            MotionKind::Dilation => {
                let h = self.scale.ok_or_else(|| missing("a scale"))?;
                Stimulus::Dilating(DilatingWave::new(f, th, T::lit(h), ph)?)
            }
            MotionKind::Rotation => {
                let w = self.angular_velocity_rad_per_frame.ok_or_else(|| missing("an angular velocity"))?;
                Stimulus::Rotating(RotatingWave::new(f, th, T::lit(w), ph)?)
            }
        })
    }

    /// Bit pattern of every numeric field, for exact lookups.
    pub(crate) fn key(&self) -> [u64; 5] {
        let motion = self
            .temporal_frequency_cycles_per_frame
            .or(self.scale)
            .or(self.angular_velocity_rad_per_frame)
            .unwrap_or(f64::NAN);
        [
            self.motion_kind as u64,
            self.half_wavelength_px.to_bits(),
            self.orientation_deg.to_bits(),
            motion.to_bits(),
            self.phase_deg.to_bits(),
        ]
    }
}

fn write_line<W: Write, V: Serialize>(w: &mut W, v: &V) -> Result<()> {
    serde_json::to_writer(&mut *w, v)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// Writes the manifest of every stimulus in `spec`.
pub fn export_manifest<W: Write>(spec: &GridSpec, extent: Extent, mut w: W) -> Result<()> {
    spec.validate()?;
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        grid_spec_hash: format!("{:016x}", spec.hash()),
        motion_kind: spec.motion_kind,
        count: spec.len(),
        extent: [extent.width, extent.height, extent.frames],
    };
    write_line(&mut w, &header)?;
    for id in 0..spec.len() {
        let s = spec.stimulus::<f64>(id)?;
        write_line(&mut w, &ManifestRecord::from_stimulus(id, &s, extent))?;
    }
    w.flush()?;
    Ok(())
}

/// Hash identifying an explicit stimulus list (used where no grid exists,
/// e.g. profile sweeps).
pub fn stimulus_list_hash(records: &[ManifestRecord]) -> u64 {
    let mut bytes = Vec::with_capacity(records.len() * 48);
    for r in records {
        for k in r.key() {
            bytes.extend_from_slice(&k.to_le_bytes());
        }
    }
    crate::stimuli::fnv1a(&bytes)
}

/// Writes a manifest for an explicit list of stimuli; ids are list positions.
pub fn export_stimulus_manifest<T: Scalar, W: Write>(
    stimuli: &[Stimulus<T>],
    extent: Extent,
    mut w: W,
) -> Result<u64> {
    let records: Vec<ManifestRecord> = stimuli
        .iter()
        .enumerate()
        .map(|(i, s)| ManifestRecord::from_stimulus(i, s, extent))
        .collect();
    let hash = stimulus_list_hash(&records);
    let kind = records.first().map_or(MotionKind::Translation, |r| r.motion_kind);
    let header = ManifestHeader {
        format: MANIFEST_FORMAT.into(),
        grid_spec_hash: format!("{hash:016x}"),
        motion_kind: kind,
        count: records.len(),
        extent: [extent.width, extent.height, extent.frames],
    };
    write_line(&mut w, &header)?;
    for r in &records {
        write_line(&mut w, r)?;
    }
    w.flush()?;
    Ok(hash)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn hash(&self) -> Result<u64> {
        u64::from_str_radix(&self.header.grid_spec_hash, 16)
            .map_err(|_| Error::Parse { line: 1, message: "grid_spec_hash is not hex".into() })
    }
}

pub fn read_manifest<R: BufRead>(r: R) -> Result<Manifest> {
    let mut lines = r.lines();
    let first = lines.next().ok_or(Error::Parse { line: 1, message: "empty manifest".into() })??;
    let header: ManifestHeader =
        serde_json::from_str(&first).map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
    if header.format != MANIFEST_FORMAT {
        return Err(Error::Parse {
            line: 1,
            message: format!("unsupported manifest format {}", header.format),
        });
    }
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| Error::Parse { line: i + 2, message: e.to_string() })?;
        if rec.stimulus_id != records.len() {
            return Err(Error::Parse {
                line: i + 2,
                message: format!("expected stimulus_id {}, found {}", records.len(), rec.stimulus_id),
            });
        }
        records.push(rec);
    }
    if records.len() != header.count {
        return Err(Error::Parse {
            line: records.len() + 1,
            message: format!("header announces {} records, found {}", header.count, records.len()),
        });
    }
    Ok(Manifest { header, records })
}
