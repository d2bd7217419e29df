//! Dilation and rotation gridsearches: aliasing-admissible grid planning,
//! per-filter motion peaks, and the comparison against translation peaks.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitting::find_peak;
use crate::probe::{respond_grid, ResponseProvider, ResponseTable};
use crate::scalar::{format_round_trip, Scalar};
use crate::stimuli::{dilation_alias_check, rotation_alias_check, GridSpec, MotionKind, Parameter};
use crate::volume::Extent;

/// Distances entering the aliasing constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AliasBounds {
    /// Largest |x| of a dilation stimulus, pixels.
    pub x_max: f64,
    /// Largest distance from the rotation center, pixels.
    pub m_max: f64,
}

impl AliasBounds {
    /// Half the stimulus extent: `x_max = (W−1)/2`, `m_max = W/2`
    /// (191 and 191.5 for a 383-px extent).
    pub fn for_extent(extent: Extent) -> Self {
        Self {
            x_max: extent.half_width() as f64,
            m_max: extent.width as f64 / 2.0,
        }
    }
}

/// Admissible and excluded stimulus ids of a motion grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionGrid {
    pub spec: GridSpec,
    pub bounds: AliasBounds,
    pub admissible: Vec<usize>,
    pub excluded: Vec<usize>,
}

/// Constraint check for one grid point, in the grid's own terms.
pub fn is_admissible(spec: &GridSpec, id: usize, bounds: AliasBounds) -> bool {
    let lambda = 2.0 * spec.value(id, Parameter::HalfWavelength);
    match spec.motion_kind {
        MotionKind::Translation => true,
        MotionKind::Dilation => dilation_alias_check(spec.value(id, Parameter::Scale), lambda, bounds.x_max),
        MotionKind::Rotation => rotation_alias_check(
            spec.internal_value(id, Parameter::AngularVelocity),
            bounds.m_max,
            lambda,
        ),
    }
}

impl MotionGrid {
    pub fn plan(spec: &GridSpec, bounds: AliasBounds) -> Result<Self> {
        spec.validate()?;
        if spec.motion_kind == MotionKind::Translation {
            return Err(Error::InvalidGrid("motion gridsearch needs a dilation or rotation grid".into()));
        }
        let (admissible, excluded) = (0..spec.len()).partition(|&id| is_admissible(spec, id, bounds));
        Ok(Self {
            spec: spec.clone(),
            bounds,
            admissible,
            excluded,
        })
    }

    /// One line per excluded stimulus with the violated inequality.
    pub fn write_exclusions<W: Write>(&self, mut w: W) -> Result<()> {
        let motion = self.spec.motion_kind.motion_parameter();
        writeln!(w, "stimulus_id,half_wavelength_px,orientation_deg,{},phase_deg,reason", motion.as_str())?;
        for &id in &self.excluded {
            let half = self.spec.value(id, Parameter::HalfWavelength);
            let m = self.spec.value(id, motion);
            let reason = match self.spec.motion_kind {
                MotionKind::Dilation => format!("(h-1)*x_max = {} > lambda0/2 = {half}", (m - 1.0) * self.bounds.x_max),
                _ => format!(
                    "omega*m_max = {} > lambda0/2 = {half}",
                    self.spec.internal_value(id, motion) * self.bounds.m_max
                ),
            };
            writeln!(
                w,
                "{id},{half},{},{m},{},{reason}",
                self.spec.value(id, Parameter::Orientation),
                self.spec.value(id, Parameter::Phase)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates only the admissible stimuli; excluded rows stay absent from the table.
pub fn run_motion_gridsearch<T: Scalar, P: ResponseProvider<T> + ?Sized>(
    provider: &P,
    spec: &GridSpec,
    batch: usize,
) -> Result<(ResponseTable<T>, MotionGrid)> {
    let grid = MotionGrid::plan(spec, AliasBounds::for_extent(provider.extent()))?;
    let table = respond_grid(provider, spec, Some(&grid.admissible), batch)?;
    Ok((table, grid))
}

/// Strongest admissible motion stimulus of one filter: `(stimulus_id, value)`.
/// Ties go to the lowest id; a silent filter peaks at 0 on the first id.
pub fn motion_peak<T: Scalar>(table: &ResponseTable<T>, grid: &MotionGrid, filter_id: usize) -> Result<(usize, T)> {
    if table.grid_spec_hash() != grid.spec.hash() {
        return Err(Error::HashMismatch {
            expected: grid.spec.hash(),
            found: table.grid_spec_hash(),
        });
    }
    if filter_id >= table.filter_count() {
        return Err(Error::UnknownFilter(filter_id));
    }
    let mut best: Option<(usize, T)> = None;
    for &id in &grid.admissible {
        let v = table.get(id, filter_id).ok_or(Error::Incomplete(filter_id))?;
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((id, v));
        }
    }
    best.ok_or(Error::Incomplete(filter_id))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MotionPreference {
    pub filter_id: usize,
    pub motion_kind: MotionKind,
    pub translation_peak: f64,
    pub motion_peak: f64,
    pub motion_stimulus_id: usize,
    pub half_wavelength_px: f64,
    pub orientation_deg: f64,
    /// h for dilation, ω (rad/frame) for rotation
    pub motion_value: f64,
    pub phase_deg: f64,
    /// Motion peak strictly above the translation peak.
    pub dominant: bool,
}

pub fn compare_motion_preference<T: Scalar>(
    translation: &ResponseTable<T>,
    translation_spec: &GridSpec,
    motion: &ResponseTable<T>,
    grid: &MotionGrid,
    filter_id: usize,
) -> Result<MotionPreference> {
    let trans = match find_peak(translation, translation_spec, filter_id) {
        Ok(p) => p.value,
        Err(Error::InactiveFilter(_)) => T::zero(),
        Err(e) => return Err(e),
    };
    let (id, value) = motion_peak(motion, grid, filter_id)?;
    let spec = &grid.spec;
    let kind = spec.motion_kind;
    let motion_value = match kind {
        MotionKind::Rotation => spec.internal_value(id, Parameter::AngularVelocity),
        _ => spec.value(id, kind.motion_parameter()),
    };
    Ok(MotionPreference {
        filter_id,
        motion_kind: kind,
        translation_peak: trans.as_f64(),
        motion_peak: value.as_f64(),
        motion_stimulus_id: id,
        half_wavelength_px: spec.value(id, Parameter::HalfWavelength),
        orientation_deg: spec.value(id, Parameter::Orientation),
        motion_value,
        phase_deg: spec.value(id, Parameter::Phase),
        dominant: value > trans,
    })
}

/// Fraction of preferences flagged dominant.
pub fn dominance_fraction(prefs: &[MotionPreference]) -> f64 {
    if prefs.is_empty() {
        return 0.0;
    }
    prefs.iter().filter(|p| p.dominant).count() as f64 / prefs.len() as f64
}

pub fn write_scatter_csv<W: Write>(prefs: &[MotionPreference], mut w: W) -> Result<()> {
    writeln!(
        w,
        "filter_id,motion_kind,half_wavelength_px,orientation_deg,motion_value,phase_deg,motion_peak,translation_peak,dominant"
    )?;
    for p in prefs {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.filter_id,
            p.motion_kind.as_str(),
            p.half_wavelength_px,
            p.orientation_deg,
            p.motion_value,
            p.phase_deg,
            format_round_trip(p.motion_peak),
            format_round_trip(p.translation_peak),
            p.dominant
        )?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::{GaborParams, TemporalAnchor};
    use crate::probe::{BankFilter, SyntheticBank};
    use crate::stimuli::{gen_dilating_wave, Axis, DilatingWave, Unit};
    use crate::volume::Volume;

    fn extent() -> Extent {
        Extent::new(33, 33, 2).unwrap()
    }

    fn translation_spec() -> GridSpec {
        GridSpec::new(
            MotionKind::Translation,
            vec![
                Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 4.0, 12.0, 2.0),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 330.0, 30.0),
                Axis::stepped(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.0, 0.2, 0.05),
                Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 150.0, 30.0),
            ],
        )
        .unwrap()
    }

    fn dilation_spec() -> GridSpec {
        GridSpec::new(
            MotionKind::Dilation,
            vec![
                Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 4.0, 12.0, 2.0),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 150.0, 30.0),
                Axis::stepped(Parameter::Scale, Unit::Dimensionless, 0.8, 1.2, 0.1),
                Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 150.0, 30.0),
            ],
        )
        .unwrap()
    }

    fn bank(filters: Vec<BankFilter<f64>>) -> SyntheticBank<f64> {
        SyntheticBank::new(filters, extent(), TemporalAnchor::FirstFrame).unwrap()
    }

    fn compare(b: &SyntheticBank<f64>) -> MotionPreference {
        let ts = translation_spec();
        let trans = respond_grid(b, &ts, None, 4096).unwrap();
        let (motion, grid) = run_motion_gridsearch(b, &dilation_spec(), 4096).unwrap();
        compare_motion_preference(&trans, &ts, &motion, &grid, 0).unwrap()
    }

    #[test]
    fn bounds_for_the_default_extent() {
        let b = AliasBounds::for_extent(Extent::new(383, 383, 2).unwrap());
        assert_eq!((b.x_max, b.m_max), (191.0, 191.5));
    }

    #[test]
    fn exclusions_are_exactly_the_constraint_violations() {
        let bounds = AliasBounds { x_max: 100.0, m_max: 191.5 };
        let spec = dilation_spec();
        let grid = MotionGrid::plan(&spec, bounds).unwrap();
        assert_eq!(grid.admissible.len() + grid.excluded.len(), spec.len());
        for &id in &grid.excluded {
            let h = spec.value(id, Parameter::Scale);
            assert!((h - 1.0) * 100.0 > spec.value(id, Parameter::HalfWavelength));
        }
        assert!(!grid.excluded.is_empty());
        let mut out = Vec::new();
        grid.write_exclusions(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap().lines().count(), grid.excluded.len() + 1);
    }

    #[test]
    fn translation_grid_is_rejected() {
        assert!(matches!(
            MotionGrid::plan(&translation_spec(), AliasBounds { x_max: 1.0, m_max: 1.0 }),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn dilation_grid_with_angular_velocity_axis_is_a_spec_error() {
        let r = GridSpec::new(
            MotionKind::Dilation,
            vec![
                Axis::single(Parameter::HalfWavelength, Unit::Pixels, 50.0),
                Axis::single(Parameter::Orientation, Unit::Degrees, 0.0),
                Axis::single(Parameter::AngularVelocity, Unit::RadiansPerFrame, 0.1),
                Axis::single(Parameter::Phase, Unit::Degrees, 0.0),
            ],
        );
        assert!(matches!(r, Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn translation_gabor_prefers_translation() {
        let g = GaborParams {
            spatial_freq: 1.0 / 16.0,
            orientation: 0.0,
            temporal_freq: 0.1,
            phase: 0.0,
            sigma_x: 6.0,
            sigma_y: 6.0,
            sigma_t: 1.0,
            gain: 1.0,
            bias: 0.0,
        };
        let p = compare(&bank(vec![BankFilter::Gabor(g)]));
        assert!(!p.dominant, "{p:?}");
        assert!(p.translation_peak > p.motion_peak);
    }

    #[test]
    fn dilating_wave_filter_prefers_dilation() {
        let w = DilatingWave::new(1.0 / 16.0, 0.0, 1.2, 0.0).unwrap();
        let wave = gen_dilating_wave(&w, extent());
        let kernel = Volume::from_fn(extent(), |x: f64, y: f64, _| (-(x * x + y * y) / 128.0).exp()).zip_map(&wave, |a, b| a * b).unwrap();
        let p = compare(&bank(vec![BankFilter::Kernel(kernel)]));
        assert!(p.dominant, "{p:?}");
        assert!((p.motion_value - 1.2).abs() < 1e-9, "{p:?}");
    }

    #[test]
    fn equal_peaks_are_not_dominant() {
        let ts = translation_spec();
        let ds = dilation_spec();
        let trans = ResponseTable::from_matrix(ts.hash(), &vec![vec![0.5f64]; ts.len()], 1).unwrap();
        let mut rows = vec![vec![0.25f64]; ds.len()];
        let grid = MotionGrid::plan(&ds, AliasBounds::for_extent(extent())).unwrap();
        rows[grid.admissible[3]][0] = 0.5;
        let motion = ResponseTable::from_matrix(ds.hash(), &rows, 1).unwrap();
        let p = compare_motion_preference(&trans, &ts, &motion, &grid, 0).unwrap();
        assert_eq!(p.motion_peak, p.translation_peak);
        assert_eq!(p.motion_stimulus_id, grid.admissible[3]);
        assert!(!p.dominant);
        rows[grid.admissible[3]][0] = 0.5000001;
        let motion = ResponseTable::from_matrix(ds.hash(), &rows, 1).unwrap();
        assert!(compare_motion_preference(&trans, &ts, &motion, &grid, 0).unwrap().dominant);
    }

    #[test]
    fn missing_admissible_row_is_incomplete() {
        let b = bank(vec![BankFilter::Kernel(Volume::from_fn(extent(), |x, _, _| x))]);
        let spec = dilation_spec();
        let grid = MotionGrid::plan(&spec, AliasBounds::for_extent(extent())).unwrap();
        let partial = respond_grid(&b, &spec, Some(&grid.admissible[1..]), 64).unwrap();
        assert!(matches!(motion_peak(&partial, &grid, 0), Err(Error::Incomplete(0))));
    }

    #[test]
    fn scatter_csv_has_one_row_per_filter() {
        let p = compare(&bank(vec![BankFilter::Kernel(Volume::from_fn(extent(), |x, _, _| x))]));
        let mut out = Vec::new();
        write_scatter_csv(&[p.clone(), p], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("0,dilation,"));
    }
}
