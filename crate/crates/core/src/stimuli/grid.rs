//! Cartesian parameter sweeps.
//!
//! Axes are written in the external units used by the parameter tables
//! (pixels, degrees) and converted to cycles and radians only when a tuple is
//! turned into a [`Stimulus`].

use std::fmt::Write as _;
use std::hash::Hasher;

use serde::{Deserialize, Serialize};

use super::waves::{DilatingWave, RotatingWave, Stimulus, TranslatingWave};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionKind {
    Translation,
    Dilation,
    Rotation,
}

impl MotionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MotionKind::Translation => "translation",
            MotionKind::Dilation => "dilation",
            MotionKind::Rotation => "rotation",
        }
    }

    /// The motion-specific third axis.
    pub fn motion_parameter(&self) -> Parameter {
        match self {
            MotionKind::Translation => Parameter::TemporalFrequency,
            MotionKind::Dilation => Parameter::Scale,
            MotionKind::Rotation => Parameter::AngularVelocity,
        }
    }

    pub fn required_parameters(&self) -> [Parameter; 4] {
        [
            Parameter::HalfWavelength,
            Parameter::Orientation,
            self.motion_parameter(),
            Parameter::Phase,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameter {
    HalfWavelength,
    Orientation,
    TemporalFrequency,
    Phase,
    /// Affine dilation factor h.
    Scale,
    AngularVelocity,
}

impl Parameter {
    pub fn as_str(&self) -> &'static str {
        match self {
            Parameter::HalfWavelength => "half_wavelength",
            Parameter::Orientation => "orientation",
            Parameter::TemporalFrequency => "temporal_frequency",
            Parameter::Phase => "phase",
            Parameter::Scale => "scale",
            Parameter::AngularVelocity => "angular_velocity",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Pixels,
    Degrees,
    Radians,
    CyclesPerFrame,
    RadiansPerFrame,
    DegreesPerFrame,
    Dimensionless,
}

impl Unit {
    pub fn as_str(&self) -> &'static str {
        match self {
            Unit::Pixels => "px",
            Unit::Degrees => "deg",
            Unit::Radians => "rad",
            Unit::CyclesPerFrame => "cycles_per_frame",
            Unit::RadiansPerFrame => "rad_per_frame",
            Unit::DegreesPerFrame => "deg_per_frame",
            Unit::Dimensionless => "1",
        }
    }

    fn accepted_for(param: Parameter) -> &'static [Unit] {
        match param {
            Parameter::HalfWavelength => &[Unit::Pixels],
            Parameter::Orientation | Parameter::Phase => &[Unit::Degrees, Unit::Radians],
            Parameter::TemporalFrequency => &[Unit::CyclesPerFrame],
            Parameter::Scale => &[Unit::Dimensionless],
            Parameter::AngularVelocity => &[Unit::RadiansPerFrame, Unit::DegreesPerFrame],
        }
    }

    /// Converts a value in this unit to the internal unit (radians, cycles, px).
    fn to_internal(self, v: f64) -> f64 {
        match self {
            Unit::Degrees | Unit::DegreesPerFrame => v.to_radians(),
            _ => v,
        }
    }
}

/// One swept parameter: `(start, stop, step)` or `(start, stop, points)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub parameter: Parameter,
    pub unit: Unit,
    pub start: f64,
    pub stop: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl Axis {
    pub fn stepped(parameter: Parameter, unit: Unit, start: f64, stop: f64, step: f64) -> Self {
        Self {
            parameter,
            unit,
            start,
            stop,
            step: Some(step),
            points: None,
        }
    }

    pub fn linspace(parameter: Parameter, unit: Unit, start: f64, stop: f64, points: usize) -> Self {
        Self {
            parameter,
            unit,
            start,
            stop,
            step: None,
            points: Some(points),
        }
    }

    pub fn single(parameter: Parameter, unit: Unit, value: f64) -> Self {
        Self::linspace(parameter, unit, value, value, 1)
    }

    fn validate(&self) -> Result<()> {
        let name = self.parameter.as_str();
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidGrid(format!("{name}: non-finite bounds")));
        }
        if !Unit::accepted_for(self.parameter).contains(&self.unit) {
            return Err(Error::InvalidGrid(format!(
                "{name}: unit {} not accepted",
                self.unit.as_str()
            )));
        }
        match (self.step, self.points) {
            (Some(step), None) => {
                if !step.is_finite() || step == 0.0 {
                    return Err(Error::InvalidGrid(format!("{name}: step must be nonzero")));
                }
                if (self.stop - self.start) * step < 0.0 {
                    return Err(Error::InvalidGrid(format!(
                        "{name}: step {step} has the wrong sign for [{}, {}]",
                        self.start, self.stop
                    )));
                }
            }
            (None, Some(n)) => {
                if n == 0 {
                    return Err(Error::InvalidGrid(format!("{name}: zero points")));
                }
                if n == 1 && self.start != self.stop {
                    return Err(Error::InvalidGrid(format!(
                        "{name}: one point requires start == stop"
                    )));
                }
            }
            _ => {
                return Err(Error::InvalidGrid(format!(
                    "{name}: exactly one of step or points must be given"
                )))
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        match (self.step, self.points) {
            (Some(step), _) => {
                let span = (self.stop - self.start) / step;
                // endpoints are included when the span is an integer number of steps
                (span + 1e-9).floor() as usize + 1
            }
            (None, Some(n)) => n,
            _ => 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Value of the `i`-th sample in external units.
    pub fn value(&self, i: usize) -> f64 {
        match (self.step, self.points) {
            (Some(step), _) => self.start + i as f64 * step,
            (None, Some(1)) => self.start,
            (None, Some(n)) => self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64,
            _ => f64::NAN,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    fn canonical(&self, out: &mut String) {
        let sampling = match (self.step, self.points) {
            (Some(s), _) => format!("step={s}"),
            (None, Some(n)) => format!("points={n}"),
            _ => String::new(),
        };
        let _ = writeln!(
            out,
            "axis={};{};{};{};{}",
            self.parameter.as_str(),
            self.unit.as_str(),
            self.start,
            self.stop,
            sampling
        );
    }
}

/// A full Cartesian sweep over stimulus parameters, enumerated row-major
/// (the last axis varies fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub motion_kind: MotionKind,
    #[serde(rename = "axis")]
    pub axes: Vec<Axis>,
}

impl GridSpec {
    pub fn new(motion_kind: MotionKind, axes: Vec<Axis>) -> Result<Self> {
        let spec = Self { motion_kind, axes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let required = self.motion_kind.required_parameters();
        if self.axes.len() != required.len() {
            return Err(Error::InvalidGrid(format!(
                "{} grid needs {} axes, got {}",
                self.motion_kind.as_str(),
                required.len(),
                self.axes.len()
            )));
        }
        for p in required {
            let n = self.axes.iter().filter(|a| a.parameter == p).count();
            if n != 1 {
                return Err(Error::InvalidGrid(format!(
                    "{} grid needs exactly one {} axis, found {n}",
                    self.motion_kind.as_str(),
                    p.as_str()
                )));
            }
        }
        for a in &self.axes {
            a.validate()?;
        }
        Ok(())
    }

    /// Translation grid: λ/2 [16, 800, 16] px, θ [0, 350, 10]°, f_t [0, 0.5, 0.01], φ [−180, 170, 10]°.
    pub fn translation_table() -> Self {
        Self {
            motion_kind: MotionKind::Translation,
            axes: vec![
                Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 16.0, 800.0, 16.0),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 350.0, 10.0),
                Axis::stepped(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.0, 0.5, 0.01),
                Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 170.0, 10.0),
            ],
        }
    }

    /// Dilation grid: λ/2 [50, 400, 10] px, θ [0, 170, 10]°, h [0.5, 2.0, 0.1], φ [−180, 170, 10]°.
    pub fn dilation_table() -> Self {
        Self {
            motion_kind: MotionKind::Dilation,
            axes: vec![
                Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 50.0, 400.0, 10.0),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 170.0, 10.0),
                Axis::stepped(Parameter::Scale, Unit::Dimensionless, 0.5, 2.0, 0.1),
                Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 170.0, 10.0),
            ],
        }
    }

    /// Rotation grid: λ/2 [50, 400, 10] px, θ [0, 170, 10]°, ω over [−π/2, π/2]
    /// rad/frame in 11 points, φ [−180, 170, 10]°.
    pub fn rotation_table() -> Self {
        let half_pi = std::f64::consts::FRAC_PI_2;
        Self {
            motion_kind: MotionKind::Rotation,
            axes: vec![
                Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 50.0, 400.0, 10.0),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 170.0, 10.0),
                Axis::linspace(Parameter::AngularVelocity, Unit::RadiansPerFrame, -half_pi, half_pi, 11),
                Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 170.0, 10.0),
            ],
        }
    }

    /// Coarser translation grid: λ/2 [32, 400, 32] px, θ step 20°, f_t step 0.02, φ step 20°.
    pub fn translation_reduced() -> Self {
        Self {
            motion_kind: MotionKind::Translation,
            axes: vec![
                Axis::stepped(Parameter::HalfWavelength, Unit::Pixels, 32.0, 400.0, 32.0),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 340.0, 20.0),
                Axis::stepped(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.0, 0.5, 0.02),
                Axis::stepped(Parameter::Phase, Unit::Degrees, -180.0, 160.0, 20.0),
            ],
        }
    }

    pub fn axis_lens(&self) -> Vec<usize> {
        self.axes.iter().map(Axis::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis(&self, p: Parameter) -> Option<&Axis> {
        self.axes.iter().find(|a| a.parameter == p)
    }

    fn axis_position(&self, p: Parameter) -> usize {
        self.axes
            .iter()
            .position(|a| a.parameter == p)
            .expect("validated grid has every required axis")
    }

    /// Per-axis indices of stimulus `id` (row-major).
    pub fn indices(&self, mut id: usize) -> Vec<usize> {
        let lens = self.axis_lens();
        let mut idx = vec![0; lens.len()];
        for k in (0..lens.len()).rev() {
            idx[k] = id % lens[k];
            id /= lens[k];
        }
        idx
    }

    /// Parameter tuple of stimulus `id`, in external units and axis order.
    pub fn tuple(&self, id: usize) -> Vec<f64> {
        self.indices(id)
            .iter()
            .zip(&self.axes)
            .map(|(&i, a)| a.value(i))
            .collect()
    }

    /// Value of `param` in stimulus `id`, external units.
    pub fn value(&self, id: usize, param: Parameter) -> f64 {
        let k = self.axis_position(param);
        let lens = self.axis_lens();
        let stride: usize = lens[k + 1..].iter().product();
        self.axes[k].value((id / stride) % lens[k])
    }

    /// Value of `param` in internal units (radians, cycles, pixels).
    pub fn internal_value(&self, id: usize, param: Parameter) -> f64 {
        let k = self.axis_position(param);
        self.axes[k].unit.to_internal(self.value(id, param))
    }

    /// Full ordered list of parameter tuples.
    pub fn build(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        Ok((0..self.len()).map(|i| self.tuple(i)).collect())
    }

    /// Stimulus for grid point `id`.
    pub fn stimulus<T: Scalar>(&self, id: usize) -> Result<Stimulus<T>> {
        let half = self.value(id, Parameter::HalfWavelength);
        let f = T::lit(1.0 / (2.0 * half));
        let theta = T::lit(self.internal_value(id, Parameter::Orientation));
        let phase = T::lit(self.internal_value(id, Parameter::Phase));
        let motion = T::lit(self.internal_value(id, self.motion_kind.motion_parameter()));
        Ok(match self.motion_kind {
            MotionKind::Translation => Stimulus::Translating(TranslatingWave::new(f, theta, motion, phase)?),
            MotionKind::Dilation => Stimulus::Dilating(DilatingWave::new(f, theta, motion, phase)?),
            MotionKind::Rotation => Stimulus::Rotating(RotatingWave::new(f, theta, motion, phase)?),
        })
    }

    /// Canonical text used for hashing; stable across runs and platforms.
    pub fn canonical(&self) -> String {
        let mut out = format!("motion_kind={}\n", self.motion_kind.as_str());
        for a in &self.axes {
            a.canonical(&mut out);
        }
        out
    }

    /// 64-bit FNV-1a of the canonical serialization.
    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("grid spec serializes")
    }

    pub fn from_toml(s: &str) -> Result<Self> {
        let spec: GridSpec = toml::from_str(s).map_err(|e| Error::InvalidGrid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_cardinalities() {
        let t3 = GridSpec::translation_table();
        assert_eq!(t3.axis_lens(), vec![50, 36, 51, 36]);
        assert_eq!(t3.len(), 3_304_800);
        let t5 = GridSpec::dilation_table();
        assert_eq!(t5.axis_lens(), vec![36, 18, 16, 36]);
        assert_eq!(t5.len(), 373_248);
        let t6 = GridSpec::rotation_table();
        assert_eq!(t6.axis_lens(), vec![36, 18, 11, 36]);
        assert_eq!(t6.len(), 256_608);
        assert_eq!(GridSpec::translation_reduced().axis_lens(), vec![12, 18, 26, 18]);
    }

    #[test]
    fn endpoints_included_and_ordering_row_major() {
        let t3 = GridSpec::translation_table();
        assert_eq!(t3.tuple(0), vec![16.0, 0.0, 0.0, -180.0]);
        assert_eq!(t3.tuple(1), vec![16.0, 0.0, 0.0, -170.0]);
        let last = t3.tuple(t3.len() - 1);
        assert_eq!(last[0], 800.0);
        assert_eq!(last[1], 350.0);
        assert!((last[2] - 0.5).abs() < 1e-12);
        assert_eq!(last[3], 170.0);
        assert_eq!(t3.value(37, Parameter::Phase), -170.0);
        assert_eq!(t3.value(36, Parameter::TemporalFrequency), 0.01);
    }

    #[test]
    fn single_point_axes_give_one_tuple() {
        let spec = GridSpec::new(
            MotionKind::Translation,
            vec![
                Axis::single(Parameter::HalfWavelength, Unit::Pixels, 100.0),
                Axis::single(Parameter::Orientation, Unit::Degrees, 30.0),
                Axis::single(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.1),
                Axis::single(Parameter::Phase, Unit::Degrees, 0.0),
            ],
        )
        .unwrap();
        assert_eq!(spec.build().unwrap(), vec![vec![100.0, 30.0, 0.1, 0.0]]);
    }

    #[test]
    fn wrong_step_sign_rejected() {
        let mut spec = GridSpec::translation_table();
        spec.axes[0].step = Some(-16.0);
        assert!(matches!(spec.validate(), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn kind_axis_mismatch_rejected() {
        let mut spec = GridSpec::rotation_table();
        spec.motion_kind = MotionKind::Dilation;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn stimulus_conversion_uses_internal_units() {
        let spec = GridSpec::translation_table();
        match spec.stimulus::<f64>(37).unwrap() {
            Stimulus::Translating(w) => {
                assert!((w.spatial_freq - 1.0 / 32.0).abs() < 1e-15);
                assert!((w.phase - (-170f64).to_radians()).abs() < 1e-12);
            }
            _ => panic!("wrong kind"),
        }
        let rot = GridSpec::rotation_table();
        let id = rot.len() - 1;
        match rot.stimulus::<f64>(id).unwrap() {
            Stimulus::Rotating(w) => assert!((w.angular_velocity - std::f64::consts::FRAC_PI_2).abs() < 1e-12),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn toml_round_trip_and_stable_hash() {
        let spec = GridSpec::dilation_table();
        let text = spec.to_toml();
        let back = GridSpec::from_toml(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.hash(), spec.hash());
        assert_ne!(spec.hash(), GridSpec::rotation_table().hash());
        // FNV-1a reference value for the empty input
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
