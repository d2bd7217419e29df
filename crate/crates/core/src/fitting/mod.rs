//! Two-step estimation: locate each filter's peak in a gridsearch table, then
//! sweep the three spectral profiles through that peak and fit the rectified
//! Gabor model to them.

mod fit;
pub mod lm;
mod summary;

pub use fit::{
    fit_gabor_with_bounds,
    fit_gabor, initial_params, normalized_cost, write_error_patterns, write_fit_csv, Costs, FitBounds, FitConfig,
    FitResult, FIT_CSV_HEADER,
};
pub use summary::{quartiles, BandwidthSummary, FitSummary};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{ResponseProvider, ResponseTable};
use crate::scalar::Scalar;
use crate::stimuli::{GridSpec, MotionKind, Parameter, Stimulus, TranslatingWave};

/// A filter's strongest response over a gridsearch.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakResponse<T> {
    pub filter_id: usize,
    pub stimulus_id: usize,
    pub motion_kind: MotionKind,
    /// Per-axis grid indices.
    pub indices: Vec<usize>,
    /// Parameter tuple in the grid's external units and axis order.
    pub tuple: Vec<f64>,
    pub stimulus: Stimulus<T>,
    /// r̂0
    pub value: T,
}

/// Global maximum of one filter over the grid; ties go to the lowest stimulus id.
pub fn find_peak<T: Scalar>(table: &ResponseTable<T>, spec: &GridSpec, filter_id: usize) -> Result<PeakResponse<T>> {
    if table.grid_spec_hash() != spec.hash() {
        return Err(Error::HashMismatch {
            expected: spec.hash(),
            found: table.grid_spec_hash(),
        });
    }
    let column = table.column(filter_id)?;
    let (mut best, mut value) = (0, T::zero());
    for (id, &v) in column.iter().enumerate() {
        if v > value {
            best = id;
            value = v;
        }
    }
    if !(value > T::zero()) {
        return Err(Error::InactiveFilter(filter_id));
    }
    Ok(PeakResponse {
        filter_id,
        stimulus_id: best,
        motion_kind: spec.motion_kind,
        indices: spec.indices(best),
        tuple: spec.tuple(best),
        stimulus: spec.stimulus(best)?,
        value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileAxis {
    SpatialFrequency,
    Orientation,
    TemporalFrequency,
}

impl ProfileAxis {
    pub const ALL: [ProfileAxis; 3] = [
        ProfileAxis::SpatialFrequency,
        ProfileAxis::Orientation,
        ProfileAxis::TemporalFrequency,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProfileAxis::SpatialFrequency => "spatial_frequency",
            ProfileAxis::Orientation => "orientation",
            ProfileAxis::TemporalFrequency => "temporal_frequency",
        }
    }

    /// Unit of [`ProfileCurve::values`].
    pub fn unit(&self) -> &'static str {
        match self {
            ProfileAxis::SpatialFrequency => "half_wavelength_px",
            ProfileAxis::Orientation => "orientation_deg",
            ProfileAxis::TemporalFrequency => "temporal_frequency_cycles_per_frame",
        }
    }
}

/// `(start, stop, points)` per profile axis, in the external units of
/// [`ProfileAxis::unit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSampling {
    pub half_wavelength: (f64, f64, usize),
    pub orientation: (f64, f64, usize),
    pub temporal_frequency: (f64, f64, usize),
}

impl Default for ProfileSampling {
    fn default() -> Self {
        Self {
            half_wavelength: (16.0, 800.0, 50),
            orientation: (0.0, 350.0, 36),
            temporal_frequency: (-0.5, 0.5, 50),
        }
    }
}

fn linspace((a, b, n): (f64, f64, usize)) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Inserts `v` in sorted order unless an equal sample exists; returns its index.
fn insert_sample(values: &mut Vec<f64>, v: f64) -> usize {
    let tol = 1e-9 * (1.0 + v.abs());
    if let Some(i) = values.iter().position(|&x| (x - v).abs() <= tol) {
        values[i] = v;
        return i;
    }
    let i = values.iter().position(|&x| x > v).unwrap_or(values.len());
    values.insert(i, v);
    i
}

/// One sampled response curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve<T> {
    pub axis: ProfileAxis,
    /// Swept values in [`ProfileAxis::unit`].
    pub values: Vec<f64>,
    pub stimuli: Vec<Stimulus<T>>,
    pub responses: Vec<T>,
    /// Position of the peak stimulus within the sweep.
    pub peak_index: usize,
}

/// The three curves through a filter's peak.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile<T> {
    pub filter_id: usize,
    pub curves: [ProfileCurve<T>; 3],
}

impl<T: Scalar> SpectralProfile<T> {
    pub fn curve(&self, axis: ProfileAxis) -> &ProfileCurve<T> {
        &self.curves[axis as usize]
    }

    pub fn len(&self) -> usize {
        self.curves.iter().map(|c| c.stimuli.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The sweep stimuli for a translation peak. Each sweep contains the peak
/// value itself so every curve passes through r̂0.
pub fn profile_stimuli<T: Scalar>(
    peak: &PeakResponse<T>,
    sampling: &ProfileSampling,
) -> Result<[(Vec<f64>, Vec<Stimulus<T>>, usize); 3]> {
    let Stimulus::Translating(w) = peak.stimulus else {
        return Err(Error::InvalidParameter(
            "spectral profiles are defined around a translation peak".into(),
        ));
    };
    let half = 1.0 / (2.0 * w.spatial_freq.as_f64());
    let theta_deg = w.orientation.as_f64().to_degrees();
    let ft = w.temporal_freq.as_f64();

    let mut halves = linspace(sampling.half_wavelength);
    let hi = insert_sample(&mut halves, half);
    let mut thetas = linspace(sampling.orientation);
    let ti = insert_sample(&mut thetas, theta_deg);
    let mut fts = linspace(sampling.temporal_frequency);
    let fi = insert_sample(&mut fts, ft);

    // the peak itself keeps its exact parameters
    let wave = |f: T, th: T, ft: T| TranslatingWave {
        spatial_freq: f,
        orientation: th,
        temporal_freq: ft,
        phase: w.phase,
    };
    let spatial = halves
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let f = if i == hi { w.spatial_freq } else { T::lit(1.0 / (2.0 * h)) };
            Stimulus::Translating(wave(f, w.orientation, w.temporal_freq))
        })
        .collect();
    let orient = thetas
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let th = if i == ti { w.orientation } else { T::lit(t.to_radians()) };
            Stimulus::Translating(wave(w.spatial_freq, th, w.temporal_freq))
        })
        .collect();
    let temporal = fts
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let f = if i == fi { w.temporal_freq } else { T::lit(f) };
            Stimulus::Translating(wave(w.spatial_freq, w.orientation, f))
        })
        .collect();
    Ok([(halves, spatial, hi), (thetas, orient, ti), (fts, temporal, fi)])
}

/// Measures the three profile sweeps of `peak.filter_id` through `provider`.
pub fn extract_profiles<T: Scalar, P: ResponseProvider<T> + ?Sized>(
    provider: &P,
    peak: &PeakResponse<T>,
    sampling: &ProfileSampling,
) -> Result<SpectralProfile<T>> {
    let sweeps = profile_stimuli(peak, sampling)?;
    let mut curves = Vec::with_capacity(3);
    for ((values, stimuli, peak_index), axis) in sweeps.into_iter().zip(ProfileAxis::ALL) {
        let responses = provider.respond_filter(peak.filter_id, &stimuli).map_err(|e| Error::Provider {
            context: format!("filter {} {} sweep", peak.filter_id, axis.as_str()),
            message: e.to_string(),
        })?;
        if let Some((i, v)) = responses.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < T::zero()) {
            return Err(Error::Provider {
                context: format!("filter {} {} sweep, position {i} ({})", peak.filter_id, axis.as_str(), values[i]),
                message: format!("invalid activation {v}"),
            });
        }
        curves.push(ProfileCurve {
            axis,
            values,
            stimuli,
            responses,
            peak_index,
        });
    }
    let curves: [ProfileCurve<T>; 3] = curves.try_into().expect("three sweeps");
    Ok(SpectralProfile {
        filter_id: peak.filter_id,
        curves,
    })
}

/// The whole two-step estimate for each listed filter, run data-parallel
/// across filters. Inactive filters come back as `Err(InactiveFilter)`.
pub fn fit_filters<T: Scalar, P: ResponseProvider<T> + ?Sized>(
    provider: &P,
    table: &ResponseTable<T>,
    spec: &GridSpec,
    filter_ids: &[usize],
    sampling: &ProfileSampling,
    config: &FitConfig,
) -> Vec<Result<(PeakResponse<T>, SpectralProfile<T>, FitResult<T>)>> {
    let extent = provider.extent();
    filter_ids
        .par_iter()
        .map(|&f| {
            let peak = find_peak(table, spec, f)?;
            let profile = extract_profiles(provider, &peak, sampling)?;
            let fit = fit_gabor(&profile, &peak, extent, config)?;
            Ok((peak, profile, fit))
        })
        .collect()
}

/// Grid value of `param` at the peak, external units.
pub fn peak_value<T>(peak: &PeakResponse<T>, spec: &GridSpec, param: Parameter) -> f64 {
    spec.value(peak.stimulus_id, param)
}
