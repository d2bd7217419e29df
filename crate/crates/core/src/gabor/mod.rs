//! Frequency-tuned spatiotemporal Gabor filters and the rectified response
//! model `r = max(0, K (<s, g> + b))`.
//!
//! Two routes compute `<s, g>`: the direct sum over a rendered kernel
//! ([`unit_response`]) and a closed-form frame-wise spectral evaluation
//! ([`GaborEvaluator`]) that never materializes the kernel. They agree to
//! round-off and the second is what the fitting loop uses.

mod bandwidth;
mod evaluator;

pub use bandwidth::{
    half_magnitude_bandwidths, half_magnitude_bandwidths_with, lobe_crossings, orientation_samples,
    spatial_freq_samples, temporal_freq_samples, AxisBandwidth, Bandwidths, BANDWIDTH_SAMPLES,
    SPATIAL_FREQ_RANGE,
};
pub use evaluator::{GaborEvaluator, SpectrumCache};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{wrap_pi, wrap_two_pi, Scalar};
use crate::stimuli::{rotate_coords, Stimulus, TranslatingWave};
use crate::volume::{Extent, Volume};

/// Where the temporal Gaussian peaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalAnchor {
    /// Peak on frame 0. With two frames the envelope weights differ, so σt is
    /// identifiable from the temporal profile.
    #[default]
    FirstFrame,
    /// Peak at `(T-1)/2`, symmetric in time.
    Midpoint,
}

impl TemporalAnchor {
    pub fn center<T: Scalar>(&self, frames: usize) -> T {
        match self {
            TemporalAnchor::FirstFrame => T::zero(),
            TemporalAnchor::Midpoint => T::from_usize_lossy(frames - 1) / T::lit(2.0),
        }
    }
}

/// Number of model parameters.
pub const PARAM_COUNT: usize = 9;

/// Column names of the CSV row written by [`GaborParams::csv_row`].
pub const CSV_COLUMNS: [&str; PARAM_COUNT] = [
    "spatial_freq_cpp",
    "orientation_deg",
    "temporal_freq_cpf",
    "phase_deg",
    "sigma_x_px",
    "sigma_y_px",
    "sigma_t_frames",
    "gain",
    "bias",
];

/// The nine parameters of the rectified Gabor response model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborParams<T> {
    /// F0, cycles/pixel
    pub spatial_freq: T,
    /// θ0, radians
    pub orientation: T,
    /// f_t0, cycles/frame
    pub temporal_freq: T,
    /// φ0, radians
    pub phase: T,
    pub sigma_x: T,
    pub sigma_y: T,
    pub sigma_t: T,
    /// K
    pub gain: T,
    /// b
    pub bias: T,
}

impl<T: Scalar> GaborParams<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return bad("non-finite Gabor parameter".into());
        }
        if !(self.spatial_freq > T::zero()) {
            return bad(format!("F0 must be positive, got {}", self.spatial_freq));
        }
        if !(self.sigma_x > T::zero() && self.sigma_y > T::zero() && self.sigma_t > T::zero()) {
            return bad("Gaussian widths must be positive".into());
        }
        if !(self.gain > T::zero()) {
            return bad(format!("gain must be positive, got {}", self.gain));
        }
        if self.temporal_freq.abs() > T::lit(0.5) {
            return bad(format!("|f_t0| must not exceed 0.5, got {}", self.temporal_freq));
        }
        Ok(())
    }

    /// λ0/2 in pixels.
    pub fn half_wavelength(&self) -> T {
        T::one() / (T::lit(2.0) * self.spatial_freq)
    }

    /// (f_x0, f_y0)
    pub fn spatial_frequencies(&self) -> (T, T) {
        let (s, c) = self.orientation.sin_cos();
        (self.spatial_freq * c, self.spatial_freq * s)
    }

    /// The translating wave this filter is tuned to.
    pub fn preferred_wave(&self) -> TranslatingWave<T> {
        TranslatingWave {
            spatial_freq: self.spatial_freq,
            orientation: wrap_two_pi(self.orientation),
            temporal_freq: self.temporal_freq,
            phase: self.phase,
        }
    }

    /// Angles wrapped to θ ∈ [0, 2π), φ ∈ (−π, π].
    pub fn normalized(&self) -> Self {
        Self {
            orientation: wrap_two_pi(self.orientation),
            phase: wrap_pi(self.phase),
            ..*self
        }
    }

    pub fn to_array(&self) -> [T; PARAM_COUNT] {
        [
            self.spatial_freq,
            self.orientation,
            self.temporal_freq,
            self.phase,
            self.sigma_x,
            self.sigma_y,
            self.sigma_t,
            self.gain,
            self.bias,
        ]
    }

    pub fn from_array(a: [T; PARAM_COUNT]) -> Self {
        Self {
            spatial_freq: a[0],
            orientation: a[1],
            temporal_freq: a[2],
            phase: a[3],
            sigma_x: a[4],
            sigma_y: a[5],
            sigma_t: a[6],
            gain: a[7],
            bias: a[8],
        }
    }

    /// One CSV row in [`CSV_COLUMNS`] order; angles in degrees.
    pub fn csv_row(&self) -> Vec<String> {
        let n = self.normalized();
        let mut a = n.to_array();
        a[1] = a[1].to_degrees();
        a[3] = a[3].to_degrees();
        a.iter().map(|v| crate::scalar::format_round_trip(*v)).collect()
    }

    pub fn from_csv_fields(fields: &[&str]) -> Result<Self> {
        if fields.len() != PARAM_COUNT {
            return Err(Error::InvalidParameter(format!(
                "expected {PARAM_COUNT} Gabor columns, got {}",
                fields.len()
            )));
        }
        let mut a = [T::zero(); PARAM_COUNT];
        for (slot, f) in a.iter_mut().zip(fields) {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("not a number: {f}")))?;
            *slot = T::lit(v);
        }
        a[1] = a[1].to_radians();
        a[3] = a[3].to_radians();
        let p = Self::from_array(a);
        p.validate()?;
        Ok(p)
    }
}

/// Preferred speed along the filter normal, v0 = f_t0 / F0 (pixels/frame).
pub fn preferred_velocity<T: Scalar>(g: &GaborParams<T>) -> T {
    g.temporal_freq / g.spatial_freq
}

/// Gaussian window `exp(-(x_r²/σx² + y_r²/σy² + (t - t_a)²/σt²))`.
pub fn gaussian_envelope<T: Scalar>(g: &GaborParams<T>, extent: Extent, anchor: TemporalAnchor) -> Volume<T> {
    let ta: T = anchor.center(extent.frames);
    Volume::from_fn(extent, |x, y, t| envelope_at(g, x, y, t - ta))
}

#[inline]
fn envelope_at<T: Scalar>(g: &GaborParams<T>, x: T, y: T, tc: T) -> T {
    let (xr, yr) = rotate_coords(x, y, g.orientation);
    (-(xr * xr / (g.sigma_x * g.sigma_x) + yr * yr / (g.sigma_y * g.sigma_y) + tc * tc / (g.sigma_t * g.sigma_t)))
        .exp()
}

/// The filter kernel: Gaussian envelope times the preferred translating wave.
pub fn gabor_kernel<T: Scalar>(g: &GaborParams<T>, extent: Extent, anchor: TemporalAnchor) -> Volume<T> {
    let ta: T = anchor.center(extent.frames);
    let wave = g.preferred_wave();
    Volume::from_fn(extent, |x, y, t| {
        envelope_at(g, x, y, t - ta) * crate::stimuli::translating_wave_at(&wave, x, y, t)
    })
}

/// Rectified response to a rendered stimulus via the full dot product.
pub fn unit_response<T: Scalar>(
    g: &GaborParams<T>,
    stimulus: &Volume<T>,
    anchor: TemporalAnchor,
) -> Result<T> {
    let kernel = gabor_kernel(g, stimulus.extent(), anchor);
    let dot = stimulus.dot(&kernel)?;
    Ok(rectify(g, dot))
}

#[inline]
pub(crate) fn rectify<T: Scalar>(g: &GaborParams<T>, pre: T) -> T {
    (g.gain * (pre + g.bias)).max(T::zero())
}

/// A Gabor filter bound to the grid it is evaluated on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaborModel<T> {
    pub params: GaborParams<T>,
    pub extent: Extent,
    pub anchor: TemporalAnchor,
}

impl<T: Scalar> GaborModel<T> {
    pub fn new(params: GaborParams<T>, extent: Extent, anchor: TemporalAnchor) -> Self {
        Self { params, extent, anchor }
    }

    pub fn kernel(&self) -> Volume<T> {
        gabor_kernel(&self.params, self.extent, self.anchor)
    }

    pub fn evaluator(&self) -> GaborEvaluator<T> {
        GaborEvaluator::new(&self.params, self.extent, self.anchor)
    }

    /// Rectified response to a parametrized stimulus (spectral route).
    pub fn response(&self, stimulus: &Stimulus<T>) -> T {
        self.evaluator().response(stimulus)
    }

    /// Response at the filter's own preferred wave.
    pub fn peak_response(&self) -> T {
        self.response(&Stimulus::Translating(self.params.preferred_wave()))
    }
}
