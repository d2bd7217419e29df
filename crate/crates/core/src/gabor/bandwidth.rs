//! Half-magnitude bandwidths of the rectified response curves through the
//! preferred stimulus.

use serde::Serialize;

use super::{GaborEvaluator, GaborModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stimuli::{Stimulus, TranslatingWave};

/// Samples per response curve.
pub const BANDWIDTH_SAMPLES: usize = 2001;

/// Lowest and highest spatial frequency scanned, cycles/pixel.
pub const SPATIAL_FREQ_RANGE: (f64, f64) = (1.0 / 1600.0, 1.0 / 32.0);

/// Extent of the lobe around a curve's maximum that stays at or above a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisBandwidth {
    pub low: f64,
    pub high: f64,
    /// In the axis' reporting unit: octaves, degrees or cycles/frame.
    pub width: f64,
    /// A crossing fell outside the scanned domain and was replaced by its edge.
    pub truncated: bool,
    /// The curve crosses the threshold more than twice.
    pub multi_lobe: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bandwidths {
    /// octaves
    pub spatial: AxisBandwidth,
    /// degrees
    pub orientation: AxisBandwidth,
    /// cycles/frame
    pub temporal: AxisBandwidth,
}

/// Crossings `(low, high, truncated, multi_lobe)` of the lobe that contains the
/// curve maximum, located by linear interpolation between samples.
pub fn lobe_crossings(xs: &[f64], ys: &[f64], threshold: f64) -> (f64, f64, bool, bool) {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    let peak = ys
        .iter()
        .enumerate()
        .fold(0, |best, (i, &y)| if y > ys[best] { i } else { best });
    let above: Vec<bool> = ys.iter().map(|&y| y >= threshold).collect();
    let crossings = above.windows(2).filter(|w| w[0] != w[1]).count();
    let lerp = |i: usize, j: usize| {
        let (y0, y1) = (ys[i], ys[j]);
        if y1 == y0 {
            xs[i]
        } else {
            xs[i] + (threshold - y0) * (xs[j] - xs[i]) / (y1 - y0)
        }
    };
    let mut truncated = false;
    let mut lo = peak;
    while lo > 0 && above[lo - 1] {
        lo -= 1;
    }
    let low = if lo == 0 {
        truncated = true;
        xs[0]
    } else {
        lerp(lo - 1, lo)
    };
    let mut hi = peak;
    while hi + 1 < xs.len() && above[hi + 1] {
        hi += 1;
    }
    let high = if hi + 1 == xs.len() {
        truncated = true;
        xs[hi]
    } else {
        lerp(hi, hi + 1)
    };
    (low, high, truncated, crossings > 2)
}

fn axis<F: FnMut(f64) -> f64>(xs: Vec<f64>, mut r: F, threshold: f64) -> (f64, f64, bool, bool) {
    let ys: Vec<f64> = xs.iter().map(|&x| r(x)).collect();
    lobe_crossings(&xs, &ys, threshold)
}

/// Log-spaced spatial frequencies over [`SPATIAL_FREQ_RANGE`].
pub fn spatial_freq_samples(n: usize) -> Vec<f64> {
    let (a, b) = (SPATIAL_FREQ_RANGE.0.ln(), SPATIAL_FREQ_RANGE.1.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// `n` orientations covering `[θ0 − π, θ0 + π)`.
pub fn orientation_samples(theta0: f64, n: usize) -> Vec<f64> {
    let tau = std::f64::consts::TAU;
    (0..n).map(|i| theta0 - std::f64::consts::PI + tau * i as f64 / n as f64).collect()
}

/// `n` temporal frequencies covering `[−0.5, 0.5]`.
pub fn temporal_freq_samples(n: usize) -> Vec<f64> {
    (0..n).map(|i| -0.5 + i as f64 / (n - 1) as f64).collect()
}

/// Response of `model` to a translating wave, all but one parameter at the
/// preferred values.
pub(crate) fn curve_point<T: Scalar>(ev: &mut GaborEvaluator<T>, f: T, theta: T, ft: T) -> f64 {
    let p = *ev.params();
    let w = TranslatingWave {
        spatial_freq: f,
        orientation: theta,
        temporal_freq: ft,
        phase: p.phase,
    };
    ev.response(&Stimulus::Translating(w)).as_f64()
}

/// Measures the three half-magnitude bandwidths with [`BANDWIDTH_SAMPLES`] per axis.
pub fn half_magnitude_bandwidths<T: Scalar>(model: &GaborModel<T>, peak_response: T) -> Result<Bandwidths> {
    half_magnitude_bandwidths_with(model, peak_response, BANDWIDTH_SAMPLES)
}

/// As [`half_magnitude_bandwidths`] with a caller-chosen sampling density.
pub fn half_magnitude_bandwidths_with<T: Scalar>(
    model: &GaborModel<T>,
    peak_response: T,
    samples: usize,
) -> Result<Bandwidths> {
    if !(peak_response > T::zero()) {
        return Err(Error::NonPositivePeak(peak_response.as_f64()));
    }
    if samples < 3 {
        return Err(Error::InvalidParameter("at least three samples per axis".into()));
    }
    let p = model.params;
    let threshold = peak_response.as_f64() / 2.0;
    let mut ev = model.evaluator();
    let (f0, th0, ft0) = (p.spatial_freq, p.orientation, p.temporal_freq);

    let (lo, hi, tr, ml) = axis(spatial_freq_samples(samples), |f| curve_point(&mut ev, T::lit(f), th0, ft0), threshold);
    let spatial = AxisBandwidth {
        low: lo,
        high: hi,
        width: (hi / lo).log2(),
        truncated: tr,
        multi_lobe: ml,
    };

    let (lo, hi, tr, ml) = axis(
        orientation_samples(th0.as_f64(), samples),
        |th| curve_point(&mut ev, f0, T::lit(th), ft0),
        threshold,
    );
    let orientation = AxisBandwidth {
        low: lo.to_degrees(),
        high: hi.to_degrees(),
        width: (hi - lo).to_degrees(),
        truncated: tr,
        multi_lobe: ml,
    };

    let (lo, hi, tr, ml) = axis(temporal_freq_samples(samples), |ft| curve_point(&mut ev, f0, th0, T::lit(ft)), threshold);
    let temporal = AxisBandwidth {
        low: lo,
        high: hi,
        width: hi - lo,
        truncated: tr,
        multi_lobe: ml,
    };
    Ok(Bandwidths {
        spatial,
        orientation,
        temporal,
    })
}
