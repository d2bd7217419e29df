use std::io::Write;

use serde::Serialize;

use super::lm::{least_squares, Evaluation, LmOptions, StopReason};
use super::{PeakResponse, ProfileAxis, SpectralProfile};
use crate::error::{Error, Result};
use crate::gabor::{GaborEvaluator, GaborParams, TemporalAnchor, CSV_COLUMNS, PARAM_COUNT};
use crate::scalar::{format_round_trip, wrap_pi, wrap_two_pi, Scalar};
use crate::stimuli::Stimulus;
use crate::volume::Extent;

/// Box constraints on the nine parameters, [`GaborParams::to_array`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitBounds<T> {
    pub lower: [T; PARAM_COUNT],
    pub upper: [T; PARAM_COUNT],
}

impl<T: Scalar> FitBounds<T> {
    /// Default box for a filter with peak response `r0`. Angles are free.
    pub fn for_peak(r0: T) -> Self {
        let inf = T::infinity();
        let l = T::lit;
        Self {
            lower: [l(1.0 / 1600.0), -inf, l(-0.5), -inf, l(4.0), l(4.0), l(0.25), l(1e-12), l(-10.0) * r0],
            upper: [l(1.0 / 32.0), inf, l(0.5), inf, l(800.0), l(800.0), l(8.0), l(1e6), r0],
        }
    }

    pub fn clamp(&self, x: [T; PARAM_COUNT]) -> [T; PARAM_COUNT] {
        let mut out = x;
        for i in 0..PARAM_COUNT {
            out[i] = x[i].max(self.lower[i]).min(self.upper[i]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub options: LmOptions,
    pub anchor: TemporalAnchor,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            options: LmOptions::default(),
            anchor: TemporalAnchor::FirstFrame,
        }
    }
}

/// Squared-error costs, per curve and combined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Costs<T> {
    pub total: T,
    pub spatial: T,
    pub orientation: T,
    pub temporal: T,
    /// `total / r̂0²`
    pub normalized: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub filter_id: usize,
    pub params: GaborParams<T>,
    pub peak_response: T,
    pub costs: Costs<T>,
    pub converged: bool,
    pub stop: StopReason,
    pub iterations: usize,
    /// Parameter sits on its lower or upper bound.
    pub active_bounds: [bool; PARAM_COUNT],
    /// Model minus measurement along each curve.
    pub residuals: [Vec<T>; 3],
    /// Accepted-step cost history.
    pub cost_history: Vec<T>,
}

/// `L / r̂0²`.
pub fn normalized_cost<T: Scalar>(cost: T, peak: T) -> Result<T> {
    if !(peak > T::zero()) {
        return Err(Error::NonPositivePeak(peak.as_f64()));
    }
    Ok(cost / (peak * peak))
}

/// Starting point: frequency, orientation and phase from the peak stimulus,
/// `σx = σy = λ0/2`, `σt = 1`, `b = 0`, and the gain that reproduces r̂0.
pub fn initial_params<T: Scalar>(
    peak: &PeakResponse<T>,
    extent: Extent,
    anchor: TemporalAnchor,
    bounds: &FitBounds<T>,
) -> Result<GaborParams<T>> {
    let Stimulus::Translating(w) = peak.stimulus else {
        return Err(Error::InvalidParameter("Gabor fits need a translation peak".into()));
    };
    let half = T::one() / (T::lit(2.0) * w.spatial_freq);
    let mut p = GaborParams {
        spatial_freq: w.spatial_freq,
        orientation: w.orientation,
        temporal_freq: w.temporal_freq,
        phase: w.phase,
        sigma_x: half,
        sigma_y: half,
        sigma_t: T::one(),
        gain: T::one(),
        bias: T::zero(),
    };
    p = GaborParams::from_array(bounds.clamp(p.to_array()));
    p.bias = T::zero().max(bounds.lower[8]).min(bounds.upper[8]);
    let pre = GaborEvaluator::new(&p, extent, anchor).pre_activation(&peak.stimulus);
    if pre > T::zero() {
        p.gain = (peak.value / pre).max(bounds.lower[7]).min(bounds.upper[7]);
    }
    Ok(p)
}

/// Flips to the equivalent representation with `f_t0 ≥ 0` and wraps angles.
fn canonical<T: Scalar>(mut p: GaborParams<T>) -> GaborParams<T> {
    if p.temporal_freq < T::zero() {
        p.orientation = p.orientation + T::PI();
        p.temporal_freq = -p.temporal_freq;
        p.phase = -p.phase;
    }
    p.orientation = wrap_two_pi(p.orientation);
    p.phase = wrap_pi(p.phase);
    p
}

fn model_residuals<T: Scalar>(
    x: &[T],
    profile: &SpectralProfile<T>,
    extent: Extent,
    anchor: TemporalAnchor,
    jacobian: bool,
) -> Evaluation<T> {
    let p = GaborParams::from_array(x.try_into().expect("nine parameters"));
    let mut ev = GaborEvaluator::new(&p, extent, anchor);
    let mut residuals = Vec::with_capacity(profile.len());
    let mut jac = Vec::with_capacity(if jacobian { profile.len() * PARAM_COUNT } else { 0 });
    for c in &profile.curves {
        for (s, &r) in c.stimuli.iter().zip(&c.responses) {
            if jacobian {
                let (m, g) = ev.response_with_gradient(s);
                residuals.push(m - r);
                jac.extend_from_slice(&g);
            } else {
                residuals.push(ev.response(s) - r);
            }
        }
    }
    Evaluation {
        residuals,
        jacobian: jac,
    }
}

/// Fits the nine-parameter model to a filter's three profile curves.
///
/// Frequency, orientation and phase start at the peak stimulus and are
/// refined together with the envelope, gain and bias. A fit that hits the
/// iteration cap is returned with `converged = false`.
pub fn fit_gabor<T: Scalar>(
    profile: &SpectralProfile<T>,
    peak: &PeakResponse<T>,
    extent: Extent,
    config: &FitConfig,
) -> Result<FitResult<T>> {
    fit_gabor_with_bounds(profile, peak, extent, config, &FitBounds::for_peak(peak.value))
}

pub fn fit_gabor_with_bounds<T: Scalar>(
    profile: &SpectralProfile<T>,
    peak: &PeakResponse<T>,
    extent: Extent,
    config: &FitConfig,
    bounds: &FitBounds<T>,
) -> Result<FitResult<T>> {
    if !(peak.value > T::zero()) {
        return Err(Error::NonPositivePeak(peak.value.as_f64()));
    }
    if profile.is_empty() {
        return Err(Error::InvalidParameter("empty profile".into()));
    }
    let start = initial_params(peak, extent, config.anchor, bounds)?;
    let report = least_squares(&start.to_array(), &bounds.lower, &bounds.upper, &config.options, |x| {
        model_residuals(x, profile, extent, config.anchor, true)
    });
    let x: [T; PARAM_COUNT] = report.x.clone().try_into().expect("nine parameters");
    let active_bounds = std::array::from_fn(|i| x[i] <= bounds.lower[i] || x[i] >= bounds.upper[i]);
    let params = canonical(GaborParams::from_array(x));

    let eval = model_residuals(&x, profile, extent, config.anchor, false);
    let mut residuals: [Vec<T>; 3] = Default::default();
    let mut offset = 0;
    for (k, c) in profile.curves.iter().enumerate() {
        residuals[k] = eval.residuals[offset..offset + c.stimuli.len()].to_vec();
        offset += c.stimuli.len();
    }
    let sq = |v: &[T]| v.iter().fold(T::zero(), |a, &r| a + r * r);
    let (spatial, orientation, temporal) = (sq(&residuals[0]), sq(&residuals[1]), sq(&residuals[2]));
    let total = spatial + orientation + temporal;
    Ok(FitResult {
        filter_id: peak.filter_id,
        params,
        peak_response: peak.value,
        costs: Costs {
            total,
            spatial,
            orientation,
            temporal,
            normalized: normalized_cost(total, peak.value)?,
        },
        converged: report.converged(),
        stop: report.stop,
        iterations: report.iterations,
        active_bounds,
        residuals,
        cost_history: report.history,
    })
}

pub const FIT_CSV_HEADER: &str = "filter_id,peak_response,spatial_freq_cpp,orientation_deg,temporal_freq_cpf,phase_deg,sigma_x_px,sigma_y_px,sigma_t_frames,gain,bias,cost_total,cost_spatial,cost_orientation,cost_temporal,cost_normalized,converged,iterations,active_bounds";

/// One row per fit; `active_bounds` lists bounded parameter columns joined by `|`.
pub fn write_fit_csv<T: Scalar, W: Write>(results: &[FitResult<T>], mut w: W) -> Result<()> {
    writeln!(w, "{FIT_CSV_HEADER}")?;
    for r in results {
        let active: Vec<&str> = CSV_COLUMNS
            .iter()
            .zip(r.active_bounds)
            .filter(|(_, a)| *a)
            .map(|(c, _)| *c)
            .collect();
        let c = &r.costs;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.filter_id,
            format_round_trip(r.peak_response),
            r.params.csv_row().join(","),
            format_round_trip(c.total),
            format_round_trip(c.spatial),
            format_round_trip(c.orientation),
            format_round_trip(c.temporal),
            format_round_trip(c.normalized),
            r.converged,
            r.iterations,
            active.join("|"),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Measured and fitted curves side by side, for inspecting systematic deviations.
pub fn write_error_patterns<T: Scalar, W: Write>(
    pairs: &[(&SpectralProfile<T>, &FitResult<T>)],
    mut w: W,
) -> Result<()> {
    writeln!(w, "filter_id,axis,value,unit,measured,fitted,residual")?;
    for (profile, fit) in pairs {
        for (k, c) in profile.curves.iter().enumerate() {
            for i in 0..c.values.len() {
                let res = fit.residuals[k][i];
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    profile.filter_id,
                    c.axis.as_str(),
                    c.values[i],
                    c.axis.unit(),
                    format_round_trip(c.responses[i]),
                    format_round_trip(c.responses[i] + res),
                    format_round_trip(res),
                )?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

impl<T: Scalar> FitResult<T> {
    pub fn residual_curve(&self, axis: ProfileAxis) -> &[T] {
        &self.residuals[axis as usize]
    }
}
