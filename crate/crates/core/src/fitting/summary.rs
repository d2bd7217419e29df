use serde::Serialize;

use super::FitResult;
use crate::gabor::{half_magnitude_bandwidths, Bandwidths, GaborModel, TemporalAnchor};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::volume::Extent;

/// `[q1, median, q3]` with linear interpolation between order statistics
/// (`h = (n−1)p`). `None` for empty input or any NaN.
pub fn quartiles(values: &[f64]) -> Option<[f64; 3]> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let at = |p: f64| {
        let h = (v.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    };
    Some([at(0.25), at(0.5), at(0.75)])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub filters: usize,
    pub converged: usize,
    /// Quartiles of the normalized cost.
    pub normalized_cost: Option<[f64; 3]>,
}

impl FitSummary {
    pub fn new<T: Scalar>(fits: &[FitResult<T>]) -> Self {
        let costs: Vec<f64> = fits.iter().map(|f| f.costs.normalized.as_f64()).collect();
        Self {
            filters: fits.len(),
            converged: fits.iter().filter(|f| f.converged).count(),
            normalized_cost: quartiles(&costs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthSummary {
    /// Filters kept: those at or below the 75th percentile of normalized cost.
    pub filter_ids: Vec<usize>,
    pub bandwidths: Vec<Bandwidths>,
    pub spatial_octaves: Option<[f64; 3]>,
    pub orientation_deg: Option<[f64; 3]>,
    pub temporal_cpf: Option<[f64; 3]>,
    /// Kept filters whose half-magnitude lobe reached a sampling edge, per axis.
    pub truncated: [usize; 3],
}

impl BandwidthSummary {
    /// Bandwidths of the best-fitting 75% of filters (ties at the cutoff kept).
    pub fn new<T: Scalar>(fits: &[FitResult<T>], extent: Extent, anchor: TemporalAnchor) -> Result<Self> {
        let costs: Vec<f64> = fits.iter().map(|f| f.costs.normalized.as_f64()).collect();
        let cutoff = quartiles(&costs).map_or(f64::NEG_INFINITY, |q| q[2]);
        let mut filter_ids = Vec::new();
        let mut bandwidths = Vec::new();
        for (f, &c) in fits.iter().zip(&costs) {
            if c <= cutoff {
                let model = GaborModel::new(f.params, extent, anchor);
                bandwidths.push(half_magnitude_bandwidths(&model, model.peak_response())?);
                filter_ids.push(f.filter_id);
            }
        }
        let col = |pick: fn(&Bandwidths) -> &crate::gabor::AxisBandwidth| {
            let v: Vec<f64> = bandwidths.iter().map(|b| pick(b).width).collect();
            let t = bandwidths.iter().filter(|b| pick(b).truncated).count();
            (quartiles(&v), t)
        };
        let (spatial_octaves, ts) = col(|b| &b.spatial);
        let (orientation_deg, to) = col(|b| &b.orientation);
        let (temporal_cpf, tt) = col(|b| &b.temporal);
        Ok(Self {
            filter_ids,
            bandwidths,
            spatial_octaves,
            orientation_deg,
            temporal_cpf,
            truncated: [ts, to, tt],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn quartile_examples() {
        assert_eq!(quartiles(&[1.0, 2.0, 3.0, 4.0, 5.0]), Some([2.0, 3.0, 4.0]));
        assert_eq!(quartiles(&[4.0, 1.0, 3.0, 2.0]), Some([1.75, 2.5, 3.25]));
        assert_eq!(quartiles(&[7.0]), Some([7.0; 3]));
        assert_eq!(quartiles(&[]), None);
        assert_eq!(quartiles(&[1.0, f64::NAN]), None);
    }

    proptest! {
        #[test]
        fn quartiles_are_ordered_and_bracketed(v in prop::collection::vec(-1e6f64..1e6, 1..60)) {
            let [a, b, c] = quartiles(&v).unwrap();
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo <= a && a <= b && b <= c && c <= hi);
        }
    }
}
