//! Closed-form `<s, g>` for stimuli that are plane waves within every frame.
//!
//! With `g = w_s(x) w_t(t) cos(2π(k0·x − f0 t) + φ0)` and a frame
//! `cos(2π k_t·x + φ_t)`, the product-to-sum identity and the point symmetry
//! of `w_s` on a centered grid give
//!
//! ```text
//! <s, g> = Σ_t w_t(t) · ½ [ S(k_t − k0) cos(φ_t − φ0 + 2π f0 t)
//!                         + S(k_t + k0) cos(φ_t + φ0 − 2π f0 t) ]
//! S(q)   = Σ_x w_s(x) cos(2π q·x)
//! ```
//!
//! `S` is evaluated row by row from phasor tables and memoized on `q`, so a
//! translation grid only pays for its distinct wave vectors.

use std::collections::HashMap;

use super::{rectify, GaborParams, TemporalAnchor, PARAM_COUNT};
use crate::scalar::Scalar;
use crate::stimuli::{rotate_coords, Stimulus};
use crate::volume::Extent;

/// `S(q)` together with its partial derivatives.
#[derive(Debug, Clone, Copy, Default)]
struct SpectrumGrad<T> {
    s: T,
    d_qx: T,
    d_qy: T,
    d_sigma_x: T,
    d_sigma_y: T,
    /// with respect to the envelope orientation only
    d_theta: T,
}

/// Memoized envelope spectrum samples.
#[derive(Debug, Clone, Default)]
pub struct SpectrumCache<T> {
    values: HashMap<(u64, u64), T>,
    grads: HashMap<(u64, u64), SpectrumGrad<T>>,
}

impl<T> SpectrumCache<T> {
    pub fn len(&self) -> usize {
        self.values.len() + self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.grads.clear();
    }
}

#[inline]
fn row_multiplicity<T: Scalar>(y: T) -> T {
    if y == T::zero() {
        T::one()
    } else {
        T::lit(2.0)
    }
}

fn key<T: Scalar>(qx: T, qy: T) -> (u64, u64) {
    (qx.as_f64().to_bits(), qy.as_f64().to_bits())
}

/// Fast response evaluator for one filter on one extent.
#[derive(Debug, Clone)]
pub struct GaborEvaluator<T> {
    params: GaborParams<T>,
    xs: Vec<T>,
    ys: Vec<T>,
    /// spatial envelope, row-major
    w: Vec<T>,
    w_xr2: Vec<T>,
    w_yr2: Vec<T>,
    w_xryr: Vec<T>,
    /// per-frame (frame index, centered time, temporal weight)
    frames: Vec<(T, T, T)>,
    cache: SpectrumCache<T>,
    cx: Vec<T>,
    sx: Vec<T>,
}

impl<T: Scalar> GaborEvaluator<T> {
    /// `extent` must be centered: the closed form relies on the envelope's
    /// point symmetry about the grid center.
    pub fn new(params: &GaborParams<T>, extent: Extent, anchor: TemporalAnchor) -> Self {
        assert!(extent.is_centered(), "spectral evaluation needs a centered extent");
        let xs: Vec<T> = (0..extent.width).map(|i| T::lit(extent.x_coord(i) as f64)).collect();
        // rows y < 0 mirror rows y > 0 under (x, y) -> (-x, -y), so only the
        // upper half is stored and those rows count twice
        let ys: Vec<T> = (0..extent.height)
            .map(|j| extent.y_coord(j))
            .filter(|&y| y >= 0)
            .map(|y| T::lit(y as f64))
            .collect();
        let n = xs.len() * ys.len();
        let mut w = Vec::with_capacity(n);
        let mut w_xr2 = Vec::with_capacity(n);
        let mut w_yr2 = Vec::with_capacity(n);
        let mut w_xryr = Vec::with_capacity(n);
        let (sx2, sy2) = (params.sigma_x * params.sigma_x, params.sigma_y * params.sigma_y);
        for &y in &ys {
            for &x in &xs {
                let (xr, yr) = rotate_coords(x, y, params.orientation);
                let v = (-(xr * xr / sx2 + yr * yr / sy2)).exp();
                w.push(v);
                w_xr2.push(v * xr * xr);
                w_yr2.push(v * yr * yr);
                w_xryr.push(v * xr * yr);
            }
        }
        let ta: T = anchor.center(extent.frames);
        let st2 = params.sigma_t * params.sigma_t;
        let frames = (0..extent.frames)
            .map(|t| {
                let tt = T::from_usize_lossy(t);
                let tc = tt - ta;
                (tt, tc, (-(tc * tc) / st2).exp())
            })
            .collect();
        Self {
            params: *params,
            cx: vec![T::zero(); xs.len()],
            sx: vec![T::zero(); xs.len()],
            xs,
            ys,
            w,
            w_xr2,
            w_yr2,
            w_xryr,
            frames,
            cache: SpectrumCache {
                values: HashMap::new(),
                grads: HashMap::new(),
            },
        }
    }

    pub fn params(&self) -> &GaborParams<T> {
        &self.params
    }

    pub fn cache(&self) -> &SpectrumCache<T> {
        &self.cache
    }

    fn fill_x_table(&mut self, qx: T) {
        let tp = T::two_pi();
        for (i, &x) in self.xs.iter().enumerate() {
            let (s, c) = (tp * qx * x).sin_cos();
            self.cx[i] = c;
            self.sx[i] = s;
        }
    }

    /// `S(q)` for the spatial envelope.
    pub fn spectrum(&mut self, qx: T, qy: T) -> T {
        let k = key(qx, qy);
        if let Some(v) = self.cache.values.get(&k) {
            return *v;
        }
        if let Some(g) = self.cache.grads.get(&k) {
            return g.s;
        }
        self.fill_x_table(qx);
        let tp = T::two_pi();
        let width = self.xs.len();
        let mut total = T::zero();
        for (j, &y) in self.ys.iter().enumerate() {
            let row = &self.w[j * width..(j + 1) * width];
            let (mut p, mut q) = (T::zero(), T::zero());
            for i in 0..width {
                p = p + row[i] * self.cx[i];
                q = q + row[i] * self.sx[i];
            }
            let (sy, cy) = (tp * qy * y).sin_cos();
            let m = row_multiplicity(y);
            total = total + m * (cy * p - sy * q);
        }
        self.cache.values.insert(k, total);
        total
    }

    fn spectrum_grad(&mut self, qx: T, qy: T) -> SpectrumGrad<T> {
        let k = key(qx, qy);
        if let Some(g) = self.cache.grads.get(&k) {
            return *g;
        }
        self.fill_x_table(qx);
        let tp = T::two_pi();
        let width = self.xs.len();
        let mut acc = [T::zero(); 6];
        for (j, &y) in self.ys.iter().enumerate() {
            let r = j * width..(j + 1) * width;
            let (w, a, b, c) = (&self.w[r.clone()], &self.w_xr2[r.clone()], &self.w_yr2[r.clone()], &self.w_xryr[r]);
            // row sums: w·cos, w·sin, w·x·cos, w·x·sin, then the three weighted grids
            let mut s = [T::zero(); 10];
            for i in 0..width {
                let (ci, si, x) = (self.cx[i], self.sx[i], self.xs[i]);
                let wc = w[i] * ci;
                let ws = w[i] * si;
                s[0] = s[0] + wc;
                s[1] = s[1] + ws;
                s[2] = s[2] + wc * x;
                s[3] = s[3] + ws * x;
                s[4] = s[4] + a[i] * ci;
                s[5] = s[5] + a[i] * si;
                s[6] = s[6] + b[i] * ci;
                s[7] = s[7] + b[i] * si;
                s[8] = s[8] + c[i] * ci;
                s[9] = s[9] + c[i] * si;
            }
            let (sy, cy) = (tp * qy * y).sin_cos();
            let m = row_multiplicity(y);
            acc[0] = acc[0] + m * (cy * s[0] - sy * s[1]);
            acc[1] = acc[1] + m * (cy * s[3] + sy * s[2]);
            acc[2] = acc[2] + m * y * (cy * s[1] + sy * s[0]);
            acc[3] = acc[3] + m * (cy * s[4] - sy * s[5]);
            acc[4] = acc[4] + m * (cy * s[6] - sy * s[7]);
            acc[5] = acc[5] + m * (cy * s[8] - sy * s[9]);
        }
        let p = &self.params;
        let two = T::lit(2.0);
        let g = SpectrumGrad {
            s: acc[0],
            d_qx: -tp * acc[1],
            d_qy: -tp * acc[2],
            d_sigma_x: two / (p.sigma_x * p.sigma_x * p.sigma_x) * acc[3],
            d_sigma_y: two / (p.sigma_y * p.sigma_y * p.sigma_y) * acc[4],
            d_theta: -two
                * (T::one() / (p.sigma_x * p.sigma_x) - T::one() / (p.sigma_y * p.sigma_y))
                * acc[5],
        };
        self.cache.grads.insert(k, g);
        g
    }

    /// `<s, g>` before gain, bias and rectification.
    pub fn pre_activation(&mut self, stimulus: &Stimulus<T>) -> T {
        let (k0x, k0y) = self.params.spatial_frequencies();
        let (phi0, f0) = (self.params.phase, self.params.temporal_freq);
        let tp = T::two_pi();
        let half = T::lit(0.5);
        let mut total = T::zero();
        for idx in 0..self.frames.len() {
            let (t, _, wt) = self.frames[idx];
            let fw = stimulus.frame_wave(t);
            let s1 = self.spectrum(fw.kx - k0x, fw.ky - k0y);
            let s2 = self.spectrum(fw.kx + k0x, fw.ky + k0y);
            let c1 = fw.phase - phi0 + tp * f0 * t;
            let c2 = fw.phase + phi0 - tp * f0 * t;
            total = total + wt * half * (s1 * c1.cos() + s2 * c2.cos());
        }
        total
    }

    pub fn response(&mut self, stimulus: &Stimulus<T>) -> T {
        let pre = self.pre_activation(stimulus);
        rectify(&self.params, pre)
    }

    /// Pre-activation and its gradient with respect to the first seven
    /// parameters (gain and bias do not enter `<s, g>`).
    pub fn pre_activation_with_gradient(&mut self, stimulus: &Stimulus<T>) -> (T, [T; 7]) {
        let p = self.params;
        let (so, co) = p.orientation.sin_cos();
        let (k0x, k0y) = (p.spatial_freq * co, p.spatial_freq * so);
        let tp = T::two_pi();
        let half = T::lit(0.5);
        let two = T::lit(2.0);
        let st3 = p.sigma_t * p.sigma_t * p.sigma_t;
        let mut pre = T::zero();
        let mut g = [T::zero(); 7];
        for idx in 0..self.frames.len() {
            let (t, tc, wt) = self.frames[idx];
            let fw = stimulus.frame_wave(t);
            let a = self.spectrum_grad(fw.kx - k0x, fw.ky - k0y);
            let b = self.spectrum_grad(fw.kx + k0x, fw.ky + k0y);
            let c1 = fw.phase - p.phase + tp * p.temporal_freq * t;
            let c2 = fw.phase + p.phase - tp * p.temporal_freq * t;
            let (sn1, cs1) = c1.sin_cos();
            let (sn2, cs2) = c2.sin_cos();
            let hw = half * wt;
            let frame = hw * (a.s * cs1 + b.s * cs2);
            pre = pre + frame;

            // q1 = k_t − k0, q2 = k_t + k0 with k0 = F0 (cos θ0, sin θ0)
            let ds1_df = -(a.d_qx * co + a.d_qy * so);
            let ds2_df = b.d_qx * co + b.d_qy * so;
            let ds1_dth = p.spatial_freq * (a.d_qx * so - a.d_qy * co) + a.d_theta;
            let ds2_dth = -p.spatial_freq * (b.d_qx * so - b.d_qy * co) + b.d_theta;

            g[0] = g[0] + hw * (ds1_df * cs1 + ds2_df * cs2);
            g[1] = g[1] + hw * (ds1_dth * cs1 + ds2_dth * cs2);
            g[2] = g[2] + hw * tp * t * (-a.s * sn1 + b.s * sn2);
            g[3] = g[3] + hw * (a.s * sn1 - b.s * sn2);
            g[4] = g[4] + hw * (a.d_sigma_x * cs1 + b.d_sigma_x * cs2);
            g[5] = g[5] + hw * (a.d_sigma_y * cs1 + b.d_sigma_y * cs2);
            g[6] = g[6] + frame * two * tc * tc / st3;
        }
        (pre, g)
    }

    /// Rectified response and its gradient over all nine parameters, in
    /// [`GaborParams::to_array`] order. The gradient is zero where the
    /// rectifier is inactive.
    pub fn response_with_gradient(&mut self, stimulus: &Stimulus<T>) -> (T, [T; PARAM_COUNT]) {
        let (pre, g) = self.pre_activation_with_gradient(stimulus);
        let p = self.params;
        let lin = p.gain * (pre + p.bias);
        let mut out = [T::zero(); PARAM_COUNT];
        if lin > T::zero() {
            for i in 0..7 {
                out[i] = p.gain * g[i];
            }
            out[7] = pre + p.bias;
            out[8] = p.gain;
            (lin, out)
        } else {
            (T::zero(), out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gabor::{gabor_kernel, tests::sample_params};
    use crate::stimuli::{DilatingWave, RotatingWave, TranslatingWave};
    use proptest::prelude::*;

    fn stimuli() -> Vec<Stimulus<f64>> {
        vec![
            Stimulus::Translating(TranslatingWave::new(1.0 / 24.0, 0.6, 0.15, 0.3).unwrap()),
            Stimulus::Translating(TranslatingWave::new(0.031, 2.0, -0.27, -1.0).unwrap()),
            Stimulus::Dilating(DilatingWave::new(1.0 / 30.0, 0.5, 1.3, 0.2).unwrap()),
            Stimulus::Rotating(RotatingWave::new(1.0 / 20.0, 0.1, 0.4, 1.1).unwrap()),
        ]
    }

    #[test]
    fn agrees_with_direct_dot_product() {
        for anchor in [TemporalAnchor::FirstFrame, TemporalAnchor::Midpoint] {
            let e = Extent::new(25, 21, 4).unwrap();
            let g = sample_params();
            let kernel = gabor_kernel(&g, e, anchor);
            let mut ev = GaborEvaluator::new(&g, e, anchor);
            for s in stimuli() {
                let direct = s.render(e).dot(&kernel).unwrap();
                let fast = ev.pre_activation(&s);
                assert!((direct - fast).abs() < 1e-10 * (1.0 + direct.abs()), "{direct} vs {fast}");
                let (with_grad, _) = ev.pre_activation_with_gradient(&s);
                assert!((with_grad - fast).abs() < 1e-10 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let e = Extent::new(21, 21, 3).unwrap();
        let mut g = sample_params();
        g.bias = 0.5;
        for s in stimuli() {
            let mut ev = GaborEvaluator::new(&g, e, TemporalAnchor::FirstFrame);
            let (r, grad) = ev.response_with_gradient(&s);
            if r == 0.0 {
                continue;
            }
            let base = g.to_array();
            for i in 0..PARAM_COUNT {
                let h = 1e-6 * base[i].abs().max(1e-2);
                let eval = |d: f64| {
                    let mut a = base;
                    a[i] += d;
                    GaborEvaluator::new(&GaborParams::from_array(a), e, TemporalAnchor::FirstFrame).response(&s)
                };
                let num = (eval(h) - eval(-h)) / (2.0 * h);
                assert!(
                    (num - grad[i]).abs() < 1e-5 * (1.0 + num.abs()),
                    "param {i}: numeric {num} analytic {}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn translation_grid_reuses_spectrum_samples() {
        let e = Extent::new(15, 15, 2).unwrap();
        let mut ev = GaborEvaluator::new(&sample_params(), e, TemporalAnchor::FirstFrame);
        for i in 0..20 {
            let w = TranslatingWave::new(0.04, 0.3, -0.2 + 0.02 * i as f64, 0.1 * i as f64).unwrap();
            ev.response(&Stimulus::Translating(w));
        }
        assert_eq!(ev.cache().len(), 2);
    }

    #[test]
    fn single_precision_tracks_double() {
        let e = Extent::new(31, 31, 2).unwrap();
        let g = sample_params();
        let g32 = GaborParams::<f32>::from_array(g.to_array().map(|v| v as f32));
        let s = TranslatingWave::new(1.0 / 24.0, 0.6, 0.15, 0.3).unwrap();
        let s32 = TranslatingWave::new(1.0f32 / 24.0, 0.6, 0.15, 0.3).unwrap();
        let a = GaborEvaluator::new(&g, e, TemporalAnchor::FirstFrame).response(&Stimulus::Translating(s));
        let b = GaborEvaluator::new(&g32, e, TemporalAnchor::FirstFrame).response(&Stimulus::Translating(s32));
        assert!(((b as f64) - a).abs() < 1e-4 * a);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn fast_route_equals_direct_route(
            f in 0.005f64..0.2, th in 0.0f64..6.28, ft in -0.5f64..0.5, ph in -3.14f64..3.14,
            sx in 2.0f64..20.0, sy in 2.0f64..20.0, st in 0.3f64..4.0,
            sf in 0.005f64..0.2, sth in 0.0f64..6.28, sft in -0.5f64..0.5, sph in -3.14f64..3.14,
        ) {
            let e = Extent::new(17, 19, 3).unwrap();
            let g = GaborParams { spatial_freq: f, orientation: th, temporal_freq: ft, phase: ph,
                sigma_x: sx, sigma_y: sy, sigma_t: st, gain: 1.0, bias: 0.0 };
            let s = Stimulus::Translating(TranslatingWave::new(sf, sth, sft, sph).unwrap());
            let direct = s.render(e).dot(&gabor_kernel(&g, e, TemporalAnchor::FirstFrame)).unwrap();
            let fast = GaborEvaluator::new(&g, e, TemporalAnchor::FirstFrame).pre_activation(&s);
            let scale = gabor_kernel(&g, e, TemporalAnchor::FirstFrame).energy().sqrt() * (e.len() as f64).sqrt();
            prop_assert!((direct - fast).abs() < 1e-12 * scale);
        }
    }
}
