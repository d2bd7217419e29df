//! Synthetic dilation, rotation, translation and occlusion filters and the
//! structural checks run on their spectra.

use serde::Serialize;

use super::{full_lattice, lattice_wave, phase_map, superthreshold_lobes, LatticePlane, Lobe};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::stimuli::{
    dilating_wave_at, gen_occlusion_stimulus, rotating_wave_at, translating_wave_at, DilatingWave, OcclusionParams,
    RotatingWave, TranslatingWave,
};
use crate::volume::{Extent, Volume};

/// Share of the map's maximum a coefficient needs to count towards a lobe.
pub const LOBE_THRESHOLD: f64 = 0.5;

/// Parameters of the simulated filters. Every filter is a wave under a
/// spatial Gaussian window, on a multi-frame volume so temporal structure
/// is resolvable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Simulation<T> {
    pub extent: Extent,
    /// cycles/pixel, shared by every filter
    pub spatial_freq: T,
    /// Gaussian window width, pixels
    pub sigma: T,
    /// cycles/frame of the translating (and occluding) wave
    pub temporal_freq: T,
    pub dilation_scale: T,
    /// radians/frame
    pub angular_velocity: T,
}

impl<T: Scalar> Default for Simulation<T> {
    /// 33×33×8, F = 4/33, σ = 8 px, f_t = 1/8, h = 1.05, ω = 0.1 rad/frame.
    fn default() -> Self {
        Self {
            extent: Extent::new(33, 33, 8).expect("valid extent"),
            spatial_freq: T::lit(4.0 / 33.0),
            sigma: T::lit(8.0),
            temporal_freq: T::lit(1.0 / 8.0),
            dilation_scale: T::lit(1.05),
            angular_velocity: T::lit(0.1),
        }
    }
}

/// Outcome of the three structural checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralStructure {
    pub dilation_out_of_phase: f64,
    pub translation_out_of_phase: f64,
    /// Lobes in the spatial plane at f_t = 0, as `(mx, my)` of each peak.
    pub rotation_lobes: Vec<[i64; 2]>,
    /// Largest |mt| among superthreshold rotation coefficients anywhere.
    pub rotation_max_abs_mt: i64,
    /// Lobes in the (F, f_t) plane, as `(mx, mt)` of each peak.
    pub occlusion_lobes: Vec<[i64; 2]>,
}

impl SpectralStructure {
    pub fn dilation_ok(&self) -> bool {
        self.dilation_out_of_phase > self.translation_out_of_phase
    }

    pub fn rotation_ok(&self) -> bool {
        match self.rotation_lobes[..] {
            [a, b] => a[0] == -b[0] && a[1] == -b[1] && self.rotation_max_abs_mt <= 1,
            _ => false,
        }
    }

    pub fn occlusion_ok(&self) -> bool {
        matches!(self.occlusion_lobes[..], [a, b] if a != b)
    }
}

impl<T: Scalar> Simulation<T> {
    fn windowed(&self, f: impl Fn(T, T, T) -> T) -> Volume<T> {
        let two_s2 = T::lit(2.0) * self.sigma * self.sigma;
        Volume::from_fn(self.extent, |x: T, y: T, t: T| (-(x * x + y * y) / two_s2).exp() * f(x, y, t))
    }

    pub fn translation_wave(&self) -> TranslatingWave<T> {
        TranslatingWave {
            spatial_freq: self.spatial_freq,
            orientation: T::zero(),
            temporal_freq: self.temporal_freq,
            phase: T::zero(),
        }
    }

    pub fn translation_filter(&self) -> Volume<T> {
        let w = self.translation_wave();
        self.windowed(|x, y, t| translating_wave_at(&w, x, y, t))
    }

    pub fn dilation_filter(&self) -> Volume<T> {
        let w = DilatingWave {
            spatial_freq: self.spatial_freq,
            orientation: T::zero(),
            scale: self.dilation_scale,
            phase: T::zero(),
        };
        self.windowed(|x, y, t| dilating_wave_at(&w, x, y, t))
    }

    pub fn rotation_filter(&self) -> Volume<T> {
        let w = RotatingWave {
            spatial_freq: self.spatial_freq,
            orientation: T::zero(),
            angular_velocity: self.angular_velocity,
            phase: T::zero(),
        };
        self.windowed(|x, y, t| rotating_wave_at(&w, x, y, t))
    }

    /// Occluder: the translating wave; occluded: twice the spatial frequency,
    /// static. The boundary crosses the window center at the clip midpoint.
    pub fn occlusion_params(&self) -> OcclusionParams<T> {
        let a = self.translation_wave();
        let b = TranslatingWave {
            spatial_freq: T::lit(2.0) * self.spatial_freq,
            temporal_freq: T::zero(),
            ..a
        };
        let mut p = OcclusionParams::new(a, b);
        p.boundary_x = -a.speed() * self.extent.temporal_center::<T>();
        p
    }

    pub fn occlusion_filter(&self) -> Result<Volume<T>> {
        Ok(gen_occlusion_stimulus(&self.occlusion_params(), self.extent)?.0)
    }

    pub fn structure(&self) -> Result<SpectralStructure> {
        let lattice = full_lattice(self.extent, T::zero());
        let dilation = phase_map(&self.dilation_filter(), &lattice)?;
        let translation = phase_map(&self.translation_filter(), &lattice)?;

        let rotation = self.rotation_filter();
        let full = phase_map(&rotation, &lattice)?;
        let max = full.entries.iter().fold(T::zero(), |a, e| a.max(e.response));
        let threshold = T::lit(LOBE_THRESHOLD) * max;
        let rotation_max_abs_mt = full
            .entries
            .iter()
            .filter(|e| e.response >= threshold)
            .map(|e| e.m[2].abs())
            .max()
            .unwrap_or(0);
        let plane = LatticePlane::Spatial { mt: 0 }.phase_map(&rotation, T::zero())?;
        let rotation_lobes = peaks(&plane.responses(), plane.shape.unwrap(), threshold, |l| {
            let m = plane.entries[l.peak.0 * plane.shape.unwrap().1 + l.peak.1].m;
            [m[0], m[1]]
        });

        // Best-phase rectified response at each frequency is the filter amplitude.
        let occ = LatticePlane::SpaceTime { my: 0 }.phase_map(&self.occlusion_filter()?, T::zero())?;
        let (rows, cols) = occ.shape.unwrap();
        let half: Vec<usize> = (0..rows * cols).filter(|i| occ.entries[*i].m[0] >= 0).collect();
        let half_cols = half.len() / rows;
        let amps: Vec<T> = half.iter().map(|&i| occ.entries[i].power).collect();
        let occ_max = amps.iter().fold(T::zero(), |a, &b| a.max(b));
        let occlusion_lobes = peaks(&amps, (rows, half_cols), T::lit(LOBE_THRESHOLD) * occ_max, |l| {
            let m = occ.entries[half[l.peak.0 * half_cols + l.peak.1]].m;
            [m[0], m[2]]
        });

        Ok(SpectralStructure {
            dilation_out_of_phase: dilation.out_of_phase_fraction(),
            translation_out_of_phase: translation.out_of_phase_fraction(),
            rotation_lobes,
            rotation_max_abs_mt,
            occlusion_lobes,
        })
    }
}

fn peaks<T: Scalar>(values: &[T], shape: (usize, usize), threshold: T, at: impl Fn(&Lobe) -> [i64; 2]) -> Vec<[i64; 2]> {
    superthreshold_lobes(values, shape, threshold).iter().map(at).collect()
}

/// Dot products of sine and cosine waves at `m` and `−m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhasePhenomena {
    pub m: [i64; 3],
    /// `⟨sin(k), sin(−k)⟩`, negative
    pub sin_sin: f64,
    /// `⟨cos(k), cos(−k)⟩`, positive
    pub cos_cos: f64,
    /// `⟨sin(k), cos(k)⟩`, vanishing
    pub sin_cos: f64,
    /// `‖cos(k)‖²`
    pub energy: f64,
}

impl PhasePhenomena {
    pub fn holds(&self) -> bool {
        self.sin_sin < 0.0 && self.cos_cos > 0.0 && self.sin_cos.abs() < 1e-6 * self.energy
    }
}

/// The three phase-dependent products for lattice frequency `m`, which must
/// not be its own conjugate.
pub fn phase_phenomena<T: Scalar>(extent: Extent, m: [i64; 3]) -> Result<PhasePhenomena> {
    let neg = [-m[0], -m[1], -m[2]];
    let sin = T::FRAC_PI_2();
    let render = |m, phase| -> Volume<T> {
        let w = lattice_wave(m, extent, phase);
        Volume::from_fn(extent, |x, y, t| translating_wave_at(&w, x, y, t))
    };
    // sin(x) = cos(x − π/2)
    let s = render(m, -sin);
    let s_neg = render(neg, -sin);
    let c = render(m, T::zero());
    let c_neg = render(neg, T::zero());
    Ok(PhasePhenomena {
        m,
        sin_sin: s.dot(&s_neg)?.as_f64(),
        cos_cos: c.dot(&c_neg)?.as_f64(),
        sin_cos: s.dot(&c)?.as_f64(),
        energy: c.energy().as_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_simulation_shows_all_three_structures() {
        let s = Simulation::<f64>::default().structure().unwrap();
        assert!(s.dilation_ok(), "{s:?}");
        assert!(s.rotation_ok(), "{s:?}");
        assert!(s.occlusion_ok(), "{s:?}");
    }

    #[test]
    fn matched_translation_filter_is_in_phase_at_its_frequency() {
        let sim = Simulation::<f64>::default();
        let w = sim.translation_wave();
        let map = phase_map(&sim.translation_filter(), &[lattice_wave([4, 0, 1], sim.extent, 0.0), w]).unwrap();
        assert_eq!(map.entries[0].m, map.entries[1].m);
        assert!(map.entries[0].psi.unwrap() < 1e-9);
    }

    #[test]
    fn occlusion_tails_are_out_of_phase() {
        let sim = Simulation::<f64>::default();
        let map = LatticePlane::SpaceTime { my: 0 }
            .phase_map(&sim.occlusion_filter().unwrap(), 0.0)
            .unwrap();
        assert!(map.entries.iter().any(|e| e.out_of_phase));
    }

    #[test]
    fn phase_phenomena_signs() {
        let e = Extent::new(15, 15, 4).unwrap();
        for m in [[1, 0, 0], [3, -2, 1], [0, 5, -1], [7, 7, 1]] {
            let p = phase_phenomena::<f64>(e, m).unwrap();
            assert!(p.holds(), "{p:?}");
            assert!((p.cos_cos / p.energy - 1.0).abs() < 1e-9);
            assert!((p.sin_sin / p.energy + 1.0).abs() < 1e-9);
        }
    }
}
