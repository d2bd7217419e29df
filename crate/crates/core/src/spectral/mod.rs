//! Frequency-domain view of filters: 3-D DFT, the phase angle ψ between a
//! probe wave's coefficient and a filter's coefficient, power-masked phase
//! maps and rectified response maps on the integer-frequency lattice.
//!
//! A translating wave whose frequencies are integer multiples of the
//! volume's fundamentals, `(kx·W, ky·H, f_t·T) = (mx, my, mt)`, has exactly
//! one coefficient pair in the DFT. Its dot product with a filter is then
//! `(2/N)·Re(p·q̄) = (2/N)|p||q| cos ψ`, so the rectified response vanishes
//! wherever ψ ≥ π/2.

mod lobes;
mod simulate;

pub use lobes::{superthreshold_lobes, Lobe};
pub use simulate::{phase_phenomena, PhasePhenomena, Simulation, SpectralStructure, LOBE_THRESHOLD};

use std::io::Write;

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::scalar::{format_round_trip, wrap_two_pi, Scalar};
use crate::stimuli::{GridSpec, Stimulus, TranslatingWave};
use crate::volume::{Extent, Volume};

/// Mask threshold relative to the strongest filter coefficient in a map.
pub const POWER_MASK_FRACTION: f64 = 0.01;

/// Complex DFT coefficients, stored in the same order as [`Volume`] samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T> {
    dims: (usize, usize, usize),
    data: Vec<Complex<T>>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.data
    }

    fn index(&self, k: [i64; 3]) -> usize {
        let (w, h, t) = self.dims;
        let wrap = |m: i64, n: usize| m.rem_euclid(n as i64) as usize;
        (wrap(k[2], t) * h + wrap(k[1], h)) * w + wrap(k[0], w)
    }

    /// Coefficient at signed integer frequency `k`, wrapped modulo the dimensions.
    pub fn get(&self, k: [i64; 3]) -> Complex<T> {
        self.data[self.index(k)]
    }

    pub fn amplitude(&self, k: [i64; 3]) -> T {
        self.get(k).norm()
    }

    pub fn phase(&self, k: [i64; 3]) -> T {
        self.get(k).arg()
    }

    /// `Σ|X|² / N`, equal to the signal energy by Parseval.
    pub fn energy(&self) -> T {
        let n = T::from_usize_lossy(self.data.len());
        self.data.iter().map(|c| c.norm_sqr()).sum::<T>() / n
    }
}

fn fft_axes<T: Scalar>(data: &mut [Complex<T>], (w, h, t): (usize, usize, usize), inverse: bool) {
    let mut planner = FftPlanner::<T>::new();
    let plan = |n: usize, planner: &mut FftPlanner<T>| {
        if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        }
    };
    // x: contiguous rows
    let fx = plan(w, &mut planner);
    for row in data.chunks_exact_mut(w) {
        fx.process(row);
    }
    // y and t: gather strided lines
    let fy = plan(h, &mut planner);
    let mut line = vec![Complex::new(T::zero(), T::zero()); h.max(t)];
    for f in 0..t {
        for x in 0..w {
            for y in 0..h {
                line[y] = data[(f * h + y) * w + x];
            }
            fy.process(&mut line[..h]);
            for y in 0..h {
                data[(f * h + y) * w + x] = line[y];
            }
        }
    }
    let ft = plan(t, &mut planner);
    for y in 0..h {
        for x in 0..w {
            for f in 0..t {
                line[f] = data[(f * h + y) * w + x];
            }
            ft.process(&mut line[..t]);
            for f in 0..t {
                data[(f * h + y) * w + x] = line[f];
            }
        }
    }
}

/// `X[k] = Σ_n x[n] e^{−2πi k·n/N}`, separably over x, y and t, with `n`
/// the array index (not the centered coordinate).
pub fn dft3<T: Scalar>(v: &Volume<T>) -> Spectrum<T> {
    let dims = v.extent().dims();
    let mut data: Vec<Complex<T>> = v.samples().iter().map(|&s| Complex::new(s, T::zero())).collect();
    fft_axes(&mut data, dims, false);
    Spectrum { dims, data }
}

/// Inverse of [`dft3`]; keeps the real part.
pub fn idft3<T: Scalar>(s: &Spectrum<T>, extent: Extent) -> Result<Volume<T>> {
    if extent.dims() != s.dims {
        return Err(Error::ExtentMismatch {
            expected: extent.dims(),
            actual: s.dims,
        });
    }
    let mut data = s.data.clone();
    fft_axes(&mut data, s.dims, true);
    let n = T::from_usize_lossy(data.len());
    Volume::from_vec(extent, data.into_iter().map(|c| c.re / n).collect())
}

/// Angle between two coefficients seen as real 2-vectors, in `[0, π]`.
/// `None` when either has zero magnitude.
pub fn phase_difference<T: Scalar>(p: Complex<T>, q: Complex<T>) -> Option<T> {
    let (a, b) = (p.norm(), q.norm());
    if !(a > T::zero() && b > T::zero()) {
        return None;
    }
    let c = (p.re * q.re + p.im * q.im) / (a * b);
    Some(c.max(-T::one()).min(T::one()).acos())
}

/// `(mx, my, mt)` of a translating wave, or an error if any component is not
/// an integer multiple of the fundamental.
pub fn lattice_index<T: Scalar>(wave: &TranslatingWave<T>, extent: Extent) -> Result<[i64; 3]> {
    let (s, c) = wave.orientation.sin_cos();
    let comps = [
        ("x", (wave.spatial_freq * c).as_f64(), extent.width),
        ("y", (wave.spatial_freq * s).as_f64(), extent.height),
        ("t", wave.temporal_freq.as_f64(), extent.frames),
    ];
    let mut m = [0i64; 3];
    for (i, (axis, value, size)) in comps.into_iter().enumerate() {
        let scaled = value * size as f64;
        let r = scaled.round();
        if (scaled - r).abs() > 1e-6 {
            return Err(Error::NonIntegerFrequency { axis, value, size });
        }
        m[i] = r as i64;
    }
    Ok(m)
}

/// The translating wave at lattice point `m` with the given phase.
pub fn lattice_wave<T: Scalar>(m: [i64; 3], extent: Extent, phase: T) -> TranslatingWave<T> {
    let kx = T::lit(m[0] as f64 / extent.width as f64);
    let ky = T::lit(m[1] as f64 / extent.height as f64);
    TranslatingWave {
        spatial_freq: kx.hypot(ky),
        orientation: wrap_two_pi(ky.atan2(kx)),
        temporal_freq: T::lit(m[2] as f64 / extent.frames as f64),
        phase,
    }
}

/// Signed index range `[−⌊N/2⌋, ⌈N/2⌉ − 1]` covering every DFT bin once.
pub fn signed_range(n: usize) -> std::ops::RangeInclusive<i64> {
    let lo = -((n / 2) as i64);
    lo..=lo + n as i64 - 1
}

/// The wave's DFT coefficient at `(mx, my, −mt)`, and whether that bin is
/// its own conjugate (then the coefficient is real and carries the whole wave).
fn wave_coefficient<T: Scalar>(wave: &TranslatingWave<T>, m: [i64; 3], extent: Extent) -> ([i64; 3], Complex<T>, bool) {
    let (w, h, t) = extent.dims();
    let k = [m[0], m[1], -m[2]];
    let self_conjugate = [(k[0], w), (k[1], h), (k[2], t)]
        .iter()
        .all(|&(v, n)| (2 * v).rem_euclid(n as i64) == 0);
    let x0 = T::lit(extent.x_coord(0) as f64);
    let y0 = T::lit(extent.y_coord(0) as f64);
    let kx = T::lit(m[0] as f64 / w as f64);
    let ky = T::lit(m[1] as f64 / h as f64);
    let phi0 = wave.phase + T::two_pi() * (kx * x0 + ky * y0);
    let n = T::from_usize_lossy(extent.len());
    let p = if self_conjugate {
        Complex::new(n * phi0.cos(), T::zero())
    } else {
        Complex::from_polar(n / T::lit(2.0), phi0)
    };
    (k, p, self_conjugate)
}

/// One lattice frequency of a phase map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseEntry<T> {
    pub m: [i64; 3],
    pub wave: TranslatingWave<T>,
    /// `A_q`, filter amplitude at the wave's bin.
    pub power: T,
    /// `None` where masked or undefined.
    pub psi: Option<T>,
    pub masked: bool,
    pub out_of_phase: bool,
    /// `⟨wave, filter⟩` through the frequency domain, before rectification.
    pub dot: T,
    /// `max(0, dot)`
    pub response: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap<T> {
    pub entries: Vec<PhaseEntry<T>>,
    /// `(rows, cols)` when the waves came from a lattice plane, row-major.
    pub shape: Option<(usize, usize)>,
}

impl<T: Scalar> PhaseMap<T> {
    /// Share of unmasked entries that are at least 90° out of phase.
    pub fn out_of_phase_fraction(&self) -> f64 {
        let powered = self.entries.iter().filter(|e| !e.masked).count();
        if powered == 0 {
            return 0.0;
        }
        self.entries.iter().filter(|e| e.out_of_phase).count() as f64 / powered as f64
    }

    pub fn responses(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.response).collect()
    }

    pub fn powers(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.power).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "mx,my,mt,spatial_freq_cpp,orientation_deg,temporal_freq_cpf,power,psi_rad,masked,out_of_phase,response"
        )?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.m[0],
                e.m[1],
                e.m[2],
                format_round_trip(e.wave.spatial_freq),
                format_round_trip(e.wave.orientation.to_degrees()),
                format_round_trip(e.wave.temporal_freq),
                format_round_trip(e.power),
                e.psi.map(format_round_trip).unwrap_or_default(),
                e.masked,
                e.out_of_phase,
                format_round_trip(e.response),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// ψ, power and rectified response of `filter` against each lattice wave.
/// Entries whose filter amplitude is below 1% of the map's maximum are masked.
pub fn phase_map<T: Scalar>(filter: &Volume<T>, waves: &[TranslatingWave<T>]) -> Result<PhaseMap<T>> {
    phase_map_masked(filter, waves, T::lit(POWER_MASK_FRACTION))
}

/// [`phase_map`] with a caller-chosen mask fraction in `[0, 1]`.
pub fn phase_map_masked<T: Scalar>(filter: &Volume<T>, waves: &[TranslatingWave<T>], mask_fraction: T) -> Result<PhaseMap<T>> {
    if !(mask_fraction >= T::zero() && mask_fraction <= T::one()) {
        return Err(Error::InvalidParameter(format!("mask fraction {mask_fraction} outside [0, 1]")));
    }
    let extent = filter.extent();
    let spec = dft3(filter);
    let n = T::from_usize_lossy(extent.len());
    let mut entries = Vec::with_capacity(waves.len());
    for wave in waves {
        let m = lattice_index(wave, extent)?;
        let (k, p, self_conjugate) = wave_coefficient(wave, m, extent);
        let q = spec.get(k);
        let re = p.re * q.re + p.im * q.im;
        let dot = if self_conjugate { re / n } else { T::lit(2.0) * re / n };
        entries.push(PhaseEntry {
            m,
            wave: *wave,
            power: q.norm(),
            psi: phase_difference(p, q),
            masked: false,
            out_of_phase: false,
            dot,
            response: dot.max(T::zero()),
        });
    }
    let max = entries.iter().fold(T::zero(), |a, e| a.max(e.power));
    let floor = mask_fraction * max;
    for e in &mut entries {
        e.masked = e.psi.is_none() || e.power < floor || max == T::zero();
        if e.masked {
            e.psi = None;
        }
        e.out_of_phase = e.psi.is_some_and(|psi| psi >= T::FRAC_PI_2());
    }
    Ok(PhaseMap { entries, shape: None })
}

/// Rectified responses only; equal to `max(0, ⟨wave, filter⟩)` in space-time.
pub fn freq_response_map<T: Scalar>(filter: &Volume<T>, waves: &[TranslatingWave<T>]) -> Result<Vec<T>> {
    Ok(phase_map(filter, waves)?.responses())
}

/// Translation grid stimuli as lattice waves.
pub fn grid_waves<T: Scalar>(spec: &GridSpec) -> Result<Vec<TranslatingWave<T>>> {
    (0..spec.len())
        .map(|id| match spec.stimulus::<T>(id)? {
            Stimulus::Translating(w) => Ok(w),
            _ => Err(Error::InvalidGrid("phase maps take translation grids".into())),
        })
        .collect()
}

pub fn phase_map_grid<T: Scalar>(filter: &Volume<T>, spec: &GridSpec) -> Result<PhaseMap<T>> {
    phase_map(filter, &grid_waves(spec)?)
}

/// A 2-D slice of the lattice, laid out row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticePlane {
    /// `(mx, my)` at fixed `mt`; rows are `my`, columns `mx`.
    Spatial { mt: i64 },
    /// `(mx, mt)` at fixed `my`; rows are `mt`, columns `mx`.
    SpaceTime { my: i64 },
}

impl LatticePlane {
    /// Every lattice wave of the plane, plus the `(rows, cols)` layout.
    pub fn waves<T: Scalar>(&self, extent: Extent, phase: T) -> (Vec<TranslatingWave<T>>, (usize, usize)) {
        let (w, h, t) = extent.dims();
        let cols: Vec<i64> = signed_range(w).collect();
        let (rows, make): (Vec<i64>, Box<dyn Fn(i64, i64) -> [i64; 3]>) = match *self {
            LatticePlane::Spatial { mt } => (signed_range(h).collect(), Box::new(move |r, c| [c, r, mt])),
            LatticePlane::SpaceTime { my } => (signed_range(t).collect(), Box::new(move |r, c| [c, my, r])),
        };
        let waves = rows
            .iter()
            .flat_map(|&r| cols.iter().map(move |&c| (r, c)))
            .map(|(r, c)| lattice_wave(make(r, c), extent, phase))
            .collect();
        (waves, (rows.len(), cols.len()))
    }

    pub fn phase_map<T: Scalar>(&self, filter: &Volume<T>, phase: T) -> Result<PhaseMap<T>> {
        self.phase_map_masked(filter, phase, T::lit(POWER_MASK_FRACTION))
    }

    pub fn phase_map_masked<T: Scalar>(&self, filter: &Volume<T>, phase: T, mask_fraction: T) -> Result<PhaseMap<T>> {
        let (waves, shape) = self.waves(filter.extent(), phase);
        let mut map = phase_map_masked(filter, &waves, mask_fraction)?;
        map.shape = Some(shape);
        Ok(map)
    }
}

/// Every lattice wave of an extent with the given phase.
pub fn full_lattice<T: Scalar>(extent: Extent, phase: T) -> Vec<TranslatingWave<T>> {
    let (w, h, t) = extent.dims();
    let mut out = Vec::with_capacity(extent.len());
    for mt in signed_range(t) {
        for my in signed_range(h) {
            for mx in signed_range(w) {
                out.push(lattice_wave([mx, my, mt], extent, phase));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::{gen_translating_wave, AliasPolicy};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn ext() -> Extent {
        Extent::new(9, 7, 4).unwrap()
    }

    fn random_volume(e: Extent, seed: u64) -> Volume<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Volume::from_vec(e, (0..e.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constant_volume_has_only_dc() {
        let v = Volume::from_fn(ext(), |_, _, _| 2.5f64);
        let s = dft3(&v);
        assert!((s.get([0, 0, 0]).re - 2.5 * 252.0).abs() < 1e-9);
        for (i, c) in s.coefficients().iter().enumerate().skip(1) {
            assert!(c.norm() < 1e-9, "bin {i}");
        }
    }

    #[test]
    fn lattice_cosine_has_two_conjugate_coefficients() {
        let e = ext();
        let w = lattice_wave([2, 1, 1], e, 0.4);
        let v = gen_translating_wave(&w, e, AliasPolicy::Allow).unwrap();
        let s = dft3(&v);
        let big: Vec<usize> = (0..s.len()).filter(|&i| s.coefficients()[i].norm() > 1e-9).collect();
        assert_eq!(big.len(), 2);
        let (a, b) = (s.get([2, 1, -1]), s.get([-2, -1, 1]));
        assert!((a - b.conj()).norm() < 1e-9);
        let (k, p, _) = wave_coefficient(&w, [2, 1, 1], e);
        assert_eq!(k, [2, 1, -1]);
        assert!((p - a).norm() < 1e-9, "{p} vs {a}");
    }

    #[test]
    fn parseval_and_round_trip() {
        let e = ext();
        let v = random_volume(e, 3);
        let s = dft3(&v);
        assert!((s.energy() / v.energy() - 1.0).abs() < 1e-9);
        let back = idft3(&s, e).unwrap();
        let err = back.zip_map(&v, |a, b| a - b).unwrap().max_abs();
        assert!(err < 1e-9 * v.max_abs());
        // conjugate symmetry of a real signal
        for k in [[1, 2, 3], [4, -3, 1], [0, 0, 2]] {
            assert!((s.get(k) - s.get([-k[0], -k[1], -k[2]]).conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn phase_difference_examples() {
        let q = Complex::new(0.3f64, -1.2);
        assert_eq!(phase_difference(q, q), Some(0.0));
        assert!((phase_difference(Complex::<f64>::i() * q, q).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!((phase_difference(-q, q).unwrap() - PI).abs() < 1e-7);
        assert_eq!(phase_difference(Complex::new(0.0, 0.0), q), None);
    }

    #[test]
    fn off_lattice_frequency_is_rejected() {
        let w = TranslatingWave::new(0.13, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            lattice_index(&w, ext()),
            Err(Error::NonIntegerFrequency { axis: "x", .. })
        ));
        let mut w = lattice_wave::<f64>([1, 0, 0], ext(), 0.0);
        w.temporal_freq = 0.3;
        assert!(matches!(lattice_index(&w, ext()), Err(Error::NonIntegerFrequency { axis: "t", .. })));
    }

    #[test]
    fn matched_wave_is_in_phase_and_maximal() {
        let e = Extent::new(15, 15, 4).unwrap();
        let w = lattice_wave([3, 2, 1], e, 0.7);
        let filter = gen_translating_wave(&w, e, AliasPolicy::Allow).unwrap();
        let map = LatticePlane::Spatial { mt: 1 }.phase_map(&filter, 0.7).unwrap();
        let at = map.entries.iter().find(|x| x.m == [3, 2, 1]).unwrap();
        assert!(at.psi.unwrap() < 1e-6);
        let max = map.responses().into_iter().fold(0.0, f64::max);
        assert_eq!(at.response, max);
        // a quarter-period phase shift is exactly orthogonal
        let shifted = phase_map(&filter, &[lattice_wave([3, 2, 1], e, 0.7 + FRAC_PI_2)]).unwrap();
        assert!((shifted.entries[0].psi.unwrap() - FRAC_PI_2).abs() < 1e-6);
        assert!(shifted.entries[0].response.abs() < 1e-9);
    }

    #[test]
    fn self_conjugate_bins_match_the_direct_product() {
        let e = Extent::canvas(8, 8, 2).unwrap();
        let filter = random_volume(e, 9);
        for m in [[0, 0, 0], [4, 0, 1], [4, 4, 0], [0, 4, 1]] {
            let w = lattice_wave(m, e, 0.3);
            let map = phase_map(&filter, &[w]).unwrap();
            let direct = Stimulus::Translating(w).render(e).dot(&filter).unwrap();
            assert!((map.entries[0].dot - direct).abs() < 1e-9, "{m:?}");
        }
    }

    #[test]
    fn mask_hides_low_power_bins() {
        let e = Extent::new(15, 15, 2).unwrap();
        let filter = gen_translating_wave(&lattice_wave([3, 0, 0], e, 0.0), e, AliasPolicy::Allow).unwrap();
        let map = LatticePlane::Spatial { mt: 0 }.phase_map(&filter, 0.0).unwrap();
        assert_eq!(map.entries.iter().filter(|x| !x.masked).count(), 2);
        assert!(map.entries.iter().filter(|x| x.masked).all(|x| x.psi.is_none() && !x.out_of_phase));
        assert_eq!(map.shape, Some((15, 15)));
    }

    #[test]
    fn mask_fraction_is_adjustable_and_validated() {
        let e = Extent::new(9, 9, 2).unwrap();
        let filter = Volume::from_fn(e, |x: f64, y: f64, _| (-(x * x + y * y) / 6.0).exp());
        let plane = LatticePlane::Spatial { mt: 0 };
        let unmasked = |f: f64| plane.phase_map_masked(&filter, 0.0, f).unwrap().entries.iter().filter(|x| !x.masked).count();
        assert!(unmasked(0.0) >= unmasked(0.01));
        assert!(unmasked(0.01) >= unmasked(0.5));
        assert_eq!(unmasked(1.0), 1);
        assert!(plane.phase_map_masked(&filter, 0.0, 1.5).is_err());
        assert!(plane.phase_map_masked(&filter, 0.0, f64::NAN).is_err());
    }

    #[test]
    fn grid_waves_need_lattice_frequencies() {
        use crate::stimuli::{Axis, MotionKind, Parameter, Unit};
        let e = Extent::new(15, 15, 4).unwrap();
        let spec = GridSpec::new(
            MotionKind::Translation,
            vec![
                Axis::single(Parameter::HalfWavelength, Unit::Pixels, 7.5),
                Axis::stepped(Parameter::Orientation, Unit::Degrees, 0.0, 270.0, 90.0),
                Axis::stepped(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.0, 0.25, 0.25),
                Axis::single(Parameter::Phase, Unit::Degrees, 0.0),
            ],
        )
        .unwrap();
        let filter = random_volume(e, 4);
        assert_eq!(phase_map_grid(&filter, &spec).unwrap().entries.len(), 8);
        let off = GridSpec::new(
            MotionKind::Translation,
            vec![
                Axis::single(Parameter::HalfWavelength, Unit::Pixels, 7.0),
                Axis::single(Parameter::Orientation, Unit::Degrees, 0.0),
                Axis::single(Parameter::TemporalFrequency, Unit::CyclesPerFrame, 0.0),
                Axis::single(Parameter::Phase, Unit::Degrees, 0.0),
            ],
        )
        .unwrap();
        assert!(matches!(phase_map_grid(&filter, &off), Err(Error::NonIntegerFrequency { .. })));
    }

    proptest! {
        #[test]
        fn psi_is_symmetric_and_scale_invariant(a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, d in -5.0f64..5.0, s in 0.01f64..100.0) {
            let p = Complex::new(a, b);
            let q = Complex::new(c, d);
            prop_assume!(p.norm() > 1e-6 && q.norm() > 1e-6);
            let psi = phase_difference(p, q).unwrap();
            prop_assert!((0.0..=PI).contains(&psi));
            prop_assert!((psi - phase_difference(q, p).unwrap()).abs() < 1e-12);
            prop_assert!((psi - phase_difference(p * s, q).unwrap()).abs() < 1e-7);
        }

        #[test]
        fn frequency_response_equals_space_time_product(seed in 0u64..1000, mx in -7i64..=7, my in -7i64..=7, mt in -2i64..=1, phase in -PI..PI) {
            let e = Extent::new(15, 15, 4).unwrap();
            let filter = random_volume(e, seed);
            let w = lattice_wave([mx, my, mt], e, phase);
            let map = phase_map(&filter, &[w]).unwrap();
            let direct = Stimulus::Translating(w).render(e).dot(&filter).unwrap();
            prop_assert!((map.entries[0].dot - direct).abs() <= 1e-9 * (1.0 + direct.abs()));
            prop_assert_eq!(map.entries[0].response, map.entries[0].dot.max(0.0));
        }

        #[test]
        fn dft_round_trip(seed in 0u64..1000) {
            let e = ext();
            let v = random_volume(e, seed);
            let back = idft3(&dft3(&v), e).unwrap();
            prop_assert!(back.zip_map(&v, |a, b| a - b).unwrap().max_abs() < 1e-9);
        }
    }
}
