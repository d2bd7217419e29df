use crate::error::{Error, Result};
use crate::scalar::{wrap_two_pi, Scalar};
use crate::volume::{Extent, Volume};

/// Whether temporal frequencies above Nyquist are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AliasPolicy {
    #[default]
    Reject,
    Allow,
}

/// Rotates a point by `theta`; positive angles rotate clockwise with respect
/// to the positive x axis (image convention).
#[inline]
pub fn rotate_coords<T: Scalar>(x: T, y: T, theta: T) -> (T, T) {
    let (s, c) = theta.sin_cos();
    (x * c + y * s, -x * s + y * c)
}

/// A drifting grating `cos(2π(F·x_r − f_t·t) + φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslatingWave<T> {
    /// cycles/pixel
    pub spatial_freq: T,
    /// radians
    pub orientation: T,
    /// cycles/frame
    pub temporal_freq: T,
    /// radians
    pub phase: T,
}

impl<T: Scalar> TranslatingWave<T> {
    pub fn new(spatial_freq: T, orientation: T, temporal_freq: T, phase: T) -> Result<Self> {
        if !(spatial_freq > T::zero()) || !spatial_freq.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "spatial frequency must be positive, got {spatial_freq}"
            )));
        }
        if !temporal_freq.is_finite() || !orientation.is_finite() || !phase.is_finite() {
            return Err(Error::InvalidParameter("non-finite wave parameter".into()));
        }
        Ok(Self {
            spatial_freq,
            orientation: wrap_two_pi(orientation),
            temporal_freq,
            phase,
        })
    }

    /// Build from half wavelength in pixels and angles in degrees.
    pub fn from_grid_units(half_wavelength: T, theta_deg: T, temporal_freq: T, phase_deg: T) -> Result<Self> {
        Self::new(
            T::one() / (T::lit(2.0) * half_wavelength),
            theta_deg.to_radians(),
            temporal_freq,
            phase_deg.to_radians(),
        )
    }

    pub fn check_nyquist(&self) -> Result<()> {
        if self.temporal_freq.abs() > T::lit(0.5) {
            return Err(Error::Aliased(self.temporal_freq.as_f64()));
        }
        Ok(())
    }

    /// Velocity along the wave normal, pixels/frame.
    pub fn speed(&self) -> T {
        self.temporal_freq / self.spatial_freq
    }
}

/// `cos(2π F (x_r − α x_r t) + φ)` with `α = 1 − 1/h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilatingWave<T> {
    pub spatial_freq: T,
    pub orientation: T,
    /// Affine scale factor between consecutive frames.
    pub scale: T,
    pub phase: T,
}

impl<T: Scalar> DilatingWave<T> {
    pub fn new(spatial_freq: T, orientation: T, scale: T, phase: T) -> Result<Self> {
        if !(spatial_freq > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "spatial frequency must be positive, got {spatial_freq}"
            )));
        }
        if scale == T::zero() || !scale.is_finite() {
            return Err(Error::InvalidParameter("dilation scale h must be nonzero".into()));
        }
        Ok(Self {
            spatial_freq,
            orientation: wrap_two_pi(orientation),
            scale,
            phase,
        })
    }

    /// Dilation factor α.
    pub fn alpha(&self) -> T {
        T::one() - T::one() / self.scale
    }
}

/// `cos(2π F x_r(t) + φ)` with the orientation advancing by `ω` per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingWave<T> {
    pub spatial_freq: T,
    pub orientation: T,
    /// radians/frame
    pub angular_velocity: T,
    pub phase: T,
}

impl<T: Scalar> RotatingWave<T> {
    pub fn new(spatial_freq: T, orientation: T, angular_velocity: T, phase: T) -> Result<Self> {
        if !(spatial_freq > T::zero()) {
            return Err(Error::InvalidParameter(format!(
                "spatial frequency must be positive, got {spatial_freq}"
            )));
        }
        Ok(Self {
            spatial_freq,
            orientation: wrap_two_pi(orientation),
            angular_velocity,
            phase,
        })
    }
}

#[inline]
pub fn translating_wave_at<T: Scalar>(p: &TranslatingWave<T>, x: T, y: T, t: T) -> T {
    let (xr, _) = rotate_coords(x, y, p.orientation);
    (T::two_pi() * (p.spatial_freq * xr - p.temporal_freq * t) + p.phase).cos()
}

#[inline]
pub fn dilating_wave_at<T: Scalar>(p: &DilatingWave<T>, x: T, y: T, t: T) -> T {
    let (xr, _) = rotate_coords(x, y, p.orientation);
    let alpha = p.alpha();
    (T::two_pi() * p.spatial_freq * (xr - alpha * xr * t) + p.phase).cos()
}

#[inline]
pub fn rotating_wave_at<T: Scalar>(p: &RotatingWave<T>, x: T, y: T, t: T) -> T {
    let (xr, _) = rotate_coords(x, y, p.orientation + p.angular_velocity * t);
    (T::two_pi() * p.spatial_freq * xr + p.phase).cos()
}

pub fn gen_translating_wave<T: Scalar>(
    p: &TranslatingWave<T>,
    extent: Extent,
    policy: AliasPolicy,
) -> Result<Volume<T>> {
    if policy == AliasPolicy::Reject {
        p.check_nyquist()?;
    }
    Ok(Volume::from_fn(extent, |x, y, t| translating_wave_at(p, x, y, t)))
}

pub fn gen_dilating_wave<T: Scalar>(p: &DilatingWave<T>, extent: Extent) -> Volume<T> {
    Volume::from_fn(extent, |x, y, t| dilating_wave_at(p, x, y, t))
}

pub fn gen_rotating_wave<T: Scalar>(p: &RotatingWave<T>, extent: Extent) -> Volume<T> {
    Volume::from_fn(extent, |x, y, t| rotating_wave_at(p, x, y, t))
}

/// Any parametrized probe wave.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stimulus<T> {
    Translating(TranslatingWave<T>),
    Dilating(DilatingWave<T>),
    Rotating(RotatingWave<T>),
}

/// One frame of a stimulus written as a spatial plane wave `cos(2π k·x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveFrame<T> {
    pub kx: T,
    pub ky: T,
    pub phase: T,
}

impl<T: Scalar> Stimulus<T> {
    pub fn value_at(&self, x: T, y: T, t: T) -> T {
        match self {
            Stimulus::Translating(p) => translating_wave_at(p, x, y, t),
            Stimulus::Dilating(p) => dilating_wave_at(p, x, y, t),
            Stimulus::Rotating(p) => rotating_wave_at(p, x, y, t),
        }
    }

    pub fn render(&self, extent: Extent) -> Volume<T> {
        Volume::from_fn(extent, |x, y, t| self.value_at(x, y, t))
    }

    pub fn spatial_freq(&self) -> T {
        match self {
            Stimulus::Translating(p) => p.spatial_freq,
            Stimulus::Dilating(p) => p.spatial_freq,
            Stimulus::Rotating(p) => p.spatial_freq,
        }
    }

    pub fn phase(&self) -> T {
        match self {
            Stimulus::Translating(p) => p.phase,
            Stimulus::Dilating(p) => p.phase,
            Stimulus::Rotating(p) => p.phase,
        }
    }

    /// Every supported stimulus is a plane wave within each frame; this gives
    /// its wave vector and phase at time `t`.
    pub fn frame_wave(&self, t: T) -> PlaneWaveFrame<T> {
        match self {
            Stimulus::Translating(p) => {
                let (s, c) = p.orientation.sin_cos();
                PlaneWaveFrame {
                    kx: p.spatial_freq * c,
                    ky: p.spatial_freq * s,
                    phase: p.phase - T::two_pi() * p.temporal_freq * t,
                }
            }
            Stimulus::Dilating(p) => {
                let f = p.spatial_freq * (T::one() - p.alpha() * t);
                let (s, c) = p.orientation.sin_cos();
                PlaneWaveFrame {
                    kx: f * c,
                    ky: f * s,
                    phase: p.phase,
                }
            }
            Stimulus::Rotating(p) => {
                let (s, c) = (p.orientation + p.angular_velocity * t).sin_cos();
                PlaneWaveFrame {
                    kx: p.spatial_freq * c,
                    ky: p.spatial_freq * s,
                    phase: p.phase,
                }
            }
        }
    }
}

/// Two translating waves split by a moving vertical step edge, under a
/// spatial Gaussian window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionParams<T> {
    /// Occluding wave, right of the boundary.
    pub wave_a: TranslatingWave<T>,
    /// Occluded wave, left of the boundary.
    pub wave_b: TranslatingWave<T>,
    /// Boundary position at `t = 0`, pixels.
    pub boundary_x: T,
    pub envelope_sigma: T,
}

impl<T: Scalar> OcclusionParams<T> {
    /// Defaults: Gaussian width equal to the occluder's wavelength, boundary
    /// through the origin at `t = 0`.
    pub fn new(wave_a: TranslatingWave<T>, wave_b: TranslatingWave<T>) -> Self {
        Self {
            wave_a,
            wave_b,
            boundary_x: T::zero(),
            envelope_sigma: T::one() / wave_a.spatial_freq,
        }
    }

    /// True when both waves share (F, θ, f_t); the stimulus is then a plain
    /// windowed wave.
    pub fn is_degenerate(&self) -> bool {
        self.wave_a.spatial_freq == self.wave_b.spatial_freq
            && self.wave_a.orientation == self.wave_b.orientation
            && self.wave_a.temporal_freq == self.wave_b.temporal_freq
    }

    /// The boundary travels with the occluder's normal velocity.
    pub fn boundary_at(&self, t: T) -> T {
        self.boundary_x + self.wave_a.speed() * self.wave_a.orientation.cos() * t
    }
}

#[inline]
pub fn occlusion_at<T: Scalar>(p: &OcclusionParams<T>, x: T, y: T, t: T) -> T {
    let g = (-(x * x + y * y) / (p.envelope_sigma * p.envelope_sigma)).exp();
    let inside = if x >= p.boundary_at(t) {
        translating_wave_at(&p.wave_a, x, y, t)
    } else {
        translating_wave_at(&p.wave_b, x, y, t)
    };
    g * inside
}

/// Renders an occlusion pattern. Returns the volume and whether the two waves
/// were degenerate (identical), which callers may report as a warning.
pub fn gen_occlusion_stimulus<T: Scalar>(
    p: &OcclusionParams<T>,
    extent: Extent,
) -> Result<(Volume<T>, bool)> {
    if !(p.envelope_sigma > T::zero()) {
        return Err(Error::InvalidParameter("envelope sigma must be positive".into()));
    }
    Ok((
        Volume::from_fn(extent, |x, y, t| occlusion_at(p, x, y, t)),
        p.is_degenerate(),
    ))
}
