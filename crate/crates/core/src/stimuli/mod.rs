//! Probe signal synthesis: plane waves, occlusion patterns, moving bars,
//! parameter grids and temporal-aliasing admissibility checks.

mod bars;
mod grid;
mod waves;

pub use bars::{default_bar_width, gen_bar_sequence, BarDirection, BarSequence, FlowField, APERTURE_CANVAS};
pub use grid::{Axis, GridSpec, MotionKind, Parameter, Unit};
pub(crate) use grid::fnv1a;
pub use waves::{
    dilating_wave_at, gen_dilating_wave, gen_occlusion_stimulus, gen_rotating_wave,
    gen_translating_wave, occlusion_at, rotate_coords, rotating_wave_at, translating_wave_at,
    AliasPolicy, DilatingWave, OcclusionParams, PlaneWaveFrame, RotatingWave, Stimulus,
    TranslatingWave,
};

use crate::scalar::Scalar;

/// Dilation admissibility: `(h - 1) * x_max <= λ0 / 2`.
pub fn dilation_alias_check<T: Scalar>(h: T, wavelength: T, x_max: T) -> bool {
    (h - T::one()) * x_max <= wavelength / T::lit(2.0)
}

/// Rotation admissibility: `ω * m_max <= λ0 / 2`, the speed of the farthest point.
pub fn rotation_alias_check<T: Scalar>(omega: T, m_max: T, wavelength: T) -> bool {
    omega * m_max <= wavelength / T::lit(2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dilation_constraint_examples() {
        assert!(dilation_alias_check(1.0, 10.0, 1e6));
        assert!(dilation_alias_check(1.5, 400.0, 100.0));
        assert!(!dilation_alias_check(2.0, 400.0, 300.0));
    }

    #[test]
    fn rotation_constraint_examples() {
        assert!(rotation_alias_check(0.0, 191.5, 1.0));
        assert!(rotation_alias_check(1.0, 191.5, 400.0));
        assert!(!rotation_alias_check(1.0, 191.5, 100.0));
    }

    proptest! {
        #[test]
        fn admissibility_is_monotone(h in 0.5f64..2.0, dh in 0.0f64..1.5, lambda in 1.0f64..800.0, x in 1.0f64..400.0) {
            if dilation_alias_check(h, lambda, x) {
                prop_assert!(dilation_alias_check(h - dh, lambda, x));
            }
            if rotation_alias_check(h, x, lambda) {
                prop_assert!(rotation_alias_check(h - dh, x, lambda));
            }
        }
    }
}
