//! Geometry of the sub-connected uniform linear array.
//!
//! The `N = K·M` elements are split into `K` contiguous subarrays of `M`
//! elements. Element spacing is carried only as the ratio `d/λ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};

/// Wraps a phase into `(-π, π]`.
pub fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Direction in degrees, restricted to `[-90, 90]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Angle(f64);

impl Angle {
    pub fn from_degrees(deg: f64) -> Result<Self> {
        if deg.is_nan() || deg.abs() > 90.0 {
            return Err(DoaError::AngleOutOfRange(deg));
        }
        Ok(Angle(deg))
    }

    /// Angle whose sine is `s`; `s` is clamped to `[-1, 1]`.
    pub fn from_sine(s: f64) -> Self {
        Angle(s.clamp(-1.0, 1.0).asin().to_degrees())
    }

    pub fn degrees(self) -> f64 {
        self.0
    }

    pub fn radians(self) -> f64 {
        self.0.to_radians()
    }

    pub fn sin(self) -> f64 {
        self.radians().sin()
    }
}

/// Electrical phase in radians. Not wrapped unless [`SpatialPhase::wrapped`] is called.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpatialPhase(pub f64);

impl SpatialPhase {
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Canonical representative in `(-π, π]`.
    pub fn wrapped(self) -> Self {
        SpatialPhase(wrap_phase(self.0))
    }

    /// Scales the phase by an integer factor, e.g. element phase to subarray phase.
    pub fn times(self, factor: usize) -> Self {
        SpatialPhase(self.0 * factor as f64)
    }

    /// Unit-circle image `e^{jϕ}`.
    pub fn phasor(self) -> Complex64 {
        Complex64::from_polar(1.0, self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    n_antennas: usize,
    n_subarrays: usize,
    subarray_size: usize,
    spacing_over_wavelength: f64,
}

impl ArrayConfig {
    /// Builds a configuration from the total element count and subarray size.
    pub fn new(n_antennas: usize, subarray_size: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if n_antennas == 0 || subarray_size == 0 {
            return Err(DoaError::Geometry(
                "antenna and subarray counts must be positive".into(),
            ));
        }
        if !n_antennas.is_multiple_of(subarray_size) {
            return Err(DoaError::Geometry(format!(
                "N = {n_antennas} is not a multiple of M = {subarray_size}"
            )));
        }
        if !(spacing_over_wavelength > 0.0 && spacing_over_wavelength.is_finite()) {
            return Err(DoaError::Geometry(format!(
                "d/λ must be positive, got {spacing_over_wavelength}"
            )));
        }
        Ok(ArrayConfig {
            n_antennas,
            n_subarrays: n_antennas / subarray_size,
            subarray_size,
            spacing_over_wavelength,
        })
    }

    /// Half-wavelength spacing.
    pub fn half_wavelength(n_antennas: usize, subarray_size: usize) -> Result<Self> {
        Self::new(n_antennas, subarray_size, 0.5)
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn n_subarrays(&self) -> usize {
        self.n_subarrays
    }

    pub fn subarray_size(&self) -> usize {
        self.subarray_size
    }

    pub fn spacing_over_wavelength(&self) -> f64 {
        self.spacing_over_wavelength
    }

    /// Whether the subarrays split evenly into `M` groups (`K mod M = 0`).
    pub fn fast_applicable(&self) -> bool {
        self.n_subarrays.is_multiple_of(self.subarray_size)
    }

    /// Subarrays per group, `P = K / M`, when the fast eliminator applies.
    pub fn group_size(&self) -> Option<usize> {
        self.fast_applicable().then(|| self.n_subarrays / self.subarray_size)
    }
}

/// `φ = 2π (d/λ) sin θ`, unwrapped.
pub fn spatial_phase(theta: Angle, cfg: &ArrayConfig) -> SpatialPhase {
    SpatialPhase(2.0 * PI * cfg.spacing_over_wavelength * theta.sin())
}

fn geometric(phase: f64, len: usize) -> Vec<Complex64> {
    (0..len).map(|n| Complex64::from_polar(1.0, n as f64 * phase)).collect()
}

/// Full-array manifold `a(θ)`, entries `e^{j n φ}` for `n = 0..N`.
pub fn element_steering(theta: Angle, cfg: &ArrayConfig) -> Vec<Complex64> {
    geometric(spatial_phase(theta, cfg).0, cfg.n_antennas)
}

/// Subarray pattern `g(θ) = Σ_{m<M} e^{j m φ}`.
pub fn subarray_gain(theta: Angle, cfg: &ArrayConfig) -> Complex64 {
    geometric(spatial_phase(theta, cfg).0, cfg.subarray_size)
        .into_iter()
        .sum()
}

/// `a_M(ϕ)`: entries `e^{j k ϕ}` for `k = 0..len`.
pub fn bare_virtual_steering(phase: SpatialPhase, len: usize) -> Vec<Complex64> {
    geometric(phase.0, len)
}

/// Virtual manifold seen by the `K` digital channels, `a_D(θ) = g(θ) a_M(Mφ)`.
pub fn virtual_manifold(theta: Angle, cfg: &ArrayConfig) -> Vec<Complex64> {
    let g = subarray_gain(theta, cfg);
    let phi = spatial_phase(theta, cfg).times(cfg.subarray_size);
    bare_virtual_steering(phi, cfg.n_subarrays)
        .into_iter()
        .map(|a| g * a)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn deg(d: f64) -> Angle {
        Angle::from_degrees(d).unwrap()
    }

    #[test]
    fn angle_domain() {
        assert!(Angle::from_degrees(90.0).is_ok());
        assert!(Angle::from_degrees(-90.0).is_ok());
        assert!(Angle::from_degrees(90.0001).is_err());
        assert!(Angle::from_degrees(f64::NAN).is_err());
    }

    #[test]
    fn geometry_validation() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        assert_eq!(cfg.n_subarrays(), 16);
        assert_eq!(cfg.group_size(), Some(4));
        assert!(ArrayConfig::half_wavelength(62, 4).is_err());
        assert!(ArrayConfig::new(64, 4, 0.0).is_err());
        assert!(ArrayConfig::half_wavelength(0, 4).is_err());
        // K = 8, M = 16: no grouping possible
        let narrow = ArrayConfig::half_wavelength(128, 16).unwrap();
        assert!(!narrow.fast_applicable());
        assert_eq!(narrow.group_size(), None);
    }

    #[test]
    fn wrap_convention() {
        assert_abs_diff_eq!(wrap_phase(PI), PI);
        assert_abs_diff_eq!(wrap_phase(-PI), PI);
        assert_abs_diff_eq!(wrap_phase(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_phase(8.3008), 8.3008 - 2.0 * PI, epsilon = 1e-12);
    }

    #[test]
    fn spatial_phase_examples() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        assert_eq!(spatial_phase(deg(0.0), &cfg).0, 0.0);
        assert_abs_diff_eq!(spatial_phase(deg(90.0), &cfg).0, PI, epsilon = 1e-15);
        // π·sin(41.345°) evaluated with degree-based sine
        let oracle = PI * (41.345f64 * PI / 180.0).sin();
        assert_abs_diff_eq!(oracle, 2.0752, epsilon = 1e-3);
        assert_abs_diff_eq!(spatial_phase(deg(41.345), &cfg).0, oracle, epsilon = 1e-12);
    }

    #[test]
    fn element_steering_examples() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        assert!(element_steering(deg(0.0), &cfg)
            .iter()
            .all(|a| (*a - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let two = ArrayConfig::half_wavelength(2, 1).unwrap();
        let a = element_steering(deg(90.0), &two);
        assert_abs_diff_eq!(a[0].re, 1.0);
        assert_abs_diff_eq!(a[1].re, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a[1].im, 0.0, epsilon = 1e-12);

        let four = ArrayConfig::half_wavelength(4, 1).unwrap();
        let a = element_steering(deg(41.345), &four);
        for (n, expect) in [0.0, 2.0752, 4.1504, 6.2256].iter().enumerate() {
            assert_abs_diff_eq!(wrap_phase(a[n].arg() - expect), 0.0, epsilon = 1e-3);
        }
    }

    #[test]
    fn subarray_gain_examples() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        let g0 = subarray_gain(deg(0.0), &cfg);
        assert_abs_diff_eq!(g0.re, 4.0);
        assert_abs_diff_eq!(g0.im, 0.0);

        // sin θ = λ/(Md) = 0.5 gives φ = 2π/M
        let null = subarray_gain(deg(30.0), &cfg);
        assert!(null.norm() < 1e-12, "{null}");

        let phi = PI * (41.345f64.to_radians()).sin();
        let direct: Complex64 = (0..4)
            .map(|m| Complex64::new((m as f64 * phi).cos(), (m as f64 * phi).sin()))
            .sum();
        assert!((subarray_gain(deg(41.345), &cfg) - direct).norm() < 1e-12);
    }

    #[test]
    fn virtual_manifold_examples() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        assert!(virtual_manifold(deg(0.0), &cfg)
            .iter()
            .all(|a| (*a - Complex64::new(4.0, 0.0)).norm() < 1e-12));

        let digital = ArrayConfig::half_wavelength(2, 1).unwrap();
        let vm = virtual_manifold(deg(23.0), &digital);
        let es = element_steering(deg(23.0), &digital);
        for (a, b) in vm.iter().zip(&es) {
            assert!((a - b).norm() < 1e-12);
        }

        let vm = virtual_manifold(deg(41.345), &cfg);
        for k in 0..15 {
            let ratio = vm[k + 1] / vm[k];
            assert_abs_diff_eq!(ratio.arg(), 2.0176, epsilon = 2e-3);
            assert_abs_diff_eq!(ratio.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn bare_steering_examples() {
        assert!(bare_virtual_steering(SpatialPhase(0.0), 5)
            .iter()
            .all(|a| (*a - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        let v = bare_virtual_steering(SpatialPhase(PI), 3);
        for (a, e) in v.iter().zip([1.0, -1.0, 1.0]) {
            assert!((a - Complex64::new(e, 0.0)).norm() < 1e-12);
        }
        let v = bare_virtual_steering(SpatialPhase(2.0176), 16);
        for k in 0..15 {
            assert_abs_diff_eq!((v[k + 1] / v[k]).arg(), 2.0176, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_modulus_over_many_angles() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        for i in 0..1000 {
            let theta = deg(-90.0 + 180.0 * i as f64 / 999.0);
            for a in element_steering(theta, &cfg) {
                assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
            }
            let phi = spatial_phase(theta, &cfg).times(4);
            for a in bare_virtual_steering(phi, 16) {
                assert_abs_diff_eq!(a.norm(), 1.0, epsilon = 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn gain_bounded_by_subarray_size(d in -90.0f64..=90.0, m in 1usize..9) {
            let cfg = ArrayConfig::half_wavelength(m * 4, m).unwrap();
            prop_assert!(subarray_gain(deg(d), &cfg).norm() <= m as f64 + 1e-12);
        }

        #[test]
        fn manifold_factorizes(d in -90.0f64..=90.0, spacing in 0.1f64..1.0) {
            let cfg = ArrayConfig::new(32, 4, spacing).unwrap();
            let theta = deg(d);
            let g = subarray_gain(theta, &cfg);
            let bare = bare_virtual_steering(spatial_phase(theta, &cfg).times(4), 8);
            for (v, b) in virtual_manifold(theta, &cfg).iter().zip(&bare) {
                prop_assert!((v - g * b).norm() < 1e-12);
            }
        }

        #[test]
        fn phase_odd_in_angle(d in -90.0f64..=90.0) {
            let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
            prop_assert_eq!(spatial_phase(deg(-d), &cfg).0, -spatial_phase(deg(d), &cfg).0);
        }
    }

    #[test]
    fn gain_equality_at_broadside() {
        let cfg = ArrayConfig::half_wavelength(64, 4).unwrap();
        assert_abs_diff_eq!(subarray_gain(deg(0.0), &cfg).norm(), 4.0, epsilon = 1e-12);
    }
}
