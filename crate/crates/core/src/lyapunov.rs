//! Stationary second moments and stability of a fixed-detuning configuration.

#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{
    adjoint_image, conjugation_symmetric_spectrum, lyapunov_apply, max_abs, re, LyapunovOperator,
    Mat4,
};
use crate::model::{DriftMatrix, FeedbackConfig, NoiseMatrix, SystemParams};
use crate::{Error, Result};

/// Eigenvalue real parts must lie below `-DEFAULT_STABILITY_TOLERANCE`.
pub const DEFAULT_STABILITY_TOLERANCE: f64 = 1e-12;

/// Second moments `C[i][j] = <v_i v_j>` with `v = (a, b, a†, b†)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub entries: Mat4,
}

impl CorrelationMatrix {
    pub fn new(entries: Mat4) -> Self {
        Self { entries }
    }

    /// Both modes in their ground state.
    pub fn vacuum() -> Self {
        let mut m = Mat4::zeros();
        m[(0, 2)] = re(1.0);
        m[(1, 3)] = re(1.0);
        Self { entries: m }
    }

    /// Uncorrelated thermal state with the given occupancies.
    pub fn thermal(n_cavity: f64, n_mechanics: f64) -> Self {
        let mut m = Mat4::zeros();
        m[(0, 2)] = re(n_cavity + 1.0);
        m[(2, 0)] = re(n_cavity);
        m[(1, 3)] = re(n_mechanics + 1.0);
        m[(3, 1)] = re(n_mechanics);
        Self { entries: m }
    }

    /// `<a† a>`.
    pub fn n_photon(&self) -> f64 {
        self.entries[(2, 0)].re
    }

    /// `<b† b>`.
    pub fn n_phonon(&self) -> f64 {
        self.entries[(3, 1)].re
    }

    /// Largest deviation of `[a, a†]` and `[b, b†]` from one.
    pub fn commutator_defect(&self) -> f64 {
        let c = &self.entries;
        let one = re(1.0);
        (c[(0, 2)] - c[(2, 0)] - one)
            .norm()
            .max((c[(1, 3)] - c[(3, 1)] - one).norm())
    }

    /// Largest deviation from the symmetry `<v_i v_j>* = <v_j† v_i†>`.
    pub fn conjugation_defect(&self) -> f64 {
        max_abs(&(self.entries - adjoint_image(&self.entries)))
    }

    /// Average with the conjugation image.
    pub fn symmetrized(&self) -> Self {
        Self {
            entries: (self.entries + adjoint_image(&self.entries)) * re(0.5),
        }
    }
}

/// `max|M C + C M^T + N| / max|N|`.
pub fn lyapunov_residual(
    drift: &DriftMatrix,
    noise: &NoiseMatrix,
    state: &CorrelationMatrix,
) -> f64 {
    let r = lyapunov_apply(&drift.entries, &state.entries) + noise.entries;
    let scale = max_abs(&noise.entries);
    if scale > 0.0 {
        max_abs(&r) / scale
    } else {
        max_abs(&r)
    }
}

/// The stationary correlation matrix, solving `M C + C M^T + N = 0`.
pub fn steady_state(drift: &DriftMatrix, noise: &NoiseMatrix) -> Result<CorrelationMatrix> {
    let max_real = max_real_eigenvalue(&drift.entries);
    if !(max_real < -DEFAULT_STABILITY_TOLERANCE) {
        return Err(Error::Unstable { max_real });
    }
    let op = LyapunovOperator::new(&drift.entries)?;
    stationary_from(&op, &drift.entries, &noise.entries)
}

/// Solve with one step of iterative refinement, then symmetrize.
pub(crate) fn stationary_from(
    op: &LyapunovOperator,
    m: &Mat4,
    n: &Mat4,
) -> Result<CorrelationMatrix> {
    let rhs = -n;
    let mut x = op.solve(&rhs)?;
    let r = rhs - lyapunov_apply(m, &x);
    x += op.solve(&r)?;
    Ok(CorrelationMatrix::new(x).symmetrized())
}

pub(crate) fn max_real_eigenvalue(m: &Mat4) -> f64 {
    conjugation_symmetric_spectrum(m)[0].re
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityReport {
    /// The lower normal-mode frequency is real and positive.
    pub hamiltonian_stable: bool,
    /// Every drift eigenvalue has negative real part.
    pub dynamically_stable: bool,
    pub max_real_eigenvalue: f64,
    /// Detuning at which the lower normal-mode frequency vanishes.
    pub boundary_detuning: f64,
}

/// `-2 G^2 / omega_m - sqrt(4 G^4 / omega_m^2 + k^2)`, `k` the parametric strength.
pub fn boundary_detuning(params: &SystemParams, feedback: &FeedbackConfig) -> f64 {
    let g2 = params.g_coupling * params.g_coupling;
    let w = params.omega_m;
    let k = feedback.parametric_strength(params);
    -2.0 * g2 / w - (4.0 * g2 * g2 / (w * w) + k * k).sqrt()
}

pub fn classify_stability(
    drift: &DriftMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> StabilityReport {
    classify_stability_with(
        drift,
        params,
        feedback,
        delta_p,
        DEFAULT_STABILITY_TOLERANCE,
    )
}

pub fn classify_stability_with(
    drift: &DriftMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
    tolerance: f64,
) -> StabilityReport {
    let boundary_detuning = boundary_detuning(params, feedback);
    let max_real = max_real_eigenvalue(&drift.entries);
    StabilityReport {
        hamiltonian_stable: delta_p < boundary_detuning,
        dynamically_stable: max_real < -tolerance,
        max_real_eigenvalue: max_real,
        boundary_detuning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_drift, build_noise};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig3() -> (SystemParams, FeedbackConfig) {
        let p = SystemParams::new(0.05, 5e-5, 0.05, 300.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        (p, f)
    }

    #[test]
    fn decoupled_thermal_equilibrium() {
        let p = SystemParams::new(0.05, 5e-5, 0.0, 300.0).unwrap();
        let f = FeedbackConfig::off(&p);
        for delta in [-3.0, -1.0, -0.2] {
            let c = steady_state(&build_drift(&p, &f, delta), &build_noise(&p, &f)).unwrap();
            assert!(c.n_photon().abs() < 1e-12);
            assert_relative_eq!(c.n_phonon(), 300.0, max_relative = 1e-10);
            assert!(c.entries[(1, 0)].norm() < 1e-12);
            assert!(c.entries[(3, 0)].norm() < 1e-12);
        }
    }

    #[test]
    fn cavity_thermalizes_to_feedback_bath_without_parametric_term() {
        let p = SystemParams::new(0.05, 5e-5, 0.0, 300.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6)
            .unwrap()
            .without_parametric();
        let c = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        assert_relative_eq!(c.n_photon(), f.n_opt_fb, max_relative = 1e-10);
    }

    #[test]
    fn parametric_term_shifts_single_mode_occupancy() {
        // Single damped mode with a two-photon term: solve the 2x2 moment
        // equations by hand.
        let p = SystemParams::new(0.05, 5e-5, 0.0, 300.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        let k = 0.0425;
        let kf = 0.0075;
        let delta: f64 = -0.7;
        let denom = kf * kf + delta * delta;
        let want = (f.n_opt_fb + k * k / (2.0 * denom)) / (1.0 - k * k / denom);
        let c = steady_state(&build_drift(&p, &f, delta), &build_noise(&p, &f)).unwrap();
        assert_relative_eq!(c.n_photon(), want, max_relative = 1e-10);
    }

    #[test]
    fn weak_hybridization_at_large_detuning() {
        let (p, f) = fig3();
        let d = build_drift(&p, &f, -3.0);
        let n = build_noise(&p, &f);
        let c = steady_state(&d, &n).unwrap();
        // Off-resonant sideband cooling still removes about 6% of the phonons.
        assert!(c.n_phonon() < 300.0 && c.n_phonon() > 0.9 * 300.0);
        assert!((c.n_photon() / f.n_opt_fb - 1.0).abs() < 0.1);
        assert!(lyapunov_residual(&d, &n, &c) < 1e-10);
        assert!(c.commutator_defect() < 1e-10);
        assert!(c.conjugation_defect() < 1e-10);
    }

    #[test]
    fn sideband_cooling_trend() {
        let mut last = f64::INFINITY;
        for g in [0.0, 0.01, 0.02, 0.04] {
            let p = SystemParams::new(0.05, 5e-5, g, 300.0).unwrap();
            let f = FeedbackConfig::off(&p);
            let c = steady_state(&build_drift(&p, &f, -1.0), &build_noise(&p, &f)).unwrap();
            assert!(c.n_phonon() < last);
            last = c.n_phonon();
        }
        assert!(last < 300.0);
    }

    #[test]
    fn unstable_drift_is_rejected() {
        let (p, f) = fig3();
        let d = build_drift(&p, &f, -0.01);
        assert!(matches!(
            steady_state(&d, &build_noise(&p, &f)),
            Err(Error::Unstable { .. })
        ));
        let r = classify_stability(&d, &p, &f, -0.01);
        assert!(!r.hamiltonian_stable);
        assert!(!r.dynamically_stable);
        assert!(r.max_real_eigenvalue >= 0.0);
    }

    #[test]
    fn boundary_values() {
        let p = SystemParams::new(0.05, 5e-5, 0.05, 300.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        // 2 G^2 = 0.005, 4 G^4 = 2.5e-5, k^2 = 0.0425^2.
        let want = -0.005 - (2.5e-5f64 + 0.00180625).sqrt();
        assert_relative_eq!(boundary_detuning(&p, &f), want, max_relative = 1e-14);
        assert!((want + 0.04779).abs() < 1e-5);
        let p0 = SystemParams::new(0.05, 5e-5, 1e-9, 300.0).unwrap();
        let b = boundary_detuning(&p0, &FeedbackConfig::off(&p0));
        assert!(b < 0.0 && b > -1e-12);
    }

    #[test]
    fn flag_matches_reported_eigenvalue() {
        let (p, f) = fig3();
        for delta in [-3.0, -1.0, -0.1, -0.05, -0.04, -0.02] {
            let r = classify_stability(&build_drift(&p, &f, delta), &p, &f, delta);
            assert_eq!(
                r.dynamically_stable,
                r.max_real_eigenvalue < -DEFAULT_STABILITY_TOLERANCE
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_stable_configurations(
            delta in -4.0f64..-0.3,
            g in 0.0f64..0.1,
            kfb_frac in 0.05f64..1.0,
            gamma in 1e-4f64..1e-2,
            n_th in 0.0f64..500.0,
        ) {
            let p = SystemParams::new(0.05, gamma, g, n_th).unwrap();
            let f = FeedbackConfig::from_kappa_fb(&p, 0.05 * kfb_frac, 0.6).unwrap();
            let d = build_drift(&p, &f, delta);
            let n = build_noise(&p, &f);
            let r = classify_stability(&d, &p, &f, delta);
            prop_assume!(r.dynamically_stable);
            let c = steady_state(&d, &n).unwrap();
            prop_assert!(lyapunov_residual(&d, &n, &c) < 1e-10);
            prop_assert!(c.commutator_defect() < 1e-10);
            prop_assert!(c.conjugation_defect() < 1e-10 * max_abs(&c.entries));
            prop_assert!(c.n_photon() >= 0.0 && c.n_phonon() >= 0.0);
        }
    }
}
