//! Physical parameters, the in-loop feedback mapping, and the matrices that
//! define the linear dynamics.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{re, Complex, Mat4, I};
use crate::{Error, Result};

/// Detection efficiency assumed when none is given.
pub const DEFAULT_DETECTION_EFFICIENCY: f64 = 0.6;

/// Constants of the optomechanical system, in units of the mechanical
/// frequency. Decay rates are amplitude rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SystemParams {
    pub omega_m: f64,
    pub kappa_c: f64,
    pub kappa_1: f64,
    pub kappa_2: f64,
    pub gamma: f64,
    pub g_coupling: f64,
    pub n_th: f64,
}

impl SystemParams {
    /// Symmetric cavity: both mirrors carry half of `kappa_c`.
    pub fn new(kappa_c: f64, gamma: f64, g_coupling: f64, n_th: f64) -> Result<Self> {
        Self::with_mirrors(
            kappa_c,
            0.5 * kappa_c,
            0.5 * kappa_c,
            gamma,
            g_coupling,
            n_th,
        )
    }

    pub fn with_mirrors(
        kappa_c: f64,
        kappa_1: f64,
        kappa_2: f64,
        gamma: f64,
        g_coupling: f64,
        n_th: f64,
    ) -> Result<Self> {
        let p = Self {
            omega_m: 1.0,
            kappa_c,
            kappa_1,
            kappa_2,
            gamma,
            g_coupling,
            n_th,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("omega_m", self.omega_m)?;
        positive("kappa_c", self.kappa_c)?;
        positive("kappa_1", self.kappa_1)?;
        positive("kappa_2", self.kappa_2)?;
        positive("gamma", self.gamma)?;
        if !(self.g_coupling.is_finite() && self.g_coupling >= 0.0) {
            return Err(Error::invalid(
                "g_coupling",
                "must be finite and non-negative",
            ));
        }
        if !(self.n_th.is_finite() && self.n_th >= 0.0) {
            return Err(Error::invalid("n_th", "must be finite and non-negative"));
        }
        let mismatch = (self.kappa_1 + self.kappa_2 - self.kappa_c).abs();
        if mismatch > 4.0 * f64::EPSILON * self.kappa_c {
            return Err(Error::invalid(
                "kappa_1",
                format!(
                    "mirror rates {} + {} do not add up to kappa_c = {}",
                    self.kappa_1, self.kappa_2, self.kappa_c
                ),
            ));
        }
        Ok(())
    }

    /// Physically suspicious but accepted settings.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.gamma > 0.1 * self.omega_m {
            w.push(format!(
                "mechanical damping gamma = {} is not small compared to omega_m",
                self.gamma
            ));
        }
        w
    }

    pub fn with_coupling(mut self, g_coupling: f64) -> Self {
        self.g_coupling = g_coupling;
        self
    }

    pub fn with_n_th(mut self, n_th: f64) -> Self {
        self.n_th = n_th;
        self
    }
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            name,
            format!("must be finite and positive, got {x}"),
        ))
    }
}

/// Feedback settings together with the effective cavity bath they produce.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeedbackConfig {
    pub gain: f64,
    pub eta_d: f64,
    pub kappa_fb: f64,
    pub n_opt_fb: f64,
    /// Whether the squeezing-type term of strength `kappa_c - kappa_fb`
    /// enters the dynamics. On by default.
    pub parametric: bool,
}

impl FeedbackConfig {
    pub fn from_gain(params: &SystemParams, gain: f64, eta_d: f64) -> Result<Self> {
        let (kappa_fb, n_opt_fb) =
            effective_feedback(params.kappa_c, params.kappa_1, params.kappa_2, gain, eta_d)?;
        Ok(Self {
            gain,
            eta_d,
            kappa_fb,
            n_opt_fb,
            parametric: true,
        })
    }

    pub fn from_kappa_fb(params: &SystemParams, kappa_fb: f64, eta_d: f64) -> Result<Self> {
        let gain = invert_feedback(
            params.kappa_c,
            kappa_fb,
            params.kappa_1,
            params.kappa_2,
            eta_d,
        )?;
        let n_opt_fb = optical_occupancy(params.kappa_c, kappa_fb, eta_d);
        Ok(Self {
            gain,
            eta_d,
            kappa_fb,
            n_opt_fb,
            parametric: true,
        })
    }

    /// Feedback loop open: the bare cavity at zero temperature.
    pub fn off(params: &SystemParams) -> Self {
        Self {
            gain: 0.0,
            eta_d: DEFAULT_DETECTION_EFFICIENCY,
            kappa_fb: params.kappa_c,
            n_opt_fb: 0.0,
            parametric: true,
        }
    }

    pub fn without_parametric(mut self) -> Self {
        self.parametric = false;
        self
    }

    /// Coefficient `kappa_c - kappa_fb` of the parametric term, or zero when
    /// the term is disabled.
    pub fn parametric_strength(&self, params: &SystemParams) -> f64 {
        if self.parametric {
            params.kappa_c - self.kappa_fb
        } else {
            0.0
        }
    }

    pub fn warnings(&self, params: &SystemParams) -> Vec<String> {
        let mut w = Vec::new();
        if self.kappa_fb > params.kappa_c {
            w.push(format!(
                "negative feedback gain broadens the cavity: kappa_fb = {} > kappa_c = {}",
                self.kappa_fb, params.kappa_c
            ));
        }
        w
    }
}

fn check_efficiency(eta_d: f64) -> Result<()> {
    if eta_d.is_finite() && eta_d > 0.0 && eta_d <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidEfficiency(eta_d))
    }
}

fn check_mirrors(kappa_c: f64, kappa_1: f64, kappa_2: f64) -> Result<()> {
    positive("kappa_c", kappa_c)?;
    positive("kappa_1", kappa_1)?;
    positive("kappa_2", kappa_2)?;
    if (kappa_1 + kappa_2 - kappa_c).abs() > 4.0 * f64::EPSILON * kappa_c {
        return Err(Error::invalid(
            "kappa_1",
            "kappa_1 + kappa_2 must equal kappa_c",
        ));
    }
    Ok(())
}

fn optical_occupancy(kappa_c: f64, kappa_fb: f64, eta_d: f64) -> f64 {
    let d = kappa_c - kappa_fb;
    d * d / (eta_d * kappa_c * kappa_fb)
}

/// Effective decay rate and bath occupancy of the cavity under feedback.
pub fn effective_feedback(
    kappa_c: f64,
    kappa_1: f64,
    kappa_2: f64,
    gain: f64,
    eta_d: f64,
) -> Result<(f64, f64)> {
    check_mirrors(kappa_c, kappa_1, kappa_2)?;
    check_efficiency(eta_d)?;
    if !gain.is_finite() {
        return Err(Error::invalid("gain", "must be finite"));
    }
    let kappa_fb = kappa_c - 2.0 * gain * (eta_d * kappa_1 * kappa_2).sqrt();
    if !(kappa_fb > 0.0) {
        return Err(Error::FeedbackUnstable { kappa_fb });
    }
    Ok((kappa_fb, optical_occupancy(kappa_c, kappa_fb, eta_d)))
}

/// Gain that produces the requested effective decay rate.
pub fn invert_feedback(
    kappa_c: f64,
    kappa_fb: f64,
    kappa_1: f64,
    kappa_2: f64,
    eta_d: f64,
) -> Result<f64> {
    check_mirrors(kappa_c, kappa_1, kappa_2)?;
    check_efficiency(eta_d)?;
    if !(kappa_fb.is_finite() && kappa_fb > 0.0) {
        return Err(Error::FeedbackUnstable { kappa_fb });
    }
    Ok((kappa_c - kappa_fb) / (2.0 * (eta_d * kappa_1 * kappa_2).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DriftMatrix {
    pub entries: Mat4,
    pub detuning: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseMatrix {
    pub entries: Mat4,
}

/// Quadratic form of the effective Hamiltonian, `H = v^T h v` up to a
/// constant, with `v = (a, b, a†, b†)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    pub entries: Mat4,
    pub detuning: f64,
}

/// Linear generator of the Langevin equations at fixed detuning.
pub fn build_drift(params: &SystemParams, feedback: &FeedbackConfig, delta_p: f64) -> DriftMatrix {
    let k = re(feedback.parametric_strength(params));
    let g = I * params.g_coupling;
    let w = I * params.omega_m;
    let kf = re(feedback.kappa_fb);
    let ga = re(params.gamma);
    let d = I * delta_p;
    let z = Complex::new(0.0, 0.0);
    #[rustfmt::skip]
    let entries = Mat4::new(
        -kf + d, -g,      k,       -g,
        -g,      -ga - w, -g,      z,
        k,       g,       -kf - d, g,
        g,       z,       g,       -ga + w,
    );
    DriftMatrix {
        entries,
        detuning: delta_p,
    }
}

pub fn build_noise(params: &SystemParams, feedback: &FeedbackConfig) -> NoiseMatrix {
    let mut entries = Mat4::zeros();
    let kf = feedback.kappa_fb;
    let n = feedback.n_opt_fb;
    entries[(0, 2)] = re(2.0 * kf * (n + 1.0));
    entries[(2, 0)] = re(2.0 * kf * n);
    entries[(1, 3)] = re(2.0 * params.gamma * (params.n_th + 1.0));
    entries[(3, 1)] = re(2.0 * params.gamma * params.n_th);
    NoiseMatrix { entries }
}

pub fn build_hamiltonian(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> HamiltonianMatrix {
    let h = 0.5;
    let k = I * (h * feedback.parametric_strength(params));
    let g = re(h * params.g_coupling);
    let w = re(h * params.omega_m);
    let d = re(-h * delta_p);
    let z = Complex::new(0.0, 0.0);
    #[rustfmt::skip]
    let entries = Mat4::new(
        -k, g, d, g,
        g,  z, g, w,
        d,  g, k, g,
        g,  w, g, z,
    );
    HamiltonianMatrix {
        entries,
        detuning: delta_p,
    }
}

/// Diagonal damping rates `(kappa_fb, gamma, kappa_fb, gamma)`.
#[cfg(test)]
pub(crate) fn damping_rates(params: &SystemParams, feedback: &FeedbackConfig) -> [f64; 4] {
    [
        feedback.kappa_fb,
        params.gamma,
        feedback.kappa_fb,
        params.gamma,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{conjugation_image, max_abs_diff, symplectic_form};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn fig3() -> SystemParams {
        SystemParams::new(0.05, 5e-5, 0.05, 300.0).unwrap()
    }

    #[test]
    fn gain_zero_is_identity() {
        let (kfb, n) = effective_feedback(0.05, 0.025, 0.025, 0.0, 0.6).unwrap();
        assert_eq!(kfb, 0.05);
        assert_eq!(n, 0.0);
    }

    #[test]
    fn occupancy_values() {
        let p = fig3();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        assert_relative_eq!(
            f.n_opt_fb,
            0.0425 * 0.0425 / (0.6 * 0.05 * 0.0075),
            max_relative = 1e-15
        );
        assert!((f.n_opt_fb - 8.03).abs() < 0.01);
        let f = FeedbackConfig::from_kappa_fb(&p, 1e-4, 0.6).unwrap();
        assert!((f.n_opt_fb - 830.0).abs() < 0.5);
    }

    #[test]
    fn inverse_gain_value() {
        let g = invert_feedback(0.05, 0.0075, 0.025, 0.025, 0.6).unwrap();
        let want = 0.0425 / (2.0 * (0.6f64 * 0.025 * 0.025).sqrt());
        assert_relative_eq!(g, want, max_relative = 1e-15);
        assert!((g - 1.0973).abs() < 1e-4);
        assert_eq!(invert_feedback(0.05, 0.05, 0.025, 0.025, 0.6).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(
            effective_feedback(0.05, 0.025, 0.025, 0.0, 1.5).unwrap_err(),
            Error::InvalidEfficiency(1.5)
        );
        assert!(matches!(
            effective_feedback(0.05, 0.025, 0.025, 10.0, 0.6),
            Err(Error::FeedbackUnstable { .. })
        ));
        assert!(SystemParams::with_mirrors(0.05, 0.02, 0.02, 1e-4, 0.0, 0.0).is_err());
        assert!(SystemParams::new(0.05, -1.0, 0.0, 0.0).is_err());
        assert!(SystemParams::new(0.05, 1e-3, 0.0, -1.0).is_err());
    }

    #[test]
    fn warnings_are_raised_not_errors() {
        let p = SystemParams::new(0.05, 0.5, 0.05, 1.0).unwrap();
        assert_eq!(p.warnings().len(), 1);
        let f = FeedbackConfig::from_gain(&p, -0.5, 0.6).unwrap();
        assert!(f.kappa_fb > p.kappa_c);
        assert_eq!(f.warnings(&p).len(), 1);
    }

    #[test]
    fn decoupled_drift() {
        let p = SystemParams::new(0.05, 1e-3, 0.0, 0.0).unwrap();
        let f = FeedbackConfig::off(&p);
        let m = build_drift(&p, &f, -1.0).entries;
        assert_eq!(m[(0, 0)], -Complex::new(0.05, 1.0));
        assert_eq!(m[(1, 1)], -Complex::new(1e-3, 1.0));
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m[(i, j)], Complex::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn drift_coupling_entries_and_symmetry() {
        let p = fig3();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        let m = build_drift(&p, &f, -2.0).entries;
        assert_eq!(m[(1, 2)], Complex::new(0.0, -0.05));
        assert_eq!(m[(0, 1)], Complex::new(0.0, -0.05));
        assert_eq!(m[(2, 1)], Complex::new(0.0, 0.05));
        assert_eq!(m[(0, 2)], re(0.0425));
        assert_eq!(m[(2, 0)], re(0.0425));
        assert_eq!(conjugation_image(&m), m);
    }

    #[test]
    fn drift_is_hamiltonian_flow_plus_damping() {
        // M + diag(rates) must equal -2i * J * h.
        let p = fig3();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        for delta in [-3.0, -1.0, -0.3] {
            let m = build_drift(&p, &f, delta).entries;
            let h = build_hamiltonian(&p, &f, delta).entries;
            let r = damping_rates(&p, &f);
            let mut coherent = m;
            for (k, rk) in r.iter().enumerate() {
                coherent[(k, k)] += re(*rk);
            }
            let flow = symplectic_form() * h * Complex::new(0.0, -2.0);
            assert!(max_abs_diff(&coherent, &flow) < 1e-16);
        }
    }

    #[test]
    fn noise_entries() {
        let p = SystemParams::new(0.05, 5e-5, 0.05, 300.0).unwrap();
        let n = build_noise(&p, &FeedbackConfig::off(&p)).entries;
        assert_relative_eq!(n[(3, 1)].re, 0.03, max_relative = 1e-14);
        assert_relative_eq!(n[(1, 3)].re, 0.0301, max_relative = 1e-14);
        assert_eq!(n[(0, 2)], re(0.1));
        assert_eq!(n[(2, 0)], re(0.0));
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        let n = build_noise(&p, &f).entries;
        assert_relative_eq!(
            n[(2, 0)].re / n[(0, 2)].re,
            f.n_opt_fb / (f.n_opt_fb + 1.0),
            max_relative = 1e-14
        );
        let nonzero = n.iter().filter(|z| z.norm() > 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn no_parametric_entries_without_feedback() {
        let p = fig3();
        let m = build_drift(&p, &FeedbackConfig::off(&p), -1.0).entries;
        assert_eq!(m[(0, 2)], re(0.0));
        assert_eq!(m[(2, 0)], re(0.0));
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6)
            .unwrap()
            .without_parametric();
        let m = build_drift(&p, &f, -1.0).entries;
        assert_eq!(m[(0, 2)], re(0.0));
    }

    proptest! {
        #[test]
        fn feedback_round_trip(kfb_frac in 1e-4f64..0.999, eta in 0.05f64..1.0, kc in 1e-3f64..1.0) {
            let kfb = kc * kfb_frac;
            let gain = invert_feedback(kc, kfb, 0.5 * kc, 0.5 * kc, eta).unwrap();
            let (back, _) = effective_feedback(kc, 0.5 * kc, 0.5 * kc, gain, eta).unwrap();
            // The subtraction kc - (kc - kfb) limits precision to a few ulps of kc.
            prop_assert!((back - kfb).abs() <= 4.0 * f64::EPSILON * kc);
        }

        #[test]
        fn occupancy_monotone(kfb_frac in 1e-3f64..0.99, eta in 0.05f64..0.95) {
            let kc = 0.05;
            let n = optical_occupancy(kc, kc * kfb_frac, eta);
            prop_assert!(optical_occupancy(kc, kc * kfb_frac, eta + 0.05) < n);
            prop_assert!(optical_occupancy(kc, kc * kfb_frac * 0.9, eta) > n);
        }

        #[test]
        fn builders_are_pure(delta in -5.0f64..0.0, g in 0.0f64..0.3) {
            let p = fig3().with_coupling(g);
            let f = FeedbackConfig::from_kappa_fb(&p, 0.01, 0.6).unwrap();
            prop_assert_eq!(build_drift(&p, &f, delta), build_drift(&p, &f, delta));
            prop_assert_eq!(build_hamiltonian(&p, &f, delta), build_hamiltonian(&p, &f, delta));
            prop_assert_eq!(build_noise(&p, &f), build_noise(&p, &f));
            prop_assert_eq!(conjugation_image(&build_drift(&p, &f, delta).entries), build_drift(&p, &f, delta).entries);
        }
    }
}
