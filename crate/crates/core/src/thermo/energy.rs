use crate::linalg::Complex;
use crate::lyapunov::CorrelationMatrix;
use crate::model::{FeedbackConfig, SystemParams};
use crate::{Error, Result};

/// Which expression is used for the dissipative energy flow.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HeatModel {
    /// Derived from the Lindblad dissipators with rates `(kappa_fb, n_opt_fb)`
    /// and `(gamma, n_th)`. Consistent with the Langevin equations.
    #[default]
    Dissipator,
    /// The closed expression as it is usually printed, with `kappa_c` as the
    /// optical rate. Kept for comparison only; it does not close the first law.
    Transcribed,
}

/// `<b a> + <b a†> + <b† a> + <b† a†>`.
fn cross_sum(c: &CorrelationMatrix) -> Complex {
    let e = &c.entries;
    e[(1, 0)] + e[(1, 2)] + e[(3, 0)] + e[(3, 2)]
}

/// `<a a> - <a† a†>`.
fn squeeze_difference(c: &CorrelationMatrix) -> Complex {
    c.entries[(0, 0)] - c.entries[(2, 2)]
}

pub(crate) fn energy_complex(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> Complex {
    let k = feedback.parametric_strength(params);
    let e = &state.entries;
    e[(2, 0)] * (-delta_p) + e[(3, 1)] * params.omega_m + cross_sum(state) * params.g_coupling
        - Complex::new(0.0, 0.5 * k) * squeeze_difference(state)
}

/// Normal-ordered mean of the effective Hamiltonian.
pub fn internal_energy(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> Result<f64> {
    let u = energy_complex(state, params, feedback, delta_p);
    if u.im.abs() > 1e-10 * u.re.abs().max(1.0) {
        return Err(Error::NonRealEnergy { imag: u.im });
    }
    Ok(u.re)
}

/// Power delivered by the external control, `-(d delta/dt) <a† a>`.
pub fn work_rate(state: &CorrelationMatrix, d_delta_dt: f64) -> f64 {
    -d_delta_dt * state.n_photon()
}

pub fn heat_rate(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> f64 {
    heat_rate_with(HeatModel::Dissipator, state, params, feedback, delta_p)
}

pub fn heat_rate_with(
    model: HeatModel,
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
) -> f64 {
    let w = params.omega_m;
    let gamma = params.gamma;
    let n_a = state.n_photon();
    let n_b = state.n_phonon();
    let k = feedback.parametric_strength(params);
    let cross = cross_sum(state).re;
    let squeeze = squeeze_difference(state);
    match model {
        HeatModel::Dissipator => {
            let kf = feedback.kappa_fb;
            -delta_p * 2.0 * kf * (feedback.n_opt_fb - n_a) + w * 2.0 * gamma * (params.n_th - n_b)
                - params.g_coupling * (kf + gamma) * cross
                + (Complex::new(0.0, k * kf) * squeeze).re
        }
        HeatModel::Transcribed => {
            let kc = params.kappa_c;
            2.0 * w * gamma * params.n_th - 2.0 * delta_p * kc * feedback.n_opt_fb
                + 2.0 * delta_p * kc * n_a
                - 2.0 * w * gamma * kc * n_b
                - params.g_coupling * (kc + gamma) * cross
                + (Complex::new(0.0, kc * k) * squeeze).re
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{re, Mat4};
    use crate::lyapunov::steady_state;
    use crate::model::{build_drift, build_hamiltonian, build_noise, damping_rates};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn generic_state() -> CorrelationMatrix {
        // A physical state: stationary at one detuning, evaluated at another.
        let p = SystemParams::new(0.05, 5e-3, 0.15, 30.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.01, 0.6).unwrap();
        steady_state(&build_drift(&p, &f, -1.2), &build_noise(&p, &f)).unwrap()
    }

    /// `Tr(h C) - (omega_m - delta_p) / 2`: the symmetric contraction minus
    /// the zero-point offset.
    fn energy_by_contraction(
        c: &CorrelationMatrix,
        p: &SystemParams,
        f: &FeedbackConfig,
        d: f64,
    ) -> Complex {
        let h = build_hamiltonian(p, f, d).entries;
        (h * c.entries).trace() - re(0.5 * (p.omega_m - d))
    }

    fn heat_by_contraction(
        c: &CorrelationMatrix,
        p: &SystemParams,
        f: &FeedbackConfig,
        d: f64,
    ) -> f64 {
        let h = build_hamiltonian(p, f, d).entries;
        let r = damping_rates(p, f);
        let n = build_noise(p, f).entries;
        let flow = Mat4::from_fn(|i, j| n[(i, j)] - c.entries[(i, j)] * (r[i] + r[j]));
        (h * flow).trace().re
    }

    #[test]
    fn thermal_values() {
        let p = SystemParams::new(0.05, 5e-5, 0.0, 300.0).unwrap();
        let f = FeedbackConfig::off(&p);
        let c = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        assert_relative_eq!(
            internal_energy(&c, &p, &f, -3.0).unwrap(),
            300.0,
            max_relative = 1e-10
        );
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6)
            .unwrap()
            .without_parametric();
        let c = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        assert_relative_eq!(
            internal_energy(&c, &p, &f, -3.0).unwrap(),
            3.0 * f.n_opt_fb + 300.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn energy_matches_contraction() {
        let p = SystemParams::new(0.05, 5e-3, 0.15, 30.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.01, 0.6).unwrap();
        let c = generic_state();
        for d in [-3.0, -1.2, -0.4] {
            let u = internal_energy(&c, &p, &f, d).unwrap();
            let oracle = energy_by_contraction(&c, &p, &f, d);
            assert!(oracle.im.abs() < 1e-10);
            assert_relative_eq!(u, oracle.re, max_relative = 1e-12);
        }
    }

    #[test]
    fn heat_matches_contraction() {
        let p = SystemParams::new(0.05, 5e-3, 0.15, 30.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.01, 0.6).unwrap();
        let c = generic_state();
        for d in [-3.0, -1.2, -0.4] {
            let q = heat_rate(&c, &p, &f, d);
            assert!((q - heat_by_contraction(&c, &p, &f, d)).abs() < 1e-12 * q.abs().max(1.0));
        }
    }

    #[test]
    fn stationary_state_exchanges_no_heat() {
        let p = SystemParams::new(0.05, 5e-3, 0.15, 30.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.01, 0.6).unwrap();
        let c = generic_state();
        assert!(heat_rate(&c, &p, &f, -1.2).abs() < 1e-11);
        assert!(heat_rate(&c, &p, &f, -0.4).abs() > 1e-3);
    }

    #[test]
    fn cavity_heats_from_feedback_bath() {
        let p = SystemParams::new(0.05, 5e-5, 0.0, 300.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        let c = CorrelationMatrix::thermal(0.0, 300.0);
        let q = heat_rate(&c, &p, &f, -3.0);
        assert_relative_eq!(q, 3.0 * 2.0 * 0.0075 * f.n_opt_fb, max_relative = 1e-14);
        assert!(q > 0.0);
    }

    #[test]
    fn transcribed_variant_differs() {
        let p = SystemParams::new(0.05, 5e-3, 0.15, 30.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.01, 0.6).unwrap();
        let c = generic_state();
        let a = heat_rate_with(HeatModel::Dissipator, &c, &p, &f, -1.2);
        let b = heat_rate_with(HeatModel::Transcribed, &c, &p, &f, -1.2);
        assert!((a - b).abs() > 1e-3);
    }

    #[test]
    fn corrupted_state_is_flagged() {
        let p = SystemParams::new(0.05, 5e-5, 0.05, 300.0).unwrap();
        let f = FeedbackConfig::off(&p);
        let mut c = CorrelationMatrix::thermal(1.0, 2.0);
        c.entries[(3, 1)] = Complex::new(2.0, 0.5);
        assert!(matches!(
            internal_energy(&c, &p, &f, -1.0),
            Err(Error::NonRealEnergy { .. })
        ));
    }

    proptest! {
        #[test]
        fn work_rate_sign(rate in -1.0f64..1.0, n in 0.0f64..100.0) {
            let c = CorrelationMatrix::thermal(n, 1.0);
            prop_assert_eq!(work_rate(&c, rate), -rate * n);
            prop_assert_eq!(work_rate(&c, 0.0), 0.0);
        }
    }
}
