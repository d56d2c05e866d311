//! Time evolution of the second moments, `dC/dt = M C + C M^T + N`.
//!
//! Constant-detuning segments are solved exactly with matrix exponentials,
//! so arbitrarily long thermalization strokes cost the same as short ones.
//! Ramps use an embedded Dormand-Prince 5(4) pair on the state augmented
//! by the accumulated heat and work, so both integrals share the nodes of
//! the moment equation.

#[allow(unused_imports)]
use num_traits::Float;

use super::energy::{heat_rate_with, HeatModel};
use super::schedule::StrokeSchedule;
use crate::linalg::{expm, max_abs, re, Complex, LyapunovOperator, Mat4};
use crate::lyapunov::{stationary_from, CorrelationMatrix};
use crate::model::{build_drift, build_noise, FeedbackConfig, SystemParams};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Ramp steps are capped at `step_factor / max(|delta|, omega_m, G)`.
    pub step_factor: f64,
    pub max_steps: usize,
    pub heat_model: HeatModel,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            step_factor: 0.01,
            max_steps: 50_000_000,
            heat_model: HeatModel::Dissipator,
        }
    }
}

/// End state plus heat absorbed and work done over the interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagation {
    pub state: CorrelationMatrix,
    pub heat: f64,
    pub work: f64,
}

/// Fixed physical context of a propagation.
pub(crate) struct Dynamics<'a> {
    pub params: &'a SystemParams,
    pub feedback: &'a FeedbackConfig,
    pub options: &'a PropagationOptions,
    noise: Mat4,
}

impl<'a> Dynamics<'a> {
    pub fn new(
        params: &'a SystemParams,
        feedback: &'a FeedbackConfig,
        options: &'a PropagationOptions,
    ) -> Self {
        Self {
            params,
            feedback,
            options,
            noise: build_noise(params, feedback).entries,
        }
    }

    fn heat_rate(&self, c: &Mat4, delta: f64) -> f64 {
        heat_rate_with(
            self.options.heat_model,
            &CorrelationMatrix::new(*c),
            self.params,
            self.feedback,
            delta,
        )
    }

    /// Hold `delta` for `duration`. `observe` receives every requested
    /// offset in `samples` (ascending, within `[0, duration]`) together with
    /// the state and the heat accumulated since the segment start.
    pub fn hold(
        &self,
        c0: &Mat4,
        delta: f64,
        duration: f64,
        samples: &[f64],
        observe: &mut dyn FnMut(f64, &Mat4, f64, f64),
    ) -> Result<Propagation> {
        let m = build_drift(self.params, self.feedback, delta).entries;
        let op = LyapunovOperator::new(&m)?;
        let css = stationary_from(&op, &m, &self.noise)?.entries;
        let q_ss = self.heat_rate(&css, delta);
        let q_zero = self.heat_rate(&Mat4::zeros(), delta);
        let dev = c0 - css;
        let at = |t: f64| -> Result<(Mat4, f64)> {
            if t == 0.0 {
                return Ok((*c0, 0.0));
            }
            let e = expm(&(m * re(t)));
            let c = css + e * dev * e.transpose();
            // Y = integral of the deviation; M Y + Y M^T = C(t) - C(0).
            let y = op.solve(&(c - c0))?;
            let heat = t * q_ss + (self.heat_rate(&y, delta) - q_zero);
            Ok((c, heat))
        };
        for &s in samples {
            let (c, q) = at(s)?;
            observe(s, &c, q, 0.0);
        }
        let (c, heat) = at(duration)?;
        Ok(Propagation {
            state: CorrelationMatrix::new(c),
            heat,
            work: 0.0,
        })
    }

    /// Linear ramp `delta(t) = delta0 + rate * t` over `duration`.
    pub fn ramp(
        &self,
        c0: &Mat4,
        delta0: f64,
        rate: f64,
        duration: f64,
        samples: &[f64],
        observe: &mut dyn FnMut(f64, &Mat4, f64, f64),
    ) -> Result<Propagation> {
        let base = build_drift(self.params, self.feedback, 0.0).entries;
        let delta1 = delta0 + rate * duration;
        let freq = delta0
            .abs()
            .max(delta1.abs())
            .max(self.params.omega_m)
            .max(self.params.g_coupling);
        let h_max = self.options.step_factor / freq;
        let rhs = |t: f64, y: &Aug| -> Aug {
            let delta = delta0 + rate * t;
            let mut m = base;
            m[(0, 0)] += Complex::new(0.0, delta);
            m[(2, 2)] -= Complex::new(0.0, delta);
            Aug {
                c: m * y.c + y.c * m.transpose() + self.noise,
                q: self.heat_rate(&y.c, delta),
                w: -rate * y.c[(2, 0)].re,
            }
        };
        let mut stepper = Stepper::new(
            rhs,
            Aug {
                c: *c0,
                q: 0.0,
                w: 0.0,
            },
            h_max,
            self.options,
        );
        for &s in samples {
            stepper.advance_to(s)?;
            observe(s, &stepper.y.c, stepper.y.q, stepper.y.w);
        }
        stepper.advance_to(duration)?;
        Ok(Propagation {
            state: CorrelationMatrix::new(stepper.y.c),
            heat: stepper.y.q,
            work: stepper.y.w,
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Aug {
    c: Mat4,
    q: f64,
    w: f64,
}

impl Aug {
    fn axpy(&self, h: f64, terms: &[(f64, &Aug)]) -> Aug {
        let mut out = *self;
        for (b, k) in terms {
            let s = h * b;
            out.c += k.c * re(s);
            out.q += s * k.q;
            out.w += s * k.w;
        }
        out
    }

    fn scale(&self) -> f64 {
        max_abs(&self.c).max(self.q.abs()).max(self.w.abs())
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'o, F> {
    f: F,
    t: f64,
    y: Aug,
    k1: Aug,
    h: f64,
    h_max: f64,
    steps: usize,
    options: &'o PropagationOptions,
}

impl<'o, F: Fn(f64, &Aug) -> Aug> Stepper<'o, F> {
    fn new(f: F, y: Aug, h_max: f64, options: &'o PropagationOptions) -> Self {
        let k1 = f(0.0, &y);
        Self {
            f,
            t: 0.0,
            y,
            k1,
            h: h_max,
            h_max,
            steps: 0,
            options,
        }
    }

    fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.t < t_end {
            let remaining = t_end - self.t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            if h < 1e-14 * self.t.abs().max(1.0) && !last {
                return Err(Error::StepFailure { t: self.t, step: h });
            }
            self.steps += 1;
            if self.steps > self.options.max_steps {
                return Err(Error::StepFailure { t: self.t, step: h });
            }
            let (y_new, k7, err) = self.trial(h);
            if err <= 1.0 {
                self.t = if last { t_end } else { self.t + h };
                self.y = y_new;
                self.k1 = k7;
                let grow = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
                if !last {
                    self.h = (h * grow.clamp(0.2, 5.0)).min(self.h_max);
                }
            } else {
                self.h = h * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
        }
        Ok(())
    }

    fn trial(&self, h: f64) -> (Aug, Aug, f64) {
        let (t, y, k1) = (self.t, &self.y, &self.k1);
        let f = &self.f;
        let k2 = f(t + C2 * h, &y.axpy(h, &[(A21, k1)]));
        let k3 = f(t + C3 * h, &y.axpy(h, &[(A31, k1), (A32, &k2)]));
        let k4 = f(t + C4 * h, &y.axpy(h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
        let k5 = f(
            t + C5 * h,
            &y.axpy(h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &y.axpy(
                h,
                &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y_new = y.axpy(h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
        let k7 = f(t + h, &y_new);
        let zero = Aug {
            c: Mat4::zeros(),
            q: 0.0,
            w: 0.0,
        };
        let e = zero.axpy(
            h,
            &[
                (E1, k1),
                (E3, &k3),
                (E4, &k4),
                (E5, &k5),
                (E6, &k6),
                (E7, &k7),
            ],
        );
        let tol = self.options.atol + self.options.rtol * y.scale().max(y_new.scale());
        (y_new, k7, e.scale() / tol)
    }
}

/// Evolve `state` from `t0` to `t1` under the cycle's detuning protocol.
pub fn propagate(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
    t0: f64,
    t1: f64,
) -> Result<CorrelationMatrix> {
    propagate_with(
        state,
        params,
        feedback,
        schedule,
        t0,
        t1,
        &PropagationOptions::default(),
    )
    .map(|p| p.state)
}

pub fn propagate_with(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
    t0: f64,
    t1: f64,
    options: &PropagationOptions,
) -> Result<Propagation> {
    let period = schedule.period();
    for t in [t0, t1] {
        if !(t >= 0.0 && t <= period) {
            return Err(Error::OutOfRange { t, period });
        }
    }
    if t1 < t0 {
        return Err(Error::OutOfRange { t: t1, period });
    }
    let dynamics = Dynamics::new(params, feedback, options);
    let b = schedule.boundaries();
    let mut acc = Propagation {
        state: *state,
        heat: 0.0,
        work: 0.0,
    };
    let mut ignore = |_: f64, _: &Mat4, _: f64, _: f64| {};
    for j in 0..4 {
        let lo = t0.max(b[j]);
        let hi = t1.min(b[j + 1]);
        if hi <= lo {
            continue;
        }
        let rate = schedule.rate(j);
        let delta = schedule.start_detuning(j) + rate * (lo - b[j]);
        let c = &acc.state.entries;
        let step = if rate == 0.0 {
            dynamics.hold(c, delta, hi - lo, &[], &mut ignore)?
        } else {
            dynamics.ramp(c, delta, rate, hi - lo, &[], &mut ignore)?
        };
        acc = Propagation {
            state: step.state,
            heat: acc.heat + step.heat,
            work: acc.work + step.work,
        };
    }
    Ok(acc)
}

/// Exact evolution at fixed detuning, with the heat absorbed.
pub fn relax_constant(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
    duration: f64,
    options: &PropagationOptions,
) -> Result<Propagation> {
    let d = Dynamics::new(params, feedback, options);
    d.hold(&state.entries, delta_p, duration, &[], &mut |_, _, _, _| {})
}

/// Fixed-detuning evolution by the adaptive integrator instead of the
/// exponential; exposed for cross-checks.
pub fn integrate_constant(
    state: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_p: f64,
    duration: f64,
    options: &PropagationOptions,
) -> Result<Propagation> {
    let d = Dynamics::new(params, feedback, options);
    d.ramp(
        &state.entries,
        delta_p,
        0.0,
        duration,
        &[],
        &mut |_, _, _, _| {},
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::lyapunov::steady_state;
    use crate::model::build_noise;
    use crate::thermo::energy::internal_energy;
    use crate::thermo::schedule::Variant;

    fn setup() -> (SystemParams, FeedbackConfig) {
        let p = SystemParams::new(0.05, 5e-5, 0.15, 300.0).unwrap();
        let f = FeedbackConfig::from_kappa_fb(&p, 0.0075, 0.6).unwrap();
        (p, f)
    }

    /// Classical fixed-step RK4 on the moment equation.
    fn rk4(
        p: &SystemParams,
        f: &FeedbackConfig,
        c0: &Mat4,
        d0: f64,
        rate: f64,
        t: f64,
        n: usize,
    ) -> Mat4 {
        let noise = build_noise(p, f).entries;
        let rhs = |s: f64, c: &Mat4| {
            let m = build_drift(p, f, d0 + rate * s).entries;
            m * c + c * m.transpose() + noise
        };
        let h = t / n as f64;
        let mut c = *c0;
        for i in 0..n {
            let s = i as f64 * h;
            let k1 = rhs(s, &c);
            let k2 = rhs(s + h / 2.0, &(c + k1 * re(h / 2.0)));
            let k3 = rhs(s + h / 2.0, &(c + k2 * re(h / 2.0)));
            let k4 = rhs(s + h, &(c + k3 * re(h)));
            c += (k1 + k2 * re(2.0) + k3 * re(2.0) + k4) * re(h / 6.0);
        }
        c
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let (p, f) = setup();
        let d = build_drift(&p, &f, -3.0);
        let css = steady_state(&d, &build_noise(&p, &f)).unwrap();
        let o = PropagationOptions::default();
        let r = relax_constant(&css, &p, &f, -3.0, 1e5, &o).unwrap();
        assert!(max_abs_diff(&r.state.entries, &css.entries) < 1e-9 * max_abs(&css.entries));
        assert!(r.heat.abs() < 1e-6);
    }

    #[test]
    fn long_hold_relaxes() {
        let (p, f) = setup();
        let c0 = CorrelationMatrix::thermal(0.0, 0.0);
        let css = steady_state(&build_drift(&p, &f, -0.5), &build_noise(&p, &f)).unwrap();
        let r = relax_constant(
            &c0,
            &p,
            &f,
            -0.5,
            20.0 / 5e-5 * 2.0,
            &PropagationOptions::default(),
        )
        .unwrap();
        assert!(max_abs_diff(&r.state.entries, &css.entries) < 1e-8 * max_abs(&css.entries));
    }

    #[test]
    fn ramp_matches_rk4() {
        let (p, f) = setup();
        let c0 = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        let o = PropagationOptions::default();
        let d = Dynamics::new(&p, &f, &o);
        let rate = 2.5 / 35.0;
        let r = d
            .ramp(&c0.entries, -3.0, rate, 10.0, &[], &mut |_, _, _, _| {})
            .unwrap();
        let want = rk4(&p, &f, &c0.entries, -3.0, rate, 10.0, 40_000);
        assert!(max_abs_diff(&r.state.entries, &want) < 1e-9 * max_abs(&want));
    }

    #[test]
    fn hold_matches_integrator_and_first_law() {
        let (p, f) = setup();
        let c0 = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        let o = PropagationOptions::default();
        let a = relax_constant(&c0, &p, &f, -0.5, 300.0, &o).unwrap();
        let b = integrate_constant(&c0, &p, &f, -0.5, 300.0, &o).unwrap();
        let scale = max_abs(&a.state.entries);
        assert!(max_abs_diff(&a.state.entries, &b.state.entries) < 1e-8 * scale);
        assert!((a.heat - b.heat).abs() < 1e-8 * a.heat.abs());
        let du = internal_energy(&a.state, &p, &f, -0.5).unwrap()
            - internal_energy(&c0, &p, &f, -0.5).unwrap();
        assert!((du - a.heat).abs() < 1e-9 * du.abs());
        assert_eq!(a.work, 0.0);
    }

    #[test]
    fn ramp_first_law() {
        let (p, f) = setup();
        let c0 = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        let s = StrokeSchedule::new(
            -3.0,
            -0.3,
            [35.0, 135.0, 35.0, 4e5],
            Variant::LowerPolariton,
        )
        .unwrap();
        let r = propagate_with(&c0, &p, &f, &s, 0.0, 35.0, &PropagationOptions::default()).unwrap();
        let du = internal_energy(&r.state, &p, &f, -0.3).unwrap()
            - internal_energy(&c0, &p, &f, -3.0).unwrap();
        assert!((du - r.heat - r.work).abs() < 1e-8 * du.abs().max(r.work.abs()));
        assert!(r.work < 0.0);
        assert!(r.state.commutator_defect() < 1e-10);
    }

    #[test]
    fn propagate_across_strokes_and_errors() {
        let (p, f) = setup();
        let s = StrokeSchedule::new(
            -3.0,
            -0.3,
            [35.0, 135.0, 35.0, 4e5],
            Variant::LowerPolariton,
        )
        .unwrap();
        let c0 = steady_state(&build_drift(&p, &f, -3.0), &build_noise(&p, &f)).unwrap();
        let whole = propagate(&c0, &p, &f, &s, 0.0, 100.0).unwrap();
        let half = propagate(&c0, &p, &f, &s, 0.0, 50.0).unwrap();
        let rest = propagate(&half, &p, &f, &s, 50.0, 100.0).unwrap();
        assert!(max_abs_diff(&whole.entries, &rest.entries) < 1e-8 * max_abs(&whole.entries));
        assert!(matches!(
            propagate(&c0, &p, &f, &s, 0.0, 1e9),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn step_budget_is_enforced() {
        let (p, f) = setup();
        let c0 = CorrelationMatrix::vacuum();
        let o = PropagationOptions {
            max_steps: 10,
            ..Default::default()
        };
        assert!(matches!(
            integrate_constant(&c0, &p, &f, -1.0, 100.0, &o),
            Err(Error::StepFailure { .. })
        ));
    }
}
