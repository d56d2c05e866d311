use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::energy::{energy_complex, internal_energy};
use super::propagate::{Dynamics, Propagation, PropagationOptions};
use super::schedule::{StrokeSchedule, Variant};
use crate::linalg::Mat4;
use crate::lyapunov::{steady_state, CorrelationMatrix};
use crate::model::{build_drift, build_noise, FeedbackConfig, SystemParams};
use crate::polariton::{polariton_basis, to_polariton};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Time evolution of the full second-moment matrix.
    FullDynamics,
    /// Ideal adiabats between stationary populations of one normal mode.
    NodeEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleOptions {
    /// Trajectory points stored per stroke; zero keeps only the ledger.
    pub samples_per_stroke: usize,
    pub propagation: PropagationOptions,
}

impl Default for CycleOptions {
    fn default() -> Self {
        Self {
            samples_per_stroke: 2000,
            propagation: PropagationOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StrokeLedger {
    pub delta_u: f64,
    pub heat: f64,
    pub work: f64,
}

impl StrokeLedger {
    pub fn first_law_defect(&self) -> f64 {
        (self.delta_u - self.heat - self.work).abs()
    }

    pub fn scale(&self) -> f64 {
        self.delta_u
            .abs()
            .max(self.heat.abs())
            .max(self.work.abs())
            .max(1.0)
    }
}

/// One trajectory point. Heat and work are accumulated from the cycle start.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub delta_p: f64,
    pub n_photon: f64,
    pub n_phonon: f64,
    pub n_upper: Option<f64>,
    pub n_lower: Option<f64>,
    pub energy: f64,
    pub heat: f64,
    pub work: f64,
}

/// Energy bookkeeping of one cycle. `W < 0` is work done by the engine and
/// `Q > 0` is heat absorbed by it.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleLedger {
    pub method: Method,
    pub variant: Variant,
    pub strokes: [StrokeLedger; 4],
    /// Work of both adiabats, `W_1 + W_3`.
    pub total_work: f64,
    /// Heat of the isochore that absorbs more.
    pub absorbed_heat: f64,
    /// 0-based stroke index of the absorbing isochore.
    pub absorbed_stroke: usize,
    pub rejected_stroke: usize,
    pub efficiency: Option<f64>,
    /// The cycle delivers work (`total_work < 0`).
    pub functional: bool,
    pub initial_state: Option<CorrelationMatrix>,
    pub final_state: Option<CorrelationMatrix>,
    pub trajectory: Vec<Sample>,
}

impl CycleLedger {
    fn assemble(method: Method, variant: Variant, strokes: [StrokeLedger; 4]) -> Self {
        let total_work = strokes[0].work + strokes[2].work;
        let (absorbed_stroke, rejected_stroke) = if strokes[3].heat >= strokes[1].heat {
            (3, 1)
        } else {
            (1, 3)
        };
        let absorbed_heat = strokes[absorbed_stroke].heat;
        let efficiency = (absorbed_heat > 0.0).then(|| -total_work / absorbed_heat);
        Self {
            method,
            variant,
            strokes,
            total_work,
            absorbed_heat,
            absorbed_stroke,
            rejected_stroke,
            efficiency,
            functional: total_work < 0.0,
            initial_state: None,
            final_state: None,
            trajectory: Vec::new(),
        }
    }

    /// Largest per-stroke first-law defect relative to the stroke's scale.
    pub fn first_law_defect(&self) -> f64 {
        self.strokes
            .iter()
            .map(|s| s.first_law_defect() / s.scale())
            .fold(0.0, f64::max)
    }

    /// Net internal-energy change over the cycle.
    pub fn energy_change(&self) -> f64 {
        self.strokes.iter().map(|s| s.delta_u).sum()
    }

    pub fn extracted_work(&self) -> f64 {
        -self.total_work
    }
}

/// Full-dynamics cycle starting from the stationary state at `delta_i`.
pub fn run_cycle(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
) -> Result<CycleLedger> {
    run_cycle_with(params, feedback, schedule, &CycleOptions::default())
}

pub fn run_cycle_with(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
    options: &CycleOptions,
) -> Result<CycleLedger> {
    let c0 = steady_state(
        &build_drift(params, feedback, schedule.delta_i),
        &build_noise(params, feedback),
    )?;
    run_cycle_from(&c0, params, feedback, schedule, options)
}

pub fn run_cycle_from(
    initial: &CorrelationMatrix,
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
    options: &CycleOptions,
) -> Result<CycleLedger> {
    let dynamics = Dynamics::new(params, feedback, &options.propagation);
    let bounds = schedule.boundaries();
    let n = options.samples_per_stroke;
    let mut trajectory = Vec::with_capacity(4 * n + usize::from(n > 0));
    let mut strokes = [StrokeLedger::default(); 4];
    let mut state = *initial;
    let mut u_start = internal_energy(&state, params, feedback, schedule.delta_i)?;
    let (mut heat_acc, mut work_acc) = (0.0, 0.0);

    for j in 0..4 {
        let tau = schedule.tau[j];
        let d0 = schedule.start_detuning(j);
        let rate = schedule.rate(j);
        let offsets: Vec<f64> = (0..n).map(|i| tau * i as f64 / n as f64).collect();
        let (t0, q0, w0) = (bounds[j], heat_acc, work_acc);
        let mut observe = |s: f64, c: &Mat4, q: f64, w: f64| {
            trajectory.push(sample(
                params,
                feedback,
                t0 + s,
                d0 + rate * s,
                c,
                q0 + q,
                w0 + w,
            ));
        };
        let step: Propagation = if rate == 0.0 {
            dynamics.hold(&state.entries, d0, tau, &offsets, &mut observe)?
        } else {
            dynamics.ramp(&state.entries, d0, rate, tau, &offsets, &mut observe)?
        };
        let d_end = schedule.start_detuning((j + 1) % 4);
        let u_end = internal_energy(&step.state, params, feedback, d_end)?;
        strokes[j] = StrokeLedger {
            delta_u: u_end - u_start,
            heat: step.heat,
            work: step.work,
        };
        heat_acc += step.heat;
        work_acc += step.work;
        state = step.state;
        u_start = u_end;
    }
    if n > 0 {
        let c = state.entries;
        trajectory.push(sample(
            params,
            feedback,
            bounds[4],
            schedule.delta_i,
            &c,
            heat_acc,
            work_acc,
        ));
    }

    let mut ledger = CycleLedger::assemble(Method::FullDynamics, schedule.variant, strokes);
    ledger.initial_state = Some(*initial);
    ledger.final_state = Some(state);
    ledger.trajectory = trajectory;
    Ok(ledger)
}

fn sample(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    t: f64,
    delta_p: f64,
    c: &Mat4,
    heat: f64,
    work: f64,
) -> Sample {
    let state = CorrelationMatrix::new(*c);
    let (n_upper, n_lower) = match polariton_basis(params, feedback, delta_p) {
        Ok(b) => {
            let p = to_polariton(&state, &b);
            (Some(p.n_upper), Some(p.n_lower))
        }
        Err(_) => (None, None),
    };
    Sample {
        t,
        delta_p,
        n_photon: state.n_photon(),
        n_phonon: state.n_phonon(),
        n_upper,
        n_lower,
        energy: energy_complex(&state, params, feedback, delta_p).re,
        heat,
        work,
    }
}

/// Successive cycles, each started from the end state of the previous one.
#[derive(Clone, Debug, PartialEq)]
pub struct LimitCycle {
    pub cycles: Vec<CycleLedger>,
    /// `|energy_change| / |total_work|` after each cycle.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

/// Iterate until `|dU_total| < tolerance * |W_tot|` or `max_iterations`.
pub fn limit_cycle(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
    options: &CycleOptions,
    max_iterations: usize,
    tolerance: f64,
) -> Result<LimitCycle> {
    let mut state = steady_state(
        &build_drift(params, feedback, schedule.delta_i),
        &build_noise(params, feedback),
    )?;
    let mut out = LimitCycle {
        cycles: Vec::new(),
        residuals: Vec::new(),
        converged: false,
    };
    for _ in 0..max_iterations {
        let ledger = run_cycle_from(&state, params, feedback, schedule, options)?;
        let residual = ledger.energy_change().abs() / ledger.total_work.abs();
        state = ledger.final_state.unwrap_or(state);
        out.cycles.push(ledger);
        out.residuals.push(residual);
        if residual < tolerance {
            out.converged = true;
            break;
        }
    }
    Ok(out)
}

/// Ideal four-node cycle of a single normal mode: node energies
/// `E_j = omega_j * N_j` with stationary populations at `delta_i`
/// (nodes 1, 4) and `delta_f` (nodes 2, 3), and populations frozen along the
/// adiabats.
pub fn estimate_cycle(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    delta_i: f64,
    delta_f: f64,
    variant: Variant,
) -> Result<CycleLedger> {
    let noise = build_noise(params, feedback);
    let node = |delta: f64| -> Result<(f64, f64)> {
        let basis = polariton_basis(params, feedback, delta)?;
        let c = steady_state(&build_drift(params, feedback, delta), &noise)?;
        let p = to_polariton(&c, &basis);
        Ok(match variant {
            Variant::LowerPolariton => (basis.omega_b, p.n_lower),
            Variant::UpperPolariton => (basis.omega_a, p.n_upper),
        })
    };
    let (w_i, n_i) = node(delta_i)?;
    let (w_f, n_f) = node(delta_f)?;
    let e1 = w_i * n_i;
    let e2 = w_f * n_i;
    let e3 = w_f * n_f;
    let e4 = w_i * n_f;
    let adiabat = |du: f64| StrokeLedger {
        delta_u: du,
        heat: 0.0,
        work: du,
    };
    let isochore = |du: f64| StrokeLedger {
        delta_u: du,
        heat: du,
        work: 0.0,
    };
    let strokes = [
        adiabat(e2 - e1),
        isochore(e3 - e2),
        adiabat(e4 - e3),
        isochore(e1 - e4),
    ];
    Ok(CycleLedger::assemble(
        Method::NodeEstimate,
        variant,
        strokes,
    ))
}
