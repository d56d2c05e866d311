//! Two-dimensional parameter scans over independent cycle evaluations.
//!
//! Every cell is computed from its `SweepSpec` alone, so a grid can be evaluated
//! in any order (or in parallel, with the `parallel` feature) and any cell
//! can be recomputed in isolation with [`run_cell`].

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::lyapunov::{classify_stability, StabilityReport};
use crate::model::{build_drift, FeedbackConfig, SystemParams};
use crate::thermo::{
    estimate_cycle, run_cycle_with, CycleLedger, CycleOptions, Method, StrokeSchedule, Variant,
};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepParam {
    DeltaF,
    DeltaI,
    Coupling,
    KappaFb,
    /// Duration of both adiabats (`tau1 = tau3`).
    Tau1,
    Tau2,
    NTh,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DeltaF => "delta_f",
            SweepParam::DeltaI => "delta_i",
            SweepParam::Coupling => "g",
            SweepParam::KappaFb => "kappa_fb",
            SweepParam::Tau1 => "tau1",
            SweepParam::Tau2 => "tau2",
            SweepParam::NTh => "n_th",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn linear(param: SweepParam, lo: f64, hi: f64, n: usize) -> Result<Self> {
        check_range(lo, hi, n)?;
        let values = if n == 1 {
            alloc::vec![lo]
        } else {
            (0..n).map(|i| lerp(lo, hi, i, n)).collect()
        };
        Ok(Self { param, values })
    }

    pub fn log(param: SweepParam, lo: f64, hi: f64, n: usize) -> Result<Self> {
        check_range(lo, hi, n)?;
        if !(lo > 0.0 && hi > 0.0) {
            return Err(Error::invalid("axis", "log spacing needs positive bounds"));
        }
        let (a, b) = (lo.ln(), hi.ln());
        let values = if n == 1 {
            alloc::vec![lo]
        } else {
            let mut v: Vec<f64> = (0..n).map(|i| lerp(a, b, i, n).exp()).collect();
            v[0] = lo;
            v[n - 1] = hi;
            v
        };
        Ok(Self { param, values })
    }

    pub fn explicit(param: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("axis", "needs at least one finite value"));
        }
        Ok(Self { param, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exact at both ends.
fn lerp(lo: f64, hi: f64, i: usize, n: usize) -> f64 {
    let t = i as f64 / (n - 1) as f64;
    lo * (1.0 - t) + hi * t
}

fn check_range(lo: f64, hi: f64, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("axis", "point count must be positive"));
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::invalid("axis", "bounds must be finite"));
    }
    Ok(())
}

/// A stroke duration, absolute or in units of one of the system's time scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Duration {
    Absolute(f64),
    PerKappaFb(f64),
    PerGamma(f64),
    PerCoupling(f64),
    PerKappaC(f64),
}

impl Duration {
    pub fn resolve(&self, params: &SystemParams, feedback: &FeedbackConfig) -> f64 {
        match *self {
            Duration::Absolute(t) => t,
            Duration::PerKappaFb(x) => x / feedback.kappa_fb,
            Duration::PerGamma(x) => x / params.gamma,
            Duration::PerCoupling(x) => x / params.g_coupling,
            Duration::PerKappaC(x) => x / params.kappa_c,
        }
    }
}

/// Detuning protocol whose durations may depend on swept rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleTemplate {
    pub delta_i: f64,
    pub delta_f: f64,
    pub tau: [Duration; 4],
    pub variant: Variant,
}

impl ScheduleTemplate {
    pub fn resolve(
        &self,
        params: &SystemParams,
        feedback: &FeedbackConfig,
    ) -> Result<StrokeSchedule> {
        let tau = self.tau.map(|d| d.resolve(params, feedback));
        StrokeSchedule::new(self.delta_i, self.delta_f, tau, self.variant)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axes: [Axis; 2],
    pub params: SystemParams,
    pub feedback: FeedbackConfig,
    pub template: ScheduleTemplate,
    pub method: Method,
    pub cycle_options: CycleOptions,
    /// Also evaluate the node estimate on full-dynamics cells.
    pub overlay: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes[0].param == self.axes[1].param {
            return Err(Error::invalid(
                "axes",
                "the two axes must sweep different parameters",
            ));
        }
        for a in &self.axes {
            if a.is_empty() {
                return Err(Error::invalid("axes", "axis ranges must be nonempty"));
            }
        }
        self.params.validate()
    }

    /// Configuration of cell `(i, j)`: `i` indexes the first axis.
    pub fn cell_config(
        &self,
        i: usize,
        j: usize,
    ) -> Result<(SystemParams, FeedbackConfig, StrokeSchedule)> {
        let mut params = self.params;
        let mut feedback = self.feedback;
        let mut template = self.template;
        let mut tau_override: [Option<f64>; 2] = [None, None];
        for (axis, k) in self.axes.iter().zip([i, j]) {
            let v = axis.values[k];
            match axis.param {
                SweepParam::DeltaF => template.delta_f = v,
                SweepParam::DeltaI => template.delta_i = v,
                SweepParam::Coupling => params.g_coupling = v,
                SweepParam::NTh => params.n_th = v,
                SweepParam::KappaFb => {
                    let parametric = feedback.parametric;
                    feedback = FeedbackConfig::from_kappa_fb(&params, v, feedback.eta_d)?;
                    feedback.parametric = parametric;
                }
                SweepParam::Tau1 => tau_override[0] = Some(v),
                SweepParam::Tau2 => tau_override[1] = Some(v),
            }
        }
        params.validate()?;
        let mut schedule = template.resolve(&params, &feedback)?;
        if let Some(t) = tau_override[0] {
            schedule.tau[0] = t;
            schedule.tau[2] = t;
        }
        if let Some(t) = tau_override[1] {
            schedule.tau[1] = t;
        }
        schedule.validate()?;
        Ok((params, feedback, schedule))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellOutcome {
    pub efficiency: Option<f64>,
    pub total_work: f64,
    pub absorbed_heat: f64,
    pub functional: bool,
}

impl From<&CycleLedger> for CellOutcome {
    fn from(l: &CycleLedger) -> Self {
        Self {
            efficiency: l.efficiency,
            total_work: l.total_work,
            absorbed_heat: l.absorbed_heat,
            functional: l.functional,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellStatus {
    Ok,
    Unstable,
    Failed(String),
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Unstable => "unstable",
            CellStatus::Failed(_) => "failed",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    pub status: CellStatus,
    /// Stability at the detuning closest to resonance.
    pub stability: Option<StabilityReport>,
    /// Result of the sweep's method; `None` unless the status is `Ok`.
    pub outcome: Option<CellOutcome>,
    /// Node-estimate overlay for full-dynamics sweeps.
    pub estimate: Option<CellOutcome>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub axes: [Axis; 2],
    pub method: Method,
    /// Row-major: index `i * axes[1].len() + j`.
    pub cells: Vec<Cell>,
    pub argmax_efficiency: Option<usize>,
    pub argmax_work: Option<usize>,
}

impl SweepResult {
    pub fn cell(&self, i: usize, j: usize) -> &Cell {
        &self.cells[i * self.axes[1].len() + j]
    }
}

pub fn run_cell(spec: &SweepSpec, i: usize, j: usize) -> Cell {
    let mut cell = Cell {
        i,
        j,
        x: spec.axes[0].values[i],
        y: spec.axes[1].values[j],
        status: CellStatus::Ok,
        stability: None,
        outcome: None,
        estimate: None,
    };
    let (params, feedback, schedule) = match spec.cell_config(i, j) {
        Ok(c) => c,
        Err(e) => {
            cell.status = CellStatus::Failed(format!("{e}"));
            return cell;
        }
    };
    let (near, far) = if schedule.delta_f > schedule.delta_i {
        (schedule.delta_f, schedule.delta_i)
    } else {
        (schedule.delta_i, schedule.delta_f)
    };
    let report = classify_stability(
        &build_drift(&params, &feedback, near),
        &params,
        &feedback,
        near,
    );
    let far_report = classify_stability(
        &build_drift(&params, &feedback, far),
        &params,
        &feedback,
        far,
    );
    cell.stability = Some(report);
    if !(report.hamiltonian_stable && report.dynamically_stable && far_report.dynamically_stable) {
        cell.status = CellStatus::Unstable;
        return cell;
    }
    let estimate = || {
        estimate_cycle(
            &params,
            &feedback,
            schedule.delta_i,
            schedule.delta_f,
            schedule.variant,
        )
    };
    let primary = match spec.method {
        Method::NodeEstimate => estimate(),
        Method::FullDynamics => run_cycle_with(&params, &feedback, &schedule, &spec.cycle_options),
    };
    match primary {
        Ok(l) => cell.outcome = Some(CellOutcome::from(&l)),
        Err(Error::Unstable { .. } | Error::UnstableRegion { .. }) => {
            cell.status = CellStatus::Unstable;
            return cell;
        }
        Err(e) => {
            cell.status = CellStatus::Failed(format!("{e}"));
            return cell;
        }
    }
    if spec.method == Method::FullDynamics && spec.overlay {
        cell.estimate = estimate().ok().map(|l| CellOutcome::from(&l));
    }
    cell
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let (nx, ny) = (spec.axes[0].len(), spec.axes[1].len());
    let cells = evaluate(spec, nx, ny);
    Ok(assemble(spec, cells))
}

/// Like [`run_sweep`] but always on the calling thread.
pub fn run_sweep_serial(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let (nx, ny) = (spec.axes[0].len(), spec.axes[1].len());
    let cells = (0..nx * ny)
        .map(|k| run_cell(spec, k / ny, k % ny))
        .collect();
    Ok(assemble(spec, cells))
}

#[cfg(feature = "parallel")]
fn evaluate(spec: &SweepSpec, nx: usize, ny: usize) -> Vec<Cell> {
    use rayon::prelude::*;
    (0..nx * ny)
        .into_par_iter()
        .map(|k| run_cell(spec, k / ny, k % ny))
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn evaluate(spec: &SweepSpec, nx: usize, ny: usize) -> Vec<Cell> {
    (0..nx * ny)
        .map(|k| run_cell(spec, k / ny, k % ny))
        .collect()
}

fn assemble(spec: &SweepSpec, cells: Vec<Cell>) -> SweepResult {
    let argmax = |key: &dyn Fn(&CellOutcome) -> Option<f64>| -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, c) in cells.iter().enumerate() {
            let Some(v) = c.outcome.as_ref().filter(|o| o.functional).and_then(key) else {
                continue;
            };
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((k, v));
            }
        }
        best.map(|(k, _)| k)
    };
    let argmax_efficiency = argmax(&|o| o.efficiency);
    let argmax_work = argmax(&|o| Some(-o.total_work));
    SweepResult {
        axes: spec.axes.clone(),
        method: spec.method,
        cells,
        argmax_efficiency,
        argmax_work,
    }
}

/// Cells along one axis with the other held at `value`.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    /// The parameter that varies along the slice.
    pub param: SweepParam,
    pub fixed: SweepParam,
    pub fixed_value: f64,
    pub cells: Vec<Cell>,
}

impl Slice {
    pub fn coordinates(&self) -> Vec<f64> {
        self.cells
            .iter()
            .map(|c| if self.varies_first() { c.x } else { c.y })
            .collect()
    }

    fn varies_first(&self) -> bool {
        self.cells.len() < 2 || self.cells[0].i != self.cells[1].i
    }
}

/// Fix `param` at one of its grid values and return the profile along the
/// other axis.
pub fn extract_slice(result: &SweepResult, param: SweepParam, value: f64) -> Result<Slice> {
    let which = result
        .axes
        .iter()
        .position(|a| a.param == param)
        .ok_or(Error::OffGrid {
            axis: param.name(),
            value,
        })?;
    let axis = &result.axes[which];
    let tol = 1e-12
        * axis
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(1e-300);
    let k = axis
        .values
        .iter()
        .position(|v| (v - value).abs() <= tol)
        .ok_or(Error::OffGrid {
            axis: param.name(),
            value,
        })?;
    let (nx, ny) = (result.axes[0].len(), result.axes[1].len());
    let cells = if which == 0 {
        (0..ny).map(|j| result.cells[k * ny + j].clone()).collect()
    } else {
        (0..nx).map(|i| result.cells[i * ny + k].clone()).collect()
    };
    Ok(Slice {
        param: result.axes[1 - which].param,
        fixed: param,
        fixed_value: axis.values[k],
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lyapunov::boundary_detuning;
    use crate::thermo::PropagationOptions;

    fn node_spec(nx: usize, ny: usize) -> SweepSpec {
        let params = SystemParams::new(0.05, 5e-5, 0.05, 300.0).unwrap();
        let feedback = FeedbackConfig::from_kappa_fb(&params, 0.0075, 0.6).unwrap();
        SweepSpec {
            axes: [
                Axis::linear(SweepParam::DeltaF, -0.5, -0.01, nx).unwrap(),
                Axis::linear(SweepParam::Coupling, 0.01, 0.1, ny).unwrap(),
            ],
            params,
            feedback,
            template: ScheduleTemplate {
                delta_i: -3.0,
                delta_f: -0.3,
                tau: [
                    Duration::Absolute(35.0),
                    Duration::Absolute(135.0),
                    Duration::Absolute(35.0),
                    Duration::PerGamma(20.0),
                ],
                variant: Variant::LowerPolariton,
            },
            method: Method::NodeEstimate,
            cycle_options: CycleOptions {
                samples_per_stroke: 0,
                propagation: PropagationOptions::default(),
            },
            overlay: true,
        }
    }

    #[test]
    fn cells_match_direct_estimates() {
        let spec = node_spec(2, 2);
        let r = run_sweep(&spec).unwrap();
        assert_eq!(r.cells.len(), 4);
        for c in &r.cells {
            let (p, f, s) = spec.cell_config(c.i, c.j).unwrap();
            match estimate_cycle(&p, &f, s.delta_i, s.delta_f, s.variant) {
                Ok(l) => assert_eq!(c.outcome, Some(CellOutcome::from(&l))),
                Err(_) => assert_eq!(c.status, CellStatus::Unstable),
            }
        }
        assert!(r.cells.iter().any(|c| c.status == CellStatus::Ok));
    }

    #[test]
    fn mask_matches_pointwise_stability() {
        let spec = node_spec(25, 9);
        let r = run_sweep(&spec).unwrap();
        let mut masked = 0;
        for c in &r.cells {
            let (p, f, s) = spec.cell_config(c.i, c.j).unwrap();
            let rep = classify_stability(&build_drift(&p, &f, s.delta_f), &p, &f, s.delta_f);
            assert_eq!(c.stability, Some(rep));
            let hamiltonian = s.delta_f < boundary_detuning(&p, &f);
            if !hamiltonian {
                assert_eq!(c.status, CellStatus::Unstable);
                assert!(c.outcome.is_none());
                masked += 1;
            }
        }
        assert!(masked > 0);
    }

    #[test]
    fn serial_and_default_agree_and_cells_rerun_identically() {
        let spec = node_spec(5, 4);
        let a = run_sweep(&spec).unwrap();
        let b = run_sweep_serial(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(run_cell(&spec, 3, 2), a.cell(3, 2).clone());
    }

    #[test]
    fn efficiency_rises_towards_resonance() {
        let spec = node_spec(12, 3);
        let r = run_sweep(&spec).unwrap();
        let s = extract_slice(&r, SweepParam::Coupling, spec.axes[1].values[0]).unwrap();
        let eta: Vec<f64> = s
            .cells
            .iter()
            .filter_map(|c| c.outcome.and_then(|o| o.efficiency))
            .collect();
        assert!(eta.len() > 5);
        assert!(eta.windows(2).all(|w| w[1] > w[0]), "{eta:?}");
    }

    #[test]
    fn slices() {
        let spec = node_spec(4, 3);
        let r = run_sweep(&spec).unwrap();
        let s = extract_slice(&r, SweepParam::DeltaF, -0.5).unwrap();
        assert_eq!(s.cells.len(), 3);
        assert_eq!(
            s.cells,
            (0..3).map(|j| r.cell(0, j).clone()).collect::<Vec<_>>()
        );
        assert_eq!(s.coordinates(), spec.axes[1].values);
        let s = extract_slice(&r, SweepParam::Coupling, 0.1).unwrap();
        assert_eq!(s.cells.len(), 4);
        assert_eq!(s.coordinates(), spec.axes[0].values);
        assert!(matches!(
            extract_slice(&r, SweepParam::Coupling, 0.07),
            Err(Error::OffGrid { .. })
        ));
        assert!(matches!(
            extract_slice(&r, SweepParam::NTh, 1.0),
            Err(Error::OffGrid { .. })
        ));
    }

    #[test]
    fn axis_construction() {
        let a = Axis::log(SweepParam::KappaFb, 1e-4, 1e-2, 3).unwrap();
        assert!((a.values[1] - 1e-3).abs() < 1e-15);
        assert_eq!((a.values[0], a.values[2]), (1e-4, 1e-2));
        let l = Axis::linear(SweepParam::DeltaF, -0.5, -0.1, 5).unwrap();
        assert_eq!((l.values[0], l.values[4]), (-0.5, -0.1));
        assert!(Axis::linear(SweepParam::Tau1, 0.0, 1.0, 0).is_err());
        assert!(Axis::log(SweepParam::Tau1, -1.0, 1.0, 3).is_err());
        let mut spec = node_spec(2, 2);
        spec.axes[1].param = SweepParam::DeltaF;
        assert!(run_sweep(&spec).is_err());
    }

    #[test]
    fn durations_follow_swept_rates() {
        let mut spec = node_spec(2, 2);
        spec.axes[0] = Axis::explicit(SweepParam::KappaFb, alloc::vec![1e-3, 2e-3]).unwrap();
        spec.template.tau[1] = Duration::PerKappaFb(3.0);
        let (_, f, s) = spec.cell_config(1, 0).unwrap();
        assert_eq!(f.kappa_fb, 2e-3);
        assert!((s.tau[1] - 1500.0).abs() < 1e-9);
        assert!((s.tau[3] - 4e5).abs() < 1e-6);
    }
}
