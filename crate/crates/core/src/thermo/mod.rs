//! Otto-cycle operation: detuning protocol, propagation of the second
//! moments, energy bookkeeping and the per-stroke ledger.

mod cycle;
mod energy;
mod hierarchy;
mod propagate;
mod schedule;

pub use cycle::{
    estimate_cycle, limit_cycle, run_cycle, run_cycle_from, run_cycle_with, CycleLedger,
    CycleOptions, LimitCycle, Method, Sample, StrokeLedger,
};
pub use energy::{heat_rate, heat_rate_with, internal_energy, work_rate, HeatModel};
pub use hierarchy::{check_hierarchy, check_hierarchy_with, HierarchyCheck, DEFAULT_MARGIN};
pub use propagate::{
    integrate_constant, propagate, propagate_with, relax_constant, Propagation, PropagationOptions,
};
pub use schedule::{detuning_at, StrokeSchedule, Variant};
