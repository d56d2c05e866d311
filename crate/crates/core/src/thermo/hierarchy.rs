use alloc::vec::Vec;

use super::schedule::{StrokeSchedule, Variant};
use crate::model::{FeedbackConfig, SystemParams};

/// Required ratio between adjacent time scales.
pub const DEFAULT_MARGIN: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyCheck {
    pub satisfied: bool,
    /// Each `slow / fast` ratio of the chain, labelled.
    pub margins: Vec<(&'static str, f64)>,
    /// The working bath ordering: `n_opt_fb < n_th` for the lower mode,
    /// reversed for the upper.
    pub occupancy_ordered: bool,
    pub margin: f64,
}

pub fn check_hierarchy(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
) -> HierarchyCheck {
    check_hierarchy_with(params, feedback, schedule, DEFAULT_MARGIN)
}

pub fn check_hierarchy_with(
    params: &SystemParams,
    feedback: &FeedbackConfig,
    schedule: &StrokeSchedule,
    margin: f64,
) -> HierarchyCheck {
    let g = params.g_coupling;
    let [t1, t2, t3, t4] = schedule.tau;
    let (fast, slow) = match schedule.variant {
        Variant::LowerPolariton => (feedback.kappa_fb, params.gamma),
        Variant::UpperPolariton => (params.gamma, feedback.kappa_fb),
    };
    let margins = match schedule.variant {
        Variant::LowerPolariton => alloc::vec![
            ("G*tau1", g * t1),
            ("G*tau3", g * t3),
            ("1/(kappa_fb*tau1)", 1.0 / (fast * t1)),
            ("1/(kappa_fb*tau3)", 1.0 / (fast * t3)),
            ("kappa_fb*tau2", fast * t2),
            ("1/(gamma*tau2)", 1.0 / (slow * t2)),
            ("gamma*tau4", slow * t4),
        ],
        Variant::UpperPolariton => alloc::vec![
            ("G*tau1", g * t1),
            ("G*tau3", g * t3),
            ("1/(gamma*tau1)", 1.0 / (fast * t1)),
            ("1/(gamma*tau3)", 1.0 / (fast * t3)),
            ("gamma*tau2", fast * t2),
            ("1/(kappa_fb*tau2)", 1.0 / (slow * t2)),
            ("kappa_fb*tau4", slow * t4),
        ],
    };
    let occupancy_ordered = match schedule.variant {
        Variant::LowerPolariton => feedback.n_opt_fb < params.n_th,
        Variant::UpperPolariton => feedback.n_opt_fb > params.n_th,
    };
    let satisfied = occupancy_ordered && margins.iter().all(|(_, r)| *r > margin);
    HierarchyCheck {
        satisfied,
        margins,
        occupancy_ordered,
        margin,
    }
}
