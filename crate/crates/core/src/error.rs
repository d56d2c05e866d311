use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("detection efficiency {0} is outside (0, 1]")]
    InvalidEfficiency(f64),

    #[error(
        "feedback drives the effective cavity decay to {kappa_fb} (instability threshold crossed)"
    )]
    FeedbackUnstable { kappa_fb: f64 },

    #[error("drift matrix has an eigenvalue with real part {max_real:e}")]
    Unstable { max_real: f64 },

    #[error("Lyapunov operator is numerically singular")]
    SingularSystem,

    #[error("detuning {delta_p} lies outside the region where polariton modes are defined")]
    UnstableRegion { delta_p: f64 },

    #[error("polariton frequencies are degenerate (splitting {splitting:e})")]
    DegenerateSpectrum { splitting: f64 },

    #[error("time {t} is outside the cycle [0, {period}]")]
    OutOfRange { t: f64, period: f64 },

    #[error("integrator could not meet tolerance at t = {t} (step {step:e})")]
    StepFailure { t: f64, step: f64 },

    #[error("internal energy has imaginary part {imag:e}")]
    NonRealEnergy { imag: f64 },

    #[error("value {value} is not on the {axis} axis")]
    OffGrid { axis: &'static str, value: f64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
