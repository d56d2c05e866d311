use alloc::format;

use crate::{Error, Result};

/// Which normal mode carries the working excitations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Lower mode `B`; hot phonon bath, cold feedback bath.
    LowerPolariton,
    /// Upper mode `A`; the bath roles are exchanged.
    UpperPolariton,
}

/// Piecewise-linear detuning protocol: ramp `delta_i -> delta_f` over
/// `tau[0]`, hold over `tau[1]`, ramp back over `tau[2]`, hold over `tau[3]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StrokeSchedule {
    pub delta_i: f64,
    pub delta_f: f64,
    pub tau: [f64; 4],
    pub variant: Variant,
}

impl StrokeSchedule {
    pub fn new(delta_i: f64, delta_f: f64, tau: [f64; 4], variant: Variant) -> Result<Self> {
        let s = Self {
            delta_i,
            delta_f,
            tau,
            variant,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, d) in [("delta_i", self.delta_i), ("delta_f", self.delta_f)] {
            if !(d.is_finite() && d < 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be red detuned (< 0), got {d}"),
                ));
            }
        }
        if self.delta_i == self.delta_f {
            return Err(Error::invalid("delta_f", "must differ from delta_i"));
        }
        for (j, t) in self.tau.iter().enumerate() {
            if !(t.is_finite() && *t > 0.0) {
                return Err(Error::invalid(
                    "tau",
                    format!("stroke {} duration must be positive, got {t}", j + 1),
                ));
            }
        }
        Ok(())
    }

    /// `delta_i < delta_f < 0`: the ramp moves towards the cavity resonance.
    pub fn is_standard(&self) -> bool {
        self.delta_i < self.delta_f && self.delta_f < 0.0
    }

    pub fn period(&self) -> f64 {
        self.tau.iter().sum()
    }

    /// Stroke start times followed by the period.
    pub fn boundaries(&self) -> [f64; 5] {
        let mut t = [0.0; 5];
        for j in 0..4 {
            t[j + 1] = t[j] + self.tau[j];
        }
        t
    }

    /// Detuning at the start of stroke `j` (0-based).
    pub fn start_detuning(&self, j: usize) -> f64 {
        match j {
            0 | 3 => self.delta_i,
            _ => self.delta_f,
        }
    }

    /// Constant rate of change of the detuning during stroke `j`.
    pub fn rate(&self, j: usize) -> f64 {
        match j {
            0 => (self.delta_f - self.delta_i) / self.tau[0],
            2 => (self.delta_i - self.delta_f) / self.tau[2],
            _ => 0.0,
        }
    }

    /// Stroke index containing `t`; the stroke end belongs to the next stroke
    /// except at the period.
    pub fn stroke_at(&self, t: f64) -> usize {
        let b = self.boundaries();
        (0..4).find(|&j| t < b[j + 1]).unwrap_or(3)
    }
}

pub fn detuning_at(schedule: &StrokeSchedule, t: f64) -> Result<f64> {
    let period = schedule.period();
    if !(t >= 0.0 && t <= period) {
        return Err(Error::OutOfRange { t, period });
    }
    let j = schedule.stroke_at(t);
    let b = schedule.boundaries();
    let local = t - b[j];
    Ok(match j {
        0 | 2 => schedule.start_detuning(j) + schedule.rate(j) * local,
        _ => schedule.start_detuning(j),
    })
}
