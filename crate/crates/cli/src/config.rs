//! TOML run configuration.
//!
//! Rates can be given either as amplitude rates (`kappa_c`, `gamma`,
//! `kappa_fb`) or as the full linewidths used in figure captions
//! (`2kappa_c`, `2gamma`, `2kappa_fb`), which are halved on input.

use std::fmt;
use std::path::{Path, PathBuf};

use otto_core::sweep::{Duration, ScheduleTemplate};
use otto_core::thermo::{CycleOptions, HeatModel, Method, PropagationOptions, DEFAULT_MARGIN};
use otto_core::{
    Axis, FeedbackConfig, StrokeSchedule, SweepParam, SweepSpec, SystemParams, Variant,
};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{field}: {message}")]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

fn err(field: impl Into<String>, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    feedback: Option<RawFeedback>,
    schedule: Option<RawSchedule>,
    steady: Option<RawSteady>,
    polariton: Option<RawScan>,
    sweep: Option<RawSweep>,
    propagation: Option<RawPropagation>,
    hierarchy: Option<RawHierarchy>,
    output: Option<RawOutput>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    #[serde(rename = "2kappa_c")]
    two_kappa_c: Option<f64>,
    kappa_c: Option<f64>,
    kappa_1: Option<f64>,
    kappa_2: Option<f64>,
    #[serde(rename = "2gamma")]
    two_gamma: Option<f64>,
    gamma: Option<f64>,
    #[serde(alias = "G")]
    g: f64,
    n_th: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFeedback {
    enabled: Option<bool>,
    #[serde(rename = "2kappa_fb")]
    two_kappa_fb: Option<f64>,
    kappa_fb: Option<f64>,
    gain: Option<f64>,
    eta_d: Option<f64>,
    parametric: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawDuration {
    Number(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    delta_i: f64,
    delta_f: f64,
    tau: [RawDuration; 4],
    variant: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSteady {
    delta_p: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    delta_min: f64,
    delta_max: f64,
    points: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAxis {
    param: String,
    min: Option<f64>,
    max: Option<f64>,
    points: Option<usize>,
    spacing: Option<String>,
    values: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    method: String,
    overlay: Option<bool>,
    x: RawAxis,
    y: RawAxis,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPropagation {
    rtol: Option<f64>,
    atol: Option<f64>,
    step_factor: Option<f64>,
    max_steps: Option<u64>,
    heat_model: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHierarchy {
    margin: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    formats: Option<Vec<String>>,
    samples_per_stroke: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    /// Gnuplot `nonuniform matrix` files for sweeps.
    pub matrix: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            matrix: false,
        }
    }
}

impl Formats {
    pub fn parse<S: AsRef<str>>(field: &str, items: &[S]) -> Result<Self, ConfigError> {
        let mut f = Formats {
            csv: false,
            json: false,
            matrix: false,
        };
        for item in items {
            match item.as_ref().trim() {
                "csv" => f.csv = true,
                "json" => f.json = true,
                "matrix" => f.matrix = true,
                other => {
                    return Err(err(
                        field,
                        format!("unknown format `{other}` (expected csv, json or matrix)"),
                    ))
                }
            }
        }
        Ok(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
}

impl Scan {
    pub fn detunings(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.delta_min];
        }
        (0..self.points)
            .map(|i| {
                let t = i as f64 / (self.points - 1) as f64;
                self.delta_min * (1.0 - t) + self.delta_max * t
            })
            .collect()
    }
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: SystemParams,
    pub feedback: FeedbackConfig,
    pub template: Option<ScheduleTemplate>,
    pub schedule: Option<StrokeSchedule>,
    pub steady_delta: Option<f64>,
    pub scan: Scan,
    pub sweep: Option<SweepSpec>,
    pub cycle: CycleOptions,
    pub margin: f64,
    pub out_dir: PathBuf,
    pub formats: Formats,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| err(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| err("config", e.message()))?;
        build(raw)
    }

    /// Detuning for the steady-state report: explicit, else the initial one.
    pub fn steady_detuning(&self) -> Result<f64, ConfigError> {
        self.steady_delta
            .or(self.schedule.map(|s| s.delta_i))
            .ok_or_else(|| err("steady.delta_p", "required when no [schedule] is given"))
    }

    pub fn require_schedule(&self) -> Result<StrokeSchedule, ConfigError> {
        self.schedule
            .ok_or_else(|| err("schedule", "section is required for this command"))
    }

    pub fn require_sweep(&self) -> Result<&SweepSpec, ConfigError> {
        self.sweep
            .as_ref()
            .ok_or_else(|| err("sweep", "section is required for this command"))
    }
}

/// Either the amplitude rate or its doubled linewidth form, exactly one.
fn pick_rate(
    section: &str,
    name: &str,
    full: Option<f64>,
    half: Option<f64>,
) -> Result<Option<f64>, ConfigError> {
    match (full, half) {
        (Some(_), Some(_)) => Err(err(
            format!("{section}.{name}"),
            format!("give either `2{name}` or `{name}`, not both"),
        )),
        (Some(v), None) => Ok(Some(0.5 * v)),
        (None, v) => Ok(v),
    }
}

fn build(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let s = &raw.system;
    let kappa_c = pick_rate("system", "kappa_c", s.two_kappa_c, s.kappa_c)?
        .ok_or_else(|| err("system.kappa_c", "missing (give `kappa_c` or `2kappa_c`)"))?;
    let gamma = pick_rate("system", "gamma", s.two_gamma, s.gamma)?
        .ok_or_else(|| err("system.gamma", "missing (give `gamma` or `2gamma`)"))?;
    let params = match (s.kappa_1, s.kappa_2) {
        (None, None) => SystemParams::new(kappa_c, gamma, s.g, s.n_th),
        (Some(k1), None) => {
            SystemParams::with_mirrors(kappa_c, k1, kappa_c - k1, gamma, s.g, s.n_th)
        }
        (None, Some(k2)) => {
            SystemParams::with_mirrors(kappa_c, kappa_c - k2, k2, gamma, s.g, s.n_th)
        }
        (Some(k1), Some(k2)) => SystemParams::with_mirrors(kappa_c, k1, k2, gamma, s.g, s.n_th),
    }
    .map_err(|e| err("system", e))?;

    let feedback = build_feedback(&params, raw.feedback.unwrap_or_default())?;
    let mut warnings = params.warnings();
    warnings.extend(feedback.warnings(&params));

    let template = raw.schedule.map(build_template).transpose()?;
    let schedule = template
        .map(|t| {
            t.resolve(&params, &feedback)
                .map_err(|e| err("schedule", e))
        })
        .transpose()?;

    let steady_delta = raw.steady.map(|s| s.delta_p);
    if let Some(d) = steady_delta {
        if !(d.is_finite() && d < 0.0) {
            return Err(err(
                "steady.delta_p",
                format!("must be red detuned (< 0), got {d}"),
            ));
        }
    }

    let scan = match raw.polariton {
        Some(r) => {
            if !(r.delta_min.is_finite() && r.delta_max.is_finite() && r.delta_min < r.delta_max) {
                return Err(err("polariton", "need finite delta_min < delta_max"));
            }
            if r.points == 0 {
                return Err(err("polariton.points", "must be positive"));
            }
            Scan {
                delta_min: r.delta_min,
                delta_max: r.delta_max,
                points: r.points,
            }
        }
        None => Scan {
            delta_min: -3.5,
            delta_max: -0.01,
            points: 350,
        },
    };

    let prop = raw.propagation.unwrap_or_default();
    let defaults = PropagationOptions::default();
    let propagation = PropagationOptions {
        rtol: prop.rtol.unwrap_or(defaults.rtol),
        atol: prop.atol.unwrap_or(defaults.atol),
        step_factor: prop.step_factor.unwrap_or(defaults.step_factor),
        max_steps: prop.max_steps.map_or(defaults.max_steps, |n| n as _),
        heat_model: match prop.heat_model.as_deref() {
            None | Some("dissipator") => HeatModel::Dissipator,
            Some("transcribed") => HeatModel::Transcribed,
            Some(other) => {
                return Err(err(
                    "propagation.heat_model",
                    format!("unknown model `{other}` (dissipator or transcribed)"),
                ))
            }
        },
    };
    for (name, v) in [
        ("propagation.rtol", propagation.rtol),
        ("propagation.atol", propagation.atol),
        ("propagation.step_factor", propagation.step_factor),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(err(name, format!("must be positive, got {v}")));
        }
    }

    let out = raw.output.unwrap_or_default();
    let cycle = CycleOptions {
        samples_per_stroke: out
            .samples_per_stroke
            .unwrap_or(CycleOptions::default().samples_per_stroke),
        propagation,
    };
    let formats = match &out.formats {
        Some(list) => Formats::parse("output.formats", list)?,
        None => Formats::default(),
    };

    let margin = raw
        .hierarchy
        .and_then(|h| h.margin)
        .unwrap_or(DEFAULT_MARGIN);
    if !(margin.is_finite() && margin > 0.0) {
        return Err(err(
            "hierarchy.margin",
            format!("must be positive, got {margin}"),
        ));
    }

    let sweep = match raw.sweep {
        Some(r) => {
            let template =
                template.ok_or_else(|| err("schedule", "section is required by [sweep]"))?;
            let method = match r.method.as_str() {
                "estimate" => Method::NodeEstimate,
                "full" => Method::FullDynamics,
                other => {
                    return Err(err(
                        "sweep.method",
                        format!("unknown method `{other}` (estimate or full)"),
                    ))
                }
            };
            let spec = SweepSpec {
                axes: [build_axis("sweep.x", r.x)?, build_axis("sweep.y", r.y)?],
                params,
                feedback,
                template,
                method,
                cycle_options: CycleOptions {
                    samples_per_stroke: 0,
                    propagation,
                },
                overlay: r.overlay.unwrap_or(true),
            };
            spec.validate().map_err(|e| err("sweep", e))?;
            Some(spec)
        }
        None => None,
    };

    Ok(RunConfig {
        params,
        feedback,
        template,
        schedule,
        steady_delta,
        scan,
        sweep,
        cycle,
        margin,
        out_dir: out.dir.unwrap_or_else(|| PathBuf::from("out")),
        formats,
        warnings,
    })
}

fn build_feedback(params: &SystemParams, raw: RawFeedback) -> Result<FeedbackConfig, ConfigError> {
    let parametric = raw.parametric.unwrap_or(true);
    let eta_d = raw
        .eta_d
        .unwrap_or(otto_core::model::DEFAULT_DETECTION_EFFICIENCY);
    if !(eta_d.is_finite() && eta_d > 0.0 && eta_d <= 1.0) {
        return Err(err(
            "feedback.eta_d",
            format!("detection efficiency must lie in (0, 1], got {eta_d}"),
        ));
    }
    let kappa_fb = pick_rate("feedback", "kappa_fb", raw.two_kappa_fb, raw.kappa_fb)?;
    let base = if !raw.enabled.unwrap_or(true) {
        if kappa_fb.is_some() || raw.gain.is_some() {
            return Err(err(
                "feedback.enabled",
                "a disabled loop takes no `gain` or `kappa_fb`",
            ));
        }
        let mut f = FeedbackConfig::off(params);
        f.eta_d = eta_d;
        f
    } else {
        match (kappa_fb, raw.gain) {
            (Some(_), Some(_)) => {
                return Err(err(
                    "feedback",
                    "give exactly one of `gain` and `kappa_fb` (or `2kappa_fb`)",
                ))
            }
            (None, None) => {
                return Err(err(
                    "feedback",
                    "one of `gain`, `kappa_fb` or `2kappa_fb` is required",
                ))
            }
            (Some(k), None) => FeedbackConfig::from_kappa_fb(params, k, eta_d)
                .map_err(|e| err("feedback.kappa_fb", e))?,
            (None, Some(g)) => {
                FeedbackConfig::from_gain(params, g, eta_d).map_err(|e| err("feedback.gain", e))?
            }
        }
    };
    Ok(if parametric {
        base
    } else {
        base.without_parametric()
    })
}

fn build_template(raw: RawSchedule) -> Result<ScheduleTemplate, ConfigError> {
    let variant = match raw.variant.as_deref() {
        None | Some("lower") => Variant::LowerPolariton,
        Some("upper") => Variant::UpperPolariton,
        Some(other) => {
            return Err(err(
                "schedule.variant",
                format!("unknown variant `{other}` (lower or upper)"),
            ))
        }
    };
    let mut tau = [Duration::Absolute(0.0); 4];
    for (j, d) in raw.tau.into_iter().enumerate() {
        let field = format!("schedule.tau[{}]", j + 1);
        tau[j] = match d {
            RawDuration::Number(x) => Duration::Absolute(x),
            RawDuration::Text(s) => parse_duration(&s).map_err(|m| err(&field, m))?,
        };
        let value = match tau[j] {
            Duration::Absolute(x)
            | Duration::PerKappaFb(x)
            | Duration::PerGamma(x)
            | Duration::PerCoupling(x)
            | Duration::PerKappaC(x) => x,
        };
        if !(value.is_finite() && value > 0.0) {
            return Err(err(
                field,
                format!("stroke duration must be positive, got {value}"),
            ));
        }
    }
    Ok(ScheduleTemplate {
        delta_i: raw.delta_i,
        delta_f: raw.delta_f,
        tau,
        variant,
    })
}

/// `"35"`, `"20/gamma"`, `"3/kappa_fb"`, `"10/g"` or `"5/kappa_c"`. The
/// rates are amplitude rates, so `"20/gamma"` with `2gamma = 1e-4` is `4e5`.
pub fn parse_duration(text: &str) -> Result<Duration, String> {
    let number = |s: &str| -> Result<f64, String> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("`{}` is not a number", s.trim()))
    };
    let Some((num, rate)) = text.split_once('/') else {
        return number(text).map(Duration::Absolute);
    };
    let x = number(num)?;
    match rate.trim() {
        "gamma" => Ok(Duration::PerGamma(x)),
        "kappa_fb" => Ok(Duration::PerKappaFb(x)),
        "kappa_c" => Ok(Duration::PerKappaC(x)),
        "g" | "G" => Ok(Duration::PerCoupling(x)),
        other => Err(format!(
            "unknown rate `{other}` in `{text}` (gamma, kappa_fb, kappa_c or g)"
        )),
    }
}

pub fn parse_param(text: &str) -> Option<SweepParam> {
    Some(match text {
        "delta_f" => SweepParam::DeltaF,
        "delta_i" => SweepParam::DeltaI,
        "g" | "G" => SweepParam::Coupling,
        "kappa_fb" => SweepParam::KappaFb,
        "tau1" => SweepParam::Tau1,
        "tau2" => SweepParam::Tau2,
        "n_th" => SweepParam::NTh,
        _ => return None,
    })
}

fn build_axis(field: &str, raw: RawAxis) -> Result<Axis, ConfigError> {
    let param = parse_param(&raw.param).ok_or_else(|| {
        err(
            format!("{field}.param"),
            format!(
                "unknown parameter `{}` (delta_f, delta_i, g, kappa_fb, tau1, tau2, n_th)",
                raw.param
            ),
        )
    })?;
    if let Some(values) = raw.values {
        if raw.min.is_some() || raw.max.is_some() || raw.points.is_some() {
            return Err(err(field, "give either `values` or `min`/`max`/`points`"));
        }
        return Axis::explicit(param, values).map_err(|e| err(field, e));
    }
    let (Some(min), Some(max), Some(points)) = (raw.min, raw.max, raw.points) else {
        return Err(err(field, "needs `min`, `max` and `points`, or `values`"));
    };
    match raw.spacing.as_deref() {
        None | Some("linear") => Axis::linear(param, min, max, points),
        Some("log") => Axis::log(param, min, max, points),
        Some(other) => {
            return Err(err(
                format!("{field}.spacing"),
                format!("unknown spacing `{other}` (linear or log)"),
            ))
        }
    }
    .map_err(|e| err(field, e))
}
