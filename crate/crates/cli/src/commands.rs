use serde_json::{json, Map, Value};

use otto_core::lyapunov::{boundary_detuning, lyapunov_residual};
use otto_core::polariton::numeric_frequencies;
use otto_core::sweep::{CellOutcome, SweepSpec};
use otto_core::thermo::{
    check_hierarchy_with, estimate_cycle, internal_energy, run_cycle_with, CycleLedger, Method,
    StrokeLedger,
};
use otto_core::{
    build_drift, build_noise, classify_stability, polariton_basis, polariton_frequencies,
    run_sweep, steady_state, to_polariton, CellStatus, FeedbackConfig, HierarchyCheck,
    StabilityReport, StrokeSchedule, SystemParams, Variant,
};

use crate::config::{Formats, RunConfig};
use crate::output::{matrix, num, opt, Writer, SCHEMA_VERSION};
use crate::CliError;

fn runtime(e: otto_core::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn header(command: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("schema_version".into(), json!(SCHEMA_VERSION));
    m.insert("command".into(), json!(command));
    m
}

fn params_json(p: &SystemParams) -> Value {
    json!({
        "omega_m": p.omega_m,
        "kappa_c": p.kappa_c,
        "kappa_1": p.kappa_1,
        "kappa_2": p.kappa_2,
        "gamma": p.gamma,
        "g": p.g_coupling,
        "n_th": p.n_th,
    })
}

fn feedback_json(f: &FeedbackConfig) -> Value {
    json!({
        "gain": f.gain,
        "eta_d": f.eta_d,
        "kappa_fb": f.kappa_fb,
        "n_opt_fb": f.n_opt_fb,
        "parametric": f.parametric,
    })
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::LowerPolariton => "lower",
        Variant::UpperPolariton => "upper",
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::FullDynamics => "full",
        Method::NodeEstimate => "estimate",
    }
}

fn schedule_json(s: &StrokeSchedule) -> Value {
    json!({
        "delta_i": s.delta_i,
        "delta_f": s.delta_f,
        "tau": s.tau,
        "period": s.period(),
        "variant": variant_name(s.variant),
    })
}

fn stability_json(r: &StabilityReport) -> Value {
    json!({
        "hamiltonian_stable": r.hamiltonian_stable,
        "dynamically_stable": r.dynamically_stable,
        "max_real_eigenvalue": r.max_real_eigenvalue,
        "boundary_detuning": r.boundary_detuning,
    })
}

fn stability_at(cfg: &RunConfig, delta: f64) -> StabilityReport {
    classify_stability(
        &build_drift(&cfg.params, &cfg.feedback, delta),
        &cfg.params,
        &cfg.feedback,
        delta,
    )
}

fn hierarchy_json(h: &HierarchyCheck) -> Value {
    let ratios: Map<String, Value> = h
        .margins
        .iter()
        .map(|(k, v)| ((*k).to_string(), json!(v)))
        .collect();
    json!({
        "satisfied": h.satisfied,
        "margin": h.margin,
        "occupancy_ordered": h.occupancy_ordered,
        "ratios": ratios,
    })
}

fn stroke_json(j: usize, s: &StrokeLedger) -> Value {
    json!({
        "stroke": j + 1,
        "kind": if j % 2 == 0 { "adiabat" } else { "isochore" },
        "delta_u": s.delta_u,
        "heat": s.heat,
        "work": s.work,
        "first_law_defect": s.first_law_defect(),
    })
}

fn ledger_json(l: &CycleLedger) -> Value {
    json!({
        "method": method_name(l.method),
        "variant": variant_name(l.variant),
        "strokes": l.strokes.iter().enumerate().map(|(j, s)| stroke_json(j, s)).collect::<Vec<_>>(),
        "total_work": l.total_work,
        "extracted_work": l.extracted_work(),
        "absorbed_heat": l.absorbed_heat,
        "absorbed_stroke": l.absorbed_stroke + 1,
        "rejected_stroke": l.rejected_stroke + 1,
        "efficiency": l.efficiency,
        "functional": l.functional,
        "energy_change": l.energy_change(),
        "first_law_defect": l.first_law_defect(),
    })
}

fn check_stable(cfg: &RunConfig, delta: f64) -> Result<StabilityReport, CliError> {
    let r = stability_at(cfg, delta);
    if !r.dynamically_stable {
        return Err(CliError::Runtime(format!(
            "dynamically unstable at delta_p = {delta}: drift eigenvalue with real part {:e}",
            r.max_real_eigenvalue
        )));
    }
    Ok(r)
}

pub fn steady(cfg: &RunConfig, out: &mut Writer, formats: Formats) -> Result<Value, CliError> {
    let delta = cfg.steady_detuning()?;
    let report = check_stable(cfg, delta)?;
    let drift = build_drift(&cfg.params, &cfg.feedback, delta);
    let noise = build_noise(&cfg.params, &cfg.feedback);
    let c = steady_state(&drift, &noise).map_err(runtime)?;
    let energy = internal_energy(&c, &cfg.params, &cfg.feedback, delta).map_err(runtime)?;
    let polariton = polariton_basis(&cfg.params, &cfg.feedback, delta)
        .ok()
        .map(|b| {
            let p = to_polariton(&c, &b);
            json!({
                "omega_upper": b.omega_a,
                "omega_lower": b.omega_b,
                "n_upper": p.n_upper,
                "n_lower": p.n_lower,
            })
        });

    if formats.csv {
        let rows = (0..4).flat_map(|i| {
            let c = &c;
            (0..4).map(move |j| {
                let z = c.entries[(i, j)];
                vec![i.to_string(), j.to_string(), num(z.re), num(z.im)]
            })
        });
        out.csv("steady_matrix.csv", &["row", "col", "re", "im"], rows)?;
    }
    let mut m = header("steady");
    m.insert("delta_p".into(), json!(delta));
    m.insert("params".into(), params_json(&cfg.params));
    m.insert("feedback".into(), feedback_json(&cfg.feedback));
    m.insert("n_photon".into(), json!(c.n_photon()));
    m.insert("n_phonon".into(), json!(c.n_phonon()));
    m.insert("internal_energy".into(), json!(energy));
    m.insert("polariton".into(), polariton.unwrap_or(Value::Null));
    m.insert("stability".into(), stability_json(&report));
    m.insert(
        "lyapunov_residual".into(),
        json!(lyapunov_residual(&drift, &noise, &c)),
    );
    m.insert("warnings".into(), json!(cfg.warnings));
    let v = Value::Object(m);
    if formats.json {
        out.json("steady.json", &v)?;
    }
    Ok(v)
}

pub fn polariton(cfg: &RunConfig, out: &mut Writer, formats: Formats) -> Result<Value, CliError> {
    let (p, f) = (&cfg.params, &cfg.feedback);
    let noise = build_noise(p, f);
    let mut rows = Vec::with_capacity(cfg.scan.points);
    for d in cfg.scan.detunings() {
        let closed = polariton_frequencies(p, f, d).ok();
        let numeric = numeric_frequencies(p, f, d);
        let report = stability_at(cfg, d);
        let populations = (report.dynamically_stable && report.hamiltonian_stable)
            .then(|| {
                let c = steady_state(&build_drift(p, f, d), &noise).ok()?;
                let b = polariton_basis(p, f, d).ok()?;
                let q = to_polariton(&c, &b);
                Some([q.n_upper, q.n_lower, c.n_photon(), c.n_phonon()])
            })
            .flatten();
        let pop = |k: usize| opt(populations.map(|x| x[k]));
        rows.push(vec![
            num(d),
            opt(closed.map(|x| x.0)),
            opt(closed.map(|x| x.1)),
            num(numeric[0].re),
            num(numeric[0].im),
            num(numeric[1].re),
            num(numeric[1].im),
            num(d.abs()),
            num(p.omega_m),
            report.hamiltonian_stable.to_string(),
            report.dynamically_stable.to_string(),
            pop(0),
            pop(1),
            pop(2),
            pop(3),
        ]);
    }
    if formats.csv {
        out.csv(
            "polariton.csv",
            &[
                "delta_p",
                "omega_upper",
                "omega_lower",
                "numeric_upper_re",
                "numeric_upper_im",
                "numeric_lower_re",
                "numeric_lower_im",
                "omega_cavity",
                "omega_mechanics",
                "hamiltonian_stable",
                "dynamically_stable",
                "n_upper",
                "n_lower",
                "n_photon",
                "n_phonon",
            ],
            rows,
        )?;
    }
    let nodes = cfg.schedule.map(|s| {
        let node = |d: f64| match polariton_frequencies(p, f, d) {
            Ok((a, b)) => json!({"delta_p": d, "omega_upper": a, "omega_lower": b}),
            Err(_) => json!({"delta_p": d, "omega_upper": null, "omega_lower": null}),
        };
        json!([node(s.delta_i), node(s.delta_f)])
    });
    let mut m = header("polariton");
    m.insert("params".into(), params_json(p));
    m.insert("feedback".into(), feedback_json(f));
    m.insert("boundary_detuning".into(), json!(boundary_detuning(p, f)));
    m.insert("points".into(), json!(cfg.scan.points));
    m.insert(
        "range".into(),
        json!([cfg.scan.delta_min, cfg.scan.delta_max]),
    );
    m.insert("nodes".into(), nodes.unwrap_or(Value::Null));
    let v = Value::Object(m);
    if formats.json {
        out.json("polariton.json", &v)?;
    }
    Ok(v)
}

pub fn cycle(cfg: &RunConfig, out: &mut Writer, formats: Formats) -> Result<Value, CliError> {
    let s = cfg.require_schedule()?;
    for d in [s.delta_i, s.delta_f] {
        check_stable(cfg, d)?;
    }
    let ledger = run_cycle_with(&cfg.params, &cfg.feedback, &s, &cfg.cycle).map_err(runtime)?;
    let estimate = estimate_cycle(&cfg.params, &cfg.feedback, s.delta_i, s.delta_f, s.variant).ok();
    let hierarchy = check_hierarchy_with(&cfg.params, &cfg.feedback, &s, cfg.margin);

    if formats.csv {
        let rows = ledger.trajectory.iter().map(|x| {
            vec![
                num(x.t),
                num(x.delta_p),
                num(x.n_photon),
                num(x.n_phonon),
                opt(x.n_upper),
                opt(x.n_lower),
                num(x.energy),
                num(x.heat),
                num(x.work),
            ]
        });
        out.csv(
            "trajectory.csv",
            &[
                "t", "delta_p", "n_photon", "n_phonon", "n_upper", "n_lower", "energy", "heat",
                "work",
            ],
            rows,
        )?;
    }
    let mut m = header("cycle");
    m.insert("params".into(), params_json(&cfg.params));
    m.insert("feedback".into(), feedback_json(&cfg.feedback));
    m.insert("schedule".into(), schedule_json(&s));
    m.insert("ledger".into(), ledger_json(&ledger));
    m.insert(
        "estimate".into(),
        estimate.as_ref().map_or(Value::Null, ledger_json),
    );
    m.insert("hierarchy".into(), hierarchy_json(&hierarchy));
    m.insert("warnings".into(), json!(cfg.warnings));
    let v = Value::Object(m);
    if formats.json {
        out.json("ledger.json", &v)?;
    }
    Ok(v)
}

fn outcome_fields(o: Option<CellOutcome>) -> [String; 5] {
    [
        opt(o.and_then(|o| o.efficiency)),
        opt(o.map(|o| o.total_work)),
        opt(o.map(|o| -o.total_work)),
        opt(o.map(|o| o.absorbed_heat)),
        o.map(|o| o.functional.to_string()).unwrap_or_default(),
    ]
}

fn argmax_json(spec: &SweepSpec, cells: &[otto_core::Cell], k: Option<usize>) -> Value {
    let Some(c) = k.map(|k| &cells[k]) else {
        return Value::Null;
    };
    let o = c.outcome.expect("argmax cells carry values");
    json!({
        spec.axes[0].param.name(): c.x,
        spec.axes[1].param.name(): c.y,
        "efficiency": o.efficiency,
        "total_work": o.total_work,
        "extracted_work": -o.total_work,
        "absorbed_heat": o.absorbed_heat,
    })
}

pub fn sweep(cfg: &RunConfig, out: &mut Writer, formats: Formats) -> Result<Value, CliError> {
    let spec = cfg.require_sweep()?;
    let result = run_sweep(spec).map_err(runtime)?;
    let (xn, yn) = (spec.axes[0].param.name(), spec.axes[1].param.name());

    if formats.csv {
        let rows = result.cells.iter().map(|c| {
            let mut row = vec![num(c.x), num(c.y), c.status.label().to_string()];
            row.extend(outcome_fields(c.outcome));
            row.push(
                c.stability
                    .map(|r| r.hamiltonian_stable.to_string())
                    .unwrap_or_default(),
            );
            row.push(
                c.stability
                    .map(|r| r.dynamically_stable.to_string())
                    .unwrap_or_default(),
            );
            row.push(opt(c.estimate.and_then(|o| o.efficiency)));
            row.push(opt(c.estimate.map(|o| o.total_work)));
            row.push(match &c.status {
                CellStatus::Failed(msg) => msg.clone(),
                _ => String::new(),
            });
            row
        });
        out.csv(
            "sweep.csv",
            &[
                xn,
                yn,
                "status",
                "efficiency",
                "total_work",
                "extracted_work",
                "absorbed_heat",
                "functional",
                "hamiltonian_stable",
                "dynamically_stable",
                "estimate_efficiency",
                "estimate_total_work",
                "message",
            ],
            rows,
        )?;
    }
    if formats.matrix {
        let xs = &spec.axes[0].values;
        let ys = &spec.axes[1].values;
        let at = |i: usize, j: usize| result.cell(i, j).outcome;
        out.text(
            "sweep_efficiency.dat",
            &matrix(xs, ys, |i, j| at(i, j).and_then(|o| o.efficiency)),
        )?;
        out.text(
            "sweep_work.dat",
            &matrix(xs, ys, |i, j| at(i, j).map(|o| -o.total_work)),
        )?;
        out.text(
            "sweep_heat.dat",
            &matrix(xs, ys, |i, j| at(i, j).map(|o| o.absorbed_heat)),
        )?;
    }

    let count = |label: &str| {
        result
            .cells
            .iter()
            .filter(|c| c.status.label() == label)
            .count()
    };
    let axis_json =
        |k: usize| json!({"param": spec.axes[k].param.name(), "values": spec.axes[k].values});
    let mut m = header("sweep");
    m.insert("method".into(), json!(method_name(spec.method)));
    m.insert("variant".into(), json!(variant_name(spec.template.variant)));
    m.insert("params".into(), params_json(&spec.params));
    m.insert("feedback".into(), feedback_json(&spec.feedback));
    m.insert("axes".into(), json!([axis_json(0), axis_json(1)]));
    m.insert(
        "cells".into(),
        json!({"total": result.cells.len(), "ok": count("ok"), "unstable": count("unstable"), "failed": count("failed")}),
    );
    m.insert(
        "argmax_efficiency".into(),
        argmax_json(spec, &result.cells, result.argmax_efficiency),
    );
    m.insert(
        "argmax_work".into(),
        argmax_json(spec, &result.cells, result.argmax_work),
    );
    let v = Value::Object(m);
    if formats.json {
        out.json("sweep.json", &v)?;
    }
    Ok(v)
}

/// Validation and time-scale report only; nothing is integrated.
pub fn check(cfg: &RunConfig, out: &mut Writer, formats: Formats) -> Result<Value, CliError> {
    let mut m = header("check");
    m.insert("valid".into(), json!(true));
    m.insert("params".into(), params_json(&cfg.params));
    m.insert("feedback".into(), feedback_json(&cfg.feedback));
    m.insert(
        "boundary_detuning".into(),
        json!(boundary_detuning(&cfg.params, &cfg.feedback)),
    );
    if let Some(s) = cfg.schedule {
        m.insert("schedule".into(), schedule_json(&s));
        m.insert(
            "hierarchy".into(),
            hierarchy_json(&check_hierarchy_with(
                &cfg.params,
                &cfg.feedback,
                &s,
                cfg.margin,
            )),
        );
        m.insert(
            "stability".into(),
            json!({
                "delta_i": stability_json(&stability_at(cfg, s.delta_i)),
                "delta_f": stability_json(&stability_at(cfg, s.delta_f)),
            }),
        );
    }
    if let Some(spec) = &cfg.sweep {
        m.insert(
            "sweep".into(),
            json!({
                "method": method_name(spec.method),
                "axes": [spec.axes[0].param.name(), spec.axes[1].param.name()],
                "cells": spec.axes[0].len() * spec.axes[1].len(),
            }),
        );
    }
    m.insert("warnings".into(), json!(cfg.warnings));
    let v = Value::Object(m);
    if formats.json {
        out.json("check.json", &v)?;
    }
    Ok(v)
}
