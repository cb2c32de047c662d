//! Browser bindings for the load-flow engine, run against the bundled IEEE
//! 118-bus case. Every call returns JSON text.

use ffhe::facts::{device_outputs, enforce_limits, parse_devices, Method};
use ffhe::ffhe::{ffhe_solve, EmbeddingConstants};
use ffhe::netmodel::{parse_case, Network};
use ffhe::nr::{nr_solve, warm_start};
use ffhe::study::{study_from_text, StudyMethod};
use ffhe::{Options, PowerSystem, WarmStart};
use serde::Serialize;
use wasm_bindgen::prelude::*;

pub const CASE118: &str = include_str!("../../core/data/case118.m");

fn network() -> Result<Network, String> {
    parse_case(CASE118).map_err(|e| e.to_string())
}

fn device_text(text: &str) -> Option<&str> {
    if text.trim().is_empty() {
        None
    } else {
        Some(text)
    }
}

/// Full study report for the device records in `devices` (may be empty).
pub fn solve_json(devices: &str, method: &str) -> Result<String, String> {
    let method: StudyMethod = method.parse().map_err(|e: ffhe::Error| e.to_string())?;
    let report = study_from_text(
        "case118",
        CASE118,
        device_text(devices).map(|t| ("devices", t)),
        method,
        &Options::default(),
    )
    .map_err(|e| e.to_string())?;
    report.to_json().map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct Trace {
    flat: Vec<f64>,
    warm: Vec<f64>,
    nr: Vec<f64>,
}

/// Largest residual after each series order from flat constants and from
/// `warm_iters` Newton iterations, plus the plain Newton history. No
/// reactive-limit switching, so the three runs solve the same equations.
pub fn trace_json(devices: &str, warm_iters: usize) -> Result<String, String> {
    let net = network()?;
    let devs = match device_text(devices) {
        Some(t) => parse_devices(t).map_err(|e| e.to_string())?,
        None => Vec::new(),
    };
    let sys = PowerSystem::new(&net, &devs, Default::default()).map_err(|e| e.to_string())?;
    let opts = Options::default();
    let finite = |h: Vec<f64>| h.into_iter().map(|x| if x.is_finite() { x } else { f64::MAX }).collect();
    let flat = ffhe_solve(&sys, &EmbeddingConstants::flat(&sys), &opts)
        .map(|s| s.history)
        .unwrap_or_default();
    let consts = warm_start(&sys, warm_iters).map_err(|e| e.to_string())?;
    let warm = ffhe_solve(&sys, &consts, &opts).map(|s| s.history).unwrap_or_default();
    let nr = nr_solve(&sys, &opts).map(|s| s.history).unwrap_or_default();
    serde_json::to_string(&Trace { flat: finite(flat), warm: finite(warm), nr: finite(nr) })
        .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SweepPoint {
    setpoint: f64,
    converged: bool,
    v_se: f64,
    i_se: f64,
    x_eq: Option<f64>,
    v_sending: f64,
    terms: usize,
}

/// Solves `template` with `{}` replaced by each of `steps` evenly spaced
/// setpoints from `start` to `stop`, reporting the first converter leg.
pub fn sweep_json(template: &str, start: f64, stop: f64, steps: usize) -> Result<String, String> {
    if !template.contains("{}") {
        return Err("the device record needs a {} where the setpoint goes".into());
    }
    if steps < 2 {
        return Err("a sweep needs at least two points".into());
    }
    let net = network()?;
    let opts = Options { warm_start: WarmStart::Nr(3), ..Options::default() };
    let mut points = Vec::with_capacity(steps);
    for k in 0..steps {
        let setpoint = start + (stop - start) * k as f64 / (steps - 1) as f64;
        let devs = parse_devices(&template.replace("{}", &setpoint.to_string())).map_err(|e| e.to_string())?;
        if devs.is_empty() {
            return Err("no device record".into());
        }
        let point = match enforce_limits(&net, &devs, Method::NrWarmFfhe, &opts) {
            Ok(out) => {
                let s = &out.solution;
                let d = device_outputs(&out.system, 0, &s.voltages, &s.currents);
                let leg = &d.legs[0];
                SweepPoint {
                    setpoint,
                    converged: s.converged,
                    v_se: leg.v_se.norm(),
                    i_se: leg.i_se.norm(),
                    x_eq: leg.x_eq.is_finite().then_some(leg.x_eq),
                    v_sending: s.voltages[out.system.devices[0].sending].norm(),
                    terms: s.terms,
                }
            }
            Err(_) => SweepPoint {
                setpoint,
                converged: false,
                v_se: f64::NAN,
                i_se: f64::NAN,
                x_eq: None,
                v_sending: f64::NAN,
                terms: 0,
            },
        };
        points.push(point);
    }
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn solve(devices: &str, method: &str) -> Result<String, JsError> {
    solve_json(devices, method).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = convergenceTrace)]
pub fn convergence_trace(devices: &str, warm_iters: usize) -> Result<String, JsError> {
    trace_json(devices, warm_iters).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep(template: &str, start: f64, stop: f64, steps: usize) -> Result<String, JsError> {
    sweep_json(template, start, stop, steps).map_err(|e| JsError::new(&e))
}
