//! Studies: a case, an optional device file and a method, run end to end
//! into a report that renders as a text table or JSON.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::{device_outputs, enforce_limits, parse_devices, DeviceOutputs, Method, Outcome};
use crate::netmodel::{parse_case, BusKind, Network};
use crate::solution::{Options, Solution};
use crate::system::PowerSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMethod {
    Ffhe,
    Nr,
    NrWarmFfhe,
    /// NR-warm-started FFHE and plain NR on the same system, with metrics.
    Compare,
}

impl StudyMethod {
    pub fn name(self) -> &'static str {
        match self {
            StudyMethod::Ffhe => "ffhe",
            StudyMethod::Nr => "nr",
            StudyMethod::NrWarmFfhe => "nr-warm-ffhe",
            StudyMethod::Compare => "compare",
        }
    }
}

impl FromStr for StudyMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ffhe" => Ok(StudyMethod::Ffhe),
            "nr" => Ok(StudyMethod::Nr),
            "nr-warm-ffhe" => Ok(StudyMethod::NrWarmFfhe),
            "compare" => Ok(StudyMethod::Compare),
            other => Err(Error::InvalidOption(format!(
                "unknown method '{other}' (expected ffhe, nr, nr-warm-ffhe or compare)"
            ))),
        }
    }
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Ffhe => "ffhe",
        Method::Nr => "nr",
        Method::NrWarmFfhe => "nr-warm-ffhe",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRow {
    pub id: usize,
    pub kind: BusKind,
    pub magnitude: f64,
    /// Degrees.
    pub angle: f64,
}

/// Complex power entering a branch at its `from` end. Lines carrying a
/// device are listed under their original endpoints, measured at the
/// sending bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRow {
    pub from: usize,
    pub to: usize,
    pub s: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub method: String,
    pub converged: bool,
    /// Series terms (FFHE) or iterations (NR) in the final pass.
    pub terms: usize,
    #[serde(with = "crate::serde_float")]
    pub max_mismatch: f64,
    /// Solves, counting re-solves after limit switching.
    pub passes: usize,
    /// Seconds over all passes.
    pub wall_time: f64,
    #[serde(with = "crate::serde_float::vec")]
    pub history: Vec<f64>,
    /// Generator buses held at a reactive limit.
    pub pinned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub convergence: ConvergenceRecord,
    pub buses: Vec<BusRow>,
    pub flows: Vec<FlowRow>,
    pub devices: Vec<DeviceOutputs>,
}

/// Percent mismatch reduction and runtime reduction of FFHE against NR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub delta_e: f64,
    pub delta_t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub case: String,
    pub devices: Option<String>,
    pub method: StudyMethod,
    pub runs: Vec<RunReport>,
    pub metrics: Option<Metrics>,
}

impl StudyReport {
    pub fn converged(&self) -> bool {
        self.runs.iter().all(|r| r.convergence.converged)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Text tables; magnitudes in p.u., angles in degrees, four decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "case {}", self.case);
        if let Some(d) = &self.devices {
            let _ = write!(out, ", devices {d}");
        }
        out.push('\n');
        for run in &self.runs {
            write_run(&mut out, run);
        }
        if let Some(m) = self.metrics {
            let _ = writeln!(out, "\nmismatch reduction dE = {:.2}%, runtime reduction dT = {:.2}%", m.delta_e, m.delta_t);
        }
        out
    }
}

fn polar(z: Complex64) -> String {
    format!("{:.4}∠{:.2}°", z.norm(), z.arg().to_degrees())
}

fn rect(z: Complex64) -> String {
    let sign = if z.im < 0.0 { '-' } else { '+' };
    format!("{:.4}{sign}j{:.4}", z.re, z.im.abs())
}

fn write_run(out: &mut String, run: &RunReport) {
    let c = &run.convergence;
    let unit = if c.method == "nr" { "iterations" } else { "terms" };
    let _ = writeln!(
        out,
        "\n[{}] {} after {} {unit}, max mismatch {:.3e}, {} pass(es), {:.4} s",
        c.method,
        if c.converged { "converged" } else { "DID NOT CONVERGE" },
        c.terms,
        c.max_mismatch,
        c.passes,
        c.wall_time
    );
    if !c.pinned.is_empty() {
        let ids: Vec<String> = c.pinned.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(out, "generators at reactive limit: {}", ids.join(" "));
    }
    let _ = writeln!(out, "\n{:>6} {:>5} {:>9} {:>10}", "bus", "kind", "|V|", "angle");
    for b in &run.buses {
        let kind = match b.kind {
            BusKind::Slack => "slack",
            BusKind::PV => "PV",
            BusKind::PQ => "PQ",
            BusKind::Auxiliary => "aux",
        };
        let _ = writeln!(out, "{:>6} {:>5} {:>9.4} {:>10.4}", b.id, kind, b.magnitude, b.angle);
    }
    let _ = writeln!(out, "\n{:>11} {:>9} {:>9}", "branch", "P", "Q");
    for f in &run.flows {
        let _ = writeln!(out, "{:>11} {:>9.4} {:>9.4}", format!("{}-{}", f.from, f.to), f.s.re, f.s.im);
    }
    for d in &run.devices {
        let _ = writeln!(out, "\n{} {}  (converter exchange {:.4})", d.kind, d.label, d.exchange);
        for l in &d.legs {
            let _ = writeln!(
                out,
                "  {}-{}: V_SE {}  I_SE {}  S_line {}  S_SE {}  X_eq {}{}",
                l.branch.0,
                l.branch.1,
                polar(l.v_se),
                polar(l.i_se),
                rect(l.s_line),
                rect(l.s_se),
                if l.x_eq.is_finite() { format!("{:.4}", l.x_eq) } else { "inf".into() },
                if l.relaxed { "  [held at V_SE limit]" } else { "" }
            );
        }
        for t in &d.targets {
            let _ = writeln!(
                out,
                "  {} on {}-{}: setpoint {:.4}, reached {:.4}",
                t.mode, t.branch.0, t.branch.1, t.setpoint, t.achieved
            );
        }
    }
}

/// Flows on every branch of the solved system.
pub fn branch_flows(sys: &PowerSystem, v: &[Complex64], i: &[Complex64]) -> Vec<FlowRow> {
    let net = &sys.network;
    let mut rows = Vec::with_capacity(net.branches.len());
    for br in &net.branches {
        if let Some((from, to)) = br.origin {
            let leg = sys.devices.iter().find_map(|d| {
                let sending = net.buses[d.sending].id;
                d.legs
                    .iter()
                    .position(|l| sending == from && net.buses[l.receiving].id == to)
                    .or_else(|| {
                        d.legs
                            .iter()
                            .position(|l| sending == to && net.buses[l.receiving].id == from)
                    })
                    .map(|k| (d, k))
            });
            if let Some((d, k)) = leg {
                let s = v[d.sending] * i[d.current(k)].conj();
                let sending = net.buses[d.sending].id;
                let receiving = net.buses[d.legs[k].receiving].id;
                rows.push(FlowRow { from: sending, to: receiving, s });
                continue;
            }
        }
        let y = br.series_impedance.inv();
        let ysh = Complex64::new(0.0, br.charging_b / 2.0);
        let (f, t) = (br.from, br.to);
        let i_from = (y + ysh) / br.tap.norm_sqr() * v[f] - y / br.tap.conj() * v[t];
        rows.push(FlowRow {
            from: net.buses[f].id,
            to: net.buses[t].id,
            s: v[f] * i_from.conj(),
        });
    }
    rows
}

fn run_report(method: Method, out: &Outcome) -> RunReport {
    let sys = &out.system;
    let sol: &Solution = &out.solution;
    let (v, i) = (&sol.voltages, &sol.currents);
    RunReport {
        convergence: ConvergenceRecord {
            method: method_name(method).into(),
            converged: sol.converged,
            terms: sol.terms,
            max_mismatch: sol.max_mismatch,
            passes: out.passes,
            wall_time: out.wall_time,
            history: sol.history.clone(),
            pinned: sys.pinned.clone(),
        },
        buses: sys
            .network
            .buses
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let (magnitude, angle) = sol.polar(k);
                BusRow { id: b.id, kind: b.kind, magnitude, angle }
            })
            .collect(),
        flows: branch_flows(sys, v, i),
        devices: (0..sys.devices.len()).map(|d| device_outputs(sys, d, v, i)).collect(),
    }
}

/// Percent reductions of FFHE against NR. Mismatches are floored at 1e-16
/// so the logarithms stay finite; a zero NR runtime gives dT = 0.
pub fn compute_metrics(ffhe: &Solution, nr: &Solution) -> Metrics {
    metrics_from(ffhe.max_mismatch, ffhe.wall_time, nr.max_mismatch, nr.wall_time)
}

fn metrics_from(e_ffhe: f64, t_ffhe: f64, e_nr: f64, t_nr: f64) -> Metrics {
    const FLOOR: f64 = 1e-16;
    let lf = e_ffhe.max(FLOOR).log10();
    let ln = e_nr.max(FLOOR).log10();
    let delta_e = if ln == 0.0 { 0.0 } else { ((lf - ln) / ln).abs() * 100.0 };
    let delta_t = if t_nr > 0.0 { (t_nr - t_ffhe) / t_nr * 100.0 } else { 0.0 };
    Metrics { delta_e, delta_t }
}

/// Runs a study on an already parsed network.
pub fn run_network_study(
    net: &Network,
    device_text: Option<&str>,
    method: StudyMethod,
    opts: &Options,
) -> Result<Vec<(Method, Outcome)>> {
    let devices = match device_text {
        Some(t) => parse_devices(t)?,
        None => Vec::new(),
    };
    let methods: &[Method] = match method {
        StudyMethod::Ffhe => &[Method::Ffhe],
        StudyMethod::Nr => &[Method::Nr],
        StudyMethod::NrWarmFfhe => &[Method::NrWarmFfhe],
        StudyMethod::Compare => &[Method::NrWarmFfhe, Method::Nr],
    };
    methods
        .iter()
        .map(|&m| Ok((m, enforce_limits(net, &devices, m, opts)?)))
        .collect()
}

/// Builds the report from case and device file contents; `case_name` and
/// `device_name` only label it.
pub fn study_from_text(
    case_name: &str,
    case_text: &str,
    device: Option<(&str, &str)>,
    method: StudyMethod,
    opts: &Options,
) -> Result<StudyReport> {
    let net = parse_case(case_text).map_err(|e| in_file(case_name, e))?;
    let outcomes = run_network_study(&net, device.map(|d| d.1), method, opts).map_err(|e| match device {
        Some((name, _)) if matches!(e, Error::Parse { .. } | Error::InvalidDevice(_)) => in_file(name, e),
        _ => e,
    })?;
    let metrics = match outcomes.as_slice() {
        [(_, f), (_, n)] => Some(metrics_from(
            f.solution.max_mismatch,
            f.wall_time,
            n.solution.max_mismatch,
            n.wall_time,
        )),
        _ => None,
    };
    Ok(StudyReport {
        case: case_name.into(),
        devices: device.map(|d| d.0.to_string()),
        method,
        runs: outcomes.iter().map(|(m, o)| run_report(*m, o)).collect(),
        metrics,
    })
}

fn in_file(path: &str, e: Error) -> Error {
    Error::InFile { path: path.into(), source: Box::new(e) }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| in_file(&path.display().to_string(), e.into()))
}

/// Reads the case and optional device file and runs the study.
pub fn run_study(case_path: &Path, device_path: Option<&Path>, method: StudyMethod, opts: &Options) -> Result<StudyReport> {
    let case_text = read(case_path)?;
    let device_text = device_path.map(read).transpose()?;
    let device_name = device_path.map(|p| p.display().to_string());
    study_from_text(
        &case_path.display().to_string(),
        &case_text,
        device_name.as_deref().zip(device_text.as_deref()),
        method,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_arithmetic() {
        let m = metrics_from(1e-10, 0.92, 1e-8, 1.0);
        assert!((m.delta_e - 25.0).abs() < 1e-9);
        assert!((m.delta_t - 8.0).abs() < 1e-9);
        let same = metrics_from(3e-9, 0.5, 3e-9, 0.5);
        assert_eq!((same.delta_e, same.delta_t), (0.0, 0.0));
    }

    #[test]
    fn zero_mismatch_is_floored() {
        let m = metrics_from(0.0, 1.0, 1e-8, 1.0);
        assert!((m.delta_e - 100.0).abs() < 1e-9);
    }

    #[test]
    fn method_names_round_trip() {
        for m in [StudyMethod::Ffhe, StudyMethod::Nr, StudyMethod::NrWarmFfhe, StudyMethod::Compare] {
            assert_eq!(m.name().parse::<StudyMethod>().unwrap(), m);
        }
        assert!("gauss-seidel".parse::<StudyMethod>().is_err());
    }
}
