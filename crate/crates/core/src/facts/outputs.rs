use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ControlMode;
use crate::series::EPS_ZERO;
use crate::system::PowerSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegOutputs {
    /// External (sending, receiving) bus numbers.
    pub branch: (usize, usize),
    pub v_se: Complex64,
    pub i_se: Complex64,
    /// V_SE I_SE*
    pub s_se: Complex64,
    /// Line flow at the sending end, V_i I_SE*.
    pub s_line: Complex64,
    /// Im[V_SE / I_SE]; infinite when the current vanishes.
    #[serde(with = "crate::serde_float")]
    pub x_eq: f64,
    pub relaxed: bool,
}

/// A control target and the value reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetOutput {
    pub branch: (usize, usize),
    pub mode: String,
    pub setpoint: f64,
    #[serde(with = "crate::serde_float")]
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceOutputs {
    pub kind: String,
    pub label: String,
    pub legs: Vec<LegOutputs>,
    pub targets: Vec<TargetOutput>,
    /// Net real power drawn by all converters; zero for a lossless device.
    pub exchange: f64,
}

/// Converter quantities of device `index` at the state (v, i).
pub fn device_outputs(sys: &PowerSystem, index: usize, v: &[Complex64], i: &[Complex64]) -> DeviceOutputs {
    let d = &sys.devices[index];
    let vi = v[d.sending];
    let sending_id = sys.network.buses[d.sending].id;
    let legs: Vec<LegOutputs> = d
        .legs
        .iter()
        .enumerate()
        .map(|(k, leg)| {
            let cur = i[d.current(k)];
            let v_se = v[leg.aux] - vi;
            let x_eq = if cur.norm() < EPS_ZERO {
                f64::INFINITY
            } else {
                (v_se / cur).im
            };
            LegOutputs {
                branch: (sending_id, sys.network.buses[leg.receiving].id),
                v_se,
                i_se: cur,
                s_se: v_se * cur.conj(),
                s_line: vi * cur.conj(),
                x_eq,
                relaxed: d.relaxed[k],
            }
        })
        .collect();
    let targets = d
        .targets
        .iter()
        .map(|t| {
            let leg = &legs[t.leg];
            let achieved = match t.mode {
                ControlMode::ActiveFlow(_) => leg.s_line.re,
                ControlMode::ReactiveFlow(_) => leg.s_line.im,
                ControlMode::InjectedQ(_) => leg.s_se.im,
                ControlMode::BusVoltage { .. } => v[t.voltage_bus].norm(),
                ControlMode::InjectedV(_) if leg.i_se.norm() < EPS_ZERO => leg.v_se.norm(),
                ControlMode::InjectedV(_) => (leg.v_se * leg.i_se.norm() / leg.i_se).im,
                ControlMode::EquivReactance(_) => leg.x_eq,
            };
            TargetOutput {
                branch: leg.branch,
                mode: t.mode.id().to_string(),
                setpoint: t.mode.setpoint(),
                achieved,
            }
        })
        .collect();
    let exchange = legs.iter().map(|l| l.s_se.re).sum();
    DeviceOutputs {
        kind: d.config.kind().to_string(),
        label: d.config.label(),
        legs,
        targets,
        exchange,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::facts::{SeriesDevice, SsscDevice};
    use crate::netmodel::{Branch, Bus, BusKind, Network};

    fn sys() -> PowerSystem {
        let mut slack = Bus::new(1, BusKind::Slack);
        slack.v_setpoint = Some(1.0);
        let net = Network::new(
            100.0,
            vec![slack, Bus::new(2, BusKind::PQ)],
            vec![Branch {
                from: 0,
                to: 1,
                series_impedance: Complex64::new(0.0, 0.2),
                charging_b: 0.0,
                tap: Complex64::new(1.0, 0.0),
                origin: None,
            }],
        )
        .unwrap();
        let dev = SeriesDevice::Sssc(SsscDevice::new(
            1,
            2,
            Complex64::new(0.0, 0.0),
            ControlMode::ActiveFlow(0.5),
        ));
        PowerSystem::new(&net, &[dev], Default::default()).unwrap()
    }

    #[test]
    fn reactive_divider() {
        // the converter acts as a reactance x when V_SE = j x I_SE
        let s = sys();
        let x = 0.07;
        let cur = Complex64::new(0.4, -0.1);
        let vi = Complex64::new(1.0, 0.0);
        let v = vec![vi, Complex64::new(0.9, -0.1), vi + Complex64::new(0.0, x) * cur];
        let out = device_outputs(&s, 0, &v, &[cur]);
        let leg = &out.legs[0];
        assert!((leg.x_eq - x).abs() < 1e-12);
        assert!(leg.s_se.re.abs() < 1e-12);
        assert!((leg.s_se.im - x * cur.norm_sqr()).abs() < 1e-12);
        assert_eq!(leg.branch, (1, 2));
        let t = &out.targets[0];
        assert_eq!((t.mode.as_str(), t.setpoint), ("p_flow", 0.5));
        assert!((t.achieved - cur.re).abs() < 1e-12);
    }

    #[test]
    fn infinite_reactance_survives_json() {
        let s = sys();
        let v = vec![Complex64::new(1.0, 0.0); 3];
        let out = device_outputs(&s, 0, &v, &[Complex64::new(0.0, 0.0)]);
        let text = serde_json::to_string(&out).unwrap();
        let back: DeviceOutputs = serde_json::from_str(&text).unwrap();
        assert_eq!(back, out);
    }

    #[test]
    fn zero_current_reports_infinite_reactance() {
        let s = sys();
        let v = vec![Complex64::new(1.0, 0.0); 3];
        let out = device_outputs(&s, 0, &v, &[Complex64::new(0.0, 0.0)]);
        assert!(out.legs[0].x_eq.is_infinite());
    }
}
