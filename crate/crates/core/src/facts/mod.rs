//! Series VSC devices: SSSC (one converter) and IPFC (two or more converters
//! sharing a DC link and a sending bus).
//!
//! A converter leg injects a series voltage V_SE = V_m - V_i between the
//! sending bus i and an auxiliary bus m; the leg current I_SE flows from i
//! toward m. Every device contributes one real-power balance equation and
//! `2 * legs - 1` control targets.

mod config;
pub(crate) mod embed;
mod limits;
mod outputs;

pub use config::{parse_complex, parse_devices};
pub use limits::{enforce_limits, Method, Outcome};
pub use outputs::{device_outputs, DeviceOutputs, LegOutputs, TargetOutput};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::EPS_ZERO;

/// Coupling transformer impedance used when a record does not give one.
pub const DEFAULT_COUPLING: Complex64 = Complex64::new(0.01, 0.01);
/// Initial current guess used when a record does not give one.
pub const DEFAULT_INIT_CURRENT: Complex64 = Complex64::new(0.1, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ControlMode {
    /// P of the line at the sending end, Re[V_i I*].
    ActiveFlow(f64),
    /// Q of the line at the sending end, Im[V_i I*].
    ReactiveFlow(f64),
    /// Reactive power injected by the converter, Im[V_SE I*].
    InjectedQ(f64),
    /// Voltage magnitude of `bus` (external id; the sending bus when `None`).
    BusVoltage { bus: Option<usize>, magnitude: f64 },
    /// Magnitude of the injected voltage, taken as Im[V_SE |I| / I].
    InjectedV(f64),
    /// Equivalent series reactance Im[V_SE / I].
    EquivReactance(f64),
}

impl ControlMode {
    /// Identifier used in device files.
    pub fn id(&self) -> &'static str {
        match self {
            ControlMode::ActiveFlow(_) => "p_flow",
            ControlMode::ReactiveFlow(_) => "q_flow",
            ControlMode::InjectedQ(_) => "q_inj",
            ControlMode::BusVoltage { .. } => "v_bus",
            ControlMode::InjectedV(_) => "v_se",
            ControlMode::EquivReactance(_) => "x_eq",
        }
    }

    pub fn setpoint(&self) -> f64 {
        match *self {
            ControlMode::ActiveFlow(v)
            | ControlMode::ReactiveFlow(v)
            | ControlMode::InjectedQ(v)
            | ControlMode::InjectedV(v)
            | ControlMode::EquivReactance(v) => v,
            ControlMode::BusVoltage { magnitude, .. } => magnitude,
        }
    }

    /// Modes whose embedding needs the reciprocal of the leg current.
    pub fn needs_reciprocal(&self) -> bool {
        matches!(self, ControlMode::InjectedV(_) | ControlMode::EquivReactance(_))
    }

    fn from_id(id: &str, value: f64, bus: Option<usize>) -> Option<Self> {
        Some(match id {
            "p_flow" => ControlMode::ActiveFlow(value),
            "q_flow" => ControlMode::ReactiveFlow(value),
            "q_inj" => ControlMode::InjectedQ(value),
            "v_bus" => ControlMode::BusVoltage { bus, magnitude: value },
            "v_se" => ControlMode::InjectedV(value),
            "x_eq" => ControlMode::EquivReactance(value),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsscDevice {
    pub from: usize,
    pub to: usize,
    pub z_se: Complex64,
    pub mode: ControlMode,
    pub v_se_max: Option<f64>,
    /// Leg current used as the series constant D and as the NR start.
    pub init_current: Complex64,
}

impl SsscDevice {
    pub fn new(from: usize, to: usize, z_se: Complex64, mode: ControlMode) -> Self {
        Self {
            from,
            to,
            z_se,
            mode,
            v_se_max: None,
            init_current: DEFAULT_INIT_CURRENT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpfcBranch {
    pub to: usize,
    pub z_se: Complex64,
    pub v_se_max: Option<f64>,
    pub init_current: Complex64,
}

impl IpfcBranch {
    pub fn new(to: usize, z_se: Complex64) -> Self {
        Self {
            to,
            z_se,
            v_se_max: None,
            init_current: DEFAULT_INIT_CURRENT,
        }
    }
}

/// A control target on one IPFC branch (index into `IpfcDevice::branches`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IpfcTarget {
    pub branch: usize,
    pub mode: ControlMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpfcDevice {
    pub sending: usize,
    pub branches: Vec<IpfcBranch>,
    pub targets: Vec<IpfcTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SeriesDevice {
    Sssc(SsscDevice),
    Ipfc(IpfcDevice),
}

/// Uniform view of one converter leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegSpec {
    pub to: usize,
    pub z_se: Complex64,
    pub v_se_max: Option<f64>,
    pub init_current: Complex64,
}

impl SeriesDevice {
    pub fn sending_bus(&self) -> usize {
        match self {
            SeriesDevice::Sssc(d) => d.from,
            SeriesDevice::Ipfc(d) => d.sending,
        }
    }

    pub fn legs(&self) -> Vec<LegSpec> {
        match self {
            SeriesDevice::Sssc(d) => vec![LegSpec {
                to: d.to,
                z_se: d.z_se,
                v_se_max: d.v_se_max,
                init_current: d.init_current,
            }],
            SeriesDevice::Ipfc(d) => d
                .branches
                .iter()
                .map(|b| LegSpec {
                    to: b.to,
                    z_se: b.z_se,
                    v_se_max: b.v_se_max,
                    init_current: b.init_current,
                })
                .collect(),
        }
    }

    /// Control targets as (leg, mode) pairs.
    pub fn targets(&self) -> Vec<(usize, ControlMode)> {
        match self {
            SeriesDevice::Sssc(d) => vec![(0, d.mode)],
            SeriesDevice::Ipfc(d) => d.targets.iter().map(|t| (t.branch, t.mode)).collect(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SeriesDevice::Sssc(_) => "sssc",
            SeriesDevice::Ipfc(_) => "ipfc",
        }
    }

    /// Short label such as `49-50` or `49-50,49-51`.
    pub fn label(&self) -> String {
        let i = self.sending_bus();
        self.legs()
            .iter()
            .map(|l| format!("{i}-{}", l.to))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Replaces the targets of `leg` so that the first one becomes an
    /// injected-voltage target at `v`; used by limit relaxation.
    pub(crate) fn relax_leg(&mut self, leg: usize, v: f64) -> Result<()> {
        match self {
            SeriesDevice::Sssc(d) => {
                d.mode = ControlMode::InjectedV(v);
                Ok(())
            }
            SeriesDevice::Ipfc(d) => {
                let t = d
                    .targets
                    .iter_mut()
                    .find(|t| t.branch == leg)
                    .ok_or_else(|| Error::InvalidDevice(format!("branch {leg} has no target to relax")))?;
                t.mode = ControlMode::InjectedV(v);
                Ok(())
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let legs = self.legs();
        let targets = self.targets();
        if let SeriesDevice::Ipfc(_) = self {
            if legs.len() < 2 {
                return Err(Error::InvalidDevice(
                    "an IPFC needs at least two series branches".into(),
                ));
            }
        }
        if targets.len() != 2 * legs.len() - 1 {
            return Err(Error::InvalidDevice(format!(
                "{} {} needs {} control targets, got {}",
                self.kind(),
                self.label(),
                2 * legs.len() - 1,
                targets.len()
            )));
        }
        for (k, leg) in legs.iter().enumerate() {
            if leg.to == self.sending_bus() {
                return Err(Error::InvalidDevice(format!("branch {k} loops back to its sending bus")));
            }
            if legs[..k].iter().any(|l| l.to == leg.to) {
                return Err(Error::InvalidDevice(format!(
                    "branch {}-{} listed twice",
                    self.sending_bus(),
                    leg.to
                )));
            }
            if let Some(v) = leg.v_se_max {
                if !(v >= 0.0) {
                    return Err(Error::InvalidDevice("v_se_max must be non-negative".into()));
                }
            }
        }
        for (k, &(leg, mode)) in targets.iter().enumerate() {
            if leg >= legs.len() {
                return Err(Error::InvalidDevice(format!("target refers to missing branch {leg}")));
            }
            if !mode.setpoint().is_finite() {
                return Err(Error::InvalidDevice("setpoint must be finite".into()));
            }
            if let ControlMode::BusVoltage { magnitude, .. } = mode {
                if magnitude <= 0.0 {
                    return Err(Error::InvalidDevice("voltage setpoint must be positive".into()));
                }
            }
            if mode.needs_reciprocal() && legs[leg].init_current.norm() <= EPS_ZERO {
                return Err(Error::InvalidDevice(format!(
                    "mode {} on branch {}-{} needs a nonzero initial current",
                    mode.id(),
                    self.sending_bus(),
                    legs[leg].to
                )));
            }
            let duplicate = |&(l, m): &(usize, ControlMode)| match (m, mode) {
                (ControlMode::BusVoltage { bus: a, .. }, ControlMode::BusVoltage { bus: b, .. }) => {
                    a.unwrap_or(self.sending_bus()) == b.unwrap_or(self.sending_bus())
                }
                _ => l == leg && std::mem::discriminant(&m) == std::mem::discriminant(&mode),
            };
            if targets[..k].iter().any(duplicate) {
                return Err(Error::InvalidDevice(format!(
                    "target {} on branch {leg} is given twice",
                    mode.id()
                )));
            }
        }
        if legs.len() > 1 && targets.iter().all(|&(l, _)| l == targets[0].0) {
            return Err(Error::InvalidDevice(
                "all IPFC targets sit on one branch; the other branches are left uncontrolled".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ipfc(targets: Vec<IpfcTarget>) -> SeriesDevice {
        SeriesDevice::Ipfc(IpfcDevice {
            sending: 49,
            branches: vec![
                IpfcBranch::new(50, DEFAULT_COUPLING),
                IpfcBranch::new(51, DEFAULT_COUPLING),
            ],
            targets,
        })
    }

    #[test]
    fn target_counts() {
        let ok = ipfc(vec![
            IpfcTarget { branch: 0, mode: ControlMode::ActiveFlow(0.75) },
            IpfcTarget { branch: 1, mode: ControlMode::ActiveFlow(0.75) },
            IpfcTarget { branch: 1, mode: ControlMode::ReactiveFlow(0.03) },
        ]);
        ok.validate().unwrap();
        let short = ipfc(vec![IpfcTarget { branch: 0, mode: ControlMode::ActiveFlow(0.75) }]);
        assert!(short.validate().is_err());
    }

    #[test]
    fn single_branch_ipfc_is_rejected() {
        let dev = SeriesDevice::Ipfc(IpfcDevice {
            sending: 49,
            branches: vec![IpfcBranch::new(50, DEFAULT_COUPLING)],
            targets: vec![IpfcTarget { branch: 0, mode: ControlMode::ActiveFlow(0.75) }],
        });
        assert!(matches!(dev.validate(), Err(Error::InvalidDevice(_))));
    }

    #[test]
    fn all_targets_on_one_branch_is_rejected() {
        let dev = ipfc(vec![
            IpfcTarget { branch: 0, mode: ControlMode::ActiveFlow(0.75) },
            IpfcTarget { branch: 0, mode: ControlMode::ReactiveFlow(0.0) },
            IpfcTarget { branch: 0, mode: ControlMode::InjectedQ(0.1) },
        ]);
        assert!(dev.validate().is_err());
    }

    #[test]
    fn zero_current_guess_with_reciprocal_mode_is_rejected() {
        for mode in [ControlMode::InjectedV(0.2), ControlMode::EquivReactance(-0.2)] {
            let mut d = SsscDevice::new(49, 50, DEFAULT_COUPLING, mode);
            d.init_current = Complex64::new(0.0, 0.0);
            assert!(SeriesDevice::Sssc(d).validate().is_err());
        }
        let mut d = SsscDevice::new(49, 50, DEFAULT_COUPLING, ControlMode::ReactiveFlow(0.0));
        d.init_current = Complex64::new(0.0, 0.0);
        SeriesDevice::Sssc(d).validate().unwrap();
    }

    #[test]
    fn mode_ids_round_trip() {
        for mode in [
            ControlMode::ActiveFlow(1.0),
            ControlMode::ReactiveFlow(1.0),
            ControlMode::InjectedQ(1.0),
            ControlMode::BusVoltage { bus: None, magnitude: 1.0 },
            ControlMode::InjectedV(1.0),
            ControlMode::EquivReactance(1.0),
        ] {
            assert_eq!(ControlMode::from_id(mode.id(), 1.0, None), Some(mode));
        }
    }
}
