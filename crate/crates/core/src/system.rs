//! A network with its series devices spliced in, plus the original
//! (non-embedded) equations shared by both solvers.
//!
//! Unknowns and equations use one layout: bus k owns slots 2k and 2k+1
//! (real and imaginary parts of V_k), current c owns slots 2N+2c and 2N+2c+1.
//! A device with legs c0..c0+L owns the 2L rows starting at 2N+2c0: first its
//! real-power balance, then its control targets in order.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::{ControlMode, SeriesDevice};
use crate::netmodel::{
    build_admittance_matrix, insert_series_device, AdmittanceMatrix, BusKind, DeviceTopology,
    InsertOptions, Network,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub aux: usize,
    pub receiving: usize,
    pub z_se: Complex64,
    pub v_se_max: Option<f64>,
    pub init_current: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub leg: usize,
    pub mode: ControlMode,
    /// Internal index of the bus a voltage target acts on.
    pub voltage_bus: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub config: SeriesDevice,
    pub topology: DeviceTopology,
    pub sending: usize,
    pub legs: Vec<Leg>,
    pub targets: Vec<Target>,
    /// Global index of the first leg current.
    pub first_current: usize,
    /// Legs switched to injected-voltage control by limit enforcement.
    pub relaxed: Vec<bool>,
}

impl DeviceModel {
    pub fn current(&self, leg: usize) -> usize {
        self.first_current + leg
    }

    /// First row owned by this device.
    pub fn first_row(&self, n_bus: usize) -> usize {
        2 * n_bus + 2 * self.first_current
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSystem {
    pub network: Network,
    pub ybus: AdmittanceMatrix,
    pub devices: Vec<DeviceModel>,
    /// Buses present before any auxiliary bus was added.
    pub base_buses: usize,
    pub n_currents: usize,
    /// Currents entering each bus's balance as (current, sign).
    pub bus_currents: Vec<Vec<(usize, f64)>>,
    /// External ids of generator buses held at a reactive limit.
    pub pinned: Vec<usize>,
}

impl PowerSystem {
    pub fn new(net: &Network, devices: &[SeriesDevice], opts: InsertOptions) -> Result<Self> {
        let base_buses = net.len();
        let mut network = net.clone();
        let mut models = Vec::with_capacity(devices.len());
        let mut n_currents = 0;
        for (id, dev) in devices.iter().enumerate() {
            dev.validate()?;
            let (next, topology) = insert_series_device(&network, dev, id, opts)?;
            network = next;
            let legs: Vec<Leg> = dev
                .legs()
                .iter()
                .zip(&topology.legs)
                .map(|(leg, t)| Leg {
                    aux: t.aux,
                    receiving: t.receiving,
                    z_se: leg.z_se,
                    v_se_max: leg.v_se_max,
                    init_current: leg.init_current,
                })
                .collect();
            let sending = topology.sending;
            let targets = dev
                .targets()
                .into_iter()
                .map(|(leg, mode)| {
                    let voltage_bus = match mode {
                        ControlMode::BusVoltage { bus: Some(b), .. } => network.bus_index(b)?,
                        _ => sending,
                    };
                    Ok(Target { leg, mode, voltage_bus })
                })
                .collect::<Result<Vec<_>>>()?;
            let n_legs = legs.len();
            models.push(DeviceModel {
                config: dev.clone(),
                topology,
                sending,
                legs,
                targets,
                first_current: n_currents,
                relaxed: vec![false; n_legs],
            });
            n_currents += n_legs;
        }
        let mut pinned = Vec::new();
        for d in &models {
            for t in &d.targets {
                if let ControlMode::BusVoltage { magnitude, .. } = t.mode {
                    if release_voltage_bus(&mut network, t.voltage_bus, magnitude)? {
                        pinned.push(network.buses[t.voltage_bus].id);
                    }
                }
            }
        }
        Self::from_parts(network, models, base_buses, n_currents, pinned)
    }

    fn from_parts(
        network: Network,
        devices: Vec<DeviceModel>,
        base_buses: usize,
        n_currents: usize,
        pinned: Vec<usize>,
    ) -> Result<Self> {
        let ybus = build_admittance_matrix(&network)?;
        let mut bus_currents = vec![Vec::new(); network.len()];
        for d in &devices {
            for (k, leg) in d.legs.iter().enumerate() {
                bus_currents[d.sending].push((d.current(k), 1.0));
                bus_currents[leg.aux].push((d.current(k), -1.0));
            }
        }
        Ok(Self {
            network,
            ybus,
            devices,
            base_buses,
            n_currents,
            bus_currents,
            pinned,
        })
    }

    pub fn n_bus(&self) -> usize {
        self.network.len()
    }

    /// Number of real unknowns (and equations).
    pub fn dim(&self) -> usize {
        2 * (self.n_bus() + self.n_currents)
    }

    pub fn current_col(&self, c: usize) -> usize {
        2 * self.n_bus() + 2 * c
    }

    /// J_k = (Y V)_k plus the device currents entering bus k.
    pub fn bus_current(&self, k: usize, v: &[Complex64], i: &[Complex64]) -> Complex64 {
        let mut j = self.ybus.row_dot(k, v);
        for &(c, s) in &self.bus_currents[k] {
            j += s * i[c];
        }
        j
    }

    /// Complex power leaving bus k into the network and devices.
    pub fn bus_power(&self, k: usize, v: &[Complex64], i: &[Complex64]) -> Complex64 {
        v[k] * self.bus_current(k, v, i).conj()
    }

    /// Voltage setpoint of a slack or PV bus.
    pub fn setpoint(&self, k: usize) -> f64 {
        self.network.buses[k].v_setpoint.unwrap_or(1.0)
    }

    /// Same system with one leg's control replaced by injected-voltage control.
    pub fn with_relaxed_leg(&self, device: usize, leg: usize, v: f64) -> Result<Self> {
        let mut out = self.clone();
        let d = &mut out.devices[device];
        d.config.relax_leg(leg, v)?;
        let sending = d.sending;
        if let Some(t) = d.targets.iter_mut().find(|t| t.leg == leg) {
            t.mode = ControlMode::InjectedV(v);
            t.voltage_bus = sending;
        }
        d.relaxed[leg] = true;
        Ok(out)
    }

    /// Same system with bus k held at a fixed reactive generation.
    pub fn with_pq_bus(&self, k: usize, q_gen: f64) -> Result<Self> {
        let mut out = self.clone();
        let bus = &mut out.network.buses[k];
        if bus.kind != BusKind::PV {
            return Err(Error::Topology(format!("bus {} is not a PV bus", bus.id)));
        }
        bus.kind = BusKind::PQ;
        bus.q_gen = q_gen;
        out.pinned.push(bus.id);
        Ok(out)
    }

    /// Residuals of the original equations in the shared row layout.
    pub fn residuals(&self, v: &[Complex64], i: &[Complex64]) -> Vec<f64> {
        let n = self.n_bus();
        let mut r = vec![0.0; self.dim()];
        for (k, bus) in self.network.buses.iter().enumerate() {
            let (a, b) = (2 * k, 2 * k + 1);
            match bus.kind {
                BusKind::Slack => {
                    r[a] = v[k].re - self.setpoint(k);
                    r[b] = v[k].im;
                }
                BusKind::PV => {
                    let s = self.bus_power(k, v, i);
                    r[a] = s.re - bus.injection().re;
                    r[b] = v[k].norm_sqr() - self.setpoint(k).powi(2);
                }
                BusKind::PQ | BusKind::Auxiliary => {
                    let s = self.bus_power(k, v, i) - bus.injection();
                    r[a] = s.re;
                    r[b] = s.im;
                }
            }
        }
        for d in &self.devices {
            let row = d.first_row(n);
            r[row] = d
                .legs
                .iter()
                .enumerate()
                .map(|(k, leg)| ((v[leg.aux] - v[d.sending]) * i[d.current(k)].conj()).re)
                .sum();
            for (t, target) in d.targets.iter().enumerate() {
                let leg = &d.legs[target.leg];
                let cur = i[d.current(target.leg)];
                let vi = v[d.sending];
                let vse = v[leg.aux] - vi;
                r[row + 1 + t] = match target.mode {
                    ControlMode::ActiveFlow(p) => (vi * cur.conj()).re - p,
                    ControlMode::ReactiveFlow(q) => (vi * cur.conj()).im - q,
                    ControlMode::InjectedQ(q) => (vse * cur.conj()).im - q,
                    ControlMode::BusVoltage { magnitude, .. } => {
                        v[target.voltage_bus].norm_sqr() - magnitude * magnitude
                    }
                    ControlMode::InjectedV(x) => (vse * cur.norm() / cur).im - x,
                    ControlMode::EquivReactance(x) => (vse / cur).im - x,
                };
            }
        }
        r
    }

    /// Largest absolute residual of the original equations.
    pub fn compute_mismatch(&self, v: &[Complex64], i: &[Complex64]) -> f64 {
        self.residuals(v, i)
            .iter()
            .fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
    }

    /// Voltages at their setpoints (angle zero) and every current at its
    /// configured guess.
    pub fn flat_state(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let v = self
            .network
            .buses
            .iter()
            .enumerate()
            .map(|(k, b)| match b.kind {
                BusKind::Slack | BusKind::PV => Complex64::new(self.setpoint(k), 0.0),
                _ => Complex64::new(1.0, 0.0),
            })
            .collect();
        (v, self.initial_currents())
    }

    pub fn initial_currents(&self) -> Vec<Complex64> {
        let mut i = vec![Complex64::new(0.0, 0.0); self.n_currents];
        for d in &self.devices {
            for (k, leg) in d.legs.iter().enumerate() {
                i[d.current(k)] = leg.init_current;
            }
        }
        i
    }

    /// Reactive generation a bus must supply at state (v, i).
    pub fn generator_q(&self, k: usize, v: &[Complex64], i: &[Complex64]) -> f64 {
        self.bus_power(k, v, i).im + self.network.buses[k].q_load
    }
}

/// A generator bus whose voltage is set by a series device cannot keep its
/// own voltage setpoint; it is held at the reactive limit in the direction
/// the device moves the voltage.
fn release_voltage_bus(net: &mut Network, k: usize, target: f64) -> Result<bool> {
    let bus = &mut net.buses[k];
    match bus.kind {
        BusKind::PQ | BusKind::Auxiliary => Ok(false),
        BusKind::Slack => Err(Error::InvalidDevice(format!(
            "bus {} is the slack bus; its voltage cannot be device-controlled",
            bus.id
        ))),
        BusKind::PV => {
            let own = bus.v_setpoint.unwrap_or(1.0);
            let q = if target < own { bus.q_min } else { bus.q_max };
            if !q.is_finite() {
                return Err(Error::InvalidDevice(format!(
                    "bus {} regulates its own voltage and has no reactive limit to release to",
                    bus.id
                )));
            }
            bus.kind = BusKind::PQ;
            bus.q_gen = q;
            Ok(true)
        }
    }
}
