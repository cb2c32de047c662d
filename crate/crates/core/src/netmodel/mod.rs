//! Network data: buses, branches, the bus admittance matrix, and splicing of
//! series devices into the topology through auxiliary buses.
//!
//! All electrical quantities are per unit on the system base. Buses keep their
//! external (case-file) numbers in [`Bus::id`]; everything else addresses buses
//! by dense internal index.

mod case;
mod insert;
mod ybus;

pub use case::parse_case;
pub use insert::{
    insert_series_device, ChargingPlacement, DeviceTopology, InsertOptions, SeriesCombination,
};
pub use ybus::{build_admittance_matrix, AdmittanceMatrix};

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BusKind {
    Slack,
    PV,
    PQ,
    Auxiliary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External bus number as written in the case file.
    pub id: usize,
    pub kind: BusKind,
    pub p_load: f64,
    pub q_load: f64,
    pub p_gen: f64,
    /// Generator reactive output; only used while the bus is PQ.
    pub q_gen: f64,
    #[serde(with = "crate::serde_float")]
    pub q_min: f64,
    #[serde(with = "crate::serde_float")]
    pub q_max: f64,
    /// Voltage magnitude setpoint for Slack and PV buses.
    pub v_setpoint: Option<f64>,
    pub shunt_g: f64,
    pub shunt_b: f64,
    /// True when a generator is attached (PV buses released to PQ keep it).
    pub has_generator: bool,
}

impl Bus {
    pub fn new(id: usize, kind: BusKind) -> Self {
        Self {
            id,
            kind,
            p_load: 0.0,
            q_load: 0.0,
            p_gen: 0.0,
            q_gen: 0.0,
            q_min: f64::NEG_INFINITY,
            q_max: f64::INFINITY,
            v_setpoint: None,
            shunt_g: 0.0,
            shunt_b: 0.0,
            has_generator: false,
        }
    }

    /// Specified complex injection S = (P_G + jQ_G) - (P_L + jQ_L).
    pub fn injection(&self) -> Complex64 {
        Complex64::new(self.p_gen - self.p_load, self.q_gen - self.q_load)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from: usize,
    pub to: usize,
    pub series_impedance: Complex64,
    pub charging_b: f64,
    /// Off-nominal complex turns ratio at the `from` end (1 when absent).
    pub tap: Complex64,
    /// External endpoints of the line this branch replaced, when a series
    /// device was spliced into it.
    pub origin: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    index: BTreeMap<usize, usize>,
}

impl Network {
    pub fn new(base_mva: f64, buses: Vec<Bus>, branches: Vec<Branch>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (k, bus) in buses.iter().enumerate() {
            if index.insert(bus.id, k).is_some() {
                return Err(Error::Topology(format!("duplicate bus id {}", bus.id)));
            }
        }
        let net = Self {
            base_mva,
            buses,
            branches,
            index,
        };
        net.validate()?;
        Ok(net)
    }

    fn validate(&self) -> Result<()> {
        let slacks = self
            .buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .count();
        if slacks != 1 {
            return Err(Error::Topology(format!(
                "expected exactly one slack bus, found {slacks}"
            )));
        }
        for bus in &self.buses {
            match (bus.kind, bus.v_setpoint) {
                (BusKind::Slack | BusKind::PV, Some(v)) if v > 0.0 => {}
                (BusKind::Slack | BusKind::PV, _) => {
                    return Err(Error::Topology(format!(
                        "bus {} needs a positive voltage setpoint",
                        bus.id
                    )))
                }
                _ => {}
            }
        }
        for br in &self.branches {
            if br.from == br.to {
                return Err(Error::Topology(format!(
                    "branch at bus {} connects a bus to itself",
                    self.buses[br.from].id
                )));
            }
            if br.from >= self.buses.len() || br.to >= self.buses.len() {
                return Err(Error::Topology("branch endpoint out of range".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.buses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buses.is_empty()
    }

    /// Internal index of an external bus number.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn bus_index(&self, id: usize) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::Topology(format!("unknown bus {id}")))
    }

    pub fn slack(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.kind == BusKind::Slack)
            .expect("validated network has a slack bus")
    }

    pub(crate) fn push_bus(&mut self, bus: Bus) -> usize {
        let k = self.buses.len();
        self.index.insert(bus.id, k);
        self.buses.push(bus);
        k
    }

    pub fn max_bus_id(&self) -> usize {
        self.buses.iter().map(|b| b.id).max().unwrap_or(0)
    }

    /// Indices of branches connecting two external bus numbers, in either orientation.
    pub fn find_branches(&self, a: usize, b: usize) -> Vec<usize> {
        let (Some(ia), Some(ib)) = (self.index_of(a), self.index_of(b)) else {
            return Vec::new();
        };
        self.branches
            .iter()
            .enumerate()
            .filter(|(_, br)| (br.from == ia && br.to == ib) || (br.from == ib && br.to == ia))
            .map(|(k, _)| k)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Network = serde_json::from_str(text)?;
        net.validate()?;
        Ok(net)
    }
}
