use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Bus, BusKind, Network};
use crate::error::{Error, Result};
use crate::facts::SeriesDevice;

/// How the coupling transformer combines with the line it is spliced into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SeriesCombination {
    /// z_mj = z_ij + z_SE.
    #[default]
    ImpedanceSeries,
    /// y_mj = y_ij + y_SE, taken literally.
    AdmittanceSum,
}

/// Where the charging susceptance of a spliced line ends up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChargingPlacement {
    /// The line keeps its pi model; its sending end moves to the auxiliary bus.
    #[default]
    WithLine,
    /// Half the charging stays on bus i, half on bus j, as bus shunts.
    OriginalEnds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InsertOptions {
    pub combination: SeriesCombination,
    pub charging: ChargingPlacement,
}

/// One converter leg: sending bus i, auxiliary bus m, receiving bus j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegTopology {
    /// External (i, j) of the replaced line.
    pub original_branch: (usize, usize),
    pub receiving: usize,
    pub aux: usize,
    pub coupling_impedance: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTopology {
    pub device_id: usize,
    pub sending: usize,
    pub legs: Vec<LegTopology>,
}

impl DeviceTopology {
    pub fn aux_buses(&self) -> Vec<usize> {
        self.legs.iter().map(|l| l.aux).collect()
    }
}

fn combine(z_line: Complex64, z_se: Complex64, how: SeriesCombination) -> Complex64 {
    match how {
        SeriesCombination::ImpedanceSeries => z_line + z_se,
        SeriesCombination::AdmittanceSum => {
            if z_se.norm() == 0.0 {
                // an ideal (zero-impedance) coupling leaves the line unchanged
                z_line
            } else {
                (z_line.inv() + z_se.inv()).inv()
            }
        }
    }
}

/// Splices a series device into the network. Each leg's line i-j is rerouted
/// to start at a new auxiliary bus m (appended after all existing buses), with
/// the coupling impedance folded into the line.
pub fn insert_series_device(
    net: &Network,
    dev: &SeriesDevice,
    device_id: usize,
    opts: InsertOptions,
) -> Result<(Network, DeviceTopology)> {
    let mut out = net.clone();
    let sending_id = dev.sending_bus();
    let sending = out.bus_index(sending_id)?;
    let mut legs = Vec::new();
    for leg in dev.legs() {
        let (i_id, j_id) = (sending_id, leg.to);
        if out.branches.iter().any(|b| {
            b.origin == Some((i_id, j_id)) || b.origin == Some((j_id, i_id))
        }) {
            return Err(Error::DeviceStacking { from: i_id, to: j_id });
        }
        let candidates = out.find_branches(i_id, j_id);
        let &k = candidates
            .first()
            .ok_or(Error::BranchNotFound { from: i_id, to: j_id })?;
        let receiving = out.bus_index(j_id)?;
        let aux_id = out.max_bus_id() + 1;
        let aux = out.push_bus(Bus::new(aux_id, BusKind::Auxiliary));

        let br = &mut out.branches[k];
        br.series_impedance = combine(br.series_impedance, leg.z_se, opts.combination);
        br.origin = Some((i_id, j_id));
        if br.from == sending {
            br.from = aux;
        } else {
            br.to = aux;
        }
        if opts.charging == ChargingPlacement::OriginalEnds {
            let half = br.charging_b / 2.0;
            br.charging_b = 0.0;
            out.buses[sending].shunt_b += half;
            out.buses[receiving].shunt_b += half;
        }
        legs.push(LegTopology {
            original_branch: (i_id, j_id),
            receiving,
            aux,
            coupling_impedance: leg.z_se,
        });
    }
    Ok((
        out,
        DeviceTopology {
            device_id,
            sending,
            legs,
        },
    ))
}
