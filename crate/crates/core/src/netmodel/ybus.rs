use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::Network;
use crate::error::{Error, Result};

/// Bus admittance matrix stored as sorted sparse rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceMatrix {
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl AdmittanceMatrix {
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut acc: Vec<std::collections::BTreeMap<usize, Complex64>> = vec![Default::default(); n];
        for (i, k, y) in triplets {
            *acc[i].entry(k).or_default() += y;
        }
        Self {
            rows: acc.into_iter().map(|m| m.into_iter().collect()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, Complex64)] {
        &self.rows[i]
    }

    pub fn get(&self, i: usize, k: usize) -> Complex64 {
        match self.rows[i].binary_search_by_key(&k, |e| e.0) {
            Ok(p) => self.rows[i][p].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Row i of Y times v.
    pub fn row_dot(&self, i: usize, v: &[Complex64]) -> Complex64 {
        self.rows[i].iter().map(|&(k, y)| y * v[k]).sum()
    }

    pub fn mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.row_dot(i, v)).collect()
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, y) in row {
                m[(i, k)] = y;
            }
        }
        m
    }
}

/// Standard pi-model bus admittance matrix: series admittance y = 1/z with
/// the off-nominal tap t on the from side, half line charging at each end,
/// plus bus shunts.
pub fn build_admittance_matrix(net: &Network) -> Result<AdmittanceMatrix> {
    let n = net.len();
    let mut triplets = Vec::with_capacity(4 * net.branches.len() + n);
    for br in &net.branches {
        if br.series_impedance.norm() == 0.0 {
            return Err(Error::SingularBranch {
                from: net.buses[br.from].id,
                to: net.buses[br.to].id,
            });
        }
        let y = br.series_impedance.inv();
        let ysh = Complex64::new(0.0, br.charging_b / 2.0);
        let t = br.tap;
        let (f, k) = (br.from, br.to);
        triplets.push((f, f, (y + ysh) / t.norm_sqr()));
        triplets.push((k, k, y + ysh));
        triplets.push((f, k, -y / t.conj()));
        triplets.push((k, f, -y / t));
    }
    for (i, bus) in net.buses.iter().enumerate() {
        triplets.push((i, i, Complex64::new(bus.shunt_g, bus.shunt_b)));
    }
    Ok(AdmittanceMatrix::from_triplets(n, triplets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Branch, Bus, BusKind};

    fn two_bus(z: Complex64, b: f64) -> Network {
        let mut slack = Bus::new(1, BusKind::Slack);
        slack.v_setpoint = Some(1.0);
        let load = Bus::new(2, BusKind::PQ);
        Network::new(
            100.0,
            vec![slack, load],
            vec![Branch {
                from: 0,
                to: 1,
                series_impedance: z,
                charging_b: b,
                tap: Complex64::new(1.0, 0.0),
                origin: None,
            }],
        )
        .unwrap()
    }

    #[test]
    fn single_reactive_branch() {
        let y = build_admittance_matrix(&two_bus(Complex64::new(0.0, 0.1), 0.0)).unwrap();
        let c = |re, im| Complex64::new(re, im);
        assert!((y.get(0, 0) - c(0.0, -10.0)).norm() < 1e-12);
        assert!((y.get(0, 1) - c(0.0, 10.0)).norm() < 1e-12);
        assert!((y.get(1, 0) - c(0.0, 10.0)).norm() < 1e-12);
        assert!((y.get(1, 1) - c(0.0, -10.0)).norm() < 1e-12);
    }

    #[test]
    fn half_charging_at_each_end() {
        let z = Complex64::new(0.0, 0.1);
        let plain = build_admittance_matrix(&two_bus(z, 0.0)).unwrap();
        let charged = build_admittance_matrix(&two_bus(z, 0.2)).unwrap();
        for i in 0..2 {
            let gain = charged.get(i, i) - plain.get(i, i);
            assert!((gain - Complex64::new(0.0, 0.1)).norm() < 1e-12);
        }
        assert_eq!(charged.get(0, 1), plain.get(0, 1));
    }

    #[test]
    fn zero_impedance_is_rejected() {
        let net = two_bus(Complex64::new(0.0, 0.0), 0.0);
        assert!(matches!(
            build_admittance_matrix(&net),
            Err(Error::SingularBranch { from: 1, to: 2 })
        ));
    }
}
