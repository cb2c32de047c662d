//! Flexible holomorphic embedding solver.
//!
//! Every unknown becomes a power series in alpha whose constant term is an
//! arbitrary nonzero guess (C_k for voltages, D for device currents). The
//! order-n coefficients solve a real linear system whose matrix depends only
//! on the constants, so it is factorized once and reused at every order.

mod assemble;

pub use assemble::{base_known_terms, mu_xi_entries, MuXi};

use nalgebra::{DMatrix, DVector, LU};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::embed;
use crate::series::{pade_at_one, MagnitudeSeries, ReciprocalSeries, EPS_ZERO};
use crate::solution::{Options, Solution, Solver, Stopwatch};
use crate::system::PowerSystem;

/// Constant terms of the voltage and current series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    pub c: Vec<Complex64>,
    pub d: Vec<Complex64>,
}

/// Size applied to device currents that would otherwise start at zero.
pub const EPS_NUDGE: f64 = 1e-3;

impl EmbeddingConstants {
    /// C_k = 1 on every bus; D from each leg's configured guess.
    pub fn flat(sys: &PowerSystem) -> Self {
        Self {
            c: vec![Complex64::new(1.0, 0.0); sys.n_bus()],
            d: sys.initial_currents(),
        }
    }

    /// Constants taken from a state, with vanishing currents nudged to
    /// `EPS_NUDGE` at zero angle.
    pub fn from_state(v: &[Complex64], i: &[Complex64]) -> Self {
        Self {
            c: v.to_vec(),
            d: i
                .iter()
                .map(|&x| if x.norm() <= EPS_ZERO { Complex64::new(EPS_NUDGE, 0.0) } else { x })
                .collect(),
        }
    }

    pub fn validate(&self, sys: &PowerSystem) -> Result<()> {
        if self.c.len() != sys.n_bus() || self.d.len() != sys.n_currents {
            return Err(Error::InvalidOption(format!(
                "constants sized {}+{} for a system with {} buses and {} currents",
                self.c.len(),
                self.d.len(),
                sys.n_bus(),
                sys.n_currents
            )));
        }
        if let Some(k) = self.c.iter().position(|c| !(c.norm() > EPS_ZERO)) {
            return Err(Error::InvalidOption(format!(
                "voltage constant of bus {} is zero",
                sys.network.buses[k].id
            )));
        }
        if let Some(k) = self.d.iter().position(|d| !(d.norm() > EPS_ZERO)) {
            return Err(Error::InvalidOption(format!("current constant {k} is zero")));
        }
        Ok(())
    }
}

/// Dense coefficient matrix; rows and columns follow the system layout.
pub fn assemble_coefficient_matrix(sys: &PowerSystem, consts: &EmbeddingConstants) -> DMatrix<f64> {
    let dim = sys.dim();
    let mut a = DMatrix::zeros(dim, dim);
    for k in 0..sys.n_bus() {
        assemble::bus_rows(sys, consts, k, &mut a);
    }
    for d in &sys.devices {
        embed::device_rows(sys, consts, d, &mut a);
    }
    a
}

/// Series coefficients computed so far, plus the factorized matrix.
pub struct FfheState<'a> {
    sys: &'a PowerSystem,
    consts: EmbeddingConstants,
    lu: LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// v[n][k], i[n][c], j[n][k] = (Y V[n])_k + device currents at bus k.
    v: Vec<Vec<Complex64>>,
    i: Vec<Vec<Complex64>>,
    j: Vec<Vec<Complex64>>,
    pub(crate) recip: Vec<Option<ReciprocalSeries>>,
    pub(crate) mag: Vec<Option<MagnitudeSeries>>,
}

fn describe_slot(sys: &PowerSystem, consts: &EmbeddingConstants, slot: usize) -> String {
    let n = sys.n_bus();
    if slot < 2 * n {
        let k = slot / 2;
        format!("bus {} (C = {:.4})", sys.network.buses[k].id, consts.c[k])
    } else {
        let c = (slot - 2 * n) / 2;
        format!("device current {c} (D = {:.4})", consts.d[c])
    }
}

impl<'a> FfheState<'a> {
    pub fn new(sys: &'a PowerSystem, consts: EmbeddingConstants) -> Result<Self> {
        consts.validate(sys)?;
        let a = assemble_coefficient_matrix(sys, &consts);
        let scale = a.amax().max(1.0);
        let lu = a.lu();
        let u = lu.u();
        if let Some(p) = (0..u.nrows()).find(|&p| !(u[(p, p)].abs() > 1e-13 * scale)) {
            return Err(Error::SingularMatrix(format!(
                "zero pivot near {}; choose different constants",
                describe_slot(sys, &consts, p)
            )));
        }
        let j0 = (0..sys.n_bus())
            .map(|k| assemble::w_at_constants(sys, &consts, k))
            .collect();
        let mut recip = vec![None; sys.n_currents];
        let mut mag = vec![None; sys.n_currents];
        for d in &sys.devices {
            for t in &d.targets {
                if t.mode.needs_reciprocal() {
                    let c = d.current(t.leg);
                    let i0 = crate::series::ComplexSeries::new(consts.d[c]);
                    recip[c] = Some(ReciprocalSeries::start(&i0)?);
                    mag[c] = Some(MagnitudeSeries::start(&i0)?);
                }
            }
        }
        Ok(Self {
            sys,
            v: vec![consts.c.clone()],
            i: vec![consts.d.clone()],
            j: vec![j0],
            consts,
            lu,
            recip,
            mag,
        })
    }

    pub fn system(&self) -> &PowerSystem {
        self.sys
    }

    pub fn constants(&self) -> &EmbeddingConstants {
        &self.consts
    }

    /// Highest order computed.
    pub fn order(&self) -> usize {
        self.v.len() - 1
    }

    pub fn v_coeff(&self, n: usize, k: usize) -> Complex64 {
        self.v[n][k]
    }

    pub fn i_coeff(&self, n: usize, c: usize) -> Complex64 {
        self.i[n][c]
    }

    pub(crate) fn j_coeff(&self, n: usize, k: usize) -> Complex64 {
        self.j[n][k]
    }

    pub fn voltage_series(&self, k: usize) -> crate::series::ComplexSeries {
        crate::series::ComplexSeries::from_coeffs(self.v.iter().map(|o| o[k]).collect())
    }

    pub fn current_series(&self, c: usize) -> crate::series::ComplexSeries {
        crate::series::ComplexSeries::from_coeffs(self.i.iter().map(|o| o[c]).collect())
    }

    /// sum_{d=1}^{n-1} conj(V_k[d]) J_k[n-d]
    pub(crate) fn power_history(&self, k: usize, n: usize) -> Complex64 {
        (1..n).map(|d| self.v[d][k].conj() * self.j[n - d][k]).sum()
    }

    /// sum_{d=1}^{n-1} V_k[d] conj(V_k[n-d]), which is real.
    pub(crate) fn square_history(&self, k: usize, n: usize) -> f64 {
        (1..n).map(|d| (self.v[d][k] * self.v[n - d][k].conj()).re).sum()
    }

    /// Known vector of order n (requires orders 0..n-1).
    pub fn known_vector(&self, n: usize) -> Result<DVector<f64>> {
        let mut b = DVector::zeros(self.sys.dim());
        for k in 0..self.sys.n_bus() {
            let [re, im] = base_known_terms(self, k, n);
            b[2 * k] = re;
            b[2 * k + 1] = im;
        }
        for d in &self.sys.devices {
            embed::device_known_terms(self, d, n, &mut b)?;
        }
        Ok(b)
    }

    /// Computes and appends the next order of every series.
    pub fn step(&mut self) -> Result<()> {
        let n = self.order() + 1;
        let b = self.known_vector(n)?;
        let x = self
            .lu
            .solve(&b)
            .ok_or_else(|| Error::Numerical(format!("linear solve failed at order {n}")))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite coefficients at order {n}")));
        }
        let nb = self.sys.n_bus();
        let vn: Vec<Complex64> = (0..nb).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
        let inn: Vec<Complex64> = (0..self.sys.n_currents)
            .map(|c| {
                let col = self.sys.current_col(c);
                Complex64::new(x[col], x[col + 1])
            })
            .collect();
        let jn = (0..nb).map(|k| self.sys.bus_current(k, &vn, &inn)).collect();
        self.v.push(vn);
        self.i.push(inn);
        self.j.push(jn);
        for c in 0..self.sys.n_currents {
            if self.recip[c].is_some() {
                let series = self.current_series(c);
                self.recip[c].as_mut().unwrap().advance(&series)?;
                self.mag[c].as_mut().unwrap().advance(&series)?;
            }
        }
        Ok(())
    }

    /// Unknowns evaluated at alpha = 1.
    pub fn evaluate(&self, pade: bool) -> (Vec<Complex64>, Vec<Complex64>) {
        let eval = |coeffs: Vec<Complex64>| -> Complex64 {
            if pade {
                if let Some(v) = pade_at_one(&coeffs) {
                    return v;
                }
            }
            coeffs.iter().sum()
        };
        let v = (0..self.sys.n_bus())
            .map(|k| eval(self.v.iter().map(|o| o[k]).collect()))
            .collect();
        let i = (0..self.sys.n_currents)
            .map(|c| eval(self.i.iter().map(|o| o[c]).collect()))
            .collect();
        (v, i)
    }
}

/// Advances `state` by one order.
pub fn recurrence_step(state: &mut FfheState<'_>) -> Result<()> {
    state.step()
}

/// True once the last five orders each raised the mismatch and the total
/// growth across them exceeds ten.
pub(crate) fn diverging(history: &[f64]) -> bool {
    if history.len() < 6 {
        return false;
    }
    let tail = &history[history.len() - 6..];
    tail.windows(2).all(|w| w[1] > w[0]) && tail[5] > 10.0 * tail[0]
}

/// Runs the recurrence until the original equations are met to `opts.tol`,
/// `opts.n_max` is reached, or the mismatch diverges. A non-converged result
/// carries the best iterate seen.
pub fn ffhe_solve(sys: &PowerSystem, consts: &EmbeddingConstants, opts: &Options) -> Result<Solution> {
    let clock = Stopwatch::start();
    let mut state = FfheState::new(sys, consts.clone())?;
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<Complex64>, Vec<Complex64>, usize)> = None;
    let mut converged = false;
    for n in 1..=opts.n_max {
        state.step()?;
        let (v, i) = state.evaluate(opts.pade);
        let m = sys.compute_mismatch(&v, &i);
        history.push(m);
        log::debug!("ffhe order {n}: mismatch {m:e}");
        if best.as_ref().map_or(true, |b| m < b.0) {
            best = Some((m, v, i, n + 1));
        }
        if m <= opts.tol {
            converged = true;
            break;
        }
        if !m.is_finite() || diverging(&history) {
            break;
        }
    }
    let (max_mismatch, voltages, currents, terms) = best.unwrap_or_else(|| {
        let m = sys.compute_mismatch(&consts.c, &consts.d);
        (m, consts.c.clone(), consts.d.clone(), 1)
    });
    Ok(Solution {
        solver: Solver::Ffhe,
        voltages,
        currents,
        max_mismatch,
        terms: if converged { state.order() + 1 } else { terms },
        converged,
        wall_time: clock.seconds(),
        history,
    })
}
