//! Bus blocks of the coefficient matrix and bus entries of the known vector.
//!
//! Each bus equation is embedded as conj(V_k) J_k = C_k* W_k + alpha (S_k* - C_k* W_k)
//! with W_k = J_k evaluated at the constants. Comparing alpha^n coefficients
//! gives C_k* J_k[n] + conj(V_k[n]) W_k = known, which splits into the real
//! rows below.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{EmbeddingConstants, FfheState};
use crate::netmodel::{AdmittanceMatrix, BusKind};
use crate::system::PowerSystem;

/// Real coefficients of bus i's equation with respect to (V_k,re, V_k,im).
///
/// The real row uses (`mu`, `xi`), the imaginary row (`mu_star`, `xi_star`).
/// Off the diagonal `mu_star = -xi` and `xi_star = mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MuXi {
    pub mu: f64,
    pub xi: f64,
    pub mu_star: f64,
    pub xi_star: f64,
}

/// Entries for the network part of row i, column k. On the diagonal the sum
/// W_i = sum_k Y_ik C_k enters; device terms are added separately.
pub fn mu_xi_entries(y: &AdmittanceMatrix, c: &[Complex64], i: usize, k: usize) -> MuXi {
    let yik = y.get(i, k);
    let (g, b) = (yik.re, yik.im);
    let ci = c[i];
    let mu = g * ci.re + b * ci.im;
    let xi = g * ci.im - b * ci.re;
    if i != k {
        return MuXi {
            mu,
            xi,
            mu_star: -xi,
            xi_star: mu,
        };
    }
    let w = y.row_dot(i, c);
    MuXi {
        mu: mu + w.re,
        xi: xi + w.im,
        mu_star: -g * ci.im + b * ci.re + w.im,
        xi_star: g * ci.re + b * ci.im - w.re,
    }
}

/// Writes the rows of bus k into `a`.
pub(super) fn bus_rows(sys: &PowerSystem, consts: &EmbeddingConstants, k: usize, a: &mut DMatrix<f64>) {
    let (re, im) = (2 * k, 2 * k + 1);
    let bus = &sys.network.buses[k];
    let ck = consts.c[k];
    match bus.kind {
        BusKind::Slack => {
            a[(re, re)] = 1.0;
            a[(im, im)] = 1.0;
        }
        BusKind::PV | BusKind::PQ | BusKind::Auxiliary => {
            let full = bus.kind != BusKind::PV;
            for &(l, _) in sys.ybus.row(k) {
                let e = mu_xi_entries(&sys.ybus, &consts.c, k, l);
                a[(re, 2 * l)] += e.mu;
                a[(re, 2 * l + 1)] += e.xi;
                if full {
                    a[(im, 2 * l)] += e.mu_star;
                    a[(im, 2 * l + 1)] += e.xi_star;
                }
            }
            for &(c, s) in &sys.bus_currents[k] {
                let d = consts.d[c] * s;
                // conj(V_k[n]) s D_c
                a[(re, re)] += d.re;
                a[(re, im)] += d.im;
                // s C_k* I_c[n]
                let col = sys.current_col(c);
                a[(re, col)] += s * ck.re;
                a[(re, col + 1)] += s * ck.im;
                if full {
                    a[(im, re)] += d.im;
                    a[(im, im)] -= d.re;
                    a[(im, col)] -= s * ck.im;
                    a[(im, col + 1)] += s * ck.re;
                }
            }
            if !full {
                // |V_k|^2 row, halved
                a[(im, re)] = ck.re;
                a[(im, im)] = ck.im;
            }
        }
    }
}

/// W_k: bus current at the constants.
pub(super) fn w_at_constants(sys: &PowerSystem, consts: &EmbeddingConstants, k: usize) -> Complex64 {
    sys.bus_current(k, &consts.c, &consts.d)
}

/// Order-n known entries (real row, imaginary row) of bus k.
pub fn base_known_terms(state: &FfheState<'_>, k: usize, n: usize) -> [f64; 2] {
    let sys = state.system();
    let consts = state.constants();
    let bus = &sys.network.buses[k];
    let eta = if n == 1 { 1.0 } else { 0.0 };
    let ck = consts.c[k];
    match bus.kind {
        BusKind::Slack => {
            let g = eta * (Complex64::new(sys.setpoint(k), 0.0) - ck);
            [g.re, g.im]
        }
        BusKind::PV => {
            let w = state.j_coeff(0, k);
            let hist = state.power_history(k, n);
            let p = eta * (bus.injection().re - (ck.conj() * w).re) - hist.re;
            let vsp = sys.setpoint(k);
            let gv = 0.5 * eta * (vsp * vsp - ck.norm_sqr()) - 0.5 * state.square_history(k, n);
            [p, gv]
        }
        BusKind::PQ | BusKind::Auxiliary => {
            let w = state.j_coeff(0, k);
            let g = eta * (bus.injection().conj() - ck.conj() * w) - state.power_history(k, n);
            [g.re, g.im]
        }
    }
}
