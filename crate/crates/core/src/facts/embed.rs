//! Device rows of the coefficient matrix and device entries of the known
//! vector.
//!
//! Each device equation g(x) = target is embedded as
//! g(x(alpha)) = g(x0) + alpha (target - g(x0)), where x0 are the constants.
//! The alpha^n coefficient is linear in the order-n unknowns; that linear
//! part fills the matrix row and everything else moves to the known side.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ControlMode;
use crate::error::Result;
use crate::ffhe::{EmbeddingConstants, FfheState};
use crate::system::{DeviceModel, PowerSystem};

fn add(a: &mut DMatrix<f64>, r: usize, c: usize, pair: (f64, f64)) {
    a[(r, c)] += pair.0;
    a[(r, c + 1)] += pair.1;
}

fn neg(p: (f64, f64)) -> (f64, f64) {
    (-p.0, -p.1)
}

/// Writes the balance row and one row per control target of device `d`.
pub(crate) fn device_rows(sys: &PowerSystem, consts: &EmbeddingConstants, d: &DeviceModel, a: &mut DMatrix<f64>) {
    let n = sys.n_bus();
    let row0 = d.first_row(n);
    let i = d.sending;
    let ci = consts.c[i];

    for (k, leg) in d.legs.iter().enumerate() {
        let c = d.current(k);
        let dc = consts.d[c];
        let delta = consts.c[leg.aux] - ci;
        add(a, row0, 2 * leg.aux, (dc.re, dc.im));
        add(a, row0, 2 * i, (-dc.re, -dc.im));
        add(a, row0, sys.current_col(c), (delta.re, delta.im));
    }

    for (t, target) in d.targets.iter().enumerate() {
        let r = row0 + 1 + t;
        let leg = &d.legs[target.leg];
        let c = d.current(target.leg);
        let col = sys.current_col(c);
        let dc = consts.d[c];
        let m = leg.aux;
        let delta = consts.c[m] - ci;
        match target.mode {
            ControlMode::ActiveFlow(_) => {
                add(a, r, 2 * i, (dc.re, dc.im));
                add(a, r, col, (ci.re, ci.im));
            }
            ControlMode::ReactiveFlow(_) => {
                add(a, r, 2 * i, (-dc.im, dc.re));
                add(a, r, col, (ci.im, -ci.re));
            }
            ControlMode::InjectedQ(_) => {
                add(a, r, 2 * m, (-dc.im, dc.re));
                add(a, r, 2 * i, (dc.im, -dc.re));
                add(a, r, col, (delta.im, -delta.re));
            }
            ControlMode::BusVoltage { .. } => {
                let cb = consts.c[target.voltage_bus];
                add(a, r, 2 * target.voltage_bus, (cb.re, cb.im));
            }
            ControlMode::InjectedV(_) => {
                let mag = dc.norm();
                let u = dc.conj() / mag;
                add(a, r, 2 * m, (u.im, u.re));
                add(a, r, 2 * i, neg((u.im, u.re)));
                let kk = -delta * mag / (dc * dc);
                let l = (delta / dc).im / mag;
                add(a, r, col, (kk.im + dc.re * l, kk.re + dc.im * l));
            }
            ControlMode::EquivReactance(_) => {
                let f0 = dc.inv();
                add(a, r, 2 * m, (f0.im, f0.re));
                add(a, r, 2 * i, neg((f0.im, f0.re)));
                let kk = -delta / (dc * dc);
                add(a, r, col, (kk.im, kk.re));
            }
        }
    }
}

/// sum_{d=1}^{n-1} x[d] conj(y[n-d])
fn cross(x: impl Fn(usize) -> Complex64, y: impl Fn(usize) -> Complex64, n: usize) -> Complex64 {
    (1..n).map(|d| x(d) * y(n - d).conj()).sum()
}

/// Writes the order-n known entries of device `d` into `b`.
pub(crate) fn device_known_terms(state: &FfheState<'_>, d: &DeviceModel, n: usize, b: &mut DVector<f64>) -> Result<()> {
    let sys = state.system();
    let consts = state.constants();
    let eta = if n == 1 { 1.0 } else { 0.0 };
    let row0 = d.first_row(sys.n_bus());
    let i = d.sending;
    let ci = consts.c[i];
    let vi = |o: usize| state.v_coeff(o, i);

    let mut pbe = 0.0;
    for (k, leg) in d.legs.iter().enumerate() {
        let c = d.current(k);
        let delta0 = consts.c[leg.aux] - ci;
        let delta = |o: usize| state.v_coeff(o, leg.aux) - vi(o);
        pbe += -eta * (delta0 * consts.d[c].conj()).re - cross(delta, |o| state.i_coeff(o, c), n).re;
    }
    b[row0] = pbe;

    for (t, target) in d.targets.iter().enumerate() {
        let leg = &d.legs[target.leg];
        let c = d.current(target.leg);
        let dc = consts.d[c];
        let cur = |o: usize| state.i_coeff(o, c);
        let delta = |o: usize| state.v_coeff(o, leg.aux) - vi(o);
        let delta0 = consts.c[leg.aux] - ci;
        b[row0 + 1 + t] = match target.mode {
            ControlMode::ActiveFlow(p) => eta * (p - (ci * dc.conj()).re) - cross(vi, cur, n).re,
            ControlMode::ReactiveFlow(q) => eta * (q - (ci * dc.conj()).im) - cross(vi, cur, n).im,
            ControlMode::InjectedQ(q) => eta * (q - (delta0 * dc.conj()).im) - cross(delta, cur, n).im,
            ControlMode::BusVoltage { magnitude, .. } => {
                let bus = target.voltage_bus;
                let vb = |o: usize| state.v_coeff(o, bus);
                let hist = cross(vb, vb, n).re;
                0.5 * (eta * (magnitude * magnitude - consts.c[bus].norm_sqr()) - hist)
            }
            ControlMode::InjectedV(x) => {
                let f = &state.recip[c].as_ref().expect("companion series allocated").coeffs;
                let m = &state.mag[c].as_ref().expect("companion series allocated").coeffs;
                let (f_part, m_part) = partial_companions(f, m, cur, dc, n);
                // (M F)[e] for e < n, and the order-n value with partial companions
                let mf = |e: usize| -> Complex64 { (0..=e).map(|q| m[q] * f[e - q]).sum() };
                let mf_n: Complex64 = (1..n).map(|q| m[q] * f[n - q]).sum::<Complex64>()
                    + m[0] * f_part
                    + m_part * f[0];
                let hist: Complex64 = (1..n).map(|q| delta(q) * mf(n - q)).sum::<Complex64>() + delta0 * mf_n;
                eta * (x - (delta0 * m[0] * f[0]).im) - hist.im
            }
            ControlMode::EquivReactance(x) => {
                let f = &state.recip[c].as_ref().expect("companion series allocated").coeffs;
                let m = &state.mag[c].as_ref().expect("companion series allocated").coeffs;
                let (f_part, _) = partial_companions(f, m, cur, dc, n);
                let hist: Complex64 = (1..n).map(|q| delta(q) * f[n - q]).sum::<Complex64>() + delta0 * f_part;
                eta * (x - (delta0 * f[0]).im) - hist.im
            }
        };
    }
    Ok(())
}

/// Order-n reciprocal and magnitude coefficients computed with I[n] = 0.
fn partial_companions(
    f: &[Complex64],
    m: &[f64],
    cur: impl Fn(usize) -> Complex64,
    d0: Complex64,
    n: usize,
) -> (Complex64, f64) {
    let f_part = -(1..n).map(|q| f[q] * cur(n - q)).sum::<Complex64>() / d0;
    let cross: f64 = (1..n).map(|q| (cur(q) * cur(n - q).conj()).re).sum();
    let square: f64 = (1..n).map(|q| m[q] * m[n - q]).sum();
    (f_part, (cross - square) / (2.0 * d0.norm()))
}
