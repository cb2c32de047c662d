//! Newton-Raphson on the original equations in rectangular coordinates,
//! using the same unknowns and row layout as the FFHE solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::facts::ControlMode;
use crate::ffhe::EmbeddingConstants;
use crate::netmodel::BusKind;
use crate::solution::{Options, Solution, Solver, Stopwatch};
use crate::system::PowerSystem;

const J: Complex64 = Complex64::new(0.0, 1.0);

fn put(a: &mut DMatrix<f64>, r: usize, c: usize, pair: (f64, f64)) {
    a[(r, c)] += pair.0;
    a[(r, c + 1)] += pair.1;
}

/// Analytic Jacobian of [`PowerSystem::residuals`] at (v, i).
pub fn jacobian(sys: &PowerSystem, v: &[Complex64], i: &[Complex64]) -> DMatrix<f64> {
    let dim = sys.dim();
    let mut a = DMatrix::zeros(dim, dim);
    for (k, bus) in sys.network.buses.iter().enumerate() {
        let (re, im) = (2 * k, 2 * k + 1);
        if bus.kind == BusKind::Slack {
            a[(re, re)] = 1.0;
            a[(im, im)] = 1.0;
            continue;
        }
        let pv = bus.kind == BusKind::PV;
        let jk = sys.bus_current(k, v, i).conj();
        for &(l, y) in sys.ybus.row(k) {
            let mut d_re = v[k] * y.conj();
            let mut d_im = -J * v[k] * y.conj();
            if l == k {
                d_re += jk;
                d_im += J * jk;
            }
            a[(re, 2 * l)] += d_re.re;
            a[(re, 2 * l + 1)] += d_im.re;
            if !pv {
                a[(im, 2 * l)] += d_re.im;
                a[(im, 2 * l + 1)] += d_im.im;
            }
        }
        if !sys.ybus.row(k).iter().any(|&(l, _)| l == k) {
            a[(re, re)] += jk.re;
            a[(re, im)] += (J * jk).re;
            if !pv {
                a[(im, re)] += jk.im;
                a[(im, im)] += (J * jk).im;
            }
        }
        for &(c, s) in &sys.bus_currents[k] {
            let col = sys.current_col(c);
            let d_re = s * v[k];
            let d_im = -J * s * v[k];
            a[(re, col)] += d_re.re;
            a[(re, col + 1)] += d_im.re;
            if !pv {
                a[(im, col)] += d_re.im;
                a[(im, col + 1)] += d_im.im;
            }
        }
        if pv {
            a[(im, re)] = 2.0 * v[k].re;
            a[(im, im)] = 2.0 * v[k].im;
        }
    }

    for d in &sys.devices {
        let row0 = d.first_row(sys.n_bus());
        let s = d.sending;
        let vi = v[s];
        for (k, leg) in d.legs.iter().enumerate() {
            let c = d.current(k);
            let cur = i[c];
            let delta = v[leg.aux] - vi;
            put(&mut a, row0, 2 * leg.aux, (cur.re, cur.im));
            put(&mut a, row0, 2 * s, (-cur.re, -cur.im));
            put(&mut a, row0, sys.current_col(c), (delta.re, delta.im));
        }
        for (t, target) in d.targets.iter().enumerate() {
            let r = row0 + 1 + t;
            let leg = &d.legs[target.leg];
            let c = d.current(target.leg);
            let col = sys.current_col(c);
            let cur = i[c];
            let m = leg.aux;
            let delta = v[m] - vi;
            match target.mode {
                ControlMode::ActiveFlow(_) => {
                    put(&mut a, r, 2 * s, (cur.re, cur.im));
                    put(&mut a, r, col, (vi.re, vi.im));
                }
                ControlMode::ReactiveFlow(_) => {
                    put(&mut a, r, 2 * s, (-cur.im, cur.re));
                    put(&mut a, r, col, (vi.im, -vi.re));
                }
                ControlMode::InjectedQ(_) => {
                    put(&mut a, r, 2 * m, (-cur.im, cur.re));
                    put(&mut a, r, 2 * s, (cur.im, -cur.re));
                    put(&mut a, r, col, (delta.im, -delta.re));
                }
                ControlMode::BusVoltage { .. } => {
                    let b = target.voltage_bus;
                    put(&mut a, r, 2 * b, (2.0 * v[b].re, 2.0 * v[b].im));
                }
                ControlMode::InjectedV(_) => {
                    let mag = cur.norm();
                    let u = cur.conj() / mag;
                    put(&mut a, r, 2 * m, (u.im, u.re));
                    put(&mut a, r, 2 * s, (-u.im, -u.re));
                    let du_re = 1.0 / mag - cur.conj() * cur.re / mag.powi(3);
                    let du_im = -J / mag - cur.conj() * cur.im / mag.powi(3);
                    put(&mut a, r, col, ((delta * du_re).im, (delta * du_im).im));
                }
                ControlMode::EquivReactance(_) => {
                    let f = cur.inv();
                    put(&mut a, r, 2 * m, (f.im, f.re));
                    put(&mut a, r, 2 * s, (-f.im, -f.re));
                    let g = -delta * f * f;
                    put(&mut a, r, col, (g.im, (J * g).im));
                }
            }
        }
    }
    a
}

fn pack(v: &[Complex64], i: &[Complex64]) -> DVector<f64> {
    DVector::from_iterator(
        2 * (v.len() + i.len()),
        v.iter().chain(i).flat_map(|z| [z.re, z.im]),
    )
}

fn unpack(x: &DVector<f64>, nb: usize, nc: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let z = |k: usize| Complex64::new(x[2 * k], x[2 * k + 1]);
    ((0..nb).map(z).collect(), (nb..nb + nc).map(z).collect())
}

fn max_abs(r: &[f64]) -> f64 {
    r.iter()
        .fold(0.0, |m, x| if x.is_nan() { f64::INFINITY } else { m.max(x.abs()) })
}

/// One Newton update of (v, i) in place.
fn newton_step(sys: &PowerSystem, v: &mut Vec<Complex64>, i: &mut Vec<Complex64>, r: &[f64]) -> Result<()> {
    let jac = jacobian(sys, v, i);
    let rhs = DVector::from_column_slice(r);
    let dx = jac
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Jacobian".into()))?;
    if dx.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("singular Jacobian".into()));
    }
    let x = pack(v, i) - dx;
    let (nv, ni) = unpack(&x, v.len(), i.len());
    *v = nv;
    *i = ni;
    Ok(())
}

/// Newton iteration from (v0, i0) to `opts.tol`. Stops early, unconverged,
/// after `opts.max_iters` iterations or three consecutive mismatch increases.
pub fn nr_solve_from(sys: &PowerSystem, v0: &[Complex64], i0: &[Complex64], opts: &Options) -> Result<Solution> {
    let clock = Stopwatch::start();
    let (mut v, mut i) = (v0.to_vec(), i0.to_vec());
    let mut r = sys.residuals(&v, &i);
    let mut m = max_abs(&r);
    let mut history = vec![m];
    let mut best = (m, v.clone(), i.clone(), 0);
    let mut iters = 0;
    let mut rises = 0;
    while m > opts.tol && iters < opts.max_iters && rises < 3 && m.is_finite() {
        newton_step(sys, &mut v, &mut i, &r)?;
        iters += 1;
        r = sys.residuals(&v, &i);
        let next = max_abs(&r);
        log::debug!("nr iteration {iters}: mismatch {next:e}");
        rises = if next > m { rises + 1 } else { 0 };
        m = next;
        history.push(m);
        if m < best.0 {
            best = (m, v.clone(), i.clone(), iters);
        }
    }
    let converged = m <= opts.tol;
    let (max_mismatch, voltages, currents, terms) = if converged { (m, v, i, iters) } else { best };
    Ok(Solution {
        solver: Solver::Nr,
        voltages,
        currents,
        max_mismatch,
        terms,
        converged,
        wall_time: clock.seconds(),
        history,
    })
}

/// Newton iteration from the flat state.
pub fn nr_solve(sys: &PowerSystem, opts: &Options) -> Result<Solution> {
    let (v, i) = sys.flat_state();
    nr_solve_from(sys, &v, &i, opts)
}

/// Exactly `k` Newton iterations from the flat state, returned as series
/// constants. Falls back to flat constants if the iteration breaks down.
pub fn warm_start(sys: &PowerSystem, k: usize) -> Result<EmbeddingConstants> {
    if k == 0 {
        return Err(Error::InvalidOption("warm start needs at least one iteration".into()));
    }
    let (mut v, mut i) = sys.flat_state();
    for step in 0..k {
        let r = sys.residuals(&v, &i);
        let ok = newton_step(sys, &mut v, &mut i, &r).is_ok()
            && v.iter().chain(&i).all(|z| z.re.is_finite() && z.im.is_finite());
        if !ok {
            log::warn!("warm start broke down at iteration {}; using flat constants", step + 1);
            return Ok(EmbeddingConstants::flat(sys));
        }
    }
    Ok(EmbeddingConstants::from_state(&v, &i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{Branch, Bus, Network};

    fn one_line(p: f64, q: f64) -> PowerSystem {
        let mut slack = Bus::new(1, BusKind::Slack);
        slack.v_setpoint = Some(1.0);
        let mut pq = Bus::new(2, BusKind::PQ);
        pq.p_load = p;
        pq.q_load = q;
        let net = Network::new(
            100.0,
            vec![slack, pq],
            vec![Branch {
                from: 0,
                to: 1,
                series_impedance: Complex64::new(0.0, 0.1),
                charging_b: 0.0,
                tap: Complex64::new(1.0, 0.0),
                origin: None,
            }],
        )
        .unwrap();
        PowerSystem::new(&net, &[], Default::default()).unwrap()
    }

    #[test]
    fn closed_form_two_bus() {
        let (p, q, x) = (0.8, 0.3, 0.1);
        let sys = one_line(p, q);
        let sol = nr_solve(&sys, &Options::default()).unwrap();
        assert!(sol.converged);
        let b = 2.0 * q * x - 1.0;
        let u = (-b + (b * b - 4.0 * x * x * (p * p + q * q)).sqrt()) / 2.0;
        assert!((sol.voltages[1].norm() - u.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn warm_start_rejects_zero_iterations() {
        let sys = one_line(0.1, 0.0);
        assert!(matches!(warm_start(&sys, 0), Err(Error::InvalidOption(_))));
    }
}
